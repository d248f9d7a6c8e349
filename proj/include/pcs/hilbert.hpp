// hilbert.hpp: truncated Jaynes-Cummings Hilbert space, operators, Hamiltonian
// and dressed states.
//
// Basis layout: index = 2 * n_fock + atom, with atom 0 = |g>, 1 = |e>, so the
// field factor is the major index. sigma_z has eigenvalues -1/2 (|g>) and +1/2
// (|e>); with that convention (sigma_z + a^dag a) is constant, n - 1/2, on
// every couplet {|n-1,e>, |n,g>}. All rates are in units of the cavity
// damping kappa, and only the rotating-frame detunings enter.

#pragma once

#include "pcs/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcs {

struct SystemParams {
    double g = 9.0;          // atom-field coupling
    double kappa = 1.0;      // cavity damping; the unit of every other rate
    double gamma = 2.0;      // free-space emission rate
    double detuning1 = 9.0;  // omega - omega_1; equals g_f when a subensemble is selected
    double delta = 9.0 * (2.0 + std::sqrt(2.0)); // omega_2 - omega_1
    double e1 = 0.1;         // pump amplitude
    double e2 = 0.1;         // scanning amplitude
    int n_max = 4;           // photon-number cutoff

    int dim() const noexcept { return 2 * (n_max + 1); }

    void validate() const {
        auto need = [](bool ok, const char* msg) {
            if (!ok) throw std::invalid_argument(std::string("SystemParams: ") + msg);
        };
        need(std::isfinite(g) && g >= 0.0, "g must be finite and >= 0");
        need(std::isfinite(kappa) && kappa >= 0.0, "kappa must be finite and >= 0");
        need(std::isfinite(gamma) && gamma >= 0.0, "gamma must be finite and >= 0");
        need(std::isfinite(e1) && e1 >= 0.0, "e1 must be finite and >= 0");
        need(std::isfinite(e2) && e2 >= 0.0, "e2 must be finite and >= 0");
        need(std::isfinite(detuning1), "detuning1 must be finite");
        need(std::isfinite(delta), "delta must be finite");
        need(n_max >= 0, "n_max must be >= 0");
    }
};

inline constexpr int basis_index(int n_fock, int atom) noexcept { return 2 * n_fock + atom; }

struct OperatorSet {
    int n_max = 0;
    int dim = 0;
    Matrix a;
    Matrix a_dag;
    Matrix sigma_plus;
    Matrix sigma_minus;
    Matrix sigma_z;
    Matrix number;
    Matrix identity;
};

inline OperatorSet build_operator_set(int n_max) {
    if (n_max < 0) throw std::invalid_argument("build_operator_set: n_max must be >= 0");
    OperatorSet ops;
    ops.n_max = n_max;
    ops.dim = 2 * (n_max + 1);
    const int d = ops.dim;
    ops.a = Matrix::Zero(d, d);
    ops.sigma_minus = Matrix::Zero(d, d);
    ops.sigma_z = Matrix::Zero(d, d);
    for (int n = 0; n <= n_max; ++n) {
        for (int atom = 0; atom < 2; ++atom) {
            if (n >= 1) ops.a(basis_index(n - 1, atom), basis_index(n, atom)) = std::sqrt(double(n));
        }
        ops.sigma_minus(basis_index(n, 0), basis_index(n, 1)) = 1.0;
        ops.sigma_z(basis_index(n, 0), basis_index(n, 0)) = -0.5;
        ops.sigma_z(basis_index(n, 1), basis_index(n, 1)) = 0.5;
    }
    ops.a_dag = ops.a.adjoint();
    ops.sigma_plus = ops.sigma_minus.adjoint();
    ops.number = ops.a_dag * ops.a;
    ops.identity = Matrix::Identity(d, d);
    return ops;
}

enum class Frame { lab, rotating };

// Lab frame uses detuning1 as the stand-in for the bare frequency omega; the
// rotating frame (of the pump) is the Hermitian part of the effective
// Hamiltonian without the drive and loss terms.
inline Matrix jc_hamiltonian(const SystemParams& p, Frame frame, const OperatorSet& ops) {
    p.validate();
    if (ops.n_max != p.n_max) throw std::invalid_argument("jc_hamiltonian: operator set does not match n_max");
    (void)frame; // both frames share the form; only the meaning of detuning1 differs
    return p.detuning1 * (ops.sigma_z + ops.number)
           + kI * p.g * (ops.a_dag * ops.sigma_minus - ops.a * ops.sigma_plus);
}

inline Matrix jc_hamiltonian(const SystemParams& p, Frame frame = Frame::rotating) {
    return jc_hamiltonian(p, frame, build_operator_set(p.n_max));
}

class StateVector {
public:
    explicit StateVector(Vector amplitudes) : amps_(std::move(amplitudes)) {
        if (std::abs(amps_.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("StateVector: amplitudes must have unit norm");
    }

    int dim() const noexcept { return static_cast<int>(amps_.size()); }
    const Vector& amplitudes() const noexcept { return amps_; }
    Complex operator[](int i) const { return amps_(i); }
    Matrix projector() const { return amps_ * amps_.adjoint(); }

private:
    Vector amps_;
};

enum class Branch { plus, minus };

// |n>_± = (i/√2)(|n-1>|e> ± i|n>|g>)
inline StateVector dressed_state(int n, Branch branch, int n_max) {
    if (n < 1) throw std::invalid_argument("dressed_state: n must be positive");
    if (n > n_max) throw std::invalid_argument("dressed_state: n exceeds n_max");
    const double s = branch == Branch::plus ? 1.0 : -1.0;
    const double r = 1.0 / std::sqrt(2.0);
    Vector v = Vector::Zero(2 * (n_max + 1));
    v(basis_index(n - 1, 1)) = kI * r;
    v(basis_index(n, 0)) = kI * r * (s * kI);
    return StateVector(std::move(v));
}

inline StateVector ground_state(int n_max) {
    Vector v = Vector::Zero(2 * (n_max + 1));
    v(basis_index(0, 0)) = 1.0;
    return StateVector(std::move(v));
}

inline StateVector fock_state(int n, int atom, int n_max) {
    if (n < 0 || n > n_max || atom < 0 || atom > 1) throw std::invalid_argument("fock_state: index out of range");
    Vector v = Vector::Zero(2 * (n_max + 1));
    v(basis_index(n, atom)) = 1.0;
    return StateVector(std::move(v));
}

// 2x2 block of H on couplet n: rows/cols ordered (|n-1,e>, |n,g>).
inline Matrix couplet_block(const Matrix& h, int n) {
    const int ie = basis_index(n - 1, 1);
    const int ig = basis_index(n, 0);
    if (n < 1 || ig >= h.rows()) throw std::invalid_argument("couplet_block: couplet out of range");
    Matrix b(2, 2);
    b << h(ie, ie), h(ie, ig), h(ig, ie), h(ig, ig);
    return b;
}

} // namespace pcs
