// liouville.hpp: vectorized master-equation generators.
//
// Density matrices are column-stacked: vec(rho)[i + D*j] = rho(i, j). With that
// convention vec(A rho B) = (B^T ⊗ A) vec(rho). All generators are dense; the
// library targets D <= 12.

#pragma once

#include "pcs/hilbert.hpp"
#include "pcs/types.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace pcs {

struct Superoperator {
    int dim = 0;   // Hilbert dimension D; the matrix is D^2 x D^2
    Matrix matrix;

    Superoperator() = default;
    Superoperator(int d, Matrix m) : dim(d), matrix(std::move(m)) {
        if (matrix.rows() != d * d || matrix.cols() != d * d)
            throw std::invalid_argument("Superoperator: matrix size must be D^2 x D^2");
    }

    static Superoperator zero(int d) { return {d, Matrix::Zero(d * d, d * d)}; }

    Matrix apply(const Matrix& rho) const;

    Superoperator operator+(const Superoperator& o) const { return {dim, matrix + o.matrix}; }
    Superoperator operator*(Complex s) const { return {dim, matrix * s}; }
};

inline Vector vectorize(const Matrix& rho) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("vectorize: matrix must be square");
    return Eigen::Map<const Vector>(rho.data(), rho.size());
}

inline Vector vectorize(const Matrix& rho, int dim) {
    if (rho.rows() != dim || rho.cols() != dim) throw std::invalid_argument("vectorize: dimension mismatch");
    return vectorize(rho);
}

inline Matrix devectorize(const Vector& v, int dim) {
    if (v.size() != static_cast<Eigen::Index>(dim) * dim)
        throw std::invalid_argument("devectorize: length is not D^2");
    return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

// Row vector t with t · vec(rho) = Tr(rho).
inline Eigen::RowVectorXcd trace_functional(int dim) {
    Eigen::RowVectorXcd t = Eigen::RowVectorXcd::Zero(dim * dim);
    for (int i = 0; i < dim; ++i) t(i + dim * i) = 1.0;
    return t;
}

// Row vector r with r · vec(X) = Tr(op X).
inline Eigen::RowVectorXcd expectation_functional(const Matrix& op) {
    Matrix t = op.transpose();
    return Eigen::Map<const Eigen::RowVectorXcd>(t.data(), t.size());
}

inline Matrix Superoperator::apply(const Matrix& rho) const {
    return devectorize(matrix * vectorize(rho, dim), dim);
}

// rho -> A rho
inline Matrix left_multiplication(const Matrix& a) {
    const auto d = a.rows();
    Matrix out = Matrix::Zero(d * d, d * d);
    for (Eigen::Index j = 0; j < d; ++j) out.block(j * d, j * d, d, d) = a;
    return out;
}

// rho -> rho B
inline Matrix right_multiplication(const Matrix& b) {
    const auto d = b.rows();
    Matrix out = Matrix::Zero(d * d, d * d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index k = 0; k < d; ++k)
            if (b(k, j) != Complex(0.0)) out.block(j * d, k * d, d, d).diagonal().setConstant(b(k, j));
    return out;
}

// rho -> A rho B
inline Matrix sandwich(const Matrix& a, const Matrix& b) {
    const auto d = a.rows();
    Matrix out = Matrix::Zero(d * d, d * d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index k = 0; k < d; ++k)
            if (b(k, j) != Complex(0.0)) out.block(j * d, k * d, d, d) = b(k, j) * a;
    return out;
}

// Non-Hermitian Hamiltonian carrying the pump and the loss terms.
inline Matrix effective_hamiltonian(const SystemParams& p, const OperatorSet& ops) {
    return jc_hamiltonian(p, Frame::rotating, ops)
           + kI * p.e1 * (ops.sigma_plus - ops.sigma_minus)
           - kI * p.kappa * ops.number
           - kI * (p.gamma / 2.0) * ops.sigma_plus * ops.sigma_minus;
}

// rho -> -i (H_eff rho - rho H_eff^dag)
inline Superoperator build_nonhermitian_part(const SystemParams& p, const OperatorSet& ops) {
    const Matrix h = effective_hamiltonian(p, ops);
    return {ops.dim, -kI * (left_multiplication(h) - right_multiplication(h.adjoint()))};
}

// rho -> gamma sigma_- rho sigma_+ + 2 kappa a rho a^dag
inline Superoperator build_jump_superop(const SystemParams& p, const OperatorSet& ops) {
    return {ops.dim, p.gamma * sandwich(ops.sigma_minus, ops.sigma_plus)
                         + 2.0 * p.kappa * sandwich(ops.a, ops.a_dag)};
}

inline Superoperator build_static_liouvillian(const SystemParams& p, const OperatorSet& ops) {
    p.validate();
    if (ops.n_max != p.n_max) throw std::invalid_argument("build_static_liouvillian: operator set does not match n_max");
    return build_nonhermitian_part(p, ops) + build_jump_superop(p, ops);
}

inline Superoperator build_static_liouvillian(const SystemParams& p) {
    return build_static_liouvillian(p, build_operator_set(p.n_max));
}

// Fourier coefficients of the scanning-drive term:
//   up   multiplies e^{-i delta t}: rho -> E2 [sigma_+, rho]
//   down multiplies e^{+i delta t}: rho -> -E2 [sigma_-, rho]
struct Sidebands {
    Superoperator up;
    Superoperator down;
};

inline Sidebands build_sideband_superops(const SystemParams& p, const OperatorSet& ops) {
    p.validate();
    auto commutator = [](const Matrix& x) { return Matrix(left_multiplication(x) - right_multiplication(x)); };
    return {Superoperator(ops.dim, p.e2 * commutator(ops.sigma_plus)),
            Superoperator(ops.dim, -p.e2 * commutator(ops.sigma_minus))};
}

inline Sidebands build_sideband_superops(const SystemParams& p) {
    return build_sideband_superops(p, build_operator_set(p.n_max));
}

// Complete generator of the bichromatically driven system.
struct Generator {
    Superoperator stationary;
    Sidebands sidebands;
    double delta = 0.0;

    Matrix at(double t) const {
        return stationary.matrix
               + std::exp(-kI * delta * t) * sidebands.up.matrix
               + std::exp(kI * delta * t) * sidebands.down.matrix;
    }
};

inline Generator build_generator(const SystemParams& p, const OperatorSet& ops) {
    return {build_static_liouvillian(p, ops), build_sideband_superops(p, ops), p.delta};
}

inline Generator build_generator(const SystemParams& p) { return build_generator(p, build_operator_set(p.n_max)); }

} // namespace pcs
