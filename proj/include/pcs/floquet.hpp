// floquet.hpp: long-time harmonic components of the bichromatically driven
// density matrix, rho(t) = sum_N rho_N e^{i N delta t}, by matrix continued
// fractions; plus a fixed-step RK4 integrator of the full time-dependent
// master equation used as an independent check.
//
// Matching Fourier coefficients gives the three-term hierarchy
//     A_N rho_N + S_up rho_{N+1} + S_down rho_{N-1} = 0,  A_N = L - i N delta.
// Truncating at |N| = N_B + 1 and eliminating outward-in with ratio matrices
//     rho_N = R_N rho_{N-1}  (N > 0),   R_N = -(A_N + S_up R_{N+1})^{-1} S_down
//     rho_N = R_N rho_{N+1}  (N < 0),   R_N = -(A_N + S_down R_{N-1})^{-1} S_up
// leaves (A_0 + S_up R_1 + S_down R_{-1}) rho_0 = 0 with Tr rho_0 = 1.

#pragma once

#include "pcs/liouville.hpp"
#include "pcs/types.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcs {

struct BlochOptions {
    int n_b = 3;
    double tol = 1e-9;
    bool check_convergence = true;   // re-solve with 2 N_B and compare
    double max_condition = 1e12;
};

struct BlochHierarchy {
    int n_harmonics = 0;
    int dim = 0;
    std::vector<Matrix> components;  // components[N + n_harmonics] = rho_N
    double residual = 0.0;           // max |.| over all hierarchy equations
    double max_condition = 0.0;      // largest condition estimate met in the recursion
    double truncation_change = 0.0;  // max entry change under N_B -> 2 N_B (0 if unchecked)

    const Matrix& component(int n) const {
        if (n < -n_harmonics || n > n_harmonics) throw std::out_of_range("BlochHierarchy: harmonic out of range");
        return components[static_cast<std::size_t>(n + n_harmonics)];
    }

    // rho(t) = sum_N rho_N e^{i N delta t}
    Matrix at(double t, double delta) const {
        Matrix rho = Matrix::Zero(dim, dim);
        for (int n = -n_harmonics; n <= n_harmonics; ++n) rho += component(n) * std::exp(kI * (n * delta * t));
        return rho;
    }
};

namespace detail {

inline double condition_estimate(const Eigen::PartialPivLU<Matrix>& lu) {
    const double rc = lu.rcond();
    return rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
}

// Null vector of m under Tr = 1, replacing the equation for the |0,g><0,g|
// diagonal (vectorized index 0) with the trace functional.
inline Matrix trace_normalized_null_vector(Matrix m, int dim, double max_condition, double* condition_out) {
    m.row(0) = trace_functional(dim);
    Vector rhs = Vector::Zero(m.rows());
    rhs(0) = 1.0;
    Eigen::PartialPivLU<Matrix> lu(m);
    const double cond = condition_estimate(lu);
    if (condition_out) *condition_out = cond;
    if (!(cond <= max_condition))
        throw SolverError(SolverErrorKind::singular,
                          "no unique steady state (condition estimate " + std::to_string(cond) + ")");
    return devectorize(lu.solve(rhs), dim);
}

inline BlochHierarchy solve_hierarchy(const Superoperator& l_static, const Superoperator& s_up,
                                      const Superoperator& s_down, double delta, int n_b, double max_condition) {
    const int d = l_static.dim;
    const auto d2 = static_cast<Eigen::Index>(d) * d;
    const Matrix id = Matrix::Identity(d2, d2);
    auto block = [&](int n) { return Matrix(l_static.matrix - kI * (double(n) * delta) * id); };
    const Eigen::SparseMatrix<Complex> up = s_up.matrix.sparseView();
    const Eigen::SparseMatrix<Complex> down = s_down.matrix.sparseView();

    BlochHierarchy h;
    h.n_harmonics = n_b;
    h.dim = d;
    double worst = 0.0;

    // ratio[k] holds R_{k+1} for positive and R_{-(k+1)} for negative harmonics
    std::vector<Matrix> r_pos(static_cast<std::size_t>(n_b)), r_neg(static_cast<std::size_t>(n_b));
    Matrix next = Matrix::Zero(d2, d2);
    for (int n = n_b; n >= 1; --n) {
        Eigen::PartialPivLU<Matrix> lu(block(n) + up * next);
        worst = std::max(worst, condition_estimate(lu));
        next = -lu.solve(s_down.matrix);
        r_pos[static_cast<std::size_t>(n - 1)] = next;
    }
    next.setZero();
    for (int n = n_b; n >= 1; --n) {
        Eigen::PartialPivLU<Matrix> lu(block(-n) + down * next);
        worst = std::max(worst, condition_estimate(lu));
        next = -lu.solve(s_up.matrix);
        r_neg[static_cast<std::size_t>(n - 1)] = next;
    }
    if (!(worst <= max_condition))
        throw SolverError(SolverErrorKind::ill_conditioned,
                          "continued-fraction inversion condition estimate " + std::to_string(worst));

    Matrix central = block(0);
    if (n_b >= 1) central += up * r_pos[0] + down * r_neg[0];
    double cond0 = 0.0;
    const Matrix rho0 = trace_normalized_null_vector(central, d, max_condition, &cond0);
    h.max_condition = std::max(worst, cond0);

    std::vector<Vector> v(static_cast<std::size_t>(2 * n_b + 1));
    v[static_cast<std::size_t>(n_b)] = vectorize(rho0);
    for (int n = 1; n <= n_b; ++n) {
        v[static_cast<std::size_t>(n_b + n)] = r_pos[static_cast<std::size_t>(n - 1)] * v[static_cast<std::size_t>(n_b + n - 1)];
        v[static_cast<std::size_t>(n_b - n)] = r_neg[static_cast<std::size_t>(n - 1)] * v[static_cast<std::size_t>(n_b - n + 1)];
    }

    double residual = 0.0;
    for (int n = -n_b; n <= n_b; ++n) {
        Vector eq = block(n) * v[static_cast<std::size_t>(n + n_b)];
        if (n < n_b) eq += up * v[static_cast<std::size_t>(n + n_b + 1)];
        if (n > -n_b) eq += down * v[static_cast<std::size_t>(n + n_b - 1)];
        residual = std::max(residual, eq.cwiseAbs().maxCoeff());
    }
    h.residual = residual;

    h.components.reserve(v.size());
    for (const auto& x : v) h.components.push_back(devectorize(x, d));
    return h;
}

} // namespace detail

// Stationary state of a time-independent generator, normalized to unit trace.
inline Matrix steady_state(const Superoperator& l, double max_condition = 1e12) {
    return detail::trace_normalized_null_vector(l.matrix, l.dim, max_condition, nullptr);
}

inline BlochHierarchy solve_bloch_steady_state(const Superoperator& l_static, const Superoperator& s_up,
                                               const Superoperator& s_down, double delta,
                                               const BlochOptions& opt = {}) {
    if (opt.n_b < 1) throw std::invalid_argument("solve_bloch_steady_state: n_b must be >= 1");
    if (delta == 0.0 || !std::isfinite(delta))
        throw std::invalid_argument("solve_bloch_steady_state: delta must be finite and nonzero");
    if (s_up.dim != l_static.dim || s_down.dim != l_static.dim)
        throw std::invalid_argument("solve_bloch_steady_state: superoperator dimensions differ");

    BlochHierarchy h = detail::solve_hierarchy(l_static, s_up, s_down, delta, opt.n_b, opt.max_condition);
    if (h.residual > opt.tol)
        throw SolverError(SolverErrorKind::not_converged,
                          "hierarchy residual " + std::to_string(h.residual) + " exceeds tolerance");
    if (opt.check_convergence) {
        const BlochHierarchy wide =
            detail::solve_hierarchy(l_static, s_up, s_down, delta, 2 * opt.n_b, opt.max_condition);
        double change = 0.0;
        for (int n = -opt.n_b; n <= opt.n_b; ++n)
            change = std::max(change, (h.component(n) - wide.component(n)).cwiseAbs().maxCoeff());
        h.truncation_change = change;
        if (change > opt.tol)
            throw SolverError(SolverErrorKind::not_converged,
                              "harmonic truncation changes components by " + std::to_string(change));
    }
    return h;
}

inline BlochHierarchy solve_bloch_steady_state(const Generator& gen, const BlochOptions& opt = {}) {
    return solve_bloch_steady_state(gen.stationary, gen.sidebands.up, gen.sidebands.down, gen.delta, opt);
}

inline Matrix dc_component(const BlochHierarchy& h) { return h.component(0); }

struct Trajectory {
    std::vector<double> times;
    std::vector<Matrix> states;
    double max_trace_drift = 0.0;
};

struct IntegrationOptions {
    double t_start = 0.0;
    int stride = 1;             // keep every stride-th step (the final state is always kept)
    double trace_tolerance = 1e-9;
};

// Fixed-step RK4 for d rho/dt = G(t) rho. The step is t_end / ceil(t_end / dt),
// so the run always lands on t_start + t_end.
inline Trajectory integrate_master_equation(const Generator& gen, const Matrix& rho0, double t_end, double dt,
                                            const IntegrationOptions& opt = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_master_equation: dt must be > 0");
    if (!(t_end > 0.0)) throw std::invalid_argument("integrate_master_equation: t_end must be > 0");
    if (opt.stride < 1) throw std::invalid_argument("integrate_master_equation: stride must be >= 1");
    const int d = gen.stationary.dim;
    const auto steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
    const double h = t_end / double(steps);
    const auto tr = trace_functional(d);

    // sidebands are a few hundred entries; applying them sparsely avoids
    // assembling the dense generator at every stage
    const Eigen::SparseMatrix<Complex> up = gen.sidebands.up.matrix.sparseView();
    const Eigen::SparseMatrix<Complex> down = gen.sidebands.down.matrix.sparseView();
    const Matrix& l = gen.stationary.matrix;
    auto rhs = [&](double t, const Vector& x) -> Vector {
        const Complex phase = std::exp(-kI * (gen.delta * t));
        return l * x + phase * (up * x) + std::conj(phase) * (down * x);
    };

    Vector v = vectorize(rho0, d);
    const Complex trace0 = (tr * v)(0);
    Trajectory out;
    out.times.push_back(opt.t_start);
    out.states.push_back(rho0);

    for (long k = 0; k < steps; ++k) {
        const double t = opt.t_start + double(k) * h;
        const Vector k1 = rhs(t, v);
        const Vector k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1);
        const Vector k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2);
        const Vector k4 = rhs(t + h, v + h * k3);
        v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double drift = std::abs((tr * v)(0) - trace0);
        out.max_trace_drift = std::max(out.max_trace_drift, drift);
        if (drift > opt.trace_tolerance)
            throw SolverError(SolverErrorKind::unstable,
                              "trace drift " + std::to_string(drift) + " at t = " + std::to_string(t + h));
        if ((k + 1) % opt.stride == 0 || k + 1 == steps) {
            out.times.push_back(opt.t_start + double(k + 1) * h);
            out.states.push_back(devectorize(v, d));
        }
    }
    return out;
}

inline Trajectory integrate_master_equation(const SystemParams& p, const Matrix& rho0, double t_end, double dt,
                                            const IntegrationOptions& opt = {}) {
    return integrate_master_equation(build_generator(p), rho0, t_end, dt, opt);
}

} // namespace pcs
