// correlation.hpp: normally ordered two-time photon correlation and the
// conditional / unconditional two-photon count rates over a window tau_w.
//
// The correlation after a detection is obtained by quantum regression:
//     G2(t) = Tr[ n e^{L t} (a rho a^dag) ] = c0 + sum_n c_n e^{-lambda_n t},
// where L is the time-independent generator (pump on, scanning drive off) and
// rho is the state at the first detection. c0 is the zero-mode contribution.
// Photon-flux factors (2 kappa) and detector efficiency are uniform scalings
// and are left out; they cancel in peak-to-valley ratios.

#pragma once

#include "pcs/floquet.hpp"
#include "pcs/liouville.hpp"
#include "pcs/quadrature.hpp"
#include "pcs/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcs {

struct Moments {
    double mean_n = 0.0;    // <a^dag a>
    double normal_n2 = 0.0; // <a^dag a^dag a a>
};

inline Moments moments(const Matrix& rho, const OperatorSet& ops) {
    if (rho.rows() != ops.dim || rho.cols() != ops.dim) throw std::invalid_argument("moments: dimension mismatch");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("moments: density matrix is not Hermitian");
    const Complex mean = (ops.number * rho).trace();
    const Complex n2 = (ops.a_dag * ops.a_dag * ops.a * ops.a * rho).trace();
    if (std::abs(mean.imag()) > 1e-10 || std::abs(n2.imag()) > 1e-10)
        throw std::invalid_argument("moments: expectation values have an imaginary residue");
    return {mean.real(), n2.real()};
}

// Direct propagation of the conditioned operator; used when the eigenbasis
// cannot reproduce it.
struct DirectG2 {
    Matrix generator;
    Vector conditioned;          // vec(a rho a^dag)
    Eigen::RowVectorXcd readout; // Tr(n .)

    double at(double t) const {
        const Matrix prop = (generator * t).exp();
        return (readout * (prop * conditioned))(0).real();
    }

    struct WindowIntegrals {
        double plain = 0.0;    // ∫_0^tau G2(w) dw
        double weighted = 0.0; // ∫_0^tau (tau - w) G2(w) dw
    };

    // Composite Gauss-Legendre over equal panels. Node offsets are identical in
    // every panel, so a handful of propagators serve the whole window.
    WindowIntegrals integrate(double tau, int panels, int order = 8) const {
        const QuadratureRule rule = gauss_legendre(order, 0.0, tau / panels);
        std::vector<Matrix> to_node;
        to_node.reserve(rule.nodes.size());
        for (double x : rule.nodes) to_node.push_back((generator * x).exp());
        const Matrix to_next = (generator * (tau / panels)).exp();
        WindowIntegrals out;
        Vector start = conditioned;
        for (int p = 0; p < panels; ++p) {
            const double origin = p * tau / panels;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double g2 = (readout * (to_node[i] * start))(0).real();
                out.plain += rule.weights[i] * g2;
                out.weighted += rule.weights[i] * (tau - origin - rule.nodes[i]) * g2;
            }
            start = to_next * start;
        }
        return out;
    }
};

struct G2Term {
    Complex c;
    Complex lambda;
};

struct G2Coefficients {
    double c0 = 0.0;
    std::vector<G2Term> terms;
    double reconstruction_residual = 0.0; // max |eigen-sum - direct| / max |direct| on the check grid
    Complex zero_mode{0.0};               // eigenvalue identified as the stationary mode
    std::shared_ptr<const DirectG2> direct; // set only when the eigen-expansion is rejected

    bool uses_fallback() const noexcept { return static_cast<bool>(direct); }

    // Sum of all coefficients; equals G2(0).
    Complex total() const {
        Complex s = c0;
        for (const auto& t : terms) s += t.c;
        return s;
    }

    G2Coefficients scaled(double factor) const {
        G2Coefficients out = *this;
        out.c0 *= factor;
        for (auto& t : out.terms) t.c *= factor;
        if (direct) {
            auto d = std::make_shared<DirectG2>(*direct);
            d->conditioned *= factor;
            out.direct = std::move(d);
        }
        return out;
    }
};

struct ExpansionOptions {
    double fallback_threshold = 1e-6; // reconstruction residual above which direct propagation is used
    double check_step = 0.05;         // spacing of the reconstruction check grid
    int check_points = 200;           // grid covers [0, check_step * check_points]
};

inline Eigen::RowVectorXcd number_readout(const OperatorSet& ops) { return expectation_functional(ops.number); }

// Eigen-decomposition of a fixed propagation generator, reused for every
// initial state expanded against it.
class G2Expander {
public:
    G2Expander(const Superoperator& l_prop, const OperatorSet& ops, const ExpansionOptions& opt = {})
        : generator_(l_prop.matrix), ops_(ops), opt_(opt), readout_(number_readout(ops)) {
        if (l_prop.dim != ops.dim) throw std::invalid_argument("G2Expander: dimension mismatch");
        Eigen::ComplexEigenSolver<Matrix> es(l_prop.matrix);
        if (es.info() != Eigen::Success)
            throw SolverError(SolverErrorKind::defective_spectrum, "eigen decomposition failed");
        w_ = es.eigenvalues();
        vectors_lu_.compute(es.eigenvectors());
        proj_ = readout_ * es.eigenvectors();

        w_.cwiseAbs().minCoeff(&zero_);
        const double scale = w_.cwiseAbs().maxCoeff();
        if (std::abs(w_(zero_)) > 1e-10 * scale)
            throw SolverError(SolverErrorKind::singular, "generator has no zero mode");
        for (Eigen::Index k = 0; k < w_.size(); ++k)
            if (k != zero_ && w_(k).real() > 1e-9 * scale)
                throw SolverError(SolverErrorKind::defective_spectrum,
                                  "eigenvalue with positive real part " + std::to_string(w_(k).real()));
        check_step_ = (l_prop.matrix * opt.check_step).exp();
    }

    G2Coefficients expand(const Matrix& rho) const {
        if (rho.rows() != ops_.dim || rho.cols() != ops_.dim)
            throw std::invalid_argument("eigen_expand_g2: dimension mismatch");
        if (std::abs(rho.trace() - 1.0) > 1e-9)
            throw std::invalid_argument("eigen_expand_g2: state must have unit trace");

        const Vector x0 = vectorize(Matrix(ops_.a * rho * ops_.a_dag));
        const Vector amps = vectors_lu_.solve(x0);
        G2Coefficients out;
        out.zero_mode = w_(zero_);
        for (Eigen::Index k = 0; k < w_.size(); ++k) {
            const Complex c = proj_(k) * amps(k);
            if (k == zero_) out.c0 = c.real();
            else out.terms.push_back({c, -w_(k)});
        }

        // Check against direct propagation on a uniform grid.
        Vector x = x0;
        double worst = 0.0, norm = 0.0;
        for (int i = 0; i <= opt_.check_points; ++i) {
            const double t = i * opt_.check_step;
            const double direct = (readout_ * x)(0).real();
            Complex sum = out.c0;
            for (const auto& term : out.terms) sum += term.c * std::exp(-term.lambda * t);
            worst = std::max(worst, std::abs(sum - direct));
            norm = std::max(norm, std::abs(direct));
            x = check_step_ * x;
        }
        out.reconstruction_residual = norm > 0.0 ? worst / norm : worst;
        if (out.reconstruction_residual > opt_.fallback_threshold)
            out.direct = std::make_shared<DirectG2>(DirectG2{generator_, x0, readout_});
        return out;
    }

private:
    Matrix generator_;
    OperatorSet ops_;
    ExpansionOptions opt_;
    Eigen::RowVectorXcd readout_;
    Vector w_;
    Eigen::PartialPivLU<Matrix> vectors_lu_;
    Eigen::RowVectorXcd proj_;
    Eigen::Index zero_ = 0;
    Matrix check_step_;
};

inline G2Coefficients eigen_expand_g2(const Superoperator& l_prop, const Matrix& rho, const OperatorSet& ops,
                                      const ExpansionOptions& opt = {}) {
    if (l_prop.dim != ops.dim) throw std::invalid_argument("eigen_expand_g2: dimension mismatch");
    return G2Expander(l_prop, ops, opt).expand(rho);
}

inline double g2_at(const G2Coefficients& k, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("g2_at: t must be >= 0");
    if (k.direct) return k.direct->at(t);
    Complex sum = k.c0;
    for (const auto& term : k.terms) sum += term.c * std::exp(-term.lambda * t);
    return sum.real();
}

namespace detail {

// sum_k (-mu)^k / (k + offset)!, accurate where the closed forms cancel
inline Complex exp_remainder_series(Complex mu, int offset) {
    constexpr int kTerms = 20;
    Complex sum = 0.0;
    for (int k = kTerms - 1; k >= 0; --k) sum = 1.0 - mu * sum / double(k + offset + 1);
    for (int j = 2; j <= offset; ++j) sum /= double(j);
    return sum;
}

// (1 - e^{-mu}) / mu
inline Complex window_mean(Complex mu) {
    if (std::abs(mu) < 1.0) return exp_remainder_series(mu, 1);
    return (1.0 - std::exp(-mu)) / mu;
}

// (2 / mu) [ (e^{-mu} - 1) / mu + 1 ]
inline Complex window_triangle(Complex mu) {
    if (std::abs(mu) < 1.0) return 2.0 * exp_remainder_series(mu, 2);
    return 2.0 / mu * ((std::exp(-mu) - 1.0) / mu + 1.0);
}

inline int fallback_panels(double tau_w) { return std::clamp(static_cast<int>(std::ceil(tau_w * 16.0)), 16, 1 << 16); }

} // namespace detail

// (1 / tau_w) ∫_0^tau_w G2(t) dt
inline double delta_conditional(const G2Coefficients& k, double tau_w) {
    if (!(tau_w > 0.0)) throw std::invalid_argument("delta_conditional: tau_w must be > 0");
    if (k.direct) return k.direct->integrate(tau_w, detail::fallback_panels(tau_w)).plain / tau_w;
    Complex sum = k.c0;
    for (const auto& term : k.terms) sum += term.c * detail::window_mean(term.lambda * tau_w);
    return sum.real();
}

// (2 / tau_w^2) ∫_0^tau_w du ∫_0^u dw G2(w)
inline double delta_unconditional(const G2Coefficients& k, double tau_w) {
    if (!(tau_w > 0.0)) throw std::invalid_argument("delta_unconditional: tau_w must be > 0");
    if (k.direct) return 2.0 * k.direct->integrate(tau_w, detail::fallback_panels(tau_w)).weighted / (tau_w * tau_w);
    Complex sum = k.c0;
    for (const auto& term : k.terms) sum += term.c * detail::window_triangle(term.lambda * tau_w);
    return sum.real();
}

// Off-resonant background: scanning drive dropped, pumped steady state.
inline G2Coefficients background_coeffs(const SystemParams& p, const ExpansionOptions& opt = {}) {
    SystemParams q = p;
    q.e2 = 0.0;
    const OperatorSet ops = build_operator_set(q.n_max);
    const Superoperator l = build_static_liouvillian(q, ops);
    return eigen_expand_g2(l, steady_state(l), ops, opt);
}

struct PeakCorrelation {
    Matrix rho_dc;
    G2Coefficients coeffs;
    double bloch_residual = 0.0;
    double bloch_truncation_change = 0.0;
};

// Bichromatic DC state as the initial condition, propagated with the pumped
// static generator. Neither the static generator nor the sidebands depend on
// the scanning detuning, so one scanner serves a whole detuning sweep.
class PeakScanner {
public:
    explicit PeakScanner(const SystemParams& p, const BlochOptions& bloch = {}, const ExpansionOptions& opt = {})
        : ops_(build_operator_set(p.n_max)), gen_(build_generator(p, ops_)), bloch_(bloch), e2_(p.e2),
          expander_(gen_.stationary, ops_, opt) {}

    PeakCorrelation at_delta(double delta) const {
        PeakCorrelation out;
        if (e2_ == 0.0) {
            out.rho_dc = steady_state(gen_.stationary);
        } else {
            const BlochHierarchy h =
                solve_bloch_steady_state(gen_.stationary, gen_.sidebands.up, gen_.sidebands.down, delta, bloch_);
            out.rho_dc = dc_component(h);
            out.bloch_residual = h.residual;
            out.bloch_truncation_change = h.truncation_change;
        }
        out.coeffs = expander_.expand(out.rho_dc);
        return out;
    }

private:
    OperatorSet ops_;
    Generator gen_;
    BlochOptions bloch_;
    double e2_;
    G2Expander expander_;
};

inline PeakCorrelation peak_correlation(const SystemParams& p, const BlochOptions& bloch = {},
                                        const ExpansionOptions& opt = {}) {
    return PeakScanner(p, bloch, opt).at_delta(p.delta);
}

struct PhaseAveragedG2 {
    std::vector<double> times;
    std::vector<double> values;
};

// Two-time correlation with the full time-dependent generator during the
// window, averaged over the drive phase at the first detection.
inline PhaseAveragedG2 phase_averaged_g2(const SystemParams& p, const BlochHierarchy& h, double t_max, double dt,
                                         int phases = 8) {
    if (phases < 1) throw std::invalid_argument("phase_averaged_g2: phases must be >= 1");
    const OperatorSet ops = build_operator_set(p.n_max);
    const Generator gen = build_generator(p, ops);
    const Eigen::RowVectorXcd readout = number_readout(ops);
    PhaseAveragedG2 out;
    for (int k = 0; k < phases; ++k) {
        const double t0 = 2.0 * std::numbers::pi * k / (phases * p.delta);
        const Matrix x0 = ops.a * h.at(t0, p.delta) * ops.a_dag;
        IntegrationOptions io;
        io.t_start = t0;
        io.trace_tolerance = 1e-9;
        const Trajectory tr = integrate_master_equation(gen, x0, t_max, dt, io);
        if (k == 0) {
            for (double t : tr.times) out.times.push_back(t - t0);
            out.values.assign(tr.times.size(), 0.0);
        }
        for (std::size_t i = 0; i < tr.states.size(); ++i)
            out.values[i] += (readout * vectorize(tr.states[i]))(0).real() / phases;
    }
    return out;
}

// Relative change of <:n^2:> of the DC state when the photon cutoff doubles.
inline double truncation_change(const SystemParams& p, const BlochOptions& bloch = {}) {
    auto n2 = [&](int n_max) {
        SystemParams q = p;
        q.n_max = n_max;
        const OperatorSet ops = build_operator_set(n_max);
        const Generator gen = build_generator(q, ops);
        const Matrix rho = q.e2 == 0.0 ? steady_state(gen.stationary) : dc_component(solve_bloch_steady_state(gen, bloch));
        return moments(Matrix(0.5 * (rho + rho.adjoint())), ops).normal_n2;
    };
    const double base = n2(p.n_max);
    const double wide = n2(2 * p.n_max);
    return std::abs(wide - base) / std::max(std::abs(wide), 1e-300);
}

} // namespace pcs
