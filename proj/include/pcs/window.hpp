// window.hpp: peak-to-valley ratio of the two-photon count rate and the
// window time that maximizes it.
//
// PVR_xi(tau_w) = <Delta_xi(peak)>_P / <Delta_xi(background)>_P for
// xi in {con, unc}: the peak sits at delta_tilde = 1 + sqrt(2) and the
// background drops the scanning drive. Both rates are averaged over P(g)
// before the ratio is taken.

#pragma once

#include "pcs/correlation.hpp"
#include "pcs/ensemble.hpp"
#include "pcs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pcs {

enum class RateKind { conditional, unconditional };

inline double window_rate(RateKind kind, const G2Coefficients& k, double tau_w) {
    return kind == RateKind::conditional ? delta_conditional(k, tau_w) : delta_unconditional(k, tau_w);
}

struct PvrPoint {
    double g = 0.0; // coupling for a point mass; NaN for an ensemble average
    double tau_w = 0.0;
    double pvr_con = 0.0;
    double pvr_unc = 0.0;
};

struct WeightedCoefficients {
    double weight;
    G2Coefficients peak;
    G2Coefficients background;
};

// Peak and background coefficients for every quadrature node, computed once;
// window rates at any tau_w are then closed-form sums.
class PvrEvaluator {
public:
    explicit PvrEvaluator(std::vector<WeightedCoefficients> nodes, double g_label = std::nan(""))
        : nodes_(std::move(nodes)), g_label_(g_label) {
        if (nodes_.empty()) throw std::invalid_argument("PvrEvaluator: no quadrature nodes");
    }

    PvrEvaluator(const SystemParams& params, const CouplingDensity& density, const ScanOptions& opt = {}) {
        params.validate();
        SystemParams q = params;
        q.delta = scan_delta(params.detuning1, kPeakDeltaTilde);
        const auto& nodes = density.nodes();
        nodes_.resize(nodes.size());
        std::vector<std::string> errors(nodes.size());
        parallel_for(nodes.size(), opt.threads, [&](std::size_t i) {
            SystemParams p = q;
            p.g = nodes[i].g;
            try {
                nodes_[i] = {nodes[i].weight, peak_correlation(p, opt.bloch, opt.expansion).coeffs,
                             background_coeffs(p, opt.expansion)};
            } catch (const std::exception& e) {
                errors[i] = "g = " + std::to_string(nodes[i].g) + ": " + e.what();
            }
        });
        for (const auto& e : errors)
            if (!e.empty()) throw std::runtime_error("PvrEvaluator: " + e);
        g_label_ = density.is_point_mass() ? nodes.front().g : std::nan("");
    }

    double peak(RateKind kind, double tau_w) const {
        double s = 0.0;
        for (const auto& n : nodes_) s += n.weight * window_rate(kind, n.peak, tau_w);
        return s;
    }

    double background(RateKind kind, double tau_w) const {
        double s = 0.0;
        for (const auto& n : nodes_) s += n.weight * window_rate(kind, n.background, tau_w);
        return s;
    }

    double pvr(RateKind kind, double tau_w) const {
        const double den = background(kind, tau_w);
        if (!(den > 0.0)) throw std::domain_error("PvrEvaluator: background rate is zero");
        return peak(kind, tau_w) / den;
    }

    PvrPoint point(double tau_w) const {
        return {g_label_, tau_w, pvr(RateKind::conditional, tau_w), pvr(RateKind::unconditional, tau_w)};
    }

    const std::vector<WeightedCoefficients>& nodes() const noexcept { return nodes_; }

    bool any_fallback() const {
        return std::any_of(nodes_.begin(), nodes_.end(),
                           [](const auto& n) { return n.peak.uses_fallback() || n.background.uses_fallback(); });
    }

private:
    std::vector<WeightedCoefficients> nodes_;
    double g_label_ = std::nan("");
};

inline PvrPoint pvr(const SystemParams& params, const CouplingDensity& density, double tau_w,
                    const ScanOptions& opt = {}) {
    if (!(tau_w > 0.0)) throw std::invalid_argument("pvr: tau_w must be > 0");
    return PvrEvaluator(params, density, opt).point(tau_w);
}

struct Maximum {
    double x = 0.0;
    double value = 0.0;
    int evaluations = 0;
    bool fallback_used = false; // bracket failed the interior test; grid scan used
};

// Golden-section maximization on [lo, hi] to an interval width of tol. A
// 16-point probe (geometric when lo > 0) locates the best interior sample; if
// it beats both ends, golden section refines between its neighbours.
// Otherwise a 200-point grid scan picks the best cell and golden section
// refines that instead.
template <class F>
Maximum golden_section_maximize(F&& f, double lo, double hi, double tol) {
    if (!(hi > lo)) throw std::invalid_argument("golden_section_maximize: empty bracket");
    if (!(tol > 0.0)) throw std::invalid_argument("golden_section_maximize: tol must be > 0");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    Maximum out;
    auto eval = [&](double x) {
        ++out.evaluations;
        return f(x);
    };

    auto refine = [&](double a, double b) {
        double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        double fc = eval(c), fd = eval(d);
        while (b - a > tol) {
            if (fc >= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d);
            }
        }
        return fc >= fd ? std::pair{c, fc} : std::pair{d, fd};
    };

    constexpr int kProbe = 16;
    std::vector<double> xs(kProbe + 2), fs(kProbe + 2);
    for (int i = 0; i <= kProbe + 1; ++i) {
        const double u = double(i) / (kProbe + 1);
        xs[i] = lo > 0.0 ? lo * std::pow(hi / lo, u) : lo + u * (hi - lo);
    }
    xs.back() = hi;
    for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = eval(xs[i]);
    const auto peak = static_cast<std::size_t>(std::max_element(fs.begin() + 1, fs.end() - 1) - fs.begin());
    if (fs[peak] > std::max(fs.front(), fs.back())) {
        auto [x, v] = refine(xs[peak - 1], xs[peak + 1]);
        if (fs[peak] > v) x = xs[peak], v = fs[peak];
        out.x = x;
        out.value = v;
        return out;
    }

    out.fallback_used = true;
    constexpr int kGrid = 200;
    const double step = (hi - lo) / (kGrid - 1);
    int best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
        const double v = eval(lo + i * step);
        if (v > best_value) best_value = v, best = i;
    }
    const double a = lo + std::max(best - 1, 0) * step;
    const double b = lo + std::min(best + 1, kGrid - 1) * step;
    auto [x, v] = refine(a, b);
    if (best_value > v) x = lo + best * step, v = best_value;
    out.x = x;
    out.value = v;
    return out;
}

struct WindowOptimum {
    Maximum con;
    Maximum unc;
};

struct WindowSearch {
    double tau_lo = 0.005;
    double tau_hi = 2.0;
    double tol = 1e-3;
};

inline WindowOptimum optimal_window(const PvrEvaluator& eval, const WindowSearch& search = {}) {
    if (!(search.tau_lo > 0.0)) throw std::invalid_argument("optimal_window: bracket must start above zero");
    return {golden_section_maximize([&](double t) { return eval.pvr(RateKind::conditional, t); }, search.tau_lo,
                                    search.tau_hi, search.tol),
            golden_section_maximize([&](double t) { return eval.pvr(RateKind::unconditional, t); }, search.tau_lo,
                                    search.tau_hi, search.tol)};
}

inline WindowOptimum optimal_window(const SystemParams& params, const CouplingDensity& density,
                                    const WindowSearch& search = {}, const ScanOptions& opt = {}) {
    return optimal_window(PvrEvaluator(params, density, opt), search);
}

enum class CurveAxis { g, gamma };

inline const char* to_string(CurveAxis a) noexcept { return a == CurveAxis::g ? "g" : "gamma"; }

struct TauOptPoint {
    double axis_value = 0.0;
    WindowOptimum optimum;
};

struct TauOptCurve {
    std::vector<TauOptPoint> points;
    std::vector<PointFailure> failures;
};

// Along g each point uses a point mass at that coupling; along gamma the
// given density is used with gamma replaced.
inline TauOptCurve tau_opt_curve(CurveAxis axis, const std::vector<double>& grid, const SystemParams& params,
                                 const CouplingDensity& density, const WindowSearch& search = {},
                                 const ScanOptions& opt = {}) {
    if (grid.empty()) throw std::invalid_argument("tau_opt_curve: empty grid");
    std::vector<std::optional<WindowOptimum>> results(grid.size());
    std::vector<std::string> errors(grid.size());
    ScanOptions inner = opt;
    inner.threads = 1;
    parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
        try {
            SystemParams p = params;
            if (axis == CurveAxis::g) {
                p.g = grid[i];
                results[i] = optimal_window(p, CouplingDensity::point_mass(grid[i]), search, inner);
            } else {
                p.gamma = grid[i];
                results[i] = optimal_window(p, density, search, inner);
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    TauOptCurve curve;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (results[i]) curve.points.push_back({grid[i], *results[i]});
        else curve.failures.push_back({i, grid[i], errors[i]});
    }
    return curve;
}

struct RegressionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double correlation = 0.0; // Pearson r
};

inline RegressionFit regression_fit(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("regression_fit: need at least 3 points");
    const double n = double(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) mx += x, my += y;
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("regression_fit: abscissae are all equal");
    RegressionFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.correlation = syy > 0.0 ? std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0) : 0.0;
    return fit;
}

} // namespace pcs
