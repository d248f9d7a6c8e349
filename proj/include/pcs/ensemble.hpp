// ensemble.hpp: coupling-strength distributions P(g), inhomogeneous
// averaging, spectrum scans over the normalized scanning detuning, and
// background subtraction.
//
// P(g) is reconstructed by Monte Carlo over resting atom positions in a
// TEM00 standing-wave mode, g(x, z) = g_max exp(-x^2 / w0^2) |cos(2 pi z / lambda_c)|,
// with z uniform over half a wavelength and x uniform over [-x_m, x_m]
// (x_m in units of the waist w0). Couplings below f_cut * g_max are dropped.
//
// The normalized scanning detuning is delta_tilde = (omega_2 - omega) / (omega - omega_1);
// with the pump locked to omega - omega_1 = g_f this gives
// delta = omega_2 - omega_1 = g_f (1 + delta_tilde).

#pragma once

#include "pcs/correlation.hpp"
#include "pcs/parallel.hpp"
#include "pcs/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcs {

// |1)_- -> |2)_+ resonance
inline const double kPeakDeltaTilde = 1.0 + std::numbers::sqrt2;

inline double scan_delta(double g_f, double delta_tilde) { return g_f * (1.0 + delta_tilde); }

// Counter-based generator: the k-th draw of a stream depends only on (seed, k),
// so chunks of a sample can be produced in any order.
inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double uniform01(std::uint64_t seed, std::uint64_t counter) noexcept {
    const std::uint64_t bits = splitmix64(splitmix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL));
    return double(bits >> 11) * 0x1.0p-53;
}

enum class Geometry { masked, unmasked };

inline const char* to_string(Geometry g) noexcept { return g == Geometry::masked ? "masked" : "unmasked"; }

struct SamplingOptions {
    Geometry geometry = Geometry::masked;
    double g_max = 10.0;
    double f_cut = 0.1;
    long samples = 1'000'000;
    std::uint64_t seed = 1;
    int bins = 40;
    int nodes = 32;
    double mask_halfwidth = 0.5;  // x_m / w0 with the mask
    double open_halfwidth = 2.0;  // x_m / w0 without it
};

struct QuadNode {
    double g;
    double weight;
};

class CouplingDensity {
public:
    CouplingDensity() = default;

    // Histogram density on [edges.front(), edges.back()] with Gauss-Legendre
    // nodes laid over the support. Node weights are w_i P(g_i), rescaled to sum
    // to one; the unscaled sum is kept as raw_quadrature_mass().
    static CouplingDensity from_histogram(double g_max, double f_cut, std::vector<double> edges,
                                          std::vector<double> values, int nodes) {
        if (edges.size() != values.size() + 1 || values.empty())
            throw std::invalid_argument("CouplingDensity: edges must bracket the bin values");
        if (nodes < 1) throw std::invalid_argument("CouplingDensity: need at least one quadrature node");
        CouplingDensity d;
        d.g_max_ = g_max;
        d.f_cut_ = f_cut;
        d.edges_ = std::move(edges);
        d.values_ = std::move(values);
        for (double v : d.values_)
            if (!(v >= 0.0)) throw std::invalid_argument("CouplingDensity: density must be non-negative");
        double mass = 0.0;
        for (std::size_t i = 0; i < d.values_.size(); ++i) mass += d.values_[i] * (d.edges_[i + 1] - d.edges_[i]);
        if (!(mass > 0.0)) throw std::invalid_argument("CouplingDensity: histogram is empty");
        for (double& v : d.values_) v /= mass;

        const QuadratureRule rule = gauss_legendre(nodes, d.edges_.front(), d.edges_.back());
        double raw = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double w = rule.weights[i] * d.value(rule.nodes[i]);
            raw += w;
            d.nodes_.push_back({rule.nodes[i], w});
        }
        if (!(raw > 0.0)) throw std::invalid_argument("CouplingDensity: quadrature nodes miss the density");
        for (auto& n : d.nodes_) n.weight /= raw;
        d.raw_mass_ = raw;
        return d;
    }

    // delta(g - g0)
    static CouplingDensity point_mass(double g0) {
        if (!(g0 >= 0.0) || !std::isfinite(g0)) throw std::invalid_argument("CouplingDensity: point mass must be finite and >= 0");
        CouplingDensity d;
        d.g_max_ = g0;
        d.f_cut_ = 1.0;
        d.nodes_.push_back({g0, 1.0});
        d.raw_mass_ = 1.0;
        return d;
    }

    bool is_point_mass() const noexcept { return values_.empty(); }
    double g_max() const noexcept { return g_max_; }
    double f_cut() const noexcept { return f_cut_; }
    const std::vector<double>& edges() const noexcept { return edges_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<QuadNode>& nodes() const noexcept { return nodes_; }
    double raw_quadrature_mass() const noexcept { return raw_mass_; }

    double bin_center(std::size_t i) const { return 0.5 * (edges_[i] + edges_[i + 1]); }

    // kappa P(g); zero outside the support
    double value(double g) const {
        if (values_.empty() || g < edges_.front() || g > edges_.back()) return 0.0;
        auto it = std::upper_bound(edges_.begin(), edges_.end(), g);
        auto i = static_cast<std::size_t>(std::distance(edges_.begin(), it));
        i = std::clamp<std::size_t>(i, 1, values_.size()) - 1;
        return values_[i];
    }

    // ∫ P over [lo, hi] from the histogram
    double mass_between(double lo, double hi) const {
        double m = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            const double a = std::max(lo, edges_[i]), b = std::min(hi, edges_[i + 1]);
            if (b > a) m += values_[i] * (b - a);
        }
        return m;
    }

private:
    double g_max_ = 0.0;
    double f_cut_ = 0.0;
    std::vector<double> edges_;
    std::vector<double> values_;
    std::vector<QuadNode> nodes_;
    double raw_mass_ = 0.0;
};

// Coupling of the k-th simulated atom.
inline double sample_coupling(const SamplingOptions& opt, std::uint64_t k) {
    const double xm = opt.geometry == Geometry::masked ? opt.mask_halfwidth : opt.open_halfwidth;
    const double x = (2.0 * uniform01(opt.seed, 2 * k) - 1.0) * xm;
    const double z = 0.5 * uniform01(opt.seed, 2 * k + 1); // in units of lambda_c
    return opt.g_max * std::exp(-x * x) * std::abs(std::cos(2.0 * std::numbers::pi * z));
}

inline CouplingDensity sample_coupling_distribution(const SamplingOptions& opt) {
    if (opt.samples < 10'000) throw std::invalid_argument("sample_coupling_distribution: need at least 1e4 samples");
    if (!(opt.f_cut > 0.0 && opt.f_cut < 1.0)) throw std::invalid_argument("sample_coupling_distribution: f_cut must lie in (0, 1)");
    if (!(opt.g_max > 0.0)) throw std::invalid_argument("sample_coupling_distribution: g_max must be > 0");
    if (opt.bins < 1) throw std::invalid_argument("sample_coupling_distribution: bins must be >= 1");
    const double lo = opt.f_cut * opt.g_max, hi = opt.g_max;
    const double width = (hi - lo) / opt.bins;
    std::vector<double> counts(static_cast<std::size_t>(opt.bins), 0.0);
    long kept = 0;
    for (long k = 0; k < opt.samples; ++k) {
        const double g = sample_coupling(opt, static_cast<std::uint64_t>(k));
        if (g < lo) continue;
        const auto b = std::min<long>(static_cast<long>((g - lo) / width), opt.bins - 1);
        counts[static_cast<std::size_t>(b)] += 1.0;
        ++kept;
    }
    if (kept == 0) throw std::invalid_argument("sample_coupling_distribution: no samples above the cutoff");
    std::vector<double> edges(static_cast<std::size_t>(opt.bins) + 1);
    for (int i = 0; i <= opt.bins; ++i) edges[static_cast<std::size_t>(i)] = lo + i * width;
    edges.back() = hi;
    for (double& c : counts) c /= double(kept) * width;
    return CouplingDensity::from_histogram(opt.g_max, opt.f_cut, std::move(edges), std::move(counts), opt.nodes);
}

template <class F>
double average_over_g(F&& quantity, const CouplingDensity& density) {
    double sum = 0.0;
    for (const auto& node : density.nodes()) {
        try {
            sum += node.weight * quantity(node.g);
        } catch (const std::exception& e) {
            throw std::runtime_error("average_over_g: integrand failed at g = " + std::to_string(node.g) + ": " + e.what());
        }
    }
    return sum;
}

// Two-column text: "g_over_kappa,kappa_P" header, one row per bin center.
// Lines starting with '#' are comments.
inline void write_density(std::ostream& os, const CouplingDensity& d, const std::string& preamble = {}) {
    if (d.is_point_mass()) throw std::invalid_argument("write_density: point masses have no tabulated density");
    os << preamble << "g_over_kappa,kappa_P\n";
    os.precision(17);
    for (std::size_t i = 0; i < d.values().size(); ++i) os << d.bin_center(i) << ',' << d.values()[i] << '\n';
}

inline CouplingDensity read_density(std::istream& is, int nodes = 32) {
    std::vector<double> centers, values;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "g_over_kappa,kappa_P") throw std::invalid_argument("read_density: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        std::istringstream row(line);
        double g = 0.0, p = 0.0;
        char comma = 0;
        if (!(row >> g >> comma >> p) || comma != ',') throw std::invalid_argument("read_density: malformed row '" + line + "'");
        centers.push_back(g);
        values.push_back(p);
    }
    if (centers.size() < 2) throw std::invalid_argument("read_density: need at least two bins");
    const double width = (centers.back() - centers.front()) / double(centers.size() - 1);
    std::vector<double> edges;
    for (std::size_t i = 0; i < centers.size(); ++i) edges.push_back(centers.front() + (double(i) - 0.5) * width);
    edges.push_back(centers.back() + 0.5 * width);
    const double g_max = edges.back();
    const double f_cut = edges.front() / g_max;
    return CouplingDensity::from_histogram(g_max, f_cut, std::move(edges), std::move(values), nodes);
}

struct SpectrumPoint {
    double delta_tilde;
    double value_con;
    double value_unc;
};

struct PointFailure {
    std::size_t index;
    double abscissa;
    std::string message;
};

struct Spectrum {
    std::vector<SpectrumPoint> points;
    SystemParams params;
    double tau_w = 0.0;
    std::vector<PointFailure> failures;
};

struct ScanOptions {
    BlochOptions bloch;
    ExpansionOptions expansion;
    int threads = 1;
};

namespace detail {

// One scanner per density node; a node whose setup fails keeps its message
// and fails every detuning it is asked for.
struct NodeScanners {
    std::vector<std::optional<PeakScanner>> scanners;
    std::vector<std::string> errors;
};

inline std::string node_error(double g, const std::string& what) { return "g = " + std::to_string(g) + ": " + what; }

inline NodeScanners build_node_scanners(const SystemParams& params, const CouplingDensity& density,
                                        const ScanOptions& opt, int threads) {
    const auto& nodes = density.nodes();
    NodeScanners out{std::vector<std::optional<PeakScanner>>(nodes.size()), std::vector<std::string>(nodes.size())};
    parallel_for(nodes.size(), threads, [&](std::size_t i) {
        SystemParams q = params;
        q.g = nodes[i].g;
        try {
            out.scanners[i].emplace(q, opt.bloch, opt.expansion);
        } catch (const std::exception& e) {
            out.errors[i] = node_error(nodes[i].g, e.what());
        }
    });
    return out;
}

inline SpectrumPoint average_over_nodes(const SystemParams& params, const CouplingDensity& density,
                                        const NodeScanners& scanners, double delta_tilde, double tau_w) {
    const double delta = scan_delta(params.detuning1, delta_tilde);
    SpectrumPoint out{delta_tilde, 0.0, 0.0};
    const auto& nodes = density.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!scanners.scanners[i]) throw std::runtime_error(scanners.errors[i]);
        try {
            const G2Coefficients k = scanners.scanners[i]->at_delta(delta).coeffs;
            out.value_con += nodes[i].weight * delta_conditional(k, tau_w);
            out.value_unc += nodes[i].weight * delta_unconditional(k, tau_w);
        } catch (const std::exception& e) {
            throw std::runtime_error(node_error(nodes[i].g, e.what()));
        }
    }
    return out;
}

} // namespace detail

// Density-averaged window rates at a single scanning detuning.
inline SpectrumPoint spectrum_point(const SystemParams& params, const CouplingDensity& density, double delta_tilde,
                                    double tau_w, const ScanOptions& opt = {}) {
    const detail::NodeScanners scanners = detail::build_node_scanners(params, density, opt, 1);
    return detail::average_over_nodes(params, density, scanners, delta_tilde, tau_w);
}

inline Spectrum spectrum_scan(const SystemParams& params, const CouplingDensity& density, std::vector<double> grid,
                              double tau_w, const ScanOptions& opt = {}) {
    params.validate();
    if (grid.empty()) throw std::invalid_argument("spectrum_scan: empty grid");
    if (!(tau_w > 0.0)) throw std::invalid_argument("spectrum_scan: tau_w must be > 0");
    std::sort(grid.begin(), grid.end());
    if (std::adjacent_find(grid.begin(), grid.end()) != grid.end())
        throw std::invalid_argument("spectrum_scan: grid has duplicate points");

    const detail::NodeScanners scanners = detail::build_node_scanners(params, density, opt, opt.threads);
    std::vector<SpectrumPoint> results(grid.size());
    std::vector<std::string> errors(grid.size());
    parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
        try {
            results[i] = detail::average_over_nodes(params, density, scanners, grid[i], tau_w);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    Spectrum s;
    s.params = params;
    s.tau_w = tau_w;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (errors[i].empty()) s.points.push_back(results[i]);
        else s.failures.push_back({i, grid[i], errors[i]});
    }
    return s;
}

struct SubtractedSpectrum {
    Spectrum spectrum;
    int clamped = 0; // points where the difference went negative and was set to zero
};

inline SubtractedSpectrum background_subtract(const Spectrum& bichromatic, const Spectrum& monochromatic) {
    if (bichromatic.points.size() != monochromatic.points.size())
        throw std::invalid_argument("background_subtract: grids differ in length");
    SubtractedSpectrum out;
    out.spectrum.params = bichromatic.params;
    out.spectrum.tau_w = bichromatic.tau_w;
    for (std::size_t i = 0; i < bichromatic.points.size(); ++i) {
        const auto& b = bichromatic.points[i];
        const auto& m = monochromatic.points[i];
        if (b.delta_tilde != m.delta_tilde) throw std::invalid_argument("background_subtract: grids differ");
        double con = b.value_con - m.value_con, unc = b.value_unc - m.value_unc;
        if (con < 0.0 || unc < 0.0) ++out.clamped;
        out.spectrum.points.push_back({b.delta_tilde, std::max(con, 0.0), std::max(unc, 0.0)});
    }
    return out;
}

// Monochromatic twin of a scan: same grid, scanning amplitude off.
inline Spectrum monochromatic_scan(const SystemParams& params, const CouplingDensity& density,
                                   const std::vector<double>& grid, double tau_w, const ScanOptions& opt = {}) {
    SystemParams q = params;
    q.e2 = 0.0;
    return spectrum_scan(q, density, grid, tau_w, opt);
}

inline void write_spectrum(std::ostream& os, const Spectrum& s, const std::string& preamble = {}) {
    os << preamble << "delta_tilde,delta_con,delta_unc\n";
    os.precision(17);
    for (const auto& p : s.points) os << p.delta_tilde << ',' << p.value_con << ',' << p.value_unc << '\n';
}

} // namespace pcs
