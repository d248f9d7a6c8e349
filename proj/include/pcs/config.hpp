// config.hpp: flat "key = value" run configuration.
//
// One key per line; '#' starts a comment; blank lines are ignored. Unknown
// keys, repeated keys, unparsable values and constraint violations are
// rejected with the key name and line number. echo_config() writes every key
// with its effective value in a form parse_config() reads back exactly.

#pragma once

#include "pcs/ensemble.hpp"
#include "pcs/hilbert.hpp"
#include "pcs/window.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace pcs {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& msg)
        : std::runtime_error(format(key, line, msg)), key_(std::move(key)), line_(line) {}

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; } // 0 when the key was not in the input

private:
    static std::string format(const std::string& key, int line, const std::string& msg) {
        std::string s = "config";
        if (line > 0) s += " line " + std::to_string(line);
        if (!key.empty()) s += " key '" + key + "'";
        return s + ": " + msg;
    }
    std::string key_;
    int line_;
};

enum class DensityMode { ensemble, point };

struct RunConfig {
    // system
    double g = 9.0;      // coupling used when density = point
    double g_f = 9.0;    // selected subensemble; pump detuning omega - omega_1
    double gamma = 2.0;
    double e1 = 0.1;
    double e2 = 0.1;
    int n_max = 4;
    // solver
    int n_b = 3;
    double tol = 1e-9;
    int quadrature_nodes = 32;
    std::uint64_t seed = 1;
    int threads = 1;
    // coupling distribution
    DensityMode density = DensityMode::ensemble;
    Geometry mask = Geometry::masked;
    double g_max = 10.0;
    double f_cut = 0.1;
    double mask_halfwidth = 0.5;
    double open_halfwidth = 2.0;
    long samples = 1'000'000;
    int bins = 40;
    std::string density_file;   // read P(g) from this file instead of sampling
    // sweeps
    double delta_tilde_min = 2.0;
    double delta_tilde_max = 6.0;
    double delta_tilde_step = 0.02;
    double tau_w = 0.1;
    bool subtract_background = false;
    double tau_lo = 0.005;
    double tau_hi = 2.0;
    double tau_tol = 1e-3;
    double tau_w_min = 0.01;
    double tau_w_max = 1.0;
    int tau_w_points = 50;
    double g_grid_min = 1.0;
    double g_grid_max = 10.0;
    int g_grid_points = 10;
    CurveAxis opt_axis = CurveAxis::g;
    std::vector<double> gamma_grid{0.2, 2.0, 5.0, 7.0, 10.0};
    // output
    std::string out_dir = ".";
    std::string prefix;

    SystemParams system_params() const {
        SystemParams p;
        p.g = g;
        p.kappa = 1.0;
        p.gamma = gamma;
        p.detuning1 = g_f;
        p.delta = scan_delta(g_f, kPeakDeltaTilde);
        p.e1 = e1;
        p.e2 = e2;
        p.n_max = n_max;
        return p;
    }

    SamplingOptions sampling() const {
        SamplingOptions s;
        s.geometry = mask;
        s.g_max = g_max;
        s.f_cut = f_cut;
        s.samples = samples;
        s.seed = seed;
        s.bins = bins;
        s.nodes = quadrature_nodes;
        s.mask_halfwidth = mask_halfwidth;
        s.open_halfwidth = open_halfwidth;
        return s;
    }

    ScanOptions scan_options() const {
        ScanOptions o;
        o.bloch.n_b = n_b;
        o.bloch.tol = tol;
        o.threads = threads;
        return o;
    }

    WindowSearch window_search() const { return {tau_lo, tau_hi, tau_tol}; }

    std::vector<double> delta_tilde_grid() const {
        std::vector<double> grid;
        const auto n = static_cast<long>(std::floor((delta_tilde_max - delta_tilde_min) / delta_tilde_step + 1e-9));
        for (long i = 0; i <= n; ++i) grid.push_back(delta_tilde_min + double(i) * delta_tilde_step);
        return grid;
    }

    static std::vector<double> linear_grid(double lo, double hi, int points) {
        if (points == 1) return {lo};
        std::vector<double> grid;
        for (int i = 0; i < points; ++i) grid.push_back(lo + (hi - lo) * i / (points - 1));
        return grid;
    }

    std::vector<double> tau_w_grid() const { return linear_grid(tau_w_min, tau_w_max, tau_w_points); }
    std::vector<double> g_grid() const { return linear_grid(g_grid_min, g_grid_max, g_grid_points); }

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

template <class T>
bool parse_number(const std::string& text, T& out) {
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, out);
    return r.ec == std::errc() && r.ptr == end;
}

struct KeySpec {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set; // throws std::invalid_argument
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
KeySpec number_key(std::string name, T RunConfig::*field) {
    return {name,
            [field](RunConfig& c, const std::string& v) {
                T x{};
                if (!parse_number(v, x)) throw std::invalid_argument("expected a number, got '" + v + "'");
                c.*field = x;
            },
            [field](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) return format_double(c.*field);
                else return std::to_string(c.*field);
            }};
}

inline KeySpec string_key(std::string name, std::string RunConfig::*field) {
    return {name, [field](RunConfig& c, const std::string& v) { c.*field = v; },
            [field](const RunConfig& c) { return c.*field; }};
}

template <class E>
KeySpec enum_key(std::string name, E RunConfig::*field, std::vector<std::pair<std::string, E>> choices) {
    return {name,
            [field, choices](RunConfig& c, const std::string& v) {
                for (const auto& [text, value] : choices)
                    if (text == v) {
                        c.*field = value;
                        return;
                    }
                std::string allowed;
                for (const auto& ch : choices) allowed += (allowed.empty() ? "" : "|") + ch.first;
                throw std::invalid_argument("expected one of " + allowed + ", got '" + v + "'");
            },
            [field, choices](const RunConfig& c) {
                for (const auto& [text, value] : choices)
                    if (value == c.*field) return text;
                return std::string{};
            }};
}

inline const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = [] {
        std::vector<KeySpec> t;
        t.push_back(number_key("g", &RunConfig::g));
        t.push_back(number_key("g_f", &RunConfig::g_f));
        t.push_back(number_key("gamma", &RunConfig::gamma));
        t.push_back(number_key("e1", &RunConfig::e1));
        t.push_back(number_key("e2", &RunConfig::e2));
        t.push_back(number_key("n_max", &RunConfig::n_max));
        t.push_back(number_key("n_b", &RunConfig::n_b));
        t.push_back(number_key("tol", &RunConfig::tol));
        t.push_back(number_key("quadrature_nodes", &RunConfig::quadrature_nodes));
        t.push_back(number_key("seed", &RunConfig::seed));
        t.push_back(number_key("threads", &RunConfig::threads));
        t.push_back(enum_key<DensityMode>("density", &RunConfig::density,
                                          {{"ensemble", DensityMode::ensemble}, {"point", DensityMode::point}}));
        t.push_back(enum_key<Geometry>("mask", &RunConfig::mask,
                                       {{"masked", Geometry::masked}, {"unmasked", Geometry::unmasked}}));
        t.push_back(number_key("g_max", &RunConfig::g_max));
        t.push_back(number_key("f_cut", &RunConfig::f_cut));
        t.push_back(number_key("mask_halfwidth", &RunConfig::mask_halfwidth));
        t.push_back(number_key("open_halfwidth", &RunConfig::open_halfwidth));
        t.push_back(number_key("samples", &RunConfig::samples));
        t.push_back(number_key("bins", &RunConfig::bins));
        t.push_back(string_key("density_file", &RunConfig::density_file));
        t.push_back(number_key("delta_tilde_min", &RunConfig::delta_tilde_min));
        t.push_back(number_key("delta_tilde_max", &RunConfig::delta_tilde_max));
        t.push_back(number_key("delta_tilde_step", &RunConfig::delta_tilde_step));
        t.push_back(number_key("tau_w", &RunConfig::tau_w));
        t.push_back(enum_key<bool>("subtract_background", &RunConfig::subtract_background,
                                   {{"false", false}, {"true", true}}));
        t.push_back(number_key("tau_lo", &RunConfig::tau_lo));
        t.push_back(number_key("tau_hi", &RunConfig::tau_hi));
        t.push_back(number_key("tau_tol", &RunConfig::tau_tol));
        t.push_back(number_key("tau_w_min", &RunConfig::tau_w_min));
        t.push_back(number_key("tau_w_max", &RunConfig::tau_w_max));
        t.push_back(number_key("tau_w_points", &RunConfig::tau_w_points));
        t.push_back(number_key("g_grid_min", &RunConfig::g_grid_min));
        t.push_back(number_key("g_grid_max", &RunConfig::g_grid_max));
        t.push_back(number_key("g_grid_points", &RunConfig::g_grid_points));
        t.push_back(enum_key<CurveAxis>("opt_axis", &RunConfig::opt_axis,
                                        {{"g", CurveAxis::g}, {"gamma", CurveAxis::gamma}}));
        t.push_back({"gamma_grid",
                     [](RunConfig& c, const std::string& v) {
                         std::vector<double> values;
                         std::stringstream ss(v);
                         std::string item;
                         while (std::getline(ss, item, ',')) {
                             double x = 0.0;
                             if (!parse_number(trim(item), x))
                                 throw std::invalid_argument("expected a comma-separated list of numbers");
                             values.push_back(x);
                         }
                         c.gamma_grid = std::move(values);
                     },
                     [](const RunConfig& c) {
                         std::string s;
                         for (double x : c.gamma_grid) s += (s.empty() ? "" : ",") + format_double(x);
                         return s;
                     }});
        t.push_back(string_key("out_dir", &RunConfig::out_dir));
        t.push_back(string_key("prefix", &RunConfig::prefix));
        return t;
    }();
    return table;
}

inline void validate(const RunConfig& c, const std::map<std::string, int>& lines) {
    auto need = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) {
            const auto it = lines.find(key);
            throw ConfigError(key, it == lines.end() ? 0 : it->second, msg);
        }
    };
    auto finite = [](double x) { return std::isfinite(x); };
    need(finite(c.g) && c.g >= 0.0, "g", "must be finite and >= 0");
    need(finite(c.g_f) && c.g_f > 0.0, "g_f", "must be finite and > 0");
    need(finite(c.gamma) && c.gamma >= 0.0, "gamma", "must be finite and >= 0");
    need(finite(c.e1) && c.e1 >= 0.0, "e1", "must be finite and >= 0");
    need(finite(c.e2) && c.e2 >= 0.0, "e2", "must be finite and >= 0");
    need(c.n_max >= 1, "n_max", "must be >= 1");
    need(c.n_b >= 1, "n_b", "must be >= 1");
    need(finite(c.tol) && c.tol > 0.0, "tol", "must be > 0");
    need(c.quadrature_nodes >= 1, "quadrature_nodes", "must be >= 1");
    need(c.threads >= 1, "threads", "must be >= 1");
    need(finite(c.g_max) && c.g_max > 0.0, "g_max", "must be > 0");
    need(c.f_cut > 0.0 && c.f_cut < 1.0, "f_cut", "must lie in (0, 1)");
    need(finite(c.mask_halfwidth) && c.mask_halfwidth > 0.0, "mask_halfwidth", "must be > 0");
    need(finite(c.open_halfwidth) && c.open_halfwidth > 0.0, "open_halfwidth", "must be > 0");
    need(c.samples >= 10'000, "samples", "must be >= 10000");
    need(c.bins >= 1, "bins", "must be >= 1");
    need(finite(c.delta_tilde_min), "delta_tilde_min", "must be finite");
    need(finite(c.delta_tilde_max) && c.delta_tilde_max >= c.delta_tilde_min, "delta_tilde_max",
         "must be >= delta_tilde_min");
    need(finite(c.delta_tilde_step) && c.delta_tilde_step > 0.0, "delta_tilde_step", "must be > 0");
    need(finite(c.tau_w) && c.tau_w > 0.0, "tau_w", "must be > 0");
    need(finite(c.tau_lo) && c.tau_lo > 0.0, "tau_lo", "must be > 0");
    need(finite(c.tau_hi) && c.tau_hi > c.tau_lo, "tau_hi", "must exceed tau_lo");
    need(finite(c.tau_tol) && c.tau_tol > 0.0, "tau_tol", "must be > 0");
    need(finite(c.tau_w_min) && c.tau_w_min > 0.0, "tau_w_min", "must be > 0");
    need(finite(c.tau_w_max) && c.tau_w_max >= c.tau_w_min, "tau_w_max", "must be >= tau_w_min");
    need(c.tau_w_points >= 1, "tau_w_points", "must be >= 1");
    need(finite(c.g_grid_min) && c.g_grid_min >= 0.0, "g_grid_min", "must be >= 0");
    need(finite(c.g_grid_max) && c.g_grid_max >= c.g_grid_min, "g_grid_max", "must be >= g_grid_min");
    need(c.g_grid_points >= 1, "g_grid_points", "must be >= 1");
    need(!c.gamma_grid.empty(), "gamma_grid", "must not be empty");
    for (double x : c.gamma_grid) need(finite(x) && x >= 0.0, "gamma_grid", "entries must be finite and >= 0");
    need(!c.out_dir.empty(), "out_dir", "must not be empty");
}

} // namespace detail

inline RunConfig parse_config(std::string_view source) {
    RunConfig cfg;
    std::map<std::string, int> lines;
    const auto& table = detail::key_table();
    std::istringstream in{std::string(source)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("", line_no, "expected 'key = value'");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        const auto spec = std::find_if(table.begin(), table.end(), [&](const auto& k) { return k.name == key; });
        if (spec == table.end()) throw ConfigError(key, line_no, "unknown key");
        if (lines.count(key)) throw ConfigError(key, line_no, "key given twice");
        try {
            spec->set(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key, line_no, e.what());
        }
        lines[key] = line_no;
    }
    detail::validate(cfg, lines);
    return cfg;
}

inline std::string echo_config(const RunConfig& cfg, std::string_view line_prefix = "") {
    std::string out;
    for (const auto& k : detail::key_table())
        out += std::string(line_prefix) + k.name + " = " + k.get(cfg) + "\n";
    return out;
}

} // namespace pcs
