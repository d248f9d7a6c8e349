// pcs: command-line front end for two-photon coincidence spectra and
// optimal coincidence-window searches.
//
//   pcs <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]
//
// Subcommands write <prefix><stem>.csv and <prefix><stem>.json into the output
// directory, where the stem is the subcommand with '-' replaced by '_'. Every CSV starts with '#' comment lines holding the
// tool version and the effective configuration.

#include "pcs/config.hpp"
#include "pcs/ensemble.hpp"
#include "pcs/window.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#ifndef PCS_VERSION
#define PCS_VERSION "0.0.0"
#endif

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kSchemaVersion = 1;

bool use_color() {
    const char* nc = std::getenv("NO_COLOR");
    return (nc == nullptr || *nc == '\0') && isatty(STDERR_FILENO);
}

void log_info(const std::string& msg) {
    if (use_color()) std::cerr << "\033[36m[pcs]\033[0m " << msg << '\n';
    else std::cerr << "[pcs] " << msg << '\n';
}

struct Output {
    std::string subcommand;
    pcs::RunConfig cfg;
    ordered_json summary;

    Output(std::string sub, pcs::RunConfig c) : subcommand(std::move(sub)), cfg(std::move(c)) {
        summary["schema_version"] = kSchemaVersion;
        summary["tool"] = "pcs";
        summary["version"] = PCS_VERSION;
        summary["subcommand"] = subcommand;
        ordered_json config = ordered_json::object();
        std::istringstream echo(pcs::echo_config(cfg));
        std::string line;
        while (std::getline(echo, line)) {
            const auto eq = line.find(" = ");
            config[line.substr(0, eq)] = line.substr(eq + 3);
        }
        summary["config"] = config;
    }

    std::string preamble() const {
        return "# pcs " + std::string(PCS_VERSION) + " " + subcommand + "\n" + pcs::echo_config(cfg, "# ");
    }

    fs::path path(const std::string& stem, const std::string& ext) const {
        return fs::path(cfg.out_dir) / (cfg.prefix + stem + ext);
    }

    std::ofstream open(const std::string& stem, const std::string& ext) const {
        fs::create_directories(cfg.out_dir);
        std::ofstream os(path(stem, ext), std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + path(stem, ext).string() + " for writing");
        return os;
    }

    // file stem: subcommand with '-' replaced by '_'
    std::string stem() const {
        std::string s = subcommand;
        std::replace(s.begin(), s.end(), '-', '_');
        return s;
    }

    void write_summary() const {
        auto os = open(stem(), ".json");
        os << summary.dump(2) << '\n';
    }
};

ordered_json failures_json(const std::vector<pcs::PointFailure>& failures) {
    ordered_json arr = ordered_json::array();
    for (const auto& f : failures) arr.push_back({{"index", f.index}, {"abscissa", f.abscissa}, {"message", f.message}});
    return arr;
}

std::string fmt(double x) { return pcs::detail::format_double(x); }

pcs::CouplingDensity load_density(const pcs::RunConfig& cfg) {
    if (cfg.density == pcs::DensityMode::point) return pcs::CouplingDensity::point_mass(cfg.g);
    if (!cfg.density_file.empty()) {
        std::ifstream is(cfg.density_file);
        if (!is) throw std::runtime_error("cannot open density_file " + cfg.density_file);
        return pcs::read_density(is, cfg.quadrature_nodes);
    }
    return pcs::sample_coupling_distribution(cfg.sampling());
}

ordered_json density_json(const pcs::CouplingDensity& d) {
    if (d.is_point_mass()) return {{"kind", "point"}, {"g", d.nodes().front().g}};
    return {{"kind", "histogram"},
            {"bins", d.values().size()},
            {"nodes", d.nodes().size()},
            {"raw_quadrature_mass", d.raw_quadrature_mass()}};
}

int run_spectrum(Output& out) {
    const auto& cfg = out.cfg;
    const pcs::SystemParams params = cfg.system_params();
    const auto density = load_density(cfg);
    const auto grid = cfg.delta_tilde_grid();
    log_info("spectrum: " + std::to_string(grid.size()) + " points x " + std::to_string(density.nodes().size()) + " couplings");
    const pcs::Spectrum s = pcs::spectrum_scan(params, density, grid, cfg.tau_w, cfg.scan_options());
    {
        auto os = out.open("spectrum", ".csv");
        pcs::write_spectrum(os, s, out.preamble());
    }
    out.summary["density"] = density_json(density);
    out.summary["points"] = s.points.size();
    out.summary["failures"] = failures_json(s.failures);
    if (!s.points.empty()) {
        auto best = std::max_element(s.points.begin(), s.points.end(),
                                     [](const auto& a, const auto& b) { return a.value_con < b.value_con; });
        out.summary["peak_delta_tilde_con"] = best->delta_tilde;
        out.summary["peak_value_con"] = best->value_con;
    }
    if (cfg.subtract_background) {
        const pcs::Spectrum mono = pcs::monochromatic_scan(params, density, grid, cfg.tau_w, cfg.scan_options());
        const auto sub = pcs::background_subtract(s, mono);
        auto os = out.open("spectrum_subtracted", ".csv");
        pcs::write_spectrum(os, sub.spectrum, out.preamble());
        out.summary["subtracted_clamped"] = sub.clamped;
    }
    out.write_summary();
    return s.points.empty() ? 3 : 0;
}

int run_pvr_surface(Output& out) {
    const auto& cfg = out.cfg;
    const pcs::SystemParams params = cfg.system_params();
    const auto g_grid = cfg.g_grid();
    const auto taus = cfg.tau_w_grid();
    log_info("pvr-surface: " + std::to_string(g_grid.size()) + " x " + std::to_string(taus.size()) + " points");
    std::vector<std::vector<pcs::PvrPoint>> rows(g_grid.size());
    std::vector<std::string> errors(g_grid.size());
    pcs::ScanOptions inner = cfg.scan_options();
    inner.threads = 1;
    pcs::parallel_for(g_grid.size(), cfg.threads, [&](std::size_t i) {
        try {
            pcs::SystemParams p = params;
            p.g = g_grid[i];
            const pcs::PvrEvaluator eval(p, pcs::CouplingDensity::point_mass(g_grid[i]), inner);
            for (double t : taus) rows[i].push_back(eval.point(t));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    std::vector<pcs::PointFailure> failures;
    {
        auto os = out.open("pvr_surface", ".csv");
        os << out.preamble() << "g_over_kappa,kappa_tau_w,pvr_con,pvr_unc\n";
        for (std::size_t i = 0; i < g_grid.size(); ++i) {
            if (!errors[i].empty()) {
                failures.push_back({i, g_grid[i], errors[i]});
                continue;
            }
            for (const auto& p : rows[i])
                os << fmt(g_grid[i]) << ',' << fmt(p.tau_w) << ',' << fmt(p.pvr_con) << ',' << fmt(p.pvr_unc) << '\n';
        }
    }
    out.summary["rows"] = (g_grid.size() - failures.size()) * taus.size();
    out.summary["failures"] = failures_json(failures);
    out.write_summary();
    return failures.size() == g_grid.size() ? 3 : 0;
}

ordered_json optimum_json(const pcs::Maximum& m) {
    return {{"kappa_tau_opt", m.x}, {"pvr", m.value}, {"evaluations", m.evaluations}, {"fallback_used", m.fallback_used}};
}

pcs::TauOptCurve write_curve(Output& out, const std::string& stem, pcs::CurveAxis axis, const std::vector<double>& grid,
                             const pcs::CouplingDensity& density) {
    const auto& cfg = out.cfg;
    const auto curve = pcs::tau_opt_curve(axis, grid, cfg.system_params(), density, cfg.window_search(), cfg.scan_options());
    {
        auto os = out.open(stem, ".csv");
        os << out.preamble() << "axis,kappa_tau_opt_con,kappa_tau_opt_unc\n";
        for (const auto& p : curve.points)
            os << fmt(p.axis_value) << ',' << fmt(p.optimum.con.x) << ',' << fmt(p.optimum.unc.x) << '\n';
    }
    ordered_json pts = ordered_json::array();
    for (const auto& p : curve.points)
        pts.push_back({{"axis", p.axis_value}, {"con", optimum_json(p.optimum.con)}, {"unc", optimum_json(p.optimum.unc)}});
    out.summary["axis"] = pcs::to_string(axis);
    out.summary["density"] = density_json(density);
    out.summary["points"] = pts;
    out.summary["failures"] = failures_json(curve.failures);
    return curve;
}

int run_opt_window(Output& out) {
    const auto& cfg = out.cfg;
    const bool along_g = cfg.opt_axis == pcs::CurveAxis::g;
    const auto grid = along_g ? cfg.g_grid() : cfg.gamma_grid;
    const auto density = along_g ? pcs::CouplingDensity::point_mass(cfg.g) : load_density(cfg);
    log_info(std::string("opt-window along ") + pcs::to_string(cfg.opt_axis) + ": " + std::to_string(grid.size()) + " points");
    const auto curve = write_curve(out, "opt_window", cfg.opt_axis, grid, density);
    out.write_summary();
    return curve.points.empty() ? 3 : 0;
}

int run_regression(Output& out) {
    const auto& cfg = out.cfg;
    const auto density = load_density(cfg);
    log_info("regression over " + std::to_string(cfg.gamma_grid.size()) + " loss rates");
    const auto curve = write_curve(out, "regression", pcs::CurveAxis::gamma, cfg.gamma_grid, density);
    ordered_json fits = ordered_json::object();
    if (curve.points.size() >= 3) {
        std::vector<std::pair<double, double>> con, unc;
        for (const auto& p : curve.points) {
            con.emplace_back(p.axis_value, p.optimum.con.x);
            unc.emplace_back(p.axis_value, p.optimum.unc.x);
        }
        for (const auto& [name, pts] : {std::pair{"con", con}, std::pair{"unc", unc}}) {
            const auto fit = pcs::regression_fit(pts);
            fits[name] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"correlation", fit.correlation}};
        }
    }
    out.summary["fits"] = fits;
    out.write_summary();
    return curve.points.size() >= 3 ? 0 : 3;
}

int run_distribution(Output& out) {
    const auto& cfg = out.cfg;
    log_info("distribution: " + std::to_string(cfg.samples) + " samples");
    const auto density = pcs::sample_coupling_distribution(cfg.sampling());
    {
        auto os = out.open("distribution", ".csv");
        os << out.preamble() << "g_over_kappa,kappa_P\n";
        for (std::size_t i = 0; i < density.values().size(); ++i)
            os << fmt(density.bin_center(i)) << ',' << fmt(density.values()[i]) << '\n';
    }
    out.summary["density"] = density_json(density);
    out.summary["mass_above_0.8_g_max"] = density.mass_between(0.8 * cfg.g_max, cfg.g_max);
    out.write_summary();
    return 0;
}

void report_error(const std::string& kind, const std::string& message, const pcs::ConfigError* ce = nullptr) {
    ordered_json err = {{"status", "error"}, {"kind", kind}, {"message", message}};
    if (ce) {
        err["key"] = ce->key();
        err["line"] = ce->line();
    }
    std::cerr << err.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-photon coincidence spectra and optimal coincidence windows"};
    app.set_version_flag("--version", PCS_VERSION);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    const std::vector<std::pair<std::string, std::string>> subs = {
        {"spectrum", "2PCR spectrum over the normalized scanning detuning"},
        {"pvr-surface", "peak-to-valley ratio over coupling and window time"},
        {"opt-window", "optimal window time along g or gamma"},
        {"regression", "optimal window vs gamma with linear fits"},
        {"distribution", "Monte Carlo coupling-strength distribution"},
    };
    std::vector<CLI::App*> commands;
    for (const auto& [name, help] : subs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "flat key = value configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides out_dir)");
        sub->add_option("--seed", seed, "random seed (overrides seed)");
        sub->add_option("--threads", threads, "maximum worker threads (overrides threads)")->check(CLI::PositiveNumber);
        commands.push_back(sub);
    }
    CLI11_PARSE(app, argc, argv);

    std::string name;
    for (std::size_t i = 0; i < commands.size(); ++i)
        if (commands[i]->parsed()) name = subs[i].first;

    try {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config " + config_path);
        std::stringstream text;
        text << in.rdbuf();
        pcs::RunConfig cfg = pcs::parse_config(text.str());
        for (auto* c : commands) {
            if (!c->parsed()) continue;
            if (c->get_option("--out")->count()) cfg.out_dir = out_dir;
            if (c->get_option("--seed")->count()) cfg.seed = seed;
            if (c->get_option("--threads")->count()) cfg.threads = threads;
        }

        Output out(name, cfg);
        if (name == "spectrum") return run_spectrum(out);
        if (name == "pvr-surface") return run_pvr_surface(out);
        if (name == "opt-window") return run_opt_window(out);
        if (name == "regression") return run_regression(out);
        return run_distribution(out);
    } catch (const pcs::ConfigError& e) {
        report_error("config", e.what(), &e);
        return 2;
    } catch (const pcs::SolverError& e) {
        report_error(std::string("solver.") + pcs::to_string(e.kind()), e.what());
        return 3;
    } catch (const std::exception& e) {
        report_error("runtime", e.what());
        return 1;
    }
}
