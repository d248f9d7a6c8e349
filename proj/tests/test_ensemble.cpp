#include "pcs/ensemble.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace pcs;

namespace {

SamplingOptions sampling(Geometry geometry, std::uint64_t seed) {
    SamplingOptions opt;
    opt.geometry = geometry;
    opt.seed = seed;
    return opt;
}

double histogram_mass(const CouplingDensity& d) {
    double m = 0.0;
    for (std::size_t i = 0; i < d.values().size(); ++i) m += d.values()[i] * (d.edges()[i + 1] - d.edges()[i]);
    return m;
}

std::vector<double> grid(double lo, double hi, double step) {
    std::vector<double> out;
    const int n = static_cast<int>(std::lround((hi - lo) / step));
    for (int i = 0; i <= n; ++i) out.push_back(lo + i * step);
    return out;
}

} // namespace

TEST(Rng, SplitmixReferenceValue) {
    EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(uniform01(5, 17), uniform01(5, 17));
    EXPECT_NE(uniform01(5, 17), uniform01(6, 17));
    double lo = 1.0, hi = 0.0, mean = 0.0;
    for (std::uint64_t k = 0; k < 100000; ++k) {
        const double u = uniform01(1, k);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        mean += u;
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LT(hi, 1.0);
    EXPECT_NEAR(mean / 100000, 0.5, 5e-3);
}

TEST(Sampling, RejectsBadOptions) {
    SamplingOptions opt;
    opt.samples = 9999;
    EXPECT_THROW(sample_coupling_distribution(opt), std::invalid_argument);
    opt = {};
    opt.f_cut = 1.5;
    EXPECT_THROW(sample_coupling_distribution(opt), std::invalid_argument);
    opt.f_cut = 0.0;
    EXPECT_THROW(sample_coupling_distribution(opt), std::invalid_argument);
}

TEST(Sampling, CouplingsStayInRange) {
    const SamplingOptions opt = sampling(Geometry::unmasked, 3);
    for (std::uint64_t k = 0; k < 10000; ++k) {
        const double g = sample_coupling(opt, k);
        EXPECT_GE(g, 0.0);
        EXPECT_LE(g, opt.g_max);
    }
}

TEST(Sampling, NormalizedForAnySeed) {
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
        SamplingOptions opt = sampling(Geometry::masked, seed);
        opt.samples = 100000;
        const auto d = sample_coupling_distribution(opt);
        EXPECT_NEAR(histogram_mass(d), 1.0, 1e-6);
        double w = 0.0;
        for (const auto& n : d.nodes()) w += n.weight;
        EXPECT_NEAR(w, 1.0, 1e-12);
        EXPECT_NEAR(d.raw_quadrature_mass(), 1.0, 5e-2);
        EXPECT_NEAR(d.edges().front(), 1.0, 1e-12);
        EXPECT_EQ(d.edges().back(), 10.0);
        EXPECT_EQ(d.values().size(), 40u);
    }
}

TEST(Sampling, MaskConcentratesStrongCoupling) {
    const auto masked = sample_coupling_distribution(sampling(Geometry::masked, 1));
    const auto open = sample_coupling_distribution(sampling(Geometry::unmasked, 1));
    EXPECT_GT(masked.mass_between(8.0, 10.0), open.mass_between(8.0, 10.0));
}

TEST(Sampling, SeedsAgreeWithinTwoPercentSupNorm) {
    for (Geometry geometry : {Geometry::masked, Geometry::unmasked}) {
        const auto a = sample_coupling_distribution(sampling(geometry, 1));
        const auto b = sample_coupling_distribution(sampling(geometry, 2));
        double sup = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < a.values().size(); ++i) {
            sup = std::max(sup, std::abs(a.values()[i] - b.values()[i]));
            peak = std::max(peak, a.values()[i]);
        }
        EXPECT_LE(sup / peak, 0.02) << to_string(geometry);
    }
}

TEST(Sampling, QuadratureMatchesMonteCarloSecondMoment) {
    const SamplingOptions opt = sampling(Geometry::masked, 1);
    const auto d = sample_coupling_distribution(opt);
    double mc = 0.0;
    long kept = 0;
    for (long k = 0; k < opt.samples; ++k) {
        const double g = sample_coupling(opt, static_cast<std::uint64_t>(k));
        if (g < opt.f_cut * opt.g_max) continue;
        mc += g * g;
        ++kept;
    }
    mc /= double(kept);
    const double quad = average_over_g([](double g) { return g * g; }, d);
    EXPECT_LE(std::abs(quad - mc) / mc, 5e-3);
}

TEST(Averaging, LinearAndExactOnPointMass) {
    const auto d = sample_coupling_distribution(sampling(Geometry::masked, 4));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double a = u(rng), b = u(rng), p = u(rng), q = u(rng);
        auto f = [&](double g) { return std::sin(p * g); };
        auto h = [&](double g) { return std::exp(q * g / 10.0); };
        const double lhs = average_over_g([&](double g) { return a * f(g) + b * h(g); }, d);
        EXPECT_NEAR(lhs, a * average_over_g(f, d) + b * average_over_g(h, d), 1e-12);
    }
    const auto point = CouplingDensity::point_mass(9.0);
    EXPECT_EQ(average_over_g([](double g) { return g * g * g; }, point), 729.0);
    EXPECT_THROW(CouplingDensity::point_mass(-1.0), std::invalid_argument);
}

TEST(Averaging, ReportsFailingCoupling) {
    const auto point = CouplingDensity::point_mass(4.5);
    try {
        average_over_g([](double) -> double { throw std::domain_error("boom"); }, point);
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("4.5"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
    }
}

TEST(DensityFile, RoundTrip) {
    const auto d = sample_coupling_distribution(sampling(Geometry::unmasked, 7));
    std::stringstream ss;
    write_density(ss, d, "# produced by a test\n");
    const auto back = read_density(ss);
    ASSERT_EQ(back.values().size(), d.values().size());
    for (std::size_t i = 0; i < d.values().size(); ++i) {
        EXPECT_NEAR(back.values()[i], d.values()[i], 1e-12 * d.values()[i] + 1e-300);
        EXPECT_NEAR(back.edges()[i], d.edges()[i], 1e-12);
    }
    for (std::size_t i = 0; i < d.nodes().size(); ++i) EXPECT_NEAR(back.nodes()[i].weight, d.nodes()[i].weight, 1e-12);
}

TEST(DensityFile, RejectsMalformedInput) {
    std::istringstream bad_header("g,P\n1,2\n2,3\n");
    EXPECT_THROW(read_density(bad_header), std::invalid_argument);
    std::istringstream bad_row("g_over_kappa,kappa_P\n1;2\n");
    EXPECT_THROW(read_density(bad_row), std::invalid_argument);
    std::istringstream one_bin("g_over_kappa,kappa_P\n1,2\n");
    EXPECT_THROW(read_density(one_bin), std::invalid_argument);
}

class SpectrumTest : public ::testing::Test {
protected:
    SystemParams params;
    CouplingDensity fixed = CouplingDensity::point_mass(9.0);
};

TEST_F(SpectrumTest, RejectsBadGrids) {
    EXPECT_THROW(spectrum_scan(params, fixed, {}, 0.1), std::invalid_argument);
    EXPECT_THROW(spectrum_scan(params, fixed, {2.0, 2.0}, 0.1), std::invalid_argument);
    EXPECT_THROW(spectrum_scan(params, fixed, {2.0}, 0.0), std::invalid_argument);
}

TEST_F(SpectrumTest, SortsGrid) {
    const Spectrum s = spectrum_scan(params, fixed, {3.0, 2.0, 2.5}, 0.1);
    ASSERT_EQ(s.points.size(), 3u);
    EXPECT_EQ(s.points[0].delta_tilde, 2.0);
    EXPECT_EQ(s.points[2].delta_tilde, 3.0);
}

TEST_F(SpectrumTest, FlatWithoutScanningDrive) {
    params.e2 = 0.0;
    const Spectrum s = spectrum_scan(params, fixed, grid(2.0, 4.0, 0.5), 0.1);
    ASSERT_EQ(s.points.size(), 5u);
    for (const auto& p : s.points) {
        EXPECT_EQ(p.value_con, s.points.front().value_con);
        EXPECT_EQ(p.value_unc, s.points.front().value_unc);
    }
    const G2Coefficients bg = background_coeffs(params);
    EXPECT_NEAR(s.points.front().value_con, delta_conditional(bg, 0.1), 1e-15);
}

TEST_F(SpectrumTest, PeakAtTwoPhotonResonance) {
    const Spectrum s = spectrum_scan(params, fixed, grid(2.0, 3.0, 0.02), 0.1);
    ASSERT_TRUE(s.failures.empty());
    const auto best = std::max_element(s.points.begin(), s.points.end(),
                                       [](const auto& a, const auto& b) { return a.value_con < b.value_con; });
    ASSERT_NE(best, s.points.begin());
    ASSERT_NE(best, s.points.end() - 1);
    EXPECT_NEAR(best->delta_tilde, kPeakDeltaTilde, 0.05);
}

TEST_F(SpectrumTest, FarDetunedSpectrumApproachesBackground) {
    const Spectrum s = spectrum_scan(params, fixed, {20.0, 25.0, 30.0}, 0.1);
    const Spectrum mono = monochromatic_scan(params, fixed, {20.0, 25.0, 30.0}, 0.1);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const double rel = std::abs(s.points[i].value_con / mono.points[i].value_con - 1.0);
        EXPECT_LE(rel, 1e-2) << s.points[i].delta_tilde;
    }
}

TEST_F(SpectrumTest, SubtractionOfTwins) {
    const auto g = grid(2.0, 3.0, 0.25);
    const Spectrum s = spectrum_scan(params, fixed, g, 0.1);
    const SubtractedSpectrum self = background_subtract(s, s);
    for (const auto& p : self.spectrum.points) {
        EXPECT_EQ(p.value_con, 0.0);
        EXPECT_EQ(p.value_unc, 0.0);
    }
    SystemParams off = params;
    off.e2 = 0.0;
    const SubtractedSpectrum twins =
        background_subtract(spectrum_scan(off, fixed, g, 0.1), monochromatic_scan(off, fixed, g, 0.1));
    for (const auto& p : twins.spectrum.points) EXPECT_EQ(p.value_con, 0.0);
    EXPECT_EQ(twins.clamped, 0);
    EXPECT_THROW(background_subtract(s, spectrum_scan(params, fixed, {2.0}, 0.1)), std::invalid_argument);
}

TEST_F(SpectrumTest, PeakSurvivesSubtraction) {
    const auto g = grid(2.2, 2.6, 0.02);
    const Spectrum s = spectrum_scan(params, fixed, g, 0.1);
    const SubtractedSpectrum sub = background_subtract(s, monochromatic_scan(params, fixed, g, 0.1));
    auto argmax = [](const std::vector<SpectrumPoint>& pts) {
        return std::max_element(pts.begin(), pts.end(),
                                [](const auto& a, const auto& b) { return a.value_con < b.value_con; })
            ->delta_tilde;
    };
    EXPECT_EQ(argmax(s.points), argmax(sub.spectrum.points));
}

TEST_F(SpectrumTest, FailuresAreRecordedPerPoint) {
    ScanOptions opt;
    opt.bloch.tol = 1e-30;
    const Spectrum s = spectrum_scan(params, fixed, {2.0, 2.5}, 0.1, opt);
    EXPECT_TRUE(s.points.empty());
    ASSERT_EQ(s.failures.size(), 2u);
    EXPECT_EQ(s.failures[1].abscissa, 2.5);
    EXPECT_NE(s.failures[0].message.find("g = 9"), std::string::npos);
}

TEST_F(SpectrumTest, ThreadCountDoesNotChangeResults) {
    SamplingOptions so = sampling(Geometry::masked, 1);
    so.samples = 20000;
    so.nodes = 4;
    const auto d = sample_coupling_distribution(so);
    ScanOptions one, many;
    many.threads = 3;
    const auto g = grid(2.0, 3.0, 0.25);
    const Spectrum a = spectrum_scan(params, d, g, 0.1, one);
    const Spectrum b = spectrum_scan(params, d, g, 0.1, many);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        EXPECT_EQ(a.points[i].value_con, b.points[i].value_con);
        EXPECT_EQ(a.points[i].value_unc, b.points[i].value_unc);
    }
    std::ostringstream sa, sb;
    write_spectrum(sa, a);
    write_spectrum(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
}
