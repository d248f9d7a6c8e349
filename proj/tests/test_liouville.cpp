#include "pcs/liouville.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

using namespace pcs;

namespace {

// Full generator at time t assembled from the time-dependent non-Hermitian
// Hamiltonian in one piece, without the sideband split.
Matrix assemble_directly(const SystemParams& p, double t) {
    const auto ops = build_operator_set(p.n_max);
    Matrix h = p.detuning1 * (ops.sigma_z + ops.number)
               + kI * p.g * (ops.a_dag * ops.sigma_minus - ops.a * ops.sigma_plus)
               + kI * p.e1 * (ops.sigma_plus - ops.sigma_minus)
               - kI * p.kappa * ops.number
               - kI * (p.gamma / 2.0) * ops.sigma_plus * ops.sigma_minus;
    // E2 [e^{-i d t} s+ - e^{i d t} s-, rho] = -i [H2, rho], H2 = i E2 (e^{-i d t} s+ - e^{i d t} s-)
    const Matrix h2 = kI * p.e2 * (std::exp(-kI * p.delta * t) * ops.sigma_plus - std::exp(kI * p.delta * t) * ops.sigma_minus);
    const Matrix id = ops.identity;
    Matrix l = -kI * (oracle::sandwich(h, id) - oracle::sandwich(id, h.adjoint()))
               - kI * (oracle::sandwich(h2, id) - oracle::sandwich(id, h2));
    l += p.gamma * oracle::sandwich(ops.sigma_minus, ops.sigma_plus) + 2.0 * p.kappa * oracle::sandwich(ops.a, ops.a_dag);
    return l;
}

Matrix random_matrix(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = Complex(n(rng), n(rng));
    return m;
}

} // namespace

TEST(Vectorize, TraceFunctionalOfIdentity) {
    const Matrix id = Matrix::Identity(4, 4);
    EXPECT_EQ((trace_functional(4) * vectorize(id))(0), Complex(4.0));
}

TEST(Vectorize, RoundTripIsExact) {
    std::mt19937_64 rng(7);
    const Matrix m = random_matrix(6, rng);
    EXPECT_TRUE(devectorize(vectorize(m), 6) == m);
    EXPECT_THROW(vectorize(m, 5), std::invalid_argument);
    EXPECT_THROW(devectorize(Vector::Zero(35), 6), std::invalid_argument);
}

TEST(Vectorize, SandwichRuleMatchesDenseProduct) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix a = random_matrix(2, rng), b = random_matrix(2, rng), rho = random_matrix(2, rng);
        const Vector direct = vectorize(Matrix(a * rho * b));
        EXPECT_LE((sandwich(a, b) * vectorize(rho) - direct).norm(), 1e-13);
        EXPECT_LE((oracle::sandwich(a, b) * vectorize(rho) - direct).norm(), 1e-13);
        EXPECT_LE((left_multiplication(a) * vectorize(rho) - vectorize(Matrix(a * rho))).norm(), 1e-13);
        EXPECT_LE((right_multiplication(b) * vectorize(rho) - vectorize(Matrix(rho * b))).norm(), 1e-13);
    }
}

TEST(StaticLiouvillian, AnnihilatedByTrace) {
    SystemParams p;
    const auto l = build_static_liouvillian(p);
    EXPECT_LE((trace_functional(p.dim()) * l.matrix).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StaticLiouvillian, CavityDecayRateIsTwoKappa) {
    SystemParams p;
    p.g = 0.0;
    p.e1 = 0.0;
    p.gamma = 0.0;
    p.n_max = 4;
    const auto ops = build_operator_set(p.n_max);
    const auto l = build_static_liouvillian(p, ops);
    const Matrix rho0 = fock_state(2, 0, p.n_max).projector();
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
        const Matrix rho = devectorize((l.matrix * t).exp() * vectorize(rho0), ops.dim);
        EXPECT_NEAR((ops.number * rho).trace().real(), 2.0 * std::exp(-2.0 * t), 1e-12);
    }
}

TEST(StaticLiouvillian, AtomicDecayRateIsGamma) {
    SystemParams p;
    p.g = 0.0;
    p.e1 = 0.0;
    p.kappa = 0.0;
    p.gamma = 1.7;
    p.n_max = 1;
    const auto ops = build_operator_set(p.n_max);
    const auto l = build_static_liouvillian(p, ops);
    const Matrix rho0 = fock_state(0, 1, p.n_max).projector();
    const Matrix excited = ops.sigma_plus * ops.sigma_minus;
    for (double t : {0.2, 1.0, 3.0}) {
        const Matrix rho = devectorize((l.matrix * t).exp() * vectorize(rho0), ops.dim);
        EXPECT_NEAR((excited * rho).trace().real(), std::exp(-p.gamma * t), 1e-12);
    }
}

TEST(Sidebands, VanishWithoutScanningDrive) {
    SystemParams p;
    p.e2 = 0.0;
    const auto s = build_sideband_superops(p);
    EXPECT_EQ(s.up.matrix.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.down.matrix.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sidebands, RaisingCommutatorOnGroundProjector) {
    SystemParams p;
    p.e2 = 0.3;
    p.n_max = 2;
    const auto s = build_sideband_superops(p);
    const Matrix ground = ground_state(p.n_max).projector();
    Matrix expected = Matrix::Zero(p.dim(), p.dim());
    expected(basis_index(0, 1), basis_index(0, 0)) = p.e2; // E2 |0,e><0,g|
    EXPECT_LE((s.up.apply(ground) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Generator, MatchesDirectAssembly) {
    SystemParams p;
    p.e2 = 0.25;
    const Generator gen = build_generator(p);
    for (double t : {0.0, 0.37, 1.9}) EXPECT_LE((gen.at(t) - assemble_directly(p, t)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generator, TraceAndHermiticityAtRandomTimes) {
    SystemParams p;
    const Generator gen = build_generator(p);
    const auto tr = trace_functional(p.dim());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> time(0.0, 50.0);
    for (int k = 0; k < 10; ++k) {
        const double t = time(rng);
        const Matrix l = gen.at(t);
        EXPECT_LE((tr * l).cwiseAbs().maxCoeff(), 1e-12);
        const Matrix rho = oracle::random_hermitian(p.dim(), 100 + k);
        const Matrix image = devectorize(l * vectorize(rho), p.dim());
        EXPECT_LE((image - image.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Generator, AffineInEveryRate) {
    SystemParams base;
    const double t = 0.8, h = 0.05;
    auto gen = [&](SystemParams p) { return build_generator(p).at(t); };
    for (double SystemParams::*rate : {&SystemParams::e1, &SystemParams::e2, &SystemParams::gamma, &SystemParams::kappa}) {
        SystemParams lo = base, mid = base, hi = base;
        lo.*rate = base.*rate + h;
        mid.*rate = base.*rate + 2 * h;
        hi.*rate = base.*rate + 3 * h;
        const Matrix second = gen(hi) - 2.0 * gen(mid) + gen(lo);
        EXPECT_LE(second.cwiseAbs().maxCoeff(), 1e-12);
        const Matrix slope = (gen(hi) - gen(lo)) / (2 * h);
        EXPECT_GT(slope.cwiseAbs().maxCoeff(), 0.1);
    }
}

TEST(Liouvillian, JumpAndCoherentPartsSumToStatic) {
    SystemParams p;
    const auto ops = build_operator_set(p.n_max);
    const auto total = build_static_liouvillian(p, ops);
    const auto parts = build_nonhermitian_part(p, ops) + build_jump_superop(p, ops);
    EXPECT_LE((total.matrix - parts.matrix).cwiseAbs().maxCoeff(), 0.0);
}
