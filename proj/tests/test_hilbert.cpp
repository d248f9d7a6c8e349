#include "pcs/hilbert.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace pcs;

TEST(OperatorSet, RejectsNegativeCutoff) { EXPECT_THROW(build_operator_set(-1), std::invalid_argument); }

TEST(OperatorSet, AnnihilationVanishesWithoutPhotons) {
    const auto ops = build_operator_set(0);
    EXPECT_EQ(ops.dim, 2);
    EXPECT_EQ(ops.a.cwiseAbs().maxCoeff(), 0.0);
}

TEST(OperatorSet, NumberSpectrum) {
    const auto ops = build_operator_set(2);
    Eigen::SelfAdjointEigenSolver<Matrix> es(ops.number);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + ops.dim);
    const std::vector<double> expected{0, 0, 1, 1, 2, 2};
    ASSERT_EQ(ev.size(), expected.size());
    for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], expected[i], 1e-14);
}

TEST(OperatorSet, CommutatorDefectSitsAtCutoff) {
    const int n_max = 3;
    const auto ops = build_operator_set(n_max);
    const Matrix defect = ops.a * ops.a_dag - ops.a_dag * ops.a - ops.identity;
    for (int i = 0; i < ops.dim; ++i) {
        for (int j = 0; j < ops.dim; ++j) {
            const bool at_cutoff = i == j && i / 2 == n_max;
            const Complex expected = at_cutoff ? Complex(-(n_max + 1)) : Complex(0.0);
            EXPECT_NEAR(std::abs(defect(i, j) - expected), 0.0, 1e-12) << i << "," << j;
        }
    }
}

TEST(OperatorSet, AdjointPairsAndLayout) {
    const auto ops = build_operator_set(4);
    EXPECT_TRUE(ops.a_dag == ops.a.adjoint());
    EXPECT_TRUE(ops.sigma_minus == ops.sigma_plus.adjoint());
    EXPECT_TRUE(ops.number == ops.a_dag * ops.a);
    // |n=1, e> is index 3; sigma_- takes it to |1, g> (index 2)
    EXPECT_EQ(ops.sigma_minus(2, 3), Complex(1.0));
    EXPECT_EQ(ops.sigma_z(3, 3), Complex(0.5));
    EXPECT_EQ(ops.sigma_z(2, 2), Complex(-0.5));
}

TEST(Hamiltonian, IsHermitian) {
    SystemParams p;
    const Matrix h = jc_hamiltonian(p);
    EXPECT_LE((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Hamiltonian, UncoupledCoupletsAreDegenerate) {
    SystemParams p;
    p.g = 0.0;
    p.detuning1 = 3.0;
    p.n_max = 4;
    const Matrix h = jc_hamiltonian(p);
    for (int n = 1; n <= p.n_max; ++n) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(couplet_block(h, n));
        EXPECT_NEAR(es.eigenvalues()(0), p.detuning1 * (n - 0.5), 1e-12);
        EXPECT_NEAR(es.eigenvalues()(1), p.detuning1 * (n - 0.5), 1e-12);
    }
}

TEST(Hamiltonian, CoupletSplittingMatchesSqrtN) {
    SystemParams p;
    p.g = 9.0;
    p.detuning1 = 9.0;
    p.n_max = 3;
    const Matrix h = jc_hamiltonian(p);
    // full-space eigenvalues must contain det (n - 1/2) ± sqrt(n) g
    Eigen::SelfAdjointEigenSolver<Matrix> full(h);
    std::vector<double> ev(full.eigenvalues().data(), full.eigenvalues().data() + h.rows());
    for (int n = 1; n <= p.n_max; ++n) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(couplet_block(h, n));
        EXPECT_NEAR(es.eigenvalues()(1) - es.eigenvalues()(0), 2.0 * std::sqrt(double(n)) * p.g, 1e-9);
        for (double s : {-1.0, 1.0}) {
            const double target = p.detuning1 * (n - 0.5) + s * std::sqrt(double(n)) * p.g;
            const auto hit = std::any_of(ev.begin(), ev.end(), [&](double e) { return std::abs(e - target) < 1e-9; });
            EXPECT_TRUE(hit) << "n=" << n << " s=" << s;
        }
    }
}

TEST(DressedState, AmplitudesOfFirstCouplet) {
    const StateVector v = dressed_state(1, Branch::plus, 3);
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(v[basis_index(0, 1)] - Complex(0.0, r)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(v[basis_index(1, 0)] - Complex(-r, 0.0)), 0.0, 1e-15);
}

TEST(DressedState, OrthonormalAndBounded) {
    const int n_max = 4;
    for (int n = 1; n <= n_max; ++n) {
        const auto plus = dressed_state(n, Branch::plus, n_max);
        const auto minus = dressed_state(n, Branch::minus, n_max);
        EXPECT_NEAR(std::abs(plus.amplitudes().dot(minus.amplitudes())), 0.0, 1e-15);
    }
    EXPECT_NEAR(dressed_state(2, Branch::minus, n_max).amplitudes().norm(), 1.0, 1e-15);
    EXPECT_THROW(dressed_state(5, Branch::plus, n_max), std::invalid_argument);
    EXPECT_THROW(dressed_state(0, Branch::plus, n_max), std::invalid_argument);
}

TEST(DressedState, EigenvectorsOfTheHamiltonian) {
    SystemParams p;
    p.n_max = 5;
    for (double det : {9.0, 2.5}) {
        p.detuning1 = det;
        const Matrix h = jc_hamiltonian(p);
        for (int n = 1; n <= p.n_max; ++n) {
            for (Branch b : {Branch::plus, Branch::minus}) {
                const Vector v = dressed_state(n, b, p.n_max).amplitudes();
                const double s = b == Branch::plus ? 1.0 : -1.0;
                const double energy = det * (n - 0.5) + s * std::sqrt(double(n)) * p.g;
                const double tol = n == 1 && det == 9.0 ? 1e-12 : 1e-10;
                EXPECT_LE((h * v - energy * v).norm(), tol) << "n=" << n;
            }
        }
    }
}

TEST(StateVector, RejectsUnnormalized) {
    Vector v = Vector::Ones(4);
    EXPECT_THROW(StateVector{v}, std::invalid_argument);
}
