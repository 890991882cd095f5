#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "expect_kind.hpp"
#include "selfsim/spectrum.hpp"

using namespace selfsim;

namespace {

std::vector<double> radii(double lo, double hi, int count) {
    std::vector<double> r;
    for (int i = 1; i <= count; ++i) r.push_back(lo + (hi - lo) * i / count);
    return r;
}

}  // namespace

TEST(Spectrum, LaguerreValues) {
    for (double a : {0.0, 0.5, 3.0})
        for (double y : {0.0, 0.3, 7.0}) EXPECT_EQ(laguerre(0, a, y), 1.0);
    EXPECT_DOUBLE_EQ(laguerre(1, 0.0, 1.0), 0.0);
    for (double a : {0.0, 0.866, 2.5})
        for (double y : {0.0, 0.4, 3.0, 11.0}) {
            const double expect = 0.5 * y * y - (a + 2.0) * y + 0.5 * (a + 1.0) * (a + 2.0);
            EXPECT_NEAR(laguerre(2, a, y), expect, 1e-12 * (1.0 + std::abs(expect)));
        }
}

TEST(Spectrum, LaguerreOrthogonality) {
    // int_0^inf y^a e^{-y} L_j L_k dy = 0 for j != k, Gauss-Laguerre-free check by midpoint sums
    const double a = 0.7;
    const int M = 400000;
    const double Y = 80.0, h = Y / M;
    double s01 = 0, s12 = 0, s11 = 0;
    for (int i = 0; i < M; ++i) {
        const double y = (i + 0.5) * h;
        const double w = std::pow(y, a) * std::exp(-y) * h;
        s01 += w * laguerre(0, a, y) * laguerre(1, a, y);
        s12 += w * laguerre(1, a, y) * laguerre(2, a, y);
        s11 += w * laguerre(1, a, y) * laguerre(1, a, y);
    }
    EXPECT_NEAR(s01 / s11, 0.0, 1e-4);
    EXPECT_NEAR(s12 / s11, 0.0, 1e-4);
    EXPECT_NEAR(s11, std::tgamma(a + 2.0), 1e-3);
}

TEST(Spectrum, ModeExponents) {
    for (int n : {2, 3})
        for (int ell : {0, 1, 2, 4}) EXPECT_NEAR(mode_exponents(n, 1.0, ell).second, 0.0, 1e-15);
    for (int n : {2, 3})
        for (double b : {0.1, 0.7, 3.0}) EXPECT_EQ(mode_exponents(n, b, 0).second, 0.0);
    const auto [a, g] = mode_exponents(3, 0.25, 1);
    EXPECT_NEAR(a, 0.5 * std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(g, -0.633975, 1e-6);
    EXPECT_ERROR_KIND(mode_exponents(2, 0.0, 1), ErrorKind::InvalidArgument);
}

TEST(Spectrum, GammaPlusEllNonnegative) {
    for (int n : {2, 3})
        for (double b : {1e-4, 0.01, 0.25, 1.0, 5.0, 50.0})
            for (int ell = 0; ell <= 8; ++ell) EXPECT_GE(mode_exponents(n, b, ell).second + ell, 0.0);
}

TEST(Spectrum, Eigenvalues) {
    for (int n : {2, 3})
        for (int ell = 0; ell <= 4; ++ell)
            for (int k = 0; k <= 4; ++k) {
                EXPECT_EQ(eigenvalue(n, 1.0, ell, k), -0.5 * ell - k);
                EXPECT_EQ(eigenvalue(n, 0.37, 0, k), -static_cast<double>(k));
            }
    EXPECT_NEAR(eigenvalue(3, 0.25, 1, 0), -0.183013, 1e-6);
    EXPECT_NEAR(eigenvalue(2, 0.01, 1, 0), -0.05, 1e-15);
}

TEST(Spectrum, MonotoneInB) {
    for (int n : {2, 3})
        for (int ell = 1; ell <= 4; ++ell)
            for (int k = 0; k <= 2; ++k) {
                double prev = -1e300;
                for (int i = 1; i <= 100; ++i) {
                    const double lam = eigenvalue(n, 0.01 * i, ell, k);
                    // lambda = -(gamma + ell)/2 - k decreases as b grows
                    EXPECT_LE(lam, prev == -1e300 ? lam : prev + 1e-15);
                    prev = lam;
                }
            }
}

TEST(Spectrum, EigenfunctionValues) {
    const auto m0 = make_mode(2, 1.0, 0, 0);
    const auto m1 = make_mode(3, 1.0, 1, 0);
    const double x2[2] = {0.3, -1.2};
    const double x3[3] = {0.7, 0.1, -0.4};
    EXPECT_NEAR(eigenfunction_value(m0, x2, 2), std::exp(-0.25 * (0.09 + 1.44)), 1e-15);
    EXPECT_NEAR(eigenfunction_value(m1, x3, 3), 0.7 * std::exp(-0.25 * (0.49 + 0.01 + 0.16)), 1e-15);
    const auto m = make_mode(2, 0.25, 1, 0);
    EXPECT_NEAR(m.gamma, -0.5, 1e-15);
    const double e1[2] = {1.0, 0.0};
    EXPECT_NEAR(eigenfunction_value(m, e1, 2), std::exp(-0.25), 1e-15);
    const double zero[2] = {0.0, 0.0};
    EXPECT_ERROR_KIND(eigenfunction_value(m, zero, 2), ErrorKind::EvalAtOrigin);
    EXPECT_EQ(eigenfunction_value(m0, zero, 2), 1.0);
}

TEST(Spectrum, ResidualSweep) {
    const auto r = radii(0.0, 10.0, 1000);
    for (int n : {2, 3})
        for (double b : {0.1, 0.25, 0.5, 1.0, 2.0})
            for (int ell = 0; ell <= 4; ++ell)
                for (int k = 0; k <= 4; ++k) EXPECT_LE(residual_radial(make_mode(n, b, ell, k), r), 1e-8);
    EXPECT_LE(residual_radial(make_mode(2, 1.0, 0, 0), r), 1e-10);
    EXPECT_LE(residual_radial(make_mode(3, 0.5, 2, 3), r), 1e-8);
}

TEST(Spectrum, ResidualDetectsWrongEigenvalue) {
    const auto r = radii(0.0, 10.0, 1000);
    EXPECT_GE(residual_radial(make_mode(3, 0.25, 1, 0), r, 0.1), 0.01);
    EXPECT_GE(residual_radial(make_mode(2, 0.25, 1, 0), r, 0.1), 0.01);
}

TEST(Spectrum, ResidualAgainstFiniteDifferences) {
    // central differences of the profile, independent of the analytic derivatives
    const auto m = make_mode(3, 0.4, 2, 2);
    const int n = 3, ell = 2;
    const double b = 0.4, h = 1e-4;
    for (double r : {0.5, 1.3, 2.7, 4.0}) {
        const double f = radial_profile(m, r), fp = radial_profile(m, r + h), fm = radial_profile(m, r - h);
        const double f1 = (fp - fm) / (2 * h), f2 = (fp - 2 * f + fm) / (h * h);
        const double L = f2 + (n - 1.0 + 2.0 * ell) / r * f1 + (1.0 - b) * ell * (n - 2.0 + ell) / (r * r) * f +
                         0.5 * r * f1 + 0.5 * (n + ell) * f;
        EXPECT_NEAR(L, m.lambda * f, 1e-6 * (1.0 + std::abs(m.lambda * f)));
    }
}

TEST(Spectrum, OracleAgreement) {
    const RadialOracleGrid g{16.0, 2000};
    const auto e = numerical_radial_eigs(2, 1.0, 0, g, 3);
    EXPECT_NEAR(e[0], 0.0, 1e-3);
    EXPECT_NEAR(e[1], -1.0, 1e-3);
    EXPECT_NEAR(e[2], -2.0, 1e-3);
    EXPECT_NEAR(numerical_radial_eigs(3, 0.25, 1, g, 1)[0], eigenvalue(3, 0.25, 1, 0), 1e-3);
    const auto f = numerical_radial_eigs(2, 5.0, 3, g, 2);
    EXPECT_NEAR(f[0], eigenvalue(2, 5.0, 3, 0), 1e-3);
    EXPECT_NEAR(f[1], eigenvalue(2, 5.0, 3, 1), 1e-3);
}

TEST(Spectrum, OracleMatrixIsSymmetricTridiagonal) {
    // the oracle is stored as a symmetric tridiagonal pair; check the dense form
    const auto t = radial_oracle_matrix(3, 0.3, 2, {16.0, 200});
    const int N = static_cast<int>(t.diag.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) M(i, i) = t.diag[i];
    for (int i = 0; i + 1 < N; ++i) M(i, i + 1) = M(i + 1, i) = t.off[i];
    EXPECT_EQ(M, M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    const auto sturm = radial_oracle_eigs(3, 0.3, 2, {16.0, 200}, 2);
    EXPECT_NEAR(sturm[0], es.eigenvalues()[N - 1], 1e-10);
    EXPECT_NEAR(sturm[1], es.eigenvalues()[N - 2], 1e-10);
}

TEST(Spectrum, OracleTooCoarse) {
    EXPECT_ERROR_KIND(numerical_radial_eigs(3, 0.05, 4, {16.0, 8}, 1, 1e-6), ErrorKind::GridTooCoarse);
}

TEST(Spectrum, SpectralGap) {
    EXPECT_NEAR(spectral_gap(2, 1.0, 4, 4), 0.5, 1e-15);
    EXPECT_LT(spectral_gap(2, 0.01), spectral_gap(2, 0.1));
    EXPECT_LT(spectral_gap(2, 0.1), spectral_gap(2, 1.0));
    EXPECT_NEAR(spectral_gap(3, 0.25), 0.1830127, 1e-6);
}

TEST(Spectrum, BetaUpper) {
    EXPECT_NEAR(beta_upper(2, 0.25), 0.5, 1e-15);
    EXPECT_EQ(beta_upper(2, 1.0), 1.0);
    EXPECT_EQ(beta_upper(3, 1.0), 1.0);
    EXPECT_NEAR(beta_upper(3, 0.05), 0.5 * (-1.0 + std::sqrt(1.4)), 1e-15);
    EXPECT_NEAR(beta_upper(3, 0.05), 0.0916, 1e-4);
    for (int n : {2, 3}) {
        EXPECT_GT(beta_upper(n, 1e-1), beta_upper(n, 1e-2));
        EXPECT_GT(beta_upper(n, 1e-2), beta_upper(n, 1e-3));
        EXPECT_GT(beta_upper(n, 1e-3), 0.0);
    }
}

TEST(Spectrum, Figure2Table) {
    const auto t = figure2_table(2, {1.0, 0.01}, 4, 4);
    ASSERT_EQ(t.size(), 50u);
    EXPECT_EQ(t.front().index.b, 0.01);
    for (std::size_t i = 1; i < t.size(); ++i) {
        const auto& p = t[i - 1].index;
        const auto& q = t[i].index;
        EXPECT_TRUE(std::tie(p.b, p.ell, p.k) < std::tie(q.b, q.ell, q.k));
    }
    for (const auto& m : t) {
        if (m.index.b == 1.0) EXPECT_EQ(m.lambda, -0.5 * m.index.ell - m.index.k);
        if (m.index.b == 0.01 && m.index.ell == 1 && m.index.k == 0) EXPECT_NEAR(m.lambda, -0.05, 1e-15);
    }
    for (const auto& m : figure2_table(3, {1.0})) EXPECT_EQ(m.lambda, -0.5 * m.index.ell - m.index.k);
}
