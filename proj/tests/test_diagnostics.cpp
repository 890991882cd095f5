#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "expect_kind.hpp"
#include "selfsim/diagnostics.hpp"

using namespace selfsim;

namespace {

constexpr double pi = std::numbers::pi;

Field<RadialGrid> unit_phi(const RadialGrid& g) {
    auto phi = sample(g, [&](double r) { return gaussian_profile(g.n, r); });
    phi *= 1.0 / integral(phi);
    return phi;
}

std::vector<std::pair<double, double>> synthetic(double amp, double mu, double t0, double t1, double dt) {
    std::vector<std::pair<double, double>> s;
    const int k = static_cast<int>(std::lround((t1 - t0) / dt));
    for (int i = 0; i <= k; ++i) {
        const double t = i == k ? t1 : t0 + i * dt;
        s.emplace_back(t, amp * std::exp(-mu * t));
    }
    return s;
}

}  // namespace

TEST(Decompose, MultipleOfPhi) {
    const RadialGrid g{3, 10.0, 400};
    const auto phi = unit_phi(g);
    auto v = phi;
    v *= 3.0;
    const auto d = decompose(v, phi);
    EXPECT_NEAR(d.alpha, 3.0, 1e-14);
    EXPECT_LE(max_abs(d.w), 1e-15 * max_abs(v));
}

TEST(Decompose, Reconstruction) {
    const RadialGrid g{3, 10.0, 400};
    const auto phi = unit_phi(g);
    const auto v = sample(g, [](double r) { return std::exp(-r) * (1.0 + std::sin(3.0 * r)); });
    const auto d = decompose(v, phi);
    EXPECT_NEAR(d.alpha, integral(v), 1e-15);
    EXPECT_LE(std::abs(integral(d.w)), 1e-14 * l1_norm(v));
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(d.alpha * phi[i] + d.w[i], v[i], 1e-15);
}

TEST(Decompose, Errors) {
    const RadialGrid g{3, 10.0, 400};
    auto phi = unit_phi(g);
    phi *= 2.0;
    EXPECT_ERROR_KIND(decompose(phi, phi), ErrorKind::PhiNotNormalized);
    const auto other = unit_phi(RadialGrid{3, 10.0, 200});
    EXPECT_ERROR_KIND(decompose(other, unit_phi(g)), ErrorKind::InvalidArgument);
}

TEST(Energy, GaussianMomentOracle) {
    // 1/2 int (1+r^2) e^{-r^2} dx = pi in 2D and 5 pi^{3/2} / 4 in 3D
    const CartesianGrid2D g{8.0, 256};
    const auto w = sample(g, [](const Vec<2>& x) { return std::exp(-0.5 * x.squaredNorm()); });
    EXPECT_NEAR(energy_e(w, 1.0), pi, 1e-10);
    const RadialGrid rg{3, 8.0, 2000};
    const auto rw = sample(rg, [](double r) { return std::exp(-0.5 * r * r); });
    EXPECT_NEAR(energy_e(rw, 1.0), 1.25 * std::pow(pi, 1.5), 1e-4);
    // E shifts the exponent by two: m = 3 in E equals m = 1 in e
    EXPECT_DOUBLE_EQ(energy_E(w, 3.0), energy_e(w, 1.0));
}

TEST(Energy, DeltaWeightRatio) {
    // a field on one shell of radius r0: e(delta) / e(1) = ((delta + r0^2) / (1 + r0^2))^m
    const RadialGrid g{3, 10.0, 100};
    Field<RadialGrid> w(g);
    w[30] = 1.0;
    const double r0 = g.radius(30);
    for (double delta : {1.0, 4.0, 25.0}) {
        const double ratio = energy_e(w, 2.0, delta) / energy_e(w, 2.0, 1.0);
        EXPECT_NEAR(ratio, std::pow((delta + r0 * r0) / (1.0 + r0 * r0), 2.0), 1e-13 * ratio);
    }
    EXPECT_ERROR_KIND(energy_e(w, 2.0, 0.5), ErrorKind::InvalidArgument);
    EXPECT_ERROR_KIND(energy_E(w, 2.0, 0.0), ErrorKind::InvalidArgument);
}

TEST(Energy, CombinedEnergy) {
    const RadialGrid g{3, 8.0, 200};
    const auto w = sample(g, [](double r) { return (1.0 - r * r / 3.0) * std::exp(-0.5 * r * r); });
    const auto W = sample(g, [](double r) { return std::exp(-0.5 * r * r); });
    EXPECT_EQ(combined_energy(w, W, 2.0, 1.0, 0.0), energy_e(w, 2.0));
    double prev = -1.0;
    for (double kappa : {0.0, 0.5, 1.0, 4.0}) {
        const double c = combined_energy(w, W, 2.0, 1.0, kappa);
        EXPECT_GT(c, prev);
        EXPECT_NEAR(c, energy_e(w, 2.0) + kappa * energy_E(W, 2.0), 1e-15 * c);
        prev = c;
    }
    EXPECT_ERROR_KIND(combined_energy(w, W, 2.0, 1.0, -1.0), ErrorKind::InvalidArgument);
}

TEST(Dissipation, ConstantHasNone) {
    const CartesianGrid2D g{4.0, 32};
    EXPECT_EQ(dissipation(Field<CartesianGrid2D>(g, 2.5), 2.0), 0.0);
    EXPECT_EQ(dissipation(Field<RadialGrid>(RadialGrid{3, 4.0, 32}, -1.0), 2.0), 0.0);
}

TEST(Dissipation, GaussianClosedForm) {
    // |grad e^{-r^2/2}|^2 = r^2 e^{-r^2}; 1/4 int (1+r^2) r^2 e^{-r^2} = 3 pi / 4 in 2D
    double prev = 0.0;
    for (int N : {128, 256}) {
        const CartesianGrid2D g{8.0, N};
        const auto w = sample(g, [](const Vec<2>& x) { return std::exp(-0.5 * x.squaredNorm()); });
        const double d = dissipation(w, 1.0);
        EXPECT_NEAR(d, 0.75 * pi, 2e-3 * 0.75 * pi);
        if (prev > 0.0) EXPECT_LT(std::abs(d / prev - 1.0), 1e-2);
        prev = d;
    }
    // 3D radial, m = 0: 1/4 int r^2 e^{-r^2} dx = 3 pi^{3/2} / 8
    const RadialGrid rg{3, 8.0, 1600};
    const auto rw = sample(rg, [](double r) { return std::exp(-0.5 * r * r); });
    EXPECT_NEAR(dissipation(rw, 0.0), 0.375 * std::pow(pi, 1.5), 1e-4);
}

TEST(DecayRate, SyntheticExponential) {
    const auto s = synthetic(3.0, 0.5, 0.0, 10.0, 0.1);
    const auto est = decay_rate(s, 1.0, 10.0);
    EXPECT_NEAR(est.mu_hat, 0.5, 1e-12);
    EXPECT_NEAR(est.fit_quality, 1.0, 1e-12);
    EXPECT_NEAR(decay_rate(s).mu_hat, 0.5, 1e-12);
    EXPECT_EQ(decay_rate(s).tau_a, 2.5);
}

TEST(DecayRate, Errors) {
    const auto s = synthetic(1.0, 0.2, 0.0, 10.0, 0.1);
    EXPECT_ERROR_KIND(decay_rate(s, 5.0, 5.5), ErrorKind::WindowTooShort);
    EXPECT_ERROR_KIND(decay_rate(s, 5.0, 5.0), ErrorKind::WindowTooShort);
    auto z = s;
    z[50].second = 0.0;
    EXPECT_ERROR_KIND(decay_rate(z, 1.0, 9.0), ErrorKind::NonPositiveValues);
    EXPECT_NO_THROW(decay_rate(z, 6.0, 9.0));
    EXPECT_ERROR_KIND(decay_rate({}), ErrorKind::WindowTooShort);
}

TEST(PredictedRate, Examples) {
    EXPECT_EQ(predicted_rate(RateKind::Linear, 3.0, 2, 1.0, 1.0), 0.5);
    EXPECT_NEAR(predicted_rate(RateKind::Linear, 3.0, 3, 0.3, 1.0), 0.15, 1e-15);
    EXPECT_EQ(predicted_rate(RateKind::Nonlinear, 3.0, 2, 1.0, 1.0, 3.0), 0.5);
    EXPECT_NEAR(predicted_rate(RateKind::Nonlinear, 3.0, 2, 1.0, 1.0, 2.2), 0.2, 1e-15);
    EXPECT_NEAR(predicted_rate(RateKind::Linear, 1.5, 2, 1.0, 1.0), 0.25, 1e-15);
    EXPECT_ERROR_KIND(predicted_rate(RateKind::Linear, 1.0, 2, 1.0, 1.0), ErrorKind::ParameterOutOfRange);
    EXPECT_ERROR_KIND(predicted_rate(RateKind::Nonlinear, 3.0, 2, 1.0, 1.0, 1.5), ErrorKind::ParameterOutOfRange);
}

TEST(EnergyTrace, CsvAndAntiderivative) {
    Scenario<RadialGrid> sc;
    sc.matrix = MatrixSpec::meyers_serrin(3, 0.5);
    sc.grid = RadialGrid{3, 10.0, 200};
    sc.initial.kind = InitialDataSpec::PhiPlusMode{0.1};
    sc.tau_max = 1.0;
    sc.snapshot_stride = 32;
    const auto tr = evolve_scenario(sc);
    const auto phi = compute_phi(sc.matrix, sc.grid, 30.0, 1e-4).phi;
    const EllipticSolve<RadialGrid> prob{sc.matrix, sc.grid, 1e-10};
    const auto et = antiderivative_trace(tr, prob, phi, 2.0, 1.0, 1.0);
    ASSERT_EQ(et.rows.size(), tr.snapshots.size());
    EXPECT_LE(et.max_W_residual(), 1e-10);
    for (const auto& r : et.rows) {
        EXPECT_NEAR(r.combined, r.e + r.E, 1e-15 * r.combined);
        EXPECT_GT(r.e, 0.0);
    }
    EXPECT_GE(et.equivalence_constant(), 1.0);
    const auto csv = energy_trace_csv(et);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "tau,e,E,combined,dissipation,w_norm,alpha");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), et.rows.size() + 1);
    EXPECT_ERROR_KIND(antiderivative_trace(tr, prob, phi, 1.5), ErrorKind::ParameterOutOfRange);
}
