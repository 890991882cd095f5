#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "selfsim/elliptic.hpp"
#include "selfsim/evolve.hpp"

namespace selfsim {

template <class G>
struct Decomposition {
    double alpha = 0.0;
    Field<G> w;
};

// v = alpha phi + w with alpha = int v.
template <class G>
Decomposition<G> decompose(const Field<G>& v, const Field<G>& phi) {
    if (!(v.grid == phi.grid)) throw Error(ErrorKind::InvalidArgument, "v and phi live on different grids");
    const double mphi = integral(phi);
    if (std::abs(mphi - 1.0) > 1e-6)
        throw Error(ErrorKind::PhiNotNormalized, "integral of phi is " + detail::format_double(mphi));
    Decomposition<G> d;
    d.alpha = integral(v);
    d.w = v;
    for (std::size_t i = 0; i < v.size(); ++i) d.w[i] -= d.alpha * phi[i];
    return d;
}

namespace detail {

inline void check_delta(double delta) {
    if (!(delta >= 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must be >= 1");
}

template <class G>
double half_weighted_square(const Field<G>& w, double expo, double delta) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double r = w.grid.radius(i);
        s += std::pow(delta + r * r, expo) * w[i] * w[i] * w.grid.volume(i);
    }
    return 0.5 * s;
}

}  // namespace detail

// e = 1/2 int (delta+|y|^2)^m w^2
template <class G>
double energy_e(const Field<G>& w, double m, double delta = 1.0) {
    detail::check_delta(delta);
    return detail::half_weighted_square(w, m, delta);
}

// E = 1/2 int (delta+|y|^2)^{m-2} W^2
template <class G>
double energy_E(const Field<G>& W, double m, double delta = 1.0) {
    detail::check_delta(delta);
    return detail::half_weighted_square(W, m - 2.0, delta);
}

template <class G>
double combined_energy(const Field<G>& w, const Field<G>& W, double m, double delta, double kappa) {
    if (kappa < 0.0) throw Error(ErrorKind::InvalidArgument, "kappa must be nonnegative");
    return energy_e(w, m, delta) + kappa * energy_E(W, m, delta);
}

// 1/4 int (delta+|y|^2)^m |grad w|^2 from interior face differences.
template <int D>
double dissipation(const Field<CartesianGrid<D>>& w, double m, double delta = 1.0) {
    detail::check_delta(delta);
    const auto& g = w.grid;
    const double h = g.h(), vol = g.volume(0);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto mi = g.multi(i);
        const auto c = g.center(i);
        for (int d = 0; d < D; ++d) {
            if (mi[d] + 1 >= g.N) continue;
            const double diff = (w[i + g.stride(d)] - w[i]) / h;
            Vec<D> f = c;
            f[d] += 0.5 * h;
            s += std::pow(delta + f.squaredNorm(), m) * diff * diff * vol;
        }
    }
    return 0.25 * s;
}

inline double dissipation(const Field<RadialGrid>& w, double m, double delta = 1.0) {
    detail::check_delta(delta);
    const auto& g = w.grid;
    const double h = g.h();
    double s = 0.0;
    for (int f = 1; f < g.N; ++f) {
        const double r = g.face_radius(f);
        const double diff = (w[f] - w[f - 1]) / h;
        s += std::pow(delta + r * r, m) * diff * diff * g.face_area(f) * h;
    }
    return 0.25 * s;
}

struct EnergyRow {
    double tau = 0, e = 0, E = 0, combined = 0, dissipation = 0, w_norm = 0, alpha = 0;
    double W_residual = 0;  // ||H W - w|| / ||w||
};

struct EnergyTrace {
    double m = 2, delta = 1, kappa = 1;
    std::vector<EnergyRow> rows;

    // max over rows of combined / e (rows with e = 0 skipped)
    double equivalence_constant() const {
        double c = 0.0;
        for (const auto& r : rows)
            if (r.e > 0.0) c = std::max(c, r.combined / r.e);
        return c;
    }
    double max_W_residual() const {
        double c = 0.0;
        for (const auto& r : rows) c = std::max(c, r.W_residual);
        return c;
    }
    std::vector<std::pair<double, double>> series(double EnergyRow::*field) const {
        std::vector<std::pair<double, double>> s;
        for (const auto& r : rows) s.emplace_back(r.tau, r.*field);
        return s;
    }
};

inline std::string energy_trace_csv(const EnergyTrace& tr) {
    std::string out = "tau,e,E,combined,dissipation,w_norm,alpha\n";
    using detail::format_double;
    for (const auto& r : tr.rows)
        out += format_double(r.tau) + "," + format_double(r.e) + "," + format_double(r.E) + "," +
               format_double(r.combined) + "," + format_double(r.dissipation) + "," + format_double(r.w_norm) + "," +
               format_double(r.alpha) + "\n";
    return out;
}

template <class G>
EnergyTrace antiderivative_trace(const Trajectory<G>& traj, const EllipticSolve<G>& prob, const Field<G>& phi,
                                 double m, double delta = 1.0, double kappa = 1.0) {
    const int n = prob.grid.dim();
    if (!(m > 0.5 * n)) throw Error(ErrorKind::ParameterOutOfRange, "antiderivative trace needs m > n/2");
    if (!prob.coefficient.is_homogeneous())
        throw Error(ErrorKind::InvalidArgument, "antiderivative solve needs the homogeneous limit");
    EllipticSolver<G> solver(prob);
    EnergyTrace tr;
    tr.m = m;
    tr.delta = delta;
    tr.kappa = kappa;
    for (const auto& [tau, v] : traj.snapshots) {
        const auto dec = decompose(v, phi);
        EnergyRow row;
        row.tau = tau;
        row.alpha = dec.alpha;
        row.e = energy_e(dec.w, m, delta);
        row.dissipation = dissipation(dec.w, m, delta);
        row.w_norm = weighted_norm(dec.w, WeightSpec{m, 1.0, 2.0});
        if (l2_norm(dec.w) > 0.0) {
            const auto W = solver.solve(dec.w);
            row.E = energy_E(W, m, delta);
            row.W_residual = solver.residual(W, dec.w);
        }
        row.combined = row.e + kappa * row.E;
        tr.rows.push_back(row);
    }
    return tr;
}

struct RateEstimate {
    double mu_hat = 0.0;
    double tau_a = 0.0, tau_b = 0.0;
    double fit_quality = 0.0;
    double prediction = std::numeric_limits<double>::quiet_NaN();
    int samples = 0;
};

// Least-squares fit of log(value) against tau over [tau_a, tau_b]; mu_hat = -slope.
inline RateEstimate decay_rate(const std::vector<std::pair<double, double>>& series, double tau_a, double tau_b) {
    if (!(tau_a < tau_b)) throw Error(ErrorKind::WindowTooShort, "empty fit window");
    std::vector<double> x, y;
    for (const auto& [t, v] : series) {
        if (t < tau_a || t > tau_b) continue;
        if (!(v > 0.0)) throw Error(ErrorKind::NonPositiveValues, "nonpositive value at tau = " + detail::format_double(t));
        x.push_back(t);
        y.push_back(std::log(v));
    }
    if (x.size() < 10) throw Error(ErrorKind::WindowTooShort, "fit window holds " + std::to_string(x.size()) + " samples");
    const double k = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error(ErrorKind::WindowTooShort, "degenerate fit window");
    const double slope = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (my + slope * (x[i] - mx));
        ssr += e * e;
    }
    RateEstimate est;
    est.mu_hat = -slope;
    est.tau_a = tau_a;
    est.tau_b = tau_b;
    est.samples = static_cast<int>(x.size());
    est.fit_quality = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    return est;
}

// Default window [max(2, tau_max/4), tau_max].
inline RateEstimate decay_rate(const std::vector<std::pair<double, double>>& series) {
    if (series.empty()) throw Error(ErrorKind::WindowTooShort, "empty series");
    const double tmax = series.back().first;
    return decay_rate(series, std::max(2.0, 0.25 * tmax), tmax);
}

enum class RateKind { Linear, Nonlinear };

// Upper bound 1/2 min(m - n/2, nu, beta [, 2 eta]).
inline double predicted_rate(RateKind kind, double m, int n, double nu, double beta, double sigma = 0.0) {
    if (!(m > 0.5 * n)) throw Error(ErrorKind::ParameterOutOfRange, "predicted rate needs m > n/2");
    double v = std::min({m - 0.5 * n, nu, beta});
    if (kind == RateKind::Nonlinear) {
        if (!(sigma > 1.0 + 2.0 / n)) throw Error(ErrorKind::ParameterOutOfRange, "sigma must exceed 1 + 2/n");
        v = std::min(v, 2.0 * (0.5 * n * (sigma - 1.0) - 1.0));
    }
    return 0.5 * v;
}

}  // namespace selfsim
