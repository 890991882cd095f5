#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <tuple>
#include <vector>

#include "selfsim/error.hpp"

namespace selfsim {

struct ModeIndex {
    int n = 2;
    double b = 1.0;
    int ell = 0;
    int k = 0;
};

struct ModeEntry {
    ModeIndex index;
    double lag_alpha = 0.0;
    double gamma = 0.0;
    double lambda = 0.0;
};

// Generalized Laguerre polynomial by forward recurrence.
inline double laguerre(int k, double a, double y) {
    if (k < 0) return 0.0;
    double l0 = 1.0;
    if (k == 0) return l0;
    double l1 = 1.0 + a - y;
    for (int j = 1; j < k; ++j) {
        const double l2 = ((2.0 * j + 1.0 + a - y) * l1 - (j + a) * l0) / (j + 1.0);
        l0 = l1;
        l1 = l2;
    }
    return l1;
}

inline void check_mode_args(int n, double b, int ell) {
    if (n != 2 && n != 3) throw Error(ErrorKind::InvalidArgument, "n must be 2 or 3");
    if (!(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "b must be positive");
    if (ell < 0) throw Error(ErrorKind::InvalidArgument, "ell must be >= 0");
}

// (lag_alpha, gamma)
inline std::pair<double, double> mode_exponents(int n, double b, int ell) {
    check_mode_args(n, b, ell);
    const double nn = n - 2.0;
    const double a = 0.5 * std::sqrt(nn * nn + 4.0 * b * ell * (nn + ell));
    const double g = (-0.5 * n + 1.0 - ell) + a;
    return {a, g};
}

inline double eigenvalue(int n, double b, int ell, int k) {
    if (k < 0) throw Error(ErrorKind::InvalidArgument, "k must be >= 0");
    const auto [a, g] = mode_exponents(n, b, ell);
    (void)a;
    return -(g + ell) / 2.0 - k;
}

inline ModeEntry make_mode(int n, double b, int ell, int k) {
    const auto [a, g] = mode_exponents(n, b, ell);
    return {{n, b, ell, k}, a, g, eigenvalue(n, b, ell, k)};
}

// Harmonic factor: 1, x1, x1*x2, then Re (x1 + i x2)^ell.
inline double harmonic_factor(int ell, const double* x) {
    switch (ell) {
    case 0: return 1.0;
    case 1: return x[0];
    case 2: return x[0] * x[1];
    default: return std::pow(std::complex<double>(x[0], x[1]), ell).real();
    }
}

// r^gamma e^{-r^2/4} L_k^{(alpha)}(r^2/4)
inline double radial_profile(const ModeEntry& m, double r) {
    return std::pow(r, m.gamma) * std::exp(-0.25 * r * r) * laguerre(m.index.k, m.lag_alpha, 0.25 * r * r);
}

inline double eigenfunction_value(const ModeEntry& m, const double* x, int dim) {
    double r2 = 0.0;
    for (int i = 0; i < dim; ++i) r2 += x[i] * x[i];
    if (r2 == 0.0) {
        if (m.gamma < 0.0) throw Error(ErrorKind::EvalAtOrigin, "eigenfunction with gamma < 0 at x = 0");
        if (m.index.ell > 0 || m.gamma > 0.0) return 0.0;
    }
    return harmonic_factor(m.index.ell, x) * radial_profile(m, std::sqrt(r2));
}

inline double eigenfunction_value(const ModeEntry& m, const Eigen::VectorXd& x) {
    return eigenfunction_value(m, x.data(), static_cast<int>(x.size()));
}

// (phi, phi', phi'') of the radial profile.
inline std::tuple<double, double, double> radial_profile_derivs(const ModeEntry& m, double r) {
    const double g = m.gamma, a = m.lag_alpha;
    const int k = m.index.k;
    const double y = 0.25 * r * r;
    const double P = std::pow(r, g), P1 = g * std::pow(r, g - 1.0), P2 = g * (g - 1.0) * std::pow(r, g - 2.0);
    const double E = std::exp(-y), E1 = -0.5 * r * E, E2 = (0.25 * r * r - 0.5) * E;
    const double L = laguerre(k, a, y), Ly = -laguerre(k - 1, a + 1.0, y), Lyy = laguerre(k - 2, a + 2.0, y);
    const double Q = L, Q1 = 0.5 * r * Ly, Q2 = 0.5 * Ly + 0.25 * r * r * Lyy;
    const double f = P * E * Q;
    const double f1 = P1 * E * Q + P * E1 * Q + P * E * Q1;
    const double f2 = P2 * E * Q + P * E2 * Q + P * E * Q2 + 2.0 * (P1 * E1 * Q + P1 * E * Q1 + P * E1 * Q1);
    return {f, f1, f2};
}

inline double apply_radial_operator(const ModeEntry& m, double r, double lambda_shift = 0.0) {
    const int n = m.index.n, ell = m.index.ell;
    const double b = m.index.b;
    const auto [f, f1, f2] = radial_profile_derivs(m, r);
    const double Lf = f2 + (n - 1.0 + 2.0 * ell) / r * f1 + (1.0 - b) * ell * (n - 2.0 + ell) / (r * r) * f +
                      0.5 * r * f1 + 0.5 * (n + ell) * f;
    return Lf - (m.lambda + lambda_shift) * f;
}

// max |L phi - lambda phi| / max |phi| over the radii.
inline double residual_radial(const ModeEntry& m, const std::vector<double>& radii, double lambda_shift = 0.0) {
    double res = 0.0, scale = 0.0;
    for (double r : radii) {
        if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "radii must be positive");
        res = std::max(res, std::abs(apply_radial_operator(m, r, lambda_shift)));
        scale = std::max(scale, std::abs(radial_profile(m, r)));
    }
    return scale > 0.0 ? res / scale : res;
}

struct RadialOracleGrid {
    double R = 16.0;
    int N = 4000;
};

// Symmetric tridiagonal form of the conjugated radial operator with measure r^{n-1+2 ell} dr.
// The unknown is written as r^s chi with s the regular Frobenius root at r = 0, which
// turns the weight into r^{n-1+2 ell+2s} and leaves only a bounded potential.
struct Tridiagonal {
    Eigen::VectorXd diag;
    Eigen::VectorXd off;
};

// Larger root of s^2 + (k-1)s + c = 0, k = n-1+2 ell, c = (1-b) ell (n-2+ell).
inline double frobenius_exponent(int n, double b, int ell) {
    const double k = n - 1.0 + 2.0 * ell, c = (1.0 - b) * ell * (n - 2.0 + ell);
    return 0.5 * (-(k - 1.0) + std::sqrt((k - 1.0) * (k - 1.0) - 4.0 * c));
}

inline Tridiagonal radial_oracle_matrix(int n, double b, int ell, const RadialOracleGrid& g) {
    check_mode_args(n, b, ell);
    if (g.N < 4 || !(g.R > 0.0)) throw Error(ErrorKind::InvalidArgument, "bad oracle grid");
    const int N = g.N;
    const double h = g.R / N;
    const double k = n - 1.0 + 2.0 * ell, c = (1.0 - b) * ell * (n - 2.0 + ell);
    const double s = frobenius_exponent(n, b, ell);
    const double kw = k + 2.0 * s;
    const double c_left = c + s * (s - 1.0) + k * s;  // rounding-level by choice of s
    auto cell = [](double rm, double rp, double e) {  // int_rm^rp r^e dr
        return (std::pow(rp, e + 1.0) - (rm > 0.0 ? std::pow(rm, e + 1.0) : 0.0)) / (e + 1.0);
    };
    Eigen::VectorXd W(N), stiff(N), pot(N), face(N);
    for (int i = 0; i < N; ++i) {
        const double rm = i * h, rp = (i + 1) * h;
        W[i] = cell(rm, rp, kw);
        face[i] = std::pow(rp, kw);
        double p = 0.25 * n * W[i] - cell(rm, rp, kw + 2.0) / 16.0;
        if (c_left != 0.0 && kw - 2.0 > -1.0) p += c_left * cell(rm, rp, kw - 2.0);
        pot[i] = p;
    }
    for (int i = 0; i < N; ++i) {
        double st = 0.0;
        if (i > 0) st += face[i - 1] / h;
        st += (i + 1 < N) ? face[i] / h : 2.0 * face[i] / h;  // Dirichlet at R
        stiff[i] = st;
    }
    Tridiagonal t;
    t.diag.resize(N);
    t.off.resize(N - 1);
    for (int i = 0; i < N; ++i) t.diag[i] = (pot[i] - stiff[i]) / W[i];
    for (int i = 0; i + 1 < N; ++i) t.off[i] = face[i] / (h * std::sqrt(W[i] * W[i + 1]));
    return t;
}

// Number of eigenvalues of the symmetric tridiagonal matrix strictly below x (Sturm count).
inline int sturm_count_below(const Tridiagonal& t, double x) {
    int cnt = 0;
    double d = 1.0;
    const auto n = t.diag.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e2 = i > 0 ? t.off[i - 1] * t.off[i - 1] : 0.0;
        d = (t.diag[i] - x) - (i > 0 ? e2 / d : 0.0);
        if (d == 0.0) d = -1e-300;
        if (d < 0.0) ++cnt;
    }
    return cnt;
}

inline std::vector<double> radial_oracle_eigs(int n, double b, int ell, const RadialOracleGrid& g, int count) {
    const auto t = radial_oracle_matrix(n, b, ell, g);
    const auto N = static_cast<int>(t.diag.size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < N; ++i) {
        const double r = (i > 0 ? std::abs(t.off[i - 1]) : 0.0) + (i + 1 < N ? std::abs(t.off[i]) : 0.0);
        lo = std::min(lo, t.diag[i] - r);
        hi = std::max(hi, t.diag[i] + r);
    }
    std::vector<double> out;
    for (int j = 0; j < count && j < N; ++j) {
        // (j+1)-th largest eigenvalue: smallest x with count_below(x) >= N - j
        double a = lo, c = hi;
        for (int it = 0; it < 200 && c - a > 1e-13 * std::max(1.0, std::abs(c)); ++it) {
            const double mid = 0.5 * (a + c);
            if (sturm_count_below(t, mid) >= N - j) c = mid;
            else a = mid;
        }
        out.push_back(0.5 * (a + c));
    }
    return out;
}

// Largest `count` eigenvalues on the grid, cross-checked against the half-resolution grid.
inline std::vector<double> numerical_radial_eigs(int n, double b, int ell, const RadialOracleGrid& g = {}, int count = 1,
                                                 double tol = 1e-3) {
    if (count < 1) throw Error(ErrorKind::InvalidArgument, "count must be >= 1");
    const auto fine = radial_oracle_eigs(n, b, ell, g, count);
    const auto coarse = radial_oracle_eigs(n, b, ell, {g.R, g.N / 2}, count);
    for (int i = 0; i < count; ++i)
        if (std::abs(fine[i] - coarse[i]) > tol)
            throw Error(ErrorKind::GridTooCoarse, "eigenvalue " + std::to_string(i) + " moved by " +
                                                      std::to_string(std::abs(fine[i] - coarse[i])) +
                                                      " between N/2 and N");
    return fine;
}

inline double spectral_gap(int n, double b, int ell_max = 4, int k_max = 4) {
    if (ell_max < 1 || k_max < 1) throw Error(ErrorKind::InvalidArgument, "ell_max, k_max must be >= 1");
    double gap = std::numeric_limits<double>::infinity();
    for (int l = 0; l <= ell_max; ++l)
        for (int k = 0; k <= k_max; ++k)
            if (l != 0 || k != 0) gap = std::min(gap, -eigenvalue(n, b, l, k));
    return gap;
}

inline double beta_upper(int n, double b) {
    if (!(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "b must be positive");
    const double v = -0.5 * n + 1.0 + 0.5 * std::sqrt((n - 2.0) * (n - 2.0) + 4.0 * b * (n - 1.0));
    return std::min(v, 1.0);
}

inline std::vector<ModeEntry> figure2_table(int n, std::vector<double> b_values, int ell_max = 4, int k_max = 4) {
    std::sort(b_values.begin(), b_values.end());
    std::vector<ModeEntry> out;
    for (double b : b_values)
        for (int l = 0; l <= ell_max; ++l)
            for (int k = 0; k <= k_max; ++k) out.push_back(make_mode(n, b, l, k));
    return out;
}

}  // namespace selfsim
