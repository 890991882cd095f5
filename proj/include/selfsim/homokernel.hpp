#pragma once

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <boost/rational.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "selfsim/error.hpp"

namespace selfsim {

// k(x, y) = |x|^{-a} |x - y|^{-lambda} |y|^{-b}, homogeneous of degree -(a + b + lambda).
struct HomKernel {
    int n = 3;
    double a = 0.0, b = 0.0, lambda = 1.0;
    bool rotation_invariant = true;

    double degree() const { return a + b + lambda; }

    std::string singular_locus() const {
        std::string s;
        if (b > 0.0) s += "y = 0";
        if (lambda > 0.0) s += s.empty() ? "y = x" : ", y = x";
        if (a > 0.0) s += s.empty() ? "x = 0" : ", x = 0";
        return s.empty() ? "none" : s;
    }

    double operator()(const double* x, const double* y) const {
        double nx = 0, ny = 0, nd = 0;
        for (int i = 0; i < n; ++i) {
            nx += x[i] * x[i];
            ny += y[i] * y[i];
            nd += (x[i] - y[i]) * (x[i] - y[i]);
        }
        return std::pow(nx, -0.5 * a) * std::pow(nd, -0.5 * lambda) * std::pow(ny, -0.5 * b);
    }
    double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        if (x.size() != n || y.size() != n) throw Error(ErrorKind::InvalidArgument, "point dimension mismatch");
        return (*this)(x.data(), y.data());
    }
};

inline HomKernel power_kernel(int n, double a, double b, double lambda) {
    if (n != 2 && n != 3) throw Error(ErrorKind::Unsupported, "kernels are implemented for n = 2, 3");
    if (!(lambda >= 0.0 && lambda < n)) throw Error(ErrorKind::InadmissibleExponents, "need 0 <= lambda < n");
    const double d = a + b + lambda;
    if (!(d > 0.0 && d <= n)) throw Error(ErrorKind::InadmissibleExponents, "degree must lie in (0, n]");
    return HomKernel{n, a, b, lambda, true};
}

inline HomKernel stein_weiss(double a, double b, double lambda, int n) {
    if (!(lambda > 0.0 && lambda < n)) throw Error(ErrorKind::InadmissibleExponents, "need 0 < lambda < n");
    if (!(a + b > 0.0)) throw Error(ErrorKind::InadmissibleExponents, "need a + b > 0");
    if (!(a + b + lambda <= n)) throw Error(ErrorKind::InadmissibleExponents, "degree exceeds n");
    return power_kernel(n, a, b, lambda);
}

// |x|^{m-2} |x-y|^{2-n} |y|^{-m}, degree n.
inline HomKernel hardy_kernel(int n, double m) {
    if (n != 3) throw Error(ErrorKind::Unsupported, "the Hardy-type kernel needs n = 3");
    return power_kernel(n, 2.0 - m, m, n - 2.0);
}

struct ExponentPair {
    double p = 2.0, q = 2.0;
    double p_conj() const { return p == 1.0 ? std::numeric_limits<double>::infinity() : p / (p - 1.0); }
};

namespace detail {

inline void check_pair_ranges(const HomKernel& k, double p, double q) {
    const int n = k.n;
    const double d = k.degree();
    if (!(p >= 1.0)) throw Error(ErrorKind::InadmissibleExponents, "need p >= 1");
    if (!((n - d) * p <= n)) throw Error(ErrorKind::InadmissibleExponents, "need (n - d) p <= n");
    if (!(q >= p)) throw Error(ErrorKind::InadmissibleExponents, "need q >= p");
    const double iq = std::isinf(q) ? 0.0 : 1.0 / q;
    if (!(k.a < n * iq)) throw Error(ErrorKind::InadmissibleExponents, "need a < n/q");
    if (!(k.b < n * (1.0 - 1.0 / p))) throw Error(ErrorKind::InadmissibleExponents, "need b < n(1 - 1/p)");
}

}  // namespace detail

// q from 1 + 1/q = 1/p + d/n.
inline ExponentPair exponent_pair(const HomKernel& k, double p) {
    const double iq = 1.0 / p + k.degree() / k.n - 1.0;
    const double q = iq > 0.0 ? 1.0 / iq : std::numeric_limits<double>::infinity();
    detail::check_pair_ranges(k, p, q);
    return {p, q};
}

inline ExponentPair exponent_pair(const HomKernel& k, double p, double q) {
    const double iq = std::isinf(q) ? 0.0 : 1.0 / q;
    if (std::abs(1.0 + iq - 1.0 / p - k.degree() / k.n) > 1e-12)
        throw Error(ErrorKind::InadmissibleExponents, "p and q violate 1 + 1/q = 1/p + d/n");
    detail::check_pair_ranges(k, p, q);
    return {p, q};
}

// Exact form of the exponent relation: 1/q = 1/p + d/n - 1.
inline boost::rational<long long> exponent_q_inverse(boost::rational<long long> p, boost::rational<long long> d, int n) {
    return boost::rational<long long>(1) / p + d / boost::rational<long long>(n) - 1;
}

struct QuadParams {
    double tol = 1e-9;
    unsigned max_depth = 12;
    double chart = 0.5;  // radius of the local chart around the diagonal singularity
};

namespace detail {

// C-infinity cutoff: 1 on [0, r0/2], 0 on [r0, inf).
inline double smooth_cutoff(double t, double r0) {
    const double s = 2.0 * t / r0 - 1.0;  // 0 at r0/2, 1 at r0
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    const double f = std::exp(-1.0 / s), g = std::exp(-1.0 / (1.0 - s));
    return g / (f + g);
}

// Weighted surface measure of the (n-1)-sphere for an integrand axisymmetric about e1.
inline double axis_weight(int n, double psi) { return n == 2 ? 2.0 : 2.0 * std::numbers::pi * std::sin(psi); }

struct AxisIntegrand {
    int n;
    double A, B;  // |y|^{-A} |e1 - y|^{-B}
};

// int_{R^n} |y|^{-A} |e1 - y|^{-B} dy by a smooth partition of unity: polar chart at e1
// plus log-radial coordinates about the origin for the rest.
inline double axis_integral(const AxisIntegrand& f, const QuadParams& qp, double* err_out = nullptr) {
    using boost::math::quadrature::gauss_kronrod;
    using boost::math::quadrature::tanh_sinh;
    const int n = f.n;
    const double r0 = qp.chart;
    const double pi = std::numbers::pi;
    double err_total = 0.0;

    // local part: y = e1 + t (cos psi, sin psi, 0); integrand t^{n-1-B} times smooth
    auto local_inner = [&](double t) {
        if (t <= 0.0) t = 1e-300;
        auto g = [&](double psi) {
            double y[3] = {1.0 + t * std::cos(psi), t * std::sin(psi), 0.0};
            double ny = 0;
            for (int i = 0; i < n; ++i) ny += y[i] * y[i];
            return std::pow(ny, -0.5 * f.A) * axis_weight(n, psi);
        };
        double e = 0;
        const double v = gauss_kronrod<double, 31>::integrate(g, 0.0, pi, qp.max_depth, qp.tol, &e);
        return smooth_cutoff(t, r0) * v;
    };
    tanh_sinh<double> ts;
    double e_loc = 0;
    const double loc = ts.integrate(
        [&](double t) { return std::pow(t, n - 1.0 - f.B) * local_inner(t); }, 0.0, r0, qp.tol, &e_loc);
    err_total += e_loc;

    // global part in (s = log rho, theta)
    auto global_inner = [&](double s) {
        if (std::abs(s) > 700.0) return 0.0;
        const double rho = std::exp(s);
        auto g = [&](double th) {
            // log |y - e1| written to stay finite for extreme rho
            const double c = std::cos(th);
            const double ld = rho >= 1.0 ? s + 0.5 * std::log1p((1.0 / rho - 2.0 * c) / rho)
                                         : 0.5 * std::log1p(rho * (rho - 2.0 * c));
            const double cut = 1.0 - smooth_cutoff(std::exp(ld), r0);
            if (cut == 0.0) return 0.0;
            return cut * std::exp((n - f.A) * s - f.B * ld) * axis_weight(n, th);
        };
        double e = 0;
        // split at the angular extent of the chart so the cutoff transition is resolved
        const double split = rho > 0.0 ? std::min(pi, 2.0 * std::asin(std::min(1.0, 0.5 * r0 / std::max(rho, 1e-300)))) : pi;
        double v = gauss_kronrod<double, 31>::integrate(g, 0.0, split, qp.max_depth, qp.tol, &e);
        if (split < pi) v += gauss_kronrod<double, 31>::integrate(g, split, pi, qp.max_depth, qp.tol, &e);
        return v;
    };
    const double sl = std::log(1.0 - r0), sh = std::log(1.0 + r0);
    double glob = 0.0;
    for (auto [lo, hi] : {std::pair{-std::numeric_limits<double>::infinity(), sl}, std::pair{sl, sh},
                          std::pair{sh, std::numeric_limits<double>::infinity()}}) {
        double e = 0;
        glob += gauss_kronrod<double, 61>::integrate(global_inner, lo, hi, qp.max_depth, qp.tol, &e);
        err_total += e;
    }
    if (err_out) *err_out = err_total;
    return loc + glob;
}

inline void check_convergence(int n, double A, double B, const char* which) {
    const std::string w(which);
    if (!(B < n)) throw Error(ErrorKind::IntegralDiverges, w + ": non-integrable singularity on the diagonal");
    if (!(A < n)) throw Error(ErrorKind::IntegralDiverges, w + ": non-integrable singularity at the origin");
    if (!(A + B > n)) throw Error(ErrorKind::IntegralDiverges, w + ": tail does not decay fast enough");
}

inline double checked_axis_integral(int n, double A, double B, const QuadParams& qp) {
    double err = 0;
    const double v = axis_integral(AxisIntegrand{n, A, B}, qp, &err);
    if (!std::isfinite(v) || err > 1e3 * qp.tol * std::abs(v) + 1e-300)
        throw Error(ErrorKind::QuadratureNotConverged, "kernel integral error estimate " + std::to_string(err));
    return v;
}

}  // namespace detail

// int |k(e1, y)|^{n/d} |y|^{-n^2/(d q)} dy
inline double kappa1(const HomKernel& k, const ExponentPair& pr, const QuadParams& qp = {}) {
    const int n = k.n;
    const double d = k.degree(), r = n / d;
    const double iq = std::isinf(pr.q) ? 0.0 : 1.0 / pr.q;
    const double A = r * k.b + n * n / d * iq, B = r * k.lambda;
    detail::check_convergence(n, A, B, "kappa1");
    return detail::checked_axis_integral(n, A, B, qp);
}

// int |k(x, e1)|^{n/d} |x|^{-n^2/(d p')} dx
inline double kappa2(const HomKernel& k, const ExponentPair& pr, const QuadParams& qp = {}) {
    const int n = k.n;
    const double d = k.degree(), r = n / d;
    const double ipc = 1.0 - 1.0 / pr.p;
    const double A = r * k.a + n * n / d * ipc, B = r * k.lambda;
    detail::check_convergence(n, A, B, "kappa2");
    return detail::checked_axis_integral(n, A, B, qp);
}

// ---- empirical L^p -> L^q bound --------------------------------------------------------

namespace detail {

template <int N>
std::pair<std::vector<double>, std::vector<double>> gauss_rule() {
    using Q = boost::math::quadrature::gauss<double, N>;
    std::vector<double> x, w;
    const auto& ab = Q::abscissa();
    const auto& wt = Q::weights();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        x.push_back(ab[i]);
        w.push_back(wt[i]);
        if (ab[i] != 0.0) {
            x.push_back(-ab[i]);
            w.push_back(wt[i]);
        }
    }
    return {x, w};
}

// Riesz potential of exp(-|y|^2/(2 s^2)): s^{n-lambda} J(|x|/s), J tabulated on [0, umax]
// with the large-argument expansion beyond.
class GaussRiesz {
public:
    GaussRiesz(int n, double lambda) : n_(n), lam_(lambda) {
        const double a = 0.5 * lambda, b = 0.5 * n;
        pref_ = std::pow(std::numbers::pi, b) * std::pow(2.0, 0.5 * (n - lambda)) * std::tgamma(0.5 * (n - lambda)) /
                std::tgamma(b);
        std::vector<double> v(kCount);
        for (int i = 0; i < kCount; ++i) {
            const double u = i * kStep;
            v[i] = pref_ * boost::math::hypergeometric_1F1(a, b, -0.5 * u * u);
        }
        spline_ = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
            v.begin(), v.end(), 0.0, kStep, 0.0, asym_deriv(kUmax));
    }

    double J(double u) const { return u < kUmax ? (*spline_)(u) : asym(u); }

    double operator()(double r, double s) const { return std::pow(s, n_ - lam_) * J(r / s); }

private:
    static constexpr double kStep = 0.004, kUmax = 40.0;
    static constexpr int kCount = static_cast<int>(kUmax / kStep) + 1;

    // 1F1(a; b; -z) ~ Gamma(b)/Gamma(b-a) z^{-a} sum_k (a)_k (a-b+1)_k / k! (-1/z)^k
    double asym(double u) const {
        const double a = 0.5 * lam_, b = 0.5 * n_, z = 0.5 * u * u;
        double term = 1.0, sum = 1.0;
        for (int k = 0; k < 8; ++k) {
            term *= (a + k) * (a - b + 1 + k) / (k + 1) * (-1.0 / z);
            sum += term;
        }
        return pref_ * std::tgamma(b) / std::tgamma(b - a) * std::pow(z, -a) * sum;
    }
    double asym_deriv(double u) const {
        const double h = 1e-4;
        return (asym(u + h) - asym(u - h)) / (2 * h);
    }

    int n_;
    double lam_, pref_;
    std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

struct Bump {
    Eigen::Vector3d z;
    double s, c;
};

// Quadrature over R^n in log radius times direction; directions are dense where
// rho lies in [lo, hi] and coarse elsewhere.
struct SphereRule {
    std::vector<Eigen::Vector3d> dirs;
    std::vector<double> w;
};

inline SphereRule sphere_rule(int n, int nth, int nph) {
    SphereRule r;
    const double pi = std::numbers::pi;
    if (n == 2) {
        for (int j = 0; j < nph; ++j) {
            const double ph = 2.0 * pi * (j + 0.5) / nph;
            r.dirs.emplace_back(std::cos(ph), std::sin(ph), 0.0);
            r.w.push_back(2.0 * pi / nph);
        }
        return r;
    }
    const auto [gx, gw] = gauss_rule<8>();
    const int panels = std::max(1, nth / 8);
    for (int p = 0; p < panels; ++p) {
        const double c0 = -1.0 + 2.0 * p / panels, c1 = -1.0 + 2.0 * (p + 1) / panels;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double ct = 0.5 * (c0 + c1) + 0.5 * (c1 - c0) * gx[i];
            const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            for (int j = 0; j < nph; ++j) {
                const double ph = 2.0 * pi * (j + 0.5) / nph;
                r.dirs.emplace_back(ct, st * std::cos(ph), st * std::sin(ph));
                r.w.push_back(0.5 * (c1 - c0) * gw[i] * 2.0 * pi / nph);
            }
        }
    }
    return r;
}

template <class F>
double radial_integral(int n, F&& fun, double rho0, double rho1, double lo, double hi, int refine) {
    const auto [gx, gw] = gauss_rule<10>();
    const auto fine = sphere_rule(n, 32 * refine, 64 * refine);
    const auto coarse = sphere_rule(n, 16 * refine, 32 * refine);
    const double s0 = std::log(rho0), s1 = std::log(rho1);
    double total = 0.0;
    double s = s0;
    while (s < s1) {
        const double rho = std::exp(s);
        const bool dense = rho >= lo && rho <= hi;
        const double width = (dense ? 0.3 : 0.8) / refine;
        const double e = std::min(s1, s + width);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double si = 0.5 * (s + e) + 0.5 * (e - s) * gx[i];
            const double r = std::exp(si);
            const double jac = 0.5 * (e - s) * gw[i] * std::pow(r, n);
            const bool dq = r >= lo && r <= hi;
            const auto& rule = dq ? fine : coarse;
            double acc = 0.0;
            for (std::size_t j = 0; j < rule.dirs.size(); ++j) acc += rule.w[j] * fun(Eigen::Vector3d(r * rule.dirs[j]));
            total += jac * acc;
        }
        s = e;
    }
    return total;
}

}  // namespace detail

struct BoundCheckResult {
    double max_ratio = 0.0;
    double bound = 0.0;  // kappa1^{d/n}
    double kappa1 = 0.0;
    int trials = 0;
    std::vector<double> ratios;
};

// ||K f||_q / ||f||_p for random f = |y|^b sum_j c_j exp(-|y - z_j|^2 / (2 s_j^2)); K f has
// a closed form through the Riesz potential of a Gaussian.
inline BoundCheckResult bound_check(const HomKernel& k, const ExponentPair& pr, int count, std::uint64_t seed,
                                    int refine = 1) {
    if (count < 0) throw Error(ErrorKind::InvalidArgument, "trial count must be nonnegative");
    if (std::isinf(pr.q)) throw Error(ErrorKind::Unsupported, "bound_check needs finite q");
    const int n = k.n;
    BoundCheckResult res;
    res.kappa1 = kappa1(k, pr);
    res.bound = std::pow(res.kappa1, k.degree() / n);
    if (k.lambda <= 0.0) throw Error(ErrorKind::Unsupported, "bound_check needs lambda > 0");
    detail::GaussRiesz riesz(n, k.lambda);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> Nrm(0.0, 1.0);
    const double sn = n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;

    auto eval_trial = [&](const std::vector<detail::Bump>& bumps, int refine_level) {
        double rmin = 1e300, rmax = 0.0, mass = 0.0, g0 = 0.0;
        for (const auto& bp : bumps) {
            rmin = std::min(rmin, std::max(bp.z.norm() - 3.0 * bp.s, 0.02));
            rmax = std::max(rmax, bp.z.norm() + 3.0 * bp.s);
            mass += bp.c * std::pow(2.0 * std::numbers::pi * bp.s * bp.s, 0.5 * n);
            g0 += bp.c * riesz(bp.z.norm(), bp.s);
        }
        const double lo = 0.25 * rmin, hi = 4.0 * rmax;
        const double rho0 = 1e-3 * lo, rho1 = 1e3 * hi;
        auto f = [&](const Eigen::Vector3d& y) {
            double v = 0.0;
            for (const auto& bp : bumps) v += bp.c * std::exp(-0.5 * (y - bp.z).squaredNorm() / (bp.s * bp.s));
            return std::pow(y.norm(), k.b) * v;
        };
        auto Kf = [&](const Eigen::Vector3d& x) {
            double v = 0.0;
            for (const auto& bp : bumps) v += bp.c * riesz((x - bp.z).norm(), bp.s);
            return std::pow(x.norm(), -k.a) * v;
        };
        const double p = pr.p, q = pr.q;
        const double fp = detail::radial_integral(n, [&](const Eigen::Vector3d& y) { return std::pow(std::abs(f(y)), p); },
                                                  rho0, rho1, lo, hi, refine_level);
        double gq = detail::radial_integral(n, [&](const Eigen::Vector3d& x) { return std::pow(std::abs(Kf(x)), q); },
                                            rho0, rho1, lo, hi, refine_level);
        // analytic tails: Kf ~ |x|^{-a} g0 near 0 and ~ mass |x|^{-a-lambda} at infinity
        gq += sn * std::pow(g0, q) * std::pow(rho0, n - k.a * q) / (n - k.a * q);
        const double e_inf = (k.a + k.lambda) * q - n;
        if (!(e_inf > 0.0)) throw Error(ErrorKind::IntegralDiverges, "K f is not in L^q");
        gq += sn * std::pow(mass, q) * std::pow(rho1, -e_inf) / e_inf;
        return std::pow(gq, 1.0 / q) / std::pow(fp, 1.0 / p);
    };

    for (int t = 0; t < count; ++t) {
        const int nb = 1 + static_cast<int>(U(rng) * 5.0) % 5;
        std::vector<detail::Bump> bumps;
        for (int j = 0; j < nb; ++j) {
            Eigen::Vector3d dir(Nrm(rng), Nrm(rng), n == 3 ? Nrm(rng) : 0.0);
            dir.normalize();
            const double rad = 0.1 * std::pow(100.0, U(rng));  // log-uniform in [0.1, 10]
            const double s = (0.2 + 0.3 * U(rng)) * std::max(rad, 1.0);
            const double c = 0.1 + U(rng);
            bumps.push_back({rad * dir, s, c});
        }
        const double ratio = eval_trial(bumps, refine);
        if (t == 0) {
            const double check = eval_trial(bumps, 2 * refine);
            if (std::abs(check - ratio) > 1e-6 * check)
                throw Error(ErrorKind::QuadratureNotConverged, "norm quadrature not resolved under refinement");
        }
        res.ratios.push_back(ratio);
        res.max_ratio = std::max(res.max_ratio, ratio);
        ++res.trials;
    }
    return res;
}

}  // namespace selfsim
