#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <variant>
#include <vector>

#include "selfsim/error.hpp"

namespace selfsim {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

// Degree-zero homogeneous symmetric field B on the unit sphere.
// dim 2: `samples` at angles 2*pi*j/K, periodic Catmull-Rom in angle.
// dim 3: `samples` row-major on a lat-long grid, polar angle pi*i/(n_lat-1),
//        azimuth 2*pi*j/n_lon, bilinear.
// A single sample means a constant matrix.
struct ShapeSpec {
    int dim = 2;
    std::vector<Eigen::MatrixXd> samples;
    int n_lat = 0;
    int n_lon = 0;

    static ShapeSpec constant(const Eigen::MatrixXd& B) {
        ShapeSpec s;
        s.dim = static_cast<int>(B.rows());
        s.samples = {B};
        return s;
    }
    bool is_constant() const { return samples.size() == 1; }
};

namespace detail {

inline void validate_shape(const ShapeSpec& s) {
    if (s.dim != 2 && s.dim != 3)
        throw Error(ErrorKind::InvalidArgument, "shape dim must be 2 or 3");
    if (s.samples.empty())
        throw Error(ErrorKind::InvalidArgument, "shape has no samples");
    if (s.dim == 3 && s.samples.size() > 1) {
        if (s.n_lat < 2 || s.n_lon < 1 ||
            static_cast<std::size_t>(s.n_lat * s.n_lon) != s.samples.size())
            throw Error(ErrorKind::InvalidArgument, "lat-long grid size mismatch");
    }
    for (const auto& B : s.samples) {
        if (B.rows() != s.dim || B.cols() != s.dim)
            throw Error(ErrorKind::InvalidArgument, "shape sample has wrong size");
        if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + B.cwiseAbs().maxCoeff()))
            throw Error(ErrorKind::InvalidArgument, "shape sample not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw Error(ErrorKind::InvalidArgument, "shape sample not positive definite");
    }
}

// Interpolated B at a unit vector u.
template <int D>
Mat<D> shape_at(const ShapeSpec& s, const Vec<D>& u) {
    if (s.is_constant()) return s.samples[0];
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if constexpr (D == 2) {
        const int K = static_cast<int>(s.samples.size());
        double t = std::atan2(u[1], u[0]);
        if (t < 0) t += two_pi;
        const double pos = t / two_pi * K;
        int j = static_cast<int>(std::floor(pos));
        double f = pos - j;
        j = ((j % K) + K) % K;
        auto S = [&](int i) -> Mat<D> { return s.samples[((i % K) + K) % K]; };
        const Mat<D> p0 = S(j - 1), p1 = S(j), p2 = S(j + 1), p3 = S(j + 2);
        const double f2 = f * f, f3 = f2 * f;
        Mat<D> r = 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 +
                          (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f3);
        return 0.5 * (r + r.transpose());
    } else {
        const double th = std::acos(std::clamp(u[2] / u.norm(), -1.0, 1.0));
        double ph = std::atan2(u[1], u[0]);
        if (ph < 0) ph += two_pi;
        const double pi_pos = th / std::numbers::pi * (s.n_lat - 1);
        int i = std::min(static_cast<int>(std::floor(pi_pos)), s.n_lat - 2);
        const double fi = pi_pos - i;
        const double pj_pos = ph / two_pi * s.n_lon;
        int j = static_cast<int>(std::floor(pj_pos));
        const double fj = pj_pos - j;
        j = ((j % s.n_lon) + s.n_lon) % s.n_lon;
        const int j1 = (j + 1) % s.n_lon;
        auto S = [&](int a, int b) -> Mat<D> { return s.samples[a * s.n_lon + b]; };
        Mat<D> r = (1 - fi) * ((1 - fj) * S(i, j) + fj * S(i, j1)) +
                   fi * ((1 - fj) * S(i + 1, j) + fj * S(i + 1, j1));
        return 0.5 * (r + r.transpose());
    }
}

template <int D>
std::array<Vec<D>, D - 1> tangent_basis(const Vec<D>& u) {
    std::array<Vec<D>, D - 1> t;
    if constexpr (D == 2) {
        t[0] = Vec<D>(-u[1], u[0]);
    } else {
        Vec<D> a = std::abs(u[0]) < 0.9 ? Vec<D>::UnitX() : Vec<D>::UnitY();
        t[0] = (a - a.dot(u) * u).normalized();
        t[1] = u.cross(t[0]);
    }
    return t;
}

inline constexpr double kAngleStep = 1e-4;

// Angular derivatives of the interpolant at a unit vector: 2D returns dB/dtheta;
// 3D returns (dB/dtheta, dB/dphi).
inline Eigen::Matrix2d shape_dtheta_2d(const ShapeSpec& s, const Vec<2>& u) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const int K = static_cast<int>(s.samples.size());
    double t = std::atan2(u[1], u[0]);
    if (t < 0) t += two_pi;
    const double pos = t / two_pi * K;
    int j = static_cast<int>(std::floor(pos));
    const double f = pos - j;
    j = ((j % K) + K) % K;
    auto S = [&](int i) -> Eigen::Matrix2d { return s.samples[((i % K) + K) % K]; };
    const Eigen::Matrix2d p0 = S(j - 1), p1 = S(j), p2 = S(j + 1), p3 = S(j + 2);
    Eigen::Matrix2d r = 0.5 * ((-p0 + p2) + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f +
                               3.0 * (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f * f);
    r *= K / two_pi;
    return 0.5 * (r + r.transpose());
}

// (grad B(x) x, x) at unit x.  The interpolant is differentiated exactly in angle; near the
// poles of a lat-long grid a centered difference along great circles is used instead.
template <int D>
Vec<D> shape_grad_term(const ShapeSpec& s, const Vec<D>& u) {
    Vec<D> v = Vec<D>::Zero();
    if (s.is_constant()) return v;
    if constexpr (D == 2) {
        return Vec<2>(-u[1], u[0]) * u.dot(shape_dtheta_2d(s, u) * u);
    } else {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        const double th = std::acos(std::clamp(u[2], -1.0, 1.0));
        const double st = std::sin(th);
        if (st > 1e-3) {
            double ph = std::atan2(u[1], u[0]);
            if (ph < 0) ph += two_pi;
            const double pi_pos = th / std::numbers::pi * (s.n_lat - 1);
            const int i = std::min(static_cast<int>(std::floor(pi_pos)), s.n_lat - 2);
            const double fi = pi_pos - i;
            const double pj_pos = ph / two_pi * s.n_lon;
            int j = static_cast<int>(std::floor(pj_pos));
            const double fj = pj_pos - j;
            j = ((j % s.n_lon) + s.n_lon) % s.n_lon;
            const int j1 = (j + 1) % s.n_lon;
            auto S = [&](int a, int b) -> Mat<D> { return s.samples[a * s.n_lon + b]; };
            Mat<D> dth = ((1 - fj) * (S(i + 1, j) - S(i, j)) + fj * (S(i + 1, j1) - S(i, j1))) *
                         ((s.n_lat - 1) / std::numbers::pi);
            Mat<D> dph = ((1 - fi) * (S(i, j1) - S(i, j)) + fi * (S(i + 1, j1) - S(i + 1, j))) * (s.n_lon / two_pi);
            dth = 0.5 * (dth + dth.transpose());
            dph = 0.5 * (dph + dph.transpose());
            const Vec<D> eth(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -st);
            const Vec<D> eph(-std::sin(ph), std::cos(ph), 0.0);
            return eth * u.dot(dth * u) + eph * (u.dot(dph * u) / st);
        }
        const double c = std::cos(kAngleStep), sn = std::sin(kAngleStep);
        for (const auto& t : tangent_basis<D>(u)) {
            Mat<D> dB = (shape_at<D>(s, Vec<D>(c * u + sn * t)) - shape_at<D>(s, Vec<D>(c * u - sn * t))) /
                        (2.0 * kAngleStep);
            v += t * u.dot(dB * u);
        }
        return v;
    }
}

template <int D>
struct ShapeFrame {
    Mat<D> B, Bh, Bih;  // B, B^{1/2}, B^{-1/2}
    Vec<D> zeta, xi, grad_term;
};

template <int D>
ShapeFrame<D> shape_frame(const ShapeSpec& s, const Vec<D>& u) {
    ShapeFrame<D> f;
    f.B = shape_at<D>(s, u);
    Eigen::SelfAdjointEigenSolver<Mat<D>> es(f.B);
    const auto& V = es.eigenvectors();
    Vec<D> ev = es.eigenvalues();
    f.Bh = V * ev.cwiseSqrt().asDiagonal() * V.transpose();
    f.Bih = V * ev.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
    f.grad_term = shape_grad_term<D>(s, u);
    f.zeta = f.Bh * u;
    f.xi = 0.5 * f.Bih * f.grad_term;
    return f;
}

template <int D>
Mat<D> from_shape_matrix(const ShapeSpec& s, const Vec<D>& u) {
    const auto f = shape_frame<D>(s, u);
    const double z2 = f.zeta.squaredNorm();
    Mat<D> M = Mat<D>::Identity() + (f.xi.squaredNorm() / (z2 * z2)) * f.zeta * f.zeta.transpose() -
               (f.zeta * f.xi.transpose() + f.xi * f.zeta.transpose()) / z2;
    Mat<D> A = f.Bih * M * f.Bih;
    return 0.5 * (A + A.transpose());
}

}  // namespace detail

class MatrixSpec {
public:
    struct Identity {};
    struct MeyersSerrin {
        double b;
    };
    struct Perturbed {
        std::shared_ptr<const MatrixSpec> base;
        double amplitude;
        double nu;
    };
    struct FromShape {
        ShapeSpec shape;
    };
    using Kind = std::variant<Identity, MeyersSerrin, Perturbed, FromShape>;

    static MatrixSpec identity(int dim) { return MatrixSpec(dim, Identity{}); }
    static MatrixSpec meyers_serrin(int dim, double b) {
        if (!(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "Meyers-Serrin parameter b must be positive");
        return MatrixSpec(dim, MeyersSerrin{b});
    }
    // A = base + amplitude * (1+|x|^2)^{-nu/2} * I
    static MatrixSpec perturbed(const MatrixSpec& base, double amplitude, double nu) {
        if (!(nu > 0.0)) throw Error(ErrorKind::InvalidArgument, "decay rate nu must be positive");
        if (!base.is_homogeneous()) throw Error(ErrorKind::InvalidArgument, "perturbation base must be homogeneous");
        return MatrixSpec(base.dim(), Perturbed{std::make_shared<const MatrixSpec>(base), amplitude, nu});
    }

    int dim() const { return dim_; }
    const Kind& kind() const { return kind_; }
    bool is_homogeneous() const { return !std::holds_alternative<Perturbed>(kind_); }
    bool is_identity() const { return std::holds_alternative<Identity>(kind_); }
    // Radial functions stay radial under div(A grad .).
    bool is_rotation_invariant() const {
        if (std::holds_alternative<FromShape>(kind_)) return false;
        if (auto p = std::get_if<Perturbed>(&kind_)) return p->base->is_rotation_invariant();
        return true;
    }
    // A(x) xhat . xhat as a function of r; valid when rotation invariant.
    double radial_coefficient(double r) const {
        if (auto p = std::get_if<Perturbed>(&kind_))
            return p->base->radial_coefficient(r) + p->amplitude * std::pow(1.0 + r * r, -0.5 * p->nu);
        return 1.0;
    }

    template <int D>
    Mat<D> eval(const Vec<D>& x) const {
        check_dim(D);
        const Mat<D> A = std::visit([&](const auto& k) { return eval_kind<D>(k, x); }, kind_);
        return 0.5 * (A + A.transpose());
    }

    Eigen::MatrixXd eval(const Eigen::VectorXd& x) const {
        if (x.size() != dim_) throw Error(ErrorKind::InvalidArgument, "point dimension mismatch");
        if (dim_ == 2) return eval<2>(Vec<2>(x));
        return eval<3>(Vec<3>(x));
    }

    // Homogeneous limit A_inf.
    MatrixSpec limit() const {
        if (auto p = std::get_if<Perturbed>(&kind_)) return *p->base;
        return *this;
    }

private:
    MatrixSpec(int dim, Kind k) : dim_(dim), kind_(std::move(k)) {
        if (dim_ != 2 && dim_ != 3) throw Error(ErrorKind::InvalidArgument, "dimension must be 2 or 3");
    }
    friend MatrixSpec construct_from_shape(const ShapeSpec&);

    void check_dim(int D) const {
        if (D != dim_) throw Error(ErrorKind::InvalidArgument, "point dimension mismatch");
    }

    template <int D>
    static Mat<D> eval_kind(const Identity&, const Vec<D>&) {
        return Mat<D>::Identity();
    }
    template <int D>
    static Mat<D> eval_kind(const MeyersSerrin& k, const Vec<D>& x) {
        const double r2 = x.squaredNorm();
        if (r2 == 0.0) throw Error(ErrorKind::EvalAtOrigin, "Meyers-Serrin matrix at x = 0");
        return k.b * Mat<D>::Identity() + ((1.0 - k.b) / r2) * (x * x.transpose());
    }
    template <int D>
    static Mat<D> eval_kind(const Perturbed& k, const Vec<D>& x) {
        const double r2 = x.squaredNorm();
        Mat<D> A = (r2 == 0.0 && k.base->is_identity()) ? Mat<D>::Identity() : k.base->template eval<D>(x);
        A.diagonal().array() += k.amplitude * std::pow(1.0 + r2, -0.5 * k.nu);
        return A;
    }
    template <int D>
    static Mat<D> eval_kind(const FromShape& k, const Vec<D>& x) {
        const double r = x.norm();
        if (r == 0.0) throw Error(ErrorKind::EvalAtOrigin, "shape-derived matrix at x = 0");
        return detail::from_shape_matrix<D>(k.shape, Vec<D>(x / r));
    }

    int dim_;
    Kind kind_;
};

struct EllipticityBounds {
    double lambda1;
    double lambda2;
};

namespace detail {

template <int D>
Vec<D> random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec<D> v;
    do {
        for (int i = 0; i < D; ++i) v[i] = g(rng);
    } while (v.norm() < 1e-12);
    return v.normalized();
}

template <int D>
EllipticityBounds ellipticity_bounds_impl(const MatrixSpec& spec, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logr(-3.0, 3.0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int s = 0; s < samples; ++s) {
        Vec<D> x = random_unit<D>(rng);
        if (!spec.is_homogeneous()) x *= std::pow(10.0, logr(rng));
        // Extremes of the Rayleigh quotient over xi are the eigenvalues.
        Eigen::SelfAdjointEigenSolver<Mat<D>> es(spec.eval<D>(x), Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues()[0]);
        hi = std::max(hi, es.eigenvalues()[D - 1]);
    }
    if (!(lo > 0.0)) throw Error(ErrorKind::NotElliptic, "sampled Rayleigh quotient <= 0");
    return {lo, hi};
}

}  // namespace detail

template <int D>
Mat<D> eval_matrix(const MatrixSpec& spec, const Vec<D>& x) {
    return spec.eval<D>(x);
}

inline EllipticityBounds ellipticity_bounds(const MatrixSpec& spec, int samples = 10000, std::uint64_t seed = 1) {
    if (samples < 1) throw Error(ErrorKind::InvalidArgument, "samples must be >= 1");
    if (spec.dim() == 2) return detail::ellipticity_bounds_impl<2>(spec, samples, seed);
    return detail::ellipticity_bounds_impl<3>(spec, samples, seed);
}

template <int D>
struct LimitSplit {
    Mat<D> Ainf;
    Mat<D> B;
    double decay_check;
};

template <int D>
LimitSplit<D> split_limit(const MatrixSpec& spec, const Vec<D>& x) {
    if (x.squaredNorm() == 0.0) throw Error(ErrorKind::EvalAtOrigin, "split_limit at x = 0");
    const Mat<D> A = spec.eval<D>(x);
    const Mat<D> Ainf = spec.limit().template eval<D>(x);
    const Mat<D> B = A - Ainf;
    double nu = 0.0;
    if (auto p = std::get_if<MatrixSpec::Perturbed>(&spec.kind())) nu = p->nu;
    Eigen::SelfAdjointEigenSolver<Mat<D>> es(B, Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    return {Ainf, B, std::pow(1.0 + x.norm(), nu) * norm};
}

inline constexpr double kShapeKappaMax = 0.99;

// |xi|/|zeta| at a unit direction.
template <int D>
double shape_oscillation(const ShapeSpec& s, const Vec<D>& u) {
    const auto f = detail::shape_frame<D>(s, u);
    return f.xi.norm() / f.zeta.norm();
}

// Sampled directions used to certify the oscillation condition.
template <int D>
std::vector<Vec<D>> shape_test_directions() {
    std::vector<Vec<D>> dirs;
    if constexpr (D == 2) {
        const int K = 3600;
        for (int j = 0; j < K; ++j) {
            const double t = 2.0 * std::numbers::pi * (j + 0.5) / K;
            dirs.emplace_back(std::cos(t), std::sin(t));
        }
    } else {
        const int nt = 90, np = 180;
        for (int i = 0; i < nt; ++i)
            for (int j = 0; j < np; ++j) {
                const double t = std::numbers::pi * (i + 0.5) / nt, p = 2.0 * std::numbers::pi * (j + 0.5) / np;
                dirs.emplace_back(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t));
            }
    }
    return dirs;
}

template <int D>
double shape_max_oscillation(const ShapeSpec& s) {
    double k = 0.0;
    for (const auto& u : shape_test_directions<D>()) k = std::max(k, shape_oscillation<D>(s, u));
    return k;
}

inline MatrixSpec construct_from_shape(const ShapeSpec& shape) {
    detail::validate_shape(shape);
    const double kappa = shape.dim == 2 ? shape_max_oscillation<2>(shape) : shape_max_oscillation<3>(shape);
    if (!(kappa < kShapeKappaMax))
        throw Error(ErrorKind::OscillationTooLarge,
                    "max |xi|/|zeta| = " + std::to_string(kappa) + " exceeds " + std::to_string(kShapeKappaMax));
    return MatrixSpec(shape.dim, MatrixSpec::FromShape{shape});
}

// A_inf B x + 1/2 A_inf (grad B x, x) - x at a unit direction; zero for a valid construction.
template <int D>
Vec<D> shape_stationarity_defect(const MatrixSpec& spec, const Vec<D>& u) {
    const auto* fs = std::get_if<MatrixSpec::FromShape>(&spec.kind());
    if (!fs) throw Error(ErrorKind::InvalidArgument, "not a shape-derived matrix");
    const Mat<D> A = spec.eval<D>(u);
    const Mat<D> B = detail::shape_at<D>(fs->shape, u);
    return A * (B * u) + 0.5 * A * detail::shape_grad_term<D>(fs->shape, u) - u;
}

// Profile exp(-1/4 (B(x)x, x)) associated with a shape-derived matrix.
template <int D>
double shape_profile(const ShapeSpec& s, const Vec<D>& x) {
    const double r = x.norm();
    if (r == 0.0) return 1.0;
    const Mat<D> B = detail::shape_at<D>(s, Vec<D>(x / r));
    return std::exp(-0.25 * x.dot(B * x));
}

}  // namespace selfsim
