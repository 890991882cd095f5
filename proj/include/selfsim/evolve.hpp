#pragma once

#include <Eigen/SparseCholesky>

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

#include "selfsim/coeffs.hpp"
#include "selfsim/grid.hpp"
#include "selfsim/operators.hpp"
#include "selfsim/pcg.hpp"
#include "selfsim/spectrum.hpp"

namespace selfsim {

struct NonlinearitySpec {
    enum class Kind { None, PowerLaw };
    Kind kind = Kind::None;
    double sigma = 3.0;
    double coefficient = 1.0;
    double saturation = 1e3;

    static NonlinearitySpec none() { return {}; }
    static NonlinearitySpec power_law(int n, double sigma, double coefficient = 1.0, double saturation = 1e3) {
        if (!(sigma > 1.0 + 2.0 / n))
            throw Error(ErrorKind::ParameterOutOfRange, "sigma must exceed 1 + 2/n");
        if (!(saturation > 0.0)) throw Error(ErrorKind::InvalidArgument, "saturation must be positive");
        return {Kind::PowerLaw, sigma, coefficient, saturation};
    }
    // Decay exponent of the rescaled nonlinearity at fixed v.
    double eta(int n) const { return kind == Kind::None ? std::numeric_limits<double>::infinity() : 0.5 * n * (sigma - 1.0) - 1.0; }
};

// N(u) = c |u|^{sigma-1} u for |u| <= saturation, continued linearly beyond.
inline double nonlinearity_N(const NonlinearitySpec& s, double u) {
    if (s.kind == NonlinearitySpec::Kind::None) return 0.0;
    const double au = std::abs(u);
    if (au <= s.saturation) return s.coefficient * std::pow(au, s.sigma - 1.0) * u;
    const double S = s.saturation;
    const double val = s.coefficient * std::pow(S, s.sigma);
    const double slope = s.coefficient * s.sigma * std::pow(S, s.sigma - 1.0);
    return std::copysign(val + slope * (au - S), u);
}

// Rescaled nonlinearity e^{(1+n/2) tau} N(e^{-n tau/2} v).
inline double nonlinearity_eval(const NonlinearitySpec& s, int n, double tau, double v) {
    if (s.kind == NonlinearitySpec::Kind::None) return 0.0;
    return std::exp((1.0 + 0.5 * n) * tau) * nonlinearity_N(s, std::exp(-0.5 * n * tau) * v);
}

struct InitialDataSpec {
    struct Gaussian {
        std::vector<double> center;
        double width = 1.0;
        double mass = 1.0;
    };
    struct Eigenmode {
        ModeEntry mode;
        double amplitude = 1.0;
    };
    struct PhiPlusMode {
        double eps = 0.1;
    };
    struct Custom {
        std::vector<double> values;
    };
    std::variant<Gaussian, Eigenmode, PhiPlusMode, Custom> kind = Gaussian{};
};

template <class G>
struct Scenario {
    MatrixSpec matrix = MatrixSpec::identity(2);
    NonlinearitySpec nonlinearity;
    G grid;
    double m = 2.0;
    double delta = 1.0;
    double kappa = 1.0;
    InitialDataSpec initial;
    double tau_max = 20.0;
    double dtau = 0.0;  // 0: use stability_limit
    int snapshot_stride = 10;
    std::uint64_t seed = 0;
    bool rescaled = true;  // false: du/dt = div(A_inf grad u), no drift
};

template <class G>
struct Trajectory {
    Scenario<G> scenario;
    std::vector<std::pair<double, Field<G>>> snapshots;
    std::vector<std::pair<double, double>> mass_series;
};

inline double gaussian_profile(int n, double r) {
    return std::pow(4.0 * std::numbers::pi, -0.5 * n) * std::exp(-0.25 * r * r);
}

template <class G>
double stability_limit(const Scenario<G>& sc) {
    if (!sc.rescaled) return 0.1;
    const double h = sc.grid.h();
    return 0.5 * h / (0.5 * sc.grid.R);
}

template <class G>
Field<G> initial_field(const Scenario<G>& sc) {
    const auto& g = sc.grid;
    const int n = g.dim();
    Field<G> v(g);
    auto eval = [&](auto&& fun) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if constexpr (G::is_radial) {
                std::vector<double> x(n, 0.0);
                x[0] = g.radius(i);
                v[i] = fun(x.data(), g.radius(i));
            } else {
                const auto c = g.center(i);
                v[i] = fun(c.data(), c.norm());
            }
        }
    };
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, InitialDataSpec::Gaussian>) {
                std::vector<double> c = k.center;
                c.resize(n, 0.0);
                if (G::is_radial && std::any_of(c.begin(), c.end(), [](double z) { return z != 0.0; }))
                    throw Error(ErrorKind::InvalidArgument, "radial grids need centred data");
                const double s2 = k.width * k.width;
                const double norm = k.mass * std::pow(2.0 * std::numbers::pi * s2, -0.5 * n);
                eval([&](const double* x, double r) {
                    double d2 = 0.0;
                    if constexpr (G::is_radial) d2 = r * r;
                    else
                        for (int j = 0; j < n; ++j) d2 += (x[j] - c[j]) * (x[j] - c[j]);
                    return norm * std::exp(-0.5 * d2 / s2);
                });
            } else if constexpr (std::is_same_v<K, InitialDataSpec::Eigenmode>) {
                if (G::is_radial && k.mode.index.ell != 0)
                    throw Error(ErrorKind::InvalidArgument, "radial grids carry only ell = 0 modes");
                eval([&](const double* x, double) { return k.amplitude * eigenfunction_value(k.mode, x, n); });
            } else if constexpr (std::is_same_v<K, InitialDataSpec::PhiPlusMode>) {
                double b = 1.0;
                if (auto ms = std::get_if<MatrixSpec::MeyersSerrin>(&sc.matrix.limit().kind())) b = ms->b;
                const auto mode = make_mode(n, b, G::is_radial ? 0 : 1, G::is_radial ? 1 : 0);
                eval([&](const double* x, double r) {
                    return gaussian_profile(n, r) + k.eps * eigenfunction_value(mode, x, n);
                });
            } else {
                v = Field<G>(g, k.values);
            }
        },
        sc.initial.kind);
    if (!v.all_finite()) throw Error(ErrorKind::InvalidArgument, "initial data not finite on the grid");
    return v;
}

// IMEX integrator: Crank-Nicolson diffusion, Heun predictor-corrector for the explicit
// drift and nonlinearity.  Each stage solves (V + dt/2 K) x = V rhs.
template <class G>
class Integrator {
public:
    explicit Integrator(const Scenario<G>& sc) : sc_(sc), op_(sc.matrix, sc.grid, 1.0), vol_(sc.grid.size()) {
        for (std::size_t i = 0; i < vol_.size(); ++i) vol_[i] = sc.grid.volume(i);
        if (!sc.rescaled && !sc.matrix.is_homogeneous())
            throw Error(ErrorKind::InvalidArgument, "original-variable runs need a frozen coefficient");
        bool small = G::is_radial;
        if constexpr (!G::is_radial) small = G::Dim == 2 && sc.grid.size() <= 300000;
        direct_ = small && !op_.time_dependent();
    }

    const DiffusionOperator<G>& op() const { return op_; }

    Field<G> explicit_term(const Field<G>& v, double tau) const {
        if (!sc_.rescaled) return Field<G>(v.grid);
        auto e = drift_apply(v);
        if (sc_.nonlinearity.kind != NonlinearitySpec::Kind::None) {
            const int n = v.grid.dim();
            for (std::size_t i = 0; i < v.size(); ++i) e[i] += nonlinearity_eval(sc_.nonlinearity, n, tau, v[i]);
        }
        return e;
    }

    Field<G> step(const Field<G>& v, double tau, double dt) {
        if (op_.time_dependent()) op_.set_scale(std::exp(0.5 * (tau + 0.5 * dt)));
        prepare(dt);
        auto Hv = op_.apply(v);
        Field<G> base = v;
        for (std::size_t i = 0; i < v.size(); ++i) base[i] -= 0.5 * dt * Hv[i];
        const bool has_explicit = sc_.rescaled;
        Field<G> out;
        if (!has_explicit) {
            out = solve(base, dt);
        } else {
            const auto e0 = explicit_term(v, tau);
            Field<G> r1 = base;
            for (std::size_t i = 0; i < v.size(); ++i) r1[i] += dt * e0[i];
            const auto pred = solve(r1, dt);
            const auto e1 = explicit_term(pred, tau + dt);
            Field<G> r2 = base;
            for (std::size_t i = 0; i < v.size(); ++i) r2[i] += 0.5 * dt * (e0[i] + e1[i]);
            out = solve(r2, dt);
        }
        const double n0 = l2_norm(v), n1 = l2_norm(out);
        if (!out.all_finite() || (n0 > 0.0 && n1 > 1e6 * n0))
            throw Error(ErrorKind::StepUnstable, "state norm blew up at tau = " + std::to_string(tau));
        return out;
    }

private:
    void prepare(double dt) {
        if (!direct_ || (ldlt_ && dt == dt_)) return;
        dt_ = dt;
        Eigen::SparseMatrix<double> A = op_.stiffness_matrix() * (0.5 * dt);
        for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += vol_[static_cast<std::size_t>(i)];
        ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(A);
        if (ldlt_->info() != Eigen::Success) throw Error(ErrorKind::StepUnstable, "factorization failed");
    }

    Field<G> solve(const Field<G>& rhs, double dt) const {
        const std::size_t n = rhs.size();
        if (direct_) {
            Eigen::VectorXd b(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) b[static_cast<Eigen::Index>(i)] = vol_[i] * rhs[i];
            Eigen::VectorXd x = ldlt_->solve(b);
            return Field<G>(rhs.grid, std::vector<double>(x.data(), x.data() + x.size()));
        }
        std::vector<double> b(n), x = rhs.values, wres(n);
        for (std::size_t i = 0; i < n; ++i) {
            b[i] = vol_[i] * rhs[i];
            wres[i] = 1.0 / vol_[i];
        }
        auto A = [&](const std::vector<double>& in, std::vector<double>& out) {
            op_.apply_stiffness(in, out);
            for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * dt * out[i] + vol_[i] * in[i];
        };
        Eigen::VectorXd diag = 0.5 * dt * op_.stiffness_diagonal();
        for (std::size_t i = 0; i < n; ++i) diag[static_cast<Eigen::Index>(i)] += vol_[i];
        const auto res = pcg(A, diag, b, x, 1e-13, 5000, wres);
        if (!res.converged && res.rel_residual > 1e-10)
            throw Error(ErrorKind::StepUnstable, "implicit solve did not converge");
        return Field<G>(rhs.grid, std::move(x));
    }

    Scenario<G> sc_;
    DiffusionOperator<G> op_;
    std::vector<double> vol_;
    bool direct_ = false;
    double dt_ = -1.0;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

template <class G>
Field<G> step(const Scenario<G>& sc, const Field<G>& state, double tau, double dtau) {
    Integrator<G> it(sc);
    return it.step(state, tau, dtau);
}

template <class G>
void validate_scenario(const Scenario<G>& sc) {
    if (sc.matrix.dim() != sc.grid.dim()) throw Error(ErrorKind::InvalidArgument, "matrix and grid dimensions differ");
    if (!(sc.tau_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau_max must be positive");
    if (sc.dtau < 0.0) throw Error(ErrorKind::InvalidArgument, "dtau must be positive");
    if (sc.snapshot_stride < 1) throw Error(ErrorKind::InvalidArgument, "snapshot_stride must be >= 1");
    if (sc.dtau > stability_limit(sc) * (1.0 + 1e-12))
        throw Error(ErrorKind::ParameterOutOfRange, "dtau exceeds the stability limit");
}

template <class G>
Trajectory<G> evolve_from(const Scenario<G>& sc, Field<G> v) {
    validate_scenario(sc);
    const double dt_req = sc.dtau > 0.0 ? sc.dtau : stability_limit(sc);
    const int steps = static_cast<int>(std::ceil(sc.tau_max / dt_req - 1e-9));
    const double dt = sc.tau_max / steps;
    Integrator<G> it(sc);
    Trajectory<G> tr;
    tr.scenario = sc;
    tr.snapshots.emplace_back(0.0, v);
    tr.mass_series.emplace_back(0.0, integral(v));
    for (int s = 1; s <= steps; ++s) {
        const double tau = (s - 1) * dt;
        v = it.step(v, tau, dt);
        const double t1 = s * dt;
        tr.mass_series.emplace_back(t1, integral(v));
        if (s % sc.snapshot_stride == 0 || s == steps) tr.snapshots.emplace_back(t1, v);
    }
    return tr;
}

template <class G>
Trajectory<G> evolve_scenario(const Scenario<G>& sc) {
    return evolve_from(sc, initial_field(sc));
}

// L v = -H v + 1/2 div(y v) for the homogeneous coefficient.
template <class G>
Field<G> apply_limit_operator(const DiffusionOperator<G>& op, const Field<G>& v) {
    auto out = drift_apply(v);
    out -= op.apply(v);
    return out;
}

template <class G>
struct PhiResult {
    Field<G> phi;
    double residual = 0.0;
    std::vector<std::pair<double, double>> residual_history;
};

// Principal eigenfunction as the long-time limit of the rescaled limit equation from unit-mass data.
template <class G>
PhiResult<G> compute_phi(const MatrixSpec& matrix, const G& grid, double tau_max = 20.0, double tol = 1e-4,
                         int record_every = 64) {
    if (!matrix.is_homogeneous()) throw Error(ErrorKind::InvalidArgument, "compute_phi needs a homogeneous coefficient");
    Scenario<G> sc;
    sc.matrix = matrix;
    sc.grid = grid;
    sc.tau_max = tau_max;
    const int n = grid.dim();
    Field<G> v = sample(grid, [&](const auto& x) {
        if constexpr (G::is_radial) return gaussian_profile(n, x);
        else return gaussian_profile(n, x.norm());
    });
    v *= 1.0 / integral(v);
    const double dt_req = stability_limit(sc);
    const int steps = static_cast<int>(std::ceil(tau_max / dt_req - 1e-9));
    const double dt = tau_max / steps;
    Integrator<G> it(sc);
    PhiResult<G> res;
    auto resid = [&](const Field<G>& f) { return l2_norm(apply_limit_operator(it.op(), f)) / l2_norm(f); };
    for (int s = 1; s <= steps; ++s) {
        v = it.step(v, (s - 1) * dt, dt);
        if (s % record_every == 0 || s == steps) res.residual_history.emplace_back(s * dt, resid(v));
    }
    v *= 1.0 / integral(v);
    res.residual = resid(v);
    res.phi = std::move(v);
    if (res.residual > tol)
        throw Error(ErrorKind::NotConverged, "stationarity residual " + std::to_string(res.residual));
    return res;
}

struct GaussianBounds {
    double C_lower = std::numeric_limits<double>::infinity();
    double C_upper = std::numeric_limits<double>::infinity();
    bool finite() const { return std::isfinite(C_lower) && std::isfinite(C_upper); }
};

// Smallest C >= 1 with C^{-1} e^{-C|y|^2} <= phi and phi <= C e^{-|y|^2/C} on |y| <= R - 2.
template <class G>
GaussianBounds gaussian_bound_check(const Field<G>& phi, double cmax = 1e8) {
    std::vector<std::pair<double, double>> pts;  // (r^2, log phi)
    const double rlim = phi.grid.R - 2.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double r = phi.grid.radius(i);
        if (r > rlim) continue;
        if (!(phi[i] > 0.0)) throw Error(ErrorKind::NonPositiveField, "phi <= 0 at radius " + std::to_string(r));
        pts.emplace_back(r * r, std::log(phi[i]));
    }
    auto upper_ok = [&](double C) {
        for (const auto& [r2, lp] : pts)
            if (lp > std::log(C) - r2 / C) return false;
        return true;
    };
    auto lower_ok = [&](double C) {
        for (const auto& [r2, lp] : pts)
            if (lp < -std::log(C) - C * r2) return false;
        return true;
    };
    auto smallest = [&](auto&& ok) {
        if (ok(1.0)) return 1.0;
        if (!ok(cmax)) return std::numeric_limits<double>::infinity();
        double lo = 1.0, hi = cmax;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
            const double mid = std::sqrt(lo * hi) > lo && std::sqrt(lo * hi) < hi ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
            if (ok(mid)) hi = mid;
            else lo = mid;
        }
        return hi;
    };
    GaussianBounds gb;
    gb.C_upper = smallest(upper_ok);
    gb.C_lower = smallest(lower_ok);
    return gb;
}

}  // namespace selfsim
