#pragma once

#include <Eigen/SparseCholesky>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "selfsim/coeffs.hpp"
#include "selfsim/grid.hpp"
#include "selfsim/operators.hpp"
#include "selfsim/pcg.hpp"

namespace selfsim {

template <class G>
struct EllipticSolve {
    MatrixSpec coefficient;
    G grid;
    double tolerance = 1e-8;
    bool zero_mean_mode = false;
    int max_iter = 100000;
};

struct WeightedEstimateReport {
    double m = 0, p = 2, s = 0;
    double input_norm = 0, output_norm = 0, ratio = 0;
    double R = 0;
};

template <class G>
double l1_norm(const Field<G>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += std::abs(f[i]) * f.grid.volume(i);
    return s;
}

// H = -div(A_inf grad .) with homogeneous Dirichlet data beyond the truncation.
template <class G>
class EllipticSolver {
public:
    explicit EllipticSolver(const EllipticSolve<G>& prob)
        : prob_(prob), op_(prob.coefficient, prob.grid, 1.0), vol_(prob.grid.size()), ivol_(prob.grid.size()) {
        if (!prob.coefficient.is_homogeneous())
            throw Error(ErrorKind::InvalidArgument, "elliptic solve needs the homogeneous limit coefficient");
        if (!(prob.tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive");
        for (std::size_t i = 0; i < vol_.size(); ++i) {
            vol_[i] = prob.grid.volume(i);
            ivol_[i] = 1.0 / vol_[i];
        }
        // radial stiffness is tridiagonal, so a direct factorization is exact and cheap
        if constexpr (G::is_radial) {
            ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(op_.stiffness_matrix());
            if (ldlt_->info() != Eigen::Success) throw Error(ErrorKind::SolverDiverged, "radial factorization failed");
        }
    }

    const EllipticSolve<G>& problem() const { return prob_; }
    const DiffusionOperator<G>& op() const { return op_; }

    void check_mean(const Field<G>& f) const {
        if (f.grid.dim() != 2) return;
        const double l1 = l1_norm(f);
        if (l1 > 0.0 && std::abs(integral(f)) > prob_.tolerance * l1)
            throw Error(ErrorKind::NonZeroMean2D, "two-dimensional right-hand side must have zero mean");
    }

    // Solve K u = V rhs where rhs is given per unit volume.
    Field<G> solve_raw(const Field<G>& f) const {
        std::vector<double> b(f.size());
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = vol_[i] * f[i];
        std::vector<double> x(b.size(), 0.0);
        PcgResult res;
        if (ldlt_) {
            const Eigen::VectorXd sol = ldlt_->solve(Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
            x.assign(sol.data(), sol.data() + sol.size());
            res.converged = true;
        } else {
            auto A = [&](const std::vector<double>& in, std::vector<double>& out) { op_.apply_stiffness(in, out); };
            res = pcg(A, op_.stiffness_diagonal(), b, x, 0.25 * prob_.tolerance, prob_.max_iter, ivol_);
        }
        Field<G> u(f.grid, std::move(x));
        const double r = residual(u, f);
        if (!res.converged || r > prob_.tolerance)
            throw Error(ErrorKind::SolverDiverged, "CG stopped after " + std::to_string(res.iterations) +
                                                      " iterations with relative residual " + std::to_string(r));
        last_iterations_ = res.iterations;
        return u;
    }

    Field<G> solve(const Field<G>& f) const {
        check_mean(f);
        auto u = solve_raw(f);
        if (prob_.zero_mean_mode && f.grid.dim() == 2) shift_boundary_mean(u);
        return u;
    }

    // ||H u - f|| / ||f|| in the discrete L^2 norm.
    double residual(const Field<G>& u, const Field<G>& f) const {
        auto Hu = op_.apply(u);
        Hu -= f;
        const double fn = l2_norm(f);
        return fn > 0.0 ? l2_norm(Hu) / fn : l2_norm(Hu);
    }

    int last_iterations() const { return last_iterations_; }

private:
    void shift_boundary_mean(Field<G>& u) const {
        if constexpr (!G::is_radial) {
            const auto& g = u.grid;
            double s = 0.0;
            int c = 0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const auto m = g.multi(i);
                bool edge = false;
                for (int d = 0; d < G::Dim; ++d) edge = edge || m[d] == 0 || m[d] == g.N - 1;
                if (edge) {
                    s += u[i];
                    ++c;
                }
            }
            const double mean = s / c;
            for (auto& v : u.values) v -= mean;
        } else {
            const double mean = u[u.size() - 1];
            for (auto& v : u.values) v -= mean;
        }
    }

    EllipticSolve<G> prob_;
    DiffusionOperator<G> op_;
    std::vector<double> vol_, ivol_;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
    mutable int last_iterations_ = 0;
};

template <class G>
Field<G> solve_h(const EllipticSolve<G>& prob, const Field<G>& f) {
    return EllipticSolver<G>(prob).solve(f);
}

template <class G>
Field<G> apply_k(const EllipticSolve<G>& prob, const Field<G>& f) {
    return solve_h(prob, f);
}

// Weak solve of -div(A grad W) = div g: K W = -G^T (h^D g), assembled face by face.
template <int D>
Field<CartesianGrid<D>> apply_k_div(const EllipticSolver<CartesianGrid<D>>& solver, const FaceVectorField<D>& g) {
    const auto& op = solver.op();
    Field<CartesianGrid<D>> rhs(g.grid);
    for (int d = 0; d < D; ++d)
        for (std::size_t f = 0; f < g.fam[d].size(); ++f) {
            const auto s = op.stencil(d, f);
            for (int j = 0; j < s.len; ++j) rhs[s.e[j].idx] -= s.e[j].coef * g.fam[d][f][s.e[j].comp];
        }
    return solver.solve_raw(rhs);
}

template <int D>
Field<CartesianGrid<D>> apply_k_div(const EllipticSolve<CartesianGrid<D>>& prob, const FaceVectorField<D>& g) {
    return apply_k_div(EllipticSolver<CartesianGrid<D>>(prob), g);
}

template <int D>
struct AntidivergenceResult {
    FaceVectorField<D> g;
    double div_residual;  // ||div_h g - f|| / ||f||
    double ratio;         // ||g||_{L^2(m-1)} / ||f||_{L^2(m)}
};

// g = grad u with Laplace u = f (identity coefficient, Dirichlet truncation).
template <int D>
AntidivergenceResult<D> antidivergence(const Field<CartesianGrid<D>>& f, double m, double tolerance = 1e-9) {
    const double l1 = l1_norm(f);
    if (l1 > 0.0 && std::abs(integral(f)) > 1e-8 * l1)
        throw Error(ErrorKind::NonZeroMean, "antidivergence needs a zero-mean right-hand side");
    EllipticSolve<CartesianGrid<D>> prob{MatrixSpec::identity(D), f.grid, tolerance};
    EllipticSolver<CartesianGrid<D>> solver(prob);
    auto neg = f;
    neg *= -1.0;
    const auto u = solver.solve_raw(neg);
    AntidivergenceResult<D> out{grad_faces(solver.op(), u), 0.0, 0.0};
    auto dg = discrete_div(solver.op(), out.g);
    const double fn = l2_norm(f);
    if (fn == 0.0) return out;
    dg -= f;
    out.div_residual = l2_norm(dg) / fn;
    const auto cells = to_cells(out.g, solver.op());
    Field<CartesianGrid<D>> mag(f.grid);
    for (std::size_t i = 0; i < mag.size(); ++i) {
        double s = 0.0;
        for (int e = 0; e < D; ++e) s += cells[e][i] * cells[e][i];
        mag[i] = std::sqrt(s);
    }
    out.ratio = weighted_norm(mag, {m - 1.0, 1.0, 2.0}) / weighted_norm(f, {m, 1.0, 2.0});
    return out;
}

// u = K[f]; ratio of |x|^{m-2} weighted L^2 norm of u to |x|^{m-s} weighted L^p norm of f.
template <class G>
WeightedEstimateReport weighted_estimate_probe(const EllipticSolve<G>& prob, const Field<G>& f, double m, double p,
                                               double s) {
    const auto u = apply_k(prob, f);
    WeightedEstimateReport r;
    r.m = m;
    r.p = p;
    r.s = s;
    r.R = prob.grid.R;
    r.output_norm = weighted_norm(u, {m - 2.0, 1.0, 2.0}, WeightForm::Homogeneous);
    r.input_norm = weighted_norm(f, {m - s, 1.0, p}, WeightForm::Homogeneous);
    r.ratio = r.input_norm > 0.0 ? r.output_norm / r.input_norm : 0.0;
    return r;
}

// ---- sharpness counterexample -------------------------------------------

// a = (n + sqrt((n-2)^2 + 4b(n-1))) / 4
inline double counterexample_a(int n, double b) {
    return 0.25 * (n + std::sqrt((n - 2.0) * (n - 2.0) + 4.0 * b * (n - 1.0)));
}

// Leading far-field coefficient of f; zero for the chosen a.
inline double counterexample_leading_coefficient(int n, double b, double a) {
    return -(1.0 - b) * (n - 1.0) + 2.0 * a * n - 4.0 * a * a;
}

struct CounterexamplePair {
    int n;
    double b, a;
    // u = x1 * U(r), f = x1 * F(r)
    double U(double r) const { return std::pow(1.0 + r * r, -a); }
    double F(double r) const {
        const double q = 1.0 + r * r;
        return -(1.0 - b) * (n - 1.0) * std::pow(q, -a) / (r * r) + 2.0 * a * (n + 2.0) * std::pow(q, -a - 1.0) -
               4.0 * a * (a + 1.0) * r * r * std::pow(q, -a - 2.0);
    }
};

struct CounterexampleResult {
    double a = 0;
    std::vector<WeightedEstimateReport> reports;
    double growth_exponent = 0;    // least-squares slope of log ratio vs log R
    double predicted_exponent = 0; // (n + 2 - 4a)/2 where the u-norm diverges, else 0
    double identity_residual = 0;  // discrete ||H u - f|| / ||f|| away from the origin
};

namespace detail {

template <class F>
double quad(F&& f, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(f, a, b, 10, 1e-10);
}

// Radial integral with geometric panels, resolving both the unit scale and the far field.
template <class F>
double quad_radial(F&& f, double R) {
    double s = 0.0, a = 0.0, b = std::min(R, 1e-3);
    while (a < R) {
        s += quad(f, a, b);
        a = b;
        b = std::min(R, std::max(2.0 * b, 1e-3));
    }
    return s;
}

inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

// Ratios ||u||_{L^2(m-2), B_R} / ||f||_{L^2(m)} for the pair built from A_b, by radial quadrature.
// The x1 factor contributes the spherical average r^2/n.
inline std::vector<WeightedEstimateReport> counterexample_ratios(int n, double b, double m,
                                                                 const std::vector<double>& R_values) {
    const CounterexamplePair pr{n, b, counterexample_a(n, b)};
    const double c = sphere_area(n) / n;
    auto fint = [&](double r) {
        const double F = pr.F(r);
        return std::pow(r, n + 1) * std::pow(1.0 + r * r, m) * F * F;
    };
    using boost::math::quadrature::gauss_kronrod;
    const double Rmax = *std::max_element(R_values.begin(), R_values.end());
    double fn2 = detail::quad_radial(fint, Rmax);
    fn2 += gauss_kronrod<double, 61>::integrate(fint, Rmax, std::numeric_limits<double>::infinity(), 10, 1e-10);
    const double fn = std::sqrt(c * fn2);
    std::vector<WeightedEstimateReport> out;
    for (double R : R_values) {
        auto uint = [&](double r) {
            const double U = pr.U(r);
            return std::pow(r, n + 1) * std::pow(1.0 + r * r, m - 2.0) * U * U;
        };
        WeightedEstimateReport rep;
        rep.m = m;
        rep.p = 2;
        rep.s = 0;
        rep.R = R;
        rep.input_norm = fn;
        rep.output_norm = std::sqrt(c * detail::quad_radial(uint, R));
        rep.ratio = rep.output_norm / rep.input_norm;
        out.push_back(rep);
    }
    return out;
}

inline double ratio_growth_exponent(const std::vector<WeightedEstimateReport>& reps) {
    std::vector<double> x, y;
    for (const auto& r : reps) {
        x.push_back(std::log(r.R));
        y.push_back(std::log(r.ratio));
    }
    return detail::fit_slope(x, y);
}

// Discrete check of f = -div(A_b grad u) on a 3D grid, relative L^2 error over 1 <= |x| <= 3.
inline double counterexample_identity_residual(double b, int N = 48, double R = 4.0) {
    const CounterexamplePair pr{3, b, counterexample_a(3, b)};
    CartesianGrid<3> g{R, N};
    auto u = sample(g, [&](const Vec<3>& x) { return x[0] * pr.U(x.norm()); });
    auto f = sample(g, [&](const Vec<3>& x) { return x[0] * pr.F(x.norm()); });
    DiffusionOperator<CartesianGrid<3>> op(MatrixSpec::meyers_serrin(3, b), g);
    const auto Hu = op.apply(u);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = g.radius(i);
        if (r < 1.0 || r > 3.0) continue;
        num += (Hu[i] - f[i]) * (Hu[i] - f[i]);
        den += f[i] * f[i];
    }
    return std::sqrt(num / den);
}

inline CounterexampleResult counterexample_ms(double b, double m, const std::vector<double>& R_values,
                                              bool check_identity = true) {
    const int n = 3;
    if (!(b > 0.0)) throw Error(ErrorKind::ParameterOutOfRange, "b must be positive");
    if (!(m > 0.5 * n)) throw Error(ErrorKind::ParameterOutOfRange, "m must exceed n/2");
    if (R_values.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least two truncation radii");
    const double a = counterexample_a(n, b);
    const double lo = 0.5 * n + m - 3.0, hi = 0.5 * n + m - 1.0;
    if (!(lo < 2.0 * a && 2.0 * a < hi))
        throw Error(ErrorKind::ParameterOutOfRange, "2a = " + std::to_string(2.0 * a) + " outside (" +
                                                        std::to_string(lo) + ", " + std::to_string(hi) + ")");
    CounterexampleResult res;
    res.a = a;
    res.reports = counterexample_ratios(n, b, m, R_values);
    res.growth_exponent = ratio_growth_exponent(res.reports);
    // |u|^2 (1+r^2)^{m-2} r^{n-1} ~ r^{n+1+2m-4-4a}
    res.predicted_exponent = std::max(0.0, 0.5 * (n + 2.0 * m - 2.0 - 4.0 * a));
    if (check_identity) res.identity_residual = counterexample_identity_residual(b);
    return res;
}

}  // namespace selfsim
