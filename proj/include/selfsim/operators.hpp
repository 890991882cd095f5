#pragma once

#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <vector>

#include "selfsim/coeffs.hpp"
#include "selfsim/grid.hpp"

namespace selfsim {

template <class G>
class DiffusionOperator;

// Symmetric discretization of -div(A grad u) on a Cartesian grid.  Every face family d
// carries the quadratic form h^D xi^T M_d xi with xi the face gradient (compact normal
// difference, averaged central tangential differences) and
// M_d = (A - lmin I)/D + lmin e_d e_d^T, so that sum_d M_d = A and each M_d >= 0.
// K = sum G^T (h^D M) G is the stiffness matrix; H = K / h^D.
template <int D>
class DiffusionOperator<CartesianGrid<D>> {
public:
    using Grid = CartesianGrid<D>;

    struct Entry {
        std::ptrdiff_t idx;
        int comp;
        double coef;
    };
    static constexpr int kMaxStencil = 2 + 4 * (D - 1);
    struct Stencil {
        std::array<Entry, kMaxStencil> e;
        int len = 0;
    };

    DiffusionOperator(const MatrixSpec& spec, const Grid& g, double scale = 1.0) : spec_(spec), grid_(g) {
        if (spec.dim() != D) throw Error(ErrorKind::InvalidArgument, "matrix/grid dimension mismatch");
        const auto nf = faces_per_family();
        const MatrixSpec base = spec.limit();
        if (auto p = std::get_if<MatrixSpec::Perturbed>(&spec.kind())) {
            amp_ = p->amplitude;
            nu_ = p->nu;
        }
        const double hd = std::pow(grid_.h(), D);
        for (int d = 0; d < D; ++d) {
            M0_[d].resize(nf);
            M_[d].resize(nf);
            rface_[d].resize(nf);
            for (std::size_t f = 0; f < nf; ++f) {
                const Vec<D> x = face_center(d, f);
                rface_[d][f] = x.norm();
                const Mat<D> A = base.template eval<D>(x);
                Eigen::SelfAdjointEigenSolver<Mat<D>> es;
                es.computeDirect(A, Eigen::EigenvaluesOnly);
                const double lmin = es.eigenvalues()[0];
                Mat<D> M = (A - lmin * Mat<D>::Identity()) / D;
                M(d, d) += lmin;
                M0_[d][f] = hd * M;
            }
        }
        set_scale(scale);
    }

    const Grid& grid() const { return grid_; }
    const MatrixSpec& spec() const { return spec_; }
    bool time_dependent() const { return amp_ != 0.0; }

    // Dilation of the coefficient argument: A(x * scale).  Only the perturbation depends on it.
    void set_scale(double scale) {
        scale_ = scale;
        const double hd = std::pow(grid_.h(), D);
        for (int d = 0; d < D; ++d)
            for (std::size_t f = 0; f < M_[d].size(); ++f) {
                M_[d][f] = M0_[d][f];
                if (amp_ != 0.0) {
                    const double r = rface_[d][f] * scale;
                    M_[d][f](d, d) += hd * amp_ * std::pow(1.0 + r * r, -0.5 * nu_);
                }
            }
        build_diagonal();
    }

    std::size_t faces_per_family() const { return grid_.size() / grid_.N * (grid_.N + 1); }

    std::array<int, D> face_multi(int d, std::size_t f) const {
        std::array<int, D> m;
        for (int e = D - 1; e >= 0; --e) {
            const int n = (e == d) ? grid_.N + 1 : grid_.N;
            m[e] = static_cast<int>(f % n);
            f /= n;
        }
        return m;
    }

    Vec<D> face_center(int d, std::size_t f) const {
        const auto m = face_multi(d, f);
        Vec<D> x;
        for (int e = 0; e < D; ++e) x[e] = (e == d) ? m[e] * grid_.h() - grid_.R : grid_.coord(m[e]);
        return x;
    }

    bool face_is_interior(int d, std::size_t f) const {
        const auto m = face_multi(d, f);
        return m[d] > 0 && m[d] < grid_.N;
    }

    Stencil stencil(int d, std::size_t f) const {
        const auto m = face_multi(d, f);
        const double h = grid_.h();
        Stencil s;
        auto cell = [&](std::array<int, D> c) -> std::ptrdiff_t {
            for (int e = 0; e < D; ++e)
                if (c[e] < 0 || c[e] >= grid_.N) return -1;
            return static_cast<std::ptrdiff_t>(grid_.flat(c));
        };
        auto add = [&](std::ptrdiff_t idx, int comp, double coef) {
            if (idx >= 0) s.e[s.len++] = {idx, comp, coef};
        };
        std::array<int, D> P = m, Q = m;
        P[d] -= 1;
        add(cell(Q), d, 1.0 / h);
        add(cell(P), d, -1.0 / h);
        for (int e = 0; e < D; ++e) {
            if (e == d) continue;
            for (const auto& C : {P, Q}) {
                auto Cp = C, Cm = C;
                Cp[e] += 1;
                Cm[e] -= 1;
                add(cell(Cp), e, 0.25 / h);
                add(cell(Cm), e, -0.25 / h);
            }
        }
        return s;
    }

    Vec<D> face_gradient(int d, std::size_t f, const std::vector<double>& u) const {
        const auto s = stencil(d, f);
        Vec<D> xi = Vec<D>::Zero();
        for (int j = 0; j < s.len; ++j) xi[s.e[j].comp] += s.e[j].coef * u[s.e[j].idx];
        return xi;
    }

    // h^D M_d at a face.
    const Mat<D>& face_matrix(int d, std::size_t f) const { return M_[d][f]; }

    // out = K u
    void apply_stiffness(const std::vector<double>& u, std::vector<double>& out) const {
        out.assign(u.size(), 0.0);
        for (int d = 0; d < D; ++d) {
            const auto nf = M_[d].size();
            for (std::size_t f = 0; f < nf; ++f) {
                const auto s = stencil(d, f);
                Vec<D> xi = Vec<D>::Zero();
                for (int j = 0; j < s.len; ++j) xi[s.e[j].comp] += s.e[j].coef * u[s.e[j].idx];
                const Vec<D> q = M_[d][f] * xi;
                for (int j = 0; j < s.len; ++j) out[s.e[j].idx] += s.e[j].coef * q[s.e[j].comp];
            }
        }
    }

    // H u = -div(A grad u) per unit volume.
    Field<Grid> apply(const Field<Grid>& u) const {
        Field<Grid> out(grid_);
        apply_stiffness(u.values, out.values);
        const double iv = 1.0 / grid_.volume(0);
        for (auto& v : out.values) v *= iv;
        return out;
    }

    const Eigen::VectorXd& stiffness_diagonal() const { return diag_; }

    Eigen::SparseMatrix<double> stiffness_matrix() const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(M_[0].size() * D * 20);
        for (int d = 0; d < D; ++d)
            for (std::size_t f = 0; f < M_[d].size(); ++f) {
                const auto s = stencil(d, f);
                const auto& M = M_[d][f];
                for (int a = 0; a < s.len; ++a)
                    for (int b = 0; b < s.len; ++b) {
                        const double v = s.e[a].coef * s.e[b].coef * M(s.e[a].comp, s.e[b].comp);
                        if (v != 0.0) trip.emplace_back(s.e[a].idx, s.e[b].idx, v);
                    }
            }
        const auto n = static_cast<Eigen::Index>(grid_.size());
        Eigen::SparseMatrix<double> K(n, n);
        K.setFromTriplets(trip.begin(), trip.end());
        return K;
    }

private:
    void build_diagonal() {
        diag_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_.size()));
        for (int d = 0; d < D; ++d)
            for (std::size_t f = 0; f < M_[d].size(); ++f) {
                const auto s = stencil(d, f);
                for (int j = 0; j < s.len; ++j)
                    diag_[s.e[j].idx] += s.e[j].coef * s.e[j].coef * M_[d][f](s.e[j].comp, s.e[j].comp);
            }
    }

    MatrixSpec spec_;
    Grid grid_;
    double scale_ = 1.0, amp_ = 0.0, nu_ = 1.0;
    std::array<std::vector<Mat<D>>, D> M0_, M_;
    std::array<std::vector<double>, D> rface_;
    Eigen::VectorXd diag_;
};

// Radial reduction for rotation-invariant coefficients acting on radial fields:
// -r^{1-n} (r^{n-1} a(r) u')' with a = A xhat . xhat.
template <>
class DiffusionOperator<RadialGrid> {
public:
    using Grid = RadialGrid;

    DiffusionOperator(const MatrixSpec& spec, const Grid& g, double scale = 1.0) : spec_(spec), grid_(g) {
        if (spec.dim() != g.n) throw Error(ErrorKind::InvalidArgument, "matrix/grid dimension mismatch");
        if (!spec.is_rotation_invariant())
            throw Error(ErrorKind::Unsupported, "radial grid needs a rotation-invariant coefficient");
        set_scale(scale);
    }

    const Grid& grid() const { return grid_; }
    const MatrixSpec& spec() const { return spec_; }
    bool time_dependent() const { return !spec_.is_homogeneous(); }

    void set_scale(double scale) {
        const int N = grid_.N;
        c_.assign(N + 1, 0.0);
        for (int f = 1; f <= N; ++f)
            c_[f] = grid_.face_area(f) * spec_.radial_coefficient(grid_.face_radius(f) * scale) / grid_.h();
        diag_.resize(N);
        for (int i = 0; i < N; ++i) diag_[i] = c_[i] + c_[i + 1];
    }

    void apply_stiffness(const std::vector<double>& u, std::vector<double>& out) const {
        const int N = grid_.N;
        out.assign(u.size(), 0.0);
        for (int i = 0; i < N; ++i) {
            double v = diag_[i] * u[i];
            if (i > 0) v -= c_[i] * u[i - 1];
            if (i + 1 < N) v -= c_[i + 1] * u[i + 1];
            out[i] = v;
        }
    }

    Field<Grid> apply(const Field<Grid>& u) const {
        Field<Grid> out(grid_);
        apply_stiffness(u.values, out.values);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] /= grid_.volume(i);
        return out;
    }

    const Eigen::VectorXd& stiffness_diagonal() const { return diag_; }

    Eigen::SparseMatrix<double> stiffness_matrix() const {
        const int N = grid_.N;
        std::vector<Eigen::Triplet<double>> trip;
        for (int i = 0; i < N; ++i) {
            trip.emplace_back(i, i, diag_[i]);
            if (i + 1 < N) {
                trip.emplace_back(i, i + 1, -c_[i + 1]);
                trip.emplace_back(i + 1, i, -c_[i + 1]);
            }
        }
        Eigen::SparseMatrix<double> K(N, N);
        K.setFromTriplets(trip.begin(), trip.end());
        return K;
    }

    // -a(r) u' at face f (f = 1..N); the face N uses the zero ghost.
    double face_flux(int f, const std::vector<double>& u) const {
        const double up = f < grid_.N ? u[f] : 0.0;
        return -(c_[f] / grid_.face_area(f)) * (up - u[f - 1]);
    }

private:
    MatrixSpec spec_;
    Grid grid_;
    std::vector<double> c_;
    Eigen::VectorXd diag_;
};

template <class G>
Field<G> div_a_grad_apply(const MatrixSpec& spec, const Field<G>& f, double scale = 1.0) {
    if (!(scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "scale must be positive");
    DiffusionOperator<G> op(spec, f.grid, scale);
    auto out = op.apply(f);
    out *= -1.0;
    return out;
}

// Conservative 1/2 div(y v) with zero ghosts outside the grid.
template <int D>
Field<CartesianGrid<D>> drift_apply(const Field<CartesianGrid<D>>& v) {
    const auto& g = v.grid;
    Field<CartesianGrid<D>> out(g);
    const int N = g.N;
    const double h = g.h();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto m = g.multi(i);
        double acc = 0.0;
        for (int d = 0; d < D; ++d) {
            const std::size_t st = g.stride(d);
            const double yp = (m[d] + 1) * h - g.R, ym = m[d] * h - g.R;
            const double vp = m[d] + 1 < N ? v[i + st] : 0.0;
            const double vm = m[d] > 0 ? v[i - st] : 0.0;
            acc += yp * 0.5 * (v[i] + vp) - ym * 0.5 * (v[i] + vm);
        }
        out[i] = 0.5 * acc / h;
    }
    return out;
}

inline Field<RadialGrid> drift_apply(const Field<RadialGrid>& v) {
    const auto& g = v.grid;
    const int N = g.N;
    Field<RadialGrid> out(g);
    auto flux = [&](int f) {  // through face f, outward
        if (f == 0) return 0.0;
        const double vp = f < N ? v[f] : 0.0;
        return 0.5 * g.face_radius(f) * 0.5 * (v[f - 1] + vp) * g.face_area(f);
    };
    for (int i = 0; i < N; ++i) out[i] = (flux(i + 1) - flux(i)) / g.volume(i);
    return out;
}

// Vector field sampled on faces: family d holds a full vector at each d-face, normalized
// so that sum_d sum_faces h^D g . xi approximates int g . grad chi.
template <int D>
struct FaceVectorField {
    CartesianGrid<D> grid;
    std::array<std::vector<Vec<D>>, D> fam;

    explicit FaceVectorField(const CartesianGrid<D>& g) : grid(g) {
        const std::size_t nf = g.size() / g.N * (g.N + 1);
        for (int d = 0; d < D; ++d) fam[d].assign(nf, Vec<D>::Zero());
    }
};

// Cell-centred vector field given component-wise.
template <int D>
using CellVectorField = std::array<Field<CartesianGrid<D>>, D>;

// Face representation of a cell-centred field: adjacent-cell average divided by D.
// Boundary faces are left at zero so the induced divergence carries no boundary flux.
template <int D>
FaceVectorField<D> to_faces(const CellVectorField<D>& g, const DiffusionOperator<CartesianGrid<D>>& op) {
    const auto& grid = g[0].grid;
    FaceVectorField<D> out(grid);
    for (int d = 0; d < D; ++d)
        for (std::size_t f = 0; f < out.fam[d].size(); ++f) {
            if (!op.face_is_interior(d, f)) continue;
            auto m = op.face_multi(d, f);
            const std::size_t q = grid.flat(m);
            m[d] -= 1;
            const std::size_t p = grid.flat(m);
            Vec<D> v;
            for (int e = 0; e < D; ++e) v[e] = 0.5 * (g[e][p] + g[e][q]) / D;
            out.fam[d][f] = v;
        }
    return out;
}

// Flux A grad w in the face representation consistent with the operator: -div_h of it is H w.
template <int D>
FaceVectorField<D> a_grad_faces(const DiffusionOperator<CartesianGrid<D>>& op, const Field<CartesianGrid<D>>& w) {
    FaceVectorField<D> out(w.grid);
    const double ihd = 1.0 / std::pow(w.grid.h(), D);
    for (int d = 0; d < D; ++d)
        for (std::size_t f = 0; f < out.fam[d].size(); ++f)
            out.fam[d][f] = ihd * (op.face_matrix(d, f) * op.face_gradient(d, f, w.values));
    return out;
}

// Normal-difference gradient: family d holds (d_d u) e_d.
template <int D>
FaceVectorField<D> grad_faces(const DiffusionOperator<CartesianGrid<D>>& op, const Field<CartesianGrid<D>>& u) {
    FaceVectorField<D> out(u.grid);
    for (int d = 0; d < D; ++d)
        for (std::size_t f = 0; f < out.fam[d].size(); ++f) {
            Vec<D> v = Vec<D>::Zero();
            v[d] = op.face_gradient(d, f, u.values)[d];
            out.fam[d][f] = v;
        }
    return out;
}

// Negative adjoint of the face gradient: div_h g = -V^{-1} G^T (h^D g).
template <int D>
Field<CartesianGrid<D>> discrete_div(const DiffusionOperator<CartesianGrid<D>>& op, const FaceVectorField<D>& g) {
    Field<CartesianGrid<D>> out(g.grid);
    for (int d = 0; d < D; ++d)
        for (std::size_t f = 0; f < g.fam[d].size(); ++f) {
            const auto s = op.stencil(d, f);
            for (int j = 0; j < s.len; ++j) out[s.e[j].idx] -= s.e[j].coef * g.fam[d][f][s.e[j].comp];
        }
    return out;
}

// Cell reconstruction: sum over families of the average of the two adjacent faces.
template <int D>
CellVectorField<D> to_cells(const FaceVectorField<D>& g, const DiffusionOperator<CartesianGrid<D>>& op) {
    CellVectorField<D> out;
    for (int e = 0; e < D; ++e) out[e] = Field<CartesianGrid<D>>(g.grid);
    const auto& grid = g.grid;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto m = grid.multi(i);
        for (int d = 0; d < D; ++d) {
            // face index for (m with m[d]) and (m[d]+1) in family d
            std::size_t f0 = 0, f1 = 0;
            for (int e = 0; e < D; ++e) {
                const int n = (e == d) ? grid.N + 1 : grid.N;
                f0 = f0 * n + m[e];
                f1 = f1 * n + (e == d ? m[e] + 1 : m[e]);
            }
            for (int e = 0; e < D; ++e) out[e][i] += 0.5 * (g.fam[d][f0][e] + g.fam[d][f1][e]);
        }
    }
    (void)op;
    return out;
}

}  // namespace selfsim
