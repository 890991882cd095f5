#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace selfsim {

struct PcgResult {
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

// Jacobi-preconditioned conjugate gradients for a symmetric positive definite operator.
// `apply(x, out)` computes out = A x.  The residual is measured in the norm
// sum_i r_i^2 * wres_i (wres empty means plain Euclidean).
template <class Apply>
PcgResult pcg(Apply&& apply, const Eigen::VectorXd& diag, const std::vector<double>& b, std::vector<double>& x,
              double tol, int max_iter, const std::vector<double>& wres = {}) {
    const std::size_t n = b.size();
    auto wnorm = [&](const std::vector<double>& r) {
        double s = 0.0;
        if (wres.empty())
            for (std::size_t i = 0; i < n; ++i) s += r[i] * r[i];
        else
            for (std::size_t i = 0; i < n; ++i) s += r[i] * r[i] * wres[i];
        return std::sqrt(s);
    };
    if (x.size() != n) x.assign(n, 0.0);
    PcgResult res;
    const double bn = wnorm(b);
    if (bn == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    std::vector<double> r(n), z(n), p(n), Ap(n);
    apply(x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    double rn = wnorm(r);
    if (rn <= tol * bn) {
        res.rel_residual = rn / bn;
        res.converged = true;
        return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[static_cast<Eigen::Index>(i)];
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];
    for (int it = 1; it <= max_iter; ++it) {
        apply(p, Ap);
        double pAp = 0.0;
        for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
        if (!(pAp > 0.0)) break;
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        rn = wnorm(r);
        res.iterations = it;
        res.rel_residual = rn / bn;
        if (rn <= tol * bn) {
            res.converged = true;
            return res;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[static_cast<Eigen::Index>(i)];
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return res;
}

}  // namespace selfsim
