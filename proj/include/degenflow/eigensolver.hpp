#pragma once

#include "discretization.hpp"
#include "error.hpp"
#include "plap.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace degenflow {

enum class Normalization { unit_mass, unit_p_norm };

inline const char* to_string(Normalization n) {
    return n == Normalization::unit_mass ? "unit_mass" : "unit_p_norm";
}

/// Principal eigenpair of -div(omega |grad u|^{p-2} grad u) = lambda omega |u|^{p-2} u.
struct EigenPair {
    double lambda1 = 0.0;
    Field u0;
    Normalization normalization = Normalization::unit_mass;
    double residual = 0.0;
    int iterations = 0;
    double p = 2.0;
};

struct EigenOptions {
    double tol = 0.0;  // 0 selects 1e-6 for p = 2 and 1e-4 otherwise
    int max_iterations = 50000;
    Normalization normalization = Normalization::unit_mass;

    double resolved_tol(double p) const {
        if (tol > 0.0) return tol;
        return p == 2.0 ? 1e-6 : 1e-4;
    }
};

class EigenConvergenceError : public Error {
public:
    EigenConvergenceError(const std::string& what, EigenPair best)
        : Error(ErrorKind::convergence, what), best_(std::move(best)) {}
    const EigenPair& best() const { return best_; }

private:
    EigenPair best_;
};

/// R(u) = int omega |grad u|^p / int omega |u|^p.
inline double rayleigh_quotient(const Field& u, const WeightedMesh& mesh, double p) {
    auto wm = mesh.weighted_mass();
    double denom = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) denom += wm[i] * std::pow(std::abs(u.values[i]), p);
    require(denom > 0.0, ErrorKind::degenerate, "Rayleigh quotient of a zero field");
    return mesh.dirichlet_integral(u.values, p) / denom;
}

inline double rayleigh_quotient(const Field& u, const WeightSpec& w, double p) {
    return rayleigh_quotient(u, WeightedMesh(u.grid, w), p);
}

/// Relative discrete 2-norm of L_p u + lambda omega |u|^{p-2} u over free nodes.
inline double eigen_residual(const Field& u, double lambda, const WeightedMesh& mesh, double p) {
    const Grid& g = *mesh.grid();
    auto lu = apply_plaplacian(u, mesh, p);
    auto wm = mesh.weighted_mass();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.is_boundary(i)) continue;
        double s = lambda * wm[i] / g.mass[i] * std::pow(std::abs(u.values[i]), p - 1.0) *
                   (u.values[i] < 0.0 ? -1.0 : 1.0);
        num += (lu.values[i] + s) * (lu.values[i] + s);
        den += s * s;
    }
    require(den > 0.0, ErrorKind::degenerate, "eigen residual of a zero field");
    return std::sqrt(num / den);
}

namespace detail {

inline void normalize_p(Field& u, const WeightedMesh& mesh, double p) {
    auto wm = mesh.weighted_mass();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += wm[i] * std::pow(std::abs(u.values[i]), p);
    u = u.scaled(std::pow(s, -1.0 / p));
}

// Solves grad E(v) = rhs on the free nodes by Newton's method on the convex
// functional E(v) - <rhs, v>, starting from v.
inline void solve_energy_gradient(Field& v, const std::vector<double>& rhs, const WeightedMesh& mesh,
                                  double p, const FreeIndex& idx) {
    const std::size_t nf = idx.count();
    auto residual = [&](const Field& w, Eigen::VectorXd& r) {
        auto grad = energy_gradient(w.values, mesh, p);
        r.resize(static_cast<Eigen::Index>(nf));
        for (std::size_t k = 0; k < nf; ++k) r[k] = grad[idx.node(k)] - rhs[k];
    };
    auto objective = [&](const Field& w) {
        double s = mesh.dirichlet_integral(w.values, p) / p;
        for (std::size_t k = 0; k < nf; ++k) s -= rhs[k] * w.values[idx.node(k)];
        return s;
    };
    double rhs_norm = 0.0;
    for (double b : rhs) rhs_norm += b * b;
    rhs_norm = std::sqrt(rhs_norm);

    std::vector<double> zero_diag(nf, 0.0);
    Eigen::VectorXd r;
    for (int it = 0; it < 60; ++it) {
        residual(v, r);
        if (r.norm() <= 1e-13 * rhs_norm) return;
        SparseMatrix h = assemble_system(v.values, mesh, p, 0.0, idx, zero_diag, 1.0);
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(h);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success) step = ldlt.solve(-r);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            // flat regions make the degenerate Hessian singular; shift it
            double shift = 1e-10 * h.diagonal().cwiseAbs().maxCoeff();
            for (std::size_t k = 0; k < nf; ++k) h.coeffRef(k, k) += shift;
            Eigen::SparseLU<SparseMatrix> lu(h);
            step = lu.solve(-r);
        }
        double j0 = objective(v);
        double slope = step.dot(r);
        double t = 1.0;
        Field trial = v;
        for (int ls = 0; ls < 40; ++ls) {
            for (std::size_t k = 0; k < nf; ++k) trial.values[idx.node(k)] = v.values[idx.node(k)] + t * step[k];
            if (objective(trial) <= j0 + 1e-4 * t * slope) break;
            t *= 0.5;
        }
        double change = t * step.lpNorm<Eigen::Infinity>();
        v = trial;
        if (change <= 1e-15 * std::max(v.sup_abs(), 1e-300)) return;
    }
}

inline EigenPair inverse_iteration(const WeightedMesh& mesh, double p, Field u, double tol, int max_iterations,
                                   const FreeIndex& idx) {
    auto wm = mesh.weighted_mass();
    EigenPair best;
    best.p = p;
    best.residual = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iterations; ++it) {
        normalize_p(u, mesh, p);
        double lambda = rayleigh_quotient(u, mesh, p);
        double res = eigen_residual(u, lambda, mesh, p);
        if (res < best.residual) {
            best.lambda1 = lambda;
            best.u0 = u;
            best.residual = res;
            best.iterations = it;
        }
        if (res <= tol) return best;
        std::vector<double> rhs(idx.count());
        for (std::size_t k = 0; k < idx.count(); ++k) {
            std::size_t i = idx.node(k);
            rhs[k] = lambda * wm[i] * std::pow(std::abs(u.values[i]), p - 1.0);
        }
        Field v = u;
        solve_energy_gradient(v, rhs, mesh, p, idx);
        for (double& x : v.values) x = std::abs(x);
        v.apply_dirichlet();
        u = std::move(v);
        best.iterations = it;
    }
    throw EigenConvergenceError("eigensolver did not reach residual " + std::to_string(tol) + " in " +
                                    std::to_string(max_iterations) + " iterations (best " +
                                    std::to_string(best.residual) + ")",
                                best);
}

}  // namespace detail

/// Rescales u0 to the requested normalization in place.
inline void normalize(EigenPair& eig, const WeightedMesh& mesh, Normalization n) {
    if (n == Normalization::unit_p_norm) {
        detail::normalize_p(eig.u0, mesh, eig.p);
    } else {
        const Grid& g = *mesh.grid();
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g.mass[i] * eig.u0.values[i];
        eig.u0 = eig.u0.scaled(1.0 / s);
    }
    eig.normalization = n;
}

/// Principal eigenpair by nonlinear inverse iteration: each step solves
/// grad E(v) = lambda omega |u|^{p-2} u, then takes |v| and renormalizes. The
/// p > 2 iteration starts from the p = 2 eigenfunction.
inline EigenPair smallest_eigenpair(const WeightedMesh& mesh, double p, const EigenOptions& opt = {}) {
    require_degenerate_range(p);
    const double tol = opt.resolved_tol(p);
    require(tol > 0.0, ErrorKind::parameter, "eigen tolerance must be > 0");
    const Grid& g = *mesh.grid();
    FreeIndex idx(g);
    require(idx.count() > 0, ErrorKind::degenerate, "grid has no interior nodes");

    Field start = Field::zeros(mesh.grid());
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g.is_boundary(i)) start.values[i] = 1.0;

    EigenPair eig;
    if (p == 2.0) {
        eig = detail::inverse_iteration(mesh, 2.0, start, tol, opt.max_iterations, idx);
    } else {
        EigenPair linear = detail::inverse_iteration(mesh, 2.0, start, 1e-8, opt.max_iterations, idx);
        eig = detail::inverse_iteration(mesh, p, linear.u0, tol, opt.max_iterations, idx);
    }
    normalize(eig, mesh, opt.normalization);
    return eig;
}

inline EigenPair smallest_eigenpair(GridPtr grid, const WeightSpec& w, double p, double tol,
                                    Normalization n = Normalization::unit_mass) {
    EigenOptions opt;
    opt.tol = tol;
    opt.normalization = n;
    return smallest_eigenpair(WeightedMesh(std::move(grid), w), p, opt);
}

}  // namespace degenflow
