#pragma once

// Discrete weighted p-Laplacian as the exact negative gradient of the discrete
// energy E(u) = (1/p) sum_e (int_e omega) |grad_e u|^p, plus reaction terms.

#include "discretization.hpp"
#include "error.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace degenflow {

using SparseMatrix = Eigen::SparseMatrix<double>;

inline void require_degenerate_range(double p) {
    require(p >= 2.0, ErrorKind::unsupported,
            "p = " + std::to_string(p) + " < 2: singular diffusion is not supported");
}

inline double energy(const Field& u, const WeightedMesh& mesh, double p, double eps_reg = 0.0) {
    require_degenerate_range(p);
    return mesh.dirichlet_integral(u.values, p, eps_reg) / p;
}

inline double energy(const Field& u, const WeightSpec& w, double p) {
    return energy(u, WeightedMesh(u.grid, w), p);
}

namespace detail {

// Flux coefficient |g|^{p-2} (regularized) and the rank-one Hessian factor.
inline void flux_factors(double g2, double p, double eps_reg, double& phi, double& psi) {
    double s = g2 + eps_reg * eps_reg;
    if (p == 2.0) {
        phi = 1.0;
        psi = 0.0;
        return;
    }
    phi = std::pow(s, 0.5 * (p - 2.0));
    psi = s > 0.0 ? (p - 2.0) * std::pow(s, 0.5 * (p - 4.0)) : 0.0;
}

}  // namespace detail

/// Gradient of E with respect to nodal values (all nodes, Dirichlet included).
inline std::vector<double> energy_gradient(std::span<const double> u, const WeightedMesh& mesh, double p,
                                           double eps_reg = 0.0) {
    const Grid& g = *mesh.grid();
    auto w = mesh.element_weight();
    std::vector<double> out(g.size(), 0.0);
    std::array<double, 2> grad{};
    for (std::size_t e = 0; e < g.elements.size(); ++e) {
        const auto& el = g.elements[e];
        int d = mesh.element_gradient(e, u, grad);
        double g2 = 0.0;
        for (int r = 0; r < d; ++r) g2 += grad[r] * grad[r];
        double phi = 0.0, psi = 0.0;
        detail::flux_factors(g2, p, eps_reg, phi, psi);
        double c = w[e] * phi;
        for (int k = 0; k < el.node_count; ++k) {
            double acc = 0.0;
            for (int r = 0; r < d; ++r) acc += el.rows[r][k] * grad[r];
            out[el.nodes[k]] += c * acc;
        }
    }
    return out;
}

/// Nodal div(omega |grad u|^{p-2} grad u): -dE/du divided by the lumped mass,
/// zero on Dirichlet nodes.
inline Field apply_plaplacian(const Field& u, const WeightedMesh& mesh, double p, double eps_reg = 0.0) {
    require_degenerate_range(p);
    const Grid& g = *mesh.grid();
    auto grad = energy_gradient(u.values, mesh, p, eps_reg);
    Field out = Field::zeros(u.grid);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!g.is_boundary(i)) out.values[i] = -grad[i] / g.mass[i];
    return out;
}

inline Field apply_plaplacian(const Field& u, const WeightSpec& w, double p) {
    return apply_plaplacian(u, WeightedMesh(u.grid, w), p);
}

/// Maps grid nodes to unknown indices (-1 for Dirichlet nodes).
class FreeIndex {
public:
    explicit FreeIndex(const Grid& g) : map_(g.size(), -1) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!g.is_boundary(i)) {
                map_[i] = static_cast<int>(nodes_.size());
                nodes_.push_back(i);
            }
    }
    int operator[](std::size_t node) const { return map_[node]; }
    std::size_t count() const { return nodes_.size(); }
    std::size_t node(std::size_t k) const { return nodes_[k]; }

private:
    std::vector<int> map_;
    std::vector<std::size_t> nodes_;
};

/// diag(diagonal) + scale * H on the free nodes, where H is the Hessian of E
/// (full = true) or the lagged-coefficient stiffness |g|^{p-2} G^T G (Picard).
inline SparseMatrix assemble_system(std::span<const double> u, const WeightedMesh& mesh, double p,
                                    double eps_reg, const FreeIndex& idx, std::span<const double> diagonal,
                                    double scale, bool full = true) {
    const Grid& g = *mesh.grid();
    auto w = mesh.element_weight();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(g.elements.size() * 9 + idx.count());
    for (std::size_t k = 0; k < idx.count(); ++k)
        trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diagonal[k]);
    std::array<double, 2> grad{};
    for (std::size_t e = 0; e < g.elements.size(); ++e) {
        const auto& el = g.elements[e];
        int d = mesh.element_gradient(e, u, grad);
        double g2 = 0.0;
        for (int r = 0; r < d; ++r) g2 += grad[r] * grad[r];
        double phi = 0.0, psi = 0.0;
        detail::flux_factors(g2, p, eps_reg, phi, psi);
        if (!full) psi = 0.0;
        // local d x d tensor: phi I + psi g g^T
        double t[2][2];
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) t[a][b] = (a == b ? phi : 0.0) + psi * grad[a] * grad[b];
        for (int i = 0; i < el.node_count; ++i) {
            int fi = idx[el.nodes[i]];
            if (fi < 0) continue;
            for (int j = 0; j < el.node_count; ++j) {
                int fj = idx[el.nodes[j]];
                if (fj < 0) continue;
                double v = 0.0;
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) v += el.rows[a][i] * t[a][b] * el.rows[b][j];
                trip.emplace_back(fi, fj, scale * w[e] * v);
            }
        }
    }
    SparseMatrix m(static_cast<int>(idx.count()), static_cast<int>(idx.count()));
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

struct ReactionSpec {
    enum class Family { none, power, bounded_power, exp_forced };

    Family family = Family::none;
    double alpha0 = 1.0;       // power
    double sigma = 2.0;
    double c3 = 0.0, c4 = 0.0;  // bounded_power
    double m = 2.0;
    double c6 = 1.0;           // exp_forced
    double lambda1_ref = 0.0;

    static ReactionSpec none() { return {}; }
    static ReactionSpec power(double alpha0, double sigma) {
        ReactionSpec r;
        r.family = Family::power;
        r.alpha0 = alpha0;
        r.sigma = sigma;
        return r;
    }
    static ReactionSpec bounded_power(double c3, double c4, double m, double sigma) {
        ReactionSpec r;
        r.family = Family::bounded_power;
        r.c3 = c3;
        r.c4 = c4;
        r.m = m;
        r.sigma = sigma;
        return r;
    }
    static ReactionSpec exp_forced(double c6, double sigma, double lambda1_ref) {
        ReactionSpec r;
        r.family = Family::exp_forced;
        r.c6 = c6;
        r.sigma = sigma;
        r.lambda1_ref = lambda1_ref;
        return r;
    }

    void validate() const {
        if (family == Family::none) return;
        require(sigma > 1.0, ErrorKind::parameter, "reaction exponent sigma must be > 1");
        require(alpha0 >= 0.0 && c3 >= 0.0 && c4 >= 0.0 && c6 >= 0.0 && lambda1_ref >= 0.0,
                ErrorKind::parameter, "reaction coefficients must be >= 0");
        if (family == Family::bounded_power)
            require(m > 1.0, ErrorKind::parameter, "time exponent m must be > 1");
    }

    /// Time factor multiplying |u|^{sigma-1} u.
    double coefficient(double t) const {
        switch (family) {
            case Family::none: return 0.0;
            case Family::power: return alpha0;
            case Family::bounded_power: return c3 + c4 * std::pow(t, m);
            case Family::exp_forced: return c6 * std::exp(lambda1_ref * sigma * t);
        }
        return 0.0;
    }

    double value(double t, double u) const {
        if (family == Family::none || u == 0.0) return 0.0;
        return coefficient(t) * std::pow(std::abs(u), sigma - 1.0) * u;
    }

    double derivative(double t, double u) const {
        if (family == Family::none) return 0.0;
        return coefficient(t) * sigma * std::pow(std::abs(u), sigma - 1.0);
    }
};

inline const char* to_string(ReactionSpec::Family f) {
    switch (f) {
        case ReactionSpec::Family::none: return "none";
        case ReactionSpec::Family::power: return "power";
        case ReactionSpec::Family::bounded_power: return "bounded_power";
        case ReactionSpec::Family::exp_forced: return "exp_forced";
    }
    return "?";
}

/// f(x, t, u); every family is spatially homogeneous.
inline double reaction_eval(const ReactionSpec& spec, const Point& /*x*/, double t, double u) {
    require(t >= 0.0, ErrorKind::parameter, "reaction time must be >= 0");
    return spec.value(t, u);
}

}  // namespace degenflow
