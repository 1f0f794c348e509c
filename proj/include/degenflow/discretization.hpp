#pragma once

// Uniform grids (interval, radial, 2D tensor), nodal fields, lumped quadrature
// and the discrete gradient elements shared by every energy-type quantity.

#include "error.hpp"
#include "weight.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace degenflow {

enum class GridMode { interval, radial, tensor2d };

inline const char* to_string(GridMode m) {
    switch (m) {
        case GridMode::interval: return "interval";
        case GridMode::radial: return "radial";
        case GridMode::tensor2d: return "tensor2d";
    }
    return "?";
}

/// Axis-aligned extent. Radial grids use [0, x1] with x1 the ball radius.
struct GridExtent {
    double x0 = 0.0;
    double x1 = 1.0;
    double y0 = 0.0;
    double y1 = 1.0;
};

using Point = std::array<double, 2>;

/// A piecewise-linear gradient on one cell or triangle: g = rows * u[nodes].
struct GradientElement {
    std::array<std::size_t, 3> nodes{};
    std::array<std::array<double, 3>, 2> rows{};
    int node_count = 2;
    int row_count = 1;
    double measure = 0.0;  // unweighted cell measure (Jacobian included)
    Point centroid{};      // radial: {r_mid, 0}
    double lo = 0.0, hi = 0.0;  // 1D cell bounds (interval/radial)
};

class Grid {
public:
    GridMode mode = GridMode::interval;
    int dimension = 1;  // n: 1 interval, n radial, 2 tensor
    GridExtent extent{};
    std::vector<double> xs;
    std::vector<double> ys;  // tensor2d only
    double hx = 0.0;
    double hy = 0.0;
    std::vector<char> boundary;
    std::vector<double> mass;  // lumped unweighted quadrature weights
    std::vector<GradientElement> elements;

    std::size_t size() const { return boundary.size(); }
    std::size_t nx() const { return xs.size(); }
    std::size_t ny() const { return mode == GridMode::tensor2d ? ys.size() : 1; }
    bool is_boundary(std::size_t i) const { return boundary[i] != 0; }

    Point point(std::size_t i) const {
        if (mode == GridMode::tensor2d) return {xs[i % nx()], ys[i / nx()]};
        return {xs[i], 0.0};
    }

    double radius(std::size_t i) const {
        Point q = point(i);
        return std::hypot(q[0], q[1]);
    }

    /// Largest |x| over the grid.
    double max_radius() const {
        double r = 0.0;
        for (std::size_t i = 0; i < size(); ++i) r = std::max(r, radius(i));
        return r;
    }

    double min_radius() const {
        if (mode == GridMode::radial) return 0.0;
        double r = radius(0);
        for (std::size_t i = 0; i < size(); ++i) r = std::min(r, radius(i));
        // a cell may straddle the origin
        if (mode == GridMode::interval && xs.front() < 0.0 && xs.back() > 0.0) r = 0.0;
        if (mode == GridMode::tensor2d && xs.front() <= 0.0 && xs.back() >= 0.0 &&
            ys.front() <= 0.0 && ys.back() >= 0.0)
            r = 0.0;
        return r;
    }

    std::size_t free_count() const {
        std::size_t c = 0;
        for (char b : boundary) c += b ? 0 : 1;
        return c;
    }
};

using GridPtr = std::shared_ptr<const Grid>;

namespace detail {

inline std::vector<double> uniform_nodes(double a, double b, int intervals) {
    std::vector<double> v(static_cast<std::size_t>(intervals) + 1);
    for (int i = 0; i <= intervals; ++i) v[i] = a + (b - a) * i / intervals;
    v.back() = b;
    return v;
}

}  // namespace detail

/// Uniform grid with `resolution` intervals per axis.
inline GridPtr build_grid(GridMode mode, const GridExtent& extent, int resolution, int dimension = 2) {
    require(resolution >= 4, ErrorKind::config, "resolution must be >= 4");
    require(extent.x1 > extent.x0, ErrorKind::config, "extent must be > 0");
    auto g = std::make_shared<Grid>();
    g->mode = mode;
    g->extent = extent;
    g->xs = detail::uniform_nodes(extent.x0, extent.x1, resolution);
    g->hx = (extent.x1 - extent.x0) / resolution;
    const std::size_t n1 = g->xs.size();

    switch (mode) {
        case GridMode::interval: {
            g->dimension = 1;
            g->boundary.assign(n1, 0);
            g->boundary.front() = g->boundary.back() = 1;
            g->mass.assign(n1, g->hx);
            g->mass.front() = g->mass.back() = 0.5 * g->hx;
            for (std::size_t i = 0; i + 1 < n1; ++i) {
                GradientElement e;
                e.nodes = {i, i + 1, 0};
                e.rows[0] = {-1.0 / g->hx, 1.0 / g->hx, 0.0};
                e.measure = g->hx;
                e.lo = g->xs[i];
                e.hi = g->xs[i + 1];
                e.centroid = {0.5 * (e.lo + e.hi), 0.0};
                g->elements.push_back(e);
            }
            break;
        }
        case GridMode::radial: {
            require(extent.x0 == 0.0, ErrorKind::config, "radial grids start at r = 0");
            require(dimension >= 1, ErrorKind::config, "radial dimension must be >= 1");
            g->dimension = dimension;
            const double s = sphere_surface(dimension);
            const int n = dimension;
            auto shell = [&](double a, double b) { return s / n * (std::pow(b, n) - std::pow(a, n)); };
            g->boundary.assign(n1, 0);
            g->boundary.back() = 1;
            g->mass.resize(n1);
            for (std::size_t i = 0; i < n1; ++i) {
                double a = i == 0 ? 0.0 : 0.5 * (g->xs[i - 1] + g->xs[i]);
                double b = i + 1 == n1 ? g->xs[i] : 0.5 * (g->xs[i] + g->xs[i + 1]);
                g->mass[i] = shell(a, b);
            }
            for (std::size_t i = 0; i + 1 < n1; ++i) {
                GradientElement e;
                e.nodes = {i, i + 1, 0};
                e.rows[0] = {-1.0 / g->hx, 1.0 / g->hx, 0.0};
                e.lo = g->xs[i];
                e.hi = g->xs[i + 1];
                e.measure = shell(e.lo, e.hi);
                e.centroid = {0.5 * (e.lo + e.hi), 0.0};
                g->elements.push_back(e);
            }
            break;
        }
        case GridMode::tensor2d: {
            require(extent.y1 > extent.y0, ErrorKind::config, "extent must be > 0");
            g->dimension = 2;
            g->ys = detail::uniform_nodes(extent.y0, extent.y1, resolution);
            g->hy = (extent.y1 - extent.y0) / resolution;
            const std::size_t nx = n1, ny = g->ys.size();
            g->boundary.assign(nx * ny, 0);
            g->mass.assign(nx * ny, 0.0);
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t i = 0; i < nx; ++i) {
                    bool bx = i == 0 || i + 1 == nx, by = j == 0 || j + 1 == ny;
                    g->boundary[i + nx * j] = (bx || by) ? 1 : 0;
                    g->mass[i + nx * j] = g->hx * g->hy * (bx ? 0.5 : 1.0) * (by ? 0.5 : 1.0);
                }
            // Each cell is split along both diagonals; each of the four right
            // triangles carries half its area so the stencil stays symmetric.
            const double hx = g->hx, hy = g->hy;
            auto tri = [&](std::size_t a, std::size_t b, std::size_t c, std::array<double, 3> gx,
                           std::array<double, 3> gy) {
                GradientElement e;
                e.nodes = {a, b, c};
                e.node_count = 3;
                e.row_count = 2;
                e.rows[0] = gx;
                e.rows[1] = gy;
                e.measure = 0.25 * hx * hy;
                Point pa = g->point(a), pb = g->point(b), pc = g->point(c);
                e.centroid = {(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0};
                g->elements.push_back(e);
            };
            for (std::size_t j = 0; j + 1 < ny; ++j)
                for (std::size_t i = 0; i + 1 < nx; ++i) {
                    std::size_t p00 = i + nx * j, p10 = p00 + 1, p01 = p00 + nx, p11 = p01 + 1;
                    // diagonal p00-p11
                    tri(p00, p10, p11, {-1 / hx, 1 / hx, 0}, {0, -1 / hy, 1 / hy});
                    tri(p00, p01, p11, {0, -1 / hx, 1 / hx}, {-1 / hy, 1 / hy, 0});
                    // diagonal p10-p01
                    tri(p00, p10, p01, {-1 / hx, 1 / hx, 0}, {-1 / hy, 0, 1 / hy});
                    tri(p10, p11, p01, {0, 1 / hx, -1 / hx}, {-1 / hy, 1 / hy, 0});
                }
            break;
        }
    }
    return g;
}

/// Nodal values on a grid.
struct Field {
    GridPtr grid;
    std::vector<double> values;

    static Field zeros(GridPtr g) {
        Field f{g, {}};
        f.values.assign(g->size(), 0.0);
        return f;
    }

    static Field from(GridPtr g, const std::function<double(const Point&)>& fn) {
        Field f = zeros(g);
        for (std::size_t i = 0; i < g->size(); ++i) f.values[i] = fn(g->point(i));
        return f;
    }

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }

    double sup_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }

    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Zeroes every Dirichlet node.
    void apply_dirichlet() {
        for (std::size_t i = 0; i < size(); ++i)
            if (grid->is_boundary(i)) values[i] = 0.0;
    }

    bool satisfies_dirichlet(double tol = 0.0) const {
        for (std::size_t i = 0; i < size(); ++i)
            if (grid->is_boundary(i) && std::abs(values[i]) > tol) return false;
        return true;
    }

    Field scaled(double c) const {
        Field f = *this;
        for (double& v : f.values) v *= c;
        return f;
    }
};

inline void require_same_grid(const Field& a, const Field& b) {
    require(a.grid && b.grid && a.size() == b.size() &&
                (a.grid == b.grid || (a.grid->mode == b.grid->mode && a.grid->xs == b.grid->xs &&
                                      a.grid->ys == b.grid->ys)),
            ErrorKind::shape, "fields live on different grids");
}

/// A grid together with a weight: weighted nodal masses and weighted element
/// measures, the two ingredients of every weighted integral below.
class WeightedMesh {
public:
    WeightedMesh(GridPtr grid, const WeightSpec& weight) : grid_(std::move(grid)), weight_(weight) {
        require(grid_ != nullptr, ErrorKind::parameter, "null grid");
        require(weight_.covers(grid_->min_radius()) && weight_.covers(grid_->max_radius()),
                ErrorKind::out_of_range, "tabulated weight does not cover the grid");
        if (weight_.kind == WeightSpec::Kind::power)
            require(weight_.exponent > -grid_->dimension, ErrorKind::divergence,
                    "power weight not integrable on the grid");
        const Grid& g = *grid_;
        nodal_weight_.resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) nodal_weight_[i] = weight_.profile(g.radius(i));

        weighted_mass_.resize(g.size());
        element_weight_.resize(g.elements.size());
        if (g.mode == GridMode::tensor2d) {
            for (std::size_t i = 0; i < g.size(); ++i) weighted_mass_[i] = g.mass[i] * nodal_weight_[i];
            for (std::size_t e = 0; e < g.elements.size(); ++e) {
                const auto& el = g.elements[e];
                element_weight_[e] = el.measure * weight_.profile(std::hypot(el.centroid[0], el.centroid[1]));
            }
            return;
        }
        const bool radial = g.mode == GridMode::radial;
        const int n = radial ? g.dimension : 1;
        const double s = radial ? sphere_surface(n) : 1.0;
        auto segment = [&](double a, double b) {
            if (b <= a) return 0.0;
            if (weight_.kind == WeightSpec::Kind::constant) {
                return radial ? s / n * (std::pow(b, n) - std::pow(a, n)) : b - a;
            }
            if (radial)
                return s * integrate_adaptive(
                               [&](double r) { return weight_.profile(r) * std::pow(r, n - 1); }, a, b);
            auto f = [&](double r) { return weight_.profile(r); };
            if (b <= 0.0) return integrate_adaptive(f, -b, -a);
            if (a >= 0.0) return integrate_adaptive(f, a, b);
            return integrate_adaptive(f, 0.0, -a) + integrate_adaptive(f, 0.0, b);
        };
        for (std::size_t e = 0; e < g.elements.size(); ++e)
            element_weight_[e] = segment(g.elements[e].lo, g.elements[e].hi);
        const std::size_t n1 = g.xs.size();
        for (std::size_t i = 0; i < n1; ++i) {
            double a = i == 0 ? g.xs[0] : 0.5 * (g.xs[i - 1] + g.xs[i]);
            double b = i + 1 == n1 ? g.xs[i] : 0.5 * (g.xs[i] + g.xs[i + 1]);
            weighted_mass_[i] = segment(a, b);
        }
    }

    const GridPtr& grid() const { return grid_; }
    const WeightSpec& weight() const { return weight_; }
    std::span<const double> nodal_weight() const { return nodal_weight_; }
    std::span<const double> weighted_mass() const { return weighted_mass_; }
    std::span<const double> element_weight() const { return element_weight_; }

    /// Gradient of u on element e; returns the number of components.
    int element_gradient(std::size_t e, std::span<const double> u, std::array<double, 2>& grad) const {
        const auto& el = grid_->elements[e];
        for (int r = 0; r < el.row_count; ++r) {
            double v = 0.0;
            for (int k = 0; k < el.node_count; ++k) v += el.rows[r][k] * u[el.nodes[k]];
            grad[r] = v;
        }
        return el.row_count;
    }

    /// sum_e (int_e omega) |grad u|^p  (the discrete weighted p-Dirichlet integral)
    double dirichlet_integral(std::span<const double> u, double p, double eps_reg = 0.0) const {
        double sum = 0.0;
        std::array<double, 2> g{};
        for (std::size_t e = 0; e < element_weight_.size(); ++e) {
            int d = element_gradient(e, u, g);
            double g2 = eps_reg * eps_reg;
            for (int r = 0; r < d; ++r) g2 += g[r] * g[r];
            double term = std::pow(g2, 0.5 * p);
            if (eps_reg > 0.0) term -= std::pow(eps_reg, p);
            sum += element_weight_[e] * term;
        }
        return sum;
    }

private:
    GridPtr grid_;
    WeightSpec weight_;
    std::vector<double> nodal_weight_;
    std::vector<double> weighted_mass_;
    std::vector<double> element_weight_;
};

/// int_Omega omega u dx by lumped (trapezoid / control-volume) quadrature.
inline double integrate(const Field& field, const WeightedMesh& mesh) {
    auto wm = mesh.weighted_mass();
    double sum = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
        require(!std::isnan(field.values[i]), ErrorKind::numerical, "NaN in integrand");
        sum += wm[i] * field.values[i];
    }
    return sum;
}

inline double integrate(const Field& field, const WeightSpec& weight) {
    return integrate(field, WeightedMesh(field.grid, weight));
}

/// Unweighted lumped L2 inner product.
inline double inner(const Field& a, const Field& b) {
    require_same_grid(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.grid->mass[i] * a.values[i] * b.values[i];
    return s;
}

/// Discrete weighted W^1_{p,omega} norm (int omega (|u|^p + |grad u|^p))^{1/p}.
inline double sobolev_norm(const Field& field, const WeightedMesh& mesh, double p) {
    require(p > 1.0, ErrorKind::parameter, "Sobolev exponent p must be > 1");
    auto wm = mesh.weighted_mass();
    double sum = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) sum += wm[i] * std::pow(std::abs(field.values[i]), p);
    sum += mesh.dirichlet_integral(field.values, p);
    return std::pow(sum, 1.0 / p);
}

inline double sobolev_norm(const Field& field, const WeightSpec& weight, double p) {
    return sobolev_norm(field, WeightedMesh(field.grid, weight), p);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// One row per node: coordinates..., value.
inline void write_field_csv(std::ostream& out, const Field& f, const std::string& value_name = "u") {
    const Grid& g = *f.grid;
    if (g.mode == GridMode::tensor2d)
        out << "x,y," << value_name << '\n';
    else
        out << (g.mode == GridMode::radial ? "r," : "x,") << value_name << '\n';
    for (std::size_t i = 0; i < f.size(); ++i) {
        Point q = g.point(i);
        out << format_double(q[0]) << ',';
        if (g.mode == GridMode::tensor2d) out << format_double(q[1]) << ',';
        out << format_double(f.values[i]) << '\n';
    }
}

}  // namespace degenflow
