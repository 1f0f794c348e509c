#pragma once

// Functionals, comparison ODEs, characteristic norms, exact self-similar
// solutions and fits used to check blow-up and decay behaviour.

#include "discretization.hpp"
#include "eigensolver.hpp"
#include "error.hpp"
#include "plap.hpp"
#include "timestepper.hpp"
#include "weight.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace degenflow {

struct Exponents {
    int n = 1;
    double p = 2.0;
    double mu = 1.0;
    double theta_w = 0.0;

    static Exponents of(int n, double p, const WeightSpec& w) {
        Exponents e;
        e.n = n;
        e.p = p;
        e.theta_w = w.kind == WeightSpec::Kind::power ? w.exponent : 0.0;
        e.mu = w.mu(n);
        return e;
    }

    double k() const { return n * (p - 1.0 - mu) + p; }
    double lambda_exp() const { return n * (2.0 * p - 2.0 - p * mu) + p * p; }
    double beta() const { return n * (p - 2.0) + p - theta_w; }
};

struct OdeParams {
    double lambda1 = 0.0;
    double C = 1.0;
    double sigma = 2.0;
    double g0 = 0.0;

    void validate() const {
        require(sigma > 1.0, ErrorKind::parameter, "sigma must be > 1");
        require(lambda1 >= 0.0, ErrorKind::parameter, "lambda1 must be >= 0");
        require(C > 0.0, ErrorKind::parameter, "C must be > 0");
        require(g0 >= 0.0, ErrorKind::parameter, "g0 must be >= 0");
    }
};

inline double g_functional(const Field& u, const Field& u0, const WeightedMesh& mesh) {
    require_same_grid(u, u0);
    auto wm = mesh.weighted_mass();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += wm[i] * u0.values[i] * u.values[i];
    return s;
}

inline double g_functional(const Field& u, const EigenPair& eig, const WeightSpec& w) {
    require_same_grid(u, eig.u0);
    return g_functional(u, eig.u0, WeightedMesh(u.grid, w));
}

/// I = int omega (|grad u|^{p-2} grad u - |grad u0|^{p-2} grad u0) . grad(u0 omega).
inline double condition_star(const Field& u, const Field& u0, const WeightedMesh& mesh, double p) {
    require_same_grid(u, u0);
    const Grid& g = *mesh.grid();
    auto w = mesh.element_weight();
    auto nodal = mesh.nodal_weight();
    std::vector<double> prod(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) prod[i] = u0.values[i] * nodal[i];
    std::array<double, 2> gu{}, gz{}, gp{};
    double total = 0.0;
    for (std::size_t e = 0; e < g.elements.size(); ++e) {
        int d = mesh.element_gradient(e, u.values, gu);
        mesh.element_gradient(e, u0.values, gz);
        mesh.element_gradient(e, prod, gp);
        double nu = 0.0, nz = 0.0;
        for (int r = 0; r < d; ++r) {
            nu += gu[r] * gu[r];
            nz += gz[r] * gz[r];
        }
        double fu = std::pow(nu, 0.5 * (p - 2.0)), fz = std::pow(nz, 0.5 * (p - 2.0));
        double acc = 0.0;
        for (int r = 0; r < d; ++r) acc += (fu * gu[r] - fz * gz[r]) * gp[r];
        total += w[e] * acc;
    }
    return total;
}

inline double condition_star(const Field& u, const EigenPair& eig, const WeightSpec& w, double p) {
    return condition_star(u, eig.u0, WeightedMesh(u.grid, w), p);
}

/// Exact solution of g' = -lambda g + C g^sigma via h = g^{1-sigma}.
struct BernoulliSolution {
    OdeParams params;
    bool blows_up = false;
    std::optional<double> T;

    double operator()(double t) const {
        const auto& q = params;
        if (q.g0 == 0.0) return 0.0;
        if (T && t >= *T) return std::numeric_limits<double>::infinity();
        double h0 = std::pow(q.g0, 1.0 - q.sigma);
        double h;
        if (q.lambda1 == 0.0) {
            h = h0 - (q.sigma - 1.0) * q.C * t;
        } else {
            double a = q.C / q.lambda1;
            h = a + (h0 - a) * std::exp((q.sigma - 1.0) * q.lambda1 * t);
        }
        return std::pow(h, 1.0 / (1.0 - q.sigma));
    }
};

inline BernoulliSolution bernoulli_blowup(const OdeParams& params) {
    params.validate();
    BernoulliSolution s;
    s.params = params;
    if (params.g0 == 0.0) return s;
    const double sm1 = params.sigma - 1.0;
    const double h0 = std::pow(params.g0, -sm1);
    if (params.lambda1 == 0.0) {
        s.blows_up = true;
        s.T = h0 / (sm1 * params.C);
        return s;
    }
    const double a = params.C / params.lambda1;
    if (h0 < a) {
        s.blows_up = true;
        s.T = std::log(a / (a - h0)) / (sm1 * params.lambda1);
    }
    return s;
}

struct Threshold {
    double operative = 0.0;
    double sigma_root = 0.0;  // (lambda1 / C)^{1/sigma}
};

inline Threshold blowup_threshold(double lambda1, double C, double sigma) {
    require(lambda1 > 0.0 && C > 0.0, ErrorKind::parameter, "lambda1 and C must be > 0");
    require(sigma > 1.0, ErrorKind::parameter, "sigma must be > 1");
    return {std::pow(lambda1 / C, 1.0 / (sigma - 1.0)), std::pow(lambda1 / C, 1.0 / sigma)};
}

/// Blow-up time bound for psi' >= C8 psi^sigma.
inline double exp_forced_bound(double psi0, double C8, double sigma) {
    require(psi0 > 0.0, ErrorKind::parameter, "psi0 must be > 0");
    require(C8 > 0.0, ErrorKind::parameter, "C8 must be > 0");
    require(sigma > 1.0, ErrorKind::parameter, "sigma must be > 1");
    return std::pow(psi0, 1.0 - sigma) / (C8 * (sigma - 1.0));
}

// ---------------------------------------------------------------------------
// Characteristic norms over balls centred at the origin

/// Radius of the largest origin-centred ball inside the grid's domain.
inline double domain_radius(const Grid& g) {
    switch (g.mode) {
        case GridMode::radial: return g.extent.x1;
        case GridMode::interval:
            require(g.extent.x0 <= 0.0 && g.extent.x1 >= 0.0, ErrorKind::config, "domain does not contain 0");
            return std::min(-g.extent.x0, g.extent.x1);
        case GridMode::tensor2d:
            require(g.extent.x0 <= 0.0 && g.extent.x1 >= 0.0 && g.extent.y0 <= 0.0 && g.extent.y1 >= 0.0,
                    ErrorKind::config, "domain does not contain 0");
            return std::min({-g.extent.x0, g.extent.x1, -g.extent.y0, g.extent.y1});
    }
    return 0.0;
}

/// {r 2^{j/per_octave}} up to R, with R itself appended.
inline std::vector<double> radius_grid(double r, double R, int per_octave = 2) {
    require(r > 0.0, ErrorKind::parameter, "radius must be > 0");
    require(per_octave >= 1, ErrorKind::parameter, "points per octave must be >= 1");
    std::vector<double> out;
    for (int j = 0;; ++j) {
        double rho = r * std::pow(2.0, static_cast<double>(j) / per_octave);
        if (rho > R * (1.0 + 1e-12)) break;
        out.push_back(std::min(rho, R));
    }
    if (out.empty() || out.back() < R * (1.0 - 1e-12)) out.push_back(R);
    return out;
}

inline double sup_on_ball(const Field& u, double rho) {
    const Grid& g = *u.grid;
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.radius(i) <= rho * (1.0 + 1e-12)) m = std::max(m, std::abs(u.values[i]));
    return m;
}

/// int_{B_rho} u dx for the piecewise-linear interpolant (exact on 1D grids,
/// lumped on tensor grids).
inline double ball_integral(const Field& u, double rho) {
    const Grid& g = *u.grid;
    if (g.mode == GridMode::tensor2d) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g.radius(i) <= rho * (1.0 + 1e-12)) s += g.mass[i] * u.values[i];
        return s;
    }
    const int n = g.dimension;
    const double jac = g.mode == GridMode::radial ? sphere_surface(n) : 1.0;
    double s = 0.0;
    for (std::size_t c = 0; c + 1 < g.xs.size(); ++c) {
        double a = g.xs[c], b = g.xs[c + 1];
        double lo = std::max(a, -rho), hi = std::min(b, rho);
        if (g.mode == GridMode::radial) lo = std::max(a, 0.0);
        if (hi <= lo) continue;
        double ua = u.values[c], ub = u.values[c + 1];
        auto f = [&](double x) {
            double v = ua + (ub - ua) * (x - a) / (b - a);
            return g.mode == GridMode::radial ? jac * v * std::pow(x, n - 1) : v;
        };
        s += boost::math::quadrature::gauss<double, 5>::integrate(f, lo, hi);
    }
    return s;
}

inline void require_supercritical(double p) {
    require(p > 2.0, ErrorKind::unsupported, "characteristic norms need p > 2");
}

/// sup over snapshot times tau <= t and rho >= r of
/// (omega(B_rho)/rho^{n+p})^{1/(p-2)} ||u(tau)||_{L^inf(B_rho)}.
inline double phi_r_characteristic(const std::vector<Snapshot>& snapshots, double r, double t, const Exponents& ex,
                                   const WeightSpec& w, int per_octave = 2) {
    require_supercritical(ex.p);
    require(!snapshots.empty(), ErrorKind::data, "no snapshots");
    const double R = domain_radius(*snapshots.front().u.grid);
    require(r <= R, ErrorKind::parameter, "radius exceeds the domain");
    const auto radii = radius_grid(r, R, per_octave);
    std::vector<double> factor;
    for (double rho : radii)
        factor.push_back(std::pow(ball_mass(w, rho, ex.n) / std::pow(rho, ex.n + ex.p), 1.0 / (ex.p - 2.0)));
    double best = 0.0;
    bool any = false;
    for (const auto& s : snapshots) {
        if (s.t > t) continue;
        any = true;
        for (std::size_t j = 0; j < radii.size(); ++j) best = std::max(best, factor[j] * sup_on_ball(s.u, radii[j]));
    }
    require(any, ErrorKind::data, "no snapshots at or before t");
    return best;
}

/// sup over rho >= r of rho^{-k/(p-2)} (omega(B_rho)/rho^{n mu})^{1/(p-2)} int_{B_rho} u.
inline double triple_norm(const Field& u, double r, const Exponents& ex, const WeightSpec& w, int per_octave = 2) {
    require_supercritical(ex.p);
    const double R = domain_radius(*u.grid);
    require(r <= R, ErrorKind::parameter, "radius exceeds the domain");
    double best = -std::numeric_limits<double>::infinity();
    for (double rho : radius_grid(r, R, per_octave)) {
        double term = std::pow(rho, -ex.k() / (ex.p - 2.0)) *
                      std::pow(ball_mass(w, rho, ex.n) / std::pow(rho, ex.n * ex.mu), 1.0 / (ex.p - 2.0)) *
                      ball_integral(u, rho);
        best = std::max(best, term);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Compactly supported self-similar solutions

enum class ExactVariant { verbatim, amplitude_corrected, self_similar };

inline const char* to_string(ExactVariant v) {
    switch (v) {
        case ExactVariant::verbatim: return "verbatim";
        case ExactVariant::amplitude_corrected: return "amplitude_corrected";
        case ExactVariant::self_similar: return "self_similar";
    }
    return "?";
}

namespace detail {

inline void require_exact_range(const Exponents& ex, double t) {
    require(ex.p > 2.0, ErrorKind::parameter, "exact solution needs p > 2");
    require(ex.theta_w >= 0.0 && ex.theta_w < ex.p, ErrorKind::parameter, "need 0 <= theta_w < p");
    require(t > 0.0, ErrorKind::out_of_range, "exact solution needs t > 0");
}

// Coefficient c in (1 - c xi^{(p-theta)/(p-1)})_+^{(p-1)/(p-2)}.
inline double profile_coefficient(ExactVariant v, const Exponents& ex) {
    const double p = ex.p, th = ex.theta_w, b = ex.beta();
    const double base = (p - 2.0) / (p - th);
    if (v == ExactVariant::self_similar) return base * std::pow(b, -1.0 / (p - 1.0));
    return base * std::pow(ex.n / b, 1.0 / (p - 1.0));
}

}  // namespace detail

/// Profile value at radius r and time t.
inline double exact_profile(ExactVariant v, double r, double t, const Exponents& ex) {
    detail::require_exact_range(ex, t);
    const double p = ex.p, b = ex.beta();
    const double xi = std::abs(r) * std::pow(t, -1.0 / b);
    const double inner = 1.0 - detail::profile_coefficient(v, ex) * std::pow(xi, (p - ex.theta_w) / (p - 1.0));
    double u = inner > 0.0 ? std::pow(inner, (p - 1.0) / (p - 2.0)) : 0.0;
    if (v != ExactVariant::verbatim) u *= std::pow(t, -ex.n / b);
    return u;
}

inline double barenblatt_exact(const Point& x, double t, const Exponents& ex) {
    return exact_profile(ExactVariant::verbatim, std::hypot(x[0], x[1]), t, ex);
}

/// Radius of the support at time t.
inline double front_radius(ExactVariant v, double t, const Exponents& ex) {
    detail::require_exact_range(ex, t);
    const double c = detail::profile_coefficient(v, ex);
    return std::pow(t, 1.0 / ex.beta()) * std::pow(c, -(ex.p - 1.0) / (ex.p - ex.theta_w));
}

using SpaceTimeFn = std::function<double(const Point&, double)>;

struct ResidualOptions {
    double front_margin = 1e-3;
    double time_step_fraction = 1e-4;  // central difference step relative to t
    bool exclude_origin = true;        // radial profiles are not C^2 at |x| = 0
};

/// max |u_t - div(omega |grad u|^{p-2} grad u)| over free nodes where the
/// candidate exceeds front_margin, with u_t by central differences. Nodes at
/// the origin are skipped unless exclude_origin is off.
inline double residual_check(const SpaceTimeFn& candidate, const WeightedMesh& mesh, double p,
                             const std::vector<double>& times, const ResidualOptions& opt = {}) {
    require_degenerate_range(p);
    const GridPtr& g = mesh.grid();
    double worst = 0.0;
    for (double t : times) {
        double d = opt.time_step_fraction * std::max(std::abs(t), 1e-3);
        Field u = Field::from(g, [&](const Point& x) { return candidate(x, t); });
        Field up = Field::from(g, [&](const Point& x) { return candidate(x, t + d); });
        Field um = Field::from(g, [&](const Point& x) { return candidate(x, t - d); });
        Field lu = apply_plaplacian(u, mesh, p);
        for (std::size_t i = 0; i < g->size(); ++i) {
            if (g->is_boundary(i) || u.values[i] <= opt.front_margin) continue;
            if (opt.exclude_origin && g->radius(i) == 0.0) continue;
            double ut = (up.values[i] - um.values[i]) / (2.0 * d);
            worst = std::max(worst, std::abs(ut - lu.values[i]));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Fits

struct FitResult {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t samples = 0;
};

namespace detail {

inline void window_samples(const Trajectory& traj, double ta, double tb, std::vector<double>& t,
                           std::vector<double>& v) {
    require(tb > ta, ErrorKind::parameter, "empty fit window");
    for (const auto& s : traj.samples)
        if (s.t >= ta * (1.0 - 1e-12) && s.t <= tb * (1.0 + 1e-12)) {
            t.push_back(s.t);
            v.push_back(s.sup_abs_u);
        }
    require(t.size() >= 5, ErrorKind::fit, "fewer than 5 samples in the fit window");
    for (double x : v) require(x > 0.0, ErrorKind::fit, "nonpositive sup|u| in the fit window");
}

// Least squares through the origin y = c x.
inline FitResult fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() >= 2 && x.size() == y.size(), ErrorKind::fit, "need >= 2 points");
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    require(sxx > 0.0, ErrorKind::fit, "degenerate abscissae");
    FitResult f;
    f.value = sxy / sxx;
    f.samples = x.size();
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ssr += std::pow(y[i] - f.value * x[i], 2);
    f.stderr_ = std::sqrt(ssr / std::max<std::size_t>(x.size() - 1, 1) / sxx);
    return f;
}

}  // namespace detail

/// Slope of log sup|u| against log t over [ta, tb].
inline FitResult decay_exponent_fit(const Trajectory& traj, double ta, double tb) {
    require(ta > 0.0, ErrorKind::parameter, "log-log fit needs t > 0");
    std::vector<double> t, v;
    detail::window_samples(traj, ta, tb, t, v);
    for (auto& x : t) x = std::log(x);
    for (auto& x : v) x = std::log(x);
    auto f = detail::fit_line(t, v);
    return {f.slope, f.se_slope, t.size()};
}

/// Slope of log sup|u| against t over [ta, tb] (negative for decay).
inline FitResult exponential_rate_fit(const Trajectory& traj, double ta, double tb) {
    std::vector<double> t, v;
    detail::window_samples(traj, ta, tb, t, v);
    for (auto& x : v) x = std::log(x);
    auto f = detail::fit_line(t, v);
    return {f.slope, f.se_slope, t.size()};
}

/// C in g' + lambda1 g = C g^sigma from the first `steps` accepted steps,
/// pairing backward differences with the new value.
inline FitResult fit_comparison_constant(const Trajectory& traj, double lambda1, double sigma, std::size_t steps = 8) {
    require(traj.size() >= 3, ErrorKind::fit, "trajectory too short");
    std::vector<double> x, y;
    for (std::size_t k = 1; k < traj.size() && x.size() < steps; ++k) {
        const auto& a = traj.samples[k - 1];
        const auto& b = traj.samples[k];
        if (!(b.g > 0.0)) continue;
        x.push_back(std::pow(b.g, sigma));
        y.push_back((b.g - a.g) / b.dt + lambda1 * b.g);
    }
    return detail::fit_through_origin(x, y);
}

/// C8 in psi' = C8 psi^sigma with psi = g e^{lambda1 t}, early steps.
inline FitResult fit_exp_forced_constant(const Trajectory& traj, double lambda1, double sigma, std::size_t steps = 8) {
    require(traj.size() >= 3, ErrorKind::fit, "trajectory too short");
    std::vector<double> x, y;
    for (std::size_t k = 1; k < traj.size() && x.size() < steps; ++k) {
        const auto& a = traj.samples[k - 1];
        const auto& b = traj.samples[k];
        double pa = a.g * std::exp(lambda1 * a.t), pb = b.g * std::exp(lambda1 * b.t);
        if (!(pb > 0.0)) continue;
        x.push_back(std::pow(pb, sigma));
        y.push_back((pb - pa) / b.dt);
    }
    return detail::fit_through_origin(x, y);
}

}  // namespace degenflow
