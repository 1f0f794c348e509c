#pragma once

// Radial weights omega(|x|) and numerical checks of the Muckenhoupt and
// doubling classes they are required to belong to.

#include "error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace degenflow {

/// Surface measure of the unit sphere in R^n (n = 1 counts the two endpoints).
inline double sphere_surface(int n) {
    require(n >= 1, ErrorKind::parameter, "dimension must be >= 1");
    return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Quadrature on [a, b] to the given relative tolerance: tanh-sinh when the
/// segment starts at the origin (power weights are singular there),
/// adaptive Gauss-Kronrod (7/15) otherwise. A nonfinite integral returns inf.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-10) {
    if (b <= a) return 0.0;
    double error = 0.0;
    double l1 = 0.0;
    if (a == 0.0) {
        try {
            boost::math::quadrature::tanh_sinh<double> ts(12, 1e-40);
            double v = ts.integrate(f, a, b, rel_tol, &error, &l1);
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    }
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 15, rel_tol, &error, &l1);
}

struct WeightSpec {
    enum class Kind { constant, power, tabulated };

    Kind kind = Kind::constant;
    double exponent = 0.0;               // theta_w for Kind::power
    std::vector<double> positions;       // radial sample positions (tabulated)
    std::vector<double> values;          // samples (tabulated)
    double muckenhoupt_exponent = 2.0;   // theta_mk > 1
    std::optional<double> doubling_exponent;  // mu; defaults to 1 + theta_w / n

    static WeightSpec constant() { return {}; }

    static WeightSpec power(double theta_w) {
        WeightSpec w;
        w.kind = Kind::power;
        w.exponent = theta_w;
        return w;
    }

    static WeightSpec tabulated(std::vector<double> pos, std::vector<double> vals) {
        require(pos.size() == vals.size() && pos.size() >= 2, ErrorKind::data,
                "tabulated weight needs >= 2 (position, value) samples");
        require(pos.front() >= 0.0, ErrorKind::data, "tabulated positions must be >= 0");
        for (std::size_t i = 1; i < pos.size(); ++i)
            require(pos[i] > pos[i - 1], ErrorKind::data,
                    "tabulated positions must be strictly increasing");
        bool any_positive = false;
        for (double v : vals) {
            require(std::isfinite(v) && v >= 0.0, ErrorKind::data,
                    "tabulated weight values must be finite and >= 0");
            any_positive = any_positive || v > 0.0;
        }
        require(any_positive, ErrorKind::data, "weight must not vanish identically");
        WeightSpec w;
        w.kind = Kind::tabulated;
        w.positions = std::move(pos);
        w.values = std::move(vals);
        return w;
    }

    /// Doubling exponent mu; power weights default to 1 + theta_w / n.
    double mu(int n) const {
        if (doubling_exponent) return *doubling_exponent;
        return kind == Kind::power ? 1.0 + exponent / n : 1.0;
    }

    bool is_power_like() const { return kind != Kind::tabulated; }
    double power_exponent() const { return kind == Kind::power ? exponent : 0.0; }

    /// Radial profile. Tabulated data is extended by its boundary values.
    double profile(double r) const {
        switch (kind) {
            case Kind::constant: return 1.0;
            case Kind::power:
                if (exponent == 0.0) return 1.0;
                return std::pow(r, exponent);
            case Kind::tabulated: {
                if (r <= positions.front()) return values.front();
                if (r >= positions.back()) return values.back();
                auto it = std::upper_bound(positions.begin(), positions.end(), r);
                std::size_t j = static_cast<std::size_t>(it - positions.begin());
                double s = (r - positions[j - 1]) / (positions[j] - positions[j - 1]);
                return (1.0 - s) * values[j - 1] + s * values[j];
            }
        }
        return 0.0;
    }

    bool covers(double r) const {
        if (kind != Kind::tabulated) return true;
        double slack = 1e-12 * std::max(1.0, positions.back());
        return r >= positions.front() - slack && r <= positions.back() + slack;
    }
};

/// omega(x). Tabulated weights refuse points outside their sampled range.
inline double eval_weight(const WeightSpec& spec, std::span<const double> x) {
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    double r = std::sqrt(r2);
    require(spec.covers(r), ErrorKind::out_of_range,
            "weight evaluated outside its tabulated range at |x| = " + std::to_string(r));
    return spec.profile(r);
}

inline double eval_weight_radius(const WeightSpec& spec, double r) {
    double x[1] = {r};
    return eval_weight(spec, x);
}

namespace detail {

// Integral of g(profile(r)) r^{n-1} over [0, rho], split at tabulation nodes.
template <class G>
double radial_integral(const WeightSpec& spec, double rho, int n, G&& g) {
    auto integrand = [&](double r) { return g(spec.profile(r)) * std::pow(r, n - 1); };
    if (spec.kind != WeightSpec::Kind::tabulated)
        return integrate_adaptive(integrand, 0.0, rho);
    std::vector<double> breaks{0.0};
    for (double p : spec.positions)
        if (p > 0.0 && p < rho) breaks.push_back(p);
    breaks.push_back(rho);
    double sum = 0.0;
    for (std::size_t i = 1; i < breaks.size(); ++i)
        sum += integrate_adaptive(integrand, breaks[i - 1], breaks[i]);
    return sum;
}

}  // namespace detail

/// omega(B_rho) = surface(n) * int_0^rho omega(r) r^{n-1} dr.
inline double ball_mass(const WeightSpec& spec, double rho, int n) {
    require(rho > 0.0, ErrorKind::parameter, "ball radius must be > 0");
    require(n >= 1, ErrorKind::parameter, "dimension must be >= 1");
    if (spec.kind == WeightSpec::Kind::power)
        require(spec.exponent > -n, ErrorKind::divergence,
                "power weight |x|^theta is not integrable near 0 for theta <= -n");
    double m = sphere_surface(n) * detail::radial_integral(spec, rho, n, [](double w) { return w; });
    require(std::isfinite(m), ErrorKind::divergence, "ball mass diverges");
    return m;
}

struct ClassCheckOptions {
    double cap = 1e6;
    int extension_steps = 3;   // radius doublings used for the tail-trend test
    double trend_tol = 1e-6;   // relative growth counted as an increase
};

struct MuckenhouptReport {
    bool passes = false;
    double worst_constant = 0.0;
    double worst_esssup_constant = 0.0;
    std::vector<double> radii;
    std::vector<double> constants;
    std::vector<double> esssup_constants;
    std::string diagnostic;
};

struct DoublingReport {
    bool passes = false;
    double worst_ratio = 0.0;
    std::vector<std::pair<double, double>> pairs;
    std::vector<double> ratios;
    std::string diagnostic;
};

namespace detail {

inline bool strictly_growing(const std::vector<double>& seq, double tol) {
    if (seq.size() < 2) return false;
    for (std::size_t i = 1; i < seq.size(); ++i)
        if (!(seq[i] > seq[i - 1] * (1.0 + tol))) return false;
    return true;
}

inline double dual_ball_mass(const WeightSpec& spec, double r, int n, double theta) {
    double q = -1.0 / (theta - 1.0);
    if (spec.kind == WeightSpec::Kind::power && spec.exponent * q + n <= 0.0)
        return std::numeric_limits<double>::infinity();
    return sphere_surface(n) * radial_integral(spec, r, n, [q](double w) {
               if (w <= 0.0) return std::numeric_limits<double>::infinity();
               return std::pow(w, q);
           });
}

inline double esssup_on_ball(const WeightSpec& spec, double r) {
    switch (spec.kind) {
        case WeightSpec::Kind::constant: return 1.0;
        case WeightSpec::Kind::power:
            if (spec.exponent < 0.0) return std::numeric_limits<double>::infinity();
            return spec.exponent == 0.0 ? 1.0 : std::pow(r, spec.exponent);
        case WeightSpec::Kind::tabulated: {
            double m = std::max(spec.profile(0.0), spec.profile(r));
            for (std::size_t i = 0; i < spec.positions.size() && spec.positions[i] <= r; ++i)
                m = std::max(m, spec.values[i]);
            return m;
        }
    }
    return 0.0;
}

// A_theta product at radius r; +inf when the dual integral diverges.
inline double muckenhoupt_constant(const WeightSpec& spec, double r, int n) {
    double theta = spec.muckenhoupt_exponent;
    double mass = ball_mass(spec, r, n);
    double dual = dual_ball_mass(spec, r, n, theta);
    if (!std::isfinite(dual)) return std::numeric_limits<double>::infinity();
    return mass * std::pow(dual, theta - 1.0) / std::pow(r, n * theta);
}

}  // namespace detail

/// Checks the A_theta product bound on the supplied radii. The bound counts as
/// finite when it stays below the cap and does not keep growing as the radius
/// grid is extended in either direction.
inline MuckenhouptReport check_muckenhoupt(const WeightSpec& spec, int n,
                                           std::span<const double> radii,
                                           const ClassCheckOptions& opt = {}) {
    require(!radii.empty(), ErrorKind::parameter, "radii must be nonempty");
    require(spec.muckenhoupt_exponent > 1.0, ErrorKind::parameter,
            "Muckenhoupt exponent must be > 1");
    for (double r : radii) require(r > 0.0, ErrorKind::parameter, "radii must be > 0");

    MuckenhouptReport rep;
    rep.radii.assign(radii.begin(), radii.end());
    bool finite = true;
    try {
        for (double r : radii) {
            double c = detail::muckenhoupt_constant(spec, r, n);
            double es = detail::esssup_on_ball(spec, r) * std::pow(r, n) / ball_mass(spec, r, n);
            rep.constants.push_back(c);
            rep.esssup_constants.push_back(es);
            finite = finite && std::isfinite(c);
            rep.worst_constant = std::max(rep.worst_constant, std::isfinite(c) ? c : std::numeric_limits<double>::infinity());
            rep.worst_esssup_constant = std::max(rep.worst_esssup_constant, es);
        }
    } catch (const Error& e) {
        rep.passes = false;
        rep.worst_constant = std::numeric_limits<double>::infinity();
        rep.diagnostic = e.what();
        return rep;
    }
    if (!finite) {
        rep.diagnostic = "dual integral of omega^{-1/(theta-1)} diverges";
        return rep;
    }
    if (rep.worst_constant > opt.cap) {
        rep.diagnostic = "A_theta constant exceeds cap";
        return rep;
    }
    auto [rmin, rmax] = std::minmax_element(rep.radii.begin(), rep.radii.end());
    std::vector<double> down, up;
    for (int j = 0; j <= opt.extension_steps; ++j) {
        down.push_back(detail::muckenhoupt_constant(spec, *rmin / std::ldexp(1.0, j), n));
        up.push_back(detail::muckenhoupt_constant(spec, *rmax * std::ldexp(1.0, j), n));
    }
    if (detail::strictly_growing(down, opt.trend_tol) || detail::strictly_growing(up, opt.trend_tol)) {
        rep.diagnostic = "A_theta constant keeps growing under radius extension";
        return rep;
    }
    rep.passes = true;
    return rep;
}

/// Checks omega(B_s)/omega(B_h) <= c (s/h)^{n mu}; worst_ratio is the largest
/// normalized ratio over the supplied pairs.
inline DoublingReport check_doubling(const WeightSpec& spec, int n, double mu,
                                     std::span<const std::pair<double, double>> pairs,
                                     const ClassCheckOptions& opt = {}) {
    require(!pairs.empty(), ErrorKind::parameter, "radius pairs must be nonempty");
    auto ratio = [&](double s, double h) {
        double mh = ball_mass(spec, h, n);
        require(mh > 0.0, ErrorKind::degenerate, "omega(B_h) = 0: degenerate ball");
        return ball_mass(spec, s, n) / mh / std::pow(s / h, n * mu);
    };

    DoublingReport rep;
    std::size_t widest = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [s, h] = pairs[i];
        require(h > 0.0 && s >= h, ErrorKind::parameter, "each pair needs s >= h > 0");
        double q = ratio(s, h);
        rep.pairs.push_back(pairs[i]);
        rep.ratios.push_back(q);
        rep.worst_ratio = std::max(rep.worst_ratio, q);
        if (s / h > pairs[widest].first / pairs[widest].second) widest = i;
    }
    if (!(rep.worst_ratio <= opt.cap)) {
        rep.diagnostic = "doubling ratio exceeds cap";
        return rep;
    }
    auto [s, h] = pairs[widest];
    std::vector<double> outward, inward;
    for (int j = 0; j <= opt.extension_steps; ++j) {
        outward.push_back(ratio(s * std::ldexp(1.0, j), h));
        inward.push_back(ratio(s, h / std::ldexp(1.0, j)));
    }
    if (detail::strictly_growing(outward, opt.trend_tol) ||
        detail::strictly_growing(inward, opt.trend_tol)) {
        rep.diagnostic = "doubling ratio keeps growing as s/h increases";
        return rep;
    }
    rep.passes = true;
    return rep;
}

/// Two-column CSV (position, value); a non-numeric first line is a header.
inline WeightSpec load_tabulated_weight(std::istream& in) {
    std::vector<double> pos, vals;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a = 0.0, b = 0.0;
        if (!(ss >> a >> b)) {
            require(pos.empty() && lineno == 1, ErrorKind::data,
                    "weight CSV line " + std::to_string(lineno) + ": expected two numbers");
            continue;
        }
        pos.push_back(a);
        vals.push_back(b);
    }
    return WeightSpec::tabulated(std::move(pos), std::move(vals));
}

inline WeightSpec load_tabulated_weight(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::data, "cannot open weight file " + path);
    return load_tabulated_weight(in);
}

}  // namespace degenflow
