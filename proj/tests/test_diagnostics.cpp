#include "catch_amalgamated.hpp"

#include "degenflow/diagnostics.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace degenflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

auto kind_is(ErrorKind k) {
    return Catch::Matchers::Predicate<Error>([k](const Error& e) { return e.kind() == k; });
}

// g' = -lambda g + C g^sigma by Dormand-Prince with tight tolerances
double integrate_ode(const OdeParams& q, double t) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    State x{q.g0};
    auto rhs = [&q](const State& s, State& d, double) { d[0] = -q.lambda1 * s[0] + q.C * std::pow(s[0], q.sigma); };
    ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-13, 1e-13), rhs, x, 0.0, t,
                            t / 1000.0);
    return x[0];
}

// T = int_{g0}^inf dg / (C g^sigma - lambda g)
double blowup_time_quadrature(const OdeParams& q) {
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate([&q](double s) {
        const double g = q.g0 + s;
        return 1.0 / (q.C * std::pow(g, q.sigma) - q.lambda1 * g);
    });
}

Trajectory series(const std::vector<double>& t, const std::vector<double>& sup) {
    Trajectory tr;
    for (std::size_t i = 0; i < t.size(); ++i) {
        TrajectorySample s;
        s.t = t[i];
        s.sup_abs_u = sup[i];
        tr.samples.push_back(s);
    }
    return tr;
}

Exponents ex3(int n, double theta) {
    return Exponents::of(n, 3.0, WeightSpec::power(theta));
}

}  // namespace

TEST_CASE("exponents", "[diagnostics]") {
    auto e = Exponents::of(2, 3.0, WeightSpec::power(1.0));
    CHECK(e.mu == 1.5);
    CHECK(e.beta() == 4.0);
    CHECK(e.k() == 4.0);
    CHECK(e.lambda_exp() == 2.0 * (6.0 - 2.0 - 4.5) + 9.0);
    auto c = Exponents::of(2, 3.0, WeightSpec::constant());
    CHECK(c.beta() == 5.0);
    CHECK(c.k() == 5.0);
}

TEST_CASE("k equals beta on the doubling line mu = 1 + theta/n", "[diagnostics][property]") {
    Catch::SimplePcg32 rng(31);
    std::uniform_real_distribution<double> th(0.0, 2.0), pp(2.0, 6.0);
    std::uniform_int_distribution<int> nn(1, 4);
    for (int i = 0; i < 200; ++i) {
        auto e = Exponents::of(nn(rng), pp(rng), WeightSpec::power(th(rng)));
        CHECK_THAT(e.k(), WithinRel(e.beta(), 1e-14));
    }
}

TEST_CASE("g functional examples", "[diagnostics]") {
    auto g = build_grid(GridMode::interval, {0.0, 1.0, 0.0, 1.0}, 256);
    auto w = WeightSpec::constant();
    WeightedMesh mesh(g, w);
    EigenOptions opt;
    opt.normalization = Normalization::unit_p_norm;
    auto eig = smallest_eigenpair(mesh, 2.0, opt);
    CHECK(g_functional(Field::zeros(g), eig, w) == 0.0);
    CHECK_THAT(g_functional(eig.u0, eig, w), WithinRel(1.0, 1e-12));

    auto s = Field::from(g, [](const Point& x) { return std::sin(pi * x[0]); });
    auto u0 = s.scaled(1.0 / integrate(s, w));
    CHECK_THAT(g_functional(s, u0, mesh), WithinAbs(pi / 4.0, 1e-3));

    auto other = build_grid(GridMode::interval, {0.0, 1.0, 0.0, 1.0}, 128);
    CHECK_THROWS_MATCHES(g_functional(Field::zeros(other), eig, w), Error, kind_is(ErrorKind::shape));
}

TEST_CASE("condition (*) examples", "[diagnostics]") {
    auto g = build_grid(GridMode::interval, {0.0, 1.0, 0.0, 1.0}, 128);
    auto w = WeightSpec::constant();
    WeightedMesh mesh(g, w);
    EigenOptions opt;
    opt.tol = 1e-10;
    auto eig = smallest_eigenpair(mesh, 2.0, opt);
    CHECK(condition_star(eig.u0, eig, w, 2.0) == 0.0);

    // I(2 u0) = int |grad u0|^2 = lambda1 int u0^2
    const double value = condition_star(eig.u0.scaled(2.0), eig, w, 2.0);
    CHECK_THAT(value, WithinRel(mesh.dirichlet_integral(eig.u0.values, 2.0), 1e-12));
    double l2 = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) l2 += mesh.weighted_mass()[i] * eig.u0[i] * eig.u0[i];
    CHECK_THAT(value, WithinRel(eig.lambda1 * l2, 1e-8));
    CHECK(value > 0.0);

    // weighted, p = 3, smooth u: a finite number whose sign is only recorded
    auto r = build_grid(GridMode::radial, {0.0, 1.0, 0.0, 1.0}, 64, 2);
    auto eig3 = smallest_eigenpair(r, WeightSpec::power(1.0), 3.0, 1e-4);
    auto u = Field::from(r, [](const Point& x) { return 1.0 - x[0] * x[0]; });
    CHECK(std::isfinite(condition_star(u, eig3, WeightSpec::power(1.0), 3.0)));
}

TEST_CASE("Bernoulli closed form examples", "[diagnostics]") {
    auto a = bernoulli_blowup({0.0, 1.0, 2.0, 1.0});
    REQUIRE(a.blows_up);
    CHECK_THAT(*a.T, WithinAbs(1.0, 1e-12));
    CHECK_THAT(a(0.5), WithinRel(2.0, 1e-12));

    auto b = bernoulli_blowup({1.0, 1.0, 2.0, 2.0});
    REQUIRE(b.blows_up);
    CHECK_THAT(*b.T, WithinAbs(std::log(2.0), 1e-6));
    CHECK_THAT(*b.T, WithinRel(blowup_time_quadrature({1.0, 1.0, 2.0, 2.0}), 1e-8));

    auto c = bernoulli_blowup({1.0, 1.0, 2.0, 0.5});
    CHECK_FALSE(c.blows_up);
    CHECK_FALSE(c.T.has_value());
    CHECK(c(5.0) < c(1.0));
    CHECK(c(1.0) < 0.5);

    CHECK_FALSE(bernoulli_blowup({1.0, 1.0, 2.0, 0.0}).blows_up);
    CHECK_THROWS_MATCHES(bernoulli_blowup({1.0, 1.0, 1.0, 2.0}), Error, kind_is(ErrorKind::parameter));
}

TEST_CASE("Bernoulli closed form agrees with an adaptive integrator", "[diagnostics][property]") {
    Catch::SimplePcg32 rng(12345);
    std::uniform_real_distribution<double> lam(0.0, 10.0), cc(0.1, 10.0), sig(1.0 + 1e-3, 4.0), off(0.01, 0.5),
        coin(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        OdeParams q;
        q.lambda1 = lam(rng);
        q.C = cc(rng);
        q.sigma = sig(rng);
        const double eq = std::pow(q.lambda1 / q.C, 1.0 / (q.sigma - 1.0));
        const bool above = coin(rng) < 0.5;
        q.g0 = eq > 0.0 ? eq * (above ? 1.0 + off(rng) : 1.0 - off(rng)) : 0.1 + off(rng);
        auto sol = bernoulli_blowup(q);
        CHECK(sol.blows_up == (q.g0 > eq));
        const double t = sol.T ? 0.5 * *sol.T : std::min(1.0, 2.0 / q.lambda1);
        CHECK_THAT(sol(t), WithinRel(integrate_ode(q, t), 1e-6));
        if (sol.T && q.lambda1 > 0.0) CHECK_THAT(*sol.T, WithinRel(blowup_time_quadrature(q), 1e-6));
    }
}

TEST_CASE("blow-up thresholds", "[diagnostics]") {
    auto a = blowup_threshold(1.0, 1.0, 3.0);
    CHECK(a.operative == 1.0);
    CHECK(a.sigma_root == 1.0);
    auto b = blowup_threshold(4.0, 1.0, 2.0);
    CHECK_THAT(b.operative, WithinRel(4.0, 1e-15));
    CHECK_THAT(b.sigma_root, WithinRel(2.0, 1e-15));
    CHECK_THAT(blowup_threshold(1.0, 4.0, 2.0).operative, WithinRel(0.25, 1e-15));
    CHECK_THROWS_AS(blowup_threshold(1.0, 1.0, 1.0), Error);
    CHECK_THROWS_AS(blowup_threshold(0.0, 1.0, 2.0), Error);
}

TEST_CASE("operative threshold is the ODE equilibrium", "[diagnostics][property]") {
    Catch::SimplePcg32 rng(6);
    std::uniform_real_distribution<double> lam(0.1, 10.0), cc(0.1, 10.0), sig(1.1, 4.0);
    for (int i = 0; i < 50; ++i) {
        const double l = lam(rng), c = cc(rng), s = sig(rng);
        const double g = blowup_threshold(l, c, s).operative;
        CHECK_THAT(-l * g + c * std::pow(g, s), WithinAbs(0.0, 1e-10 * l * g));
        CHECK(bernoulli_blowup({l, c, s, g * 1.001}).blows_up);
        CHECK_FALSE(bernoulli_blowup({l, c, s, g * 0.999}).blows_up);
    }
}

TEST_CASE("exp-forced bound", "[diagnostics]") {
    CHECK_THAT(exp_forced_bound(1.0, 1.0, 2.0), WithinRel(1.0, 1e-15));
    CHECK_THAT(exp_forced_bound(2.0, 1.0, 3.0), WithinRel(0.125, 1e-15));
    // same as the lambda = 0 Bernoulli blow-up time
    CHECK_THAT(exp_forced_bound(0.7, 2.5, 2.5), WithinRel(*bernoulli_blowup({0.0, 2.5, 2.5, 0.7}).T, 1e-12));
    CHECK_THROWS_AS(exp_forced_bound(0.0, 1.0, 2.0), Error);
    CHECK_THROWS_AS(exp_forced_bound(1.0, 0.0, 2.0), Error);
    CHECK_THROWS_AS(exp_forced_bound(1.0, 1.0, 1.0), Error);
}

TEST_CASE("phi_r characteristic", "[diagnostics]") {
    auto g = build_grid(GridMode::radial, {0.0, 1.0, 0.0, 1.0}, 64, 2);
    auto w = WeightSpec::constant();
    auto ex = Exponents::of(2, 3.0, w);
    std::vector<Snapshot> zero{{0.0, Field::zeros(g)}};
    CHECK(phi_r_characteristic(zero, 0.5, 1.0, ex, w) == 0.0);

    std::vector<Snapshot> ones{{0.0, Field::from(g, [](const Point&) { return 1.0; })}};
    CHECK_THAT(phi_r_characteristic(ones, 0.5, 1.0, ex, w), WithinRel(8.0 * pi, 1e-10));

    auto is_unsup = kind_is(ErrorKind::unsupported);
    CHECK_THROWS_MATCHES(phi_r_characteristic(ones, 0.5, 1.0, Exponents::of(2, 2.0, w), w), Error, is_unsup);
    CHECK_THROWS_MATCHES(phi_r_characteristic({}, 0.5, 1.0, ex, w), Error, kind_is(ErrorKind::data));
}

TEST_CASE("phi_r on self-similar snapshots is finite and nonincreasing in r", "[diagnostics][property]") {
    auto g = build_grid(GridMode::radial, {0.0, 4.0, 0.0, 1.0}, 128, 2);
    auto w = WeightSpec::constant();
    auto ex = Exponents::of(2, 3.0, w);
    std::vector<Snapshot> snaps;
    for (double t : {1.0, 2.0, 4.0})
        snaps.push_back({t, Field::from(g, [&](const Point& x) {
                             return exact_profile(ExactVariant::self_similar, x[0], t, ex);
                         })});
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double v = phi_r_characteristic(snaps, r, 4.0, ex, w);
        CHECK(std::isfinite(v));
        CHECK(v <= prev);
        prev = v;
    }
    // positively homogeneous of degree one
    auto doubled = snaps;
    for (auto& s : doubled) s.u = s.u.scaled(2.0);
    CHECK(phi_r_characteristic(doubled, 0.5, 4.0, ex, w) == 2.0 * phi_r_characteristic(snaps, 0.5, 4.0, ex, w));
    // later snapshots are ignored before their time
    CHECK(phi_r_characteristic(snaps, 0.5, 1.5, ex, w) <= phi_r_characteristic(snaps, 0.5, 4.0, ex, w));
}

TEST_CASE("triple norm", "[diagnostics]") {
    auto g = build_grid(GridMode::radial, {0.0, 1.0, 0.0, 1.0}, 64, 2);
    auto w = WeightSpec::constant();
    auto ex = Exponents::of(2, 3.0, w);
    CHECK(ex.k() == 5.0);
    CHECK(triple_norm(Field::zeros(g), 0.5, ex, w) == 0.0);
    auto ones = Field::from(g, [](const Point&) { return 1.0; });
    // rho^{-5} * pi * pi rho^2 = pi^2 rho^{-3}, largest at rho = 1/2
    CHECK_THAT(triple_norm(ones, 0.5, ex, w), WithinRel(8.0 * pi * pi, 1e-10));
    auto bump = Field::from(g, [](const Point& x) { return 1.0 - x[0] * x[0]; });
    CHECK(triple_norm(bump.scaled(2.0), 0.5, ex, w) == 2.0 * triple_norm(bump, 0.5, ex, w));
    CHECK_THROWS_AS(triple_norm(ones, 0.5, Exponents::of(2, 2.0, w), w), Error);
    CHECK_THROWS_AS(triple_norm(ones, 2.0, ex, w), Error);
}

TEST_CASE("exact profile examples", "[diagnostics]") {
    auto ex = Exponents::of(2, 3.0, WeightSpec::constant());
    for (double t : {0.1, 1.0, 7.0}) CHECK(barenblatt_exact({0.0, 0.0}, t, ex) == 1.0);
    const double rf_coeff = std::pow(3.0 * std::sqrt(2.5), 2.0 / 3.0);
    CHECK_THAT(rf_coeff, WithinAbs(2.8231, 1e-4));
    for (double t : {0.5, 1.0, 3.0}) {
        const double rf = front_radius(ExactVariant::verbatim, t, ex);
        CHECK_THAT(rf, WithinRel(rf_coeff * std::pow(t, 0.2), 1e-12));
        CHECK(barenblatt_exact({rf * 1.001, 0.0}, t, ex) == 0.0);
        CHECK(barenblatt_exact({0.0, rf * 0.999}, t, ex) > 0.0);
    }
    CHECK_THROWS_MATCHES(barenblatt_exact({0.0, 0.0}, 0.0, ex), Error, kind_is(ErrorKind::out_of_range));
    CHECK_THROWS_AS(barenblatt_exact({0.0, 0.0}, -1.0, ex), Error);
    // amplitude-carrying variants
    CHECK_THAT(exact_profile(ExactVariant::self_similar, 0.0, 32.0, ex), WithinRel(std::pow(32.0, -0.4), 1e-14));
    CHECK_THAT(exact_profile(ExactVariant::amplitude_corrected, 0.0, 32.0, ex), WithinRel(std::pow(32.0, -0.4), 1e-14));
}

TEST_CASE("exact profile depends on x and t only through |x| t^{-1/beta}", "[diagnostics][property]") {
    Catch::SimplePcg32 rng(21);
    std::uniform_real_distribution<double> d(0.0, 3.0), ts(0.2, 5.0), sc(0.5, 2.0);
    for (double theta : {0.0, 1.0}) {
        auto ex = ex3(2, theta);
        const double b = ex.beta();
        for (int i = 0; i < 100; ++i) {
            Point x{d(rng), d(rng)};
            const double t = ts(rng), s = sc(rng);
            Point y{x[0] * std::pow(s, 1.0 / b), x[1] * std::pow(s, 1.0 / b)};
            CHECK_THAT(barenblatt_exact(y, s * t, ex), WithinAbs(barenblatt_exact(x, t, ex), 1e-12));
        }
    }
}

TEST_CASE("exact profile is radially nonincreasing and its support expands", "[diagnostics][property]") {
    for (double theta : {0.0, 1.0}) {
        auto ex = ex3(2, theta);
        for (double t : {0.5, 1.0, 2.0}) {
            double prev = 2.0;
            for (double r = 0.0; r < 5.0; r += 0.01) {
                const double v = barenblatt_exact({r, 0.0}, t, ex);
                CHECK(v <= prev);
                CHECK(v >= 0.0);
                prev = v;
            }
        }
        for (double r : {0.3, 1.0, 2.0}) {
            double prev = 0.0;
            for (double t = 0.1; t < 10.0; t *= 1.3) {
                const double v = barenblatt_exact({r, 0.0}, t, ex);
                CHECK(v >= prev);
                prev = v;
            }
        }
    }
}

TEST_CASE("residual check on known candidates", "[diagnostics]") {
    auto g = build_grid(GridMode::interval, {0.0, 1.0, 0.0, 1.0}, 32);
    WeightedMesh mesh(g, WeightSpec::constant());
    CHECK(residual_check([](const Point&, double) { return 0.0; }, mesh, 2.0, {0.1, 0.2}) == 0.0);

    auto heat = [](const Point& x, double t) { return std::exp(-pi * pi * t) * std::sin(pi * x[0]); };
    std::vector<double> res;
    for (int n : {16, 32, 64, 128}) {
        auto gi = build_grid(GridMode::interval, {0.0, 1.0, 0.0, 1.0}, n);
        res.push_back(residual_check(heat, WeightedMesh(gi, WeightSpec::constant()), 2.0, {0.05, 0.1}));
    }
    for (std::size_t i = 1; i < res.size(); ++i) CHECK(res[i] < res[i - 1] / 3.0);
}

TEST_CASE("only the derived self-similar profile has a vanishing residual in the plane", "[diagnostics]") {
    const auto w = WeightSpec::power(1.0);
    auto ex = Exponents::of(2, 3.0, w);
    auto residuals = [&](ExactVariant v) {
        std::vector<double> out;
        for (int n : {64, 128, 256}) {
            auto g = build_grid(GridMode::radial, {0.0, 10.0, 0.0, 1.0}, n, 2);
            out.push_back(residual_check([&](const Point& x, double t) { return exact_profile(v, x[0], t, ex); },
                                         WeightedMesh(g, w), 3.0, {1.0, 2.0, 4.0}));
        }
        return out;
    };
    auto ss = residuals(ExactVariant::self_similar);
    CHECK(ss[0] / ss[1] >= 1.5);
    CHECK(ss[1] / ss[2] >= 1.5);
    for (auto v : {ExactVariant::verbatim, ExactVariant::amplitude_corrected}) {
        auto r = residuals(v);
        CHECK(r[2] > 0.1);
        CHECK(r[1] / r[2] < 1.5);
    }
}

TEST_CASE("amplitude-corrected profile is exact in one dimension", "[diagnostics]") {
    // theta_w = 1 keeps the profile Lipschitz at the origin, so the max-norm residual converges
    const auto w = WeightSpec::power(1.0);
    auto ex = Exponents::of(1, 3.0, w);
    std::vector<double> res;
    for (int n : {64, 128, 256}) {
        auto g = build_grid(GridMode::radial, {0.0, 6.0, 0.0, 1.0}, n, 1);
        res.push_back(residual_check(
            [&](const Point& x, double t) { return exact_profile(ExactVariant::amplitude_corrected, x[0], t, ex); },
            WeightedMesh(g, w), 3.0, {1.0, 2.0}));
    }
    CHECK(res[0] / res[1] >= 1.5);
    CHECK(res[1] / res[2] >= 1.5);
}

TEST_CASE("power-law and exponential fits", "[diagnostics]") {
    std::vector<double> t, v, e;
    for (double s = 1.0; s <= 10.0; s += 0.5) {
        t.push_back(s);
        v.push_back(3.0 * std::pow(s, -0.4));
        e.push_back(2.0 * std::exp(-pi * pi * s));
    }
    auto f = decay_exponent_fit(series(t, v), 1.0, 10.0);
    CHECK_THAT(f.value, WithinAbs(-0.4, 1e-6));
    CHECK(f.samples == t.size());
    auto r = exponential_rate_fit(series(t, e), 1.0, 10.0);
    CHECK_THAT(r.value, WithinRel(-pi * pi, 1e-9));

    CHECK_THROWS_MATCHES(decay_exponent_fit(series(t, v), 1.0, 2.0), Error, kind_is(ErrorKind::fit));
    auto with_zero = v;
    with_zero[3] = 0.0;
    CHECK_THROWS_MATCHES(decay_exponent_fit(series(t, with_zero), 1.0, 10.0), Error, kind_is(ErrorKind::fit));
}

TEST_CASE("self-similar sup norms decay like t^{-n/beta}", "[diagnostics]") {
    for (double theta : {0.0, 1.0}) {
        auto ex = ex3(2, theta);
        std::vector<double> t, v;
        for (double s = 1.0; s <= 10.0; s += 0.25) {
            t.push_back(s);
            v.push_back(exact_profile(ExactVariant::self_similar, 0.0, s, ex));
        }
        CHECK_THAT(decay_exponent_fit(series(t, v), 1.0, 10.0).value, WithinAbs(-2.0 / ex.beta(), 1e-9));
    }
}

TEST_CASE("heat run has exponential rate pi^2", "[diagnostics]") {
    ProblemSpec s;
    s.grid = build_grid(GridMode::interval, {0.0, 1.0, 0.0, 1.0}, 128);
    s.initial = Field::from(s.grid, [](const Point& x) { return std::sin(pi * x[0]); });
    s.initial.apply_dirichlet();
    s.t_end = 1.5;
    auto out = run_simulation(s);
    CHECK_THAT(exponential_rate_fit(out.trajectory, 0.5, 1.5).value, WithinRel(-pi * pi, 0.05));
}

TEST_CASE("comparison constant is recovered from an implicit-Euler g series", "[diagnostics]") {
    const double lambda = 9.87, C = 1.3, sigma = 2.0, dt = 1e-4;
    Trajectory tr;
    double g = 12.0, t = 0.0;
    tr.samples.push_back({t, 0.0, 0.0, 0.0, g, 0.0, 0.0, 0});
    for (int k = 0; k < 12; ++k) {
        // solve x (1 + dt lambda) - dt C x^sigma = g by Newton
        double x = g;
        for (int it = 0; it < 50; ++it) {
            const double f = x * (1.0 + dt * lambda) - dt * C * std::pow(x, sigma) - g;
            const double df = 1.0 + dt * lambda - dt * C * sigma * std::pow(x, sigma - 1.0);
            x -= f / df;
        }
        g = x;
        t += dt;
        tr.samples.push_back({t, dt, 0.0, 0.0, g, 0.0, 0.0, 1});
    }
    auto f = fit_comparison_constant(tr, lambda, sigma);
    CHECK_THAT(f.value, WithinRel(C, 1e-9));
    CHECK(f.samples == 8);

    // psi = g e^{lambda t} obeying psi' = C8 psi^sigma
    Trajectory ef;
    double psi = 0.5;
    t = 0.0;
    ef.samples.push_back({t, 0.0, 0.0, 0.0, psi, 0.0, 0.0, 0});
    for (int k = 0; k < 10; ++k) {
        const double prev = psi;
        double x = psi;
        for (int it = 0; it < 50; ++it) x -= (x - dt * 4.0 * x * x - prev) / (1.0 - 8.0 * dt * x);
        psi = x;
        t += dt;
        ef.samples.push_back({t, dt, 0.0, 0.0, psi * std::exp(-lambda * t), 0.0, 0.0, 1});
    }
    CHECK_THAT(fit_exp_forced_constant(ef, lambda, 2.0).value, WithinRel(4.0, 1e-9));
}

TEST_CASE("measured g stays above the fitted comparison solution", "[diagnostics][property]") {
    ProblemSpec s;
    s.grid = build_grid(GridMode::interval, {0.0, 1.0, 0.0, 1.0}, 128);
    s.reaction = ReactionSpec::power(1.0, 2.0);
    s.initial = Field::from(s.grid, [](const Point& x) { return 100.0 * std::sin(pi * x[0]); });
    s.initial.apply_dirichlet();
    s.t_end = 1.0;
    auto out = run_simulation(s);
    REQUIRE(out.kind == OutcomeKind::blowup);
    auto eig = smallest_eigenpair(WeightedMesh(s.grid, s.weight), 2.0);
    auto fit = fit_comparison_constant(out.trajectory, eig.lambda1, 2.0);
    auto sol = bernoulli_blowup({eig.lambda1, fit.value, 2.0, out.trajectory.samples.front().g});
    REQUIRE(sol.blows_up);
    for (const auto& smp : out.trajectory.samples) {
        if (smp.t >= *sol.T) break;
        CHECK(smp.g >= 0.95 * sol(smp.t));
    }
    CHECK(out.blowup.T_est <= 1.05 * *sol.T);
}
