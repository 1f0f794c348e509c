#pragma once

// Backward-Euler time stepping for u_t = div(omega |grad u|^{p-2} grad u) + f
// with Dirichlet data, adaptive step control and blow-up classification.

#include "discretization.hpp"
#include "eigensolver.hpp"
#include "error.hpp"
#include "plap.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace degenflow {

struct StepControls {
    double dt_min = 1e-12;
    double dt_max = 1e-3;
    double u_cap = 0.0;  // 0 selects 1e8 * sup|phi|
    double newton_tol = 1e-10;
    int newton_max = 30;
    double eps_reg = 0.0;
    double max_rel_change = 0.01;  // larger sup-norm changes reject the step
    double decay_fraction = 1e-8;
    long max_steps = 5'000'000;
    double growth = 1.2;
    int easy_iterations = 4;
    int hard_iterations = 10;
    int blowup_window = 10;
    double wall_budget_seconds = 0.0;  // 0 = unlimited
};

struct ProblemSpec {
    GridPtr grid;
    WeightSpec weight;
    double p = 2.0;
    ReactionSpec reaction;
    Field initial;
    double t_start = 0.0;
    double t_end = 1.0;
    double dt0 = 1e-3;
    StepControls controls;
    std::vector<double> snapshot_times;
    bool snapshot_every_step = false;
    std::optional<Field> g_kernel;  // u0 with unit mass; computed when absent

    double resolved_u_cap() const {
        return controls.u_cap > 0.0 ? controls.u_cap : 1e8 * initial.sup_abs();
    }

    void validate() const {
        require(grid != nullptr, ErrorKind::config, "problem has no grid");
        require_degenerate_range(p);
        reaction.validate();
        require(initial.grid && initial.size() == grid->size(), ErrorKind::shape,
                "initial data does not match the grid");
        require(initial.finite(), ErrorKind::numerical, "initial data is not finite");
        require(initial.satisfies_dirichlet(), ErrorKind::config,
                "initial data must vanish on the Dirichlet boundary");
        require(t_end > t_start, ErrorKind::config, "t_end must exceed the start time");
        require(controls.dt_min > 0.0 && controls.dt_min <= dt0 && dt0 <= controls.dt_max, ErrorKind::config,
                "need 0 < dt_min <= dt0 <= dt_max");
        require(controls.newton_tol > 0.0 && controls.newton_max > 0, ErrorKind::config,
                "invalid Newton controls");
        if (controls.u_cap > 0.0)
            require(controls.u_cap > initial.sup_abs(), ErrorKind::config, "u_cap must exceed sup|phi|");
        if (weight.kind == WeightSpec::Kind::power)
            require(weight.exponent >= 0.0 && weight.exponent < p, ErrorKind::config,
                    "power weight exponent must lie in [0, p)");
        const int n = grid->dimension;
        require(weight.mu(n) < 1.0 + p / n, ErrorKind::config, "doubling exponent must satisfy mu < 1 + p/n");
        if (g_kernel) require(g_kernel->size() == grid->size(), ErrorKind::shape, "g kernel does not match grid");
    }
};

struct TrajectorySample {
    double t = 0.0;
    double dt = 0.0;
    double sup_abs_u = 0.0;
    double mass = 0.0;
    double g = 0.0;
    double energy = 0.0;
    double step_change_sq = 0.0;  // ||u_k - u_{k-1}||^2 in the lumped L2 norm
    int newton_iterations = 0;
};

struct Snapshot {
    double t = 0.0;
    Field u;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    std::vector<Snapshot> snapshots;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    const TrajectorySample& back() const { return samples.back(); }

    std::vector<double> times() const {
        std::vector<double> v;
        for (const auto& s : samples) v.push_back(s.t);
        return v;
    }
    std::vector<double> sup_norms() const {
        std::vector<double> v;
        for (const auto& s : samples) v.push_back(s.sup_abs_u);
        return v;
    }
    std::vector<double> g_values() const {
        std::vector<double> v;
        for (const auto& s : samples) v.push_back(s.g);
        return v;
    }
};

struct BlowupEstimate {
    double T_est = 0.0;
    double T_lo = 0.0;
    double T_hi = 0.0;
    bool fit_ok = false;
};

enum class OutcomeKind { completed, decayed, blowup };

inline const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::completed: return "Completed";
        case OutcomeKind::decayed: return "Decayed";
        case OutcomeKind::blowup: return "BlowUp";
    }
    return "?";
}

struct RunStats {
    long steps = 0;
    long rejected = 0;
    long newton_iterations_total = 0;
    long picard_steps = 0;
    double eps_reg = 0.0;
    bool budget_exhausted = false;
    bool step_limit_reached = false;
    double min_dt = std::numeric_limits<double>::infinity();
};

struct RunOutcome {
    OutcomeKind kind = OutcomeKind::completed;
    double rate_fit = 0.0;  // decayed: fitted exponential rate
    double rate_stderr = 0.0;
    BlowupEstimate blowup;
    Trajectory trajectory;
    Field final_state;
    RunStats stats;
};

/// Numerical failure during a run; carries the trajectory computed so far.
class SimulationError : public Error {
public:
    SimulationError(ErrorKind kind, const std::string& what, Trajectory partial)
        : Error(kind, what), partial_(std::move(partial)) {}
    const Trajectory& partial() const { return partial_; }

private:
    Trajectory partial_;
};

struct StepResult {
    Field u;
    bool converged = false;
    int iterations = 0;
    bool used_picard = false;
    double residual = 0.0;
};

namespace detail {

// Ordinary least squares y = a + b x with standard errors.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double se_intercept = 0.0;
    double se_slope = 0.0;
    double cov = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    require(n >= 2 && y.size() == n, ErrorKind::fit, "line fit needs >= 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, ErrorKind::fit, "line fit with degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = y[i] - f.intercept - f.slope * x[i];
            ssr += r * r;
        }
        double s2 = ssr / (n - 2);
        f.se_slope = std::sqrt(s2 / sxx);
        f.se_intercept = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
        f.cov = -mx * s2 / sxx;
    }
    return f;
}

}  // namespace detail

/// Extrapolates the blow-up time from the tail of a trajectory, assuming
/// sup|u| ~ (T - t)^{-1/(sigma-1)}: fits sup|u|^{-(sigma-1)} linearly in t.
inline BlowupEstimate estimate_blowup_time(const Trajectory& traj, double sigma, std::size_t tail = 8,
                                           double t_end = std::numeric_limits<double>::infinity()) {
    require(sigma > 1.0, ErrorKind::parameter, "sigma must be > 1");
    require(!traj.empty(), ErrorKind::data, "empty trajectory");
    const double last = traj.back().t;
    BlowupEstimate fail{last, last, std::isfinite(t_end) ? t_end : last, false};
    const std::size_t n = traj.size();
    std::size_t k = std::min(tail, n);
    if (k < 5) return fail;
    std::vector<double> x, y;
    for (std::size_t i = n - k; i < n; ++i) {
        if (i > n - k && !(traj.samples[i].sup_abs_u > traj.samples[i - 1].sup_abs_u)) return fail;
        x.push_back(traj.samples[i].t);
        y.push_back(std::pow(traj.samples[i].sup_abs_u, -(sigma - 1.0)));
    }
    auto f = detail::fit_line(x, y);
    if (!(f.slope < 0.0)) return fail;
    double T = -f.intercept / f.slope;
    // delta method on T = -a/b
    double da = -1.0 / f.slope, db = f.intercept / (f.slope * f.slope);
    double var = da * da * f.se_intercept * f.se_intercept + db * db * f.se_slope * f.se_slope +
                 2.0 * da * db * f.cov;
    double se = std::sqrt(std::max(var, 0.0));
    BlowupEstimate est;
    est.fit_ok = true;
    est.T_lo = last;
    est.T_est = std::max(T, last);
    est.T_hi = std::min(est.T_est + se, t_end);
    est.T_est = std::min(est.T_est, est.T_hi);
    return est;
}

/// Owns the weighted mesh and linear-algebra scaffolding for one problem.
class TimeStepper {
public:
    explicit TimeStepper(const ProblemSpec& spec)
        : spec_(spec), mesh_(spec.grid, spec.weight), idx_(*spec.grid) {
        spec_.validate();
    }

    const WeightedMesh& mesh() const { return mesh_; }
    const ProblemSpec& spec() const { return spec_; }

    /// One backward-Euler step: damped Newton, Picard fallback.
    StepResult try_step(const Field& u_old, double t, double dt) const {
        const Grid& g = *spec_.grid;
        const auto& ctl = spec_.controls;
        const std::size_t nf = idx_.count();
        const double t_new = t + dt;
        const double p = spec_.p;

        StepResult res;
        res.u = u_old;
        Field& v = res.u;
        v.apply_dirichlet();

        auto residual = [&](const Field& w, Eigen::VectorXd& r) {
            auto grad = energy_gradient(w.values, mesh_, p, ctl.eps_reg);
            r.resize(static_cast<Eigen::Index>(nf));
            for (std::size_t k = 0; k < nf; ++k) {
                std::size_t i = idx_.node(k);
                double m = g.mass[i];
                r[k] = m * (w.values[i] - u_old.values[i]) +
                       dt * (grad[i] - m * spec_.reaction.value(t_new, w.values[i]));
            }
        };
        auto scaled_norm = [&](const Eigen::VectorXd& r, const Field& w) {
            double scale = std::max({u_old.sup_abs(), w.sup_abs(), 1e-300});
            double m = 0.0;
            for (std::size_t k = 0; k < nf; ++k) m = std::max(m, std::abs(r[k]) / g.mass[idx_.node(k)]);
            return m / scale;
        };

        Eigen::VectorXd r, r_trial;
        std::vector<double> diag(nf);
        Field trial = v;
        for (int it = 0; it <= ctl.newton_max; ++it) {
            residual(v, r);
            res.residual = scaled_norm(r, v);
            res.iterations = it;
            if (!std::isfinite(res.residual)) return res;
            if (res.residual <= ctl.newton_tol) {
                res.converged = true;
                return res;
            }
            if (it == ctl.newton_max) break;
            if (!res.used_picard) {
                for (std::size_t k = 0; k < nf; ++k) {
                    std::size_t i = idx_.node(k);
                    diag[k] = g.mass[i] * (1.0 - dt * spec_.reaction.derivative(t_new, v.values[i]));
                }
                SparseMatrix jac = assemble_system(v.values, mesh_, p, ctl.eps_reg, idx_, diag, dt, true);
                Eigen::SparseLU<SparseMatrix> lu;
                lu.compute(jac);
                bool accepted = false;
                if (lu.info() == Eigen::Success) {
                    Eigen::VectorXd delta = lu.solve(-r);
                    double alpha = 1.0;
                    for (int damp = 0; damp <= 3 && delta.allFinite(); ++damp, alpha *= 0.5) {
                        for (std::size_t k = 0; k < nf; ++k)
                            trial.values[idx_.node(k)] = v.values[idx_.node(k)] + alpha * delta[k];
                        residual(trial, r_trial);
                        double rn = scaled_norm(r_trial, trial);
                        if (std::isfinite(rn) && rn < (1.0 - 1e-4 * alpha) * res.residual) {
                            accepted = true;
                            break;
                        }
                    }
                }
                if (accepted) {
                    std::swap(v.values, trial.values);
                    trial.values = v.values;
                    continue;
                }
                res.used_picard = true;
            }
            // Picard: lagged |grad u|^{p-2} coefficient and reaction
            for (std::size_t k = 0; k < nf; ++k) diag[k] = g.mass[idx_.node(k)];
            SparseMatrix k_mat = assemble_system(v.values, mesh_, p, ctl.eps_reg, idx_, diag, dt, false);
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(nf));
            for (std::size_t k = 0; k < nf; ++k) {
                std::size_t i = idx_.node(k);
                rhs[k] = g.mass[i] * (u_old.values[i] + dt * spec_.reaction.value(t_new, v.values[i]));
            }
            Eigen::SparseLU<SparseMatrix> lu;
            lu.compute(k_mat);
            if (lu.info() != Eigen::Success) return res;
            Eigen::VectorXd sol = lu.solve(rhs);
            if (!sol.allFinite()) return res;
            for (std::size_t k = 0; k < nf; ++k) v.values[idx_.node(k)] = sol[k];
        }
        return res;
    }

    double mass(const Field& u) const {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += spec_.grid->mass[i] * u.values[i];
        return s;
    }

    double g_functional(const Field& u, const Field& kernel) const {
        auto wm = mesh_.weighted_mass();
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += wm[i] * kernel.values[i] * u.values[i];
        return s;
    }

    double energy_of(const Field& u) const { return mesh_.dirichlet_integral(u.values, spec_.p, spec_.controls.eps_reg) / spec_.p; }

    double change_sq(const Field& a, const Field& b) const {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double d = a.values[i] - b.values[i];
            s += spec_.grid->mass[i] * d * d;
        }
        return s;
    }

private:
    ProblemSpec spec_;
    WeightedMesh mesh_;
    FreeIndex idx_;
};

/// Single backward-Euler step; throws ErrorKind::step_failure if the nonlinear
/// solve does not converge.
inline Field step_implicit(const Field& u, double t, double dt, const ProblemSpec& spec) {
    require(u.finite(), ErrorKind::numerical, "state is not finite");
    require(dt >= spec.controls.dt_min && dt <= spec.controls.dt_max, ErrorKind::parameter,
            "dt outside [dt_min, dt_max]");
    TimeStepper stepper(spec);
    StepResult r = stepper.try_step(u, t, dt);
    if (!r.converged)
        throw Error(ErrorKind::step_failure, "implicit step did not converge (residual " +
                                                 std::to_string(r.residual) + ")");
    return r.u;
}

/// Unit-mass principal eigenfunction of the problem's operator.
inline Field default_g_kernel(const ProblemSpec& spec) {
    EigenOptions opt;
    opt.normalization = Normalization::unit_mass;
    return smallest_eigenpair(WeightedMesh(spec.grid, spec.weight), spec.p, opt).u0;
}

/// Exponential decay rate fitted to log sup|u| over the later half of the run.
inline detail::LineFit fit_decay_rate(const Trajectory& traj) {
    require(traj.size() >= 2, ErrorKind::fit, "trajectory too short for a rate fit");
    double t0 = traj.samples.front().t, t1 = traj.back().t;
    double mid = 0.5 * (t0 + t1);
    std::vector<double> x, y;
    for (const auto& s : traj.samples)
        if (s.t >= mid && s.sup_abs_u > 0.0) {
            x.push_back(s.t);
            y.push_back(std::log(s.sup_abs_u));
        }
    if (x.size() < 5) {
        x.clear();
        y.clear();
        for (const auto& s : traj.samples)
            if (s.sup_abs_u > 0.0) {
                x.push_back(s.t);
                y.push_back(std::log(s.sup_abs_u));
            }
    }
    return detail::fit_line(x, y);
}

inline RunOutcome run_simulation(const ProblemSpec& spec_in) {
    ProblemSpec spec = spec_in;
    spec.validate();
    if (!spec.g_kernel) spec.g_kernel = default_g_kernel(spec);
    TimeStepper stepper(spec);
    const auto& ctl = spec.controls;
    const auto clock_start = std::chrono::steady_clock::now();

    RunOutcome out;
    out.stats.eps_reg = ctl.eps_reg;
    Trajectory& traj = out.trajectory;
    Field u = spec.initial;
    const double sup0 = u.sup_abs();
    const double u_cap = spec.resolved_u_cap();
    const Field& kernel = *spec.g_kernel;

    auto record = [&](double t, double dt, const Field& state, double change_sq, int iters) {
        TrajectorySample s;
        s.t = t;
        s.dt = dt;
        s.sup_abs_u = state.sup_abs();
        s.mass = stepper.mass(state);
        s.g = stepper.g_functional(state, kernel);
        s.energy = stepper.energy_of(state);
        s.step_change_sq = change_sq;
        s.newton_iterations = iters;
        traj.samples.push_back(s);
    };

    std::vector<double> pending = spec.snapshot_times;
    std::sort(pending.begin(), pending.end());
    std::size_t next_snap = 0;
    while (next_snap < pending.size() && pending[next_snap] < spec.t_start) ++next_snap;
    auto take_snapshots = [&](double t, const Field& state) {
        if (spec.snapshot_every_step) {
            traj.snapshots.push_back({t, state});
            return;
        }
        while (next_snap < pending.size() && pending[next_snap] <= t * (1.0 + 1e-12) + 1e-14) {
            traj.snapshots.push_back({t, state});
            ++next_snap;
        }
    };

    double t = spec.t_start;
    double dt = spec.dt0;
    record(t, 0.0, u, 0.0, 0);
    take_snapshots(t, u);
    if (sup0 == 0.0) {
        out.kind = OutcomeKind::decayed;
        out.final_state = u;
        return out;
    }

    auto growing_tail = [&] {
        const std::size_t w = static_cast<std::size_t>(ctl.blowup_window);
        if (traj.size() < w + 1) return false;
        for (std::size_t i = traj.size() - w; i < traj.size(); ++i)
            if (!(traj.samples[i].sup_abs_u > traj.samples[i - 1].sup_abs_u)) return false;
        return true;
    };
    auto finish_blowup = [&] {
        out.kind = OutcomeKind::blowup;
        out.blowup = estimate_blowup_time(traj, spec.reaction.family == ReactionSpec::Family::none
                                                     ? 2.0
                                                     : spec.reaction.sigma,
                                          8, spec.t_end);
    };

    const double t_eps = 1e-12 * std::max(1.0, std::abs(spec.t_end));
    while (t < spec.t_end - t_eps) {
        if (out.stats.steps >= ctl.max_steps) {
            out.stats.step_limit_reached = true;
            break;
        }
        if (ctl.wall_budget_seconds > 0.0) {
            double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
            if (el > ctl.wall_budget_seconds) {
                out.stats.budget_exhausted = true;
                break;
            }
        }
        double dt_try = std::min(dt, spec.t_end - t);
        if (!spec.snapshot_every_step && next_snap < pending.size() && pending[next_snap] > t)
            dt_try = std::min(dt_try, pending[next_snap] - t);
        const bool at_min = dt_try <= ctl.dt_min * (1.0 + 1e-9);

        StepResult step = stepper.try_step(u, t, dt_try);
        out.stats.newton_iterations_total += step.iterations;
        double rel = 0.0;
        if (step.converged && step.u.finite()) {
            double du = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) du = std::max(du, std::abs(step.u.values[i] - u.values[i]));
            rel = du / std::max(u.sup_abs(), 1e-300);
        }
        const bool ok = step.converged && step.u.finite() && (rel <= ctl.max_rel_change || at_min);
        if (!ok) {
            ++out.stats.rejected;
            if (at_min) {
                if (growing_tail()) {
                    finish_blowup();
                    break;
                }
                out.final_state = u;
                throw SimulationError(ErrorKind::numerical,
                                      "implicit step failed at dt_min = " + std::to_string(ctl.dt_min) +
                                          " at t = " + std::to_string(t),
                                      traj);
            }
            dt = std::max(0.5 * dt_try, ctl.dt_min);
            continue;
        }

        double change = stepper.change_sq(step.u, u);
        u = std::move(step.u);
        t += dt_try;
        ++out.stats.steps;
        if (step.used_picard) ++out.stats.picard_steps;
        out.stats.min_dt = std::min(out.stats.min_dt, dt_try);
        record(t, dt_try, u, change, step.iterations);
        take_snapshots(t, u);

        const double sup = traj.back().sup_abs_u;
        if (!std::isfinite(sup))
            throw SimulationError(ErrorKind::numerical, "non-finite state at t = " + std::to_string(t), traj);
        if (sup >= u_cap) {
            finish_blowup();
            break;
        }
        if (sup < ctl.decay_fraction * sup0) {
            out.kind = OutcomeKind::decayed;
            break;
        }
        // step-size control; clipped steps (snapshots, t_end) leave dt alone
        if (step.used_picard || step.iterations >= ctl.hard_iterations)
            dt = std::max(0.5 * dt, ctl.dt_min);
        else if (step.iterations <= ctl.easy_iterations && rel <= 0.5 * ctl.max_rel_change &&
                 dt_try >= dt * (1.0 - 1e-12))
            dt = std::min(dt * ctl.growth, ctl.dt_max);
    }

    if (out.kind == OutcomeKind::decayed) {
        auto f = fit_decay_rate(traj);
        out.rate_fit = -f.slope;
        out.rate_stderr = f.se_slope;
    }
    out.final_state = u;
    return out;
}

}  // namespace degenflow
