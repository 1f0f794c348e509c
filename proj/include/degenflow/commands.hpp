#pragma once

// Experiment orchestration behind the degenflow command line.

#include "config.hpp"
#include "diagnostics.hpp"
#include "discretization.hpp"
#include "eigensolver.hpp"
#include "timestepper.hpp"
#include "weight.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace degenflow::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_undecided = 4 };

inline int exit_code_for(ErrorKind k) { return k == ErrorKind::config ? exit_config : exit_numerical; }

inline Json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

// ---------------------------------------------------------------------------
// Building problem objects from a configuration

inline GridPtr grid_from(const ExperimentConfig& cfg, std::optional<int> resolution = std::nullopt) {
    const std::string mode = cfg.text("problem.grid");
    GridExtent ext{cfg.real("problem.x0"), cfg.real("problem.x1"), cfg.real("problem.y0"), cfg.real("problem.y1")};
    const int res = resolution ? *resolution : static_cast<int>(cfg.integer("problem.resolution"));
    if (mode == "radial") return build_grid(GridMode::radial, ext, res, static_cast<int>(cfg.integer("problem.dimension")));
    if (mode == "tensor2d") return build_grid(GridMode::tensor2d, ext, res, 2);
    return build_grid(GridMode::interval, ext, res, 1);
}

inline WeightSpec weight_from(const ExperimentConfig& cfg) {
    const std::string kind = cfg.text("problem.weight");
    WeightSpec w;
    if (kind == "power")
        w = WeightSpec::power(cfg.real("problem.theta_w"));
    else if (kind == "tabulated")
        w = load_tabulated_weight(cfg.text("problem.weight_file"));
    w.muckenhoupt_exponent = cfg.real("problem.muckenhoupt_exponent");
    if (auto mu = cfg.real_or_auto("problem.mu")) w.doubling_exponent = *mu;
    return w;
}

inline EigenOptions eigen_options_from(const ExperimentConfig& cfg) {
    EigenOptions opt;
    if (auto tol = cfg.real_or_auto("eigen.tol")) opt.tol = *tol;
    opt.max_iterations = static_cast<int>(cfg.integer("eigen.max_iterations"));
    opt.normalization =
        cfg.text("eigen.normalization") == "unit_p_norm" ? Normalization::unit_p_norm : Normalization::unit_mass;
    return opt;
}

/// Problem with everything but the eigenpair-dependent pieces resolved; those
/// use `eig` (computed on demand when null).
inline ProblemSpec problem_from(const ExperimentConfig& cfg, const EigenPair* eig = nullptr,
                                std::optional<int> resolution = std::nullopt) {
    ProblemSpec s;
    s.grid = grid_from(cfg, resolution);
    s.weight = weight_from(cfg);
    s.p = cfg.real("problem.p");
    s.t_start = cfg.real("problem.t_start");
    s.t_end = cfg.real("problem.t_end");
    s.dt0 = cfg.real("problem.dt0");
    auto& c = s.controls;
    c.dt_min = cfg.real("problem.dt_min");
    c.dt_max = cfg.real("problem.dt_max");
    c.u_cap = cfg.real_or_auto("problem.u_cap").value_or(0.0);
    c.newton_tol = cfg.real("problem.newton_tol");
    c.newton_max = static_cast<int>(cfg.integer("problem.newton_max"));
    c.eps_reg = cfg.real("problem.eps_reg");
    c.max_rel_change = cfg.real("problem.max_rel_change");
    c.decay_fraction = cfg.real("problem.decay_fraction");
    c.wall_budget_seconds = cfg.real("problem.wall_budget");
    s.snapshot_times = cfg.real_list("problem.snapshot_times");

    std::optional<EigenPair> local;
    auto eigenpair = [&]() -> const EigenPair& {
        if (eig) return *eig;
        if (!local) {
            EigenOptions opt = eigen_options_from(cfg);
            opt.normalization = Normalization::unit_mass;
            local = smallest_eigenpair(WeightedMesh(s.grid, s.weight), s.p, opt);
        }
        return *local;
    };

    const std::string reaction = cfg.text("problem.reaction");
    const double sigma = cfg.real("problem.sigma");
    if (reaction == "power") {
        s.reaction = ReactionSpec::power(cfg.real("problem.alpha0"), sigma);
    } else if (reaction == "bounded_power") {
        s.reaction = ReactionSpec::bounded_power(cfg.real("problem.c3"), cfg.real("problem.c4"), cfg.real("problem.m"),
                                                 sigma);
    } else if (reaction == "exp_forced") {
        double lam = cfg.real_or_auto("problem.lambda1_ref").value_or(0.0);
        if (cfg.is_auto("problem.lambda1_ref")) lam = eigenpair().lambda1;
        s.reaction = ReactionSpec::exp_forced(cfg.real("problem.c6"), sigma, lam);
    }

    const std::string initial = cfg.text("problem.initial");
    const double A = cfg.real("problem.amplitude");
    const Grid& g = *s.grid;
    const GridExtent& e = g.extent;
    if (initial == "sine") {
        s.initial = Field::from(s.grid, [&](const Point& x) {
            if (g.mode == GridMode::radial) return A * std::cos(0.5 * std::numbers::pi * x[0] / e.x1);
            double v = A * std::sin(std::numbers::pi * (x[0] - e.x0) / (e.x1 - e.x0));
            if (g.mode == GridMode::tensor2d) v *= std::sin(std::numbers::pi * (x[1] - e.y0) / (e.y1 - e.y0));
            return v;
        });
    } else if (initial == "bump") {
        s.initial = Field::from(s.grid, [&](const Point& x) {
            auto f = [](double y, double a, double b) {
                double z = (2.0 * y - a - b) / (b - a);
                return std::max(0.0, 1.0 - z * z);
            };
            if (g.mode == GridMode::radial) return A * std::max(0.0, 1.0 - std::pow(x[0] / e.x1, 2));
            double v = A * f(x[0], e.x0, e.x1);
            if (g.mode == GridMode::tensor2d) v *= f(x[1], e.y0, e.y1);
            return v;
        });
    } else if (initial == "eigen") {
        s.initial = eigenpair().u0.scaled(A);
    } else if (initial == "barenblatt") {
        Exponents ex = Exponents::of(g.dimension, s.p, s.weight);
        ExactVariant v = ExactVariant::self_similar;
        const std::string name = cfg.text("problem.initial_variant");
        if (name == "verbatim") v = ExactVariant::verbatim;
        if (name == "amplitude_corrected") v = ExactVariant::amplitude_corrected;
        s.initial = Field::from(s.grid, [&](const Point& x) {
            return A * exact_profile(v, std::hypot(x[0], x[1]), s.t_start, ex);
        });
    } else {
        s.initial = Field::zeros(s.grid);
    }
    s.initial.apply_dirichlet();
    if (eig || local) {
        EigenPair k = eigenpair();
        if (k.normalization != Normalization::unit_mass)
            normalize(k, WeightedMesh(s.grid, s.weight), Normalization::unit_mass);
        s.g_kernel = k.u0;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Artifacts

class Artifacts {
public:
    Artifacts(std::filesystem::path dir, const ExperimentConfig& cfg) : dir_(std::move(dir)), cfg_(cfg) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    Artifacts sub(const std::string& name, const ExperimentConfig& cfg) const { return Artifacts(dir_ / name, cfg); }

    void write_json(const std::string& name, Json body) const {
        Json j;
        j["schema_version"] = schema_version;
        j["config"] = cfg_.to_json();
        for (auto& [k, v] : body.items()) j[k] = v;
        std::ofstream out(dir_ / name);
        out << j.dump(2) << '\n';
    }

    /// CSV preceded by `#` comment lines carrying the schema version and config.
    void write_csv(const std::string& name, const std::string& body) const {
        std::ofstream out(dir_ / name);
        out << "# schema_version = " << schema_version << '\n';
        std::istringstream cfg(cfg_.resolved_text());
        std::string line;
        while (std::getline(cfg, line))
            if (!line.empty()) out << "# " << line << '\n';
        out << body;
    }

    void write_config_echo() const {
        std::ofstream out(dir_ / "resolved_config.ini");
        out << "# schema_version = " << schema_version << '\n' << cfg_.resolved_text();
    }

private:
    std::filesystem::path dir_;
    ExperimentConfig cfg_;
};

inline std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream out;
    out << "t,dt,sup_abs_u,mass,g,energy\n";
    for (const auto& s : traj.samples)
        out << format_double(s.t) << ',' << format_double(s.dt) << ',' << format_double(s.sup_abs_u) << ','
            << format_double(s.mass) << ',' << format_double(s.g) << ',' << format_double(s.energy) << '\n';
    return out.str();
}

inline std::string field_csv(const Field& f) {
    std::ostringstream out;
    write_field_csv(out, f);
    return out.str();
}

inline Json outcome_json(const RunOutcome& o) {
    Json j;
    j["kind"] = to_string(o.kind);
    const bool blow = o.kind == OutcomeKind::blowup;
    j["T_est"] = blow ? number(o.blowup.T_est) : Json(nullptr);
    j["T_lo"] = blow ? number(o.blowup.T_lo) : Json(nullptr);
    j["T_hi"] = blow ? number(o.blowup.T_hi) : Json(nullptr);
    j["blowup_fit_ok"] = blow && o.blowup.fit_ok;
    j["rate_fit"] = o.kind == OutcomeKind::decayed ? number(o.rate_fit) : Json(nullptr);
    j["rate_stderr"] = o.kind == OutcomeKind::decayed ? number(o.rate_stderr) : Json(nullptr);
    j["steps"] = o.stats.steps;
    j["newton_iters_total"] = o.stats.newton_iterations_total;
    j["rejected_steps"] = o.stats.rejected;
    j["picard_steps"] = o.stats.picard_steps;
    j["regularization"] = o.stats.eps_reg;
    j["budget_exhausted"] = o.stats.budget_exhausted;
    j["step_limit_reached"] = o.stats.step_limit_reached;
    j["t_final"] = o.trajectory.empty() ? 0.0 : o.trajectory.back().t;
    return j;
}

/// Runs fn(0..n-1) on up to `jobs` threads; results land by index.
template <class R>
std::vector<R> parallel_map(std::size_t n, int jobs, const std::function<R(std::size_t)>& fn) {
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

struct RunOptions {
    int jobs = 1;
    std::optional<std::string> out_dir;
};

struct CommandResult {
    int exit_code = exit_ok;
    Json summary;
};

// ---------------------------------------------------------------------------
// Commands

inline Json eigen_json(const EigenPair& e) {
    Json j;
    j["lambda1"] = e.lambda1;
    j["residual"] = e.residual;
    j["iterations"] = e.iterations;
    j["normalization"] = to_string(e.normalization);
    j["p"] = e.p;
    return j;
}

inline CommandResult cmd_eigen(const ExperimentConfig& cfg, const Artifacts& art) {
    GridPtr g = grid_from(cfg);
    WeightedMesh mesh(g, weight_from(cfg));
    EigenPair e = smallest_eigenpair(mesh, cfg.real("problem.p"), eigen_options_from(cfg));
    art.write_csv("eigenfunction.csv", field_csv(e.u0));
    Json s = eigen_json(e);
    s["command"] = "eigen";
    art.write_json("eigen.json", s);
    return {exit_ok, s};
}

struct SolveRecord {
    RunOutcome outcome;
    double g0 = 0.0;
};

inline SolveRecord solve_one(const ExperimentConfig& cfg, const Artifacts& art, const EigenPair* eig) {
    ProblemSpec spec = problem_from(cfg, eig);
    SolveRecord rec;
    rec.outcome = run_simulation(spec);
    rec.g0 = rec.outcome.trajectory.samples.front().g;
    art.write_config_echo();
    art.write_csv("trajectory.csv", trajectory_csv(rec.outcome.trajectory));
    for (std::size_t k = 0; k < rec.outcome.trajectory.snapshots.size(); ++k) {
        char name[40];
        std::snprintf(name, sizeof name, "snapshot_%03zu.csv", k);
        art.write_csv(name, field_csv(rec.outcome.trajectory.snapshots[k].u));
    }
    Json j = outcome_json(rec.outcome);
    j["g0"] = rec.g0;
    art.write_json("outcome.json", j);
    return rec;
}

inline CommandResult cmd_solve(const ExperimentConfig& cfg, const Artifacts& art, int jobs) {
    auto runs = enumerate_runs(cfg);
    Json summary;
    summary["command"] = "solve";
    if (runs.size() == 1) {
        auto rec = solve_one(runs[0], art, nullptr);
        summary["outcome"] = outcome_json(rec.outcome);
        summary["outcome"]["g0"] = rec.g0;
        return {exit_ok, summary};
    }
    auto recs = parallel_map<SolveRecord>(runs.size(), jobs, [&](std::size_t i) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        return solve_one(runs[i], art.sub(name, runs[i]), nullptr);
    });
    Json list = Json::array();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        Json j = outcome_json(recs[i].outcome);
        j[cfg.sweep->parameter] = cfg.sweep->values[i];
        j["g0"] = recs[i].g0;
        list.push_back(j);
    }
    summary["sweep_parameter"] = cfg.sweep->parameter;
    summary["runs"] = list;
    return {exit_ok, summary};
}

struct ProbeResult {
    double amplitude = 0.0;
    std::string verdict;  // decay | blowup | undecided
    RunOutcome outcome;
    double g0 = 0.0;
    std::string error;
};

inline CommandResult cmd_blowup_scan(const ExperimentConfig& cfg, const Artifacts& art, int jobs) {
    require(!cfg.sweep || cfg.sweep->parameter == "amplitude", ErrorKind::config,
            "blowup-scan sweeps the amplitude only");
    const ProblemSpec base = problem_from(cfg);
    const EigenPair eig = [&] {
        EigenOptions opt = eigen_options_from(cfg);
        opt.normalization = Normalization::unit_mass;
        return smallest_eigenpair(WeightedMesh(base.grid, base.weight), base.p, opt);
    }();
    const double sigma = base.reaction.sigma;
    require(base.reaction.family != ReactionSpec::Family::none, ErrorKind::config, "blowup-scan needs a reaction");

    auto probe = [&](double A) {
        ProbeResult r;
        r.amplitude = A;
        ExperimentConfig c = cfg;
        c.set("problem.amplitude", format_value(A));
        try {
            ProblemSpec s = problem_from(c, &eig);
            r.outcome = run_simulation(s);
            r.g0 = r.outcome.trajectory.samples.front().g;
            r.verdict = r.outcome.kind == OutcomeKind::decayed  ? "decay"
                        : r.outcome.kind == OutcomeKind::blowup ? "blowup"
                                                                : "undecided";
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::config) throw;
            r.verdict = "undecided";
            r.error = e.what();
        }
        return r;
    };

    std::vector<double> amps;
    if (cfg.sweep) {
        amps = cfg.sweep->values;
    } else {
        const double lo = cfg.real("scan.amplitude_lo"), hi = cfg.real("scan.amplitude_hi");
        const long n = cfg.integer("scan.probes");
        for (long i = 0; i < n; ++i) amps.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
        amps.back() = hi;
    }
    std::sort(amps.begin(), amps.end());
    std::vector<ProbeResult> probes =
        parallel_map<ProbeResult>(amps.size(), jobs, [&](std::size_t i) { return probe(amps[i]); });

    std::optional<std::size_t> dec, blow;
    for (std::size_t i = 0; i + 1 < probes.size(); ++i)
        if (probes[i].verdict == "decay" && probes[i + 1].verdict == "blowup") {
            dec = i;
            blow = i + 1;
            break;
        }

    const double tol = cfg.real("scan.tolerance");
    Json summary;
    summary["command"] = "blowup-scan";
    summary["lambda1"] = eig.lambda1;
    summary["sigma"] = sigma;
    bool decided = dec.has_value();
    ProbeResult lo_run, hi_run;
    std::vector<ProbeResult> bisections;
    if (decided) {
        lo_run = probes[*dec];
        hi_run = probes[*blow];
        long steps = 0;
        while (hi_run.amplitude / lo_run.amplitude > 1.0 + tol && steps++ < cfg.integer("scan.max_bisections")) {
            ProbeResult mid = probe(std::sqrt(lo_run.amplitude * hi_run.amplitude));
            bisections.push_back(mid);
            if (mid.verdict == "decay")
                lo_run = mid;
            else if (mid.verdict == "blowup")
                hi_run = mid;
            else {
                decided = false;
                break;
            }
        }
        decided = decided && hi_run.amplitude / lo_run.amplitude <= 1.0 + tol;
    }

    std::ostringstream csv;
    csv << "amplitude,verdict,g0,T_est,rate_fit,steps\n";
    Json runs = Json::array();
    auto add_row = [&](const ProbeResult& r, const char* stage) {
        const bool b = r.verdict == "blowup", d = r.verdict == "decay";
        csv << format_double(r.amplitude) << ',' << r.verdict << ',' << format_double(r.g0) << ','
            << (b ? format_double(r.outcome.blowup.T_est) : "") << ','
            << (d ? format_double(r.outcome.rate_fit) : "") << ',' << r.outcome.stats.steps << '\n';
        Json j;
        j["stage"] = stage;
        j["amplitude"] = r.amplitude;
        j["verdict"] = r.verdict;
        j["g0"] = r.g0;
        j["T_est"] = b ? number(r.outcome.blowup.T_est) : Json(nullptr);
        j["rate_fit"] = d ? number(r.outcome.rate_fit) : Json(nullptr);
        if (!r.error.empty()) j["error"] = r.error;
        runs.push_back(j);
    };
    for (const auto& r : probes) add_row(r, "probe");
    for (const auto& r : bisections) add_row(r, "bisection");
    art.write_csv("scan.csv", csv.str());
    summary["runs"] = runs;

    if (!decided) {
        summary["status"] = "undecided";
        art.write_json("scan.json", summary);
        return {exit_undecided, summary};
    }
    summary["status"] = "bracketed";
    summary["A_decay"] = lo_run.amplitude;
    summary["A_blowup"] = hi_run.amplitude;
    summary["bracket_ratio"] = hi_run.amplitude / lo_run.amplitude;
    const std::size_t fit_steps = static_cast<std::size_t>(cfg.integer("scan.fit_steps"));
    FitResult C = fit_comparison_constant(hi_run.outcome.trajectory, eig.lambda1, sigma, fit_steps);
    summary["C_fit"] = C.value;
    summary["C_fit_stderr"] = C.stderr_;
    Threshold th = blowup_threshold(eig.lambda1, C.value, sigma);
    summary["threshold_operative"] = th.operative;
    summary["threshold_sigma_root"] = th.sigma_root;
    summary["critical_g0_decay_end"] = lo_run.g0;
    summary["critical_g0_blowup_end"] = hi_run.g0;
    summary["critical_g0_below_threshold"] = lo_run.g0 <= th.operative;
    auto bern = bernoulli_blowup({eig.lambda1, C.value, sigma, hi_run.g0});
    summary["bernoulli_T_blowup_end"] = bern.T ? number(*bern.T) : Json(nullptr);
    summary["T_est_blowup_end"] = hi_run.outcome.blowup.T_est;
    art.write_json("scan.json", summary);
    return {exit_ok, summary};
}

inline ExactVariant variant_from(const std::string& s) {
    if (s == "verbatim") return ExactVariant::verbatim;
    if (s == "amplitude_corrected") return ExactVariant::amplitude_corrected;
    return ExactVariant::self_similar;
}

inline CommandResult cmd_verify_exact(const ExperimentConfig& cfg, const Artifacts& art) {
    const double p = cfg.real("problem.p");
    require(p > 2.0, ErrorKind::config, "verify-exact needs p > 2");
    require(cfg.text("problem.reaction") == "none", ErrorKind::config, "verify-exact needs reaction = none");
    const WeightSpec w = weight_from(cfg);
    require(w.kind != WeightSpec::Kind::tabulated, ErrorKind::config, "verify-exact needs a power or constant weight");
    std::vector<int> resolutions;
    for (double r : cfg.real_list("exact.resolutions")) resolutions.push_back(static_cast<int>(std::lround(r)));
    const auto times = cfg.real_list("exact.times");
    ResidualOptions opt;
    opt.front_margin = cfg.real("exact.front_margin");
    opt.exclude_origin = cfg.boolean("exact.exclude_origin");
    const double need = cfg.real("exact.convergence_ratio");

    std::ostringstream csv;
    csv << "variant,resolution,residual,ratio\n";
    Json variants = Json::object();
    Json convergent = Json::array();
    bool formula_converged = false;
    for (const auto& name : cfg.text_list("exact.variants")) {
        const ExactVariant v = variant_from(name);
        std::vector<double> res;
        for (int n : resolutions) {
            GridPtr g = grid_from(cfg, n);
            WeightedMesh mesh(g, w);
            Exponents ex = Exponents::of(g->dimension, p, w);
            res.push_back(residual_check(
                [&](const Point& x, double t) { return exact_profile(v, std::hypot(x[0], x[1]), t, ex); }, mesh, p,
                times, opt));
        }
        std::vector<double> ratios;
        bool ok = true;
        for (std::size_t i = 0; i + 1 < res.size(); ++i) {
            ratios.push_back(res[i] / res[i + 1]);
            ok = ok && ratios.back() >= need;
        }
        for (std::size_t i = 0; i < res.size(); ++i)
            csv << name << ',' << resolutions[i] << ',' << format_double(res[i]) << ','
                << (i == 0 ? std::string() : format_double(ratios[i - 1])) << '\n';
        Json j;
        j["resolutions"] = resolutions;
        j["residuals"] = res;
        j["ratios"] = ratios;
        j["convergent"] = ok;
        variants[name] = j;
        if (ok) {
            convergent.push_back(name);
            if (v != ExactVariant::self_similar) formula_converged = true;
        }
    }
    art.write_csv("residuals.csv", csv.str());
    Json s;
    s["command"] = "verify-exact";
    s["variants"] = variants;
    s["convergent_variants"] = convergent;
    s["convergent_variant"] = convergent.empty() ? Json(nullptr) : convergent[0];
    s["formula_variant_converged"] = formula_converged;
    art.write_json("verify_exact.json", s);
    return {exit_ok, s};
}

inline CommandResult cmd_weights_check(const ExperimentConfig& cfg, const Artifacts& art) {
    const WeightSpec w = weight_from(cfg);
    const GridPtr g = grid_from(cfg);
    const int n = g->dimension;
    const double p = cfg.real("problem.p");
    ClassCheckOptions opt;
    opt.cap = cfg.real("weights.cap");
    const auto radii = cfg.real_list("weights.radii");
    Json s;
    s["command"] = "weights-check";
    s["dimension"] = n;
    auto mk = check_muckenhoupt(w, n, radii, opt);
    s["muckenhoupt"] = {{"theta_mk", w.muckenhoupt_exponent},
                        {"passes", mk.passes},
                        {"worst_constant", number(mk.worst_constant)},
                        {"worst_esssup_constant", number(mk.worst_esssup_constant)},
                        {"diagnostic", mk.diagnostic}};
    std::vector<std::pair<double, double>> pairs;
    for (double h : radii)
        for (double q : cfg.real_list("weights.doubling_ratios")) pairs.emplace_back(h * q, h);
    Json doubling = Json::array();
    const double mu = w.mu(n);
    for (double off : cfg.real_list("weights.mu_offsets")) {
        auto rep = check_doubling(w, n, mu + off, pairs, opt);
        doubling.push_back({{"mu", mu + off},
                            {"passes", rep.passes},
                            {"worst_ratio", number(rep.worst_ratio)},
                            {"diagnostic", rep.diagnostic}});
    }
    s["doubling"] = doubling;
    Exponents ex = Exponents::of(n, p, w);
    s["exponents"] = {{"n", n},      {"p", p},           {"mu", ex.mu},   {"theta_w", ex.theta_w},
                      {"k", ex.k()}, {"lambda", ex.lambda_exp()}, {"beta", ex.beta()},
                      {"k_equals_beta", ex.k() == ex.beta()}};
    s["mu_admissible"] = mu < 1.0 + p / n;
    art.write_json("weights.json", s);
    return {exit_ok, s};
}

inline CommandResult cmd_decay_fit(const ExperimentConfig& cfg, const Artifacts& art) {
    ProblemSpec spec = problem_from(cfg);
    RunOutcome o = run_simulation(spec);
    art.write_csv("trajectory.csv", trajectory_csv(o.trajectory));
    const auto win = cfg.real_list("decay.window");
    const Exponents ex = Exponents::of(spec.grid->dimension, spec.p, spec.weight);
    Json s;
    s["command"] = "decay-fit";
    s["outcome"] = outcome_json(o);
    s["window"] = win;
    if (spec.p == 2.0) {
        FitResult r = exponential_rate_fit(o.trajectory, win[0], win[1]);
        s["rate"] = -r.value;
        s["rate_stderr"] = r.stderr_;
    } else {
        FitResult f = decay_exponent_fit(o.trajectory, win[0], win[1]);
        s["exponent"] = f.value;
        s["exponent_stderr"] = f.stderr_;
        s["samples"] = f.samples;
        s["predicted_n_over_beta"] = -ex.n / ex.beta();
        s["predicted_n_over_k"] = -ex.n / ex.k();
        s["relative_error_beta"] = std::abs(f.value + ex.n / ex.beta()) / (ex.n / ex.beta());
    }
    art.write_json("decay.json", s);
    return {exit_ok, s};
}

/// Runs a command, writing artifacts and summary.json; module errors become a
/// JSON error report and a nonzero exit code.
inline CommandResult run_command(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    const std::filesystem::path dir = opt.out_dir ? *opt.out_dir : cfg.text("output_dir");
    CommandResult result;
    try {
        Artifacts art(dir, cfg);
        art.write_config_echo();
        switch (cfg.command) {
            case Command::eigen: result = cmd_eigen(cfg, art); break;
            case Command::solve: result = cmd_solve(cfg, art, opt.jobs); break;
            case Command::blowup_scan: result = cmd_blowup_scan(cfg, art, opt.jobs); break;
            case Command::verify_exact: result = cmd_verify_exact(cfg, art); break;
            case Command::weights_check: result = cmd_weights_check(cfg, art); break;
            case Command::decay_fit: result = cmd_decay_fit(cfg, art); break;
        }
        art.write_json("summary.json", result.summary);
    } catch (const Error& e) {
        result.exit_code = exit_code_for(e.kind());
        result.summary = Json{{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}};
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        std::ofstream out(dir / "summary.json");
        Json j;
        j["schema_version"] = schema_version;
        j["config"] = cfg.to_json();
        j["error"] = result.summary["error"];
        out << j.dump(2) << '\n';
    }
    return result;
}

}  // namespace degenflow::cli
