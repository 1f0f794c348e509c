#pragma once

// Line-oriented experiment configuration: `key = value` pairs grouped under
// [section] headers, checked against a fixed schema.

#include "error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace degenflow::cli {

inline constexpr int schema_version = 1;

enum class Command { eigen, solve, blowup_scan, verify_exact, weights_check, decay_fit };

inline const char* to_string(Command c) {
    switch (c) {
        case Command::eigen: return "eigen";
        case Command::solve: return "solve";
        case Command::blowup_scan: return "blowup-scan";
        case Command::verify_exact: return "verify-exact";
        case Command::weights_check: return "weights-check";
        case Command::decay_fit: return "decay-fit";
    }
    return "?";
}

inline std::optional<Command> parse_command(std::string_view s) {
    for (Command c : {Command::eigen, Command::solve, Command::blowup_scan, Command::verify_exact,
                      Command::weights_check, Command::decay_fit})
        if (s == to_string(c)) return c;
    return std::nullopt;
}

enum class ValueType { real, integer, text, choice, real_list, text_list, boolean, real_or_auto };

struct KeySpec {
    std::string section;
    std::string name;
    ValueType type;
    std::optional<std::string> fallback;  // absent: required
    std::vector<std::string> choices;

    std::string key() const { return section.empty() ? name : section + "." + name; }
};

inline const std::vector<KeySpec>& config_schema() {
    using V = ValueType;
    static const std::vector<KeySpec> keys = {
        {"", "command", V::choice, std::nullopt,
         {"eigen", "solve", "blowup-scan", "verify-exact", "weights-check", "decay-fit"}},
        {"", "output_dir", V::text, "out", {}},

        {"problem", "grid", V::choice, "interval", {"interval", "radial", "tensor2d"}},
        {"problem", "x0", V::real, "0", {}},
        {"problem", "x1", V::real, "1", {}},
        {"problem", "y0", V::real, "0", {}},
        {"problem", "y1", V::real, "1", {}},
        {"problem", "resolution", V::integer, "128", {}},
        {"problem", "dimension", V::integer, "1", {}},
        {"problem", "p", V::real, std::nullopt, {}},
        {"problem", "weight", V::choice, "constant", {"constant", "power", "tabulated"}},
        {"problem", "theta_w", V::real, "0", {}},
        {"problem", "weight_file", V::text, "", {}},
        {"problem", "mu", V::real_or_auto, "auto", {}},
        {"problem", "muckenhoupt_exponent", V::real, "2", {}},
        {"problem", "reaction", V::choice, "none", {"none", "power", "bounded_power", "exp_forced"}},
        {"problem", "alpha0", V::real, "1", {}},
        {"problem", "sigma", V::real, "2", {}},
        {"problem", "c3", V::real, "0", {}},
        {"problem", "c4", V::real, "0", {}},
        {"problem", "m", V::real, "2", {}},
        {"problem", "c6", V::real, "1", {}},
        {"problem", "lambda1_ref", V::real_or_auto, "auto", {}},
        {"problem", "initial", V::choice, "sine", {"sine", "bump", "eigen", "barenblatt", "zero"}},
        {"problem", "amplitude", V::real, "1", {}},
        {"problem", "initial_variant", V::choice, "self_similar",
         {"verbatim", "amplitude_corrected", "self_similar"}},
        {"problem", "t_start", V::real, "0", {}},
        {"problem", "t_end", V::real, "1", {}},
        {"problem", "dt0", V::real, "1e-4", {}},
        {"problem", "dt_min", V::real, "1e-12", {}},
        {"problem", "dt_max", V::real, "1e-3", {}},
        {"problem", "u_cap", V::real_or_auto, "auto", {}},
        {"problem", "newton_tol", V::real, "1e-10", {}},
        {"problem", "newton_max", V::integer, "30", {}},
        {"problem", "eps_reg", V::real, "0", {}},
        {"problem", "max_rel_change", V::real, "0.01", {}},
        {"problem", "decay_fraction", V::real, "1e-8", {}},
        {"problem", "wall_budget", V::real, "0", {}},
        {"problem", "snapshot_times", V::real_list, "", {}},

        {"eigen", "tol", V::real_or_auto, "auto", {}},
        {"eigen", "normalization", V::choice, "unit_mass", {"unit_mass", "unit_p_norm"}},
        {"eigen", "max_iterations", V::integer, "50000", {}},

        {"sweep", "parameter", V::text, "", {}},
        {"sweep", "values", V::real_list, "", {}},
        {"sweep", "geometric", V::real_list, "", {}},

        {"scan", "tolerance", V::real, "0.05", {}},
        {"scan", "amplitude_lo", V::real, "0.01", {}},
        {"scan", "amplitude_hi", V::real, "100", {}},
        {"scan", "probes", V::integer, "10", {}},
        {"scan", "fit_steps", V::integer, "8", {}},
        {"scan", "max_bisections", V::integer, "60", {}},

        {"exact", "variants", V::text_list, "verbatim, amplitude_corrected, self_similar", {}},
        {"exact", "resolutions", V::real_list, "64, 128, 256", {}},
        {"exact", "times", V::real_list, "1, 2, 4", {}},
        {"exact", "front_margin", V::real, "1e-3", {}},
        {"exact", "exclude_origin", V::boolean, "true", {}},
        {"exact", "convergence_ratio", V::real, "1.5", {}},

        {"weights", "radii", V::real_list, "0.125, 0.25, 0.5, 1", {}},
        {"weights", "doubling_ratios", V::real_list, "2, 4", {}},
        {"weights", "mu_offsets", V::real_list, "0, -0.3", {}},
        {"weights", "cap", V::real, "1e6", {}},

        {"decay", "window", V::real_list, "1, 10", {}},
    };
    return keys;
}

inline const KeySpec* find_key(const std::string& key) {
    for (const auto& k : config_schema())
        if (k.key() == key) return &k;
    return nullptr;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline std::optional<double> to_real(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long> to_integer(const std::string& s) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

[[noreturn]] inline void fail_at(int line, const std::string& msg) {
    throw Error(ErrorKind::config, line > 0 ? "line " + std::to_string(line) + ": " + msg : msg);
}

inline std::string check_value(const KeySpec& k, const std::string& v) {
    switch (k.type) {
        case ValueType::real:
            if (!to_real(v)) return "key '" + k.key() + "' expects a number, got '" + v + "'";
            break;
        case ValueType::integer:
            if (!to_integer(v)) return "key '" + k.key() + "' expects an integer, got '" + v + "'";
            break;
        case ValueType::real_or_auto:
            if (v != "auto" && !to_real(v))
                return "key '" + k.key() + "' expects a number or 'auto', got '" + v + "'";
            break;
        case ValueType::boolean:
            if (v != "true" && v != "false") return "key '" + k.key() + "' expects true or false, got '" + v + "'";
            break;
        case ValueType::choice:
            if (std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
                std::string all;
                for (const auto& c : k.choices) all += (all.empty() ? "" : ", ") + c;
                return "key '" + k.key() + "' must be one of {" + all + "}, got '" + v + "'";
            }
            break;
        case ValueType::real_list:
            for (const auto& item : split_list(v))
                if (!to_real(item)) return "key '" + k.key() + "' expects a list of numbers, got '" + item + "'";
            break;
        case ValueType::text:
        case ValueType::text_list: break;
    }
    return {};
}

}  // namespace detail

struct Sweep {
    std::string parameter;  // a numeric [problem] key
    std::vector<double> values;
};

class ExperimentConfig {
public:
    Command command = Command::eigen;
    std::optional<Sweep> sweep;

    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        require(it != values_.end(), ErrorKind::config, "unknown config key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key) const { return *detail::to_real(raw(key)); }
    long integer(const std::string& key) const { return *detail::to_integer(raw(key)); }
    const std::string& text(const std::string& key) const { return raw(key); }
    bool boolean(const std::string& key) const { return raw(key) == "true"; }
    bool is_auto(const std::string& key) const { return raw(key) == "auto"; }

    std::optional<double> real_or_auto(const std::string& key) const {
        if (is_auto(key)) return std::nullopt;
        return real(key);
    }

    std::vector<double> real_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : detail::split_list(raw(key))) out.push_back(*detail::to_real(s));
        return out;
    }

    std::vector<std::string> text_list(const std::string& key) const { return detail::split_list(raw(key)); }

    int line_of(const std::string& key) const {
        auto it = lines_.find(key);
        return it == lines_.end() ? 0 : it->second;
    }

    /// Sets a value, checking its type against the schema.
    void set(const std::string& key, const std::string& value, int line = 0) {
        const KeySpec* k = find_key(key);
        if (!k) detail::fail_at(line, "unknown key '" + key + "'");
        auto err = detail::check_value(*k, value);
        if (!err.empty()) detail::fail_at(line, err);
        values_[key] = value;
        if (line > 0) lines_[key] = line;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    /// Resolved configuration in the input syntax, schema order.
    std::string resolved_text() const {
        std::ostringstream out;
        std::string section;
        for (const auto& k : config_schema()) {
            auto it = values_.find(k.key());
            if (it == values_.end()) continue;
            if (k.section != section) {
                section = k.section;
                out << "\n[" << section << "]\n";
            }
            out << k.name << " = " << it->second << '\n';
        }
        return out.str();
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& k : config_schema()) {
            auto it = values_.find(k.key());
            if (it == values_.end()) continue;
            auto& slot = k.section.empty() ? j[k.name] : j[k.section][k.name];
            switch (k.type) {
                case ValueType::real: slot = real(k.key()); break;
                case ValueType::integer: slot = integer(k.key()); break;
                case ValueType::boolean: slot = boolean(k.key()); break;
                case ValueType::real_or_auto:
                    if (is_auto(k.key()))
                        slot = "auto";
                    else
                        slot = real(k.key());
                    break;
                case ValueType::real_list: slot = real_list(k.key()); break;
                case ValueType::text_list: slot = text_list(k.key()); break;
                default: slot = it->second;
            }
        }
        return j;
    }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
};

namespace detail {

inline void validate_config(ExperimentConfig& cfg) {
    auto at = [&](const std::string& key, bool ok, const std::string& msg) {
        if (!ok) fail_at(cfg.line_of(key), msg);
    };
    const double p = cfg.real("problem.p");
    at("problem.p", p >= 2.0, "p must be ≥ 2");
    const std::string grid = cfg.text("problem.grid");
    at("problem.resolution", cfg.integer("problem.resolution") >= 4, "resolution must be >= 4");
    at("problem.x1", cfg.real("problem.x1") > cfg.real("problem.x0"), "x1 must exceed x0");
    if (grid == "tensor2d") at("problem.y1", cfg.real("problem.y1") > cfg.real("problem.y0"), "y1 must exceed y0");
    const long dim = cfg.integer("problem.dimension");
    at("problem.dimension", dim >= 1 && dim <= 10, "dimension must lie in [1, 10]");
    if (grid == "interval") at("problem.dimension", dim == 1, "interval grids have dimension 1");
    if (grid == "tensor2d" && cfg.line_of("problem.dimension") > 0)
        at("problem.dimension", dim == 2, "tensor2d grids have dimension 2");
    if (grid == "radial") at("problem.x0", cfg.real("problem.x0") == 0.0, "radial grids start at x0 = 0");
    if (cfg.text("problem.weight") == "power") {
        double th = cfg.real("problem.theta_w");
        at("problem.theta_w", th >= 0.0 && th < p, "theta_w must lie in [0, p)");
    }
    if (cfg.text("problem.weight") == "tabulated")
        at("problem.weight_file", !cfg.text("problem.weight_file").empty(), "tabulated weight needs weight_file");
    at("problem.muckenhoupt_exponent", cfg.real("problem.muckenhoupt_exponent") > 1.0,
       "muckenhoupt_exponent must be > 1");
    if (cfg.text("problem.reaction") != "none")
        at("problem.sigma", cfg.real("problem.sigma") > 1.0, "sigma must be > 1");
    if (cfg.text("problem.reaction") == "bounded_power") at("problem.m", cfg.real("problem.m") > 1.0, "m must be > 1");
    at("problem.t_end", cfg.real("problem.t_end") > cfg.real("problem.t_start"), "t_end must exceed t_start");
    const double dt0 = cfg.real("problem.dt0"), dt_min = cfg.real("problem.dt_min"),
                 dt_max = cfg.real("problem.dt_max");
    at("problem.dt0", dt_min > 0.0 && dt_min <= dt0 && dt0 <= dt_max, "need 0 < dt_min <= dt0 <= dt_max");
    at("problem.newton_tol", cfg.real("problem.newton_tol") > 0.0, "newton_tol must be > 0");
    at("problem.newton_max", cfg.integer("problem.newton_max") > 0, "newton_max must be > 0");
    at("problem.max_rel_change", cfg.real("problem.max_rel_change") > 0.0, "max_rel_change must be > 0");
    at("problem.eps_reg", cfg.real("problem.eps_reg") >= 0.0, "eps_reg must be >= 0");
    if (cfg.text("problem.initial") == "barenblatt")
        at("problem.t_start", cfg.real("problem.t_start") > 0.0, "barenblatt initial data needs t_start > 0");
    at("scan.tolerance", cfg.real("scan.tolerance") > 0.0, "scan tolerance must be > 0");
    at("scan.amplitude_hi", cfg.real("scan.amplitude_hi") > cfg.real("scan.amplitude_lo") &&
                                cfg.real("scan.amplitude_lo") > 0.0,
       "need 0 < amplitude_lo < amplitude_hi");
    at("scan.probes", cfg.integer("scan.probes") >= 2, "probes must be >= 2");
    at("scan.fit_steps", cfg.integer("scan.fit_steps") >= 2, "fit_steps must be >= 2");
    for (const auto& v : cfg.text_list("exact.variants"))
        at("exact.variants", v == "verbatim" || v == "amplitude_corrected" || v == "self_similar",
           "unknown exact-solution variant '" + v + "'");
    at("exact.resolutions", cfg.real_list("exact.resolutions").size() >= 3, "verify-exact needs >= 3 resolutions");
    at("exact.times", !cfg.real_list("exact.times").empty(), "exact.times must be nonempty");
    at("decay.window", cfg.real_list("decay.window").size() == 2, "decay.window needs two times");
    at("weights.radii", !cfg.real_list("weights.radii").empty(), "weights.radii must be nonempty");

    const std::string param = cfg.text("sweep.parameter");
    const auto vals = cfg.real_list("sweep.values");
    const auto geo = cfg.real_list("sweep.geometric");
    if (param.empty()) {
        at("sweep.values", vals.empty() && geo.empty(), "sweep values given without sweep.parameter");
        return;
    }
    const KeySpec* k = find_key("problem." + param);
    at("sweep.parameter", k && (k->type == ValueType::real || k->type == ValueType::integer),
       "sweep parameter '" + param + "' is not a numeric problem key");
    at("sweep.parameter", vals.empty() != geo.empty(), "sweep needs exactly one of values or geometric");
    Sweep s;
    s.parameter = param;
    if (!vals.empty()) {
        s.values = vals;
    } else {
        at("sweep.geometric", geo.size() == 3 && geo[0] > 0.0 && geo[1] > 0.0 && geo[2] >= 2.0 &&
                                  geo[2] == std::floor(geo[2]),
           "sweep.geometric needs lo, hi > 0 and an integer count >= 2");
        const int count = static_cast<int>(geo[2]);
        for (int i = 0; i < count; ++i)
            s.values.push_back(geo[0] * std::pow(geo[1] / geo[0], static_cast<double>(i) / (count - 1)));
        s.values.back() = geo[1];
    }
    cfg.sweep = std::move(s);
}

}  // namespace detail

/// Parses and validates a configuration, filling defaults.
inline ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, line)) {
        ++number;
        auto hash = line.find_first_of("#;");
        std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') detail::fail_at(number, "malformed section header '" + body + "'");
            section = detail::trim(std::string_view(body).substr(1, body.size() - 2));
            bool known = false;
            for (const auto& k : config_schema()) known = known || k.section == section;
            if (!known) detail::fail_at(number, "unknown section [" + section + "]");
            continue;
        }
        auto eq = body.find('=');
        if (eq == std::string::npos) detail::fail_at(number, "expected 'key = value', got '" + body + "'");
        std::string name = detail::trim(std::string_view(body).substr(0, eq));
        std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        std::string key = section.empty() ? name : section + "." + name;
        if (!find_key(key)) detail::fail_at(number, "unknown key '" + key + "'");
        if (seen.count(key)) detail::fail_at(number, "duplicate key '" + key + "'");
        seen[key] = number;
        cfg.set(key, value, number);
    }
    for (const auto& k : config_schema()) {
        if (cfg.has(k.key())) continue;
        if (!k.fallback) detail::fail_at(0, "missing required key '" + k.key() + "'");
        cfg.set(k.key(), *k.fallback);
    }
    cfg.command = *parse_command(cfg.text("command"));
    detail::validate_config(cfg);
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::config, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// One configuration per sweep value (the input itself when there is no sweep).
inline std::vector<ExperimentConfig> enumerate_runs(const ExperimentConfig& cfg) {
    if (!cfg.sweep) return {cfg};
    std::vector<ExperimentConfig> runs;
    for (double v : cfg.sweep->values) {
        ExperimentConfig c = cfg;
        const std::string key = "problem." + cfg.sweep->parameter;
        c.set(key, find_key(key)->type == ValueType::integer ? std::to_string(std::lround(v)) : format_value(v));
        c.set("sweep.parameter", "");
        c.set("sweep.values", "");
        c.set("sweep.geometric", "");
        c.sweep.reset();
        runs.push_back(std::move(c));
    }
    return runs;
}

}  // namespace degenflow::cli
