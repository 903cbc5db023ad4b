#include "mvmc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mvmc/error.hpp"

namespace mvmc {

namespace {

using nlohmann::json;

// Reads j[key] into `out` when present; rejects keys outside `allowed`.
class Section {
public:
    Section(const json& j, std::string name, std::set<std::string> allowed)
        : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("config: section '" + name_ + "' must be an object");
        for (const auto& [key, value] : j_.items())
            if (!allowed.count(key)) throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
    }

    template <class T>
    void get(const char* key, T& out) const {
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for '" + name_ + "." + key + "': " + e.what());
        }
    }

    template <class T>
    void get_optional(const char* key, std::optional<T>& out) const {
        if (!j_.contains(key)) return;
        if (j_.at(key).is_null()) {
            out.reset();
            return;
        }
        T v{};
        get(key, v);
        out = v;
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) const { return j_.at(key); }

private:
    const json& j_;
    std::string name_;
};

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

void RunConfig::validate() const {
    if (tol_r.has_value() == tol.has_value())
        throw ConfigError("config: exactly one of budget.tol_r and budget.tol must be set");
    const double t = tol_r ? *tol_r : *tol;
    if (!(t > 0.0)) throw ConfigError("config: tolerance must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("config: theta must lie in (0, 1)");
    if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("config: nu must lie in (0, 1)");
    if (!(model.sigma > 0.0)) throw ConfigError("config: model.sigma must be positive");
    if (!(model.xi_low <= model.xi_high)) throw ConfigError("config: model.xi_low exceeds model.xi_high");
    if (!(model.x0_variance >= 0.0)) throw ConfigError("config: model.x0_variance must be non-negative");
    if (observable != "psi" && observable != "cos" && observable != "constant")
        throw ConfigError("config: observable.name must be psi, cos or constant");
    try {
        hierarchy.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    const auto positive = [](std::size_t v, const char* what) {
        if (v == 0) throw ConfigError(std::string("config: ") + what + " must be positive");
    };
    positive(pilots.bar_M1, "pilots.bar_M1");
    positive(pilots.bar_M2, "pilots.bar_M2");
    positive(pilots.tilde_M1, "pilots.tilde_M1");
    positive(pilots.tilde_M2, "pilots.tilde_M2");
    positive(pilots.under_M1, "pilots.under_M1");
    positive(pilots.under_M2, "pilots.under_M2");
    if (pilots.bar_M1 < 2 || pilots.bar_M2 < 2 || pilots.tilde_M1 < 2 || pilots.tilde_M2 < 2)
        throw ConfigError("config: variance pilots (bar, tilde) need at least 2 samples each");
    if (control.mode != "solve" && control.mode != "zero" && control.mode != "file")
        throw ConfigError("config: control.mode must be solve, zero or file");
    if (control.mode == "file" && control.path.empty())
        throw ConfigError("config: control.path is required with control.mode = file");
    positive(control.particles, "control.particles");
    positive(control.steps, "control.steps");
    if (control.intervals < 2) throw ConfigError("config: control.intervals must be at least 2");
    if (!(control.relative_floor > 0.0)) throw ConfigError("config: control.relative_floor must be positive");
    if (control.x_min.has_value() != control.x_max.has_value())
        throw ConfigError("config: control.x_min and control.x_max go together");
    if (control.x_min && !(*control.x_max > *control.x_min))
        throw ConfigError("config: control.x_max must exceed control.x_min");
    if (rate_study.level_min < 1 || rate_study.level_max < rate_study.level_min)
        throw ConfigError("config: rates levels must satisfy 1 <= level_min <= level_max");
    positive(rate_study.variance_M1, "rates.variance_M1");
    positive(rate_study.variance_M2, "rates.variance_M2");
    positive(rate_study.bias_M1, "rates.bias_M1");
    positive(rate_study.bias_M2, "rates.bias_M2");
    if (is_study.level < 1) throw ConfigError("config: is_experiments.level must be at least 1");
    for (std::size_t m : is_study.exp1_M) positive(m, "is_experiments.exp1_M");
    for (std::size_t m : is_study.exp2_M2) positive(m, "is_experiments.exp2_M2");
    positive(is_study.exp1_control_particles, "is_experiments.exp1_control_particles");
    positive(is_study.exp2_M1, "is_experiments.exp2_M1");
    for (double t : sweep.tolerances)
        if (!(t > 0.0)) throw ConfigError("config: sweep tolerances must be positive");
    positive(sweep.repetitions, "sweep.repetitions");
    if (!(sweep.reference_tolerance > 0.0)) throw ConfigError("config: sweep.reference_tolerance must be positive");
    if (workers < 1) throw ConfigError("config: workers must be at least 1");
}

ErrorBudget RunConfig::budget() const {
    ErrorBudget b;
    b.relative = tol_r.has_value();
    b.tolerance = tol_r ? *tol_r : tol.value_or(0.0);
    b.theta = theta;
    b.nu = nu;
    return b;
}

RateConstants RunConfig::effective_rates() const { return rates ? *rates : default_rates(sampler); }

Observable RunConfig::make_observable() const {
    if (observable == "psi") return psi_observable(threshold);
    if (observable == "cos") return cos_observable();
    if (observable == "constant") return constant_observable(constant);
    throw ConfigError("config: unknown observable '" + observable + "'");
}

ModelSpec RunConfig::make_model() const { return kuramoto_model(model); }

std::string RunConfig::to_json() const {
    json j;
    j["model"] = {{"name", "kuramoto"},
                  {"sigma", model.sigma},
                  {"x0_mean", model.x0_mean},
                  {"x0_variance", model.x0_variance},
                  {"xi_low", model.xi_low},
                  {"xi_high", model.xi_high}};
    j["observable"] = {{"name", observable}, {"threshold", threshold}, {"constant", constant}};
    j["hierarchy"] = {{"P0", hierarchy.P0},
                      {"N0", hierarchy.N0},
                      {"tau", hierarchy.tau},
                      {"max_level", hierarchy.max_level},
                      {"horizon", hierarchy.horizon},
                      {"sampler", to_string(sampler)}};
    j["budget"] = {{"tol_r", optional_json(tol_r)}, {"tol", optional_json(tol)}, {"theta", theta}, {"nu", nu}};
    j["pilots"] = {{"bar_M1", pilots.bar_M1},     {"bar_M2", pilots.bar_M2},
                   {"tilde_M1", pilots.tilde_M1}, {"tilde_M2", pilots.tilde_M2},
                   {"under_M1", pilots.under_M1}, {"under_M2", pilots.under_M2}};
    j["rates"] = rates ? json{{"alpha", rates->alpha}, {"w", rates->w}, {"s", rates->s}} : json(nullptr);
    j["control"] = {{"mode", control.mode},
                    {"path", control.path},
                    {"particles", control.particles},
                    {"steps", control.steps},
                    {"intervals", control.intervals},
                    {"relative_floor", control.relative_floor},
                    {"x_min", optional_json(control.x_min)},
                    {"x_max", optional_json(control.x_max)},
                    {"seed", control.seed}};
    j["rate_study"] = {{"level_min", rate_study.level_min},     {"level_max", rate_study.level_max},
                       {"variance_M1", rate_study.variance_M1}, {"variance_M2", rate_study.variance_M2},
                       {"bias_M1", rate_study.bias_M1},         {"bias_M2", rate_study.bias_M2}};
    j["is_experiments"] = {{"level", is_study.level},
                           {"exp1_M", is_study.exp1_M},
                           {"exp1_control_particles", is_study.exp1_control_particles},
                           {"exp2_M1", is_study.exp2_M1},
                           {"exp2_M2", is_study.exp2_M2}};
    j["sweep"] = {{"tolerances", sweep.tolerances},
                  {"repetitions", sweep.repetitions},
                  {"reference_tolerance", sweep.reference_tolerance},
                  {"reference_value", optional_json(sweep.reference_value)}};
    j["run"] = {{"seed", seed}, {"workers", workers}, {"out_dir", out_dir}};
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    RunConfig c;
    const Section root(j, "config",
                       {"model", "observable", "hierarchy", "budget", "pilots", "rates", "control",
                        "rate_study", "is_experiments", "sweep", "run"});
    if (root.has("model")) {
        const Section s(root.at("model"), "model", {"name", "sigma", "x0_mean", "x0_variance", "xi_low", "xi_high"});
        std::string name = "kuramoto";
        s.get("name", name);
        if (name != "kuramoto") throw ConfigError("config: model.name must be kuramoto");
        s.get("sigma", c.model.sigma);
        s.get("x0_mean", c.model.x0_mean);
        s.get("x0_variance", c.model.x0_variance);
        s.get("xi_low", c.model.xi_low);
        s.get("xi_high", c.model.xi_high);
    }
    if (root.has("observable")) {
        const Section s(root.at("observable"), "observable", {"name", "threshold", "constant"});
        s.get("name", c.observable);
        s.get("threshold", c.threshold);
        s.get("constant", c.constant);
    }
    if (root.has("hierarchy")) {
        const Section s(root.at("hierarchy"), "hierarchy", {"P0", "N0", "tau", "max_level", "horizon", "sampler"});
        s.get("P0", c.hierarchy.P0);
        s.get("N0", c.hierarchy.N0);
        s.get("tau", c.hierarchy.tau);
        s.get("max_level", c.hierarchy.max_level);
        s.get("horizon", c.hierarchy.horizon);
        std::string sampler = to_string(c.sampler);
        s.get("sampler", sampler);
        try {
            c.sampler = sampler_from_string(sampler);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (root.has("budget")) {
        const Section s(root.at("budget"), "budget", {"tol_r", "tol", "theta", "nu"});
        // Setting one tolerance clears the other unless both are given.
        if (s.has("tol_r") || s.has("tol")) {
            c.tol_r.reset();
            c.tol.reset();
        }
        s.get_optional("tol_r", c.tol_r);
        s.get_optional("tol", c.tol);
        s.get("theta", c.theta);
        s.get("nu", c.nu);
    }
    if (root.has("pilots")) {
        const Section s(root.at("pilots"), "pilots",
                        {"bar_M1", "bar_M2", "tilde_M1", "tilde_M2", "under_M1", "under_M2"});
        s.get("bar_M1", c.pilots.bar_M1);
        s.get("bar_M2", c.pilots.bar_M2);
        s.get("tilde_M1", c.pilots.tilde_M1);
        s.get("tilde_M2", c.pilots.tilde_M2);
        s.get("under_M1", c.pilots.under_M1);
        s.get("under_M2", c.pilots.under_M2);
    }
    if (root.has("rates") && !root.at("rates").is_null()) {
        const Section s(root.at("rates"), "rates", {"alpha", "w", "s"});
        RateConstants r = default_rates(c.sampler);
        s.get("alpha", r.alpha);
        s.get("w", r.w);
        s.get("s", r.s);
        c.rates = r;
    }
    if (root.has("control")) {
        const Section s(root.at("control"), "control",
                        {"mode", "path", "particles", "steps", "intervals", "relative_floor", "x_min",
                         "x_max", "seed"});
        s.get("mode", c.control.mode);
        s.get("path", c.control.path);
        s.get("particles", c.control.particles);
        s.get("steps", c.control.steps);
        s.get("intervals", c.control.intervals);
        s.get("relative_floor", c.control.relative_floor);
        s.get_optional("x_min", c.control.x_min);
        s.get_optional("x_max", c.control.x_max);
        s.get("seed", c.control.seed);
    }
    if (root.has("rate_study")) {
        const Section s(root.at("rate_study"), "rate_study",
                        {"level_min", "level_max", "variance_M1", "variance_M2", "bias_M1", "bias_M2"});
        s.get("level_min", c.rate_study.level_min);
        s.get("level_max", c.rate_study.level_max);
        s.get("variance_M1", c.rate_study.variance_M1);
        s.get("variance_M2", c.rate_study.variance_M2);
        s.get("bias_M1", c.rate_study.bias_M1);
        s.get("bias_M2", c.rate_study.bias_M2);
    }
    if (root.has("is_experiments")) {
        const Section s(root.at("is_experiments"), "is_experiments",
                        {"level", "exp1_M", "exp1_control_particles", "exp2_M1", "exp2_M2"});
        s.get("level", c.is_study.level);
        s.get("exp1_M", c.is_study.exp1_M);
        s.get("exp1_control_particles", c.is_study.exp1_control_particles);
        s.get("exp2_M1", c.is_study.exp2_M1);
        s.get("exp2_M2", c.is_study.exp2_M2);
    }
    if (root.has("sweep")) {
        const Section s(root.at("sweep"), "sweep",
                        {"tolerances", "repetitions", "reference_tolerance", "reference_value"});
        s.get("tolerances", c.sweep.tolerances);
        s.get("repetitions", c.sweep.repetitions);
        s.get("reference_tolerance", c.sweep.reference_tolerance);
        s.get_optional("reference_value", c.sweep.reference_value);
    }
    if (root.has("run")) {
        const Section s(root.at("run"), "run", {"seed", "workers", "out_dir"});
        s.get("seed", c.seed);
        s.get("workers", c.workers);
        s.get("out_dir", c.out_dir);
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

}  // namespace mvmc
