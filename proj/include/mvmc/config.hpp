#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvmc/adaptive.hpp"
#include "mvmc/control.hpp"
#include "mvmc/estimators.hpp"
#include "mvmc/model.hpp"

namespace mvmc {

struct ControlSettings {
    /// "solve" (offline KBE), "zero", or "file".
    std::string mode = "solve";
    std::string path;
    std::size_t particles = 1000;
    std::size_t steps = 100;
    std::size_t intervals = 2000;
    double relative_floor = 1e-12;
    /// Explicit domain; the default domain is widened automatically when unset.
    std::optional<double> x_min, x_max;
    /// Seed of the offline law; distinct from the run seed so the control is
    /// independent of every sample it is used with.
    std::uint64_t seed = 7;
};

struct RatesSettings {
    int level_min = 1;
    int level_max = 5;
    std::size_t variance_M1 = 100, variance_M2 = 10000;
    std::size_t bias_M1 = 1000, bias_M2 = 1000;
};

struct IsSettings {
    int level = 3;
    std::vector<std::size_t> exp1_M = {100, 1000, 10000, 100000};
    std::size_t exp1_control_particles = 200;
    std::size_t exp2_M1 = 1000;
    std::vector<std::size_t> exp2_M2 = {10, 100, 1000};
};

struct SweepSettings {
    std::vector<double> tolerances = {0.2, 0.1, 0.05, 0.025};
    std::size_t repetitions = 20;
    /// Tolerance of the reference run; its estimate is the error proxy.
    double reference_tolerance = 0.01;
    /// Skip the reference run when set.
    std::optional<double> reference_value;
};

struct RunConfig {
    KuramotoParams model;
    /// "psi", "cos" or "constant".
    std::string observable = "psi";
    double threshold = 2.5;
    double constant = 1.0;
    Hierarchy hierarchy;
    Sampler sampler = Sampler::antithetic;
    std::optional<double> tol_r = 0.05;
    std::optional<double> tol;
    double theta = 0.5;
    double nu = 0.05;
    PilotSizes pilots;
    std::optional<RateConstants> rates;
    ControlSettings control;
    RatesSettings rate_study;
    IsSettings is_study;
    SweepSettings sweep;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = "out";

    /// Throws ConfigError on violated invariants.
    void validate() const;

    ErrorBudget budget() const;
    RateConstants effective_rates() const;
    Observable make_observable() const;
    ModelSpec make_model() const;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
};

}  // namespace mvmc
