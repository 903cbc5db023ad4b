#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mvmc/adaptive.hpp"
#include "mvmc/config.hpp"
#include "mvmc/stats.hpp"

namespace mvmc {

inline constexpr const char* kCsvVersion = "# mvmc-csv v1";

/// Everything a run needs, resolved from a RunConfig.
struct ExperimentSetup {
    ModelSpec model;
    Observable observable;
    ControlField control = ControlField::zero();
    Hierarchy hierarchy;
    Sampler sampler = Sampler::antithetic;
    ErrorBudget budget;
    RateConstants rates;
    PilotSizes pilots;
    EstimatorOptions estimator;
};

/// Builds the control the config asks for. `particles` overrides the offline
/// law size when nonzero; `diagnostics` receives the solver output for "solve".
ControlField build_control(const RunConfig& config, const ModelSpec& model, const Observable& observable,
                           std::size_t particles = 0, OfflineControl* diagnostics = nullptr);

ExperimentSetup make_setup(const RunConfig& config);

struct RateRow {
    int level = 0;
    double bias_mean = 0.0;
    double bias_se = 0.0;
    double V1 = 0.0;
    double V2 = 0.0;
    double wall_seconds = 0.0;
};

struct RatesResult {
    Sampler sampler = Sampler::antithetic;
    std::vector<RateRow> rows;
    /// Fits in log_tau of |E[Delta G]|, V1 and V2 against the level.
    RateFit alpha, w, s;
};

RatesResult run_rates(const ExperimentSetup& setup, Sampler sampler, const RatesSettings& settings,
                      std::uint64_t seed);

struct IsRow {
    int experiment = 1;
    bool importance_sampling = false;
    std::size_t M1 = 0;
    std::size_t M2 = 0;
    double mean = 0.0;
    double estimator_variance = 0.0;
    double cov2 = 0.0;
    double wall_seconds = 0.0;
};

struct IsResult {
    std::vector<IsRow> rows;
    /// Squared CoV without over with the control, at the largest sample count.
    double exp1_ratio = 0.0;
    double exp2_ratio = 0.0;
};

/// Experiment 1: M1 = 1, inner count swept, control from a small offline law.
/// Experiment 2: M1 fixed, M2 swept, control from the configured offline law.
IsResult run_is_experiments(const RunConfig& config, const ExperimentSetup& setup, std::uint64_t seed);

/// Variance of a level estimate: outer sample variance over M1, or the inner
/// variance over M2 when there is a single outer sample.
double estimator_variance(const LevelStats& stats);

struct SweepRow {
    double tolerance = 0.0;
    std::size_t repetition = 0;
    double estimate = 0.0;
    /// |estimate - reference|, relative to |reference| in relative mode.
    double error = 0.0;
    int L = 0;
    double cost = 0.0;
    double total_cost = 0.0;
    double wall_seconds = 0.0;
    bool converged = false;
};

struct SweepSummary {
    double tolerance = 0.0;
    double mean_L = 0.0;
    double mean_cost = 0.0;
    double mean_total_cost = 0.0;
    double mean_wall_seconds = 0.0;
    /// Fraction of runs with error <= tolerance.
    double success_fraction = 0.0;
};

struct SweepResult {
    std::string method;
    double reference = 0.0;
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summary;
    /// log-log slope of mean cost against tolerance.
    double cost_slope = 0.0;
};

/// One adaptive (or single-level) run per (tolerance, repetition), seeds
/// derived from `seed`. `progress` is called after every run.
SweepResult run_sweep(const ExperimentSetup& setup, const std::vector<double>& tolerances,
                      std::size_t repetitions, double reference, bool single_level, std::uint64_t seed,
                      const std::function<void(const SweepRow&)>& progress = {});

/// Adaptive estimate at `tolerance`, used as the error proxy of a sweep.
MlmcReport reference_run(const ExperimentSetup& setup, double tolerance, std::uint64_t seed);

void write_rates_csv(const std::filesystem::path& path, const std::vector<RatesResult>& results);
void write_is_csv(const std::filesystem::path& path, const IsResult& result);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepResult>& results);
void write_report_csv(const std::filesystem::path& path, const MlmcReport& report);
/// Human-readable report: estimate, error budget, per-level table and run log.
std::string format_report(const MlmcReport& report);

}  // namespace mvmc
