#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mvmc/estimators.hpp"

namespace mvmc {

/// Tolerance split: bias <= theta TOL |G|, statistical error <= (1 - theta) TOL |G|
/// at confidence 1 - nu. In absolute mode |G| is frozen to 1.
struct ErrorBudget {
    double tolerance = 0.05;
    bool relative = true;
    double theta = 0.5;
    double nu = 0.05;

    double c_nu() const;
    void validate() const;
};

/// Decay rates: |E[Delta G_l]| ~ tau^{-alpha l}, V1 ~ tau^{-w l}, V2 ~ tau^{-s l}.
struct RateConstants {
    double alpha = 1.0;
    double w = 2.0;
    double s = 2.0;
};

RateConstants default_rates(Sampler sampler);

/// {M_bar}: level-0 pilot; {M_tilde}: variance estimation; {M_under}: bias floors.
struct PilotSizes {
    std::size_t bar_M1 = 1000, bar_M2 = 100;
    std::size_t tilde_M1 = 25, tilde_M2 = 1000;
    std::size_t under_M1 = 100, under_M2 = 50;
};

struct LevelInput {
    double V1 = 0.0;
    double V2 = 0.0;
    std::size_t P = 1;
    std::size_t N = 1;
};

/// Continuous Lagrangian optimum (M1_l, M1_l * M2_l) before rounding.
std::vector<std::pair<double, double>> continuous_allocation(const std::vector<LevelInput>& levels,
                                                             const ErrorBudget& budget, double g_bar);

/// M1 = ceil(M1_cont), M2 = ceil(Mtilde / ceil(M1_cont)), both at least 1.
std::vector<std::pair<std::size_t, std::size_t>> optimal_allocation(const std::vector<LevelInput>& levels,
                                                                    const ErrorBudget& budget,
                                                                    double g_bar);

/// Richardson estimate |E[Delta G_{l+1}]| / (1 - tau^-alpha), raised to the
/// prior estimates discounted by tau^-alpha (history.back(), level l-1) and
/// tau^-2alpha (level l-2) when present.
double bias_estimate(double level_diff_mean, std::size_t tau, double alpha,
                     const std::vector<double>& history = {});

/// max(V_{l-1} / tau^w, V_{l-2} / tau^{2w}) and the same for V2 with s, from
/// the last two history entries. Requires level > 3.
std::pair<double, double> extrapolate_variances(const std::vector<double>& V1_history,
                                                const std::vector<double>& V2_history,
                                                std::size_t tau, double w, double s, int level);

struct IterationLog {
    int L = 0;
    double bias = 0.0;
    double bias_limit = 0.0;
    double g_bar = 0.0;
    double variance = 0.0;
    double variance_limit = 0.0;
    bool variances_extrapolated = false;
    std::vector<std::pair<std::size_t, std::size_t>> allocation;
    std::size_t bias_M1 = 0, bias_M2 = 0;

    std::string to_string() const;
};

struct MlmcReport {
    double estimate = 0.0;
    std::vector<LevelStats> levels;
    int L = 0;
    double bias = 0.0;
    /// sum_l V1_l / M1_l + V2_l / (M1_l M2_l) with the planning variances.
    double variance = 0.0;
    /// C_nu sqrt(variance).
    double statistical_error = 0.0;
    /// Cost of the final estimator, sum over levels of M1 P^2 N + M1 M2 P N.
    double cost = 0.0;
    /// Everything spent, including pilots, variance and bias estimation.
    double total_cost = 0.0;
    double wall_seconds = 0.0;
    RateConstants rates;
    ErrorBudget budget;
    bool converged = false;
    std::vector<IterationLog> log;
};

struct AdaptiveOptions {
    EstimatorOptions estimator;
    /// Called once per adaptive iteration.
    std::function<void(const IterationLog&)> on_iteration;
};

/// Adaptive multilevel double loop estimator. Grows L until the robust bias
/// estimate is within theta TOL |G_bar|; when max_level is reached first the
/// partial report comes back with converged = false.
MlmcReport run_adaptive(const ModelSpec& model, const Observable& observable,
                        const ControlField& control, const Hierarchy& hierarchy, Sampler sampler,
                        const ErrorBudget& budget, const RateConstants& rates,
                        const PilotSizes& pilots, std::uint64_t seed,
                        const AdaptiveOptions& options = {});

/// Single-level double loop baseline: the level is raised under the same bias
/// rule, then (M1, M2) come from the one-level allocation.
MlmcReport run_single_level(const ModelSpec& model, const Observable& observable,
                            const ControlField& control, const Hierarchy& hierarchy,
                            const ErrorBudget& budget, const RateConstants& rates,
                            const PilotSizes& pilots, std::uint64_t seed,
                            const AdaptiveOptions& options = {});

}  // namespace mvmc
