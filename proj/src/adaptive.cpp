#include "mvmc/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mvmc/error.hpp"
#include "mvmc/stats.hpp"

namespace mvmc {

namespace {

enum Phase : std::uint64_t { kPilot = 1, kVariance = 2, kBias = 3, kEstimate = 4 };

std::uint64_t phase_seed(std::uint64_t seed, Phase phase, int L) {
    return mix64(seed ^ stream_tag({0x6164617074ull, phase, static_cast<std::uint64_t>(L)}));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double reference_magnitude(const ErrorBudget& budget, double estimate) {
    if (!budget.relative) return 1.0;
    const double g = std::abs(estimate);
    if (!(g > 0.0))
        throw NumericalError("adaptive: estimate of E[G] is zero, relative tolerance is undefined");
    return g;
}

double planned_variance(const std::vector<LevelInput>& in,
                        const std::vector<std::pair<std::size_t, std::size_t>>& alloc) {
    double v = 0.0;
    for (std::size_t l = 0; l < in.size(); ++l) {
        const double m1 = static_cast<double>(alloc[l].first);
        const double m2 = static_cast<double>(alloc[l].second);
        v += in[l].V1 / m1 + in[l].V2 / (m1 * m2);
    }
    return v;
}

}  // namespace

double ErrorBudget::c_nu() const { return normal_quantile_two_sided(nu); }

void ErrorBudget::validate() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("ErrorBudget: tolerance must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("ErrorBudget: theta must lie in (0, 1)");
    if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("ErrorBudget: nu must lie in (0, 1)");
}

RateConstants default_rates(Sampler sampler) {
    return sampler == Sampler::antithetic ? RateConstants{1.0, 2.0, 2.0} : RateConstants{1.0, 1.0, 1.0};
}

std::vector<std::pair<double, double>> continuous_allocation(const std::vector<LevelInput>& levels,
                                                             const ErrorBudget& budget, double g_bar) {
    budget.validate();
    if (g_bar == 0.0 || !std::isfinite(g_bar))
        throw std::invalid_argument("optimal_allocation: G_bar must be finite and nonzero");
    const double c = budget.c_nu();
    const double k = c * c / std::pow((1.0 - budget.theta) * budget.tolerance * g_bar, 2);
    double S = 0.0;
    for (const LevelInput& l : levels) {
        if (!(l.V1 >= 0.0) || !(l.V2 >= 0.0)) throw std::invalid_argument("optimal_allocation: negative variance");
        const double P = static_cast<double>(l.P), N = static_cast<double>(l.N);
        S += std::sqrt(P * N) * (std::sqrt(l.V1 * P) + std::sqrt(l.V2));
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(levels.size());
    for (const LevelInput& l : levels) {
        const double P = static_cast<double>(l.P), N = static_cast<double>(l.N);
        out.emplace_back(k * std::sqrt(l.V1) / std::sqrt(P * P * N) * S,
                         k * std::sqrt(l.V2) / std::sqrt(P * N) * S);
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> optimal_allocation(const std::vector<LevelInput>& levels,
                                                                    const ErrorBudget& budget,
                                                                    double g_bar) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& [m1, mt] : continuous_allocation(levels, budget, g_bar)) {
        const double M1 = std::max(1.0, std::ceil(m1));
        const double M2 = std::max(1.0, std::ceil(mt / M1));
        out.emplace_back(static_cast<std::size_t>(M1), static_cast<std::size_t>(M2));
    }
    return out;
}

double bias_estimate(double level_diff_mean, std::size_t tau, double alpha,
                     const std::vector<double>& history) {
    if (!(alpha > 0.0)) throw std::invalid_argument("bias_estimate: alpha must be positive");
    const double t = std::pow(static_cast<double>(tau), -alpha);
    double bias = std::abs(level_diff_mean) / (1.0 - t);
    if (!history.empty()) bias = std::max(bias, history.back() * t);
    if (history.size() >= 2) bias = std::max(bias, history[history.size() - 2] * t * t);
    return bias;
}

std::pair<double, double> extrapolate_variances(const std::vector<double>& V1_history,
                                                const std::vector<double>& V2_history,
                                                std::size_t tau, double w, double s, int level) {
    if (level <= 3) throw std::invalid_argument("extrapolate_variances: only for levels above 3");
    if (V1_history.size() < 2 || V2_history.size() < 2)
        throw std::invalid_argument("extrapolate_variances: need two prior levels");
    const double t = static_cast<double>(tau);
    const auto n1 = V1_history.size(), n2 = V2_history.size();
    return {std::max(V1_history[n1 - 1] / std::pow(t, w), V1_history[n1 - 2] / std::pow(t, 2.0 * w)),
            std::max(V2_history[n2 - 1] / std::pow(t, s), V2_history[n2 - 2] / std::pow(t, 2.0 * s))};
}

std::string IterationLog::to_string() const {
    std::ostringstream os;
    os.precision(6);
    os << "L=" << L << " bias=" << bias << " limit=" << bias_limit << " G=" << g_bar
       << " var=" << variance << " var_limit=" << variance_limit
       << (variances_extrapolated ? " V:extrapolated" : " V:estimated") << " bias_M=(" << bias_M1
       << "," << bias_M2 << ") M=";
    for (std::size_t l = 0; l < allocation.size(); ++l)
        os << (l ? ";" : "") << allocation[l].first << "x" << allocation[l].second;
    return os.str();
}

MlmcReport run_adaptive(const ModelSpec& model, const Observable& observable,
                        const ControlField& control, const Hierarchy& hierarchy, Sampler sampler,
                        const ErrorBudget& budget, const RateConstants& rates,
                        const PilotSizes& pilots, std::uint64_t seed, const AdaptiveOptions& options) {
    hierarchy.validate();
    budget.validate();
    const auto start = std::chrono::steady_clock::now();
    const EstimatorOptions& est = options.estimator;
    const double c = budget.c_nu();

    MlmcReport report;
    report.rates = rates;
    report.budget = budget;

    const LevelStats pilot = estimate_level(model, observable, control, hierarchy, sampler, 0,
                                            pilots.bar_M1, pilots.bar_M2, phase_seed(seed, kPilot, 0), est);
    report.total_cost += pilot.cost;
    std::vector<double> V1{pilot.V1}, V2{pilot.V2};
    double g_bar = reference_magnitude(budget, pilot.mean);
    report.estimate = pilot.mean;
    report.levels = {pilot};
    std::vector<double> bias_history;

    for (int L = 1;; ++L) {
        if (L > hierarchy.max_level) {
            report.converged = false;
            break;
        }
        IterationLog entry;
        entry.L = L;
        if (L <= 3) {
            const LevelStats v = estimate_level(model, observable, control, hierarchy, sampler, L,
                                                pilots.tilde_M1, pilots.tilde_M2,
                                                phase_seed(seed, kVariance, L), est);
            report.total_cost += v.cost;
            V1.push_back(v.V1);
            V2.push_back(v.V2);
        } else {
            const auto [v1, v2] = extrapolate_variances(V1, V2, hierarchy.tau, rates.w, rates.s, L);
            V1.push_back(v1);
            V2.push_back(v2);
            entry.variances_extrapolated = true;
        }

        std::vector<LevelInput> inputs;
        for (int l = 0; l <= L; ++l)
            inputs.push_back({V1[l], V2[l], hierarchy.particles(l), hierarchy.steps(l)});
        const auto alloc = optimal_allocation(inputs, budget, g_bar);

        // The level-L allocation stands in for the not yet allocated level L + 1.
        entry.bias_M1 = std::max(alloc[L].first, pilots.under_M1);
        entry.bias_M2 = std::max(alloc[L].second, pilots.under_M2);
        const LevelStats b = estimate_level(model, observable, control, hierarchy, sampler, L + 1,
                                            entry.bias_M1, entry.bias_M2, phase_seed(seed, kBias, L), est);
        report.total_cost += b.cost;
        const double bias = bias_estimate(b.mean, hierarchy.tau, rates.alpha,
                                          L > 2 ? bias_history : std::vector<double>{});
        bias_history.push_back(bias);

        std::vector<LevelStats> levels;
        double estimate = 0.0;
        double cost = 0.0;
        for (int l = 0; l <= L; ++l) {
            levels.push_back(estimate_level(model, observable, control, hierarchy, sampler, l,
                                            alloc[l].first, alloc[l].second,
                                            phase_seed(seed, kEstimate, L), est));
            estimate += levels.back().mean;
            cost += levels.back().cost;
        }
        report.total_cost += cost;
        report.levels = std::move(levels);
        report.estimate = estimate;
        report.cost = cost;
        report.L = L;
        report.bias = bias;
        report.variance = planned_variance(inputs, alloc);
        report.statistical_error = c * std::sqrt(report.variance);

        entry.bias = bias;
        entry.variance = report.variance;
        entry.variance_limit = std::pow((1.0 - budget.theta) * budget.tolerance * g_bar / c, 2);
        entry.allocation = alloc;
        g_bar = reference_magnitude(budget, estimate);
        entry.g_bar = g_bar;
        entry.bias_limit = budget.theta * budget.tolerance * g_bar;
        report.log.push_back(entry);
        if (options.on_iteration) options.on_iteration(entry);
        if (bias <= entry.bias_limit) {
            report.converged = true;
            break;
        }
    }
    report.wall_seconds = seconds_since(start);
    return report;
}

MlmcReport run_single_level(const ModelSpec& model, const Observable& observable,
                            const ControlField& control, const Hierarchy& hierarchy,
                            const ErrorBudget& budget, const RateConstants& rates,
                            const PilotSizes& pilots, std::uint64_t seed,
                            const AdaptiveOptions& options) {
    hierarchy.validate();
    budget.validate();
    const auto start = std::chrono::steady_clock::now();
    const EstimatorOptions& est = options.estimator;
    const double c = budget.c_nu();

    MlmcReport report;
    report.rates = rates;
    report.budget = budget;
    std::vector<double> bias_history;

    for (int L = 0;; ++L) {
        if (L > hierarchy.max_level) {
            report.converged = false;
            break;
        }
        IterationLog entry;
        entry.L = L;
        const Hierarchy at_L{hierarchy.particles(L), hierarchy.steps(L), hierarchy.tau, 0, hierarchy.horizon};
        const std::size_t m1 = L == 0 ? pilots.bar_M1 : pilots.tilde_M1;
        const std::size_t m2 = L == 0 ? pilots.bar_M2 : pilots.tilde_M2;
        const LevelStats pilot = estimate_level(model, observable, control, at_L, Sampler::antithetic, 0,
                                                m1, m2, phase_seed(seed, kPilot, L), est);
        report.total_cost += pilot.cost;
        const double g_bar = reference_magnitude(budget, pilot.mean);
        const std::vector<LevelInput> inputs{{pilot.V1, pilot.V2, at_L.P0, at_L.N0}};
        const auto alloc = optimal_allocation(inputs, budget, g_bar);

        entry.bias_M1 = std::max(alloc[0].first, pilots.under_M1);
        entry.bias_M2 = std::max(alloc[0].second, pilots.under_M2);
        const LevelStats b = estimate_level(model, observable, control, hierarchy, Sampler::antithetic,
                                            L + 1, entry.bias_M1, entry.bias_M2,
                                            phase_seed(seed, kBias, L), est);
        report.total_cost += b.cost;
        const double bias = bias_estimate(b.mean, hierarchy.tau, rates.alpha,
                                          L > 2 ? bias_history : std::vector<double>{});
        bias_history.push_back(bias);

        entry.bias = bias;
        entry.g_bar = g_bar;
        entry.bias_limit = budget.theta * budget.tolerance * g_bar;
        entry.allocation = alloc;
        entry.variance = planned_variance(inputs, alloc);
        entry.variance_limit = std::pow((1.0 - budget.theta) * budget.tolerance * g_bar / c, 2);
        report.log.push_back(entry);
        if (options.on_iteration) options.on_iteration(entry);
        if (bias > entry.bias_limit) continue;

        const LevelStats final_run = estimate_level(model, observable, control, at_L, Sampler::antithetic,
                                                    0, alloc[0].first, alloc[0].second,
                                                    phase_seed(seed, kEstimate, L), est);
        LevelStats shown = final_run;
        shown.level = L;
        report.levels = {shown};
        report.estimate = final_run.mean;
        report.cost = final_run.cost;
        report.total_cost += final_run.cost;
        report.L = L;
        report.bias = bias;
        report.variance = entry.variance;
        report.statistical_error = c * std::sqrt(report.variance);
        report.converged = true;
        break;
    }
    report.wall_seconds = seconds_since(start);
    return report;
}

}  // namespace mvmc
