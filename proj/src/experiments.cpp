#include "mvmc/experiments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "mvmc/error.hpp"

namespace mvmc {

namespace {

// Level means below this many standard errors are left out of the alpha fit.
constexpr double kResolvedBias = 2.0;

std::ofstream open_csv(const std::filesystem::path& path, const std::string& kind) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << kCsvVersion << ' ' << kind << '\n';
    out << std::setprecision(10);
    return out;
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(seed ^ stream_tag({0x6578706572ull, a, b}));
}

}  // namespace

ControlField build_control(const RunConfig& config, const ModelSpec& model, const Observable& observable,
                           std::size_t particles, OfflineControl* diagnostics) {
    const ControlSettings& c = config.control;
    if (c.mode == "zero") return ControlField::zero();
    if (c.mode == "file") return ControlField::load(c.path);
    OfflineControlOptions opts;
    opts.particles = particles ? particles : c.particles;
    opts.steps = c.steps;
    opts.horizon = config.hierarchy.horizon;
    opts.intervals = c.intervals;
    opts.relative_floor = c.relative_floor;
    opts.seed = c.seed;
    opts.workers = config.workers;
    if (c.x_min) opts.grid = SpatialGrid{*c.x_min, *c.x_max, c.intervals};
    OfflineControl solved = solve_offline_control(model, observable, opts, diagnostics != nullptr);
    ControlField field = solved.field;
    if (diagnostics) *diagnostics = std::move(solved);
    return field;
}

ExperimentSetup make_setup(const RunConfig& config) {
    config.validate();
    ExperimentSetup s;
    s.model = config.make_model();
    s.observable = config.make_observable();
    s.control = build_control(config, s.model, s.observable);
    s.hierarchy = config.hierarchy;
    s.sampler = config.sampler;
    s.budget = config.budget();
    s.rates = config.effective_rates();
    s.pilots = config.pilots;
    s.estimator.workers = config.workers;
    return s;
}

double estimator_variance(const LevelStats& st) {
    if (st.M1 > 1) return st.outer_variance / static_cast<double>(st.M1);
    return st.V2 / static_cast<double>(st.M2);
}

RatesResult run_rates(const ExperimentSetup& setup, Sampler sampler, const RatesSettings& settings,
                      std::uint64_t seed) {
    RatesResult result;
    result.sampler = sampler;
    std::vector<double> levels, bias, v1, v2, resolved_levels, resolved_bias;
    for (int l = settings.level_min; l <= settings.level_max; ++l) {
        const LevelStats b = estimate_level(setup.model, setup.observable, setup.control, setup.hierarchy,
                                            sampler, l, settings.bias_M1, settings.bias_M2,
                                            derived_seed(seed, 1, l), setup.estimator);
        const LevelStats v = estimate_level(setup.model, setup.observable, setup.control, setup.hierarchy,
                                            sampler, l, settings.variance_M1, settings.variance_M2,
                                            derived_seed(seed, 2, l), setup.estimator);
        RateRow row;
        row.level = l;
        row.bias_mean = b.mean;
        row.bias_se = std::sqrt(estimator_variance(b));
        row.V1 = v.V1;
        row.V2 = v.V2;
        row.wall_seconds = b.wall_seconds + v.wall_seconds;
        result.rows.push_back(row);
        levels.push_back(l);
        bias.push_back(std::abs(b.mean));
        if (std::abs(b.mean) >= kResolvedBias * row.bias_se) {
            resolved_levels.push_back(l);
            resolved_bias.push_back(std::abs(b.mean));
        }
        v1.push_back(v.V1);
        v2.push_back(v.V2);
    }
    const double base = static_cast<double>(setup.hierarchy.tau);
    // Means lost in their own noise would drag the slope toward zero.
    result.alpha = resolved_levels.size() >= 2 ? fit_log_rate(resolved_levels, resolved_bias, base)
                                               : fit_log_rate(levels, bias, base);
    result.w = fit_log_rate(levels, v1, base);
    result.s = fit_log_rate(levels, v2, base);
    return result;
}

IsResult run_is_experiments(const RunConfig& config, const ExperimentSetup& setup, std::uint64_t seed) {
    const IsSettings& is = config.is_study;
    IsResult result;
    const ControlField zero = ControlField::zero();
    const ControlField small_control =
        build_control(config, setup.model, setup.observable, is.exp1_control_particles);

    auto arm = [&](int experiment, bool with_is, std::size_t M1, std::size_t M2) {
        const ControlField& control = with_is ? (experiment == 1 ? small_control : setup.control) : zero;
        // Both arms share the seed, hence the same laws and Wiener paths.
        const LevelStats st = estimate_level(setup.model, setup.observable, control, setup.hierarchy,
                                             setup.sampler, is.level, M1, M2,
                                             derived_seed(seed, 10 + experiment, M2), setup.estimator);
        IsRow row;
        row.experiment = experiment;
        row.importance_sampling = with_is;
        row.M1 = M1;
        row.M2 = M2;
        row.mean = st.mean;
        row.estimator_variance = estimator_variance(st);
        row.cov2 = st.mean != 0.0 ? row.estimator_variance / (st.mean * st.mean) : INFINITY;
        row.wall_seconds = st.wall_seconds;
        result.rows.push_back(row);
        return row.cov2;
    };

    for (std::size_t M : is.exp1_M) {
        const double without = arm(1, false, 1, M);
        const double with = arm(1, true, 1, M);
        result.exp1_ratio = without / with;
    }
    for (std::size_t M2 : is.exp2_M2) {
        const double without = arm(2, false, is.exp2_M1, M2);
        const double with = arm(2, true, is.exp2_M1, M2);
        result.exp2_ratio = without / with;
    }
    return result;
}

MlmcReport reference_run(const ExperimentSetup& setup, double tolerance, std::uint64_t seed) {
    ErrorBudget budget = setup.budget;
    budget.tolerance = tolerance;
    return run_adaptive(setup.model, setup.observable, setup.control, setup.hierarchy, setup.sampler,
                        budget, setup.rates, setup.pilots, seed, {setup.estimator, {}});
}

SweepResult run_sweep(const ExperimentSetup& setup, const std::vector<double>& tolerances,
                      std::size_t repetitions, double reference, bool single_level, std::uint64_t seed,
                      const std::function<void(const SweepRow&)>& progress) {
    if (tolerances.size() < 2) throw std::invalid_argument("run_sweep: need at least two tolerances");
    SweepResult result;
    result.method = single_level ? "single_level" : "mlmc_" + to_string(setup.sampler);
    result.reference = reference;
    const double scale = setup.budget.relative ? std::abs(reference) : 1.0;
    if (!(scale > 0.0)) throw std::invalid_argument("run_sweep: reference value must be nonzero");
    std::vector<double> tols, costs;
    for (std::size_t t = 0; t < tolerances.size(); ++t) {
        ErrorBudget budget = setup.budget;
        budget.tolerance = tolerances[t];
        SweepSummary sum;
        sum.tolerance = tolerances[t];
        std::size_t hits = 0;
        for (std::size_t r = 0; r < repetitions; ++r) {
            const std::uint64_t s = derived_seed(seed, 100 + t, r);
            const AdaptiveOptions opts{setup.estimator, {}};
            const MlmcReport rep =
                single_level ? run_single_level(setup.model, setup.observable, setup.control, setup.hierarchy,
                                                budget, setup.rates, setup.pilots, s, opts)
                             : run_adaptive(setup.model, setup.observable, setup.control, setup.hierarchy,
                                            setup.sampler, budget, setup.rates, setup.pilots, s, opts);
            SweepRow row;
            row.tolerance = tolerances[t];
            row.repetition = r;
            row.estimate = rep.estimate;
            row.error = std::abs(rep.estimate - reference) / scale;
            row.L = rep.L;
            row.cost = rep.cost;
            row.total_cost = rep.total_cost;
            row.wall_seconds = rep.wall_seconds;
            row.converged = rep.converged;
            result.rows.push_back(row);
            if (progress) progress(row);
            if (row.error <= tolerances[t]) ++hits;
            const double n = static_cast<double>(r + 1);
            sum.mean_L += (rep.L - sum.mean_L) / n;
            sum.mean_cost += (rep.cost - sum.mean_cost) / n;
            sum.mean_total_cost += (rep.total_cost - sum.mean_total_cost) / n;
            sum.mean_wall_seconds += (rep.wall_seconds - sum.mean_wall_seconds) / n;
        }
        sum.success_fraction = static_cast<double>(hits) / static_cast<double>(repetitions);
        result.summary.push_back(sum);
        tols.push_back(sum.tolerance);
        costs.push_back(sum.mean_cost);
    }
    result.cost_slope = loglog_slope(tols, costs);
    return result;
}

void write_rates_csv(const std::filesystem::path& path, const std::vector<RatesResult>& results) {
    auto out = open_csv(path, "rates");
    out << "sampler,level,abs_mean,mean_se,V1,V2,wall_seconds\n";
    for (const RatesResult& r : results)
        for (const RateRow& row : r.rows)
            out << to_string(r.sampler) << ',' << row.level << ',' << std::abs(row.bias_mean) << ','
                << row.bias_se << ',' << row.V1 << ',' << row.V2 << ',' << row.wall_seconds << '\n';
    for (const RatesResult& r : results)
        out << "# fit " << to_string(r.sampler) << " alpha=" << r.alpha.rate() << " w=" << r.w.rate()
            << " s=" << r.s.rate() << " residuals=" << r.alpha.residual << ',' << r.w.residual << ','
            << r.s.residual << '\n';
}

void write_is_csv(const std::filesystem::path& path, const IsResult& result) {
    auto out = open_csv(path, "is_experiments");
    out << "experiment,importance_sampling,M1,M2,mean,estimator_variance,cov2,wall_seconds\n";
    for (const IsRow& r : result.rows)
        out << r.experiment << ',' << (r.importance_sampling ? 1 : 0) << ',' << r.M1 << ',' << r.M2 << ','
            << r.mean << ',' << r.estimator_variance << ',' << r.cov2 << ',' << r.wall_seconds << '\n';
    out << "# ratio exp1=" << result.exp1_ratio << " exp2=" << result.exp2_ratio << '\n';
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepResult>& results) {
    auto out = open_csv(path, "sweep");
    out << "method,tolerance,repetition,estimate,reference,error,L,cost,total_cost,converged,wall_seconds\n";
    for (const SweepResult& s : results)
        for (const SweepRow& r : s.rows)
            out << s.method << ',' << r.tolerance << ',' << r.repetition << ',' << r.estimate << ','
                << s.reference << ',' << r.error << ',' << r.L << ',' << r.cost << ',' << r.total_cost
                << ',' << (r.converged ? 1 : 0) << ',' << r.wall_seconds << '\n';
    for (const SweepResult& s : results) {
        out << "# summary " << s.method << " cost_slope=" << s.cost_slope << '\n';
        for (const SweepSummary& m : s.summary)
            out << "# tol=" << m.tolerance << " mean_L=" << m.mean_L << " mean_cost=" << m.mean_cost
                << " mean_total_cost=" << m.mean_total_cost << " success=" << m.success_fraction << '\n';
    }
}

void write_report_csv(const std::filesystem::path& path, const MlmcReport& report) {
    auto out = open_csv(path, "report");
    out << "level,mean,V1,V2,M1,M2,cost,wall_seconds\n";
    for (const LevelStats& l : report.levels)
        out << l.level << ',' << l.mean << ',' << l.V1 << ',' << l.V2 << ',' << l.M1 << ',' << l.M2 << ','
            << l.cost << ',' << l.wall_seconds << '\n';
    out << "# estimate=" << report.estimate << " L=" << report.L << " bias=" << report.bias
        << " statistical_error=" << report.statistical_error << " cost=" << report.cost
        << " total_cost=" << report.total_cost << " converged=" << (report.converged ? 1 : 0) << '\n';
}

std::string format_report(const MlmcReport& r) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "estimate          " << r.estimate << '\n'
       << "levels            0.." << r.L << (r.converged ? "" : "  (not converged)") << '\n'
       << "tolerance         " << r.budget.tolerance << (r.budget.relative ? " relative" : " absolute")
       << "  theta=" << r.budget.theta << "  nu=" << r.budget.nu << '\n'
       << "bias estimate     " << r.bias << '\n'
       << "statistical error " << r.statistical_error << '\n'
       << "cost              " << r.cost << "  (total " << r.total_cost << ")\n"
       << "wall time         " << r.wall_seconds << " s\n"
       << "rates             alpha=" << r.rates.alpha << " w=" << r.rates.w << " s=" << r.rates.s << '\n';
    os << "\n  level        mean          V1          V2       M1       M2        cost\n";
    for (const LevelStats& l : r.levels)
        os << std::setw(7) << l.level << std::setw(12) << l.mean << std::setw(12) << l.V1 << std::setw(12)
           << l.V2 << std::setw(9) << l.M1 << std::setw(9) << l.M2 << std::setw(12) << l.cost << '\n';
    os << "\nrun log\n";
    for (const IterationLog& e : r.log) os << "  " << e.to_string() << '\n';
    return os.str();
}

}  // namespace mvmc
