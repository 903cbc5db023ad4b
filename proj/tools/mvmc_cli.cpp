// mvmc: multilevel double loop Monte Carlo for McKean-Vlasov SDEs.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mvmc/config.hpp"
#include "mvmc/error.hpp"
#include "mvmc/experiments.hpp"

namespace fs = std::filesystem;
using namespace mvmc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
};

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : RunConfig::load(c.config_path);
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    if (c.out) cfg.out_dir = *c.out;
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    std::ofstream(fs::path(cfg.out_dir) / "effective_config.json") << cfg.to_json() << '\n';
    std::cerr << "effective config written to " << (fs::path(cfg.out_dir) / "effective_config.json").string()
              << " (x0_variance is the variance of the initial normal law)\n";
    return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Run seed (overrides the config)");
    cmd->add_option("--workers", c.workers, "OpenMP workers (overrides the config)")->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "Output directory (overrides the config)");
}

int cmd_solve_control(const Common& common, const std::string& file) {
    const RunConfig cfg = resolve(common);
    const ModelSpec model = cfg.make_model();
    const Observable g = cfg.make_observable();
    OfflineControl diag;
    RunConfig solve_cfg = cfg;
    solve_cfg.control.mode = "solve";
    const ControlField field = build_control(solve_cfg, model, g, 0, &diag);
    const fs::path path = file.empty() ? fs::path(cfg.out_dir) / "control.bin" : fs::path(file);
    field.save(path);
    std::cout << "control written to " << path.string() << '\n'
              << "grid [" << diag.values.grid.x_min << ", " << diag.values.grid.x_max << "] with "
              << diag.values.grid.intervals << " intervals, " << diag.values.steps << " time steps\n"
              << "J vs 2J relative gap at t=0: " << diag.refinement_gap << '\n';
    double peak = 0.0;
    for (double z : field.values()) peak = std::max(peak, std::abs(z));
    std::cout << "max |zeta| = " << peak << (field.is_zero() ? " (zero field)" : "") << '\n';
    return kExitOk;
}

int cmd_rates(const Common& common, const std::string& sampler) {
    const RunConfig cfg = resolve(common);
    const ExperimentSetup setup = make_setup(cfg);
    std::vector<RatesResult> results;
    for (Sampler s : {Sampler::naive, Sampler::antithetic}) {
        if (sampler != "both" && sampler_from_string(sampler) != s) continue;
        results.push_back(run_rates(setup, s, cfg.rate_study, cfg.seed));
        const RatesResult& r = results.back();
        std::cout << to_string(s) << ": alpha=" << r.alpha.rate() << " w=" << r.w.rate() << " s=" << r.s.rate()
                  << '\n';
    }
    write_rates_csv(fs::path(cfg.out_dir) / "rates.csv", results);
    return kExitOk;
}

int cmd_is_experiments(const Common& common) {
    const RunConfig cfg = resolve(common);
    const ExperimentSetup setup = make_setup(cfg);
    const IsResult r = run_is_experiments(cfg, setup, cfg.seed);
    write_is_csv(fs::path(cfg.out_dir) / "is_experiments.csv", r);
    std::cout << "squared CoV ratio (no IS / IS): experiment 1 " << r.exp1_ratio << ", experiment 2 "
              << r.exp2_ratio << '\n';
    return kExitOk;
}

int cmd_adaptive(const Common& common) {
    const RunConfig cfg = resolve(common);
    const ExperimentSetup setup = make_setup(cfg);
    AdaptiveOptions opts{setup.estimator, [](const IterationLog& e) { std::cerr << e.to_string() << '\n'; }};
    const MlmcReport report = run_adaptive(setup.model, setup.observable, setup.control, setup.hierarchy,
                                           setup.sampler, setup.budget, setup.rates, setup.pilots, cfg.seed, opts);
    write_report_csv(fs::path(cfg.out_dir) / "report.csv", report);
    std::ofstream(fs::path(cfg.out_dir) / "report.txt") << format_report(report);
    std::cout << format_report(report);
    return report.converged ? kExitOk : kExitNumerical;
}

int cmd_sweep(const Common& common, bool single_level) {
    const RunConfig cfg = resolve(common);
    const ExperimentSetup setup = make_setup(cfg);
    double reference;
    if (cfg.sweep.reference_value) {
        reference = *cfg.sweep.reference_value;
    } else {
        std::cerr << "reference run at tolerance " << cfg.sweep.reference_tolerance << "...\n";
        const MlmcReport ref = reference_run(setup, cfg.sweep.reference_tolerance, mix64(cfg.seed ^ 0x726566));
        reference = ref.estimate;
        std::cerr << "reference = " << reference << " (L=" << ref.L << ")\n";
    }
    const SweepResult r = run_sweep(setup, cfg.sweep.tolerances, cfg.sweep.repetitions, reference,
                                    single_level, cfg.seed, [](const SweepRow& row) {
                                        std::cerr << "tol=" << row.tolerance << " rep=" << row.repetition
                                                  << " estimate=" << row.estimate << " L=" << row.L << '\n';
                                    });
    write_sweep_csv(fs::path(cfg.out_dir) / "sweep.csv", {r});
    for (const SweepSummary& s : r.summary)
        std::cout << "tol=" << s.tolerance << " mean_L=" << s.mean_L << " mean_cost=" << s.mean_cost
                  << " within_tol=" << s.success_fraction << '\n';
    std::cout << r.method << " cost slope " << r.cost_slope << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilevel double loop Monte Carlo with importance sampling for McKean-Vlasov SDEs"};
    app.require_subcommand(1);

    Common common;
    std::string control_file;
    std::string sampler = "both";

    auto* solve = app.add_subcommand("solve-control", "Solve the offline control and save it");
    add_common(solve, common);
    solve->add_option("--file", control_file, "Output file (default OUT/control.bin)");

    auto* rates = app.add_subcommand("rates", "Level-difference decay rates");
    add_common(rates, common);
    rates->add_option("--sampler", sampler, "naive, antithetic or both")
        ->check(CLI::IsMember({"naive", "antithetic", "both"}));

    auto* is = app.add_subcommand("is-experiments", "Importance sampling variance reduction");
    add_common(is, common);
    auto* adaptive = app.add_subcommand("adaptive", "One adaptive multilevel run");
    add_common(adaptive, common);
    auto* sweep = app.add_subcommand("adaptive-sweep", "Adaptive runs over a tolerance sweep");
    add_common(sweep, common);
    auto* baseline = app.add_subcommand("baseline", "Single-level double loop runs over a tolerance sweep");
    add_common(baseline, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*solve) return cmd_solve_control(common, control_file);
        if (*rates) return cmd_rates(common, sampler);
        if (*is) return cmd_is_experiments(common);
        if (*adaptive) return cmd_adaptive(common);
        if (*sweep) return cmd_sweep(common, false);
        if (*baseline) return cmd_sweep(common, true);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}
