#include "mvmc/estimators.hpp"

#include <chrono>
#include <stdexcept>

#include "mvmc/parallel.hpp"
#include "mvmc/stats.hpp"

namespace mvmc {

namespace {

constexpr std::uint64_t kLawDomain = 0x6c6177;    // "law"
constexpr std::uint64_t kPathDomain = 0x70617468;  // "path"

std::size_t power(std::size_t base, int exponent) {
    std::size_t r = 1;
    for (int i = 0; i < exponent; ++i) r *= base;
    return r;
}

struct OuterResult {
    double mean = 0.0;
    double variance = 0.0;
    double fine = 0.0;
    double coarse = 0.0;
};

}  // namespace

std::size_t Hierarchy::particles(int level) const {
    if (level < 0) throw std::out_of_range("Hierarchy: negative level");
    return P0 * power(tau, level);
}

std::size_t Hierarchy::steps(int level) const {
    if (level < 0) throw std::out_of_range("Hierarchy: negative level");
    return N0 * power(tau, level);
}

void Hierarchy::validate() const {
    if (P0 == 0 || N0 == 0) throw std::invalid_argument("Hierarchy: P0 and N0 must be positive");
    if (tau < 2) throw std::invalid_argument("Hierarchy: tau must be an integer >= 2");
    if (max_level < 0 || max_level > 30) throw std::invalid_argument("Hierarchy: max_level out of range");
    if (!(horizon > 0.0)) throw std::invalid_argument("Hierarchy: horizon must be positive");
}

std::string to_string(Sampler sampler) { return sampler == Sampler::naive ? "naive" : "antithetic"; }

Sampler sampler_from_string(const std::string& name) {
    if (name == "naive") return Sampler::naive;
    if (name == "antithetic") return Sampler::antithetic;
    throw std::invalid_argument("unknown sampler '" + name + "' (expected naive or antithetic)");
}

double level_cost(std::size_t P, std::size_t N, std::size_t M1, std::size_t M2) {
    const double p = static_cast<double>(P), n = static_cast<double>(N);
    const double m1 = static_cast<double>(M1), m2 = static_cast<double>(M2);
    return m1 * p * p * n + m1 * m2 * p * n;
}

RandomBlock level_randomness(const Hierarchy& hierarchy, int level, std::uint64_t seed,
                             std::uint64_t outer) {
    return RandomBlock(seed, stream_tag({kLawDomain, static_cast<std::uint64_t>(level), outer}),
                       hierarchy.particles(level), hierarchy.steps(level));
}

LevelLaws build_level_laws(const ModelSpec& model, const Hierarchy& hierarchy, Sampler sampler,
                           int level, const RandomBlock& block, KernelRoute route) {
    const ParticleOptions opts{route, 1};
    const double T = hierarchy.horizon;
    LevelLaws laws;
    laws.fine = std::make_unique<EmpiricalLaw>(
        simulate_particle_system(model, hierarchy.particles(level), hierarchy.steps(level), T, block, opts));
    if (level == 0) return laws;
    const std::size_t Pc = hierarchy.particles(level - 1);
    const std::size_t Nc = hierarchy.steps(level - 1);
    const std::size_t groups = sampler == Sampler::antithetic ? hierarchy.tau : 1;
    laws.coarse.reserve(groups);
    for (std::size_t a = 0; a < groups; ++a)
        laws.coarse.push_back(simulate_particle_system(model, Pc, Nc, T, block.subrange(a * Pc, Pc), opts));
    return laws;
}

DecoupledDraw decoupled_randomness(const ModelSpec& model, const Hierarchy& hierarchy, int level,
                                   std::uint64_t seed, std::uint64_t outer, std::uint64_t inner) {
    const auto lv = static_cast<std::uint64_t>(level);
    RandomStream init(seed, stream_tag({kPathDomain, lv, outer, inner,
                                        static_cast<std::uint64_t>(StreamRole::initial_state)}));
    RandomStream noise(seed, stream_tag({kPathDomain, lv, outer, inner,
                                         static_cast<std::uint64_t>(StreamRole::increments)}));
    const std::size_t d = model.dimension;
    std::array<double, kMaxDimension> x0{};
    model.initial_state(init, std::span(x0.data(), d));
    const double xi = model.coefficient(init);
    return {x0, xi, WienerPath::generate(noise, hierarchy.steps(level), d, hierarchy.horizon)};
}

InnerSample level_difference_sample(const ModelSpec& model, const Observable& observable,
                                    const ControlField& control, const EmpiricalLaw& fine,
                                    std::span<const EmpiricalLaw> coarse, const DecoupledDraw& draw) {
    const StateView x0(draw.x0.data(), model.dimension);
    const std::size_t factor = coarse.empty() ? 1 : fine.steps() / coarse.front().steps();
    const PathOutcome f = simulate_decoupled_path(model, fine, control, draw.wiener, draw.xi, x0, factor);
    InnerSample s;
    s.fine = observable(f.state()) * f.likelihood;
    if (coarse.empty()) {
        s.difference = s.fine;
        return s;
    }
    const WienerPath coarse_wiener = draw.wiener.coarsen(factor);
    double acc = 0.0;
    for (const EmpiricalLaw& law : coarse) {
        const PathOutcome c = simulate_decoupled_path(model, law, control, coarse_wiener, draw.xi, x0);
        acc += observable(c.state()) * c.likelihood;
    }
    s.coarse = acc / static_cast<double>(coarse.size());
    s.difference = s.fine - s.coarse;
    return s;
}

LevelStats estimate_level(const ModelSpec& model, const Observable& observable,
                          const ControlField& control, const Hierarchy& hierarchy, Sampler sampler,
                          int level, std::size_t M1, std::size_t M2, std::uint64_t seed,
                          const EstimatorOptions& options) {
    hierarchy.validate();
    if (M1 == 0 || M2 == 0) throw std::invalid_argument("estimate_level: M1 and M2 must be positive");
    if (level < 0) throw std::invalid_argument("estimate_level: negative level");
    const auto start = std::chrono::steady_clock::now();

    std::vector<OuterResult> outer(M1);
    parallel_for(M1, options.workers, [&](std::size_t i) {
        const RandomBlock block = level_randomness(hierarchy, level, seed, i);
        const LevelLaws laws = build_level_laws(model, hierarchy, sampler, level, block, options.route);
        RunningStats diff, fine, coarse;
        for (std::size_t j = 0; j < M2; ++j) {
            const DecoupledDraw draw = decoupled_randomness(model, hierarchy, level, seed, i, j);
            const InnerSample s =
                level_difference_sample(model, observable, control, *laws.fine, laws.coarse, draw);
            diff.add(s.difference);
            fine.add(s.fine);
            coarse.add(s.coarse);
        }
        outer[i] = {diff.mean(), diff.variance(), fine.mean(), coarse.mean()};
    });

    LevelStats st;
    st.level = level;
    st.M1 = M1;
    st.M2 = M2;
    RunningStats means, fine, coarse;
    double inner_var = 0.0;
    for (const OuterResult& r : outer) {
        means.add(r.mean);
        fine.add(r.fine);
        coarse.add(r.coarse);
        inner_var += r.variance;
    }
    st.mean = means.mean();
    st.fine_mean = fine.mean();
    st.coarse_mean = coarse.mean();
    st.outer_variance = means.variance();
    st.V1 = st.outer_variance;
    st.V2 = inner_var / static_cast<double>(M1);
    st.degenerate = M1 < 2 || M2 < 2;
    st.cost = level_cost(hierarchy.particles(level), hierarchy.steps(level), M1, M2);
    st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return st;
}

LevelStats dlmc(const ModelSpec& model, const Observable& observable, const ControlField& control,
                std::size_t P, std::size_t N, double horizon, std::size_t M1, std::size_t M2,
                std::uint64_t seed, const EstimatorOptions& options) {
    Hierarchy single{P, N, 2, 0, horizon};
    return estimate_level(model, observable, control, single, Sampler::antithetic, 0, M1, M2, seed, options);
}

LevelStats level_difference_antithetic(const ModelSpec& model, const Observable& observable,
                                       const ControlField& control, const Hierarchy& hierarchy,
                                       int level, std::size_t M1, std::size_t M2, std::uint64_t seed,
                                       const EstimatorOptions& options) {
    if (level < 1) throw std::invalid_argument("level_difference_antithetic: level must be >= 1");
    return estimate_level(model, observable, control, hierarchy, Sampler::antithetic, level, M1, M2,
                          seed, options);
}

LevelStats level_difference_naive(const ModelSpec& model, const Observable& observable,
                                  const ControlField& control, const Hierarchy& hierarchy, int level,
                                  std::size_t M1, std::size_t M2, std::uint64_t seed,
                                  const EstimatorOptions& options) {
    if (level < 1) throw std::invalid_argument("level_difference_naive: level must be >= 1");
    return estimate_level(model, observable, control, hierarchy, Sampler::naive, level, M1, M2, seed,
                          options);
}

std::pair<double, double> estimate_variances(const ModelSpec& model, const Observable& observable,
                                             const ControlField& control, const Hierarchy& hierarchy,
                                             Sampler sampler, int level, std::size_t M1,
                                             std::size_t M2, std::uint64_t seed,
                                             const EstimatorOptions& options) {
    if (M1 < 2 || M2 < 2) throw std::invalid_argument("estimate_variances: M1 and M2 must be at least 2");
    const LevelStats st =
        estimate_level(model, observable, control, hierarchy, sampler, level, M1, M2, seed, options);
    return {st.V1, st.V2};
}

std::pair<double, double> variance_components(std::span<const double> samples, std::size_t M1,
                                              std::size_t M2) {
    if (M1 < 2 || M2 < 2) throw std::invalid_argument("variance_components: M1 and M2 must be at least 2");
    if (samples.size() != M1 * M2) throw std::invalid_argument("variance_components: size mismatch");
    RunningStats means;
    double inner = 0.0;
    for (std::size_t i = 0; i < M1; ++i) {
        RunningStats s;
        for (std::size_t j = 0; j < M2; ++j) s.add(samples[i * M2 + j]);
        means.add(s.mean());
        inner += s.variance();
    }
    return {means.variance(), inner / static_cast<double>(M1)};
}

}  // namespace mvmc
