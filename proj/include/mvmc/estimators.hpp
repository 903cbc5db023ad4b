#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvmc/control.hpp"
#include "mvmc/decoupled.hpp"
#include "mvmc/model.hpp"
#include "mvmc/particles.hpp"

namespace mvmc {

/// P_l = P0 tau^l particles and N_l = N0 tau^l steps.
struct Hierarchy {
    std::size_t P0 = 5;
    std::size_t N0 = 4;
    std::size_t tau = 2;
    int max_level = 12;
    double horizon = 1.0;

    std::size_t particles(int level) const;
    std::size_t steps(int level) const;
    void validate() const;
};

enum class Sampler { naive, antithetic };

std::string to_string(Sampler sampler);
Sampler sampler_from_string(const std::string& name);

struct LevelStats {
    int level = 0;
    /// Estimate of E[G_0] at level 0, of E[Delta G_l] above.
    double mean = 0.0;
    double V1 = 0.0;
    double V2 = 0.0;
    std::size_t M1 = 0;
    std::size_t M2 = 0;
    /// M1 P^2 N + M1 M2 P N.
    double cost = 0.0;
    double wall_seconds = 0.0;
    /// Sample variance of the inner means over M1; the variance of `mean` is this over M1.
    double outer_variance = 0.0;
    /// Means of the fine term G_l L_l and of the coarse surrogate separately.
    double fine_mean = 0.0;
    double coarse_mean = 0.0;
    /// Set when M1 < 2 or M2 < 2 left a variance component undefined (reported as 0).
    bool degenerate = false;

    double estimator_variance() const { return M1 ? outer_variance / static_cast<double>(M1) : 0.0; }
};

struct EstimatorOptions {
    int workers = 1;
    KernelRoute route = KernelRoute::automatic;
};

/// M1 P^2 N + M1 M2 P N.
double level_cost(std::size_t P, std::size_t N, std::size_t M1, std::size_t M2);

/// Laws of one outer sample: the fine law and, above level 0, the coarse laws
/// (tau disjoint groups for the antithetic sampler, the first P_{l-1}
/// sub-streams for the naive one).
struct LevelLaws {
    std::unique_ptr<EmpiricalLaw> fine;
    std::vector<EmpiricalLaw> coarse;
};

LevelLaws build_level_laws(const ModelSpec& model, const Hierarchy& hierarchy, Sampler sampler,
                           int level, const RandomBlock& block, KernelRoute route = KernelRoute::automatic);

/// Particle randomness of outer sample `outer` at `level`: P_l sub-streams at N_l resolution.
RandomBlock level_randomness(const Hierarchy& hierarchy, int level, std::uint64_t seed,
                             std::uint64_t outer);

/// x0, xi and the fine Wiener path of inner sample (outer, inner) at `level`.
struct DecoupledDraw {
    std::array<double, kMaxDimension> x0{};
    double xi = 0.0;
    WienerPath wiener;
};
DecoupledDraw decoupled_randomness(const ModelSpec& model, const Hierarchy& hierarchy, int level,
                                   std::uint64_t seed, std::uint64_t outer, std::uint64_t inner);

struct InnerSample {
    double fine = 0.0;
    double coarse = 0.0;
    double difference = 0.0;
};

/// G_l L_l on the fine law minus the average of G_{l-1} L_{l-1} over the coarse
/// laws, all paths sharing x0, xi and (block-summed) increments. No coarse laws
/// means level 0: difference = fine.
InnerSample level_difference_sample(const ModelSpec& model, const Observable& observable,
                                    const ControlField& control, const EmpiricalLaw& fine,
                                    std::span<const EmpiricalLaw> coarse, const DecoupledDraw& draw);

/// One level of the multilevel estimator: M1 outer law samples, M2 inner paths
/// each. Outer samples run in parallel; results do not depend on `workers`.
LevelStats estimate_level(const ModelSpec& model, const Observable& observable,
                          const ControlField& control, const Hierarchy& hierarchy, Sampler sampler,
                          int level, std::size_t M1, std::size_t M2, std::uint64_t seed,
                          const EstimatorOptions& options = {});

/// Single-level double loop estimator of E[G] at (P, N).
LevelStats dlmc(const ModelSpec& model, const Observable& observable, const ControlField& control,
                std::size_t P, std::size_t N, double horizon, std::size_t M1, std::size_t M2,
                std::uint64_t seed, const EstimatorOptions& options = {});

LevelStats level_difference_antithetic(const ModelSpec& model, const Observable& observable,
                                       const ControlField& control, const Hierarchy& hierarchy,
                                       int level, std::size_t M1, std::size_t M2, std::uint64_t seed,
                                       const EstimatorOptions& options = {});

LevelStats level_difference_naive(const ModelSpec& model, const Observable& observable,
                                  const ControlField& control, const Hierarchy& hierarchy, int level,
                                  std::size_t M1, std::size_t M2, std::uint64_t seed,
                                  const EstimatorOptions& options = {});

/// (V1, V2): sample variance of the inner means and mean of the Bessel-corrected
/// inner variances. Both counts must be at least 2.
std::pair<double, double> estimate_variances(const ModelSpec& model, const Observable& observable,
                                             const ControlField& control, const Hierarchy& hierarchy,
                                             Sampler sampler, int level, std::size_t M1,
                                             std::size_t M2, std::uint64_t seed,
                                             const EstimatorOptions& options = {});

/// V1, V2 from a rectangular table of inner samples (outer-major).
std::pair<double, double> variance_components(std::span<const double> samples, std::size_t M1,
                                              std::size_t M2);

}  // namespace mvmc
