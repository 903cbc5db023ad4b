#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mvmc/model.hpp"
#include "mvmc/random.hpp"

namespace mvmc {

inline constexpr std::size_t kMaxDimension = 16;

enum class KernelId { kappa1, kappa2 };

/// How empirical kernel averages are evaluated.
enum class KernelRoute {
    /// Use the kernel's separable form when it has one, else direct summation.
    automatic,
    /// Always sum kappa(x, X_j) over the P particles.
    direct,
};

/// Discrete-time empirical law mu^{P|N}: particle states at t_n = n T / N.
class EmpiricalLaw {
public:
    static constexpr std::size_t kMaxRank = 8;

    EmpiricalLaw(std::size_t particles, std::size_t steps, std::size_t dimension, double horizon);

    std::size_t particles() const { return particles_; }
    std::size_t steps() const { return steps_; }
    std::size_t dimension() const { return dimension_; }
    double horizon() const { return horizon_; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }
    double time(std::size_t n) const { return static_cast<double>(n) * dt(); }

    /// P x d states at t_n, row-major by particle. No copy.
    std::span<const double> slice(std::size_t n) const;
    std::span<double> slice(std::size_t n);
    std::span<const double> coefficients() const { return coefficients_; }
    std::span<double> coefficients() { return coefficients_; }

    /// Precomputes per-slice moments for every separable kernel of `model`.
    /// Must be called again after the states are modified.
    void refresh_moments(const ModelSpec& model, KernelRoute route = KernelRoute::automatic);
    /// Allocates moment storage without filling it.
    void reserve_moments(const ModelSpec& model, KernelRoute route = KernelRoute::automatic);
    /// Moments of slice n for slices 0..n only (used while stepping).
    void refresh_moments_at(const ModelSpec& model, std::size_t n);

    /// (1/P) sum_j kappa(x, X_j(t_n)), through cached moments when available.
    double kernel_average(const ModelSpec& model, KernelId which, StateView x, std::size_t n) const;

    const std::vector<double>& states() const { return states_; }

private:
    std::size_t particles_;
    std::size_t steps_;
    std::size_t dimension_;
    double horizon_;
    std::vector<double> states_;
    std::vector<double> coefficients_;
    std::array<std::size_t, 2> rank_{0, 0};
    std::array<std::vector<double>, 2> moments_;
};

/// law_lookup: the P x d state slice at step n.
inline std::span<const double> law_lookup(const EmpiricalLaw& law, std::size_t n) {
    return law.slice(n);
}

/// Direct (1/P) sum_j kappa(x, X_j) over a P x d slice. Theta(P).
double kernel_average(const ModelSpec& model, KernelId which, StateView x,
                      std::span<const double> slice);

struct ParticleOptions {
    KernelRoute route = KernelRoute::automatic;
    /// OpenMP workers for the per-particle loop; 1 keeps the serial path.
    int workers = 1;
};

/// Euler-Maruyama simulation of the P-particle system. Particle p draws x0 and
/// xi from sub-stream p and its Wiener increments at randomness.base_steps()
/// resolution, summed down to N steps. Throws NumericalError on a non-finite
/// state.
EmpiricalLaw simulate_particle_system(const ModelSpec& model, std::size_t particles,
                                      std::size_t steps, double horizon,
                                      const RandomBlock& randomness,
                                      const ParticleOptions& options = {});

/// Wiener increments for one sub-stream: `steps` x d entries with variance
/// T / steps, obtained by summing base-resolution draws in blocks.
void draw_increments(RandomStream& stream, std::size_t base_steps, std::size_t steps,
                     std::size_t dimension, double horizon, std::span<double> out);

}  // namespace mvmc
