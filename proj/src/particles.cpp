#include "mvmc/particles.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mvmc/error.hpp"
#include "mvmc/parallel.hpp"

namespace mvmc {

namespace {

const PairKernel& kernel_of(const ModelSpec& model, KernelId which) {
    return which == KernelId::kappa1 ? model.kappa1 : model.kappa2;
}

std::size_t index_of(KernelId which) { return which == KernelId::kappa1 ? 0 : 1; }

}  // namespace

EmpiricalLaw::EmpiricalLaw(std::size_t particles, std::size_t steps, std::size_t dimension,
                           double horizon)
    : particles_(particles),
      steps_(steps),
      dimension_(dimension),
      horizon_(horizon),
      states_((steps + 1) * particles * dimension, 0.0),
      coefficients_(particles, 0.0) {
    if (particles == 0 || steps == 0 || dimension == 0)
        throw std::invalid_argument("EmpiricalLaw: particles, steps and dimension must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("EmpiricalLaw: horizon must be positive");
}

std::span<const double> EmpiricalLaw::slice(std::size_t n) const {
    if (n > steps_) throw std::out_of_range("EmpiricalLaw::slice: step index out of range");
    const std::size_t stride = particles_ * dimension_;
    return {states_.data() + n * stride, stride};
}

std::span<double> EmpiricalLaw::slice(std::size_t n) {
    if (n > steps_) throw std::out_of_range("EmpiricalLaw::slice: step index out of range");
    const std::size_t stride = particles_ * dimension_;
    return {states_.data() + n * stride, stride};
}

void EmpiricalLaw::refresh_moments(const ModelSpec& model, KernelRoute route) {
    reserve_moments(model, route);
    for (std::size_t n = 0; n <= steps_; ++n) refresh_moments_at(model, n);
}

void EmpiricalLaw::reserve_moments(const ModelSpec& model, KernelRoute route) {
    for (KernelId which : {KernelId::kappa1, KernelId::kappa2}) {
        const PairKernel& kernel = kernel_of(model, which);
        const std::size_t k = index_of(which);
        if (route == KernelRoute::direct || kernel.identically_zero || !kernel.separable) {
            rank_[k] = 0;
            moments_[k].clear();
            continue;
        }
        if (kernel.separable->rank == 0 || kernel.separable->rank > kMaxRank)
            throw std::invalid_argument("EmpiricalLaw: separable kernel rank out of range");
        rank_[k] = kernel.separable->rank;
        moments_[k].assign((steps_ + 1) * rank_[k], 0.0);
    }
}

void EmpiricalLaw::refresh_moments_at(const ModelSpec& model, std::size_t n) {
    const auto states = slice(n);
    for (KernelId which : {KernelId::kappa1, KernelId::kappa2}) {
        const std::size_t k = index_of(which);
        const std::size_t rank = rank_[k];
        if (rank == 0) continue;
        const SeparableForm& form = *kernel_of(model, which).separable;
        std::array<double, kMaxRank> sum{};
        std::array<double, kMaxRank> feature{};
        for (std::size_t j = 0; j < particles_; ++j) {
            form.right(states.subspan(j * dimension_, dimension_), std::span(feature.data(), rank));
            for (std::size_t r = 0; r < rank; ++r) sum[r] += feature[r];
        }
        const double inv = 1.0 / static_cast<double>(particles_);
        for (std::size_t r = 0; r < rank; ++r) moments_[k][n * rank + r] = sum[r] * inv;
    }
}

double EmpiricalLaw::kernel_average(const ModelSpec& model, KernelId which, StateView x,
                                    std::size_t n) const {
    const PairKernel& kernel = kernel_of(model, which);
    if (kernel.identically_zero) return 0.0;
    const std::size_t k = index_of(which);
    const std::size_t rank = rank_[k];
    if (rank == 0) return mvmc::kernel_average(model, which, x, slice(n));
    std::array<double, kMaxRank> feature;
    kernel.separable->left(x, std::span(feature.data(), rank));
    const double* m = moments_[k].data() + n * rank;
    double acc = 0.0;
    for (std::size_t r = 0; r < rank; ++r) acc += feature[r] * m[r];
    return acc;
}

double kernel_average(const ModelSpec& model, KernelId which, StateView x,
                      std::span<const double> slice) {
    const PairKernel& kernel = kernel_of(model, which);
    if (kernel.identically_zero) return 0.0;
    const std::size_t d = model.dimension;
    const std::size_t count = slice.size() / d;
    if (count == 0) throw std::invalid_argument("kernel_average: empty slice");
    double acc = 0.0;
    for (std::size_t j = 0; j < count; ++j) acc += kernel.eval(x, slice.subspan(j * d, d));
    return acc / static_cast<double>(count);
}

void draw_increments(RandomStream& stream, std::size_t base_steps, std::size_t steps,
                     std::size_t dimension, double horizon, std::span<double> out) {
    if (steps == 0 || base_steps % steps != 0)
        throw std::invalid_argument("draw_increments: steps must divide the base resolution");
    const std::size_t ratio = base_steps / steps;
    const double scale = std::sqrt(horizon / static_cast<double>(base_steps));
    for (std::size_t n = 0; n < steps; ++n) {
        for (std::size_t i = 0; i < dimension; ++i) out[n * dimension + i] = 0.0;
        for (std::size_t r = 0; r < ratio; ++r)
            for (std::size_t i = 0; i < dimension; ++i) out[n * dimension + i] += scale * stream.normal();
    }
}

EmpiricalLaw simulate_particle_system(const ModelSpec& model, std::size_t particles,
                                      std::size_t steps, double horizon,
                                      const RandomBlock& randomness,
                                      const ParticleOptions& options) {
    if (particles == 0 || steps == 0)
        throw std::invalid_argument("simulate_particle_system: P and N must be positive");
    if (randomness.size() != particles)
        throw std::invalid_argument("simulate_particle_system: randomness must hold exactly P sub-streams");
    if (randomness.base_steps() % steps != 0)
        throw std::invalid_argument("simulate_particle_system: N must divide the randomness base resolution");

    const std::size_t d = model.dimension;
    if (d > kMaxDimension) throw std::invalid_argument("simulate_particle_system: dimension too large");
    EmpiricalLaw law(particles, steps, d, horizon);
    const double dt = law.dt();

    std::vector<double> increments(particles * steps * d);
    {
        auto x0 = law.slice(0);
        auto xi = law.coefficients();
        for (std::size_t p = 0; p < particles; ++p) {
            RandomStream init = randomness.stream(p, StreamRole::initial_state);
            model.initial_state(init, x0.subspan(p * d, d));
            xi[p] = model.coefficient(init);
            RandomStream noise = randomness.stream(p, StreamRole::increments);
            draw_increments(noise, randomness.base_steps(), steps, d, horizon,
                            std::span(increments).subspan(p * steps * d, steps * d));
        }
    }
    law.reserve_moments(model, options.route);
    law.refresh_moments_at(model, 0);

    for (std::size_t n = 0; n < steps; ++n) {
        const auto current = std::as_const(law).slice(n);
        auto next = law.slice(n + 1);
        const auto xi = std::as_const(law).coefficients();
        parallel_for(particles, options.workers, [&](std::size_t p) {
            std::array<double, kMaxDimension> drift;
            std::array<double, kMaxDimension * kMaxDimension> sigma;
            const auto x = current.subspan(p * d, d);
            const double kbar1 = law.kernel_average(model, KernelId::kappa1, x, n);
            const double kbar2 = law.kernel_average(model, KernelId::kappa2, x, n);
            model.drift(x, kbar1, xi[p], std::span(drift.data(), d));
            model.diffusion(x, kbar2, std::span(sigma.data(), d * d));
            const double* dw = increments.data() + (p * steps + n) * d;
            for (std::size_t i = 0; i < d; ++i) {
                double value = x[i] + drift[i] * dt;
                for (std::size_t j = 0; j < d; ++j) value += sigma[i * d + j] * dw[j];
                if (!std::isfinite(value)) {
                    std::ostringstream msg;
                    msg << "simulate_particle_system: non-finite state at step " << n + 1
                        << ", particle " << p;
                    throw NumericalError(msg.str());
                }
                next[p * d + i] = value;
            }
        });
        law.refresh_moments_at(model, n + 1);
    }
    return law;
}

}  // namespace mvmc
