#include "mvmc/model.hpp"

#include <cmath>
#include <stdexcept>

namespace mvmc {

PairKernel PairKernel::zero() {
    PairKernel k;
    k.eval = [](StateView, StateView) { return 0.0; };
    k.identically_zero = true;
    return k;
}

ModelSpec kuramoto_model(const KuramotoParams& params) {
    if (!(params.sigma > 0.0)) throw std::invalid_argument("kuramoto_model: sigma must be positive");
    if (!(params.xi_low <= params.xi_high))
        throw std::invalid_argument("kuramoto_model: xi_low must not exceed xi_high");
    if (!(params.x0_variance >= 0.0))
        throw std::invalid_argument("kuramoto_model: x0_variance must be non-negative");

    ModelSpec m;
    m.name = "kuramoto";
    m.dimension = 1;
    m.drift = [](StateView, double kbar1, double xi, StateOut out) { out[0] = xi + kbar1; };
    m.diffusion = [sigma = params.sigma](StateView, double, StateOut out) { out[0] = sigma; };

    m.kappa1.eval = [](StateView x, StateView y) { return std::sin(x[0] - y[0]); };
    // sin(x - y) = sin x cos y - cos x sin y
    m.kappa1.separable = SeparableForm{
        2,
        [](StateView x, std::span<double> out) {
            out[0] = std::sin(x[0]);
            out[1] = -std::cos(x[0]);
        },
        [](StateView y, std::span<double> out) {
            out[0] = std::cos(y[0]);
            out[1] = std::sin(y[0]);
        }};
    m.kappa2 = PairKernel::zero();

    m.initial_state = [mean = params.x0_mean, sd = std::sqrt(params.x0_variance)](RandomStream& rng,
                                                                                 StateOut x0) {
        x0[0] = mean + sd * rng.normal();
    };
    m.coefficient = [lo = params.xi_low, hi = params.xi_high](RandomStream& rng) {
        return rng.uniform(lo, hi);
    };
    m.coefficient_mean = 0.5 * (params.xi_low + params.xi_high);
    return m;
}

ModelSpec with_constant_diffusion(ModelSpec model, double sigma) {
    const std::size_t d = model.dimension;
    model.diffusion = [sigma, d](StateView, double, StateOut out) {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (i == j) ? sigma : 0.0;
    };
    return model;
}

ModelSpec with_fixed_initial_state(ModelSpec model, double x0) {
    model.initial_state = [x0](RandomStream&, StateOut out) {
        for (double& v : out) v = x0;
    };
    return model;
}

ModelSpec with_fixed_coefficient(ModelSpec model, double xi) {
    model.coefficient = [xi](RandomStream&) { return xi; };
    model.coefficient_mean = xi;
    return model;
}

double psi(double x) {
    if (x < -0.5) return 0.0;
    if (x > 0.5) return 1.0;
    return 0.5 + x;
}

Observable psi_observable(double threshold) {
    Observable g;
    g.name = "psi";
    g.evaluate = [threshold](StateView x) { return psi(x[0] - threshold); };
    g.threshold = threshold;
    return g;
}

Observable cos_observable() {
    Observable g;
    g.name = "cos";
    g.evaluate = [](StateView x) { return std::cos(x[0]); };
    return g;
}

Observable constant_observable(double value) {
    Observable g;
    g.name = "constant";
    g.evaluate = [value](StateView) { return value; };
    return g;
}

}  // namespace mvmc
