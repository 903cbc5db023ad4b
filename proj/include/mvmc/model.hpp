#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "mvmc/random.hpp"

namespace mvmc {

using StateView = std::span<const double>;
using StateOut = std::span<double>;

/// Rank-r factorisation kappa(x, y) = sum_k left_k(x) * right_k(y).
///
/// When present, the empirical average over a law slice reduces to r moments
/// of the slice, computed once per time step.
struct SeparableForm {
    std::size_t rank = 0;
    std::function<void(StateView x, std::span<double> out)> left;
    std::function<void(StateView y, std::span<double> out)> right;
};

/// Pairwise interaction kernel kappa: R^d x R^d -> R.
struct PairKernel {
    std::function<double(StateView x, StateView y)> eval;
    std::optional<SeparableForm> separable;
    bool identically_zero = false;

    static PairKernel zero();
};

/// One McKean-Vlasov SDE in the pairwise-kernel class
///
///   dX = b(X, <kappa1(X, .), mu_t>; xi) dt + sigma(X, <kappa2(X, .), mu_t>) dW,  X(0) ~ mu0,
///
/// where xi is a static random coefficient drawn once per particle or path.
/// Immutable after construction; safe to share across threads.
struct ModelSpec {
    std::string name;
    std::size_t dimension = 1;

    /// out = b(x, kbar1; xi), length d.
    std::function<void(StateView x, double kbar1, double xi, StateOut out)> drift;
    /// out = sigma(x, kbar2), d x d row-major.
    std::function<void(StateView x, double kbar2, StateOut out)> diffusion;
    PairKernel kappa1;
    PairKernel kappa2;

    std::function<void(RandomStream& rng, StateOut x0)> initial_state;
    std::function<double(RandomStream& rng)> coefficient;
    /// E[xi]; the control solver freezes the coefficient at this value.
    double coefficient_mean = 0.0;
};

struct KuramotoParams {
    double sigma = 0.4;
    double x0_mean = 0.0;
    /// Second parameter of N(mean, .) read as a variance.
    double x0_variance = 0.2;
    double xi_low = -0.2;
    double xi_high = 0.2;
};

/// Fully connected Kuramoto oscillators: b = xi + kbar1, kappa1(x, y) = sin(x - y),
/// constant sigma, kappa2 = 0, x0 ~ N(mean, variance), xi ~ U(low, high).
ModelSpec kuramoto_model(const KuramotoParams& params = {});

// Derived models, mostly for degenerate-randomness checks.
ModelSpec with_constant_diffusion(ModelSpec model, double sigma);
ModelSpec with_fixed_initial_state(ModelSpec model, double x0);
ModelSpec with_fixed_coefficient(ModelSpec model, double xi);

struct Observable {
    std::string name;
    std::function<double(StateView x)> evaluate;
    std::optional<double> threshold;

    double operator()(StateView x) const { return evaluate(x); }
    double operator()(double x) const { return evaluate(StateView(&x, 1)); }
};

/// Ramp 0 -> 1 over [-0.5, 0.5].
double psi(double x);

/// x -> psi(x - K).
Observable psi_observable(double threshold);
Observable cos_observable();
Observable constant_observable(double value);

}  // namespace mvmc
