#include "mvmc/decoupled.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mvmc/error.hpp"

namespace mvmc {

WienerPath::WienerPath(std::size_t steps, std::size_t dimension, double horizon,
                       std::vector<double> increments)
    : steps_(steps), dimension_(dimension), horizon_(horizon), increments_(std::move(increments)) {
    if (steps == 0 || dimension == 0 || !(horizon > 0.0))
        throw std::invalid_argument("WienerPath: invalid resolution");
    if (increments_.size() != steps * dimension)
        throw std::invalid_argument("WienerPath: increment count does not match steps x dimension");
}

WienerPath WienerPath::generate(RandomStream& stream, std::size_t steps, std::size_t dimension,
                                double horizon) {
    std::vector<double> dw(steps * dimension);
    draw_increments(stream, steps, steps, dimension, horizon, dw);
    return WienerPath(steps, dimension, horizon, std::move(dw));
}

WienerPath WienerPath::coarsen(std::size_t factor) const {
    if (factor == 0 || steps_ % factor != 0)
        throw std::invalid_argument("WienerPath::coarsen: factor must divide the step count");
    const std::size_t coarse = steps_ / factor;
    std::vector<double> dw(coarse * dimension_, 0.0);
    for (std::size_t n = 0; n < coarse; ++n)
        for (std::size_t r = 0; r < factor; ++r)
            for (std::size_t i = 0; i < dimension_; ++i)
                dw[n * dimension_ + i] += increments_[(n * factor + r) * dimension_ + i];
    return WienerPath(coarse, dimension_, horizon_, std::move(dw));
}

PathOutcome simulate_decoupled_path(const ModelSpec& model, const EmpiricalLaw& law,
                                    const ControlField& control, const WienerPath& wiener,
                                    double xi, StateView x0, std::size_t control_hold) {
    const std::size_t d = model.dimension;
    if (control_hold == 0 || law.steps() % control_hold != 0)
        throw std::invalid_argument("simulate_decoupled_path: control_hold must divide the step count");
    const std::size_t steps = law.steps();
    if (wiener.steps() != steps)
        throw std::invalid_argument("simulate_decoupled_path: Wiener resolution does not match the law");
    if (wiener.dimension() != d || x0.size() != d || law.dimension() != d)
        throw std::invalid_argument("simulate_decoupled_path: dimension mismatch");
    const bool controlled = !control.is_zero();
    if (controlled && d != 1)
        throw std::invalid_argument("simulate_decoupled_path: a nonzero control requires d = 1");

    PathOutcome out;
    out.dimension = d;
    auto& x = out.terminal;
    for (std::size_t i = 0; i < d; ++i) x[i] = x0[i];

    const double dt = law.dt();
    std::array<double, kMaxDimension> drift;
    std::array<double, kMaxDimension * kMaxDimension> sigma;
    std::array<double, kMaxDimension> next;
    const bool no_kappa2 = model.kappa2.identically_zero;
    double log_l = 0.0;
    double zeta = 0.0;
    for (std::size_t n = 0; n < steps; ++n) {
        const StateView xv(x.data(), d);
        const double kbar1 = law.kernel_average(model, KernelId::kappa1, xv, n);
        const double kbar2 = no_kappa2 ? 0.0 : law.kernel_average(model, KernelId::kappa2, xv, n);
        model.drift(xv, kbar1, xi, std::span(drift.data(), d));
        model.diffusion(xv, kbar2, std::span(sigma.data(), d * d));
        const auto dw = wiener.increment(n);
        if (controlled) {
            if (n % control_hold == 0) zeta = control(law.time(n), x[0]);
            log_l += -0.5 * dt * zeta * zeta - dw[0] * zeta;
            out.max_control = std::max(out.max_control, std::abs(zeta));
            next[0] = x[0] + (drift[0] + sigma[0] * zeta) * dt + sigma[0] * dw[0];
        } else {
            for (std::size_t i = 0; i < d; ++i) {
                double v = x[i] + drift[i] * dt;
                for (std::size_t j = 0; j < d; ++j) v += sigma[i * d + j] * dw[j];
                next[i] = v;
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            if (!std::isfinite(next[i])) {
                std::ostringstream msg;
                msg << "simulate_decoupled_path: non-finite state at step " << n + 1;
                throw NumericalError(msg.str());
            }
            x[i] = next[i];
        }
    }
    out.log_likelihood = log_l;
    out.likelihood = controlled ? std::exp(log_l) : 1.0;
    return out;
}

std::pair<PathOutcome, PathOutcome> coupled_pair(const ModelSpec& model,
                                                 const EmpiricalLaw& law_fine,
                                                 const EmpiricalLaw& law_coarse,
                                                 const ControlField& control,
                                                 const WienerPath& wiener, double xi, StateView x0) {
    if (wiener.steps() != law_fine.steps())
        throw std::invalid_argument("coupled_pair: Wiener resolution does not match the fine law");
    if (law_coarse.steps() == 0 || law_fine.steps() % law_coarse.steps() != 0)
        throw std::invalid_argument("coupled_pair: coarse steps must divide fine steps");
    if (law_fine.horizon() != law_coarse.horizon())
        throw std::invalid_argument("coupled_pair: horizons differ");
    const std::size_t factor = law_fine.steps() / law_coarse.steps();
    PathOutcome fine = simulate_decoupled_path(model, law_fine, control, wiener, xi, x0, factor);
    PathOutcome coarse = factor == 1
                             ? simulate_decoupled_path(model, law_coarse, control, wiener, xi, x0)
                             : simulate_decoupled_path(model, law_coarse, control,
                                                       wiener.coarsen(factor), xi, x0);
    return {fine, coarse};
}

}  // namespace mvmc
