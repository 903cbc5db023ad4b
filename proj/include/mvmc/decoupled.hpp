#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mvmc/control.hpp"
#include "mvmc/model.hpp"
#include "mvmc/particles.hpp"
#include "mvmc/random.hpp"

namespace mvmc {

/// Wiener increments of one decoupled path at a fixed resolution.
class WienerPath {
public:
    WienerPath(std::size_t steps, std::size_t dimension, double horizon, std::vector<double> increments);

    /// `steps` x d i.i.d. N(0, T / steps) increments from `stream`.
    static WienerPath generate(RandomStream& stream, std::size_t steps, std::size_t dimension,
                               double horizon);

    /// Sums of `factor` consecutive increments; steps must divide evenly.
    WienerPath coarsen(std::size_t factor) const;

    std::size_t steps() const { return steps_; }
    std::size_t dimension() const { return dimension_; }
    double horizon() const { return horizon_; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }
    std::span<const double> increment(std::size_t n) const {
        return {increments_.data() + n * dimension_, dimension_};
    }
    const std::vector<double>& increments() const { return increments_; }

private:
    std::size_t steps_;
    std::size_t dimension_;
    double horizon_;
    std::vector<double> increments_;
};

struct PathOutcome {
    std::array<double, kMaxDimension> terminal{};
    std::size_t dimension = 1;
    double log_likelihood = 0.0;
    double likelihood = 1.0;
    /// sup_n |zeta(t_n, X_n)| along the path.
    double max_control = 0.0;

    StateView state() const { return {terminal.data(), dimension}; }
};

/// Euler-Maruyama for the controlled decoupled SDE
///
///   X_{n+1} = X_n + [b(X_n, kbar1_n; xi) + sigma zeta(t_n, X_n)] dt + sigma dW_n,
///
/// kernel averages taken against the law slice at t_n, with the Girsanov weight
/// L = prod_n exp(-dt zeta_n^2 / 2 - dW_n zeta_n) accumulated in log space.
/// A nonzero control requires d = 1.
///
/// With `control_hold` = h > 1, zeta is evaluated only at steps n = 0, h, 2h, ...
/// and held in between. The weight stays the exact density ratio of the
/// discrete scheme, so E[G L] is unchanged; a fine path holding zeta over each
/// coarse step keeps its likelihood close to the coarse one.
PathOutcome simulate_decoupled_path(const ModelSpec& model, const EmpiricalLaw& law,
                                    const ControlField& control, const WienerPath& wiener,
                                    double xi, StateView x0, std::size_t control_hold = 1);

/// Fine path on `law_fine` with `wiener` and zeta held over each coarse step,
/// coarse path on `law_coarse` with the block sums; x0 and xi shared. Throws on mismatched resolutions.
std::pair<PathOutcome, PathOutcome> coupled_pair(const ModelSpec& model,
                                                 const EmpiricalLaw& law_fine,
                                                 const EmpiricalLaw& law_coarse,
                                                 const ControlField& control,
                                                 const WienerPath& wiener, double xi, StateView x0);

}  // namespace mvmc
