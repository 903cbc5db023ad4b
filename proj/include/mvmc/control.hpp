#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mvmc/model.hpp"
#include "mvmc/particles.hpp"

namespace mvmc {

/// Uniform spatial grid with `intervals` + 1 nodes on [x_min, x_max].
struct SpatialGrid {
    double x_min = -1.0;
    double x_max = 1.0;
    std::size_t intervals = 2000;

    double dx() const { return (x_max - x_min) / static_cast<double>(intervals); }
    double node(std::size_t j) const { return x_min + static_cast<double>(j) * dx(); }
    std::size_t nodes() const { return intervals + 1; }
};

/// [-pi - 4, K + 4] for a thresholded observable, [-pi - 4, pi + 4] otherwise.
SpatialGrid default_grid(const Observable& observable, std::size_t intervals = 2000);

struct KbeOptions {
    SpatialGrid grid;
    /// Implicit Euler sub-steps per law time step.
    std::size_t time_substeps = 1;
    int workers = 1;
};

/// v(t_n, x_j) on the law's time grid.
struct ValueGrid {
    SpatialGrid grid;
    std::size_t steps = 0;
    double horizon = 1.0;
    std::vector<double> values;  // (steps + 1) x nodes, row-major in time

    double at(std::size_t n, std::size_t j) const { return values[n * grid.nodes() + j]; }
    std::span<const double> row(std::size_t n) const {
        return {values.data() + n * grid.nodes(), grid.nodes()};
    }
};

/// Backward-Euler / central-difference solve of the linear Kolmogorov backward
/// equation of the decoupled dynamics
///
///   v_t + b(x, kbar1(t, x); E[xi]) v_x + 1/2 sigma^2(x, kbar2) v_xx = 0,   v(T, .) = |G|,
///
/// with kernel averages against the frozen law and zero-flux boundaries.
/// One tridiagonal solve per (sub-)step. d = 1 only.
ValueGrid solve_kbe(const ModelSpec& model, const EmpiricalLaw& law, const Observable& observable,
                    const KbeOptions& options);

/// The same backward solve from an arbitrary terminal row (one value per node).
ValueGrid solve_backward(const ModelSpec& model, const EmpiricalLaw& law,
                         std::span<const double> terminal, const KbeOptions& options);

/// Max |v_J(0, x) - v_2J(0, x)| over the coarse nodes, relative to max v.
double kbe_refinement_gap(const ModelSpec& model, const EmpiricalLaw& law,
                          const Observable& observable, const KbeOptions& options);

/// Extends the domain by `step` on each side (keeping dx) until v(0, .) on the
/// original domain moves by less than `tolerance` relative to max v.
SpatialGrid widen_until_stable(const ModelSpec& model, const EmpiricalLaw& law,
                               const Observable& observable, const KbeOptions& options,
                               double tolerance = 1e-6, double step = 2.0, int max_rounds = 8);

/// Importance-sampling control zeta(t, x) on a space-time grid, bilinear in
/// (t, x) and clamped to the edge values outside [x_min, x_max].
class ControlField {
public:
    /// The zeta == 0 field; decoupled paths under it carry likelihood exactly 1.
    static ControlField zero();

    ControlField(double horizon, std::size_t steps, double x_min, double x_max,
                 std::size_t intervals, std::vector<double> values);

    bool is_zero() const { return zero_; }
    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t intervals() const { return intervals_; }
    const std::vector<double>& values() const { return values_; }
    double at(std::size_t n, std::size_t j) const { return values_[n * (intervals_ + 1) + j]; }

    double operator()(double t, double x) const;

    /// Binary layout (native endianness): magic "MVCTRL01", f64 T, u64 steps,
    /// f64 x_min, f64 x_max, u64 intervals, then (steps+1)(intervals+1) f64
    /// values row-major in time.
    void save(const std::filesystem::path& path) const;
    static ControlField load(const std::filesystem::path& path);
    static constexpr std::size_t kHeaderBytes = 8 + 5 * 8;

    bool operator==(const ControlField&) const = default;

private:
    ControlField() = default;

    bool zero_ = true;
    double horizon_ = 1.0;
    std::size_t steps_ = 0;
    double x_min_ = 0.0;
    double x_max_ = 0.0;
    std::size_t intervals_ = 0;
    double inv_dt_ = 0.0;
    double inv_dx_ = 0.0;
    std::vector<double> values_;
};

/// zeta(t_n, x_j) = sigma(x_j, kbar2) * d/dx log max(v, floor), central
/// differences inside and one-sided at the edges.
ControlField control_from_value(const ModelSpec& model, const EmpiricalLaw& law,
                                const ValueGrid& values, double floor);

struct OfflineControlOptions {
    std::size_t particles = 1000;
    std::size_t steps = 100;
    double horizon = 1.0;
    /// Default grid widened until stable when empty.
    std::optional<SpatialGrid> grid;
    std::size_t intervals = 2000;
    /// v floor relative to max |G| on the grid.
    double relative_floor = 1e-12;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct OfflineControl {
    ControlField field = ControlField::zero();
    ValueGrid values;
    double refinement_gap = 0.0;
};

/// Simulates one law with (P_bar, N_bar), solves the KBE against it, and
/// returns the control shared by every level.
OfflineControl solve_offline_control(const ModelSpec& model, const Observable& observable,
                                     const OfflineControlOptions& options,
                                     bool check_refinement = false);

inline ControlField offline_control(const ModelSpec& model, const Observable& observable,
                                    const OfflineControlOptions& options) {
    return solve_offline_control(model, observable, options).field;
}

}  // namespace mvmc
