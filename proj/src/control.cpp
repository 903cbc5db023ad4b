#include "mvmc/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mvmc/error.hpp"
#include "mvmc/parallel.hpp"

namespace mvmc {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'C', 'T', 'R', 'L', '0', '1'};

// Drift a(x) and half squared diffusion D(x) at every node against law slice n.
void coefficients_at(const ModelSpec& model, const EmpiricalLaw& law, const SpatialGrid& grid,
                     std::size_t n, int workers, std::vector<double>& a, std::vector<double>& D) {
    parallel_for(grid.nodes(), workers, [&](std::size_t j) {
        const double x = grid.node(j);
        const StateView xv(&x, 1);
        const double kbar1 = law.kernel_average(model, KernelId::kappa1, xv, n);
        const double kbar2 = law.kernel_average(model, KernelId::kappa2, xv, n);
        double b = 0.0;
        double s = 0.0;
        model.drift(xv, kbar1, model.coefficient_mean, StateOut(&b, 1));
        model.diffusion(xv, kbar2, StateOut(&s, 1));
        a[j] = b;
        D[j] = 0.5 * s * s;
    });
}

// Thomas algorithm; sub/diag/super/rhs are overwritten.
void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                       std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

void check_inputs(const ModelSpec& model, const EmpiricalLaw& law, const KbeOptions& options) {
    if (model.dimension != 1 || law.dimension() != 1)
        throw std::invalid_argument("solve_kbe: only d = 1 is supported");
    if (options.grid.intervals < 2 || !(options.grid.x_max > options.grid.x_min))
        throw std::invalid_argument("solve_kbe: invalid spatial grid");
    if (options.time_substeps == 0) throw std::invalid_argument("solve_kbe: time_substeps must be positive");
}

std::vector<double> terminal_row(const Observable& observable, const SpatialGrid& grid) {
    std::vector<double> row(grid.nodes());
    double peak = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = std::abs(observable(grid.node(j)));
        peak = std::max(peak, row[j]);
    }
    if (!(peak > 0.0)) throw std::invalid_argument("solve_kbe: |G| vanishes on the whole grid");
    return row;
}

// v(0, .) of `coarse` vs `fine`, evaluated at the nodes of `coarse` lying in [lo, hi].
double max_gap(const ValueGrid& coarse, const ValueGrid& fine, double lo, double hi) {
    const auto c = coarse.row(0);
    const auto f = fine.row(0);
    const double fdx = fine.grid.dx();
    double gap = 0.0;
    double peak = 0.0;
    for (std::size_t j = 0; j < coarse.grid.nodes(); ++j) {
        const double x = coarse.grid.node(j);
        if (x < lo - 1e-12 || x > hi + 1e-12) continue;
        const double u = (x - fine.grid.x_min) / fdx;
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, std::floor(u))),
                                             fine.grid.intervals - 1);
        const double w = u - static_cast<double>(k);
        const double fv = (1.0 - w) * f[k] + w * f[k + 1];
        gap = std::max(gap, std::abs(c[j] - fv));
        peak = std::max(peak, std::abs(c[j]));
    }
    return peak > 0.0 ? gap / peak : gap;
}

}  // namespace

SpatialGrid default_grid(const Observable& observable, std::size_t intervals) {
    const double right = observable.threshold ? *observable.threshold : std::numbers::pi;
    return {-std::numbers::pi - 4.0, std::max(right, -std::numbers::pi) + 4.0, intervals};
}

ValueGrid solve_backward(const ModelSpec& model, const EmpiricalLaw& law,
                         std::span<const double> terminal, const KbeOptions& options) {
    check_inputs(model, law, options);
    const SpatialGrid& grid = options.grid;
    const std::size_t J = grid.intervals;
    const std::size_t nodes = grid.nodes();
    if (terminal.size() != nodes) throw std::invalid_argument("solve_backward: terminal row size mismatch");

    ValueGrid out;
    out.grid = grid;
    out.steps = law.steps();
    out.horizon = law.horizon();
    out.values.assign((out.steps + 1) * nodes, 0.0);
    std::copy(terminal.begin(), terminal.end(), out.values.begin() + out.steps * nodes);

    const double dx = grid.dx();
    const double h = law.dt() / static_cast<double>(options.time_substeps);
    std::vector<double> a(nodes), D(nodes), lower(nodes), diag(nodes), upper(nodes), rhs(nodes);

    for (std::size_t n = out.steps; n-- > 0;) {
        // Coefficients frozen at t_n for the step t_{n+1} -> t_n.
        coefficients_at(model, law, grid, n, options.workers, a, D);
        std::copy_n(out.values.begin() + (n + 1) * nodes, nodes, rhs.begin());
        for (std::size_t s = 0; s < options.time_substeps; ++s) {
            for (std::size_t j = 0; j < nodes; ++j) {
                const double diff = h * D[j] / (dx * dx);
                const double adv = h * a[j] / (2.0 * dx);
                diag[j] = 1.0 + 2.0 * diff;
                lower[j] = -(diff - adv);
                upper[j] = -(diff + adv);
            }
            // Zero-flux ghost nodes: v_{-1} = v_1, v_{J+1} = v_{J-1}.
            upper[0] = -2.0 * h * D[0] / (dx * dx);
            lower[0] = 0.0;
            lower[J] = -2.0 * h * D[J] / (dx * dx);
            upper[J] = 0.0;
            solve_tridiagonal(lower, diag, upper, rhs);
        }
        for (std::size_t j = 0; j < nodes; ++j) {
            if (!std::isfinite(rhs[j])) {
                std::ostringstream msg;
                msg << "solve_kbe: non-finite value at step " << n << ", node " << j;
                throw NumericalError(msg.str());
            }
        }
        std::copy(rhs.begin(), rhs.end(), out.values.begin() + n * nodes);
    }
    return out;
}

ValueGrid solve_kbe(const ModelSpec& model, const EmpiricalLaw& law, const Observable& observable,
                    const KbeOptions& options) {
    check_inputs(model, law, options);
    const auto terminal = terminal_row(observable, options.grid);
    return solve_backward(model, law, terminal, options);
}

double kbe_refinement_gap(const ModelSpec& model, const EmpiricalLaw& law,
                          const Observable& observable, const KbeOptions& options) {
    KbeOptions fine = options;
    fine.grid.intervals *= 2;
    const ValueGrid vc = solve_kbe(model, law, observable, options);
    const ValueGrid vf = solve_kbe(model, law, observable, fine);
    return max_gap(vc, vf, options.grid.x_min, options.grid.x_max);
}

SpatialGrid widen_until_stable(const ModelSpec& model, const EmpiricalLaw& law,
                               const Observable& observable, const KbeOptions& options,
                               double tolerance, double step, int max_rounds) {
    const SpatialGrid bulk = options.grid;
    KbeOptions current = options;
    ValueGrid v = solve_kbe(model, law, observable, current);
    for (int round = 0; round < max_rounds; ++round) {
        KbeOptions wider = current;
        const double dx = current.grid.dx();
        const auto extra = static_cast<std::size_t>(std::ceil(step / dx));
        wider.grid.x_min -= static_cast<double>(extra) * dx;
        wider.grid.x_max += static_cast<double>(extra) * dx;
        wider.grid.intervals += 2 * extra;
        ValueGrid vw = solve_kbe(model, law, observable, wider);
        const double gap = max_gap(v, vw, bulk.x_min, bulk.x_max);
        if (gap < tolerance) return current.grid;
        current = wider;
        v = std::move(vw);
    }
    return current.grid;
}

ControlField ControlField::zero() { return ControlField(); }

ControlField::ControlField(double horizon, std::size_t steps, double x_min, double x_max,
                           std::size_t intervals, std::vector<double> values)
    : zero_(false),
      horizon_(horizon),
      steps_(steps),
      x_min_(x_min),
      x_max_(x_max),
      intervals_(intervals),
      values_(std::move(values)) {
    if (!(horizon > 0.0) || steps == 0 || intervals == 0 || !(x_max > x_min))
        throw std::invalid_argument("ControlField: invalid grid");
    if (values_.size() != (steps + 1) * (intervals + 1))
        throw std::invalid_argument("ControlField: value count does not match the grid");
    for (double z : values_)
        if (!std::isfinite(z)) throw NumericalError("ControlField: non-finite control value");
    zero_ = std::all_of(values_.begin(), values_.end(), [](double z) { return z == 0.0; });
    inv_dt_ = static_cast<double>(steps) / horizon;
    inv_dx_ = static_cast<double>(intervals) / (x_max - x_min);
}

double ControlField::operator()(double t, double x) const {
    if (zero_) return 0.0;
    const double s = std::clamp(t * inv_dt_, 0.0, static_cast<double>(steps_));
    const std::size_t n = std::min(static_cast<std::size_t>(s), steps_ - 1);
    const double ft = s - static_cast<double>(n);
    const double u = (std::clamp(x, x_min_, x_max_) - x_min_) * inv_dx_;
    const std::size_t j = std::min(static_cast<std::size_t>(u), intervals_ - 1);
    const double fx = u - static_cast<double>(j);
    const std::size_t stride = intervals_ + 1;
    const double* r0 = values_.data() + n * stride + j;
    const double* r1 = r0 + stride;
    const double z0 = r0[0] + fx * (r0[1] - r0[0]);
    const double z1 = r1[0] + fx * (r1[1] - r1[0]);
    return z0 + ft * (z1 - z0);
}

void ControlField::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("ControlField::save: cannot open " + path.string());
    // The zero field is written on a minimal 1 x 1 grid.
    const ControlField body = zero_ && values_.empty()
                                  ? ControlField(horizon_, 1, -1.0, 1.0, 1, std::vector<double>(4, 0.0))
                                  : *this;
    const std::uint64_t steps = body.steps_;
    const std::uint64_t intervals = body.intervals_;
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&body.horizon_), 8);
    out.write(reinterpret_cast<const char*>(&steps), 8);
    out.write(reinterpret_cast<const char*>(&body.x_min_), 8);
    out.write(reinterpret_cast<const char*>(&body.x_max_), 8);
    out.write(reinterpret_cast<const char*>(&intervals), 8);
    out.write(reinterpret_cast<const char*>(body.values_.data()),
              static_cast<std::streamsize>(body.values_.size() * sizeof(double)));
    if (!out) throw std::runtime_error("ControlField::save: write failed for " + path.string());
}

ControlField ControlField::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ControlField::load: cannot open " + path.string());
    char magic[8];
    double horizon = 0.0, x_min = 0.0, x_max = 0.0;
    std::uint64_t steps = 0, intervals = 0;
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("ControlField::load: bad magic in " + path.string());
    in.read(reinterpret_cast<char*>(&horizon), 8);
    in.read(reinterpret_cast<char*>(&steps), 8);
    in.read(reinterpret_cast<char*>(&x_min), 8);
    in.read(reinterpret_cast<char*>(&x_max), 8);
    in.read(reinterpret_cast<char*>(&intervals), 8);
    if (!in || steps == 0 || intervals == 0 || steps > (1u << 24) || intervals > (1u << 24))
        throw std::runtime_error("ControlField::load: bad header in " + path.string());
    std::vector<double> values((steps + 1) * (intervals + 1));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("ControlField::load: truncated file " + path.string());
    return ControlField(horizon, steps, x_min, x_max, intervals, std::move(values));
}

ControlField control_from_value(const ModelSpec& model, const EmpiricalLaw& law,
                                const ValueGrid& values, double floor) {
    if (!(floor > 0.0)) throw std::invalid_argument("control_from_value: floor must be positive");
    if (values.steps != law.steps()) throw std::invalid_argument("control_from_value: time grid mismatch");
    const SpatialGrid& grid = values.grid;
    const std::size_t nodes = grid.nodes();
    const std::size_t J = grid.intervals;
    const double dx = grid.dx();
    std::vector<double> zeta(values.values.size());
    std::vector<double> lv(nodes);
    for (std::size_t n = 0; n <= values.steps; ++n) {
        const auto row = values.row(n);
        for (std::size_t j = 0; j < nodes; ++j) {
            if (!std::isfinite(row[j])) throw NumericalError("control_from_value: non-finite value grid");
            lv[j] = std::log(std::max(row[j], floor));
        }
        for (std::size_t j = 0; j < nodes; ++j) {
            double grad;
            if (j == 0)
                grad = (lv[1] - lv[0]) / dx;
            else if (j == J)
                grad = (lv[J] - lv[J - 1]) / dx;
            else
                grad = (lv[j + 1] - lv[j - 1]) / (2.0 * dx);
            const double x = grid.node(j);
            const StateView xv(&x, 1);
            const double kbar2 = law.kernel_average(model, KernelId::kappa2, xv, n);
            double s = 0.0;
            model.diffusion(xv, kbar2, StateOut(&s, 1));
            zeta[n * nodes + j] = s * grad;
        }
    }
    return ControlField(values.horizon, values.steps, grid.x_min, grid.x_max, J, std::move(zeta));
}

OfflineControl solve_offline_control(const ModelSpec& model, const Observable& observable,
                                     const OfflineControlOptions& options, bool check_refinement) {
    const RandomBlock block(options.seed, stream_tag({0x636f6e74726f6cull}), options.particles,
                            options.steps);
    const EmpiricalLaw law = simulate_particle_system(model, options.particles, options.steps,
                                                      options.horizon, block, {KernelRoute::automatic, 1});
    KbeOptions kbe;
    kbe.workers = options.workers;
    if (options.grid) {
        kbe.grid = *options.grid;
    } else {
        kbe.grid = default_grid(observable, options.intervals);
        kbe.grid = widen_until_stable(model, law, observable, kbe);
    }
    OfflineControl result{ControlField::zero(), solve_kbe(model, law, observable, kbe), 0.0};
    double peak = 0.0;
    for (std::size_t j = 0; j < kbe.grid.nodes(); ++j)
        peak = std::max(peak, result.values.at(result.values.steps, j));
    result.field = control_from_value(model, law, result.values, options.relative_floor * peak);
    if (check_refinement) result.refinement_gap = kbe_refinement_gap(model, law, observable, kbe);
    return result;
}

}  // namespace mvmc
