#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvmc {

/// Welford running mean and Bessel-corrected variance.
class RunningStats {
public:
    void add(double x) {
        ++count_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (x - mean_);
    }
    std::size_t count() const { return count_; }
    double mean() const { return mean_; }
    /// 0 when fewer than two samples.
    double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Two-sided standard-normal quantile C_nu = Phi^{-1}(1 - nu / 2).
double normal_quantile_two_sided(double nu);

/// Least-squares fit of log_base(value) = intercept + slope * level.
struct RateFit {
    std::vector<double> levels;
    std::vector<double> values;
    double slope = 0.0;
    double intercept = 0.0;
    /// Root-mean-square residual in log_base units.
    double residual = 0.0;
    /// Decay rate, -slope.
    double rate() const { return -slope; }
};

/// Points with non-positive values are dropped; at least two must remain.
RateFit fit_log_rate(std::span<const double> levels, std::span<const double> values, double base);

/// Slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Two-sample z statistic |a - b| / sqrt(se_a^2 + se_b^2); 0 when both errors vanish.
double pooled_z(double mean_a, double se_a, double mean_b, double se_b);

}  // namespace mvmc
