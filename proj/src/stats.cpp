#include "mvmc/stats.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace mvmc {

double normal_quantile_two_sided(double nu) {
    if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("normal_quantile_two_sided: nu must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - 0.5 * nu);
}

namespace {

// Ordinary least squares y = a + b x.
void least_squares(const std::vector<double>& x, const std::vector<double>& y, double& a, double& b,
                   double& rms) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("least_squares: abscissae are all equal");
    b = sxy / sxx;
    a = my - b * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (a + b * x[i]);
        ss += r * r;
    }
    rms = std::sqrt(ss / n);
}

}  // namespace

RateFit fit_log_rate(std::span<const double> levels, std::span<const double> values, double base) {
    if (levels.size() != values.size()) throw std::invalid_argument("fit_log_rate: size mismatch");
    if (!(base > 1.0)) throw std::invalid_argument("fit_log_rate: base must exceed 1");
    RateFit fit;
    std::vector<double> logs;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(values[i] > 0.0) || !std::isfinite(values[i])) continue;
        fit.levels.push_back(levels[i]);
        fit.values.push_back(values[i]);
        logs.push_back(std::log(values[i]) / std::log(base));
    }
    if (fit.levels.size() < 2) throw std::invalid_argument("fit_log_rate: need two positive values");
    least_squares(fit.levels, logs, fit.intercept, fit.slope, fit.residual);
    return fit;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    double a, b, rms;
    least_squares(lx, ly, a, b, rms);
    return b;
}

double pooled_z(double mean_a, double se_a, double mean_b, double se_b) {
    const double se = std::sqrt(se_a * se_a + se_b * se_b);
    const double diff = std::abs(mean_a - mean_b);
    if (se == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
    return diff / se;
}

}  // namespace mvmc
