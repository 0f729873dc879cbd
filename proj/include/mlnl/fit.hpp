#pragma once

#include <cmath>
#include <vector>

#include "mlnl/errors.hpp"

namespace mlnl {

struct LogLogFit {
    double slope = 0;
    double intercept = 0;
    double stderr_slope = 0;
    double r_squared = 1;
};

/// Ordinary least squares of log m against log d.
inline LogLogFit fit_loglog(const std::vector<double>& d, const std::vector<double>& m) {
    const std::size_t n = d.size();
    if (n < 3 || m.size() != n) throw DegenerateFit("log-log fit needs at least three matched pairs");
    long double sx = 0, sy = 0;
    std::vector<double> X(n), Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(d[i] > 0) || !(m[i] > 0)) throw DegenerateFit("log-log fit needs positive data");
        X[i] = std::log(d[i]);
        Y[i] = std::log(m[i]);
        sx += X[i];
        sy += Y[i];
    }
    double mx = static_cast<double>(sx / n), my = static_cast<double>(sy / n);
    long double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
        syy += (Y[i] - my) * (Y[i] - my);
    }
    if (sxx == 0) throw DegenerateFit("log-log fit with a single abscissa");
    LogLogFit f;
    f.slope = static_cast<double>(sxy / sxx);
    f.intercept = my - f.slope * mx;
    long double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = Y[i] - f.intercept - f.slope * X[i];
        sse += r * r;
    }
    f.stderr_slope = static_cast<double>(std::sqrt(sse / (n - 2) / sxx));
    f.r_squared = syy > 0 ? static_cast<double>(1 - sse / syy) : 1.0;
    return f;
}

inline std::vector<double> geometric_points(double lo, double hi, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return xs;
}

}  // namespace mlnl
