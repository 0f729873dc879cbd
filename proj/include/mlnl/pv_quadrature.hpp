#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "mlnl/errors.hpp"
#include "mlnl/gauss.hpp"
#include "mlnl/kernels.hpp"

namespace mlnl {

struct Interval {
    double lo = 0;
    double hi = 1;
};

/// A bounded function on the whole line with known points of reduced smoothness.
struct GlobalFunction {
    std::function<double(double)> eval;
    std::vector<double> kinks;
    std::optional<Interval> support_hint;  ///< eval is constant on each side outside
    int smoothness_interior = 2;
    std::function<double(double, int)> deriv;  ///< optional, orders 1..4 between kinks
};

struct QuadratureParams {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double inner_radius_fraction = 0.5;
    int max_panels = 4096;
};

struct LkValue {
    double value = 0;
    double error_estimate = 0;
};

namespace detail {

inline void check_params(const QuadratureParams& p) {
    if (!(p.rel_tol > 0 && p.abs_tol > 0)) throw DomainError("quadrature tolerances must be positive");
    if (!(p.inner_radius_fraction > 0 && p.inner_radius_fraction <= 1))
        throw DomainError("inner_radius_fraction must lie in (0,1]");
    if (p.max_panels < 64) throw DomainError("max_panels must be at least 64");
}

}  // namespace detail

/// L_k u(x) = p.v. \int (u(x) - u(x+z)) k(z) dz, evaluated as \int_0^inf S(z) k(z) dz with
/// S(z) = 2u(x) - u(x+z) - u(x-z). On [0, z0] S is replaced by its Taylor polynomial,
/// [z0, rho] and [rho, Z] are integrated by adaptive GL16 with breakpoints at kink
/// images, and the constant tail beyond the support is integrated exactly.
inline LkValue lk_apply(const KernelSpec& kernel, const GlobalFunction& u, double x,
                        const QuadratureParams& params = {}) {
    detail::check_params(params);
    double dist = std::numeric_limits<double>::infinity();
    for (double k : u.kinks) dist = std::min(dist, std::abs(x - k));
    if (!(dist > 0)) throw PreconditionError("lk_apply: x coincides with a kink");
    const double rho = params.inner_radius_fraction * std::min(dist, 1.0);
    const double ux = u.eval(x);

    // inner Taylor piece
    const bool have4 = static_cast<bool>(u.deriv) && u.smoothness_interior >= 4;
    double u2, u4 = 0, u2_err = 0;
    if (u.deriv) {
        u2 = u.deriv(x, 2);
        if (have4) u4 = u.deriv(x, 4);
    } else {
        // Richardson-extrapolated second difference
        auto d2 = [&](double h) { return (u.eval(x + h) - 2 * ux + u.eval(x - h)) / (h * h); };
        const double h = 1e-2 * rho, coarse = d2(h), fine = d2(0.5 * h);
        u2 = (4 * fine - coarse) / 3;
        u2_err = std::abs(fine - coarse) / 3;
    }
    const double z0 = rho * (have4 ? 1e-2 : 1e-4);
    const double w2 = kernel.moment(2, 0, z0);
    const double local = std::min(dist, 1.0);
    double taylor = -u2 * w2;
    double taylor_err = u2_err * w2;
    if (have4) {
        double t4 = -u4 / 12 * kernel.moment(4, 0, z0);
        taylor += t4;
        taylor_err += std::abs(t4) * (z0 / local) * (z0 / local) + 1e-16 * std::abs(taylor);
    } else {
        taylor_err += std::abs(taylor) * (z0 / local) * (z0 / local) * 10 + 1e-16 * std::abs(taylor);
    }

    // outer extent
    double Z;
    double tail_S = 0;
    std::vector<double> images;
    for (double k : u.kinks) images.push_back(std::abs(k - x));
    if (u.support_hint) {
        double lo = u.support_hint->lo, hi = u.support_hint->hi;
        images.push_back(std::abs(x - lo));
        images.push_back(std::abs(hi - x));
        Z = std::max({x - lo, hi - x, rho});
        double cl = u.eval(lo - 1 - std::abs(lo)), cr = u.eval(hi + 1 + std::abs(hi));
        tail_S = 2 * ux - cl - cr;
    } else {
        Z = 1e6 * (1 + std::abs(x));
        tail_S = 2 * ux - u.eval(x + Z) - u.eval(x - Z);
    }

    std::vector<double> breaks = dyadic_breaks(z0, rho);
    std::vector<double> marks;
    for (double z : images)
        if (z > rho && z < Z) marks.push_back(z);
    marks.push_back(Z);
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
    if (Z > rho) {
        // geometric growth from rho to half the first mark, then clustering at each mark
        double first = marks.front();
        double start = rho;
        if (first > 4 * rho) {
            auto d = dyadic_breaks(rho, 0.5 * first);
            breaks.insert(breaks.end(), d.begin() + 1, d.end());
            start = 0.5 * first;
        }
        double prev = start;
        bool prev_is_mark = false;
        for (double mk : marks) {
            auto c = clustered_breaks(prev, mk, prev_is_mark, true);
            breaks.insert(breaks.end(), c.begin() + 1, c.end());
            prev = mk;
            prev_is_mark = true;
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto integrand = [&](double z) { return (2 * ux - u.eval(x + z) - u.eval(x - z)) * kernel(z); };
    double abs_tol = std::max(params.abs_tol - taylor_err, 0.5 * params.abs_tol);
    IntegrationResult r = integrate_adaptive(integrand, breaks, abs_tol, params.rel_tol, params.max_panels);

    double Zend = std::max(Z, rho);
    double tail = tail_S == 0 ? 0.0 : tail_S * kernel.moment(0, Zend, std::numeric_limits<double>::infinity());
    LkValue out{taylor + r.value + tail, taylor_err + r.error};
    if (!r.converged)
        throw QuadratureError("lk_apply: no convergence within max_panels", out.value, out.error_estimate);
    return out;
}

inline std::vector<LkValue> lk_apply_batch(const KernelSpec& kernel, const GlobalFunction& u,
                                           const std::vector<double>& xs, const QuadratureParams& params = {}) {
    std::vector<LkValue> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(lk_apply(kernel, u, x, params));
    return out;
}

}  // namespace mlnl
