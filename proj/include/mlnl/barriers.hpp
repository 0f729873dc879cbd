#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mlnl/errors.hpp"
#include "mlnl/fit.hpp"
#include "mlnl/kernels.hpp"
#include "mlnl/pv_quadrature.hpp"

namespace mlnl {

/// A_s(r): 1 for s < 1/2, -log r for s = 1/2, r^{1-2s} for s > 1/2.
inline double as_factor(const FractionalOrder& s, double r) {
    if (!(r > 0 && r < 1)) throw DomainError("as_factor: r must lie in (0,1)");
    bool half = s.rational_form ? *s.rational_form == Rational(1, 2) : s.s == 0.5;
    if (half) return -std::log(r);
    if (s.s < 0.5) return 1.0;
    return std::pow(r, 1 - 2 * s.s);
}

/// v(x) = e^{lambda x} on |x| < 2R, zero elsewhere.
struct ExponentialBarrier {
    double lambda = 1;
    double R = 1;

    double operator()(double x) const { return std::abs(x) < 2 * R ? std::exp(lambda * x) : 0.0; }
    GlobalFunction as_function() const {
        GlobalFunction g;
        double l = lambda, r = R;
        g.eval = [l, r](double x) { return std::abs(x) < 2 * r ? std::exp(l * x) : 0.0; };
        g.kinks = {-2 * R, 2 * R};
        g.support_hint = Interval{-2 * R, 2 * R};
        g.smoothness_interior = 4;
        g.deriv = [l](double x, int n) { return std::pow(l, n) * std::exp(l * x); };
        return g;
    }
};

/// psi(x) = 0 for |x| <= r0, t - t^{1+sigma}/(1+sigma) with t = |x| - r0 up to 2r0, constant beyond.
struct DistanceBarrier {
    double r0 = 0.5;
    double sigma = 0.2;
    double delta = 0.5;

    double plateau() const { return r0 - std::pow(r0, 1 + sigma) / (1 + sigma); }
    double operator()(double x) const {
        double t = std::abs(x) - r0;
        if (t <= 0) return 0;
        if (t >= r0) return plateau();
        return t - std::pow(t, 1 + sigma) / (1 + sigma);
    }
    /// Derivatives on r0 < |x| < 2r0.
    double deriv(double x, int n) const {
        double t = std::abs(x) - r0;
        if (t <= 0 || t >= r0) return 0;
        double sg = x > 0 ? 1.0 : -1.0;
        double c = 1;  // d^n/dt^n of -t^{1+sigma}/(1+sigma) = -(sigma)(sigma-1)...t^{1+sigma-n}
        for (int i = 1; i < n; ++i) c *= (sigma + 1 - i);
        double v = -c * std::pow(t, 1 + sigma - n);
        if (n == 1) v += 1;
        return (n % 2 ? sg : 1.0) * v;
    }
    GlobalFunction as_function() const {
        GlobalFunction g;
        DistanceBarrier b = *this;
        g.eval = [b](double x) { return b(x); };
        g.kinks = {-2 * r0, -r0, r0, 2 * r0};
        g.support_hint = Interval{-2 * r0, 2 * r0};
        g.smoothness_interior = 4;
        g.deriv = [b](double x, int n) { return b.deriv(x, n); };
        return g;
    }
};

/// Quintic cutoff: 1 on [0,1], 0 on [2,inf), smoothstep in between.
inline double eta_cutoff(double t, int order = 0) {
    if (t <= 1 || t >= 2) return order == 0 ? (t <= 1 ? 1.0 : 0.0) : 0.0;
    double u = t - 1;
    switch (order) {
        case 0: return 1 - u * u * u * (10 - 15 * u + 6 * u * u);
        case 1: return -30 * u * u * (1 - u) * (1 - u);
        case 2: return -60 * u * (1 - u) * (1 - 2 * u);
        default: throw DomainError("eta_cutoff: order must be 0, 1 or 2");
    }
}

/// phi(x) = B(R^2 - y^2) - D eta(d/delta) d^{2-gamma} on (0,1), y = x - 1/2, R = 1.
struct PoissonBarrier {
    double gamma = 0.5;
    double R_dom = 1;
    double B = 0, D = 0;
    double delta = 0.125;

    static PoissonBarrier for_target(double gamma, double M) {
        if (!(gamma > 0 && gamma < 1)) throw DomainError("PoissonBarrier: gamma must lie in (0,1)");
        PoissonBarrier b;
        b.gamma = gamma;
        b.delta = 0.125;  // delta0/4 with delta0 = 1/2; the curvature term of d vanishes in 1D
        b.D = 2 * M / (1 - gamma);
        b.B = M / std::pow(b.delta, gamma) * (242 / (1 - gamma) + 1);
        return b;
    }
    double operator()(double x) const {
        double y = x - 0.5, d = std::min(x, 1 - x);
        return B * (R_dom * R_dom - y * y) - D * eta_cutoff(d / delta) * std::pow(d, 2 - gamma);
    }
    double minus_second_derivative(double x) const {
        double d = std::min(x, 1 - x), g = gamma;
        double w2 = eta_cutoff(d / delta, 2) / (delta * delta) * std::pow(d, 2 - g) +
                    2 * eta_cutoff(d / delta, 1) / delta * (2 - g) * std::pow(d, 1 - g) +
                    eta_cutoff(d / delta) * (2 - g) * (1 - g) * std::pow(d, -g);
        return 2 * B + D * w2;
    }
};

struct PoissonCheck {
    double min_ratio = 0;  ///< min over samples of -phi'' d^gamma / M
    bool holds = false;
    double boundary_min = 0;
};

inline double poisson_barrier_eval(const PoissonBarrier& b, double x) { return b(x); }

inline PoissonCheck poisson_barrier_check(const PoissonBarrier& b, double M_target, int samples = 50) {
    PoissonCheck c;
    c.min_ratio = std::numeric_limits<double>::infinity();
    auto left = geometric_points(1e-6, 0.5, samples / 2);
    std::vector<double> xs = left;
    for (double x : left) xs.push_back(1 - x);
    for (double x : xs) {
        double d = std::min(x, 1 - x);
        c.min_ratio = std::min(c.min_ratio, b.minus_second_derivative(x) * std::pow(d, b.gamma) / M_target);
    }
    c.boundary_min = std::min(b(0.0), b(1.0));
    c.holds = c.min_ratio >= 1 && c.boundary_min >= 0;
    return c;
}

struct BarrierSample {
    double x = 0;
    double local_part = 0;
    double nonlocal_part = 0;
    double gradient_part = 0;
    double total = 0;
    bool ok = true;
};

struct ExpBarrierReport {
    bool all_negative = true;
    double empirical_C = 0;
    std::vector<BarrierSample> samples;
    int failed_samples = 0;
};

/// L_k v at the samples; empirical_C is the smallest C with
/// L_k v <= -(1/C) e^{lambda R/2} / (lambda R^{1+2s}) v on the samples.
inline ExpBarrierReport exp_barrier_check(const KernelSpec& kernel, double lambda, double R,
                                          const std::vector<double>& samples, const QuadratureParams& params = {}) {
    ExponentialBarrier v{lambda, R};
    GlobalFunction g = v.as_function();
    ExpBarrierReport rep;
    const double s = kernel.s();
    const double scale = std::exp(lambda * R / 2) / (lambda * std::pow(R, 1 + 2 * s));
    for (double x : samples) {
        BarrierSample bs;
        bs.x = x;
        try {
            bs.nonlocal_part = lk_apply(kernel, g, x, params).value;
            bs.total = bs.nonlocal_part;
            if (!(bs.nonlocal_part < 0)) rep.all_negative = false;
            else rep.empirical_C = std::max(rep.empirical_C, -v(x) * scale / bs.nonlocal_part);
        } catch (const QuadratureError&) {
            bs.ok = false;
            ++rep.failed_samples;
            rep.all_negative = false;
        }
        rep.samples.push_back(bs);
    }
    if (!rep.all_negative) rep.empirical_C = std::numeric_limits<double>::infinity();
    return rep;
}

struct DistanceBarrierReport {
    double min_value = 0;
    bool holds = false;
    double empirical_C = 0;  ///< smallest C with L_k psi >= -C r0^{1-2s} A_s(t/r0) on the samples
    std::vector<BarrierSample> samples;
};

/// Samples t = (|x| - r0) geometric in [1e-4 delta r0, delta r0), right side of the ball.
inline std::vector<double> annulus_samples(double r0, double delta, int n = 50) {
    std::vector<double> xs;
    for (double t : geometric_points(1e-4 * delta * r0, 0.999 * delta * r0, n)) xs.push_back(r0 + t);
    return xs;
}

inline DistanceBarrierReport distance_barrier_check(const KernelSpec& kernel, const DistanceBarrier& psi, double p,
                                                    double q, double g, const std::vector<double>& samples,
                                                    const QuadratureParams& params = {}) {
    const double s = kernel.s();
    if (!(psi.sigma > 0 && psi.sigma < std::min(2 - 2 * s, 1.0)))
        throw DomainError("distance barrier: sigma must lie in (0, min{2-2s,1})");
    GlobalFunction f = psi.as_function();
    DistanceBarrierReport rep;
    rep.min_value = std::numeric_limits<double>::infinity();
    for (double x : samples) {
        double t = std::abs(x) - psi.r0;
        if (!(t > 0 && t < psi.delta * psi.r0)) throw DomainError("distance barrier sample outside the annulus");
        BarrierSample bs;
        bs.x = x;
        bs.local_part = p * psi.sigma * std::pow(t, psi.sigma - 1);
        bs.gradient_part = g * psi.deriv(x, 1);
        try {
            bs.nonlocal_part = q * lk_apply(kernel, f, x, params).value;
        } catch (const QuadratureError& e) {
            bs.ok = false;
            bs.nonlocal_part = q * e.partial_value;
        }
        bs.total = bs.local_part + bs.nonlocal_part + bs.gradient_part;
        rep.min_value = std::min(rep.min_value, bs.ok ? bs.total : -std::numeric_limits<double>::infinity());
        if (q > 0) {
            double shape = std::pow(psi.r0, 1 - 2 * s) * as_factor(kernel.order, t / psi.r0);
            rep.empirical_C = std::max(rep.empirical_C, -bs.nonlocal_part / q / shape);
        }
        rep.samples.push_back(bs);
    }
    rep.holds = rep.min_value >= 1;
    return rep;
}

struct DeltaSearch {
    double delta = 0;  ///< largest certified delta found, 0 if none
    bool found = false;
    DistanceBarrierReport report;
};

/// Bisection on delta in (0, 1/2] for the annulus inequality, 50 samples per trial.
inline DeltaSearch find_barrier_delta(const KernelSpec& kernel, double r0, double sigma, double p, double q,
                                      double g, int iterations = 30, const QuadratureParams& params = {}) {
    DeltaSearch out;
    auto trial = [&](double delta) {
        DistanceBarrier psi{r0, sigma, delta};
        return distance_barrier_check(kernel, psi, p, q, g, annulus_samples(r0, delta), params);
    };
    auto top = trial(0.5);
    if (top.holds) return {0.5, true, top};
    double lo = 0, hi = 0.5;
    for (int i = 0; i < iterations; ++i) {
        double mid = 0.5 * (lo + hi);
        auto r = trial(mid);
        if (r.holds) {
            lo = mid;
            out = {mid, true, r};
        } else {
            hi = mid;
        }
    }
    return out;
}

}  // namespace mlnl
