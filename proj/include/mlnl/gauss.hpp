#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

namespace mlnl {

struct GaussRule16 {
    std::array<double, 16> x{};
    std::array<double, 16> w{};
};

/// 16-point Gauss-Legendre rule on [-1,1], nodes by Newton on P_16.
inline const GaussRule16& gauss16() {
    static const GaussRule16 rule = [] {
        GaussRule16 r;
        constexpr int n = 16;
        for (int i = 0; i < n / 2; ++i) {
            long double z = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) / (n + 0.5L));
            long double dp = 0;
            for (int it = 0; it < 100; ++it) {
                long double p0 = 1, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    long double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1);
                long double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-19L) break;
            }
            long double w = 2 / ((1 - z * z) * dp * dp);
            r.x[i] = static_cast<double>(-z);
            r.x[n - 1 - i] = static_cast<double>(z);
            r.w[i] = r.w[n - 1 - i] = static_cast<double>(w);
        }
        return r;
    }();
    return rule;
}

template <class F>
double gl16(F&& f, double a, double b) {
    const auto& r = gauss16();
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    long double s = 0;
    for (int i = 0; i < 16; ++i) s += r.w[i] * f(c + h * r.x[i]);
    return static_cast<double>(s * h);
}

struct IntegrationResult {
    double value = 0;
    double error = 0;
    int bisections = 0;
    bool converged = true;
};

/// Adaptive GL16 over the panels defined by consecutive `breaks`.
/// Each panel is scored by |GL16(panel) - GL16(left) - GL16(right)|; the worst
/// panel is bisected until the summed estimate meets max(abs_tol, rel_tol*|I|).
template <class F>
IntegrationResult integrate_adaptive(F&& f, const std::vector<double>& breaks, double abs_tol,
                                     double rel_tol, int max_bisections) {
    struct Panel {
        double a, b, whole, left, right;
        double fine() const { return left + right; }
        double err() const { return std::abs(whole - left - right); }
    };
    auto cmp = [](const Panel& p, const Panel& q) { return p.err() < q.err(); };
    std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> heap(cmp);
    auto make = [&](double a, double b, double whole) {
        double m = 0.5 * (a + b);
        return Panel{a, b, whole, gl16(f, a, m), gl16(f, m, b)};
    };
    long double total = 0, err = 0, mag = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        Panel p = make(breaks[i], breaks[i + 1], gl16(f, breaks[i], breaks[i + 1]));
        total += p.fine();
        err += p.err();
        mag += std::abs(p.fine());
        heap.push(p);
    }
    IntegrationResult res;
    std::vector<Panel> frozen;
    auto target = [&] {
        return std::max({abs_tol, rel_tol * std::abs(static_cast<double>(total)),
                         4e-16 * static_cast<double>(mag)});
    };
    while (!heap.empty() && static_cast<double>(err) > target()) {
        if (res.bisections >= max_bisections) {
            res.converged = false;
            break;
        }
        Panel p = heap.top();
        heap.pop();
        double m = 0.5 * (p.a + p.b);
        if (!(m > p.a && m < p.b) || (p.b - p.a) < 1e-15 * std::max(std::abs(p.a), std::abs(p.b))) {
            frozen.push_back(p);
            if (heap.empty()) break;
            continue;
        }
        Panel l = make(p.a, m, p.left), r = make(m, p.b, p.right);
        total += l.fine() + r.fine() - p.fine();
        err += l.err() + r.err() - p.err();
        mag += std::abs(l.fine()) + std::abs(r.fine()) - std::abs(p.fine());
        heap.push(l);
        heap.push(r);
        ++res.bisections;
        if (res.bisections % 256 == 0) {
            // refresh running sums to keep cancellation out of the estimate
            auto copy = heap;
            total = err = mag = 0;
            while (!copy.empty()) {
                total += copy.top().fine();
                err += copy.top().err();
                mag += std::abs(copy.top().fine());
                copy.pop();
            }
            for (const auto& q : frozen) {
                total += q.fine();
                err += q.err();
                mag += std::abs(q.fine());
            }
        }
    }
    res.value = static_cast<double>(total);
    res.error = std::max(static_cast<double>(err), 0.0);
    if (res.error > target()) res.converged = false;
    return res;
}

/// Breakpoints in (a,b) clustered geometrically (ratio 2) toward the flagged ends.
inline std::vector<double> clustered_breaks(double a, double b, bool toward_a, bool toward_b,
                                            double min_rel = 1e-12) {
    std::vector<double> pts{a, b};
    double m = 0.5 * (a + b);
    double half = m - a;
    if (toward_a || toward_b) pts.push_back(m);
    if (toward_a)
        for (double w = 0.5 * half; w > min_rel * half && w > 4e-16 * std::abs(a); w *= 0.5)
            pts.push_back(a + w);
    if (toward_b)
        for (double w = 0.5 * half; w > min_rel * half && w > 4e-16 * std::abs(b); w *= 0.5)
            pts.push_back(b - w);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

/// Breakpoints a, 2a, 4a, ... up to b (a > 0); suits integrands varying on scale z.
inline std::vector<double> dyadic_breaks(double a, double b) {
    std::vector<double> pts{a};
    for (double z = 2 * a; z < b; z *= 2) pts.push_back(z);
    pts.push_back(b);
    return pts;
}

}  // namespace mlnl
