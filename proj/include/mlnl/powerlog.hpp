#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "mlnl/errors.hpp"
#include "mlnl/gauss.hpp"
#include "mlnl/kernels.hpp"
#include "mlnl/pv_quadrature.hpp"
#include "mlnl/rational.hpp"

namespace mlnl {

/// x^alpha log^j x on (0,1); zero for x <= 0; for x >= 1 equal to 1 (j = 0) or 0 (j >= 1).
struct PowerLogAtom {
    double alpha = 1;
    int j = 0;
    std::optional<Rational> alpha_rational;

    static PowerLogAtom make(double alpha, int j) {
        if (!(alpha > 0)) throw DomainError("atom exponent must be positive");
        if (j < 0) throw DomainError("atom log power must be non-negative");
        PowerLogAtom a{alpha, j, std::nullopt};
        if (alpha == std::round(alpha) && alpha < 1e15) a.alpha_rational = Rational(static_cast<std::int64_t>(alpha));
        return a;
    }
    static PowerLogAtom make(Rational alpha, int j) {
        PowerLogAtom a = make(alpha.to_double(), j);
        a.alpha_rational = alpha;
        return a;
    }
};

inline double atom_eval(const PowerLogAtom& a, double x) {
    if (x <= 0) return 0;
    if (x >= 1) return a.j == 0 ? 1.0 : 0.0;
    double v = std::pow(x, a.alpha);
    if (a.j > 0) v *= std::pow(std::log(x), a.j);
    return v;
}

/// Derivative of any order n >= 0 on (0,1): x^{alpha-n} * sum_k c_k log^k x.
inline double atom_derivative(const PowerLogAtom& a, double x, int order) {
    if (!(x > 0 && x < 1)) throw DomainError("atom derivative needs 0 < x < 1");
    std::vector<double> c(a.j + 1, 0.0);
    c[a.j] = 1;
    double e = a.alpha;
    for (int n = 0; n < order; ++n) {
        for (int k = 0; k <= a.j; ++k) c[k] = e * c[k] + (k + 1 <= a.j ? (k + 1) * c[k + 1] : 0.0);
        e -= 1;
    }
    double L = std::log(x), acc = 0;
    for (int k = a.j; k >= 0; --k) acc = acc * L + c[k];
    return std::pow(x, e) * acc;
}

inline double atom_deriv(const PowerLogAtom& a, double x, int order) {
    if (order < 1 || order > 3) throw DomainError("atom_deriv: order must be 1, 2 or 3");
    return atom_derivative(a, x, order);
}

/// binom(beta, i) = prod_{l<i} (beta - l) / i!.
inline double generalized_binomial(double beta, int i) {
    if (i < 0) throw DomainError("generalized_binomial: i must be non-negative");
    double v = 1;
    for (int l = 0; l < i; ++l) v *= (beta - l) / (l + 1);
    return v;
}

/// (m)_l = m!/(m-l)!.
inline std::int64_t pochhammer_falling(int m, int l) {
    if (m < 0 || l < 0 || l > m) throw DomainError("pochhammer_falling: need 0 <= l <= m");
    std::int64_t v = 1;
    for (int i = 0; i < l; ++i) v *= (m - i);
    return v;
}

namespace detail {

constexpr double kSeriesRadius = 0.25;

/// Taylor coefficients of (1+r)^alpha log^m(1+r) about r = 0.
inline std::vector<double> shifted_powerlog_taylor(double alpha, int m, int n) {
    std::vector<double> pw(n + 1), lg(n + 1, 0.0), acc(n + 1, 0.0);
    for (int i = 0; i <= n; ++i) pw[i] = generalized_binomial(alpha, i);
    for (int i = 1; i <= n; ++i) lg[i] = (i % 2 ? 1.0 : -1.0) / i;
    acc = pw;
    for (int t = 0; t < m; ++t) {
        std::vector<double> nxt(n + 1, 0.0);
        for (int i = 0; i <= n; ++i)
            for (int k = 1; k <= n - i; ++k) nxt[i + k] += acc[i] * lg[k];
        acc = std::move(nxt);
    }
    return acc;
}

/// \int_0^1 g(r) r^{-1-2s} dr where g(r) = h(1+r) + h(1-r) - 2h(1) is even and O(r^2).
/// Series on [0, 1/4] (exact even-part integration), GL panels in w = 1-r elsewhere.
template <class H>
double symmetrized_pv(double s, const std::vector<double>& taylor, H&& h_pair, const char* who) {
    const double r0 = kSeriesRadius;
    long double series = 0;
    for (std::size_t n = 2; n < taylor.size(); n += 2) {
        long double term = 2.0L * taylor[n] * std::pow(r0, n - 2 * s) / (n - 2 * s);
        series += term;
        if (n > 40 && std::abs(term) < 1e-20L * (1 + std::abs(series))) break;
    }
    auto f = [&](double w) { return h_pair(w) * std::pow(1 - w, -1 - 2 * s); };
    auto breaks = clustered_breaks(0.0, 1 - r0, true, false, 1e-15);
    auto r = integrate_adaptive(f, breaks, 1e-15, 1e-14, 4000);
    if (!r.converged) throw QuadratureError(std::string(who) + ": no convergence", double(series) + r.value, r.error);
    return static_cast<double>(series) + r.value;
}

struct PvCache {
    std::mutex mu;
    std::map<std::tuple<double, double, int>, double> table;
};
inline PvCache& pv_cache() {
    static PvCache c;
    return c;
}

}  // namespace detail

/// p.v. \int_0^2 (1 - t^alpha) / |1-t|^{1+2s} dt.
inline double pv_one_minus_power(double s, double alpha) {
    if (!(s > 0 && s < 1)) throw DomainError("pv_one_minus_power: s must lie in (0,1)");
    if (alpha < 0) throw DomainError("pv_one_minus_power: alpha must be non-negative");
    if (alpha == 0 || alpha == 1) return 0.0;
    auto& c = detail::pv_cache();
    auto key = std::make_tuple(s, alpha, 0);
    {
        std::lock_guard<std::mutex> lk(c.mu);
        if (auto it = c.table.find(key); it != c.table.end()) return it->second;
    }
    auto tay = detail::shifted_powerlog_taylor(alpha, 0, 160);
    for (auto& t : tay) t = -t;
    tay[0] = 0;
    auto pair = [alpha](double w) { return 2 - std::pow(w, alpha) - std::pow(2 - w, alpha); };
    double v = detail::symmetrized_pv(s, tay, pair, "pv_one_minus_power");
    std::lock_guard<std::mutex> lk(c.mu);
    c.table[key] = v;
    return v;
}

/// p.v. \int_0^2 t^alpha log^m t / |1-t|^{1+2s} dt, m >= 1.
inline double pv_power_log(double s, double alpha, int m) {
    if (m < 1) throw DomainError("pv_power_log: m must be at least 1");
    if (!(s > 0 && s < 1)) throw DomainError("pv_power_log: s must lie in (0,1)");
    auto& c = detail::pv_cache();
    auto key = std::make_tuple(s, alpha, m);
    {
        std::lock_guard<std::mutex> lk(c.mu);
        if (auto it = c.table.find(key); it != c.table.end()) return it->second;
    }
    auto tay = detail::shifted_powerlog_taylor(alpha, m, 160);
    auto pair = [alpha, m](double w) {
        double a = w > 0 ? std::pow(w, alpha) * std::pow(std::log(w), m) : 0.0;
        return a + std::pow(2 - w, alpha) * std::pow(std::log(2 - w), m);
    };
    double v = detail::symmetrized_pv(s, tay, pair, "pv_power_log");
    std::lock_guard<std::mutex> lk(c.mu);
    c.table[key] = v;
    return v;
}

struct BoundaryTerm {
    enum class Kind { none, inverse_power };
    Kind kind = Kind::none;
    double coeff = 0;     ///< coeff * (1-x)^{-exponent}
    double exponent = 0;  ///< 2s
};

struct ExtraPower {
    int exponent = 0;  ///< alpha - 2s, a non-negative integer
    double coeff = 0;
};

/// f_{alpha,j}: power series plus the resonant integer power and the (1-x)^{-2s} term.
struct SmoothPart {
    std::vector<double> series_coeffs;  ///< c_i, zero at i_star
    int truncation_index = 0;
    double tail_bound = 0;  ///< bound on the dropped series tail for |x| <= 1/2
    std::optional<ExtraPower> extra_power;
    BoundaryTerm boundary_term;
    double valid_lo = 0, valid_hi = 0.5;

    double eval(double x) const {
        long double acc = 0;
        for (auto it = series_coeffs.rbegin(); it != series_coeffs.rend(); ++it) acc = acc * x + *it;
        if (extra_power) acc += extra_power->coeff * std::pow(x, extra_power->exponent);
        if (boundary_term.kind == BoundaryTerm::Kind::inverse_power)
            acc += boundary_term.coeff * std::pow(1 - x, -boundary_term.exponent);
        return static_cast<double>(acc);
    }
};

struct LogPolyExpansion {
    FractionalOrder s;
    PowerLogAtom atom;
    std::vector<double> a;  ///< a^{(0)} .. a^{(j+1)}
    bool resonant = false;
    std::optional<int> i_star;
    SmoothPart smooth;
};

constexpr double kResonanceGuard = 1e-6;

/// (-Delta)^s u_{alpha,j}(x) = x^{alpha-2s} sum_k a^{(k)} log^k x + f(x) on (0,1/2).
inline LogPolyExpansion fractional_expansion(const FractionalOrder& order, const PowerLogAtom& atom,
                                             double trunc_tol = 1e-17) {
    const double s = order.s, alpha = atom.alpha;
    const int j = atom.j;
    if (!(alpha > 0)) throw DomainError("fractional_expansion: alpha must be positive");
    LogPolyExpansion ex{order, atom, std::vector<double>(j + 2, 0.0), false, std::nullopt, {}};

    // resonance: alpha - 2s in N u {0}
    if (order.rational_form && atom.alpha_rational) {
        Rational d = *atom.alpha_rational - Rational(2) * *order.rational_form;
        if (d.is_integer() && d.num >= 0) ex.i_star = static_cast<int>(d.num);
    } else {
        double d = alpha - 2 * s;
        double i0 = std::round(d);
        if (i0 >= 0 && std::abs(d - i0) < kResonanceGuard) {
            throw NearResonance("fractional_expansion: |2s - alpha + i| below guard at i = " +
                                    std::to_string(static_cast<int>(i0)),
                                static_cast<int>(i0));
        }
    }
    ex.resonant = ex.i_star.has_value();
    const int istar = ex.i_star.value_or(-1);
    const double C = normalization_constant(s);
    auto beta = [&](int i) { return ex.resonant ? static_cast<double>(i - istar) : 2 * s - alpha + i; };

    // binomial(i+2s, i) by recurrence, kept as a running value
    const double ln2 = std::numbers::ln2;
    long double jfact = 1;
    for (int i = 2; i <= j; ++i) jfact *= i;

    // coefficient sums S_m = sum_{i != i*} c_i 2^{-beta_i} sum_l (m)_l ln2^{m-l} / beta_i^{l+1}
    std::vector<long double> S(j + 1, 0.0L);
    {
        long double ci = 1;
        for (int i = 0; i < 5000; ++i) {
            if (i > 0) ci *= (i + 2 * s) / i;
            if (i == istar) continue;
            double b = beta(i);
            long double w = ci * std::exp2(-b);
            long double biggest = 0;
            for (int m = 0; m <= j; ++m) {
                long double inner = 0;
                for (int l = 0; l <= m; ++l)
                    inner += static_cast<long double>(pochhammer_falling(m, l)) * std::pow(ln2, m - l) /
                             std::pow(static_cast<long double>(b), l + 1);
                S[m] += w * inner;
                biggest = std::max(biggest, std::abs(w * inner));
            }
            if (i > alpha + 4 && biggest < 1e-20L * (1 + std::abs(S[0]))) break;
        }
    }
    double cstar = ex.resonant ? generalized_binomial(istar + 2 * s, istar) : 0.0;
    for (int k = 0; k <= j; ++k) {
        const int m = j - k;
        const double bjk = generalized_binomial(j, k);
        long double v = 0;
        if (k == j) v += 1.0 / s + pv_one_minus_power(s, alpha);
        else v -= bjk * pv_power_log(s, alpha, m);
        v -= bjk * S[m];
        if (ex.resonant) v += bjk * cstar * std::pow(ln2, m + 1) / (m + 1);
        ex.a[k] = static_cast<double>(C * v);
    }
    if (ex.resonant) {
        long double sum = 0;
        for (int k = 0; k <= j; ++k) sum += generalized_binomial(j, k) * ((j - k) % 2 ? -1.0 : 1.0) / (j - k + 1);
        ex.a[j + 1] = static_cast<double>(C * cstar * sum);
        ex.smooth.extra_power = ExtraPower{istar, ex.a[0]};
        ex.a[0] = 0;
    }

    // smooth series C j! sum_{i != i*} c_i x^i / beta_i^{j+1}
    {
        long double ci = 1;
        double scale = 0;
        int I = 0;
        for (int i = 0; i < 5000; ++i) {
            if (i > 0) ci *= (i + 2 * s) / i;
            double c = 0;
            if (i != istar) c = static_cast<double>(C * jfact * ci / std::pow(static_cast<long double>(beta(i)), j + 1));
            ex.smooth.series_coeffs.push_back(c);
            double mag = std::abs(c) * std::exp2(-i);
            scale = std::max(scale, mag);
            I = i;
            if (i > alpha + 4 && mag < trunc_tol * std::max(1.0, scale) / 10) break;
        }
        ex.smooth.truncation_index = I;
        double q = 0.5 * (1 + 2 * s / (I + 1)) * std::pow(std::abs(beta(I) / beta(I + 1)), j + 1);
        q = std::max(q, 0.5);
        ex.smooth.tail_bound = std::abs(ex.smooth.series_coeffs.back()) * std::exp2(-I) * q / (1 - q);
    }
    if (j == 0) ex.smooth.boundary_term = {BoundaryTerm::Kind::inverse_power, -C / (2 * s), 2 * s};
    return ex;
}

inline double expansion_eval(const LogPolyExpansion& ex, double x) {
    if (!(x > 0 && x < 0.5)) throw DomainError("expansion_eval: x must lie in (0,1/2)");
    double L = std::log(x);
    long double poly = 0;
    for (auto it = ex.a.rbegin(); it != ex.a.rend(); ++it) poly = poly * L + *it;
    double p = static_cast<double>(poly);
    double lead = p == 0 ? 0.0 : std::pow(x, ex.atom.alpha - 2 * ex.s.s) * p;
    return lead + ex.smooth.eval(x);
}

inline nlohmann::json to_json(const LogPolyExpansion& ex) {
    nlohmann::json j;
    j["s"] = ex.s.str();
    j["alpha"] = ex.atom.alpha;
    j["j"] = ex.atom.j;
    j["resonant"] = ex.resonant;
    j["i_star"] = ex.i_star ? nlohmann::json(*ex.i_star) : nlohmann::json(nullptr);
    j["a"] = ex.a;
    j["series_coeffs"] = ex.smooth.series_coeffs;
    j["extra_power"] = ex.smooth.extra_power
                           ? nlohmann::json{{"exponent", ex.smooth.extra_power->exponent},
                                            {"coeff", ex.smooth.extra_power->coeff}}
                           : nlohmann::json(nullptr);
    if (ex.smooth.boundary_term.kind == BoundaryTerm::Kind::none)
        j["boundary_term"] = "none";
    else
        j["boundary_term"] = {{"kind", "inverse_power"},
                              {"coeff", ex.smooth.boundary_term.coeff},
                              {"exponent", ex.smooth.boundary_term.exponent}};
    j["tail_bound"] = ex.smooth.tail_bound;
    return j;
}

/// Atom as a GlobalFunction with kinks {0,1} and exact derivatives on (0,1).
inline GlobalFunction atom_function(const PowerLogAtom& a) {
    GlobalFunction g;
    g.eval = [a](double x) { return atom_eval(a, x); };
    g.kinks = {0.0, 1.0};
    g.support_hint = {0.0, 1.0};
    g.smoothness_interior = 4;
    g.deriv = [a](double x, int n) { return atom_derivative(a, x, n); };
    return g;
}

}  // namespace mlnl
