#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mlnl/errors.hpp"
#include "mlnl/gauss.hpp"
#include "mlnl/rational.hpp"

namespace mlnl {

struct FractionalOrder {
    double s = 0.5;
    std::optional<Rational> rational_form;

    static FractionalOrder from_double(double s) {
        if (!(s > 0 && s < 1)) throw DomainError("fractional order must lie in (0,1)");
        return {s, std::nullopt};
    }
    static FractionalOrder from_rational(std::int64_t num, std::int64_t den) {
        Rational r(num, den);
        if (!(r.num > 0 && r.num < r.den)) throw DomainError("rational order must lie in (0,1)");
        return {r.to_double(), r};
    }
    /// Parses "num/den" or a decimal. Decimals within 1e-9 of a rational with
    /// denominator <= 64 are promoted when `promote` is set; `notice` receives a message.
    static FractionalOrder parse(const std::string& text, bool promote = true, std::string* notice = nullptr) {
        auto slash = text.find('/');
        try {
            if (slash != std::string::npos) {
                std::size_t p1 = 0, p2 = 0;
                long long n = std::stoll(text.substr(0, slash), &p1);
                long long d = std::stoll(text.substr(slash + 1), &p2);
                if (p1 != slash || p2 != text.size() - slash - 1) throw DomainError("bad rational '" + text + "'");
                return from_rational(n, d);
            }
            std::size_t pos = 0;
            double v = std::stod(text, &pos);
            if (pos != text.size()) throw DomainError("bad number '" + text + "'");
            if (promote) {
                if (auto r = promote_to_rational(v)) {
                    if (notice) *notice = "s=" + text + " promoted to " + r->str();
                    return from_rational(r->num, r->den);
                }
            }
            return from_double(v);
        } catch (const std::invalid_argument&) {
            throw DomainError("cannot parse fractional order '" + text + "'");
        } catch (const std::out_of_range&) {
            throw DomainError("fractional order out of range '" + text + "'");
        }
    }

    bool is_rational() const { return rational_form.has_value(); }
    std::string str() const {
        if (rational_form) return rational_form->str();
        return shortest_repr(s);
    }
};

/// C_s = 2^{2s} Gamma((1+2s)/2) / (sqrt(pi) Gamma(2-s)) * s(1-s).
inline double normalization_constant(double s) {
    if (!(s > 0 && s < 1)) throw DomainError("normalization_constant: s must lie in (0,1)");
    return std::exp2(2 * s) * std::tgamma(0.5 + s) / (std::sqrt(std::numbers::pi) * std::tgamma(2 - s)) *
           s * (1 - s);
}

enum class KernelKind { fractional_exact, custom };

struct KernelSpec {
    FractionalOrder order;
    double kappa1 = 0;
    double kappa2 = 0;
    KernelKind kind = KernelKind::fractional_exact;
    std::function<double(double)> evaluator;
    std::string name = "fractional";

    double operator()(double z) const { return evaluator(z); }
    double s() const { return order.s; }

    /// \int_a^b z^m k(z) dz for 0 <= a < b <= inf. Closed form for the exact
    /// kernel; geometric Gauss panels plus a power-law tail otherwise.
    double moment(int m, double a, double b) const {
        if (!(b > a) || a < 0) return 0;
        const double s2 = 2 * order.s;
        const double e = m - s2;
        if (kind == KernelKind::fractional_exact) {
            if (std::isinf(b) && e >= 0) throw DomainError("kernel moment diverges at infinity");
            if (a == 0 && e <= 0) throw DomainError("kernel moment diverges at zero");
            double C = kappa1;
            if (e == 0) return C * std::log(b / a);
            double fb = std::isinf(b) ? 0.0 : std::pow(b, e);
            double fa = a == 0 ? 0.0 : std::pow(a, e);
            return C * (fb - fa) / e;
        }
        auto f = [&](double z) { return std::pow(z, m) * evaluator(z); };
        // pieces of length <= 1/2 below kOscCap so oscillating profiles are resolved
        constexpr double kOscCap = 1024;
        auto panel = [&](double lo, double hi) {
            int pieces = hi <= kOscCap ? std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.5))) : 1;
            long double v = 0;
            for (int i = 0; i < pieces; ++i)
                v += gl16(f, lo + (hi - lo) * i / pieces, lo + (hi - lo) * (i + 1) / pieces);
            return v;
        };
        auto tail_ratio = [&](double z) { return evaluator(z) * std::pow(z, 1 + s2); };
        long double acc = 0;
        if (a == 0) {
            if (e <= 0) throw DomainError("kernel moment diverges at zero");
            double top = std::isinf(b) ? 1.0 : b;
            double lo = top;
            for (int k = 0; k < 400 && lo > 1e-300; ++k) {
                double nlo = 0.5 * lo;
                acc += panel(nlo, lo);
                lo = nlo;
                if (std::pow(lo / top, e) < 1e-17) break;
            }
            acc += tail_ratio(lo) * std::pow(lo, e) / e;
            if (std::isinf(b)) acc += moment(m, 1.0, b);
            return static_cast<double>(acc);
        }
        if (std::isinf(b)) {
            if (e >= 0) throw DomainError("kernel moment diverges at infinity");
            // explicit panels up to H, then the mean profile of the last panel times the homogeneous tail
            const double H = std::max(64 * a, kOscCap);
            double hi = a;
            long double last = 0;
            double last_lo = a;
            while (hi < H) {
                double nhi = std::min(2 * hi, H);
                last = panel(hi, nhi);
                acc += last;
                last_lo = hi;
                hi = nhi;
            }
            const double ref = (std::pow(hi, e) - std::pow(last_lo, e)) / e;
            const double mean_profile = ref != 0 ? static_cast<double>(last) / ref : tail_ratio(hi);
            acc += mean_profile * std::pow(hi, e) / (-e);
            return static_cast<double>(acc);
        }
        for (double lo = a; lo < b;) {
            double hi = std::min(b, 2 * lo);
            acc += panel(lo, hi);
            lo = hi;
        }
        return static_cast<double>(acc);
    }
};

inline KernelSpec fractional_kernel(const FractionalOrder& order) {
    double C = normalization_constant(order.s);
    double ex = -1 - 2 * order.s;
    return KernelSpec{order, C, C, KernelKind::fractional_exact,
                      [C, ex](double z) { return C * std::pow(std::abs(z), ex); }, "fractional"};
}

/// Built-in custom kernels, addressable by name from configs.
inline const std::map<std::string, std::function<KernelSpec(const FractionalOrder&)>>& kernel_registry() {
    static const std::map<std::string, std::function<KernelSpec(const FractionalOrder&)>> reg = {
        {"fractional", [](const FractionalOrder& o) { return fractional_kernel(o); }},
        {"cos_modulated",
         [](const FractionalOrder& o) {
             double C = normalization_constant(o.s), ex = -1 - 2 * o.s;
             return KernelSpec{o, 0.5 * C, 1.5 * C, KernelKind::custom,
                               [C, ex](double z) { return C * (1 + 0.5 * std::cos(z)) * std::pow(std::abs(z), ex); },
                               "cos_modulated"};
         }},
        {"gaussian_bump",
         [](const FractionalOrder& o) {
             double C = normalization_constant(o.s), ex = -1 - 2 * o.s;
             return KernelSpec{o, C, 1.5 * C, KernelKind::custom,
                               [C, ex](double z) { return C * (1 + 0.5 * std::exp(-z * z)) * std::pow(std::abs(z), ex); },
                               "gaussian_bump"};
         }},
        {"wrong_homogeneity",
         [](const FractionalOrder& o) {
             double C = normalization_constant(o.s), ex = -1 - 2 * o.s - 0.1;
             return KernelSpec{o, C, C, KernelKind::custom,
                               [C, ex](double z) { return C * std::pow(std::abs(z), ex); }, "wrong_homogeneity"};
         }},
    };
    return reg;
}

inline KernelSpec make_kernel(const std::string& name, const FractionalOrder& order) {
    auto& reg = kernel_registry();
    auto it = reg.find(name);
    if (it == reg.end()) throw DomainError("unknown kernel '" + name + "'");
    return it->second(order);
}

struct KernelValidation {
    bool symmetric = true;
    bool bounds_ok = true;
    bool finite = true;
    double worst_ratio = 0;  ///< max over samples of max(k|z|^{1+2s}/kappa2, kappa1/(k|z|^{1+2s}))
    int nonfinite_samples = 0;
};

inline KernelValidation validate_kernel(const KernelSpec& k, int sample_count) {
    if (sample_count < 2) throw DomainError("validate_kernel needs at least two samples");
    KernelValidation rep;
    const double lo = std::log(1e-8), hi = std::log(1e4);
    for (int i = 0; i < sample_count; ++i) {
        double z = std::exp(lo + (hi - lo) * i / (sample_count - 1));
        double kp = k.evaluator(z), km = k.evaluator(-z);
        if (!std::isfinite(kp) || !std::isfinite(km)) {
            rep.finite = false;
            rep.symmetric = rep.bounds_ok = false;
            ++rep.nonfinite_samples;
            continue;
        }
        if (std::abs(kp - km) > 1e-12 * std::abs(kp)) rep.symmetric = false;
        double scaled = kp * std::pow(z, 1 + 2 * k.s());
        double r = std::max(scaled / k.kappa2, k.kappa1 / scaled);
        rep.worst_ratio = std::max(rep.worst_ratio, r);
    }
    if (rep.worst_ratio > 1 + 1e-12) rep.bounds_ok = false;
    return rep;
}

}  // namespace mlnl
