#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mlnl/errors.hpp"
#include "mlnl/fit.hpp"
#include "mlnl/kernels.hpp"
#include "mlnl/pv_quadrature.hpp"

namespace mlnl {

struct SampledFunction {
    enum class Source { analytic, grid };
    std::vector<double> xs;
    std::vector<double> values;
    std::vector<double> d;
    std::optional<std::vector<double>> d1, d2;
    Source source = Source::analytic;

    static SampledFunction from_analytic(const std::vector<double>& xs, const std::function<double(double)>& u,
                                         const std::function<double(double)>& du = {},
                                         const std::function<double(double)>& d2u = {}) {
        SampledFunction sf;
        sf.xs = xs;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!(xs[i] > 0 && xs[i] < 1)) throw DomainError("samples must lie in (0,1)");
            if (i && !(xs[i] > xs[i - 1])) throw DomainError("samples must be strictly increasing");
            sf.values.push_back(u(xs[i]));
            sf.d.push_back(std::min(xs[i], 1 - xs[i]));
        }
        if (du) {
            sf.d1.emplace();
            for (double x : xs) sf.d1->push_back(du(x));
        }
        if (d2u) {
            sf.d2.emplace();
            for (double x : xs) sf.d2->push_back(d2u(x));
        }
        return sf;
    }
};

/// Samples clustered toward both endpoints: geometric in d on [d_min, 1/2], mirrored.
inline std::vector<double> boundary_graded_samples(double d_min, int per_side) {
    auto g = geometric_points(d_min, 0.5, per_side);
    std::vector<double> xs;
    for (double v : g) xs.push_back(v);
    for (auto it = g.rbegin(); it != g.rend(); ++it)
        if (*it < 0.5) xs.push_back(1 - *it);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

struct NormParams {
    double beta = 0.5;
    double gamma = 0.5;
    std::size_t pair_budget = 200000;
};

enum class Component { value, first, second };

namespace detail {
inline const std::vector<double>& component(const SampledFunction& f, Component c) {
    if (c == Component::value) return f.values;
    const auto& o = c == Component::first ? f.d1 : f.d2;
    if (!o) throw ContractError("derivative samples required but missing");
    return *o;
}
}  // namespace detail

inline double weighted_sup(const std::vector<double>& v, const std::vector<double>& d, double w) {
    if (v.empty()) throw DomainError("weighted_sup needs samples");
    double m = 0;
    for (std::size_t i = 0; i < v.size(); ++i) m = std::max(m, std::pow(d[i], w) * std::abs(v[i]));
    return m;
}

inline double weighted_sup(const SampledFunction& f, double w, Component c = Component::value) {
    return weighted_sup(detail::component(f, c), f.d, w);
}

/// Pairs used by the seminorm estimators: all pairs within budget, otherwise an equal
/// budget per dyadic class of |x-y|; inside a class half the budget goes to the pairs
/// with smallest min(d_x,d_y), the rest is an even stride through the class.
inline std::vector<std::pair<int, int>> select_pairs(const std::vector<double>& xs, const std::vector<double>& d,
                                                     std::size_t budget) {
    const int n = static_cast<int>(xs.size());
    std::vector<std::pair<int, int>> out;
    const std::size_t total = static_cast<std::size_t>(n) * (n - 1) / 2;
    if (total <= budget) {
        out.reserve(total);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) out.emplace_back(i, j);
        return out;
    }
    constexpr int kClasses = 48;
    auto cls = [&](int i, int j) {
        double g = xs[j] - xs[i];
        int c = static_cast<int>(std::floor(-std::log2(g)));
        return std::clamp(c, 0, kClasses - 1);
    };
    std::vector<std::vector<std::pair<int, int>>> by_class(kClasses);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) by_class[cls(i, j)].emplace_back(i, j);
    int nonempty = 0;
    for (const auto& v : by_class) nonempty += !v.empty();
    const std::size_t per = std::max<std::size_t>(budget / std::max(nonempty, 1), 2);
    for (auto& v : by_class) {
        if (v.size() <= per) {
            out.insert(out.end(), v.begin(), v.end());
            continue;
        }
        auto key = [&](const std::pair<int, int>& p) { return std::min(d[p.first], d[p.second]); };
        std::vector<std::pair<int, int>> sorted = v;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [&](const auto& a, const auto& b) { return key(a) < key(b); });
        std::size_t half = per / 2;
        std::vector<std::pair<int, int>> pick(sorted.begin(), sorted.begin() + half);
        std::size_t rest = per - half;
        for (std::size_t k = 0; k < rest; ++k) pick.push_back(v[k * v.size() / rest]);
        std::sort(pick.begin(), pick.end());
        pick.erase(std::unique(pick.begin(), pick.end()), pick.end());
        out.insert(out.end(), pick.begin(), pick.end());
    }
    return out;
}

/// max over selected pairs of min(d_x,d_y)^w |f(x)-f(y)| / |x-y|^beta.
inline double weighted_holder_seminorm(const std::vector<double>& xs, const std::vector<double>& f,
                                       const std::vector<double>& d, double beta, double w,
                                       std::size_t pair_budget) {
    if (xs.size() < 2) throw DomainError("seminorm needs at least two samples");
    double m = 0;
    for (auto [i, j] : select_pairs(xs, d, pair_budget)) {
        double v = std::pow(std::min(d[i], d[j]), w) * std::abs(f[i] - f[j]) / std::pow(xs[j] - xs[i], beta);
        m = std::max(m, v);
    }
    return m;
}

inline double weighted_holder_seminorm(const SampledFunction& s, double beta, double w, std::size_t pair_budget,
                                       Component c = Component::value) {
    return weighted_holder_seminorm(s.xs, detail::component(s, c), s.d, beta, w, pair_budget);
}

struct ExponentFit {
    double slope = 0;
    double stderr_slope = 0;
    double r_squared = 0;
};

/// OLS on (log d, log m); at least 8 pairs spanning 1.5 decades.
inline ExponentFit fit_blowup_exponent(const std::vector<double>& d, const std::vector<double>& m) {
    if (d.size() < 8) throw DegenerateFit("exponent fit needs at least 8 pairs");
    auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    if (!(*lo > 0) || std::log10(*hi / *lo) < 1.5) throw DegenerateFit("exponent fit window spans under 1.5 decades");
    auto f = fit_loglog(d, m);
    return {f.slope, f.stderr_slope, f.r_squared};
}

struct NormReport {
    double c0_1 = 0;
    double grad_sup = 0;
    double hess_w1 = 0;  ///< sup d |u''|
    double c2_1 = 0;
    double c2beta_1_semi = 0;
    double c2beta_1 = 0;
    double cbeta_gamma_sup = 0;   ///< sup d^gamma |u|
    double cbeta_gamma_semi = 0;  ///< (beta+gamma)-weighted seminorm of u
    double hess_wgamma = 0;       ///< sup d^gamma |u''|
    double c2gamma_star = 0;
    double c2beta_gamma_star_semi = 0;
    double c2beta_gamma_star = 0;
    std::optional<ExponentFit> hessian_blowup;  ///< |u''| against d over the fit window
    double fit_lo = 0, fit_hi = 0;
};

inline NormReport full_report(const SampledFunction& s, const NormParams& p, double fit_lo = 0, double fit_hi = 0.05) {
    if (p.pair_budget < 10 * s.xs.size()) throw DomainError("pair_budget must be at least 10 times the sample count");
    if (!s.d1 || !s.d2) throw ContractError("full_report needs first and second derivative samples");
    NormReport r;
    r.c0_1 = weighted_sup(s, -1);
    r.grad_sup = weighted_sup(s, 0, Component::first);
    r.hess_w1 = weighted_sup(s, 1, Component::second);
    r.c2_1 = r.c0_1 + r.grad_sup + r.hess_w1;
    r.c2beta_1_semi = weighted_holder_seminorm(s, p.beta, 1 + p.beta, p.pair_budget, Component::second);
    r.c2beta_1 = r.c2_1 + r.c2beta_1_semi;
    r.cbeta_gamma_sup = weighted_sup(s, p.gamma);
    r.cbeta_gamma_semi = weighted_holder_seminorm(s, p.beta, p.beta + p.gamma, p.pair_budget);
    r.hess_wgamma = weighted_sup(s, p.gamma, Component::second);
    r.c2gamma_star = r.c0_1 + r.grad_sup + r.hess_wgamma;
    r.c2beta_gamma_star_semi =
        weighted_holder_seminorm(s, p.beta, p.beta + p.gamma, p.pair_budget, Component::second);
    r.c2beta_gamma_star = r.c2gamma_star + r.c2beta_gamma_star_semi;
    std::vector<double> dd, mm;
    for (std::size_t i = 0; i < s.xs.size(); ++i)
        if (s.xs[i] <= 0.5 && s.d[i] >= fit_lo && s.d[i] <= fit_hi && (*s.d2)[i] != 0) {
            dd.push_back(s.d[i]);
            mm.push_back(std::abs((*s.d2)[i]));
        }
    r.fit_lo = fit_lo;
    r.fit_hi = fit_hi;
    try {
        r.hessian_blowup = fit_blowup_exponent(dd, mm);
    } catch (const DegenerateFit&) {
    }
    return r;
}

/// C^{beta}_{gamma} norm of a sampled right-hand side.
inline double cbeta_gamma_norm(const SampledFunction& f, double beta, double gamma, std::size_t pair_budget) {
    return weighted_sup(f, gamma) + weighted_holder_seminorm(f, beta, beta + gamma, pair_budget);
}

/// ||u||_{C^2_1} / (||u||_{C^0_1}^{b/(2(1+b))} ||u||_{C^{2,b}_1}^{(2+b)/(2(1+b))}).
inline double interpolation_ratio(const SampledFunction& s, double beta, std::size_t pair_budget = 200000) {
    NormParams p{beta, 0.5, std::max(pair_budget, 10 * s.xs.size())};
    NormReport r = full_report(s, p);
    double den = std::pow(r.c0_1, beta / (2 * (1 + beta))) * std::pow(r.c2beta_1, (2 + beta) / (2 * (1 + beta)));
    if (!(den > 0)) throw DegenerateFit("interpolation_ratio: zero denominator");
    return r.c2_1 / den;
}

struct EmbeddingReport {
    double c1_1mgamma_norm = 0;
    double c2gamma_star = 0;
    double ratio = 0;
};

/// ||u||_{C^{1,1-gamma}} (sup u + sup u' + unweighted (1-gamma)-seminorm of u') against ||u||_{C^2_{gamma,*}}.
inline EmbeddingReport embedding_check(const SampledFunction& s, double gamma, std::size_t pair_budget = 200000) {
    if (!s.d1 || !s.d2) throw ContractError("embedding_check needs derivative samples");
    pair_budget = std::max(pair_budget, 10 * s.xs.size());
    EmbeddingReport e;
    e.c1_1mgamma_norm = weighted_sup(s, 0) + weighted_sup(s, 0, Component::first) +
                        weighted_holder_seminorm(s, 1 - gamma, 0, pair_budget, Component::first);
    e.c2gamma_star = weighted_sup(s, -1) + weighted_sup(s, 0, Component::first) +
                     weighted_sup(s, gamma, Component::second);
    e.ratio = e.c2gamma_star > 0 ? e.c1_1mgamma_norm / e.c2gamma_star : 0.0;
    return e;
}

struct LkMappingEntry {
    std::string label;
    double norm = 0;
    double reference = 0;
    double ratio = 0;
};

struct LkMappingReport {
    std::string regime;
    std::vector<double> xs;
    std::vector<double> lk_values;
    std::vector<LkMappingEntry> entries;
};

/// Empirical versions of the L_k mapping bounds for Lipschitz u vanishing outside (0,1).
inline LkMappingReport lk_mapping_check(const KernelSpec& kernel, const GlobalFunction& u,
                                        const std::vector<double>& xs, const QuadratureParams& params = {},
                                        std::size_t pair_budget = 200000) {
    LkMappingReport rep;
    rep.xs = xs;
    for (double x : xs) rep.lk_values.push_back(lk_apply(kernel, u, x, params).value);
    std::vector<double> d, du, d2u, vals;
    for (double x : xs) {
        d.push_back(std::min(x, 1 - x));
        vals.push_back(u.eval(x));
        if (u.deriv) {
            du.push_back(u.deriv(x, 1));
            d2u.push_back(u.deriv(x, 2));
        } else {
            double h = 1e-4 * std::min(x, 1 - x);
            du.push_back((u.eval(x + h) - u.eval(x - h)) / (2 * h));
            d2u.push_back((u.eval(x + h) - 2 * u.eval(x) + u.eval(x - h)) / (h * h));
        }
    }
    pair_budget = std::max(pair_budget, 10 * xs.size());
    double grad = weighted_sup(du, d, 0);
    double c2_1 = weighted_sup(vals, d, -1) + grad + weighted_sup(d2u, d, 1);
    const double s = kernel.s();
    const bool half = kernel.order.rational_form ? *kernel.order.rational_form == Rational(1, 2) : s == 0.5;
    auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
    if (half) {
        rep.regime = "s=1/2";
        for (double eps : {0.1, 0.05}) {
            double beta = 0.5;
            double nrm = weighted_sup(rep.lk_values, d, eps) +
                         weighted_holder_seminorm(xs, rep.lk_values, d, beta, beta + eps, pair_budget);
            rep.entries.push_back({"C^{0.5}_{" + std::to_string(eps).substr(0, 4) + "}", nrm, c2_1, ratio(nrm, c2_1)});
        }
    } else if (s < 0.5) {
        rep.regime = "s<1/2";
        double beta = 1 - 2 * s;
        double nrm = weighted_sup(rep.lk_values, d, 0) +
                     weighted_holder_seminorm(xs, rep.lk_values, d, beta, 0, pair_budget);
        rep.entries.push_back({"C^{1-2s}", nrm, grad, ratio(nrm, grad)});
    } else {
        rep.regime = "s>1/2";
        double beta = 2 - 2 * s, g = 2 * s - 1;
        double nrm = weighted_sup(rep.lk_values, d, g) +
                     weighted_holder_seminorm(xs, rep.lk_values, d, beta, beta + g, pair_budget);
        rep.entries.push_back({"C^{2-2s}_{2s-1}", nrm, c2_1, ratio(nrm, c2_1)});
    }
    return rep;
}

inline nlohmann::json to_json(const NormReport& r) {
    nlohmann::json j{{"c0_1", r.c0_1},
                     {"grad_sup", r.grad_sup},
                     {"hess_w1", r.hess_w1},
                     {"c2_1", r.c2_1},
                     {"c2beta_1_semi", r.c2beta_1_semi},
                     {"c2beta_1", r.c2beta_1},
                     {"cbeta_gamma", {r.cbeta_gamma_sup, r.cbeta_gamma_semi}},
                     {"hess_wgamma", r.hess_wgamma},
                     {"c2gamma_star", r.c2gamma_star},
                     {"c2beta_gamma_star_semi", r.c2beta_gamma_star_semi},
                     {"c2beta_gamma_star", r.c2beta_gamma_star},
                     {"fit_window", {r.fit_lo, r.fit_hi}}};
    if (r.hessian_blowup)
        j["hessian_blowup"] = {{"slope", r.hessian_blowup->slope},
                               {"stderr", r.hessian_blowup->stderr_slope},
                               {"r_squared", r.hessian_blowup->r_squared}};
    else
        j["hessian_blowup"] = nullptr;
    return j;
}

}  // namespace mlnl
