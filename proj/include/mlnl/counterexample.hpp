#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "mlnl/errors.hpp"
#include "mlnl/fit.hpp"
#include "mlnl/kernels.hpp"
#include "mlnl/powerlog.hpp"
#include "mlnl/pv_quadrature.hpp"

namespace mlnl {

struct ResidualForcing {
    double coeff = 0;
    double exponent = 0;
    int log_power = 0;
};

/// Atoms u_{sigma n + 1, j} for n = 0..N, with sigma = 2(1-s). Level n carries log
/// powers 0..J_n, where J_n grows by one after every resonant atom.
struct LevelTable {
    double sigma = 0;
    std::vector<std::vector<long double>> b;
    std::vector<std::vector<PowerLogAtom>> atoms;
    std::vector<std::vector<LogPolyExpansion>> expansions;
    std::vector<ResidualForcing> leftover;  ///< nonzero forcing at x^{sigma(N+1)-1}
};

struct IrrationalConstruction {
    FractionalOrder s;
    int k_target = 0;
    int M = 0;
    std::vector<double> b;
    std::vector<PowerLogAtom> atoms;
    std::vector<LogPolyExpansion> expansions;
    ResidualForcing residual_forcing;
    LevelTable levels;
};

struct RationalConstruction {
    FractionalOrder s;
    int p = 0, q = 0;
    int k_target = 0;
    int M = 0;
    std::vector<std::vector<std::vector<double>>> b;  ///< b[m][l-1][j], j = 0..m
    std::vector<std::vector<std::vector<PowerLogAtom>>> atoms;
    std::vector<ResidualForcing> residual_forcing;  ///< log powers 1..M+1
    LevelTable levels;

    /// b_{m,l,j} with the 1-based l of the construction.
    double coeff(int m, int l, int j) const { return b.at(m).at(l - 1).at(j); }
    const LogPolyExpansion& expansion(int m, int l, int j) const {
        return levels.expansions.at(m * q - 1 + l).at(j);
    }
};

namespace detail {

/// Fills levels 0..N by matching coefficients of x^{sigma n - 1} log^k x level by level:
/// alpha(alpha-1) b_{n,k} = F_k - (2 alpha - 1)(k+1) b_{n,k+1} - (k+2)(k+1) b_{n,k+2},
/// F_k = sum_j b_{n-1,j} a^{(k)}_{alpha_{n-1}, j}.
inline LevelTable solve_levels(const FractionalOrder& order, int N,
                               const std::function<PowerLogAtom(int n, int j)>& atom_at) {
    LevelTable t;
    t.sigma = 2 * (1 - order.s);
    auto expand = [&](int n, int j) {
        try {
            return fractional_expansion(order, atom_at(n, j));
        } catch (const NearResonance& e) {
            throw NearResonance("atom n = " + std::to_string(n) + " is resonant to within the guard (" +
                                    e.what() + ")",
                                n);
        }
    };
    auto forcing = [&](int n) {
        std::size_t len = 0;
        for (const auto& ex : t.expansions[n]) len = std::max(len, ex.a.size());
        std::vector<long double> F(len, 0.0L);
        for (std::size_t j = 0; j < t.b[n].size(); ++j)
            for (std::size_t k = 0; k < t.expansions[n][j].a.size(); ++k)
                F[k] += t.b[n][j] * static_cast<long double>(t.expansions[n][j].a[k]);
        return F;
    };
    t.b.push_back({1.0L});
    t.atoms.push_back({atom_at(0, 0)});
    t.expansions.push_back({expand(0, 0)});
    for (int n = 1; n <= N; ++n) {
        std::vector<long double> F = forcing(n - 1);
        int J = static_cast<int>(t.b[n - 1].size()) - 1 + (t.expansions[n - 1][0].resonant ? 1 : 0);
        F.resize(J + 1, 0.0L);
        PowerLogAtom a0 = atom_at(n, 0);
        long double al = a0.alpha;
        std::vector<long double> bn(J + 3, 0.0L);
        for (int k = J; k >= 0; --k)
            bn[k] = (F[k] - (2 * al - 1) * (k + 1) * bn[k + 1] - static_cast<long double>(k + 2) * (k + 1) * bn[k + 2]) /
                    (al * (al - 1));
        bn.resize(J + 1);
        t.b.push_back(bn);
        std::vector<PowerLogAtom> at;
        std::vector<LogPolyExpansion> ex;
        for (int j = 0; j <= J; ++j) {
            at.push_back(atom_at(n, j));
            ex.push_back(expand(n, j));
        }
        t.atoms.push_back(at);
        t.expansions.push_back(ex);
    }
    std::vector<long double> F = forcing(N);
    double e = t.sigma * (N + 1) - 1;
    for (std::size_t k = 0; k < F.size(); ++k)
        if (F[k] != 0) t.leftover.push_back({static_cast<double>(F[k]), e, static_cast<int>(k)});
    return t;
}

}  // namespace detail

/// Largest relative defect of the level equations when recomputed from the stored
/// expansions; zero up to rounding for a consistent table.
inline double recursion_defect(const LevelTable& t) {
    double worst = 0;
    for (std::size_t n = 1; n < t.b.size(); ++n) {
        const auto& prev = t.b[n - 1];
        std::size_t J = t.b[n].size() - 1;
        long double al = t.atoms[n][0].alpha;
        for (std::size_t k = 0; k <= J + 1; ++k) {
            long double F = 0, scale = 0;
            for (std::size_t j = 0; j < prev.size(); ++j) {
                const auto& a = t.expansions[n - 1][j].a;
                if (k < a.size()) {
                    F += prev[j] * a[k];
                    scale += std::abs(prev[j] * a[k]);
                }
            }
            auto bk = [&](std::size_t i) { return i <= J ? t.b[n][i] : 0.0L; };
            long double t0 = al * (al - 1) * bk(k), t1 = (2 * al - 1) * (k + 1) * bk(k + 1),
                        t2 = static_cast<long double>(k + 2) * (k + 1) * bk(k + 2);
            long double lhs = t0 + t1 + t2;
            scale += std::abs(t0) + std::abs(t1) + std::abs(t2);
            if (scale > 0) worst = std::max(worst, static_cast<double>(std::abs(lhs - F) / scale));
        }
    }
    return worst;
}

/// M_1(k) = ceil((k+1)/(2(1-s))).
inline int irrational_depth(double s, int k) { return static_cast<int>(std::ceil((k + 1) / (2 * (1 - s)))); }

/// M_2(k) = ceil((k+1)/p) for 2(1-s) = p/q in lowest terms.
inline int rational_depth(int p, int k) { return (k + 1 + p - 1) / p; }

inline IrrationalConstruction build_irrational(const FractionalOrder& s, int k) {
    if (k < 0) throw DomainError("build_irrational: k must be non-negative");
    if (s.rational_form) throw DomainError("build_irrational: s carries a rational form; use build_rational");
    const double sigma = 2 * (1 - s.s);
    IrrationalConstruction c;
    c.s = s;
    c.k_target = k;
    c.M = irrational_depth(s.s, k);
    c.levels = detail::solve_levels(s, c.M, [sigma](int n, int j) { return PowerLogAtom::make(sigma * n + 1, j); });
    for (int n = 0; n <= c.M; ++n) {
        c.b.push_back(static_cast<double>(c.levels.b[n][0]));
        c.atoms.push_back(c.levels.atoms[n][0]);
        c.expansions.push_back(c.levels.expansions[n][0]);
    }
    const auto& last = c.expansions.back();
    c.residual_forcing = {last.a[0] * c.b.back(), sigma * (c.M + 1) - 1, 0};
    return c;
}

inline RationalConstruction build_rational(const FractionalOrder& s, int k) {
    if (k < 0) throw DomainError("build_rational: k must be non-negative");
    if (!s.rational_form) throw DomainError("build_rational: s has no rational form");
    const Rational r = *s.rational_form;
    if (std::abs(r.to_double() - s.s) > 1e-15 || !(r.num > 0 && r.num < r.den))
        throw DomainError("build_rational: inconsistent rational form");
    const Rational sigma = Rational(2) * (Rational(1) - r);
    RationalConstruction c;
    c.s = s;
    c.p = static_cast<int>(sigma.num);
    c.q = static_cast<int>(sigma.den);
    c.k_target = k;
    c.M = rational_depth(c.p, k);
    const int N = (c.M + 1) * c.q - 1;
    c.levels = detail::solve_levels(s, N, [sigma](int n, int j) {
        return PowerLogAtom::make(sigma * Rational(n) + Rational(1), j);
    });
    c.b.assign(c.M + 1, std::vector<std::vector<double>>(c.q));
    c.atoms.assign(c.M + 1, std::vector<std::vector<PowerLogAtom>>(c.q));
    for (int m = 0; m <= c.M; ++m)
        for (int l = 1; l <= c.q; ++l) {
            int n = m * c.q - 1 + l;
            if (n < 0) continue;
            for (auto v : c.levels.b[n]) c.b[m][l - 1].push_back(static_cast<double>(v));
            c.atoms[m][l - 1] = c.levels.atoms[n];
        }
    for (const auto& f : c.levels.leftover)
        if (f.log_power >= 1) c.residual_forcing.push_back(f);
    return c;
}

struct LeadingData {
    double linear_coeff = 1;
    double next_exponent = 0;
    bool next_has_log = false;
    double next_coeff = 0;
};

struct CounterexampleResult {
    std::variant<IrrationalConstruction, RationalConstruction> construction;
    FractionalOrder s;
    int k_target = 0;
    GlobalFunction u;
    std::function<double(double)> f;
    LeadingData leading;
    std::string regularity_label;

    const LevelTable& levels() const {
        return std::visit([](const auto& c) -> const LevelTable& { return c.levels; }, construction);
    }
};

inline CounterexampleResult assemble(const std::variant<IrrationalConstruction, RationalConstruction>& construction) {
    CounterexampleResult res;
    res.construction = construction;
    const LevelTable& t = res.levels();
    std::visit(
        [&](const auto& c) {
            res.s = c.s;
            res.k_target = c.k_target;
        },
        construction);

    struct Term {
        double b;
        PowerLogAtom atom;
        SmoothPart smooth;
    };
    auto terms = std::make_shared<std::vector<Term>>();
    double right_const = 0;
    for (std::size_t n = 0; n < t.b.size(); ++n)
        for (std::size_t j = 0; j < t.b[n].size(); ++j) {
            double b = static_cast<double>(t.b[n][j]);
            terms->push_back({b, t.atoms[n][j], t.expansions[n][j].smooth});
            if (t.atoms[n][j].j == 0) right_const += b;
        }
    auto leftover = std::make_shared<std::vector<ResidualForcing>>(t.leftover);

    res.u.eval = [terms, right_const](double x) {
        if (x <= 0) return 0.0;
        if (x >= 1) return right_const;
        long double acc = 0;
        for (const auto& tm : *terms) acc += tm.b * atom_eval(tm.atom, x);
        return static_cast<double>(acc);
    };
    res.u.deriv = [terms](double x, int order) {
        long double acc = 0;
        for (const auto& tm : *terms) acc += tm.b * atom_derivative(tm.atom, x, order);
        return static_cast<double>(acc);
    };
    res.u.kinks = {0.0, 1.0};
    res.u.support_hint = Interval{0.0, 1.0};
    res.u.smoothness_interior = 4;
    res.f = [terms, leftover](double x) {
        if (!(x > 0 && x < 0.5)) throw DomainError("counterexample f is defined on (0,1/2)");
        long double acc = 0;
        double L = std::log(x);
        for (const auto& r : *leftover) acc += r.coeff * std::pow(x, r.exponent) * std::pow(L, r.log_power);
        for (const auto& tm : *terms) acc += tm.b * tm.smooth.eval(x);
        return static_cast<double>(acc);
    };

    const double s = res.s.s, sigma = 2 * (1 - s);
    const bool half = res.s.rational_form && *res.s.rational_form == Rational(1, 2);
    const auto& e10 = t.expansions[0][0];
    if (half) {
        res.leading = {1, 2, true, e10.a[1] / 2};
        res.regularity_label = "C^{1,1-eps}-family";
    } else {
        res.leading = {1, 3 - 2 * s, false, e10.a[0] / (sigma * (3 - 2 * s))};
        res.regularity_label = s < 0.5 ? "C^{2,1-2s}-sharp" : "C^{1,2-2s}-sharp";
    }
    return res;
}

inline CounterexampleResult build_counterexample(const FractionalOrder& s, int k) {
    if (s.rational_form) return assemble(build_rational(s, k));
    return assemble(build_irrational(s, k));
}

struct ResidualPoint {
    double x = 0;
    double residual = 0;
    double lk = 0;
    double f = 0;
    double minus_u2 = 0;
    bool ok = true;
    std::string message;
};

struct ResidualReport {
    double max_abs_residual = 0;
    std::vector<ResidualPoint> per_point;
    int failed_points = 0;
};

/// residual(x) = -u''(x) + (-Delta)^s u(x) - f(x), with the nonlocal term from lk_apply.
inline ResidualReport residual_check(const CounterexampleResult& r, const std::vector<double>& points,
                                     const QuadratureParams& params = {}) {
    KernelSpec K = fractional_kernel(r.s);
    ResidualReport rep;
    for (double x : points) {
        if (!(x >= 1e-5 && x <= 0.45)) throw DomainError("residual_check: points must lie in [1e-5, 0.45]");
        ResidualPoint pt;
        pt.x = x;
        try {
            pt.lk = lk_apply(K, r.u, x, params).value;
            pt.minus_u2 = -r.u.deriv(x, 2);
            pt.f = r.f(x);
            pt.residual = pt.minus_u2 + pt.lk - pt.f;
            rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(pt.residual));
        } catch (const QuadratureError& e) {
            pt.ok = false;
            pt.message = e.what();
            ++rep.failed_points;
        }
        rep.per_point.push_back(pt);
    }
    return rep;
}

inline std::vector<double> default_residual_points() { return geometric_points(1e-3, 0.45, 30); }

struct SharpnessFit {
    double slope = 0;
    double stderr_slope = 0;
};

/// Slope of log|u^{(order)}| against log x over 16 geometric samples of the window.
inline SharpnessFit sharpness_exponent(const CounterexampleResult& r, double d_lo, double d_hi, int order) {
    if (!(d_lo > 0 && d_hi > d_lo && d_hi <= 0.05)) throw DomainError("sharpness window must lie in (0, 0.05]");
    if (order != 2 && order != 3) throw DomainError("sharpness order must be 2 or 3");
    auto xs = geometric_points(d_lo, d_hi, 16);
    std::vector<double> m;
    for (double x : xs) m.push_back(std::abs(r.u.deriv(x, order)));
    for (double v : m)
        if (!(v > 0)) throw DegenerateFit("derivative vanishes in the sharpness window");
    auto f = fit_loglog(xs, m);
    return {f.slope, f.stderr_slope};
}

struct LogModeReport {
    double x_lo = 0, x_hi = 0;
    double ratio_lo = 0, ratio_hi = 0;  ///< u''(x)/log x
    double relative_gap = 0;
};

/// Pure-log blow-up probe for s = 1/2: u''(x)/log x at the two window endpoints.
inline LogModeReport log_mode_ratio(const CounterexampleResult& r, double x_lo, double x_hi) {
    LogModeReport rep{x_lo, x_hi, r.u.deriv(x_lo, 2) / std::log(x_lo), r.u.deriv(x_hi, 2) / std::log(x_hi), 0};
    rep.relative_gap = std::abs(rep.ratio_lo - rep.ratio_hi) / std::max(std::abs(rep.ratio_lo), std::abs(rep.ratio_hi));
    return rep;
}

/// (u(x) - x)/x^{3-2s} or (u(x) - x)/(x^2 log x), the quantity converging to next_coeff.
inline double leading_ratio(const CounterexampleResult& r, double x) {
    double num = r.u.eval(x) - x;
    if (r.leading.next_has_log) return num / (x * x * std::log(x));
    return num / std::pow(x, r.leading.next_exponent);
}

inline nlohmann::json to_json(const CounterexampleResult& r) {
    nlohmann::json j;
    j["s"] = r.s.str();
    j["k_target"] = r.k_target;
    j["regularity_label"] = r.regularity_label;
    j["leading"] = {{"linear_coeff", r.leading.linear_coeff},
                    {"next_exponent", r.leading.next_exponent},
                    {"next_has_log", r.leading.next_has_log},
                    {"next_coeff", r.leading.next_coeff}};
    const LevelTable& t = r.levels();
    nlohmann::json atoms = nlohmann::json::array();
    for (std::size_t n = 0; n < t.b.size(); ++n)
        for (std::size_t jj = 0; jj < t.b[n].size(); ++jj)
            atoms.push_back({{"n", n},
                             {"alpha", t.atoms[n][jj].alpha},
                             {"j", jj},
                             {"b", static_cast<double>(t.b[n][jj])},
                             {"resonant", t.expansions[n][jj].resonant}});
    j["atoms"] = atoms;
    nlohmann::json lo = nlohmann::json::array();
    for (const auto& f : t.leftover) lo.push_back({{"coeff", f.coeff}, {"exponent", f.exponent}, {"log_power", f.log_power}});
    j["residual_forcing"] = lo;
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            j["M"] = c.M;
            if constexpr (std::is_same_v<T, RationalConstruction>) {
                j["branch"] = "rational";
                j["p"] = c.p;
                j["q"] = c.q;
                j["b"] = c.b;
            } else {
                j["branch"] = "irrational";
                j["b"] = c.b;
            }
        },
        r.construction);
    return j;
}

}  // namespace mlnl
