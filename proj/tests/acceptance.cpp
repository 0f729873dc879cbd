// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "mlnl/experiments.hpp"

using namespace mlnl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void note(Outcome& o, bool ok, const std::string& what) {
    if (!ok) o.pass = false;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += what + (ok ? "" : " [x]");
}

GlobalFunction parabola_function() {
    GlobalFunction u;
    u.eval = [](double x) { return x > 0 && x < 1 ? x * (1 - x) : 0.0; };
    u.deriv = [](double x, int n) { return n == 1 ? 1 - 2 * x : n == 2 ? -2.0 : 0.0; };
    u.kinks = {0.0, 1.0};
    u.support_hint = Interval{0.0, 1.0};
    u.smoothness_interior = 4;
    return u;
}

// Closed form of L u for u = x(1-x) on (0,1), zero outside.
double parabola_lk(double s, double x) {
    const double C = normalization_constant(s), y = 1 - x;
    const double P = s == 0.5 ? std::log(y / x) : (std::pow(y, 1 - 2 * s) - std::pow(x, 1 - 2 * s)) / (1 - 2 * s);
    return C * ((std::pow(x, 2 - 2 * s) + std::pow(y, 2 - 2 * s)) / (2 - 2 * s) + (2 * x - 1) * P +
                x * y * (std::pow(x, -2 * s) + std::pow(y, -2 * s)) / (2 * s));
}

Outcome ac1() {
    Outcome o;
    Clock clk;
    double worst = 0;
    std::string worst_case;
    for (const char* st : {"1/4", "1/2", "3/4", "0.3", "0.61"}) {
        auto order = FractionalOrder::parse(st);
        auto K = fractional_kernel(order);
        for (auto [num, den, j] : {std::tuple{1, 1, 0}, {17, 10, 1}, {5, 2, 2}}) {
            auto atom = order.rational_form ? PowerLogAtom::make(Rational(num, den), j)
                                            : PowerLogAtom::make(static_cast<double>(num) / den, j);
            auto ex = fractional_expansion(order, atom);
            auto g = atom_function(atom);
            for (double x : geometric_points(1e-4, 0.45, 20)) {
                double q = lk_apply(K, g, x, {1e-11, 1e-13}).value;
                double e = std::abs(expansion_eval(ex, x) - q) / (1 + std::abs(q));
                if (e > worst) {
                    worst = e;
                    worst_case = std::string("s=") + st + " alpha=" + shortest_repr(atom.alpha) + " j=" +
                                 std::to_string(j) + " x=" + shortest_repr(x);
                }
            }
        }
    }
    note(o, worst <= 1e-6, "max |expansion - quadrature|/(1+|v|) = " + fmt("%.2e", worst) + " at " + worst_case);
    note(o, clk.seconds() <= 120, "runtime " + fmt("%.1f", clk.seconds()) + " s");
    return o;
}

Outcome ac2() {
    Outcome o;
    for (auto [n, d] : {std::pair{1, 4}, std::pair{3, 4}}) {
        auto order = FractionalOrder::from_rational(n, d);
        const double s = order.s, a0 = normalization_constant(s) / (2 * s * (1 - 2 * s));
        auto ex = fractional_expansion(order, PowerLogAtom::make(Rational(1), 0));
        double rel = std::abs(ex.a[0] - a0) / std::abs(a0), fw = 0;
        for (double x = 0; x <= 0.45 + 1e-12; x += 0.005)
            fw = std::max(fw, std::abs(ex.smooth.eval(x) + a0 * std::pow(1 - x, 1 - 2 * s)));
        note(o, rel <= 1e-10, "s=" + order.str() + " a0 rel err " + fmt("%.1e", rel));
        note(o, fw <= 1e-8, "s=" + order.str() + " f err " + fmt("%.1e", fw));
    }
    auto ex = fractional_expansion(FractionalOrder::from_rational(1, 2), PowerLogAtom::make(Rational(1), 0));
    double e1 = std::abs(ex.a[1] - 1 / std::numbers::pi), fw = 0;
    for (double x = 0; x <= 0.45 + 1e-12; x += 0.005)
        fw = std::max(fw, std::abs(ex.smooth.eval(x) + std::log1p(-x) / std::numbers::pi));
    note(o, e1 <= 1e-10, "s=1/2 a1 err " + fmt("%.1e", e1));
    note(o, fw <= 1e-8, "s=1/2 f err " + fmt("%.1e", fw));
    return o;
}

Outcome ac3() {
    Outcome o;
    Clock clk;
    const std::tuple<const char*, FractionalOrder, int> cases[] = {
        {"3/8", FractionalOrder::from_rational(3, 8), 2},
        {"1/2", FractionalOrder::from_rational(1, 2), 3},
        {"0.731", FractionalOrder::from_double(0.731), 1},
        {"3/4", FractionalOrder::parse("0.75"), 2},
    };
    for (const auto& [label, order, k] : cases) {
        auto r = build_counterexample(order, k);
        auto rep = residual_check(r, geometric_points(1e-3, 0.45, 30));
        note(o, rep.failed_points == 0 && rep.max_abs_residual <= 1e-5,
             std::string("s=") + label + " k=" + std::to_string(k) + " max residual " + fmt("%.1e", rep.max_abs_residual));
    }
    note(o, clk.seconds() <= 180, "runtime " + fmt("%.1f", clk.seconds()) + " s");
    return o;
}

Outcome ac4() {
    Outcome o;
    auto t = build_counterexample(FractionalOrder::from_rational(3, 4), 2);
    double a = sharpness_exponent(t, 1e-5, 1e-2, 2).slope;
    note(o, std::abs(a + 0.5) <= 0.05, "s=3/4 slope |u''| " + fmt("%.4f", a));
    auto q = build_counterexample(FractionalOrder::from_rational(1, 4), 2);
    double b = sharpness_exponent(q, 1e-5, 1e-2, 3).slope;
    note(o, std::abs(b + 0.5) <= 0.05, "s=1/4 slope |u'''| " + fmt("%.4f", b));
    auto h = build_counterexample(FractionalOrder::from_rational(1, 2), 2);
    auto lm = log_mode_ratio(h, 1e-6, 1e-4);
    note(o, lm.relative_gap <= 0.1, "s=1/2 u''/log x gap " + fmt("%.2f%%", 100 * lm.relative_gap));
    return o;
}

Outcome ac5() {
    Outcome o;
    for (auto [n, d] : {std::pair{1, 4}, std::pair{3, 4}, std::pair{1, 2}}) {
        auto r = build_counterexample(FractionalOrder::from_rational(n, d), 2);
        const double target = r.leading.next_coeff;
        if (n == 1 && d == 2) note(o, std::abs(target - 0.5 / std::numbers::pi) <= 1e-10, "s=1/2 coefficient 1/(2 pi)");
        std::string line = "s=" + r.s.str() + " ratios";
        bool ok = true;
        for (double x : {1e-3, 1e-4, 1e-5}) {
            double rel = std::abs(leading_ratio(r, x) - target) / std::abs(target);
            ok = ok && rel <= 0.02;
            line += " " + fmt("%.2f%%", 100 * rel);
        }
        note(o, ok, line);
    }
    return o;
}

Outcome ac6() {
    Outcome o;
    Clock clk;
    for (double s : {0.25, 0.5, 0.75}) {
        Problem1D pb;
        pb.kernel = fractional_kernel(FractionalOrder::from_double(s));
        pb.f_fn = [s](double x) { return 2.0 + parabola_lk(s, x); };
        std::vector<double> errs;
        for (int N : {256, 512, 1024}) {
            auto sol = solve_direct(pb, Grid1D::uniform(N));
            double e = 0;
            auto xs = sol.nodes();
            for (std::size_t i = 0; i < xs.size(); ++i) e = std::max(e, std::abs(sol.values[i] - xs[i] * (1 - xs[i])));
            errs.push_back(e);
        }
        bool mono = errs[0] > errs[1] && errs[1] > errs[2];
        note(o, mono && errs[2] <= 5e-3,
             "s=" + shortest_repr(s) + " err " + fmt("%.1e", errs[0]) + "/" + fmt("%.1e", errs[1]) + "/" + fmt("%.1e", errs[2]));
    }
    Problem1D pb;
    pb.kernel = fractional_kernel(FractionalOrder::from_double(0.75));
    auto sol = solve_direct(pb, Grid1D::graded(1024, 2));
    auto fit = boundary_hessian_fit(sol, 10 * sol.grid.h_min(), 0.05);
    note(o, std::abs(fit.slope + 0.5) <= 0.1, "s=0.75 f=1 |u''| slope " + fmt("%.4f", fit.slope) + " (graded N=1024)");
    note(o, clk.seconds() <= 180, "runtime " + fmt("%.1f", clk.seconds()) + " s");
    return o;
}

Outcome ac7() {
    Outcome o;
    Problem1D pb;
    pb.kernel = fractional_kernel(FractionalOrder::from_double(0.6));
    auto cmp = comparison_check(pb, Grid1D::uniform(512), 100);
    note(o, cmp.all_nonnegative && cmp.min_over_trials >= -1e-10,
         "100 trials min u " + fmt("%.1e", cmp.min_over_trials));
    auto one = [](double) { return 1.0; };
    double a = linear_growth_check(solve_direct(pb, Grid1D::uniform(512)), one).c01_norm_over_fplus;
    double b = linear_growth_check(solve_direct(pb, Grid1D::uniform(1024)), one).c01_norm_over_fplus;
    note(o, std::abs(a - b) <= 0.1 * b, "growth " + fmt("%.4f", a) + " vs " + fmt("%.4f", b));
    return o;
}

Outcome ac8() {
    Outcome o;
    auto K = fractional_kernel(FractionalOrder::from_double(0.6));
    std::vector<double> xs;
    for (int i = 0; i < 15; ++i) xs.push_back(-0.9 + 1.8 * i / 14);
    std::vector<double> C;
    bool neg = true;
    for (double lambda : {20.0, 40.0, 80.0}) {
        auto rep = exp_barrier_check(K, lambda, 1, xs);
        neg = neg && rep.all_negative;
        C.push_back(rep.empirical_C);
    }
    bool stable = C[1] <= 1.05 * C[0] && C[2] <= 1.05 * C[1];
    note(o, neg, "L_k v < 0 at 15 samples");
    note(o, stable, "C = " + fmt("%.3g", C[0]) + ", " + fmt("%.3g", C[1]) + ", " + fmt("%.3g", C[2]) +
                        " (each within 5% above the previous)");
    for (auto order : {FractionalOrder::from_rational(1, 4), FractionalOrder::from_rational(3, 4)}) {
        auto d = find_barrier_delta(fractional_kernel(order), 0.5, 0.2, 1, 1, 0);
        note(o, d.found && d.delta > 0 && d.report.holds, "s=" + order.str() + " delta " + fmt("%.4g", d.delta));
    }
    return o;
}

Outcome ac9() {
    Outcome o;
    const double g = 0.5;
    auto res = solve_weighted_poisson_1d([g](double x) { return std::pow(x, -g); }, 1.0, g, 0.5);
    double e = 0;
    for (double x : boundary_graded_samples(1e-6, 200))
        e = std::max(e, std::abs(res.u(x) - (x - std::pow(x, 2 - g)) / ((1 - g) * (2 - g))));
    note(o, e <= 1e-8, "closed form err " + fmt("%.1e", e));
    auto f = make_coefficient("sin7", g);
    double a = solve_weighted_poisson_1d(f, 1.3, g, 0.5, 200).ratio;
    double b = solve_weighted_poisson_1d(f, 1.3, g, 0.5, 400).ratio;
    note(o, std::isfinite(a) && std::isfinite(b) && std::abs(a - b) <= 0.1 * b,
         "ratio " + fmt("%.5f", a) + " vs " + fmt("%.5f", b));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome ac10() {
    Outcome o;
    Clock clk;
    // quadrature invariants
    {
        auto K = fractional_kernel(FractionalOrder::from_double(0.4));
        auto u = parabola_function();
        GlobalFunction w;
        w.eval = [](double x) { return x > 0 && x < 1 ? std::sin(std::numbers::pi * x) : 0.0; };
        w.kinks = {0.0, 1.0};
        w.support_hint = Interval{0.0, 1.0};
        GlobalFunction comb;
        comb.eval = [&](double x) { return 2 * u.eval(x) - 3 * w.eval(x); };
        comb.kinks = {0.0, 1.0};
        comb.support_hint = Interval{0.0, 1.0};
        double lin = 0, tr = 0, sc = 0;
        for (double x : {0.05, 0.3, 0.7}) {
            double l = lk_apply(K, comb, x).value;
            double r = 2 * lk_apply(K, u, x).value - 3 * lk_apply(K, w, x).value;
            lin = std::max(lin, std::abs(l - r) / (1 + std::abs(r)));
            GlobalFunction sh;
            sh.eval = [&](double y) { return u.eval(y - 2.5); };
            sh.kinks = {2.5, 3.5};
            sh.support_hint = Interval{2.5, 3.5};
            double a = lk_apply(K, sh, x + 2.5).value, b = lk_apply(K, u, x).value;
            tr = std::max(tr, std::abs(a - b) / (1 + std::abs(b)));
            GlobalFunction dil;
            dil.eval = [&](double y) { return u.eval(3 * y); };
            dil.kinks = {0.0, 1.0 / 3};
            dil.support_hint = Interval{0.0, 1.0 / 3};
            double c = lk_apply(K, dil, x / 3).value;
            sc = std::max(sc, std::abs(c - std::pow(3.0, 0.8) * b) / (1 + std::abs(c)));
        }
        note(o, lin <= 1e-7 && tr <= 1e-7 && sc <= 1e-7,
             "pv linearity/translation/scaling " + fmt("%.0e", std::max({lin, tr, sc})));
    }
    // resonance dichotomy and positivity
    {
        bool ok = true;
        for (auto [n, d] : {std::pair{1, 4}, {1, 3}, {1, 2}, {3, 5}, {3, 4}})
            for (auto [an, ad] : {std::pair{1, 1}, {3, 2}, {5, 2}, {7, 4}, {3, 1}})
                for (int j : {0, 1}) {
                    auto order = FractionalOrder::from_rational(n, d);
                    Rational al(an, ad);
                    auto ex = fractional_expansion(order, PowerLogAtom::make(al, j));
                    Rational diff = al - Rational(2) * *order.rational_form;
                    bool res = diff.is_integer() && diff.num >= 0;
                    ok = ok && ex.resonant == res && (res ? ex.a[0] == 0 : ex.a[j + 1] == 0);
                    if (res && j == 0) ok = ok && ex.a[1] > 0;
                }
        note(o, ok, "resonance dichotomy and a^(1) > 0");
    }
    // M-matrix probes
    {
        bool ok = true;
        for (double s : {0.25, 0.5, 0.75}) {
            Problem1D pb;
            pb.kernel = fractional_kernel(FractionalOrder::from_double(s));
            auto op = assemble(pb, Grid1D::graded(128, 2));
            ok = ok && m_matrix_check(op.A).is_m_matrix();
            auto lu = op.A.partialPivLu();
            for (int i : {0, 63, 126}) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(op.A.rows());
                e[i] = 1;
                ok = ok && lu.solve(e).minCoeff() >= -1e-12;
            }
        }
        note(o, ok, "M-matrix structure and A^-1 >= 0 probes");
    }
    // pair sampling and command outputs are reproducible
    {
        auto xs = boundary_graded_samples(1e-8, 600);
        std::vector<double> d;
        for (double x : xs) d.push_back(std::min(x, 1 - x));
        bool pairs = select_pairs(xs, d, 20000) == select_pairs(xs, d, 20000);
        note(o, pairs, "pair sampling deterministic");

        Config cfg = default_config();
        cfg["solve"]["N"] = 256;
        cfg["solve"]["trials"] = 5;
        cfg["norms"]["per_side"] = 100;
        const fs::path root = fs::temp_directory_path() / ("mlnl_acceptance_" + std::to_string(::getpid()));
        bool same = true;
        using Runner = RunResult (*)(const Config&, ArtifactSink&);
        const std::pair<const char*, Runner> runners[] = {{"verify-lemma61", run_verify_expansion},
                                                          {"counterexample", run_counterexample},
                                                          {"solve", run_solve},
                                                          {"barriers", run_barriers},
                                                          {"norms", run_norms}};
        for (const auto& [name, run] : runners) {
            ArtifactSink a(root / "a" / name), b(root / "b" / name);
            auto ra = run(cfg, a), rb = run(cfg, b);
            same = same && ra.artifacts == rb.artifacts &&
                   manifest(ra, cfg, 0, 0).dump() == manifest(rb, cfg, 0, 0).dump();
            for (const auto& f : ra.artifacts) same = same && slurp(a.dir() / f) == slurp(b.dir() / f);
        }
        fs::remove_all(root);
        note(o, same, "command artifacts byte-identical across runs");
    }
    note(o, clk.seconds() <= 600, "runtime " + fmt("%.1f", clk.seconds()) + " s");
    return o;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
        {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10},
    };
    int failed = 0;
    Clock total;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%-5s %s  %s\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of 10 criteria passed in %.1f s\n", 10 - failed, total.seconds());
    return failed ? 1 : 0;
}
