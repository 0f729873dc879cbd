#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mlnl/barriers.hpp"
#include "mlnl/config.hpp"
#include "mlnl/counterexample.hpp"
#include "mlnl/powerlog.hpp"
#include "mlnl/regularity.hpp"
#include "mlnl/solver1d.hpp"

namespace mlnl {

inline constexpr const char* kToolkitVersion = "0.3.0";

struct Check {
    std::string name;
    double value = 0;
    double bound = 0;
    std::string relation;  ///< "<=", ">=" or "flag"
    bool pass = false;
};

struct RunResult {
    std::string command;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
    std::vector<std::string> notices;
    nlohmann::json details = nlohmann::json::object();

    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    void at_most(const std::string& name, double v, double bound) {
        checks.push_back({name, v, bound, "<=", v <= bound});
    }
    void at_least(const std::string& name, double v, double bound) {
        checks.push_back({name, v, bound, ">=", v >= bound});
    }
    void flag(const std::string& name, bool ok) { checks.push_back({name, ok ? 1.0 : 0.0, 1.0, "flag", ok}); }
};

/// Writes artifacts into one directory and records their names.
class ArtifactSink {
public:
    explicit ArtifactSink(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }
    std::ofstream open(RunResult& r, const std::string& name) {
        r.artifacts.push_back(name);
        std::ofstream os(dir_ / name);
        if (!os) throw ConfigError("cannot write " + (dir_ / name).string());
        os << std::setprecision(17);
        return os;
    }
    void json(RunResult& r, const std::string& name, const nlohmann::json& j) { open(r, name) << j.dump(2) << '\n'; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

namespace detail {

inline FractionalOrder order_from(const std::string& text, RunResult& r) {
    std::string notice;
    try {
        auto o = FractionalOrder::parse(text, true, &notice);
        if (!notice.empty()) r.notices.push_back(notice);
        return o;
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

/// "alpha:j" with alpha a decimal, "num/den", or "3-2s" for the first counterexample exponent 2(1-s)+1.
inline PowerLogAtom atom_from(const std::string& spec, const FractionalOrder& order) {
    auto parts = split_list(spec, ':');
    if (parts.size() != 2) throw ConfigError("atom '" + spec + "' must read alpha:j");
    int j;
    try {
        j = std::stoi(parts[1]);
    } catch (const std::logic_error&) {
        throw ConfigError("atom '" + spec + "': bad log power");
    }
    const std::string& a = parts[0];
    if (a == "3-2s") {
        if (order.rational_form) return PowerLogAtom::make(Rational(3) - Rational(2) * *order.rational_form, j);
        return PowerLogAtom::make(3 - 2 * order.s, j);
    }
    try {
        if (a.find('/') != std::string::npos) {
            auto slash = a.find('/');
            return PowerLogAtom::make(Rational(std::stoll(a.substr(0, slash)), std::stoll(a.substr(slash + 1))), j);
        }
        double v = std::stod(a);
        if (auto q = promote_to_rational(v)) return PowerLogAtom::make(*q, j);
        return PowerLogAtom::make(v, j);
    } catch (const std::logic_error&) {
        throw ConfigError("atom '" + spec + "': bad exponent");
    }
}

inline double rel_change(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace detail

struct ExpansionCase {
    FractionalOrder order;
    PowerLogAtom atom;
};

inline std::vector<ExpansionCase> expansion_cases(const Config& sec, RunResult& r) {
    std::vector<ExpansionCase> out;
    for (const auto& o : split_list(sec.at("orders").get<std::string>())) {
        auto order = detail::order_from(o, r);
        for (const auto& a : split_list(sec.at("atoms").get<std::string>())) out.push_back({order, detail::atom_from(a, order)});
    }
    if (out.empty()) throw ConfigError("verify-lemma61: empty test set");
    return out;
}

inline RunResult run_verify_expansion(const Config& cfg, ArtifactSink& sink) {
    const Config& sec = cfg.at("verify-lemma61");
    RunResult r;
    r.command = "verify-lemma61";
    auto cases = expansion_cases(sec, r);
    const int n = sec.at("points").get<int>();
    const double lo = sec.at("x_lo").get<double>(), hi = sec.at("x_hi").get<double>();
    const double tol = sec.at("rel_tol").get<double>();
    if (n < 2 || !(lo > 0 && hi > lo && hi < 0.5)) throw ConfigError("verify-lemma61: bad sample window");
    QuadratureParams qp;
    qp.rel_tol = sec.at("quad_rel_tol").get<double>();
    qp.abs_tol = 1e-13;
    auto xs = geometric_points(lo, hi, n);
    auto csv = sink.open(r, "expansion_check.csv");
    csv << "s,alpha,j,x,expansion,quadrature,scaled_error\n";
    nlohmann::json table = nlohmann::json::array();
    double worst = 0;
    for (const auto& c : cases) {
        auto ex = fractional_expansion(c.order, c.atom);
        auto K = fractional_kernel(c.order);
        auto u = atom_function(c.atom);
        double case_worst = 0;
        for (double x : xs) {
            double e = expansion_eval(ex, x);
            double q = lk_apply(K, u, x, qp).value;
            double err = std::abs(e - q) / (1 + std::abs(q));
            case_worst = std::max(case_worst, err);
            csv << c.order.str() << ',' << c.atom.alpha << ',' << c.atom.j << ',' << x << ',' << e << ',' << q << ','
                << err << '\n';
        }
        worst = std::max(worst, case_worst);
        table.push_back({{"s", c.order.str()},
                         {"alpha", c.atom.alpha},
                         {"j", c.atom.j},
                         {"resonant", ex.resonant},
                         {"max_scaled_error", case_worst},
                         {"pass", case_worst <= tol}});
        r.at_most("expansion s=" + c.order.str() + " alpha=" + format_value(c.atom.alpha) + " j=" +
                      std::to_string(c.atom.j),
                  case_worst, tol);
    }
    r.details["cases"] = table;
    r.details["max_scaled_error"] = worst;
    return r;
}

inline RunResult run_counterexample(const Config& cfg, ArtifactSink& sink) {
    const Config& sec = cfg.at("counterexample");
    RunResult r;
    r.command = "counterexample";
    auto order = detail::order_from(sec.at("s").get<std::string>(), r);
    const int k = sec.at("k").get<int>();
    if (k < 1) throw ConfigError("counterexample.k must be >= 1");
    auto ce = build_counterexample(order, k);
    sink.json(r, "coefficients.json", to_json(ce));

    auto pts = geometric_points(sec.at("x_lo").get<double>(), sec.at("x_hi").get<double>(), sec.at("points").get<int>());
    auto rep = residual_check(ce, pts);
    auto csv = sink.open(r, "counterexample.csv");
    csv << "x,u,u2,f,residual\n";
    for (const auto& p : rep.per_point)
        csv << p.x << ',' << ce.u.eval(p.x) << ',' << -p.minus_u2 << ',' << p.f << ',' << p.residual << '\n';
    r.at_most("residual max", rep.max_abs_residual, sec.at("residual_tol").get<double>());
    r.at_most("residual quadrature failures", rep.failed_points, 0);

    const double s = order.s;
    const bool half = order.rational_form && *order.rational_form == Rational(1, 2);
    if (half) {
        auto lm = log_mode_ratio(ce, sec.at("log_x_lo").get<double>(), sec.at("log_x_hi").get<double>());
        r.details["log_mode"] = {{"ratio_lo", lm.ratio_lo}, {"ratio_hi", lm.ratio_hi}, {"gap", lm.relative_gap}};
        r.at_most("u''/log x relative gap", lm.relative_gap, sec.at("log_gap_tol").get<double>());
    } else {
        const int ord = s > 0.5 ? 2 : 3;
        const double expected = s > 0.5 ? 1 - 2 * s : -2 * s;
        auto fit = sharpness_exponent(ce, sec.at("window_lo").get<double>(), sec.at("window_hi").get<double>(), ord);
        r.details["sharpness"] = {{"order", ord}, {"slope", fit.slope}, {"stderr", fit.stderr_slope}, {"expected", expected}};
        r.at_most("slope of |u^(" + std::to_string(ord) + ")| minus " + format_value(expected),
                  std::abs(fit.slope - expected), sec.at("slope_tol").get<double>());
    }
    nlohmann::json lead = nlohmann::json::array();
    for (double x : parse_doubles(sec.at("leading_points").get<std::string>(), "counterexample.leading_points")) {
        double ratio = leading_ratio(ce, x);
        double err = std::abs(ratio - ce.leading.next_coeff) / std::abs(ce.leading.next_coeff);
        lead.push_back({{"x", x}, {"ratio", ratio}, {"relative_error", err}});
        r.at_most("leading ratio at x=" + format_value(x), err, sec.at("leading_tol").get<double>());
    }
    r.details["leading"] = {{"coefficient", ce.leading.next_coeff}, {"samples", lead}};
    r.details["regularity_label"] = ce.regularity_label;
    return r;
}

inline Problem1D problem_from(const Config& sec, RunResult& r) {
    Problem1D pb;
    auto order = detail::order_from(sec.at("s").get<std::string>(), r);
    try {
        pb.kernel = make_kernel(sec.at("kernel").get<std::string>(), order);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    const double gamma = sec.at("gamma").get<double>();
    pb.p_fn = make_coefficient(sec.at("p").get<std::string>(), gamma);
    pb.q_fn = make_coefficient(sec.at("q").get<std::string>(), gamma);
    pb.g_fn = make_coefficient(sec.at("g").get<std::string>(), gamma);
    pb.f_fn = make_coefficient(sec.at("f").get<std::string>(), gamma);
    pb.p_min = sec.at("p_min").get<double>();
    return pb;
}

inline Grid1D grid_from(const Config& sec) {
    const int N = sec.at("N").get<int>();
    const std::string kind = sec.at("grid").get<std::string>();
    if (N < 4 || N > 8192) throw ConfigError("solve.N must lie in [4, 8192]");
    if (kind == "uniform") return Grid1D::uniform(N);
    if (kind == "graded") {
        if (N % 2) throw ConfigError("graded grids need even N");
        return Grid1D::graded(N, sec.at("grading").get<double>());
    }
    throw ConfigError("solve.grid must be uniform or graded");
}

inline RunResult run_solve(const Config& cfg, ArtifactSink& sink) {
    const Config& sec = cfg.at("solve");
    RunResult r;
    r.command = "solve";
    Problem1D pb = problem_from(sec, r);
    Grid1D grid = grid_from(sec);
    const std::string method = sec.at("method").get<std::string>();
    if (method != "direct" && method != "fixed_point" && method != "both")
        throw ConfigError("solve.method must be direct, fixed_point or both");

    OperatorMatrix op = assemble(pb, grid);
    Factorized fac = factorize(op);
    Solution1D sol = solve_with(op, fac, grid, op.F);
    const double fnorm = op.F.lpNorm<Eigen::Infinity>();
    r.at_most("direct residual / |F|", sol.stats.residual_norm / std::max(fnorm, 1e-300), 1e-10);
    if (method != "direct") {
        auto fp = solve_fixed_point(pb, grid, sec.at("damping").get<double>(), sec.at("max_iter").get<int>());
        double diff = 0;
        for (std::size_t i = 0; i < sol.values.size(); ++i) diff = std::max(diff, std::abs(fp.values[i] - sol.values[i]));
        r.details["fixed_point"] = {{"iterations", fp.stats.iterations}, {"agreement", diff}};
        r.at_most("fixed point vs direct", diff, sec.at("agreement_tol").get<double>());
        if (method == "fixed_point") {
            fp.stats.condition_estimate = sol.stats.condition_estimate;
            sol = fp;
        }
    }
    {
        auto csv = sink.open(r, "solution.csv");
        write_csv(sol, csv);
    }
    sink.json(r, "stats.json", to_json(sol.stats));

    std::vector<double> fv(op.F.data(), op.F.data() + op.F.size());
    if (*std::min_element(fv.begin(), fv.end()) >= 0)
        r.at_least("min u for f >= 0", *std::min_element(sol.values.begin(), sol.values.end()), -1e-10);
    auto growth = linear_growth_check(sol, fv);
    r.details["linear_growth"] = growth.c01_norm_over_fplus;
    r.flag("linear growth ratio finite", std::isfinite(growth.c01_norm_over_fplus) && !growth.inconsistent);

    const int trials = sec.at("trials").get<int>();
    if (trials > 0) {
        auto cmp = comparison_check(pb, grid, trials, sec.at("seed").get<std::uint64_t>());
        r.details["comparison"] = {{"trials", trials}, {"min_u", cmp.min_over_trials}, {"violations", cmp.violations.size()}};
        r.flag("comparison principle", cmp.all_nonnegative);
    }

    const double s = pb.kernel.s();
    const double fit_lo = sec.at("fit_lo").get<double>() > 0 ? sec.at("fit_lo").get<double>() : 10 * grid.h_min();
    const double fit_hi = sec.at("fit_hi").get<double>();
    const bool half = pb.kernel.order.rational_form ? *pb.kernel.order.rational_form == Rational(1, 2) : s == 0.5;
    try {
        auto fit = boundary_hessian_fit(sol, fit_lo, fit_hi);
        r.details["boundary_fit"] = {{"slope", fit.slope}, {"stderr", fit.stderr_slope}, {"window", {fit_lo, fit_hi}}};
        if (s > 0.5 && !half)
            r.at_most("|u''| slope minus (1-2s)", std::abs(fit.slope - (1 - 2 * s)), sec.at("slope_tol").get<double>());
    } catch (const DegenerateFit& e) {
        r.details["boundary_fit"] = {{"error", e.what()}, {"window", {fit_lo, fit_hi}}};
        if (s > 0.5 && !half) r.flag("boundary fit window usable", false);
    }
    if (s < 0.5) {
        // |u''| over the last decade of nodes against the interior maximum
        double edge = 0, inner = 0, h0 = grid.x[1];
        auto xs = sol.nodes();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double& slot = std::min(xs[i], 1 - xs[i]) <= 10 * h0 ? edge : inner;
            slot = std::max(slot, std::abs(sol.d2u[i]));
        }
        r.details["hessian_edge_over_interior"] = edge / inner;
        r.at_most("edge |u''| / interior max", edge / inner, 2.0);
    }
    NormParams np{sec.at("beta").get<double>(), sec.at("gamma").get<double>(),
                  std::max<std::size_t>(200000, 10 * sol.values.size())};
    auto report = full_report(sol.sampled(), np, fit_lo, fit_hi);
    sink.json(r, "norms.json", to_json(report));
    return r;
}

inline RunResult run_barriers(const Config& cfg, ArtifactSink& sink) {
    const Config& sec = cfg.at("barriers");
    RunResult r;
    r.command = "barriers";
    auto order = detail::order_from(sec.at("s").get<std::string>(), r);
    auto K = fractional_kernel(order);
    const double R = sec.at("R").get<double>();
    const int n = sec.at("samples").get<int>();
    if (n < 2 || !(R > 0)) throw ConfigError("barriers: need R > 0 and at least two samples");
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back(-0.9 * R + 1.8 * R * i / (n - 1));
    const double lr_min = sec.at("lambda_R_min").get<double>();
    const double stab = sec.at("stability_tol").get<double>();
    {
        auto csv = sink.open(r, "exp_barrier.csv");
        csv << "lambda,x,Lkv,empirical_C\n";
        double prev_C = -1;
        nlohmann::json sweep = nlohmann::json::array();
        for (double lambda : parse_doubles(sec.at("lambdas").get<std::string>(), "barriers.lambdas")) {
            auto rep = exp_barrier_check(K, lambda, R, xs);
            for (const auto& smp : rep.samples)
                csv << lambda << ',' << smp.x << ',' << smp.nonlocal_part << ',' << rep.empirical_C << '\n';
            const bool large = lambda * R >= lr_min;
            sweep.push_back({{"lambda", lambda},
                             {"all_negative", rep.all_negative},
                             {"empirical_C", std::isfinite(rep.empirical_C) ? nlohmann::json(rep.empirical_C) : nlohmann::json(nullptr)},
                             {"asserted", large}});
            if (!large) {
                r.notices.push_back("lambda R = " + format_value(lambda * R) + " below lambda_R_min: reported only");
                continue;
            }
            r.flag("L_k v < 0 at all samples, lambda=" + format_value(lambda), rep.all_negative);
            if (prev_C > 0)
                r.at_most("empirical_C growth, lambda=" + format_value(lambda), rep.empirical_C / prev_C, 1 + stab);
            prev_C = rep.empirical_C;
        }
        r.details["exp_sweep"] = sweep;
    }
    {
        auto csv = sink.open(r, "distance_barrier.csv");
        csv << "s,delta,x,local,nonlocal,total\n";
        nlohmann::json dist = nlohmann::json::array();
        for (const auto& o : split_list(sec.at("distance_orders").get<std::string>())) {
            auto ord = detail::order_from(o, r);
            auto search = find_barrier_delta(fractional_kernel(ord), sec.at("r0").get<double>(),
                                             sec.at("sigma").get<double>(), 1, 1, 0, sec.at("bisection_steps").get<int>());
            for (const auto& smp : search.report.samples)
                csv << ord.str() << ',' << search.delta << ',' << smp.x << ',' << smp.local_part << ','
                    << smp.nonlocal_part << ',' << smp.total << '\n';
            dist.push_back({{"s", ord.str()}, {"delta", search.delta}, {"found", search.found},
                            {"min_value", search.found ? search.report.min_value : 0.0}});
            r.flag("distance barrier delta found, s=" + ord.str(), search.found && search.delta > 0);
        }
        r.details["distance"] = dist;
    }
    {
        auto pb = PoissonBarrier::for_target(sec.at("poisson_gamma").get<double>(), sec.at("poisson_M").get<double>());
        auto chk = poisson_barrier_check(pb, sec.at("poisson_M").get<double>());
        auto csv = sink.open(r, "poisson_barrier.csv");
        csv << "x,phi,minus_phi2\n";
        for (double x : boundary_graded_samples(1e-6, 25)) csv << x << ',' << pb(x) << ',' << pb.minus_second_derivative(x) << '\n';
        r.details["poisson"] = {{"B", pb.B}, {"D", pb.D}, {"delta", pb.delta}, {"min_ratio", chk.min_ratio}};
        r.flag("Poisson barrier -phi'' >= M d^-gamma, phi >= 0", chk.holds);
    }
    return r;
}

inline RunResult run_norms(const Config& cfg, ArtifactSink& sink) {
    const Config& sec = cfg.at("norms");
    RunResult r;
    r.command = "norms";
    const double gamma = sec.at("gamma").get<double>(), beta = sec.at("beta").get<double>();
    auto f = make_coefficient(sec.at("f").get<std::string>(), gamma);
    const int per = sec.at("per_side").get<int>();
    const double d_min = sec.at("d_min").get<double>(), M = sec.at("M").get<double>();
    if (per < 8) throw ConfigError("norms.per_side must be at least 8");
    auto coarse = solve_weighted_poisson_1d(f, M, gamma, beta, per, d_min);
    auto fine = solve_weighted_poisson_1d(f, M, gamma, beta, 2 * per, d_min);
    const double change = detail::rel_change(coarse.ratio, fine.ratio);
    r.details["ratio"] = {coarse.ratio, fine.ratio};
    r.at_most("norm ratio change across resolutions", change, sec.at("stability_tol").get<double>());
    r.flag("norm ratio finite", std::isfinite(coarse.ratio) && std::isfinite(fine.ratio));
    auto xs = boundary_graded_samples(d_min, 2 * per);
    auto sf = SampledFunction::from_analytic(xs, fine.u, fine.du, fine.d2u);
    auto emb = embedding_check(sf, gamma);
    r.details["embedding"] = {{"c1_1mgamma", emb.c1_1mgamma_norm}, {"c2gamma_star", emb.c2gamma_star}, {"ratio", emb.ratio}};
    r.flag("embedding ratio finite", std::isfinite(emb.ratio));
    nlohmann::json out = {{"coarse", to_json(coarse.norm_report)}, {"fine", to_json(fine.norm_report)},
                          {"f_norm", {coarse.f_norm, fine.f_norm}}};
    sink.json(r, "norms.json", out);
    auto csv = sink.open(r, "poisson.csv");
    csv << "x,u,du,d2u\n";
    for (std::size_t i = 0; i < xs.size(); i += 4) csv << xs[i] << ',' << sf.values[i] << ',' << (*sf.d1)[i] << ',' << (*sf.d2)[i] << '\n';
    return r;
}

inline nlohmann::json manifest(const RunResult& r, const Config& cfg, std::uint64_t seed, double wall_time) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name},
                          {"value", std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr)},
                          {"bound", c.bound},
                          {"relation", c.relation},
                          {"pass", c.pass}});
    return {{"toolkit", "mlnl"},
            {"version", kToolkitVersion},
            {"command", r.command},
            {"config_hash", config_hash(cfg)},
            {"seed", seed},
            {"pass", r.pass()},
            {"checks", checks},
            {"details", r.details},
            {"notices", r.notices},
            {"artifacts", [&] {
                 auto a = r.artifacts;
                 a.push_back("manifest.json");
                 return a;
             }()},
            {"wall_time_s", wall_time}};
}

}  // namespace mlnl
