#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "mlnl/errors.hpp"
#include "mlnl/gauss.hpp"
#include "mlnl/kernels.hpp"
#include "mlnl/regularity.hpp"

namespace mlnl {

using Fn = std::function<double(double)>;

struct Problem1D {
    Fn p_fn = [](double) { return 1.0; };
    Fn q_fn = [](double) { return 1.0; };
    Fn g_fn = [](double) { return 0.0; };
    Fn f_fn = [](double) { return 1.0; };
    KernelSpec kernel = fractional_kernel(FractionalOrder::from_double(0.5));
    double p_min = 1.0;
};

struct Grid1D {
    enum class Kind { uniform, graded };
    std::vector<double> x;  ///< x[0]=0, x[N]=1; unknowns live at x[1..N-1]
    Kind kind = Kind::uniform;
    double strength = 1;

    int cells() const { return static_cast<int>(x.size()) - 1; }
    int unknowns() const { return cells() - 1; }
    double node(int i) const { return x[i + 1]; }  ///< i-th unknown
    double h_min() const {
        double m = 1;
        for (std::size_t i = 1; i < x.size(); ++i) m = std::min(m, x[i] - x[i - 1]);
        return m;
    }
    double h_max() const {
        double m = 0;
        for (std::size_t i = 1; i < x.size(); ++i) m = std::max(m, x[i] - x[i - 1]);
        return m;
    }

    static Grid1D uniform(int N) {
        if (N < 2) throw DomainError("grid needs at least 2 cells");
        Grid1D g;
        for (int i = 0; i <= N; ++i) g.x.push_back(static_cast<double>(i) / N);
        g.x.back() = 1.0;
        return g;
    }

    /// x = (2t)^b / 2 on t <= 1/2, mirrored; N must be even.
    static Grid1D graded(int N, double strength = 2.0) {
        if (N < 2 || N % 2) throw DomainError("graded grid needs an even number of cells");
        if (!(strength >= 1)) throw DomainError("grading strength must be >= 1");
        Grid1D g;
        g.kind = Kind::graded;
        g.strength = strength;
        g.x.resize(N + 1);
        for (int i = 0; i <= N / 2; ++i) {
            double t = static_cast<double>(i) / N;
            g.x[i] = 0.5 * std::pow(2 * t, strength);
            g.x[N - i] = 1 - g.x[i];
        }
        g.x[0] = 0;
        g.x[N] = 1;
        g.x[N / 2] = 0.5;
        return g;
    }
};

struct SolverStats {
    int iterations = 0;
    double residual_norm = 0;
    double condition_estimate = 0;
};

struct Solution1D {
    Grid1D grid;
    std::vector<double> values;  ///< at unknowns
    std::vector<double> du, d2u;
    SolverStats stats;

    double at(int i) const { return i < 0 || i >= static_cast<int>(values.size()) ? 0.0 : values[i]; }
    std::vector<double> nodes() const {
        return {grid.x.begin() + 1, grid.x.end() - 1};
    }
    std::vector<double> distances() const {
        std::vector<double> d;
        for (double x : nodes()) d.push_back(std::min(x, 1 - x));
        return d;
    }
    SampledFunction sampled() const {
        SampledFunction s;
        s.xs = nodes();
        s.values = values;
        s.d = distances();
        s.d1 = du;
        s.d2 = d2u;
        s.source = SampledFunction::Source::grid;
        return s;
    }
};

struct Tridiag {
    std::vector<double> lower, diag, upper;  ///< lower[0], upper[n-1] unused
    explicit Tridiag(int n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
    int size() const { return static_cast<int>(diag.size()); }

    Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
        const int n = size();
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) {
            double v = diag[i] * u[i];
            if (i > 0) v += lower[i] * u[i - 1];
            if (i + 1 < n) v += upper[i] * u[i + 1];
            r[i] = v;
        }
        return r;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        const int n = size();
        std::vector<double> c(n), d(n);
        double m = diag[0];
        c[0] = n > 1 ? upper[0] / m : 0.0;
        d[0] = rhs[0] / m;
        for (int i = 1; i < n; ++i) {
            m = diag[i] - lower[i] * c[i - 1];
            if (m == 0) throw NumericError("tridiagonal solve hit a zero pivot", std::numeric_limits<double>::infinity());
            c[i] = i + 1 < n ? upper[i] / m : 0.0;
            d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
        }
        Eigen::VectorXd x(n);
        x[n - 1] = d[n - 1];
        for (int i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
        return x;
    }
};

struct OperatorMatrix {
    Eigen::MatrixXd A;
    Eigen::VectorXd F;
    Tridiag laplace;  ///< -d^2/dx^2 without the p factor
    Tridiag gradient; ///< g D with upwinding applied
    Eigen::VectorXd p, q, g;
};

namespace detail {

/// int_a^b z^{e-1} dz, accurate when b/a is close to 1 and continuous through e = 0.
inline double power_moment(double a, double b, double e) {
    if (std::isinf(b)) return -std::pow(a, e) / e;
    const double L = std::log(b / a);
    if (e == 0) return L;
    return std::pow(a, e) * std::expm1(e * L) / e;
}

struct CellMoments {
    double m0, m1;
};

inline CellMoments cell_moments(const KernelSpec& k, double a, double b) {
    if (k.kind == KernelKind::fractional_exact) {
        const double C = k.order.s > 0 ? normalization_constant(k.order.s) : 0.0;
        const double s2 = 2 * k.order.s;
        return {C * power_moment(a, b, -s2), C * power_moment(a, b, 1 - s2)};
    }
    return {k.moment(0, a, b), k.moment(1, a, b)};
}

inline double second_difference_weights(double hL, double hR, double& wl, double& wr) {
    wl = 2 / (hL * (hL + hR));
    wr = 2 / (hR * (hL + hR));
    return 2 / (hL * hR);
}

}  // namespace detail

/// A U = F for p(-u'') + q L_k u + g u' = f, exterior-zero closure.
inline OperatorMatrix assemble(const Problem1D& pb, const Grid1D& grid) {
    const int N = grid.cells();
    const int n = N - 1;
    if (n < 1) throw DomainError("grid has no interior nodes");
    for (int i = 1; i <= N; ++i)
        if (!(grid.x[i] > grid.x[i - 1])) throw DomainError("grid nodes must be strictly increasing");
    const auto& X = grid.x;
    OperatorMatrix op;
    op.A = Eigen::MatrixXd::Zero(n, n);
    op.F.resize(n);
    op.p.resize(n);
    op.q.resize(n);
    op.g.resize(n);
    op.laplace = Tridiag(n);
    op.gradient = Tridiag(n);
    for (int r = 0; r < n; ++r) {
        const double x = X[r + 1];
        op.p[r] = pb.p_fn(x);
        op.q[r] = pb.q_fn(x);
        op.g[r] = pb.g_fn(x);
        op.F[r] = pb.f_fn(x);
        if (!(op.p[r] >= pb.p_min) || !(pb.p_min > 0))
            throw ModelError("p below p_min at x=" + std::to_string(x));
        if (!(op.q[r] >= 0)) throw ModelError("q negative at x=" + std::to_string(x));
    }

    for (int r = 0; r < n; ++r) {
        const int i = r + 1;
        const double xi = X[i], hL = xi - X[i - 1], hR = X[i + 1] - xi;
        double wl, wr;
        const double wd = detail::second_difference_weights(hL, hR, wl, wr);
        op.laplace.diag[r] = wd;
        op.laplace.lower[r] = -wl;
        op.laplace.upper[r] = -wr;

        const double g = op.g[r], p = op.p[r];
        if (g != 0) {
            if (std::abs(g) * std::max(hL, hR) > 2 * p) {
                if (g > 0) {
                    op.gradient.diag[r] = g / hL;
                    op.gradient.lower[r] = -g / hL;
                } else {
                    op.gradient.diag[r] = -g / hR;
                    op.gradient.upper[r] = g / hR;
                }
            } else {
                op.gradient.diag[r] = g * (hR - hL) / (hL * hR);
                op.gradient.lower[r] = -g * hR / (hL * (hL + hR));
                op.gradient.upper[r] = g * hL / (hR * (hL + hR));
            }
        }

        auto row = op.A.row(r);
        row[r] += p * wd + op.gradient.diag[r];
        if (r > 0) row[r - 1] += -p * wl + op.gradient.lower[r];
        if (r + 1 < n) row[r + 1] += -p * wr + op.gradient.upper[r];

        const double q = op.q[r];
        if (q == 0) continue;
        const KernelSpec& k = pb.kernel;
        auto add = [&](int node, double w) {
            if (node >= 1 && node <= n) row[node - 1] += q * w;
        };
        // singular cell: -u''(x_i) * int_{|z|<rho} z^2 k / 2 over both sides
        const double rho = std::min(hL, hR);
        const double W2 = k.moment(2, 0, rho);
        add(i, W2 * wd);
        add(i - 1, -W2 * wl);
        add(i + 1, -W2 * wr);
        double self = 0;
        // right cells [X_c, X_{c+1}], z = y - x_i
        for (int c = i; c < N; ++c) {
            const double a = std::max(X[c] - xi, rho), b = X[c + 1] - xi;
            if (!(b > a)) continue;
            auto [m0, m1] = detail::cell_moments(k, a, b);
            const double h = X[c + 1] - X[c];
            const double w1 = (m1 - (X[c] - xi) * m0) / h;
            const double w0 = m0 - w1;
            self += m0;
            add(c, -w0);
            add(c + 1, -w1);
        }
        // left cells, z = x_i - y
        for (int c = i - 1; c >= 0; --c) {
            const double a = std::max(xi - X[c + 1], rho), b = xi - X[c];
            if (!(b > a)) continue;
            auto [m0, m1] = detail::cell_moments(k, a, b);
            const double h = X[c + 1] - X[c];
            const double wc1 = (b * m0 - m1) / h;
            const double wc = m0 - wc1;
            self += m0;
            add(c, -wc);
            add(c + 1, -wc1);
        }
        const double inf = std::numeric_limits<double>::infinity();
        self += k.moment(0, 1 - xi, inf) + k.moment(0, xi, inf);
        add(i, self);
    }
    return op;
}

namespace detail {

inline void reconstruct(Solution1D& s) {
    const auto& X = s.grid.x;
    const int n = static_cast<int>(s.values.size());
    s.du.assign(n, 0.0);
    s.d2u.assign(n, 0.0);
    for (int r = 0; r < n; ++r) {
        const int i = r + 1;
        const double hL = X[i] - X[i - 1], hR = X[i + 1] - X[i];
        const double um = s.at(r - 1), u0 = s.values[r], up = s.at(r + 1);
        s.du[r] = -hR / (hL * (hL + hR)) * um + (hR - hL) / (hL * hR) * u0 + hL / (hR * (hL + hR)) * up;
        s.d2u[r] = 2 * (hR * um - (hL + hR) * u0 + hL * up) / (hL * hR * (hL + hR));
    }
}

inline Solution1D make_solution(const Grid1D& grid, const Eigen::VectorXd& U) {
    Solution1D s;
    s.grid = grid;
    s.values.assign(U.data(), U.data() + U.size());
    reconstruct(s);
    return s;
}

}  // namespace detail

/// LU of the row-equilibrated matrix diag(A)^{-1} A; graded grids make raw rows differ by h_min^{-2}.
struct Factorized {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::VectorXd row_scale;
    double rcond = 0;
    Eigen::VectorXd solve(const Eigen::VectorXd& F) const { return lu.solve(row_scale.cwiseProduct(F)); }
};

inline Factorized factorize(const OperatorMatrix& op) {
    Factorized f;
    f.row_scale = op.A.diagonal().cwiseAbs().cwiseMax(std::numeric_limits<double>::min()).cwiseInverse();
    f.lu.compute(f.row_scale.asDiagonal() * op.A);
    f.rcond = f.lu.rcond();
    if (!(f.rcond > 1e-14))
        throw NumericError("operator matrix is singular to working precision", f.rcond > 0 ? 1 / f.rcond : INFINITY);
    return f;
}

inline Solution1D solve_with(const OperatorMatrix& op, const Factorized& f, const Grid1D& grid,
                             const Eigen::VectorXd& F) {
    Eigen::VectorXd U = f.solve(F);
    U += f.solve(F - op.A * U);  // one refinement step
    Solution1D s = detail::make_solution(grid, U);
    s.stats.iterations = 0;
    s.stats.residual_norm = (op.A * U - F).lpNorm<Eigen::Infinity>();
    s.stats.condition_estimate = 1 / f.rcond;
    return s;
}

inline Solution1D solve_direct(const Problem1D& pb, const Grid1D& grid) {
    OperatorMatrix op = assemble(pb, grid);
    Factorized f = factorize(op);
    return solve_with(op, f, grid, op.F);
}

/// u <- (1-damping) u + damping (-Delta)^{-1}[(f - g Du - q L_k u)/p]
inline Solution1D solve_fixed_point(const Problem1D& pb, const Grid1D& grid, double damping = 1.0,
                                    int max_iter = 500, double tol = 1e-10) {
    if (!(damping > 0 && damping <= 1)) throw DomainError("damping must lie in (0,1]");
    if (max_iter < 1) throw DomainError("max_iter must be positive");
    OperatorMatrix op = assemble(pb, grid);
    const int n = static_cast<int>(op.F.size());
    Eigen::VectorXd U = Eigen::VectorXd::Zero(n);
    std::vector<double> history;
    for (int it = 1; it <= max_iter; ++it) {
        // A U = p Lap U + q K U + G U, so the nonlocal and gradient parts are A U - p Lap U
        Eigen::VectorXd rest = op.A * U - op.p.cwiseProduct(op.laplace.apply(U));
        Eigen::VectorXd rhs = (op.F - rest).cwiseQuotient(op.p);
        Eigen::VectorXd T = op.laplace.solve(rhs);
        Eigen::VectorXd next = (1 - damping) * U + damping * T;
        const double inc = (next - U).lpNorm<Eigen::Infinity>();
        history.push_back(inc);
        U = std::move(next);
        if (!std::isfinite(inc)) break;
        if (inc <= tol) {
            Solution1D s = detail::make_solution(grid, U);
            s.stats.iterations = it - 1;
            s.stats.residual_norm = (op.A * U - op.F).lpNorm<Eigen::Infinity>();
            s.stats.condition_estimate = std::numeric_limits<double>::quiet_NaN();
            return s;
        }
    }
    throw FixedPointError("fixed-point iteration did not converge; reduce damping", history);
}

struct MMatrixReport {
    bool positive_diagonal = true;
    double max_offdiagonal = -std::numeric_limits<double>::infinity();
    bool weakly_dominant = true;
    int strict_rows = 0;
    bool is_m_matrix() const { return positive_diagonal && max_offdiagonal <= 1e-12 && weakly_dominant && strict_rows > 0; }
};

inline MMatrixReport m_matrix_check(const Eigen::MatrixXd& A) {
    MMatrixReport r;
    for (int i = 0; i < A.rows(); ++i) {
        double off = 0;
        for (int j = 0; j < A.cols(); ++j) {
            if (i == j) continue;
            r.max_offdiagonal = std::max(r.max_offdiagonal, A(i, j));
            off += std::abs(A(i, j));
        }
        if (!(A(i, i) > 0)) r.positive_diagonal = false;
        const double slack = A(i, i) - off;
        if (slack < -1e-9 * A(i, i)) r.weakly_dominant = false;
        if (slack > 1e-12 * A(i, i)) ++r.strict_rows;
    }
    return r;
}

struct GaussianBump {
    double amplitude, center, width;
    double operator()(double x) const {
        const double t = (x - center) / width;
        return amplitude * std::exp(-0.5 * t * t);
    }
};

/// 1 to 4 bumps with centers in (0,1); amplitudes in [0,1], or one of them negated.
inline std::vector<GaussianBump> random_bumps(std::mt19937_64& rng, bool one_negative = false) {
    std::uniform_int_distribution<int> count(1, 4);
    std::uniform_real_distribution<double> amp(0.1, 1.0), ctr(0.05, 0.95), wid(0.02, 0.2);
    std::vector<GaussianBump> out(count(rng));
    for (auto& b : out) b = {amp(rng), ctr(rng), wid(rng)};
    if (one_negative) out.front().amplitude = -4 * out.front().amplitude - 1;
    return out;
}

inline Fn bumps_function(std::vector<GaussianBump> bumps) {
    return [bumps = std::move(bumps)](double x) {
        double v = 0;
        for (const auto& b : bumps) v += b(x);
        return v;
    };
}

struct ComparisonViolation {
    int trial;
    double min_u;
};

struct ComparisonReport {
    bool all_nonnegative = true;
    double min_over_trials = 0;
    std::vector<ComparisonViolation> violations;
};

inline ComparisonReport comparison_check(const Problem1D& pb, const Grid1D& grid, int trials,
                                         std::uint64_t seed = 20240601) {
    if (trials < 0) throw DomainError("trials must be non-negative");
    Problem1D base = pb;
    base.f_fn = [](double) { return 0.0; };
    OperatorMatrix op = assemble(base, grid);
    Factorized fac = factorize(op);
    std::mt19937_64 rng(seed);
    ComparisonReport rep;
    const int n = static_cast<int>(op.F.size());
    for (int t = 0; t < trials; ++t) {
        Fn f = bumps_function(random_bumps(rng));
        Eigen::VectorXd F(n);
        for (int r = 0; r < n; ++r) F[r] = f(grid.x[r + 1]);
        Eigen::VectorXd U = fac.solve(F);
        const double m = std::min(U.minCoeff(), 0.0);
        rep.min_over_trials = std::min(rep.min_over_trials, m);
        if (m < -1e-10) {
            rep.all_nonnegative = false;
            rep.violations.push_back({t, m});
        }
    }
    return rep;
}

struct LinearGrowth {
    double c01_norm_over_fplus = 0;
    bool inconsistent = false;  ///< f_+ vanishes while u_+ does not
};

inline LinearGrowth linear_growth_check(const Solution1D& sol, const std::vector<double>& f_values) {
    if (f_values.size() != sol.values.size()) throw DomainError("f samples must match the solution nodes");
    double up = 0, fp = 0;
    auto d = sol.distances();
    for (std::size_t i = 0; i < d.size(); ++i) {
        up = std::max(up, std::max(sol.values[i], 0.0) / d[i]);
        fp = std::max(fp, f_values[i]);
    }
    LinearGrowth g;
    if (fp <= 0) {
        g.inconsistent = up > 0;
        g.c01_norm_over_fplus = up > 0 ? std::numeric_limits<double>::infinity() : 0.0;
        return g;
    }
    g.c01_norm_over_fplus = up / fp;
    return g;
}

inline LinearGrowth linear_growth_check(const Solution1D& sol, const Fn& f) {
    std::vector<double> fv;
    for (double x : sol.nodes()) fv.push_back(f(x));
    return linear_growth_check(sol, fv);
}

/// Log-log slope of |u''| against d over [d_lo, d_hi] on the left half of the grid.
inline ExponentFit boundary_hessian_fit(const Solution1D& sol, double d_lo, double d_hi) {
    std::vector<double> d, m;
    auto xs = sol.nodes();
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (xs[i] >= d_lo && xs[i] <= d_hi && xs[i] <= 0.5 && sol.d2u[i] != 0) {
            d.push_back(xs[i]);
            m.push_back(std::abs(sol.d2u[i]));
        }
    return fit_blowup_exponent(d, m);
}

struct WeightedPoissonResult {
    Fn u, du, d2u;
    NormReport norm_report;
    double f_norm = 0;  ///< C^beta_gamma norm of f on the same samples
    double ratio = 0;
};

/// u = int G(x,y) f(y) dy with G = min(x,y)(1-max(x,y)); written as u = (1-x)A(x) + xB(x),
/// A = int_0^x y f, B = int_x^1 (1-y) f.
inline WeightedPoissonResult solve_weighted_poisson_1d(const Fn& f, double M, double gamma, double beta,
                                                       int per_side = 200, double d_min = 1e-6) {
    if (!(gamma > 0 && gamma < 1)) throw DomainError("gamma must lie in (0,1)");
    if (!(beta > 0 && beta < 1)) throw DomainError("beta must lie in (0,1)");
    if (!(M > 0)) throw DomainError("envelope constant must be positive");
    auto xs = boundary_graded_samples(d_min, per_side);
    for (double x : xs) {
        const double d = std::min(x, 1 - x);
        if (std::abs(f(x)) > M * std::pow(d, -gamma) * (1 + 1e-12))
            throw ModelError("f violates the envelope M d^{-gamma} at x=" + std::to_string(x));
    }
    auto integral = [f](double a, double b, const Fn& w) {
        if (!(b > a)) return 0.0;
        auto br = clustered_breaks(a, b, true, true);
        auto r = integrate_adaptive([&](double y) { return w(y) * f(y); }, br, 1e-15, 1e-13, 20000);
        if (!r.converged) throw QuadratureError("weighted Poisson quadrature did not converge", r.value, r.error);
        return r.value;
    };
    auto A = [integral](double x) { return integral(0, x, [](double y) { return y; }); };
    auto B = [integral](double x) { return integral(x, 1, [](double y) { return 1 - y; }); };
    WeightedPoissonResult res;
    res.u = [A, B](double x) { return (1 - x) * A(x) + x * B(x); };
    res.du = [A, B](double x) { return B(x) - A(x); };
    res.d2u = [f](double x) { return -f(x); };
    SampledFunction s = SampledFunction::from_analytic(xs, res.u, res.du, res.d2u);
    NormParams np{beta, gamma, std::max<std::size_t>(200000, 10 * xs.size())};
    res.norm_report = full_report(s, np);
    SampledFunction fs = SampledFunction::from_analytic(xs, f);
    res.f_norm = cbeta_gamma_norm(fs, beta, gamma, np.pair_budget);
    res.ratio = res.f_norm > 0 ? res.norm_report.c2beta_gamma_star / res.f_norm : 0.0;
    return res;
}

inline void write_csv(const Solution1D& s, std::ostream& os) {
    os << "x,u,du,d2u,d\n";
    os.precision(17);
    auto xs = s.nodes();
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << xs[i] << ',' << s.values[i] << ',' << s.du[i] << ',' << s.d2u[i] << ','
           << std::min(xs[i], 1 - xs[i]) << '\n';
}

inline nlohmann::json to_json(const SolverStats& st) {
    return {{"iterations", st.iterations},
            {"residual_norm", st.residual_norm},
            {"condition_estimate", std::isfinite(st.condition_estimate) ? nlohmann::json(st.condition_estimate)
                                                                         : nlohmann::json(nullptr)}};
}

}  // namespace mlnl
