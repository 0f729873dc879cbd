#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mlnl/solver1d.hpp"

using namespace mlnl;

namespace {

// Exact L u for u = x(1-x) on (0,1), zero outside.
double parabola_lk(double s, double x) {
    const double C = normalization_constant(s), y = 1 - x;
    const double P = s == 0.5 ? std::log(y / x) : (std::pow(y, 1 - 2 * s) - std::pow(x, 1 - 2 * s)) / (1 - 2 * s);
    return C * ((std::pow(x, 2 - 2 * s) + std::pow(y, 2 - 2 * s)) / (2 - 2 * s) + (2 * x - 1) * P +
                x * y * (std::pow(x, -2 * s) + std::pow(y, -2 * s)) / (2 * s));
}

Problem1D manufactured(double s) {
    Problem1D pb;
    pb.kernel = fractional_kernel(FractionalOrder::from_double(s));
    pb.f_fn = [s](double x) { return 2.0 + parabola_lk(s, x); };
    return pb;
}

double max_error(const Solution1D& sol) {
    double e = 0;
    auto xs = sol.nodes();
    for (std::size_t i = 0; i < xs.size(); ++i) e = std::max(e, std::abs(sol.values[i] - xs[i] * (1 - xs[i])));
    return e;
}

Problem1D plain(double s) {
    Problem1D pb;
    pb.kernel = fractional_kernel(FractionalOrder::from_double(s));
    return pb;
}

}  // namespace

TEST(Grid, Construction) {
    auto u = Grid1D::uniform(8);
    EXPECT_EQ(u.cells(), 8);
    EXPECT_EQ(u.unknowns(), 7);
    EXPECT_EQ(u.node(0), 0.125);
    EXPECT_DOUBLE_EQ(u.h_min(), 0.125);
    auto g = Grid1D::graded(16, 2);
    EXPECT_EQ(g.x.front(), 0.0);
    EXPECT_EQ(g.x.back(), 1.0);
    EXPECT_EQ(g.x[8], 0.5);
    EXPECT_NEAR(g.x[1], 0.5 * std::pow(2.0 / 16, 2), 1e-16);
    for (int i = 0; i < 16; ++i) EXPECT_LT(g.x[i], g.x[i + 1]);
    for (int i = 0; i <= 16; ++i) EXPECT_NEAR(g.x[i] + g.x[16 - i], 1.0, 1e-15);
    EXPECT_LT(g.h_min(), u.h_min());
    EXPECT_THROW(Grid1D::uniform(1), DomainError);
    EXPECT_THROW(Grid1D::graded(15), DomainError);
    EXPECT_THROW(Grid1D::graded(16, 0.5), DomainError);
}

TEST(Tridiag, SolveMatchesDense) {
    const int n = 9;
    Tridiag t(n);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        t.diag[i] = 3 + 0.1 * i;
        D(i, i) = t.diag[i];
        if (i > 0) D(i, i - 1) = t.lower[i] = -1 - 0.05 * i;
        if (i + 1 < n) D(i, i + 1) = t.upper[i] = -0.7;
    }
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1, 2);
    EXPECT_LT((t.apply(b) - D * b).norm(), 1e-14);
    EXPECT_LT((t.solve(b) - D.partialPivLu().solve(b)).norm(), 1e-13);
}

TEST(Assemble, PureLaplaceIsExactOnQuadratics) {
    for (const auto& grid : {Grid1D::uniform(64), Grid1D::graded(64, 2.5)}) {
        Problem1D pb = plain(0.5);
        pb.q_fn = [](double) { return 0.0; };
        auto sol = solve_direct(pb, grid);
        auto xs = sol.nodes();
        for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(sol.values[i], 0.5 * xs[i] * (1 - xs[i]), 1e-13);
    }
}

TEST(Assemble, ModelErrors) {
    Problem1D pb = plain(0.5);
    pb.p_fn = [](double x) { return x < 0.5 ? 1.0 : 0.5; };
    EXPECT_THROW(assemble(pb, Grid1D::uniform(16)), ModelError);
    Problem1D neg = plain(0.5);
    neg.q_fn = [](double) { return -0.1; };
    EXPECT_THROW(assemble(neg, Grid1D::uniform(16)), ModelError);
}

TEST(MMatrix, StructureAcrossOrdersAndGrids) {
    for (double s : {0.25, 0.5, 0.75, 0.9})
        for (const auto& grid : {Grid1D::uniform(96), Grid1D::graded(96, 2)}) {
            auto op = assemble(plain(s), grid);
            auto rep = m_matrix_check(op.A);
            EXPECT_TRUE(rep.is_m_matrix()) << s;
            EXPECT_LE(rep.max_offdiagonal, 0.0);
            auto lu = op.A.partialPivLu();
            for (int i : {0, 10, 47, 95 - 1}) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(op.A.rows());
                e[i] = 1;
                EXPECT_GE(lu.solve(e).minCoeff(), -1e-12) << s << " " << i;
            }
        }
}

TEST(MMatrix, UpwindingKeepsStructureWithDrift) {
    Problem1D pb = plain(0.6);
    pb.g_fn = [](double x) { return 400 * (x - 0.3); };
    auto rep = m_matrix_check(assemble(pb, Grid1D::uniform(64)).A);
    EXPECT_TRUE(rep.is_m_matrix());
}

TEST(MMatrix, DetectsPositiveOffDiagonal) {
    Eigen::MatrixXd A(2, 2);
    A << 2, 0.5, -1, 2;
    EXPECT_FALSE(m_matrix_check(A).is_m_matrix());
    A << 1, -2, -1, 2;
    EXPECT_FALSE(m_matrix_check(A).weakly_dominant);
}

TEST(Solve, ZeroForcingGivesZero) {
    Problem1D pb = plain(0.4);
    pb.f_fn = [](double) { return 0.0; };
    auto sol = solve_direct(pb, Grid1D::uniform(64));
    for (double v : sol.values) EXPECT_EQ(v, 0.0);
}

TEST(Solve, ManufacturedSolutionConverges) {
    for (double s : {0.25, 0.5, 0.75}) {
        double prev = std::numeric_limits<double>::infinity();
        for (int N : {128, 256, 512}) {
            auto grid = Grid1D::uniform(N);
            auto pb = manufactured(s);
            auto op = assemble(pb, grid);
            Eigen::VectorXd U(N - 1);
            for (int i = 0; i < N - 1; ++i) U[i] = grid.node(i) * (1 - grid.node(i));
            if (N == 512) EXPECT_LE((op.A * U - op.F).lpNorm<Eigen::Infinity>(), 5e-3) << s;
            auto sol = solve_with(op, factorize(op), grid, op.F);
            double err = max_error(sol);
            EXPECT_LT(err, prev) << s << " " << N;
            EXPECT_LE(err, 5e-3);
            EXPECT_LE(sol.stats.residual_norm, 1e-10 * op.F.lpNorm<Eigen::Infinity>());
            prev = err;
        }
    }
}

TEST(Solve, LinearInForcing) {
    Problem1D a = plain(0.7), b = plain(0.7), c = plain(0.7);
    a.f_fn = [](double x) { return std::sin(3 * x); };
    b.f_fn = [](double x) { return x * x - 0.2; };
    c.f_fn = [](double x) { return std::sin(3 * x) - 2.5 * (x * x - 0.2); };
    auto grid = Grid1D::graded(128, 2);
    auto ua = solve_direct(a, grid), ub = solve_direct(b, grid), uc = solve_direct(c, grid);
    for (std::size_t i = 0; i < ua.values.size(); ++i)
        EXPECT_NEAR(uc.values[i], ua.values[i] - 2.5 * ub.values[i], 1e-12);
}

TEST(Solve, SymmetricForcingGivesSymmetricSolution) {
    auto sol = solve_direct(plain(0.35), Grid1D::uniform(100));
    const auto& v = sol.values;
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], v[v.size() - 1 - i], 1e-12);
}

TEST(FixedPoint, AgreesWithDirect) {
    Problem1D pb = plain(0.25);
    auto grid = Grid1D::uniform(512);
    auto d = solve_direct(pb, grid);
    auto f = solve_fixed_point(pb, grid);
    EXPECT_GT(f.stats.iterations, 1);
    EXPECT_LT(f.stats.iterations, 500);
    for (std::size_t i = 0; i < d.values.size(); ++i) EXPECT_NEAR(f.values[i], d.values[i], 1e-9);
}

TEST(FixedPoint, ConstantMapConvergesImmediately) {
    Problem1D pb = plain(0.25);
    pb.q_fn = [](double) { return 0.0; };
    EXPECT_EQ(solve_fixed_point(pb, Grid1D::uniform(64)).stats.iterations, 1);
}

TEST(FixedPoint, DivergenceIsSignalled) {
    Problem1D pb = plain(0.9);
    pb.q_fn = [](double) { return 10.0; };
    try {
        solve_fixed_point(pb, Grid1D::uniform(128), 1.0, 200);
        FAIL() << "expected divergence";
    } catch (const FixedPointError& e) {
        EXPECT_FALSE(e.history.empty());
    }
    EXPECT_THROW(solve_fixed_point(pb, Grid1D::uniform(16), 0.0), DomainError);
    EXPECT_THROW(solve_fixed_point(pb, Grid1D::uniform(16), 1.0, 0), DomainError);
}

TEST(Comparison, NonNegativeForcing) {
    auto rep = comparison_check(plain(0.6), Grid1D::uniform(512), 100);
    EXPECT_TRUE(rep.all_nonnegative);
    EXPECT_GE(rep.min_over_trials, -1e-10);
    EXPECT_TRUE(rep.violations.empty());
    auto again = comparison_check(plain(0.6), Grid1D::uniform(512), 100);
    EXPECT_EQ(again.min_over_trials, rep.min_over_trials);
}

TEST(Comparison, NegativeBumpIsDetected) {
    auto grid = Grid1D::uniform(256);
    std::mt19937_64 rng(5);
    int negative = 0;
    for (int t = 0; t < 20; ++t) {
        Problem1D pb = plain(0.6);
        pb.f_fn = bumps_function(random_bumps(rng, true));
        auto sol = solve_direct(pb, grid);
        if (*std::min_element(sol.values.begin(), sol.values.end()) < -1e-10) ++negative;
    }
    EXPECT_GT(negative, 0);
}

TEST(Comparison, BumpsAreSeeded) {
    std::mt19937_64 a(11), b(11);
    auto x = random_bumps(a), y = random_bumps(b);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].center, y[i].center);
    for (const auto& bump : x) {
        EXPECT_GE(bump.amplitude, 0.1);
        EXPECT_LE(bump.amplitude, 1.0);
    }
}

TEST(Growth, StableUnderRefinement) {
    auto one = [](double) { return 1.0; };
    auto a = linear_growth_check(solve_direct(plain(0.6), Grid1D::uniform(512)), one);
    auto b = linear_growth_check(solve_direct(plain(0.6), Grid1D::uniform(1024)), one);
    EXPECT_FALSE(a.inconsistent);
    EXPECT_NEAR(a.c01_norm_over_fplus, b.c01_norm_over_fplus, 0.1 * b.c01_norm_over_fplus);
}

TEST(Growth, FlagsInconsistentData) {
    auto sol = solve_direct(plain(0.6), Grid1D::uniform(32));
    std::vector<double> zero(sol.values.size(), -1.0);
    auto g = linear_growth_check(sol, zero);
    EXPECT_TRUE(g.inconsistent);
    EXPECT_TRUE(std::isinf(g.c01_norm_over_fplus));
    EXPECT_THROW(linear_growth_check(sol, std::vector<double>(3, 1.0)), DomainError);
}

TEST(Boundary, HessianBlowUpForLargeOrder) {
    auto sol = solve_direct(plain(0.75), Grid1D::graded(512, 2));
    auto fit = boundary_hessian_fit(sol, 10 * sol.grid.h_min(), 0.05);
    EXPECT_NEAR(fit.slope, -0.5, 0.1);
    auto uni = solve_direct(plain(0.75), Grid1D::uniform(512));
    EXPECT_THROW(boundary_hessian_fit(uni, 10 * uni.grid.h_min(), 0.05), DegenerateFit);
}

TEST(Boundary, HessianBoundedForSmallOrder) {
    auto sol = solve_direct(plain(0.25), Grid1D::uniform(1024));
    auto xs = sol.nodes();
    double edge = 0, interior = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double d = std::min(xs[i], 1 - xs[i]);
        if (d < 0.05) edge = std::max(edge, std::abs(sol.d2u[i]));
        if (d > 0.2) interior = std::max(interior, std::abs(sol.d2u[i]));
    }
    EXPECT_LE(edge, 2 * interior);
}

TEST(WeightedPoisson, ClosedFormPower) {
    const double g = 0.5;
    auto res = solve_weighted_poisson_1d([g](double x) { return std::pow(x, -g); }, 1.0, g, 0.5);
    for (double x : {1e-5, 1e-3, 0.1, 0.5, 0.9, 1 - 1e-4}) {
        double exact = (x - std::pow(x, 2 - g)) / ((1 - g) * (2 - g));
        EXPECT_NEAR(res.u(x), exact, 1e-8) << x;
        EXPECT_NEAR(res.du(x), (1 - (2 - g) * std::pow(x, 1 - g)) / ((1 - g) * (2 - g)), 1e-8) << x;
    }
    EXPECT_TRUE(std::isfinite(res.ratio));
    EXPECT_GT(res.ratio, 0);
}

TEST(WeightedPoisson, PerturbedRatioStable) {
    auto f = [](double x) {
        double d = std::min(x, 1 - x);
        return std::pow(d, -0.5) * (1 + 0.3 * std::sin(7 * x));
    };
    auto a = solve_weighted_poisson_1d(f, 1.3, 0.5, 0.5, 100);
    auto b = solve_weighted_poisson_1d(f, 1.3, 0.5, 0.5, 200);
    EXPECT_TRUE(std::isfinite(a.ratio));
    EXPECT_NEAR(a.ratio, b.ratio, 0.1 * b.ratio);
}

TEST(WeightedPoisson, EnvelopeAndParameters) {
    auto f = [](double x) { return std::pow(x, -0.9); };
    EXPECT_THROW(solve_weighted_poisson_1d(f, 1.0, 0.5, 0.5), ModelError);
    auto one = [](double) { return 1.0; };
    EXPECT_THROW(solve_weighted_poisson_1d(one, 1.0, 1.0, 0.5), DomainError);
    EXPECT_THROW(solve_weighted_poisson_1d(one, 1.0, 0.5, 0.0), DomainError);
    EXPECT_THROW(solve_weighted_poisson_1d(one, 0.0, 0.5, 0.5), DomainError);
}

TEST(Output, CsvAndJson) {
    auto sol = solve_direct(plain(0.5), Grid1D::uniform(8));
    std::ostringstream os;
    write_csv(sol, os);
    std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "x,u,du,d2u,d");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
    auto j = to_json(sol.stats);
    EXPECT_EQ(j["iterations"], 0);
    EXPECT_TRUE(j["condition_estimate"].is_number());
    auto fp = solve_fixed_point(plain(0.5), Grid1D::uniform(8));
    EXPECT_TRUE(to_json(fp.stats)["condition_estimate"].is_null());
    auto sf = sol.sampled();
    EXPECT_EQ(sf.xs.size(), 7u);
    EXPECT_TRUE(sf.d2.has_value());
}
