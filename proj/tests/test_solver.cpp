#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "flex/conic.hpp"
#include "flex/errors.hpp"
#include "flex/rng.hpp"

using namespace flex;

namespace {

// Brute-force LP oracle: enumerate vertices of {x : A x <= b} in R^3 and
// return the best objective value among feasible vertices.
struct Lp3 {
    std::vector<Vec> rows;  // a'x <= rhs
    std::vector<double> rhs;
    Vec c;                  // maximize c'x
};

double vertex_enumeration_max(const Lp3& lp) {
    const int m = static_cast<int>(lp.rows.size());
    double best = -kInf;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            for (int k = j + 1; k < m; ++k) {
                Mat a(3, 3);
                a.row(0) = lp.rows[i].transpose();
                a.row(1) = lp.rows[j].transpose();
                a.row(2) = lp.rows[k].transpose();
                Eigen::FullPivLU<Mat> lu(a);
                if (!lu.isInvertible()) continue;
                Vec v(3);
                v << lp.rhs[i], lp.rhs[j], lp.rhs[k];
                Vec x = lu.solve(v);
                bool feas = true;
                for (int r = 0; r < m && feas; ++r)
                    feas = lp.rows[r].dot(x) <= lp.rhs[r] + 1e-9;
                if (feas) best = std::max(best, lp.c.dot(x));
            }
    return best;
}

} // namespace

TEST_CASE("solver: trivial bound maximization") {
    ConicProgram p;
    p.sense = Sense::Maximize;
    p.add_var(-kInf, 3.0, 1.0);
    Solution sol = solve(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("solver: equality plus inequality") {
    // min x s.t. x + y = 1, y <= 0.3  ->  x = 0.7
    ConicProgram p;
    int x = p.add_var(-kInf, kInf, 1.0);
    int y = p.add_var(-kInf, 0.3);
    int r = p.add_row(1.0, 1.0);
    p.add_coeff(r, x, 1.0);
    p.add_coeff(r, y, 1.0);
    Solution sol = solve(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x[x] == doctest::Approx(0.7).epsilon(1e-7));
}

TEST_CASE("solver: cone example with bisection oracle") {
    // min x s.t. ||(x-1, 2)|| <= x + 3; analytic optimum x = -0.5.
    ConicProgram p;
    int x = p.add_var(-kInf, kInf, 1.0);
    int cone = p.add_cone(2);
    p.cone_vector_entry(cone, 0, x, 1.0);
    p.cone_vector_offset(cone, 0, -1.0);
    p.cone_vector_offset(cone, 1, 2.0);
    p.cone_scalar_entry(cone, x, 1.0);
    p.cone_scalar_offset(cone, 3.0);
    Solution sol = solve(p);
    REQUIRE(sol.status == SolveStatus::Optimal);

    // Bisection on feasibility of ||(t-1,2)|| <= t+3 for the smallest t.
    auto feasible = [](double t) {
        return std::hypot(t - 1.0, 2.0) <= t + 3.0;
    };
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    CHECK(sol.x[x] == doctest::Approx(hi).epsilon(1e-6));
    // Optimum sits on the cone boundary.
    double lhs = std::hypot(sol.x[x] - 1.0, 2.0);
    double rhs = sol.x[x] + 3.0;
    CHECK(std::abs(lhs - rhs) <= 1e-5);
}

TEST_CASE("solver: infeasible linear system is detected") {
    ConicProgram p;
    int x = p.add_var(1.0, kInf, 1.0);  // x >= 1
    int r = p.add_row(-kInf, 0.0);      // x <= 0
    p.add_coeff(r, x, 1.0);
    Solution sol = solve(p);
    CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("solver: unbounded problem is detected") {
    ConicProgram p;
    p.sense = Sense::Maximize;
    p.add_var(1.0, kInf, 1.0);
    Solution sol = solve(p);
    CHECK(sol.status == SolveStatus::Unbounded);
}

TEST_CASE("solver: random 3-variable LPs match vertex enumeration") {
    Rng rng(404);
    int solved = 0;
    for (int trial = 0; trial < 40; ++trial) {
        Lp3 lp;
        lp.c = rng.normal_vec(3);
        // Box to keep the region bounded, plus random cuts.
        for (int i = 0; i < 3; ++i) {
            Vec e = Vec::Zero(3);
            e[i] = 1.0;
            lp.rows.push_back(e);
            lp.rhs.push_back(rng.uniform(0.5, 3.0));
            lp.rows.push_back(-e);
            lp.rhs.push_back(rng.uniform(0.5, 3.0));
        }
        for (int i = 0; i < 4; ++i) {
            lp.rows.push_back(rng.normal_vec(3));
            lp.rhs.push_back(rng.uniform(0.2, 2.0));
        }
        double oracle = vertex_enumeration_max(lp);

        ConicProgram p;
        p.sense = Sense::Maximize;
        for (int i = 0; i < 3; ++i) p.add_var(-kInf, kInf, lp.c[i]);
        for (std::size_t r = 0; r < lp.rows.size(); ++r) {
            int row = p.add_row(-kInf, lp.rhs[r]);
            for (int i = 0; i < 3; ++i) p.add_coeff(row, i, lp.rows[r][i]);
        }
        Solution sol = solve(p);
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(sol.objective == doctest::Approx(oracle).epsilon(1e-6));
        ++solved;
    }
    CHECK(solved == 40);
}

TEST_CASE("solver: positive objective scaling leaves the maximizer unchanged") {
    Rng rng(7);
    ConicProgram p;
    p.sense = Sense::Maximize;
    for (int i = 0; i < 4; ++i) p.add_var(0.0, rng.uniform(1.0, 2.0), rng.uniform(0.5, 2.0));
    int row = p.add_row(-kInf, 2.5);
    for (int i = 0; i < 4; ++i) p.add_coeff(row, i, 1.0);
    Solution s1 = solve(p);
    REQUIRE(s1.status == SolveStatus::Optimal);

    ConicProgram p2 = p;
    for (int i = 0; i < 4; ++i) p2.set_objective(i, 17.0 * p.objective()[i]);
    Solution s2 = solve(p2);
    REQUIRE(s2.status == SolveStatus::Optimal);
    CHECK((s1.x - s2.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(s2.objective == doctest::Approx(17.0 * s1.objective).epsilon(1e-7));
}

TEST_CASE("solver: determinism of repeated solves") {
    ConicProgram p;
    p.sense = Sense::Maximize;
    Rng rng(123);
    for (int i = 0; i < 6; ++i) p.add_var(0.0, 1.0, rng.normal());
    for (int r = 0; r < 4; ++r) {
        int row = p.add_row(-kInf, rng.uniform(0.5, 2.0));
        for (int i = 0; i < 6; ++i) p.add_coeff(row, i, rng.normal());
    }
    Solution a = solve(p);
    Solution b = solve(p);
    REQUIRE(a.status == SolveStatus::Optimal);
    CHECK(a.objective == b.objective);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solver: larger random SOCP agrees with a penalized LP relaxation check") {
    // max 1'x s.t. sum x <= 10, ||x - x0|| <= t, t <= r. The optimum equals
    // min(10, 1'x0 + sqrt(n) r) by Cauchy-Schwarz; choose data so the cone binds.
    const int n = 8;
    Rng rng(5);
    Vec x0 = rng.normal_vec(n);
    double radius = 0.7;
    ConicProgram p;
    p.sense = Sense::Maximize;
    for (int i = 0; i < n; ++i) p.add_var(-kInf, kInf, 1.0);
    int t = p.add_var(0.0, radius, 0.0);
    int row = p.add_row(-kInf, 1000.0);
    for (int i = 0; i < n; ++i) p.add_coeff(row, i, 1.0);
    int cone = p.add_cone(n);
    for (int i = 0; i < n; ++i) {
        p.cone_vector_entry(cone, i, i, 1.0);
        p.cone_vector_offset(cone, i, -x0[i]);
    }
    p.cone_scalar_entry(cone, t, 1.0);
    Solution sol = solve(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    double expected = x0.sum() + std::sqrt(double(n)) * radius;
    CHECK(sol.objective == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("conic program: validation and LP dump") {
    ConicProgram p;
    int x = p.add_var(0.0, 1.0, 1.0);
    int r = p.add_row(-kInf, 2.0);
    p.add_coeff(r, x, 1.0);
    CHECK_NOTHROW(p.validate());
    std::ostringstream os;
    p.dump_lp(os, "demo");
    CHECK(os.str().find("Subject To") != std::string::npos);

    ConicProgram bad;
    bad.add_var();
    int rr = bad.add_row(0.0, 0.0);
    bad.add_coeff(rr, 0, 1.0);
    bad.row_coeffs();
    ConicProgram bad2 = bad;
    int c2 = bad2.add_cone(1);
    bad2.cone_vector_entry(c2, 0, 7, 1.0);  // bad variable index
    CHECK_THROWS_AS(bad2.validate(), DimensionMismatch);
}

TEST_CASE("solve_or_throw surfaces infeasibility as SolverFailure") {
    ConicProgram p;
    int x = p.add_var(1.0, kInf, 1.0);
    int r = p.add_row(-kInf, 0.0);
    p.add_coeff(r, x, 1.0);
    CHECK_THROWS_AS(solve_or_throw(p, "demo"), SolverFailure);
}
