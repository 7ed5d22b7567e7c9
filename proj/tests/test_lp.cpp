#include <doctest.h>

#include <cmath>
#include <random>

#include "hetplan/lp.hpp"

using namespace hetplan;

namespace {

// Independent optimality certificate: primal feasibility, dual feasibility
// (dual <= 0 on <= rows, A^T dual <= c), and strong duality.
void check_certificate(const LpProblem& lp, const LpSolution& sol, double tol = 1e-7) {
    REQUIRE(sol.status == LpSolution::Status::Optimal);
    for (int j = 0; j < lp.num_vars; ++j) {
        CHECK(sol.x[static_cast<size_t>(j)] >= -tol);
    }
    for (const auto& row : lp.rows) {
        double lhs = 0;
        for (int j = 0; j < lp.num_vars; ++j) {
            lhs += row.coeffs[static_cast<size_t>(j)] * sol.x[static_cast<size_t>(j)];
        }
        const double slack_tol = tol * (1 + std::abs(row.rhs));
        if (row.type == LpProblem::RowType::Eq) {
            CHECK(std::abs(lhs - row.rhs) <= slack_tol);
        } else {
            CHECK(lhs <= row.rhs + slack_tol);
        }
    }
    double dual_obj = 0;
    for (size_t i = 0; i < lp.rows.size(); ++i) {
        dual_obj += sol.dual[i] * lp.rows[i].rhs;
        if (lp.rows[i].type == LpProblem::RowType::LessEq) CHECK(sol.dual[i] <= tol);
    }
    for (int j = 0; j < lp.num_vars; ++j) {
        double col = 0;
        for (size_t i = 0; i < lp.rows.size(); ++i) {
            col += sol.dual[i] * lp.rows[i].coeffs[static_cast<size_t>(j)];
        }
        CHECK(col <= lp.objective[static_cast<size_t>(j)] + tol);
    }
    CHECK(dual_obj == doctest::Approx(sol.objective).epsilon(1e-6));
}

}  // namespace

TEST_CASE("lp solves a textbook two-variable problem") {
    // min -x - 2y, x + y <= 4, x <= 3, y <= 2  ->  x=2, y=2, obj=-6
    LpProblem lp;
    lp.num_vars = 2;
    lp.objective = {-1, -2};
    lp.add_row({1, 1}, 4, LpProblem::RowType::LessEq);
    lp.add_row({1, 0}, 3, LpProblem::RowType::LessEq);
    lp.add_row({0, 1}, 2, LpProblem::RowType::LessEq);
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpSolution::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(-6));
    CHECK(sol.x[0] == doctest::Approx(2));
    CHECK(sol.x[1] == doctest::Approx(2));
    check_certificate(lp, sol);
}

TEST_CASE("lp handles equality constraints") {
    // min x + y, x + 2y = 3, x,y >= 0 -> y=1.5, obj=1.5
    LpProblem lp;
    lp.num_vars = 2;
    lp.objective = {1, 1};
    lp.add_row({1, 2}, 3, LpProblem::RowType::Eq);
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpSolution::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(1.5));
    check_certificate(lp, sol);
}

TEST_CASE("lp reports infeasibility") {
    LpProblem lp;
    lp.num_vars = 1;
    lp.objective = {1};
    lp.add_row({1}, 2, LpProblem::RowType::Eq);
    lp.add_row({1}, 1, LpProblem::RowType::LessEq);
    CHECK(solve_lp(lp).status == LpSolution::Status::Infeasible);
}

TEST_CASE("lp reports unboundedness") {
    LpProblem lp;
    lp.num_vars = 2;
    lp.objective = {-1, 0};
    lp.add_row({0, 1}, 1, LpProblem::RowType::LessEq);
    CHECK(solve_lp(lp).status == LpSolution::Status::Unbounded);
}

TEST_CASE("lp handles negative rhs rows") {
    // min x subject to -x <= -2, i.e. x >= 2
    LpProblem lp;
    lp.num_vars = 1;
    lp.objective = {1};
    lp.add_row({-1}, -2, LpProblem::RowType::LessEq);
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpSolution::Status::Optimal);
    CHECK(sol.objective == doctest::Approx(2));
    check_certificate(lp, sol);
}

TEST_CASE("random makespan-shaped LPs carry valid optimality certificates") {
    std::mt19937_64 rng(20250810);
    std::uniform_real_distribution<double> rate(0.1, 5.0);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    for (int iter = 0; iter < 200; ++iter) {
        const int configs = 1 + static_cast<int>(rng() % 4);
        const int classes = 1 + static_cast<int>(rng() % 3);
        // vars: x[c][w] row-major, then T; min T
        LpProblem lp;
        lp.num_vars = configs * classes + 1;
        lp.objective.assign(static_cast<size_t>(lp.num_vars), 0.0);
        lp.objective.back() = 1.0;
        for (int w = 0; w < classes; ++w) {
            std::vector<double> row(static_cast<size_t>(lp.num_vars), 0.0);
            for (int c = 0; c < configs; ++c) row[static_cast<size_t>(c * classes + w)] = 1.0;
            lp.add_row(std::move(row), 1.0, LpProblem::RowType::Eq);
        }
        for (int c = 0; c < configs; ++c) {
            std::vector<double> row(static_cast<size_t>(lp.num_vars), 0.0);
            for (int w = 0; w < classes; ++w) {
                row[static_cast<size_t>(c * classes + w)] = (1 + 200 * frac(rng)) / rate(rng);
            }
            row.back() = -1.0;
            lp.add_row(std::move(row), 0.0, LpProblem::RowType::LessEq);
        }
        const auto sol = solve_lp(lp);
        check_certificate(lp, sol);
    }
}
