#pragma once

#include <string>
#include <vector>

namespace hetplan {

// Minimal dense LP solver for the small fractional-assignment and bound
// problems this planner produces (tens of variables). Minimizes c.x subject
// to equality and <= rows over x >= 0.
//
// Dual convention: for any feasible x, sum_i dual_i*b_i <= c.x, with
// dual_i <= 0 on <= rows and A^T dual <= c componentwise. Equality at the
// optimum (strong duality) is what the tests certify.
struct LpProblem {
    enum class RowType { LessEq, Eq };
    struct Row {
        std::vector<double> coeffs;
        double rhs = 0;
        RowType type = RowType::LessEq;
    };

    int num_vars = 0;
    std::vector<double> objective;
    std::vector<Row> rows;

    void add_row(std::vector<double> coeffs, double rhs, RowType type);
};

struct LpSolution {
    enum class Status { Optimal, Infeasible, Unbounded };
    Status status = Status::Infeasible;
    double objective = 0;
    std::vector<double> x;
    std::vector<double> dual;  // one per row
};

LpSolution solve_lp(const LpProblem& problem);

}  // namespace hetplan
