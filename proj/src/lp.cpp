#include "hetplan/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hetplan/common.hpp"

namespace hetplan {

namespace {
constexpr double kEps = 1e-9;
}

void LpProblem::add_row(std::vector<double> coeffs, double rhs, RowType type) {
    if (static_cast<int>(coeffs.size()) != num_vars) {
        throw Error("LpProblem: row width does not match num_vars");
    }
    rows.push_back({std::move(coeffs), rhs, type});
}

// Tableau simplex, two phases, Bland's rule. Column layout:
//   [0, n)            original variables
//   [n, n+m)          one slack or artificial per row
// Rows are pre-scaled so every rhs is non-negative. <= rows that were not
// flipped get a slack usable as the initial basis; flipped <= rows get a
// surplus column (coefficient -1) plus an artificial; equality rows get an
// artificial. Artificials never re-enter in phase 2, and their reduced costs
// expose the row duals.
LpSolution solve_lp(const LpProblem& problem) {
    const int n = problem.num_vars;
    const int m = static_cast<int>(problem.rows.size());

    std::vector<double> row_sign(m, 1.0);
    std::vector<int> surplus_col(m, -1);
    std::vector<int> basis_col(m, -1);  // slack or artificial owning row i
    std::vector<bool> is_artificial;

    int cols = n;
    std::vector<std::vector<double>> a(m);
    std::vector<double> b(m);

    for (int i = 0; i < m; ++i) {
        const auto& row = problem.rows[i];
        row_sign[i] = row.rhs < 0 ? -1.0 : 1.0;
        a[i].assign(row.coeffs.begin(), row.coeffs.end());
        for (double& v : a[i]) v *= row_sign[i];
        b[i] = row.rhs * row_sign[i];
    }
    // Allocate extra columns: surplus for flipped <= rows, then basis column.
    for (int i = 0; i < m; ++i) {
        const auto& row = problem.rows[i];
        const bool flipped = row_sign[i] < 0;
        if (row.type == LpProblem::RowType::LessEq && flipped) surplus_col[i] = cols++;
    }
    is_artificial.assign(static_cast<size_t>(cols), false);
    for (int i = 0; i < m; ++i) {
        const auto& row = problem.rows[i];
        const bool flipped = row_sign[i] < 0;
        basis_col[i] = cols++;
        const bool artificial = row.type == LpProblem::RowType::Eq || flipped;
        is_artificial.push_back(artificial);
    }

    std::vector<std::vector<double>> t(m, std::vector<double>(static_cast<size_t>(cols), 0.0));
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) t[i][static_cast<size_t>(j)] = a[i][static_cast<size_t>(j)];
        if (surplus_col[i] >= 0) t[i][static_cast<size_t>(surplus_col[i])] = -1.0;
        t[i][static_cast<size_t>(basis_col[i])] = 1.0;
        basis[i] = basis_col[i];
    }

    auto pivot = [&](int prow, int pcol) {
        const double pv = t[prow][static_cast<size_t>(pcol)];
        for (double& v : t[prow]) v /= pv;
        b[prow] /= pv;
        for (int i = 0; i < m; ++i) {
            if (i == prow) continue;
            const double factor = t[i][static_cast<size_t>(pcol)];
            if (factor == 0.0) continue;
            for (int j = 0; j < cols; ++j) {
                t[i][static_cast<size_t>(j)] -= factor * t[prow][static_cast<size_t>(j)];
            }
            b[i] -= factor * b[prow];
        }
        basis[prow] = pcol;
    };

    // Runs simplex for the cost vector and returns reduced costs; `allowed`
    // filters entering columns.
    std::vector<double> reduced(static_cast<size_t>(cols), 0.0);
    auto run = [&](const std::vector<double>& cost, auto allowed) -> bool {
        while (true) {
            // reduced costs: c_j - c_B . column_j
            for (int j = 0; j < cols; ++j) {
                double v = cost[static_cast<size_t>(j)];
                for (int i = 0; i < m; ++i) {
                    const double cb = cost[static_cast<size_t>(basis[i])];
                    if (cb != 0.0) v -= cb * t[i][static_cast<size_t>(j)];
                }
                reduced[static_cast<size_t>(j)] = v;
            }
            int entering = -1;
            for (int j = 0; j < cols; ++j) {  // Bland: lowest index
                if (!allowed(j)) continue;
                if (reduced[static_cast<size_t>(j)] < -kEps) {
                    entering = j;
                    break;
                }
            }
            if (entering < 0) return true;  // optimal
            int leaving = -1;
            double best_ratio = 0;
            for (int i = 0; i < m; ++i) {
                const double aij = t[i][static_cast<size_t>(entering)];
                if (aij > kEps) {
                    const double ratio = b[i] / aij;
                    if (leaving < 0 || ratio < best_ratio - kEps ||
                        (std::abs(ratio - best_ratio) <= kEps && basis[i] < basis[leaving])) {
                        leaving = i;
                        best_ratio = ratio;
                    }
                }
            }
            if (leaving < 0) return false;  // unbounded direction
            pivot(leaving, entering);
        }
    };

    LpSolution sol;

    bool need_phase1 = false;
    for (int i = 0; i < m; ++i) need_phase1 |= is_artificial[static_cast<size_t>(basis_col[i])];
    if (need_phase1) {
        std::vector<double> phase1_cost(static_cast<size_t>(cols), 0.0);
        for (int j = 0; j < cols; ++j) {
            if (is_artificial[static_cast<size_t>(j)]) phase1_cost[static_cast<size_t>(j)] = 1.0;
        }
        run(phase1_cost, [](int) { return true; });
        double infeas = 0;
        for (int i = 0; i < m; ++i) {
            if (is_artificial[static_cast<size_t>(basis[i])]) infeas += b[i];
        }
        if (infeas > 1e-7) {
            sol.status = LpSolution::Status::Infeasible;
            return sol;
        }
        // Drive lingering artificials out of the basis where possible.
        for (int i = 0; i < m; ++i) {
            if (!is_artificial[static_cast<size_t>(basis[i])]) continue;
            for (int j = 0; j < cols; ++j) {
                if (is_artificial[static_cast<size_t>(j)]) continue;
                if (std::abs(t[i][static_cast<size_t>(j)]) > 1e-7) {
                    pivot(i, j);
                    break;
                }
            }
        }
    }

    std::vector<double> cost(static_cast<size_t>(cols), 0.0);
    for (int j = 0; j < n; ++j) cost[static_cast<size_t>(j)] = problem.objective[static_cast<size_t>(j)];
    const bool bounded = run(cost, [&](int j) {
        if (is_artificial[static_cast<size_t>(j)]) return false;  // barred in phase 2
        return true;
    });
    if (!bounded) {
        sol.status = LpSolution::Status::Unbounded;
        return sol;
    }

    sol.status = LpSolution::Status::Optimal;
    sol.x.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) sol.x[static_cast<size_t>(basis[i])] = b[i];
    }
    sol.objective = 0;
    for (int j = 0; j < n; ++j) {
        sol.objective += problem.objective[static_cast<size_t>(j)] * sol.x[static_cast<size_t>(j)];
    }
    // Row dual = -(reduced cost of the row's slack/artificial column), sign
    // restored for rows that were flipped to make rhs non-negative.
    sol.dual.assign(static_cast<size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        sol.dual[static_cast<size_t>(i)] =
            -reduced[static_cast<size_t>(basis_col[i])] * row_sign[i];
    }
    return sol;
}

}  // namespace hetplan
