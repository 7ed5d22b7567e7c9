#include "hetplan/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "hetplan/lp.hpp"

namespace hetplan {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double tie_eps(double scale) {
    if (!std::isfinite(scale)) return kInf;
    return 1e-9 * std::max(1.0, scale);
}

struct DemandedPair {
    std::string model;
    int workload = 0;
    double count = 0;
};

std::vector<DemandedPair> demanded_pairs(const DemandMatrix& demand) {
    std::vector<DemandedPair> pairs;
    for (const auto& [key, count] : demand.f) {
        if (count > 0) pairs.push_back({key.first, key.second, count});
    }
    return pairs;
}

// Problem view shared by the exact search, the feasibility decision and the
// bounds: configs in branching order (descending cost, then id), per-config
// serve sets over the demanded pairs.
struct Instance {
    std::vector<const Configuration*> configs;
    const ThroughputTable* table = nullptr;
    std::vector<DemandedPair> pairs;
    double budget = 0;
    std::map<std::string, int> avail;
    std::vector<std::vector<int>> serves;         // config k -> pair indices it can serve
    std::vector<std::vector<bool>> suffix_cover;  // pairs coverable by configs k..end

    int find_config(const std::string& id) const {
        for (size_t k = 0; k < configs.size(); ++k) {
            if (configs[k]->id == id) return static_cast<int>(k);
        }
        return -1;
    }
};

Instance build_instance(const std::vector<Configuration>& configs, const ThroughputTable& table,
                        const DemandMatrix& demand, const Budget& budget,
                        const Availability& availability) {
    Instance inst;
    inst.table = &table;
    inst.pairs = demanded_pairs(demand);
    inst.budget = budget.limit;
    inst.avail = availability.counts;

    for (const auto& c : configs) {
        bool useful = false;
        for (const auto& p : inst.pairs) {
            if (p.model == c.model && table.has(c.id, p.workload)) useful = true;
        }
        if (useful) inst.configs.push_back(&c);
    }
    std::sort(inst.configs.begin(), inst.configs.end(),
              [](const Configuration* a, const Configuration* b) {
                  if (a->cost != b->cost) return a->cost > b->cost;
                  return a->id < b->id;
              });

    inst.serves.resize(inst.configs.size());
    for (size_t k = 0; k < inst.configs.size(); ++k) {
        for (size_t p = 0; p < inst.pairs.size(); ++p) {
            if (inst.pairs[p].model == inst.configs[k]->model &&
                table.has(inst.configs[k]->id, inst.pairs[p].workload)) {
                inst.serves[k].push_back(static_cast<int>(p));
            }
        }
    }
    inst.suffix_cover.assign(inst.configs.size() + 1,
                             std::vector<bool>(inst.pairs.size(), false));
    for (int k = static_cast<int>(inst.configs.size()) - 1; k >= 0; --k) {
        inst.suffix_cover[static_cast<size_t>(k)] = inst.suffix_cover[static_cast<size_t>(k) + 1];
        for (int p : inst.serves[static_cast<size_t>(k)]) {
            inst.suffix_cover[static_cast<size_t>(k)][static_cast<size_t>(p)] = true;
        }
    }
    return inst;
}

int max_copies(const Instance& inst, size_t k, double rem_budget,
               const std::map<std::string, int>& rem_avail) {
    const Configuration* c = inst.configs[k];
    int ymax = c->cost > 0 ? static_cast<int>(std::floor(rem_budget / c->cost + 1e-9))
                           : std::numeric_limits<int>::max();
    for (const auto& [type, count] : c->gpu_counts) {
        auto it = rem_avail.find(type);
        const int have = it == rem_avail.end() ? 0 : it->second;
        if (count > 0) ymax = std::min(ymax, have / count);
    }
    return std::max(0, ymax);
}

AssignmentResult assign_lp(const std::vector<std::pair<const Configuration*, int>>& active,
                           const ThroughputTable& table, const std::vector<DemandedPair>& pairs,
                           SolveStats* stats) {
    // Variables: one x per (active config, servable demanded pair), then T.
    struct Var {
        size_t config_idx;
        size_t pair_idx;
    };
    std::vector<Var> vars;
    std::vector<std::vector<int>> pair_vars(pairs.size());
    std::vector<std::vector<int>> config_vars(active.size());
    for (size_t a = 0; a < active.size(); ++a) {
        for (size_t p = 0; p < pairs.size(); ++p) {
            if (pairs[p].model == active[a].first->model &&
                table.has(active[a].first->id, pairs[p].workload)) {
                pair_vars[p].push_back(static_cast<int>(vars.size()));
                config_vars[a].push_back(static_cast<int>(vars.size()));
                vars.push_back({a, p});
            }
        }
    }
    for (size_t p = 0; p < pairs.size(); ++p) {
        if (pair_vars[p].empty()) {
            throw Error(cat("workload class (", pairs[p].model, ", w", pairs[p].workload,
                            ") is not servable by any active configuration"));
        }
    }

    LpProblem lp;
    lp.num_vars = static_cast<int>(vars.size()) + 1;
    const int t_var = static_cast<int>(vars.size());
    lp.objective.assign(static_cast<size_t>(lp.num_vars), 0.0);
    lp.objective[static_cast<size_t>(t_var)] = 1.0;

    for (size_t p = 0; p < pairs.size(); ++p) {
        std::vector<double> row(static_cast<size_t>(lp.num_vars), 0.0);
        for (int v : pair_vars[p]) row[static_cast<size_t>(v)] = 1.0;
        lp.add_row(std::move(row), 1.0, LpProblem::RowType::Eq);
    }
    for (size_t a = 0; a < active.size(); ++a) {
        std::vector<double> row(static_cast<size_t>(lp.num_vars), 0.0);
        for (int v : config_vars[a]) {
            const DemandedPair& p = pairs[vars[static_cast<size_t>(v)].pair_idx];
            const double rate = table.rate_at(active[a].first->id, p.workload);
            row[static_cast<size_t>(v)] = p.count / (active[a].second * rate);
        }
        row[static_cast<size_t>(t_var)] = -1.0;
        lp.add_row(std::move(row), 0.0, LpProblem::RowType::LessEq);
    }

    const LpSolution sol = solve_lp(lp);
    if (stats) stats->lp_calls += 1;
    if (sol.status != LpSolution::Status::Optimal) {
        throw Error("inner assignment LP did not solve; this indicates malformed rates");
    }

    AssignmentResult result;
    result.makespan = sol.objective;
    for (size_t v = 0; v < vars.size(); ++v) {
        const double x = std::max(0.0, sol.x[v]);
        if (x > 1e-12) {
            const auto& cfg = *active[vars[v].config_idx].first;
            const auto& p = pairs[vars[v].pair_idx];
            result.x[{cfg.id, p.model, p.workload}] = x;
        }
    }
    return result;
}

Plan make_plan(const std::vector<std::pair<const Configuration*, int>>& active,
               const AssignmentResult& assignment) {
    Plan plan;
    for (const auto& [config, count] : active) {
        if (count <= 0) continue;
        plan.activations[config->id] = count;
        plan.total_cost += config->cost * count;
        for (const auto& [type, used] : config->gpu_counts) {
            plan.gpu_usage[type] += used * count;
        }
    }
    plan.assignment = assignment.x;
    plan.makespan = assignment.makespan;
    return plan;
}

// Plan ordering for equal-makespan ties: lower cost, fewer GPUs, then the
// lexicographically smaller (config id, count) sequence.
bool plan_better(const Plan& a, const Plan& b) {
    const double eps = tie_eps(std::max(a.makespan, b.makespan));
    if (a.makespan < b.makespan - eps) return true;
    if (a.makespan > b.makespan + eps) return false;
    if (a.total_cost != b.total_cost) return a.total_cost < b.total_cost;
    if (a.total_gpus() != b.total_gpus()) return a.total_gpus() < b.total_gpus();
    auto ait = a.activations.begin();
    auto bit = b.activations.begin();
    while (ait != a.activations.end() && bit != b.activations.end()) {
        if (ait->first != bit->first) return ait->first < bit->first;
        if (ait->second != bit->second) return ait->second < bit->second;
        ++ait;
        ++bit;
    }
    return false;
}

struct SearchLimits {
    double wall_deadline = kInf;  // steady-clock seconds
    double lb_stop_at = 0;        // accept incumbent at or below this
};

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Depth-first search over integer activation vectors. In optimize mode it
// keeps the best complete vector; in decide mode it stops at the first
// vector whose optimal assignment meets `target`. Subtrees are bounded by an
// admissible relaxation: every undecided config activated at its individual
// maximum under the remaining budget and availability, which can only lower
// the inner-LP makespan relative to any real completion.
struct Search {
    const Instance& inst;
    SolveStats& stats;
    const SearchLimits& limits;

    bool decide_mode = false;
    double target = kInf;  // decide mode: makespan to meet

    std::optional<Plan> incumbent;
    double incumbent_T = kInf;
    bool hit_limit = false;
    bool done = false;

    std::vector<int> y;
    std::vector<int> cover_count;

    Search(const Instance& instance, SolveStats& s, const SearchLimits& lim)
        : inst(instance), stats(s), limits(lim) {
        y.assign(inst.configs.size(), 0);
        cover_count.assign(inst.pairs.size(), 0);
    }

    std::vector<std::pair<const Configuration*, int>> active_set(
        bool undecided_at_max, size_t next, double rem_budget,
        const std::map<std::string, int>& rem_avail) const {
        std::vector<std::pair<const Configuration*, int>> active;
        for (size_t k = 0; k < next; ++k) {
            if (y[k] > 0) active.push_back({inst.configs[k], y[k]});
        }
        if (undecided_at_max) {
            for (size_t k = next; k < inst.configs.size(); ++k) {
                const int ymax = max_copies(inst, k, rem_budget, rem_avail);
                if (ymax > 0) active.push_back({inst.configs[k], ymax});
            }
        }
        return active;
    }

    bool coverage_possible(size_t next) const {
        for (size_t p = 0; p < inst.pairs.size(); ++p) {
            if (cover_count[p] == 0 && !inst.suffix_cover[next][p]) return false;
        }
        return true;
    }

    void run() {
        std::map<std::string, int> avail = inst.avail;
        dfs(0, inst.budget, avail);
    }

    void dfs(size_t k, double rem_budget, std::map<std::string, int>& rem_avail) {
        if (done) return;
        if (now_seconds() > limits.wall_deadline) {
            hit_limit = true;
            return;
        }
        if (!coverage_possible(k)) return;

        if (k == inst.configs.size()) {
            for (size_t p = 0; p < inst.pairs.size(); ++p) {
                if (cover_count[p] == 0) return;
            }
            auto active = active_set(false, k, rem_budget, rem_avail);
            const AssignmentResult a = assign_lp(active, *inst.table, inst.pairs, &stats);
            stats.evaluated_vectors += 1;
            Plan plan = make_plan(active, a);
            if (decide_mode) {
                if (plan.makespan <= target * (1 + 1e-12) + 1e-12) {
                    incumbent = std::move(plan);
                    incumbent_T = a.makespan;
                    done = true;
                }
                return;
            }
            if (!incumbent || plan_better(plan, *incumbent)) {
                incumbent_T = plan.makespan;
                incumbent = std::move(plan);
                if (limits.lb_stop_at > 0 && incumbent_T <= limits.lb_stop_at) done = true;
            }
            return;
        }

        const int ymax = max_copies(inst, k, rem_budget, rem_avail);
        for (int count = ymax; count >= 0 && !done && !hit_limit; --count) {
            y[k] = count;
            if (count > 0) {
                for (int p : inst.serves[k]) cover_count[static_cast<size_t>(p)] += 1;
            }
            const double child_budget = rem_budget - count * inst.configs[k]->cost;
            for (const auto& [type, used] : inst.configs[k]->gpu_counts) {
                rem_avail[type] -= used * count;
            }

            bool descend = coverage_possible(k + 1);
            if (descend && k + 1 < inst.configs.size()) {
                auto relaxed = active_set(true, k + 1, child_budget, rem_avail);
                std::vector<bool> seen(inst.pairs.size(), false);
                for (const auto& [config, copies] : relaxed) {
                    (void)copies;
                    const int idx = inst.find_config(config->id);
                    for (int p : inst.serves[static_cast<size_t>(idx)]) {
                        seen[static_cast<size_t>(p)] = true;
                    }
                }
                for (size_t p = 0; p < inst.pairs.size(); ++p) descend &= seen[p];
                if (descend) {
                    const AssignmentResult bound =
                        assign_lp(relaxed, *inst.table, inst.pairs, &stats);
                    const double cutoff = decide_mode ? target : incumbent_T;
                    if (bound.makespan > cutoff + tie_eps(cutoff)) descend = false;
                }
            }
            if (descend) dfs(k + 1, child_budget, rem_avail);

            for (const auto& [type, used] : inst.configs[k]->gpu_counts) {
                rem_avail[type] += used * count;
            }
            if (count > 0) {
                for (int p : inst.serves[k]) cover_count[static_cast<size_t>(p)] -= 1;
            }
            y[k] = 0;
        }
    }
};

std::string diagnose_infeasibility(const Instance& inst) {
    for (const auto& p : inst.pairs) {
        bool servable = false;
        for (size_t k = 0; k < inst.configs.size(); ++k) {
            servable |= inst.configs[k]->model == p.model &&
                        inst.table->has(inst.configs[k]->id, p.workload);
        }
        if (!servable) {
            return cat("workload class (", p.model, ", w", p.workload,
                       ") has no profiled configuration");
        }
    }
    double cheapest = kInf;
    for (const auto* c : inst.configs) cheapest = std::min(cheapest, c->cost);
    if (cheapest > inst.budget) {
        return cat("budget ", inst.budget, " $/h is below the cheapest feasible configuration (",
                   cheapest, " $/h)");
    }
    // Availability-only relaxation tells budget and availability apart.
    Instance relaxed = inst;
    relaxed.budget = kInf;
    SolveStats scratch;
    SearchLimits limits;
    Search search(relaxed, scratch, limits);
    search.decide_mode = true;
    search.target = kInf;
    search.run();
    if (search.incumbent) {
        return "budget too small to cover all workload classes within availability";
    }
    return "GPU availability cannot cover all workload classes";
}

struct BoundsResult {
    double lower = 0;
    double upper = kInf;
    std::optional<Plan> upper_witness;
};

// Root lower bound plus a cheap feasible witness plan for the upper bound.
BoundsResult compute_bounds(const Instance& inst, SolveStats* stats) {
    BoundsResult bounds;

    // Lower bound: each class alone against the availability-constrained
    // best fleet, budget ignored. The continuous relaxation keeps it sound.
    for (const auto& p : inst.pairs) {
        std::vector<size_t> usable;
        for (size_t k = 0; k < inst.configs.size(); ++k) {
            if (inst.configs[k]->model == p.model &&
                inst.table->has(inst.configs[k]->id, p.workload)) {
                usable.push_back(k);
            }
        }
        if (usable.empty()) {
            throw InfeasibleError(cat("workload class (", p.model, ", w", p.workload,
                                      ") has no feasible configuration"));
        }
        std::set<std::string> types;
        for (size_t k : usable) {
            for (const auto& [type, count] : inst.configs[k]->gpu_counts) types.insert(type);
        }
        LpProblem lp;
        lp.num_vars = static_cast<int>(usable.size());
        lp.objective.assign(usable.size(), 0.0);
        for (size_t i = 0; i < usable.size(); ++i) {
            lp.objective[i] = -inst.table->rate_at(inst.configs[usable[i]]->id, p.workload);
        }
        for (const auto& type : types) {
            std::vector<double> row(usable.size(), 0.0);
            for (size_t i = 0; i < usable.size(); ++i) {
                auto it = inst.configs[usable[i]]->gpu_counts.find(type);
                if (it != inst.configs[usable[i]]->gpu_counts.end()) row[i] = it->second;
            }
            auto avail_it = inst.avail.find(type);
            const double limit = avail_it == inst.avail.end() ? 0 : avail_it->second;
            lp.add_row(std::move(row), limit, LpProblem::RowType::LessEq);
        }
        const LpSolution sol = solve_lp(lp);
        if (stats) stats->lp_calls += 1;
        const double rate_cap = sol.status == LpSolution::Status::Optimal ? -sol.objective : 0;
        if (!(rate_cap > 0)) {
            throw InfeasibleError(cat("workload class (", p.model, ", w", p.workload,
                                      ") cannot be served under current availability"));
        }
        bounds.lower = std::max(bounds.lower, p.count / rate_cap);
    }

    // Upper bound: cheapest single covering config per model, all that
    // model's requests at the config's worst rate. Falls back to a per-class
    // cover, then to any covering vector found by search.
    std::set<std::string> models;
    for (const auto& p : inst.pairs) models.insert(p.model);

    auto joint_ok = [&](const std::map<std::string, int>& act) {
        double cost = 0;
        std::map<std::string, int> used;
        for (const auto& [id, count] : act) {
            const int k = inst.find_config(id);
            if (k < 0) return false;
            cost += inst.configs[static_cast<size_t>(k)]->cost * count;
            for (const auto& [type, d] : inst.configs[static_cast<size_t>(k)]->gpu_counts) {
                used[type] += d * count;
            }
        }
        if (cost > inst.budget + 1e-9) return false;
        for (const auto& [type, d] : used) {
            auto it = inst.avail.find(type);
            if (d > (it == inst.avail.end() ? 0 : it->second)) return false;
        }
        return true;
    };

    std::map<std::string, int> activation;
    double formula_upper = 0;
    bool formula_ok = true;
    for (const auto& model : models) {
        const Configuration* best = nullptr;
        for (const auto* c : inst.configs) {
            if (c->model != model) continue;
            bool covers_all = true;
            for (const auto& p : inst.pairs) {
                if (p.model == model && !inst.table->has(c->id, p.workload)) covers_all = false;
            }
            if (!covers_all) continue;
            if (!best || c->cost < best->cost || (c->cost == best->cost && c->id < best->id)) {
                best = c;
            }
        }
        if (!best) {
            formula_ok = false;
            break;
        }
        activation[best->id] += 1;
        double total_f = 0, min_rate = kInf;
        for (const auto& p : inst.pairs) {
            if (p.model != model) continue;
            total_f += p.count;
            min_rate = std::min(min_rate, inst.table->rate_at(best->id, p.workload));
        }
        formula_upper += total_f / min_rate;
    }

    if (!(formula_ok && joint_ok(activation))) {
        activation.clear();
        formula_upper = 0;
        bool fallback_ok = true;
        std::set<std::string> chosen_ids;
        for (const auto& p : inst.pairs) {
            const Configuration* best = nullptr;
            for (const auto* c : inst.configs) {
                if (c->model != p.model || !inst.table->has(c->id, p.workload)) continue;
                if (!best || c->cost < best->cost || (c->cost == best->cost && c->id < best->id)) {
                    best = c;
                }
            }
            if (!best) {
                fallback_ok = false;
                break;
            }
            chosen_ids.insert(best->id);
            formula_upper += p.count / inst.table->rate_at(best->id, p.workload);
        }
        for (const auto& id : chosen_ids) activation[id] = 1;
        if (!(fallback_ok && joint_ok(activation))) {
            // Last resort: any covering vector at all.
            SolveStats scratch;
            SearchLimits limits;
            Search search(inst, stats ? *stats : scratch, limits);
            search.decide_mode = true;
            search.target = kInf;
            search.run();
            if (!search.incumbent) throw InfeasibleError(diagnose_infeasibility(inst));
            bounds.upper_witness = search.incumbent;
            bounds.upper = search.incumbent->makespan;
        }
    }
    if (!bounds.upper_witness) {
        std::vector<std::pair<const Configuration*, int>> active;
        for (const auto& [id, count] : activation) {
            const int k = inst.find_config(id);
            active.push_back({inst.configs[static_cast<size_t>(k)], count});
        }
        const AssignmentResult a = assign_lp(active, *inst.table, inst.pairs, stats);
        bounds.upper_witness = make_plan(active, a);
        bounds.upper = formula_upper;
    }
    bounds.upper = std::max(bounds.upper, bounds.upper_witness->makespan);
    bounds.lower = std::min(bounds.lower, bounds.upper);
    return bounds;
}

std::vector<Configuration> maybe_prune(const std::vector<Configuration>& configs,
                                       const ThroughputTable& table, const DemandMatrix& demand,
                                       bool enabled) {
    if (!enabled) return configs;
    std::vector<WorkloadType> classes;
    std::set<int> ids;
    for (const auto& [key, count] : demand.f) {
        if (count > 0 && ids.insert(key.second).second) {
            classes.push_back({key.second, 1, 1});
        }
    }
    return prune_dominated(configs, table, classes);
}

// Evaluates a concrete activation map; nullopt when it does not cover the
// demand or violates budget/availability.
std::optional<Plan> plan_from_activations(const Instance& inst,
                                          const std::map<std::string, int>& activations,
                                          SolveStats* stats) {
    if (activations.empty()) return std::nullopt;
    std::vector<std::pair<const Configuration*, int>> active;
    std::vector<bool> covered(inst.pairs.size(), false);
    double cost = 0;
    std::map<std::string, int> used;
    for (const auto& [id, count] : activations) {
        if (count <= 0) continue;
        const int k = inst.find_config(id);
        if (k < 0) return std::nullopt;
        active.push_back({inst.configs[static_cast<size_t>(k)], count});
        cost += inst.configs[static_cast<size_t>(k)]->cost * count;
        for (const auto& [type, d] : inst.configs[static_cast<size_t>(k)]->gpu_counts) {
            used[type] += d * count;
        }
        for (int p : inst.serves[static_cast<size_t>(k)]) covered[static_cast<size_t>(p)] = true;
    }
    if (active.empty() || cost > inst.budget + 1e-9) return std::nullopt;
    for (const auto& [type, d] : used) {
        auto it = inst.avail.find(type);
        if (d > (it == inst.avail.end() ? 0 : it->second)) return std::nullopt;
    }
    for (bool c : covered) {
        if (!c) return std::nullopt;
    }
    const AssignmentResult a = assign_lp(active, *inst.table, inst.pairs, stats);
    return make_plan(active, a);
}

std::optional<Plan> greedy_knapsack_feasibility(const Instance& inst, double target,
                                                SolveStats& stats) {
    // Copies are knapsack items: cost o_c, capacity "requests removable in
    // target seconds". Pack by capacity per dollar, certify with the exact
    // inner LP, and run one swap-repair pass when the pack falls short.
    std::vector<double> remaining(inst.pairs.size());
    double total_demand = 0;
    for (size_t p = 0; p < inst.pairs.size(); ++p) {
        remaining[p] = inst.pairs[p].count;
        total_demand += inst.pairs[p].count;
    }
    const double done_eps = 1e-9 * std::max(1.0, total_demand);

    std::map<std::string, int> chosen;
    double rem_budget = inst.budget;
    std::map<std::string, int> rem_avail = inst.avail;

    auto rates_desc = [&](size_t k) {
        std::vector<std::pair<double, int>> rates;
        for (int p : inst.serves[k]) {
            rates.push_back({inst.table->rate_at(inst.configs[k]->id,
                                                 inst.pairs[static_cast<size_t>(p)].workload),
                             p});
        }
        std::sort(rates.begin(), rates.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        return rates;
    };

    auto copy_value = [&](size_t k) {
        double time_left = target;
        double value = 0;
        for (const auto& [rate, p] : rates_desc(k)) {
            if (time_left <= 0) break;
            const double take = std::min(remaining[static_cast<size_t>(p)], time_left * rate);
            value += take;
            time_left -= take / rate;
        }
        return value;
    };

    auto fits = [&](size_t k) {
        if (inst.configs[k]->cost > rem_budget + 1e-9) return false;
        for (const auto& [type, d] : inst.configs[k]->gpu_counts) {
            auto it = rem_avail.find(type);
            if (d > (it == rem_avail.end() ? 0 : it->second)) return false;
        }
        return true;
    };

    auto covered = [&]() {
        for (double r : remaining) {
            if (r > done_eps) return false;
        }
        return true;
    };

    while (!covered()) {
        int best = -1;
        double best_density = 0;
        for (size_t k = 0; k < inst.configs.size(); ++k) {
            if (!fits(k)) continue;
            const double value = copy_value(k);
            if (value <= done_eps) continue;
            const double density = value / std::max(inst.configs[k]->cost, 1e-12);
            const bool wins =
                best < 0 || density > best_density + 1e-12 ||
                (std::abs(density - best_density) <= 1e-12 &&
                 (inst.configs[k]->cost < inst.configs[static_cast<size_t>(best)]->cost ||
                  (inst.configs[k]->cost == inst.configs[static_cast<size_t>(best)]->cost &&
                   inst.configs[k]->id < inst.configs[static_cast<size_t>(best)]->id)));
            if (wins) {
                best = static_cast<int>(k);
                best_density = density;
            }
        }
        if (best < 0) break;
        const size_t k = static_cast<size_t>(best);
        double time_left = target;
        for (const auto& [rate, p] : rates_desc(k)) {
            if (time_left <= 0) break;
            const double take = std::min(remaining[static_cast<size_t>(p)], time_left * rate);
            remaining[static_cast<size_t>(p)] -= take;
            time_left -= take / rate;
        }
        chosen[inst.configs[k]->id] += 1;
        rem_budget -= inst.configs[k]->cost;
        for (const auto& [type, d] : inst.configs[k]->gpu_counts) rem_avail[type] -= d;
    }

    auto certify = [&](const std::map<std::string, int>& act) -> std::optional<Plan> {
        auto plan = plan_from_activations(inst, act, &stats);
        if (plan) {
            stats.evaluated_vectors += 1;
            if (plan->makespan <= target * (1 + 1e-12) + 1e-12) return plan;
        }
        return std::nullopt;
    };

    if (covered()) {
        if (auto plan = certify(chosen)) return plan;
    }
    for (const auto& [out_id, out_count] : chosen) {
        (void)out_count;
        for (size_t k = 0; k < inst.configs.size(); ++k) {
            if (inst.configs[k]->id == out_id) continue;
            std::map<std::string, int> trial = chosen;
            trial[out_id] -= 1;
            if (trial[out_id] == 0) trial.erase(out_id);
            trial[inst.configs[k]->id] += 1;
            if (auto plan = certify(trial)) return plan;
        }
    }
    return std::nullopt;
}

SolveResult run_exact(const std::vector<Configuration>& configs, const ThroughputTable& table,
                      const DemandMatrix& demand, const Budget& budget,
                      const Availability& availability, const SolverOptions& options) {
    const double start = now_seconds();
    SolveResult result;
    result.stats.mode = "exact";
    if (!demand.any_positive()) throw Error("solve: demand matrix has no positive entries");

    const std::vector<Configuration> pruned =
        maybe_prune(configs, table, demand, options.enable_pruning);
    const Instance inst = build_instance(pruned, table, demand, budget, availability);
    if (inst.configs.empty()) {
        result.infeasible_cause = "no configuration can serve any demanded workload class";
        return result;
    }

    SearchLimits limits;
    if (options.wall_clock_limit > 0) limits.wall_deadline = start + options.wall_clock_limit;
    double lower_bound = 0;
    if (options.enable_lower_bound_stop) {
        try {
            lower_bound = compute_bounds(inst, &result.stats).lower;
            limits.lb_stop_at = lower_bound * (1 + 1e-3);
        } catch (const InfeasibleError&) {
            // the search below will prove infeasibility on its own
        }
    }

    Search search(inst, result.stats, limits);
    if (options.enable_warm_start) {
        const auto seed = warm_start(pruned, demand, {}, budget, table, availability);
        if (auto plan = plan_from_activations(inst, seed, &result.stats)) {
            result.stats.evaluated_vectors += 1;
            search.incumbent_T = plan->makespan;
            search.incumbent = std::move(plan);
        }
    }
    search.run();

    result.stats.wall_s = now_seconds() - start;
    if (!search.incumbent) {
        result.status = SolveStatus::Infeasible;
        result.infeasible_cause = diagnose_infeasibility(inst);
        return result;
    }
    result.plan = search.incumbent;
    if (search.hit_limit) {
        result.status = SolveStatus::Feasible;
        double root_lb = 0;
        try {
            root_lb = compute_bounds(inst, &result.stats).lower;
        } catch (const InfeasibleError&) {
        }
        result.stats.gap =
            (search.incumbent_T - root_lb) / std::max(search.incumbent_T, 1e-12);
    } else if (search.done && limits.lb_stop_at > 0) {
        result.status = SolveStatus::Feasible;
        result.stats.gap =
            (search.incumbent_T - lower_bound) / std::max(search.incumbent_T, 1e-12);
    } else {
        result.status = SolveStatus::Optimal;
        result.stats.gap = 0;
    }
    return result;
}

}  // namespace

int Plan::total_gpus() const {
    int total = 0;
    for (const auto& [type, count] : gpu_usage) total += count;
    return total;
}

AssignmentResult inner_assign(const std::vector<ActiveReplica>& active,
                              const ThroughputTable& table, const DemandMatrix& demand) {
    std::vector<std::pair<const Configuration*, int>> act;
    for (const auto& r : active) {
        if (r.count > 0) act.push_back({r.config, r.count});
    }
    if (act.empty()) throw Error("inner_assign: no active replicas");
    return assign_lp(act, table, demanded_pairs(demand), nullptr);
}

AssignmentResult proportional_assign(const std::vector<ActiveReplica>& active,
                                     const ThroughputTable& table, const DemandMatrix& demand) {
    const auto pairs = demanded_pairs(demand);
    AssignmentResult result;
    for (const auto& p : pairs) {
        double total_rate = 0;
        for (const auto& r : active) {
            if (r.count > 0 && r.config->model == p.model && table.has(r.config->id, p.workload)) {
                total_rate += r.count * table.rate_at(r.config->id, p.workload);
            }
        }
        if (!(total_rate > 0)) {
            throw Error(cat("workload class (", p.model, ", w", p.workload,
                            ") is not servable by any active configuration"));
        }
        for (const auto& r : active) {
            if (r.count > 0 && r.config->model == p.model && table.has(r.config->id, p.workload)) {
                result.x[{r.config->id, p.model, p.workload}] =
                    r.count * table.rate_at(r.config->id, p.workload) / total_rate;
            }
        }
    }
    for (const auto& r : active) {
        if (r.count <= 0) continue;
        double t = 0;
        for (const auto& p : pairs) {
            auto it = result.x.find({r.config->id, p.model, p.workload});
            if (it == result.x.end()) continue;
            t += it->second * p.count / (r.count * table.rate_at(r.config->id, p.workload));
        }
        result.makespan = std::max(result.makespan, t);
    }
    return result;
}

SolveResult solve_exact(const std::vector<Configuration>& configs, const ThroughputTable& table,
                        const DemandMatrix& demand, const Budget& budget,
                        const Availability& availability, const SolverOptions& options) {
    return run_exact(configs, table, demand, budget, availability, options);
}

std::pair<double, double> makespan_bounds(const std::vector<Configuration>& configs,
                                          const ThroughputTable& table,
                                          const DemandMatrix& demand,
                                          const Availability& availability,
                                          const Budget& budget) {
    const Instance inst = build_instance(configs, table, demand, budget, availability);
    SolveStats stats;
    const BoundsResult bounds = compute_bounds(inst, &stats);
    return {bounds.lower, bounds.upper};
}

std::optional<Plan> feasibility_check(double T_hat, const std::vector<Configuration>& configs,
                                      const ThroughputTable& table, const DemandMatrix& demand,
                                      const Budget& budget, const Availability& availability,
                                      FeasibilityMode mode, SolveStats* stats) {
    if (!(T_hat > 0)) return std::nullopt;
    SolveStats scratch;
    SolveStats& s = stats ? *stats : scratch;
    const Instance inst = build_instance(configs, table, demand, budget, availability);
    if (mode == FeasibilityMode::KnapsackGreedy) {
        return greedy_knapsack_feasibility(inst, T_hat, s);
    }
    SearchLimits limits;
    Search search(inst, s, limits);
    search.decide_mode = true;
    search.target = T_hat;
    search.run();
    return search.incumbent;
}

SolveResult binary_search_on_T(const std::vector<Configuration>& configs,
                               const ThroughputTable& table, const DemandMatrix& demand,
                               const Budget& budget, const Availability& availability,
                               const SolverOptions& options) {
    const double start = now_seconds();
    SolveResult result;
    result.stats.mode = "binary_search";
    if (!demand.any_positive()) throw Error("solve: demand matrix has no positive entries");
    if (!(options.tolerance > 0)) throw Error("solve: tolerance must be > 0");

    const std::vector<Configuration> pruned =
        maybe_prune(configs, table, demand, options.enable_pruning);
    const Instance inst = build_instance(pruned, table, demand, budget, availability);
    if (inst.configs.empty()) {
        result.infeasible_cause = "no configuration can serve any demanded workload class";
        return result;
    }

    BoundsResult bounds;
    try {
        bounds = compute_bounds(inst, &result.stats);
    } catch (const InfeasibleError& e) {
        result.status = SolveStatus::Infeasible;
        result.infeasible_cause = e.what();
        result.stats.wall_s = now_seconds() - start;
        return result;
    }
    result.stats.evaluated_vectors += 1;  // the upper-bound witness

    double lo = bounds.lower;
    Plan incumbent = *bounds.upper_witness;
    double hi = incumbent.makespan;

    int iterations = 0;
    while (hi - lo > options.tolerance && iterations < 200) {
        if (options.wall_clock_limit > 0 && now_seconds() - start > options.wall_clock_limit) {
            break;
        }
        iterations += 1;
        result.stats.bs_iterations += 1;
        const double t_hat = 0.5 * (lo + hi);
        const auto plan = feasibility_check(t_hat, pruned, table, demand, budget, availability,
                                            options.feasibility_mode, &result.stats);
        if (plan) {
            // Feasibility is monotone in the target; a verified plan only
            // ever tightens the upper bound.
            if (plan->makespan > t_hat * (1 + 1e-9) + 1e-9) {
                throw Error("feasibility check returned a plan above its target");
            }
            incumbent = *plan;
            hi = plan->makespan;
        } else {
            lo = t_hat;
        }
    }

    result.status = SolveStatus::Feasible;
    result.plan = incumbent;
    result.stats.gap = (hi - lo) / std::max(hi, 1e-12);
    result.stats.wall_s = now_seconds() - start;
    return result;
}

SolveResult solve(const std::vector<Configuration>& configs, const ThroughputTable& table,
                  const DemandMatrix& demand, const Budget& budget,
                  const Availability& availability, const SolverOptions& options) {
    if (options.mode == SolveMode::BinarySearch) {
        return binary_search_on_T(configs, table, demand, budget, availability, options);
    }
    return solve_exact(configs, table, demand, budget, availability, options);
}

SolveResult solve_multi_model(const std::vector<Configuration>& configs,
                              const ThroughputTable& table, const DemandMatrix& demand,
                              const Budget& budget, const Availability& availability,
                              const SolverOptions& options) {
    return solve(configs, table, demand, budget, availability, options);
}

std::map<std::string, int> warm_start(const std::vector<Configuration>& configs,
                                      const DemandMatrix& demand,
                                      const std::vector<ModelSpec>& models, const Budget& budget,
                                      const ThroughputTable& table,
                                      const Availability& availability) {
    const auto pairs = demanded_pairs(demand);
    std::map<std::string, double> weight;  // model -> memory * demand
    for (const auto& p : pairs) {
        double memory = 1.0;
        for (const auto& m : models) {
            if (m.name == p.model) memory = m.min_replica_memory;
        }
        weight[p.model] += memory * p.count;
    }
    double total_weight = 0;
    for (const auto& [model, w] : weight) total_weight += w;
    if (total_weight <= 0) return {};

    std::map<std::string, int> seed;
    std::map<std::string, int> rem_avail = availability.counts;
    double spent = 0;
    for (const auto& [model, w] : weight) {
        const double share = budget.limit * w / total_weight;
        const Configuration* best = nullptr;
        for (const auto& c : configs) {
            if (c.model != model) continue;
            bool covers = true;
            for (const auto& p : pairs) {
                if (p.model == model && !table.has(c.id, p.workload)) covers = false;
            }
            if (!covers) continue;
            if (!best || c.cost < best->cost || (c.cost == best->cost && c.id < best->id)) {
                best = &c;
            }
        }
        if (!best) return {};
        int count = std::max(1, static_cast<int>(std::floor(share / best->cost + 1e-9)));
        for (const auto& [type, d] : best->gpu_counts) {
            count = std::min(count, rem_avail[type] / std::max(1, d));
        }
        while (count > 0 && spent + count * best->cost > budget.limit + 1e-9) count -= 1;
        if (count < 1) return {};
        seed[best->id] += count;
        spent += count * best->cost;
        for (const auto& [type, d] : best->gpu_counts) rem_avail[type] -= d * count;
    }
    return seed;
}

std::pair<SolveResult, ReplanDelta> replan(const Plan& previous,
                                           const std::vector<Configuration>& configs,
                                           const ThroughputTable& table,
                                           const DemandMatrix& new_demand, const Budget& budget,
                                           const Availability& new_availability,
                                           const SolverOptions& options) {
    const Instance inst = build_instance(configs, table, new_demand, budget, new_availability);

    // Clip the previous plan to what still exists and fits.
    std::map<std::string, int> surviving;
    std::map<std::string, int> rem_avail = new_availability.counts;
    double spent = 0;
    for (const auto& [id, count] : previous.activations) {
        const int k = inst.find_config(id);
        if (k < 0) continue;
        const Configuration* c = inst.configs[static_cast<size_t>(k)];
        int keep = count;
        for (const auto& [type, d] : c->gpu_counts) {
            if (d > 0) keep = std::min(keep, rem_avail[type] / d);
        }
        while (keep > 0 && spent + keep * c->cost > budget.limit + 1e-9) keep -= 1;
        if (keep <= 0) continue;
        surviving[id] = keep;
        spent += keep * c->cost;
        for (const auto& [type, d] : c->gpu_counts) rem_avail[type] -= d * keep;
    }

    SolveStats scratch;
    ReplanDelta delta;
    double total_demand = 0;
    for (const auto& p : demanded_pairs(new_demand)) total_demand += p.count;
    const auto before = plan_from_activations(inst, surviving, &scratch);
    if (before) {
        delta.makespan_before = before->makespan;
        delta.throughput_before = total_demand / before->makespan;
    }

    SolveResult result = solve(configs, table, new_demand, budget, new_availability, options);
    if (result.plan) {
        // The surviving plan acts as the warm incumbent: keep it if the
        // fresh solve cannot beat it.
        if (before && plan_better(*before, *result.plan)) result.plan = before;
        delta.makespan_after = result.plan->makespan;
        delta.throughput_after = total_demand / result.plan->makespan;
        for (const auto& [id, count] : result.plan->activations) {
            const auto it = previous.activations.find(id);
            const int old_count = it == previous.activations.end() ? 0 : it->second;
            if (count > old_count) delta.added[id] = count - old_count;
        }
        for (const auto& [id, count] : previous.activations) {
            const auto it = result.plan->activations.find(id);
            const int new_count = it == result.plan->activations.end() ? 0 : it->second;
            if (count > new_count) delta.removed[id] = count - new_count;
        }
    }
    return {result, delta};
}

std::vector<std::string> validate_plan(const Plan& plan, const std::vector<Configuration>& configs,
                                       const ThroughputTable& table, const DemandMatrix& demand,
                                       const Budget& budget, const Availability& availability) {
    std::vector<std::string> violations;
    auto config_of = [&](const std::string& id) -> const Configuration* {
        for (const auto& c : configs) {
            if (c.id == id) return &c;
        }
        return nullptr;
    };

    for (const auto& [id, count] : plan.activations) {
        if (count < 0) violations.push_back(cat("activation count for '", id, "' is negative"));
        if (!config_of(id)) {
            violations.push_back(cat("activation references unknown config '", id, "'"));
        }
    }

    for (const auto& p : demanded_pairs(demand)) {
        double sum = 0;
        for (const auto& [key, x] : plan.assignment) {
            if (std::get<1>(key) == p.model && std::get<2>(key) == p.workload) sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            violations.push_back(cat("assignment for (", p.model, ", w", p.workload, ") sums to ",
                                     sum, ", expected 1"));
        }
    }

    for (const auto& [key, x] : plan.assignment) {
        const auto& [id, model, workload] = key;
        if (x < -1e-9 || x > 1 + 1e-9) {
            violations.push_back(
                cat("fraction for ('", id, "', ", model, ", w", workload, ") out of [0,1]: ", x));
        }
        auto it = plan.activations.find(id);
        const int y = it == plan.activations.end() ? 0 : it->second;
        if (x > 1e-9 && y < 1) {
            violations.push_back(cat("config '", id, "' receives work but has y=0"));
        }
    }

    for (const auto& [id, count] : plan.activations) {
        if (count <= 0) continue;
        double t = 0;
        for (const auto& [key, x] : plan.assignment) {
            if (std::get<0>(key) != id || x <= 0) continue;
            if (!table.has(id, std::get<2>(key))) {
                violations.push_back(cat("config '", id, "' assigned workload w",
                                         std::get<2>(key), " without a throughput entry"));
                continue;
            }
            const double f = demand.at(std::get<1>(key), std::get<2>(key));
            t += x * f / (count * table.rate_at(id, std::get<2>(key)));
        }
        if (t > plan.makespan * (1 + 1e-7) + 1e-9) {
            violations.push_back(
                cat("config '", id, "' busy time ", t, " exceeds makespan ", plan.makespan));
        }
    }

    double cost = 0;
    std::map<std::string, int> used;
    for (const auto& [id, count] : plan.activations) {
        const Configuration* c = config_of(id);
        if (!c || count <= 0) continue;
        cost += c->cost * count;
        for (const auto& [type, d] : c->gpu_counts) used[type] += d * count;
    }
    if (cost > budget.limit * (1 + 1e-9) + 1e-9) {
        violations.push_back(cat("total cost ", cost, " exceeds budget ", budget.limit));
    }
    for (const auto& [type, d] : used) {
        if (d > availability.of(type)) {
            violations.push_back(
                cat("uses ", d, " x ", type, " but only ", availability.of(type), " available"));
        }
    }
    return violations;
}

json plan_to_json(const Plan& plan, const SolveStats& stats) {
    json activations = json::array();
    for (const auto& [id, count] : plan.activations) {
        activations.push_back({{"config_id", id}, {"count", count}});
    }
    json assignment = json::array();
    for (const auto& [key, x] : plan.assignment) {
        assignment.push_back({{"config_id", std::get<0>(key)},
                              {"model", std::get<1>(key)},
                              {"workload_id", std::get<2>(key)},
                              {"fraction", x}});
    }
    json usage = json::object();
    for (const auto& [type, count] : plan.gpu_usage) usage[type] = count;
    return json{{"makespan_s", plan.makespan},
                {"total_cost_per_h", plan.total_cost},
                {"activations", std::move(activations)},
                {"assignment", std::move(assignment)},
                {"gpu_usage", std::move(usage)},
                {"solver",
                 {{"mode", stats.mode},
                  {"gap", stats.gap},
                  {"evaluated_nodes", stats.evaluated_vectors},
                  {"wall_s", stats.wall_s}}}};
}

Plan plan_from_json(const json& doc) {
    Plan plan;
    plan.makespan = doc.at("makespan_s").get<double>();
    plan.total_cost = doc.at("total_cost_per_h").get<double>();
    for (const auto& entry : doc.at("activations")) {
        plan.activations[entry.at("config_id").get<std::string>()] = entry.at("count").get<int>();
    }
    for (const auto& entry : doc.at("assignment")) {
        plan.assignment[{entry.at("config_id").get<std::string>(),
                         entry.at("model").get<std::string>(),
                         entry.at("workload_id").get<int>()}] =
            entry.at("fraction").get<double>();
    }
    if (doc.contains("gpu_usage")) {
        for (auto it = doc["gpu_usage"].begin(); it != doc["gpu_usage"].end(); ++it) {
            plan.gpu_usage[it.key()] = it.value().get<int>();
        }
    }
    return plan;
}

}  // namespace hetplan
