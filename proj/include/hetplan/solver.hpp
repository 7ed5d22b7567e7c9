#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hetplan/catalog.hpp"
#include "hetplan/configspace.hpp"
#include "hetplan/costmodel.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

struct Plan {
    std::map<std::string, int> activations;  // config id -> y_c
    // (config id, model, workload id) -> fraction of that class
    std::map<std::tuple<std::string, std::string, int>, double> assignment;
    double makespan = 0;    // seconds
    double total_cost = 0;  // USD/hour
    std::map<std::string, int> gpu_usage;

    int total_gpus() const;
};

enum class SolveMode { Exact, BinarySearch };
enum class FeasibilityMode { ExactLp, KnapsackGreedy };

struct SolverOptions {
    SolveMode mode = SolveMode::Exact;
    double tolerance = 1.0;       // seconds, binary-search stop width
    double wall_clock_limit = 0;  // seconds, 0 = none
    bool enable_pruning = true;   // dominated-config pruning before the search
    bool enable_warm_start = true;
    bool enable_lower_bound_stop = false;  // accept incumbent at T <= lb*(1+1e-3)
    FeasibilityMode feasibility_mode = FeasibilityMode::ExactLp;
};

struct SolveStats {
    long evaluated_vectors = 0;  // complete activation vectors scored by the inner LP
    long lp_calls = 0;           // every LP solved, bounds included
    long bs_iterations = 0;
    double gap = 0;  // relative optimality gap when stopped early
    double wall_s = 0;
    std::string mode;
};

enum class SolveStatus { Optimal, Feasible, Infeasible };

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    std::optional<Plan> plan;
    std::string infeasible_cause;
    SolveStats stats;
};

struct ActiveReplica {
    const Configuration* config = nullptr;
    int count = 0;
};

struct AssignmentResult {
    // (config id, model, workload id) -> fraction
    std::map<std::tuple<std::string, std::string, int>, double> x;
    double makespan = 0;
};

// Optimal fractional assignment for fixed activations: a small dense LP
// minimizing the slowest replica's busy time.
AssignmentResult inner_assign(const std::vector<ActiveReplica>& active,
                              const ThroughputTable& table, const DemandMatrix& demand);

// Rate-proportional split, x ∝ y_c * h_{c,w}; not optimal in general.
AssignmentResult proportional_assign(const std::vector<ActiveReplica>& active,
                                     const ThroughputTable& table, const DemandMatrix& demand);

SolveResult solve_exact(const std::vector<Configuration>& configs, const ThroughputTable& table,
                        const DemandMatrix& demand, const Budget& budget,
                        const Availability& availability, const SolverOptions& options = {});

SolveResult binary_search_on_T(const std::vector<Configuration>& configs,
                               const ThroughputTable& table, const DemandMatrix& demand,
                               const Budget& budget, const Availability& availability,
                               const SolverOptions& options = {});

// Dispatch on options.mode. The core is model-agnostic, so this is also the
// multi-model joint solve.
SolveResult solve(const std::vector<Configuration>& configs, const ThroughputTable& table,
                  const DemandMatrix& demand, const Budget& budget,
                  const Availability& availability, const SolverOptions& options = {});
SolveResult solve_multi_model(const std::vector<Configuration>& configs,
                              const ThroughputTable& table, const DemandMatrix& demand,
                              const Budget& budget, const Availability& availability,
                              const SolverOptions& options = {});

// (lower, upper) bounds on the optimal makespan. The lower bound assumes
// every class alone gets the availability-constrained best fleet (budget
// ignored); the upper bound evaluates one cheap feasible plan.
std::pair<double, double> makespan_bounds(const std::vector<Configuration>& configs,
                                          const ThroughputTable& table,
                                          const DemandMatrix& demand,
                                          const Availability& availability,
                                          const Budget& budget = {1e18});

// Decision procedure: is a plan with makespan <= T_hat achievable?
// ExactLp decides exactly; KnapsackGreedy is sound but may miss.
std::optional<Plan> feasibility_check(double T_hat, const std::vector<Configuration>& configs,
                                      const ThroughputTable& table, const DemandMatrix& demand,
                                      const Budget& budget, const Availability& availability,
                                      FeasibilityMode mode, SolveStats* stats = nullptr);

// Budget split across models proportional to memory * demand; cheapest
// covering config per share. Empty map when no feasible incumbent exists.
std::map<std::string, int> warm_start(const std::vector<Configuration>& configs,
                                      const DemandMatrix& demand,
                                      const std::vector<ModelSpec>& models, const Budget& budget,
                                      const ThroughputTable& table,
                                      const Availability& availability);

struct ReplanDelta {
    std::map<std::string, int> added;    // config id -> copies gained
    std::map<std::string, int> removed;  // config id -> copies lost
    double makespan_before = 0;          // surviving activations on the new demand
    double makespan_after = 0;
    double throughput_before = 0;  // requests/s, total demand / makespan
    double throughput_after = 0;
};

std::pair<SolveResult, ReplanDelta> replan(const Plan& previous,
                                           const std::vector<Configuration>& configs,
                                           const ThroughputTable& table,
                                           const DemandMatrix& new_demand, const Budget& budget,
                                           const Availability& new_availability,
                                           const SolverOptions& options = {});

// Independent invariant checker: assignment sums, activation coupling,
// makespan, budget, availability. Returns human-readable violations.
std::vector<std::string> validate_plan(const Plan& plan, const std::vector<Configuration>& configs,
                                       const ThroughputTable& table, const DemandMatrix& demand,
                                       const Budget& budget, const Availability& availability);

nlohmann::json plan_to_json(const Plan& plan, const SolveStats& stats);
Plan plan_from_json(const nlohmann::json& doc);

}  // namespace hetplan
