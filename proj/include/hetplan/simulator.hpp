#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hetplan/solver.hpp"

namespace hetplan {

struct SimReport {
    double makespan = 0;    // seconds, first arrival to last completion
    double throughput = 0;  // requests/second over the busy period
    std::map<int, double> latency_percentiles;  // percentile (5,10,...,100) -> seconds
    std::map<std::string, double> per_replica_utilization;  // replica id -> [0,1]
    double total_cost_for_run = 0;  // USD, plan cost rate * makespan
    long completed = 0;
};

// Fluid replay of a plan: max over active configs of their busy time. Errors
// when an assigned pair is missing from the table.
double evaluate_analytic(const Plan& plan, const ThroughputTable& table,
                         const DemandMatrix& demand);

// Event-driven replay: per-class weighted-random dispatch over replica
// copies (weight x_{c,w}/y_c), FCFS per replica, service time 1/h. Fully
// deterministic for a fixed seed.
SimReport simulate_events(const Plan& plan, const std::vector<RequestRecord>& trace,
                          const ThroughputTable& table,
                          const std::vector<Configuration>& configs,
                          const std::vector<WorkloadType>& classes, std::uint64_t seed,
                          std::ostream* request_log = nullptr);

nlohmann::json sim_report_to_json(const SimReport& report);
std::string sim_report_table(const SimReport& report);

enum class BaselineKind {
    UniformComposition,
    UniformDeployment,
    RoundRobinAssignment,
    Homogeneous,
};

// Everything a planning run needs; baselines rework parts of it.
struct PlannerInputs {
    Catalog catalog;
    Availability availability;
    Budget budget;
    std::vector<ModelSpec> models;
    std::vector<WorkloadType> classes;
    DemandMatrix demand;
    EnumerationOptions enum_options;
    CommParams comm;
    MemoryParams mem;
    std::optional<ThroughputTable> profile;  // overrides analytic entries
    bool profile_only = false;               // skip the analytic table entirely
    SolverOptions solver;
};

struct BuiltProblem {
    std::vector<Configuration> configs;
    ThroughputTable table;
};

BuiltProblem build_problem(const PlannerInputs& inputs);

// The ablation baselines. `homogeneous_type` is required for
// BaselineKind::Homogeneous, which treats that type's availability as
// unbounded (budget still binds).
SolveResult baseline(const PlannerInputs& inputs, BaselineKind kind,
                     const std::string& homogeneous_type = "");

}  // namespace hetplan
