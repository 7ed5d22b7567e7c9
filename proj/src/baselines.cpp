#include <algorithm>
#include <cmath>
#include <set>

#include "hetplan/simulator.hpp"

namespace hetplan {

BuiltProblem build_problem(const PlannerInputs& inputs) {
    BuiltProblem problem;
    for (const auto& model : inputs.models) {
        auto result =
            enumerate_configs(inputs.catalog, inputs.availability, model, inputs.enum_options);
        for (auto& c : result.configs) problem.configs.push_back(std::move(c));
    }
    if (!inputs.profile_only) {
        problem.table = build_table(problem.configs, inputs.classes, inputs.models,
                                    inputs.catalog, inputs.comm, inputs.mem);
    }
    if (inputs.profile) problem.table = merge_tables(problem.table, *inputs.profile);
    return problem;
}

namespace {

SolveResult solve_inputs(const PlannerInputs& inputs) {
    const BuiltProblem problem = build_problem(inputs);
    return solve(problem.configs, problem.table, inputs.demand, inputs.budget,
                 inputs.availability, inputs.solver);
}

// Equal spend per type, remainder to the cheapest type; the solver then
// optimizes deployment and assignment inside that composition.
SolveResult uniform_composition(const PlannerInputs& inputs) {
    PlannerInputs restricted = inputs;
    const size_t num_types = inputs.catalog.gpu_types.size();
    if (num_types == 0) throw Error("baseline: catalog has no GPU types");
    const double per_type = inputs.budget.limit / static_cast<double>(num_types);

    double spent = 0;
    std::map<std::string, int> rented;
    for (const auto& t : inputs.catalog.gpu_types) {
        const int count = std::min(inputs.availability.of(t.name),
                                   static_cast<int>(std::floor(per_type / t.price + 1e-9)));
        rented[t.name] = count;
        spent += count * t.price;
    }
    const GpuType* cheapest = nullptr;
    for (const auto& t : inputs.catalog.gpu_types) {
        if (!cheapest || t.price < cheapest->price) cheapest = &t;
    }
    while (cheapest && spent + cheapest->price <= inputs.budget.limit + 1e-9 &&
           rented[cheapest->name] < inputs.availability.of(cheapest->name)) {
        rented[cheapest->name] += 1;
        spent += cheapest->price;
    }
    restricted.availability.counts = rented;
    return solve_inputs(restricted);
}

// One deployment shape for everyone: a single full-machine TP stage.
SolveResult uniform_deployment(const PlannerInputs& inputs) {
    std::vector<Configuration> configs;
    for (const auto& model : inputs.models) {
        for (const auto& t : inputs.catalog.gpu_types) {
            const int tp = t.gpus_per_machine;
            if (tp > inputs.availability.of(t.name)) continue;
            if (tp * t.mem_capacity < model.min_replica_memory) continue;
            if (model.weight_bytes * model.mem_overhead_factor >
                tp * t.mem_capacity * kBytesPerGb) {
                continue;
            }
            configs.push_back(make_config(inputs.catalog, model, {{t.name, tp, 0}}));
        }
    }
    if (configs.empty()) {
        SolveResult result;
        result.infeasible_cause = "uniform deployment: no full-machine TP group fits the model";
        return result;
    }
    ThroughputTable table;
    if (!inputs.profile_only) {
        table = build_table(configs, inputs.classes, inputs.models, inputs.catalog, inputs.comm,
                            inputs.mem);
    }
    if (inputs.profile) table = merge_tables(table, *inputs.profile);
    return solve(configs, table, inputs.demand, inputs.budget, inputs.availability,
                 inputs.solver);
}

// Optimized composition and deployment, assignment replaced by equal
// per-class splits across the active replicas able to serve each class.
SolveResult round_robin_assignment(const PlannerInputs& inputs) {
    const BuiltProblem problem = build_problem(inputs);
    SolveResult result = solve(problem.configs, problem.table, inputs.demand, inputs.budget,
                               inputs.availability, inputs.solver);
    if (!result.plan) return result;

    Plan plan = *result.plan;
    plan.assignment.clear();
    for (const auto& [key, count] : inputs.demand.f) {
        if (count <= 0) continue;
        const auto& [model, workload] = key;
        double total_replicas = 0;
        for (const auto& [id, y] : plan.activations) {
            const Configuration* config = nullptr;
            for (const auto& c : problem.configs) {
                if (c.id == id) config = &c;
            }
            if (config && config->model == model && problem.table.has(id, workload)) {
                total_replicas += y;
            }
        }
        if (total_replicas <= 0) {
            result.status = SolveStatus::Infeasible;
            result.infeasible_cause =
                cat("round robin: no active replica serves (", model, ", w", workload, ")");
            result.plan.reset();
            return result;
        }
        for (const auto& [id, y] : plan.activations) {
            const Configuration* config = nullptr;
            for (const auto& c : problem.configs) {
                if (c.id == id) config = &c;
            }
            if (config && config->model == model && problem.table.has(id, workload)) {
                plan.assignment[{id, model, workload}] = y / total_replicas;
            }
        }
    }
    plan.makespan = evaluate_analytic(plan, problem.table, inputs.demand);
    result.plan = plan;
    return result;
}

// Single-type fleet with availability treated as unbounded; the budget is
// what actually limits the rental.
SolveResult homogeneous(const PlannerInputs& inputs, const std::string& type) {
    const GpuType* gpu = inputs.catalog.find(type);
    if (!gpu) throw Error(cat("baseline: unknown GPU type '", type, "'"));
    PlannerInputs restricted = inputs;
    restricted.availability.counts.clear();
    restricted.availability.counts[type] =
        static_cast<int>(std::floor(inputs.budget.limit / gpu->price + 1e-9));
    Catalog only;
    only.gpu_types = {*gpu};
    restricted.catalog = only;
    return solve_inputs(restricted);
}

}  // namespace

SolveResult baseline(const PlannerInputs& inputs, BaselineKind kind,
                     const std::string& homogeneous_type) {
    switch (kind) {
        case BaselineKind::UniformComposition:
            return uniform_composition(inputs);
        case BaselineKind::UniformDeployment:
            return uniform_deployment(inputs);
        case BaselineKind::RoundRobinAssignment:
            return round_robin_assignment(inputs);
        case BaselineKind::Homogeneous:
            return homogeneous(inputs, homogeneous_type);
    }
    throw Error("baseline: unknown kind");
}

}  // namespace hetplan
