#pragma once

#include <map>
#include <string>
#include <vector>

#include "hetplan/catalog.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

struct ThroughputTable;  // costmodel.hpp

struct StageSpec {
    std::string gpu_type;
    int tp_degree = 1;
    int layer_count = 0;
};

// One model replica: an ordered list of pipeline stages, each a homogeneous
// tensor-parallel group on a single machine.
struct Configuration {
    std::string model;
    std::vector<StageSpec> stages;
    std::map<std::string, int> gpu_counts;    // type -> d_n(c), derived
    double cost = 0;                          // USD/hour, derived
    std::vector<bool> cross_machine_boundary;  // stages.size()-1 entries, derived

    std::string id;  // deterministic, derived from model and stage layout

    int total_gpus() const;
};

// Largest-remainder split of layers proportional to per-stage memory; every
// stage receives at least one layer. Ties go to the lowest stage index.
std::vector<int> partition_layers(int num_layers, const std::vector<double>& stage_memories);

double config_cost(const Configuration& config, const Catalog& catalog);

std::string config_id(const std::string& model, const std::vector<StageSpec>& stages);

// Fills the derived fields (layers, counts, cost, boundaries, id) for a stage
// layout given without layer counts.
Configuration make_config(const Catalog& catalog, const ModelSpec& model,
                          std::vector<StageSpec> stages);

// Variant of `config` with every pipeline boundary forced onto the
// cross-machine link.
Configuration with_cross_machine_boundaries(Configuration config);

struct EnumerationOptions {
    int max_gpus_per_replica = 8;
    std::vector<int> tp_degrees = {1, 2, 4, 8};
};

struct EnumerationResult {
    std::vector<Configuration> configs;
    // reason -> number of stage layouts pruned for it; populated so an empty
    // result can explain itself
    std::map<std::string, long> pruned;
};

EnumerationResult enumerate_configs(const Catalog& catalog, const Availability& availability,
                                    const ModelSpec& model,
                                    const EnumerationOptions& options = {});

// Removes configurations that some other config matches or beats on cost,
// per-type GPU usage, and throughput for every class (with at least one
// strict improvement). Pareto-optimal configs always survive.
std::vector<Configuration> prune_dominated(const std::vector<Configuration>& configs,
                                           const ThroughputTable& table,
                                           const std::vector<WorkloadType>& classes);

}  // namespace hetplan
