#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hetplan/catalog.hpp"
#include "hetplan/configspace.hpp"
#include "hetplan/workload.hpp"

namespace hetplan {

struct CommParams {
    double tp_link_bw = 300.0;   // GB/s, intra-machine (NVLink class)
    double pp_link_bw = 0.625;   // GB/s, cross-machine (5 Gb/s Ethernet)
    double per_message_latency = 1e-4;  // seconds
    std::map<int, double> tp_efficiency = {{1, 1.0}, {2, 0.90}, {4, 0.80}, {8, 0.70}};

    double efficiency(int tp) const;
};

struct MemoryParams {
    double kv_usable_fraction = 1.0;  // share of free memory usable for KV cache
    long max_batch = 0;               // 0 = uncapped
};

struct StageTimes {
    double prefill = 0;      // seconds for the full input, incl. TP comm and
                             // the outgoing pipeline transfer
    double decode_step = 0;  // seconds per generated token, same inclusions
};

struct ThroughputTable {
    // (config id, workload id) -> requests/second. Missing entries mean the
    // pair is infeasible, never zero.
    std::map<std::pair<std::string, int>, double> rate;
    std::map<std::pair<std::string, int>, double> latency;  // seconds/request

    bool has(const std::string& config, int workload) const;
    double rate_at(const std::string& config, int workload) const;
};

std::vector<StageTimes> estimate_stage_times(const Configuration& config, const ModelSpec& model,
                                             const WorkloadType& workload, const Catalog& catalog,
                                             const CommParams& comm);

// Steady-state rate: min of the pipelined prefill bottleneck and the batched
// decode rate. nullopt when the KV cache cannot hold a single request.
std::optional<double> estimate_throughput(const Configuration& config, const ModelSpec& model,
                                          const WorkloadType& workload, const Catalog& catalog,
                                          const CommParams& comm, const MemoryParams& mem);

double estimate_latency(const Configuration& config, const ModelSpec& model,
                        const WorkloadType& workload, const Catalog& catalog,
                        const CommParams& comm);

ThroughputTable build_table(const std::vector<Configuration>& configs,
                            const std::vector<WorkloadType>& classes,
                            const std::vector<ModelSpec>& models, const Catalog& catalog,
                            const CommParams& comm, const MemoryParams& mem);

// Measured-rate ingestion; entries must reference known configs and classes
// and carry strictly positive rates.
ThroughputTable load_profile_table(const nlohmann::json& doc,
                                   const std::vector<Configuration>& configs,
                                   const std::vector<WorkloadType>& classes);
ThroughputTable load_profile_table_file(const std::string& path,
                                        const std::vector<Configuration>& configs,
                                        const std::vector<WorkloadType>& classes);
nlohmann::json profile_table_to_json(const ThroughputTable& table,
                                     const std::vector<Configuration>& configs);

// Profile entries override analytic ones.
ThroughputTable merge_tables(ThroughputTable analytic, const ThroughputTable& profile);

}  // namespace hetplan
