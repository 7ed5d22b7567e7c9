#include "hetplan/configspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hetplan/costmodel.hpp"

namespace hetplan {

int Configuration::total_gpus() const {
    int total = 0;
    for (const auto& s : stages) total += s.tp_degree;
    return total;
}

std::vector<int> partition_layers(int num_layers, const std::vector<double>& stage_memories) {
    const int stages = static_cast<int>(stage_memories.size());
    if (stages == 0) throw Error("partition_layers: no stages");
    if (num_layers < stages) {
        throw Error(cat("partition_layers: ", stages, " stages exceed ", num_layers, " layers"));
    }
    double total_mem = 0;
    for (double m : stage_memories) {
        if (!(m > 0)) throw Error("partition_layers: stage memories must be > 0");
        total_mem += m;
    }

    std::vector<int> counts(stage_memories.size(), 0);
    std::vector<std::pair<double, int>> remainders;  // (fraction, stage index)
    int assigned = 0;
    for (size_t i = 0; i < stage_memories.size(); ++i) {
        const double quota = num_layers * stage_memories[i] / total_mem;
        counts[i] = static_cast<int>(std::floor(quota));
        assigned += counts[i];
        remainders.push_back({quota - counts[i], static_cast<int>(i)});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; i < num_layers - assigned; ++i) {
        counts[static_cast<size_t>(remainders[static_cast<size_t>(i)].second)] += 1;
    }
    // A zero-layer stage steals one layer from the currently largest stage.
    for (size_t i = 0; i < counts.size(); ++i) {
        while (counts[i] < 1) {
            auto donor = std::max_element(counts.begin(), counts.end());
            if (*donor <= 1) throw Error("partition_layers: cannot give every stage a layer");
            *donor -= 1;
            counts[i] += 1;
        }
    }
    return counts;
}

double config_cost(const Configuration& config, const Catalog& catalog) {
    double cost = 0;
    for (const auto& [type, count] : config.gpu_counts) {
        cost += catalog.at(type).price * count;
    }
    return cost;
}

std::string config_id(const std::string& model, const std::vector<StageSpec>& stages) {
    std::ostringstream os;
    os << model << "|";
    for (size_t i = 0; i < stages.size(); ++i) {
        if (i) os << "+";
        os << stages[i].gpu_type << ":tp" << stages[i].tp_degree << ":L"
           << stages[i].layer_count;
    }
    return os.str();
}

namespace {

// Adjacent stages share a machine when they are the same type and a greedy
// left-to-right packing fits them into the machine's slots.
std::vector<bool> derive_boundaries(const Catalog& catalog, const std::vector<StageSpec>& stages) {
    std::vector<bool> cross;
    if (stages.size() < 2) return cross;
    int free_slots = catalog.at(stages[0].gpu_type).gpus_per_machine - stages[0].tp_degree;
    for (size_t i = 1; i < stages.size(); ++i) {
        const bool same_type = stages[i].gpu_type == stages[i - 1].gpu_type;
        if (same_type && stages[i].tp_degree <= free_slots) {
            cross.push_back(false);
            free_slots -= stages[i].tp_degree;
        } else {
            cross.push_back(true);
            free_slots = catalog.at(stages[i].gpu_type).gpus_per_machine - stages[i].tp_degree;
        }
    }
    return cross;
}

}  // namespace

Configuration make_config(const Catalog& catalog, const ModelSpec& model,
                          std::vector<StageSpec> stages) {
    if (stages.empty()) throw Error("make_config: no stages");
    Configuration c;
    c.model = model.name;

    std::vector<double> memories;
    for (const auto& s : stages) {
        memories.push_back(s.tp_degree * catalog.at(s.gpu_type).mem_capacity);
    }
    const std::vector<int> layers = partition_layers(model.num_layers, memories);
    for (size_t i = 0; i < stages.size(); ++i) stages[i].layer_count = layers[i];

    c.stages = std::move(stages);
    for (const auto& s : c.stages) c.gpu_counts[s.gpu_type] += s.tp_degree;
    c.cost = config_cost(c, catalog);
    c.cross_machine_boundary = derive_boundaries(catalog, c.stages);
    c.id = config_id(c.model, c.stages);
    return c;
}

Configuration with_cross_machine_boundaries(Configuration config) {
    for (size_t i = 0; i < config.cross_machine_boundary.size(); ++i) {
        config.cross_machine_boundary[i] = true;
    }
    if (!config.cross_machine_boundary.empty()) config.id += "#xm";
    return config;
}

EnumerationResult enumerate_configs(const Catalog& catalog, const Availability& availability,
                                    const ModelSpec& model, const EnumerationOptions& options) {
    if (options.max_gpus_per_replica < 1) {
        throw Error("enumerate_configs: max_gpus_per_replica must be >= 1");
    }
    EnumerationResult result;

    // Stage options, canonically ordered: type name ascending, TP descending.
    // Canonical order groups equal types next to each other, which is also
    // the machine-packing-friendly arrangement.
    struct Option {
        std::string type;
        int tp;
        std::string zone;
        double memory;  // GB per stage
    };
    std::vector<Option> opts;
    std::vector<GpuType> sorted_types = catalog.gpu_types;
    std::sort(sorted_types.begin(), sorted_types.end(),
              [](const GpuType& a, const GpuType& b) { return a.name < b.name; });
    std::vector<int> degrees = options.tp_degrees;
    std::sort(degrees.begin(), degrees.end(), std::greater<int>());
    for (const auto& t : sorted_types) {
        if (availability.of(t.name) < 1) continue;
        for (int tp : degrees) {
            if (tp < 1 || tp > t.gpus_per_machine) continue;  // TP stays inside one machine
            if (tp > availability.of(t.name)) continue;
            if (tp > options.max_gpus_per_replica) continue;
            opts.push_back({t.name, tp, t.zone, tp * t.mem_capacity});
        }
    }

    const int max_stages = std::min(model.num_layers, options.max_gpus_per_replica);
    std::vector<int> chosen;  // indices into opts, non-decreasing

    auto flush_candidate = [&]() {
        double total_memory = 0;
        std::map<std::string, int> counts;
        std::string zone = opts[static_cast<size_t>(chosen[0])].zone;
        bool zone_ok = true;
        for (int idx : chosen) {
            const Option& o = opts[static_cast<size_t>(idx)];
            total_memory += o.memory;
            counts[o.type] += o.tp;
            if (o.zone != zone) zone_ok = false;
        }
        if (!zone_ok) {
            result.pruned["zone_conflict"] += 1;
            return;
        }
        for (const auto& [type, used] : counts) {
            if (used > availability.of(type)) {
                result.pruned["availability"] += 1;
                return;
            }
        }
        if (total_memory < model.min_replica_memory) {
            result.pruned["aggregate_memory"] += 1;
            return;
        }
        std::vector<StageSpec> stages;
        for (int idx : chosen) {
            stages.push_back({opts[static_cast<size_t>(idx)].type,
                              opts[static_cast<size_t>(idx)].tp, 0});
        }
        Configuration c = make_config(catalog, model, std::move(stages));
        // Per-stage fit for the layer share of weights plus overhead.
        const double need_per_layer = model.weight_bytes * model.mem_overhead_factor /
                                      model.num_layers;
        for (const auto& s : c.stages) {
            const double capacity = s.tp_degree * catalog.at(s.gpu_type).mem_capacity * kBytesPerGb;
            if (s.layer_count * need_per_layer > capacity) {
                result.pruned["stage_memory"] += 1;
                return;
            }
        }
        result.configs.push_back(std::move(c));
    };

    std::function<void(size_t, int, int)> recurse = [&](size_t first_opt, int stages_left,
                                                        int gpus_left) {
        if (!chosen.empty()) flush_candidate();
        if (stages_left == 0) return;
        for (size_t i = first_opt; i < opts.size(); ++i) {
            if (opts[i].tp > gpus_left) continue;
            chosen.push_back(static_cast<int>(i));
            recurse(i, stages_left - 1, gpus_left - opts[i].tp);
            chosen.pop_back();
        }
    };
    recurse(0, max_stages, options.max_gpus_per_replica);

    std::sort(result.configs.begin(), result.configs.end(),
              [](const Configuration& a, const Configuration& b) {
                  if (a.cost != b.cost) return a.cost < b.cost;
                  return a.id < b.id;
              });
    return result;
}

std::vector<Configuration> prune_dominated(const std::vector<Configuration>& configs,
                                           const ThroughputTable& table,
                                           const std::vector<WorkloadType>& classes) {
    auto dominates = [&](const Configuration& a, const Configuration& b) {
        // a dominates b: a is no worse anywhere and strictly better somewhere.
        if (a.model != b.model) return false;
        if (a.cost > b.cost) return false;
        bool strict = a.cost < b.cost;
        for (const auto& [type, count] : b.gpu_counts) {
            auto it = a.gpu_counts.find(type);
            const int a_count = it == a.gpu_counts.end() ? 0 : it->second;
            if (a_count > count) return false;
            if (a_count < count) strict = true;
        }
        for (const auto& [type, count] : a.gpu_counts) {
            if (!b.gpu_counts.count(type) && count > 0) return false;
        }
        for (const auto& w : classes) {
            const bool b_has = table.has(b.id, w.id);
            const bool a_has = table.has(a.id, w.id);
            if (!b_has) continue;     // b cannot serve w; a matches trivially
            if (!a_has) return false;  // a must cover everything b covers
            const double ra = table.rate_at(a.id, w.id);
            const double rb = table.rate_at(b.id, w.id);
            if (ra < rb) return false;
            if (ra > rb) strict = true;
        }
        return strict;
    };

    std::vector<Configuration> kept;
    for (size_t i = 0; i < configs.size(); ++i) {
        bool dominated = false;
        for (size_t j = 0; j < configs.size() && !dominated; ++j) {
            if (i != j && dominates(configs[j], configs[i])) dominated = true;
        }
        if (!dominated) kept.push_back(configs[i]);
    }
    return kept;
}

}  // namespace hetplan
