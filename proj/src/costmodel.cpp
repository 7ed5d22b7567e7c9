#include "hetplan/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace hetplan {

using nlohmann::json;

double CommParams::efficiency(int tp) const {
    auto it = tp_efficiency.find(tp);
    if (it != tp_efficiency.end()) return it->second;
    // Interpolate between the nearest declared degrees; clamp at the ends.
    double lo_tp = 1, lo_eff = 1.0, hi_tp = 0, hi_eff = 0;
    for (const auto& [deg, eff] : tp_efficiency) {
        if (deg <= tp && deg >= lo_tp) {
            lo_tp = deg;
            lo_eff = eff;
        }
        if (deg > tp && (hi_tp == 0 || deg < hi_tp)) {
            hi_tp = deg;
            hi_eff = eff;
        }
    }
    if (hi_tp == 0) return lo_eff;
    return lo_eff + (hi_eff - lo_eff) * (tp - lo_tp) / (hi_tp - lo_tp);
}

bool ThroughputTable::has(const std::string& config, int workload) const {
    return rate.count({config, workload}) > 0;
}

double ThroughputTable::rate_at(const std::string& config, int workload) const {
    auto it = rate.find({config, workload});
    if (it == rate.end()) {
        throw Error(cat("no throughput entry for config '", config, "' workload ", workload));
    }
    return it->second;
}

namespace {

double activation_bytes(const ModelSpec& model, double tokens) {
    return 2.0 * model.hidden_size() * tokens;  // fp16 activations
}

// Ring allreduce moves ~2(t-1)/t of the payload per rank; each layer runs two
// of them (attention + MLP).
double tp_comm_time(const ModelSpec& model, double tokens, int layers, int tp,
                    const CommParams& comm) {
    if (tp <= 1) return 0;
    const double volume = 2.0 * (tp - 1) / tp * activation_bytes(model, tokens);
    return layers * 2.0 * (volume / (comm.tp_link_bw * kBytesPerGb) + comm.per_message_latency);
}

double boundary_time(const ModelSpec& model, double tokens, bool cross, const CommParams& comm) {
    const double bw = (cross ? comm.pp_link_bw : comm.tp_link_bw) * kBytesPerGb;
    return activation_bytes(model, tokens) / bw + comm.per_message_latency;
}

}  // namespace

std::vector<StageTimes> estimate_stage_times(const Configuration& config, const ModelSpec& model,
                                             const WorkloadType& workload, const Catalog& catalog,
                                             const CommParams& comm) {
    std::vector<StageTimes> times;
    const size_t num_stages = config.stages.size();
    for (size_t i = 0; i < num_stages; ++i) {
        const StageSpec& s = config.stages[i];
        const GpuType& gpu = catalog.at(s.gpu_type);
        const double layer_share = static_cast<double>(s.layer_count) / model.num_layers;
        const double eff = comm.efficiency(s.tp_degree);

        StageTimes t;
        t.prefill = model.flops_per_token * workload.rep_input_len * layer_share /
                        (s.tp_degree * gpu.peak_flops * 1e12 * eff) +
                    tp_comm_time(model, workload.rep_input_len, s.layer_count, s.tp_degree, comm);
        t.decode_step = model.weight_bytes * layer_share /
                            (s.tp_degree * gpu.mem_bandwidth * kBytesPerGb) +
                        tp_comm_time(model, 1, s.layer_count, s.tp_degree, comm);
        if (i + 1 < num_stages) {
            const bool cross = config.cross_machine_boundary[i];
            t.prefill += boundary_time(model, workload.rep_input_len, cross, comm);
            t.decode_step += boundary_time(model, 1, cross, comm);
        }
        times.push_back(t);
    }
    return times;
}

std::optional<double> estimate_throughput(const Configuration& config, const ModelSpec& model,
                                          const WorkloadType& workload, const Catalog& catalog,
                                          const CommParams& comm, const MemoryParams& mem) {
    const auto times = estimate_stage_times(config, model, workload, catalog, comm);
    double max_prefill = 0, max_decode = 0;
    for (const auto& t : times) {
        max_prefill = std::max(max_prefill, t.prefill);
        max_decode = std::max(max_decode, t.decode_step);
    }

    double total_memory = 0;
    for (const auto& s : config.stages) {
        total_memory += s.tp_degree * catalog.at(s.gpu_type).mem_capacity * kBytesPerGb;
    }
    const double free_kv =
        (total_memory - model.weight_bytes * model.mem_overhead_factor) * mem.kv_usable_fraction;
    const double kv_per_request =
        model.kv_bytes_per_token * (workload.rep_input_len + workload.rep_output_len);
    long batch = static_cast<long>(std::floor(free_kv / kv_per_request));
    if (batch < 1) return std::nullopt;  // cannot hold one request's KV
    if (mem.max_batch > 0) batch = std::min(batch, mem.max_batch);

    const double prefill_rate = 1.0 / max_prefill;
    const double decode_rate =
        static_cast<double>(batch) / (workload.rep_output_len * max_decode);
    return std::min(prefill_rate, decode_rate);
}

double estimate_latency(const Configuration& config, const ModelSpec& model,
                        const WorkloadType& workload, const Catalog& catalog,
                        const CommParams& comm) {
    const auto times = estimate_stage_times(config, model, workload, catalog, comm);
    double prefill = 0, decode_step = 0;
    for (const auto& t : times) {
        prefill += t.prefill;
        decode_step += t.decode_step;
    }
    return prefill + workload.rep_output_len * decode_step;
}

ThroughputTable build_table(const std::vector<Configuration>& configs,
                            const std::vector<WorkloadType>& classes,
                            const std::vector<ModelSpec>& models, const Catalog& catalog,
                            const CommParams& comm, const MemoryParams& mem) {
    ThroughputTable table;
    for (const auto& config : configs) {
        const ModelSpec* model = nullptr;
        for (const auto& m : models) {
            if (m.name == config.model) model = &m;
        }
        if (!model) throw Error(cat("build_table: config '", config.id, "' references unknown model"));
        for (const auto& w : classes) {
            const auto rate = estimate_throughput(config, *model, w, catalog, comm, mem);
            if (!rate) continue;  // infeasible pair stays absent
            table.rate[{config.id, w.id}] = *rate;
            table.latency[{config.id, w.id}] = estimate_latency(config, *model, w, catalog, comm);
        }
    }
    return table;
}

ThroughputTable load_profile_table(const json& doc, const std::vector<Configuration>& configs,
                                   const std::vector<WorkloadType>& classes) {
    const json& records = doc.is_array() ? doc : doc.at("records");
    ThroughputTable table;
    for (const auto& rec : records) {
        const std::string config_id = rec.at("config_id").get<std::string>();
        const int workload_id = rec.at("workload_id").get<int>();
        const double rate = rec.at("rate_rps").get<double>();

        const Configuration* config = nullptr;
        for (const auto& c : configs) {
            if (c.id == config_id) config = &c;
        }
        if (!config) throw Error(cat("profile table references unknown config '", config_id, "'"));
        if (rec.contains("model") && rec["model"].get<std::string>() != config->model) {
            throw Error(cat("profile entry for '", config_id, "' names model '",
                            rec["model"].get<std::string>(), "' but the config serves '",
                            config->model, "'"));
        }
        bool known_class = false;
        for (const auto& w : classes) known_class |= (w.id == workload_id);
        if (!known_class) {
            throw Error(cat("profile table references unknown workload class ", workload_id));
        }
        if (!(rate > 0)) {
            throw Error(cat("profile rate for config '", config_id, "' workload ", workload_id,
                            " must be > 0"));
        }
        table.rate[{config_id, workload_id}] = rate;
        if (rec.contains("latency_s")) {
            table.latency[{config_id, workload_id}] = rec["latency_s"].get<double>();
        }
    }
    return table;
}

ThroughputTable load_profile_table_file(const std::string& path,
                                        const std::vector<Configuration>& configs,
                                        const std::vector<WorkloadType>& classes) {
    std::ifstream in(path);
    if (!in) throw Error(cat("cannot open profile table '", path, "'"));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(cat("parse error in '", path, "': ", e.what()));
    }
    return load_profile_table(doc, configs, classes);
}

json profile_table_to_json(const ThroughputTable& table,
                           const std::vector<Configuration>& configs) {
    auto model_of = [&](const std::string& id) -> std::string {
        for (const auto& c : configs) {
            if (c.id == id) return c.model;
        }
        return "";
    };
    json records = json::array();
    for (const auto& [key, rate] : table.rate) {
        json rec = {{"config_id", key.first},
                    {"workload_id", key.second},
                    {"model", model_of(key.first)},
                    {"rate_rps", rate}};
        auto lat = table.latency.find(key);
        if (lat != table.latency.end()) rec["latency_s"] = lat->second;
        records.push_back(std::move(rec));
    }
    return json{{"records", std::move(records)}};
}

ThroughputTable merge_tables(ThroughputTable analytic, const ThroughputTable& profile) {
    for (const auto& [key, rate] : profile.rate) analytic.rate[key] = rate;
    for (const auto& [key, lat] : profile.latency) analytic.latency[key] = lat;
    return analytic;
}

}  // namespace hetplan
