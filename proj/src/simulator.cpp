#include "hetplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hetplan {

using nlohmann::json;

double evaluate_analytic(const Plan& plan, const ThroughputTable& table,
                         const DemandMatrix& demand) {
    double makespan = 0;
    for (const auto& [id, count] : plan.activations) {
        if (count <= 0) continue;
        double t = 0;
        for (const auto& [key, x] : plan.assignment) {
            if (std::get<0>(key) != id || x <= 0) continue;
            const std::string& model = std::get<1>(key);
            const int workload = std::get<2>(key);
            if (!table.has(id, workload)) {
                throw Error(cat("evaluate_analytic: no table entry for config '", id,
                                "' workload w", workload));
            }
            t += x * demand.at(model, workload) / (count * table.rate_at(id, workload));
        }
        makespan = std::max(makespan, t);
    }
    return makespan;
}

SimReport simulate_events(const Plan& plan, const std::vector<RequestRecord>& trace,
                          const ThroughputTable& table,
                          const std::vector<Configuration>& configs,
                          const std::vector<WorkloadType>& classes, std::uint64_t seed,
                          std::ostream* request_log) {
    struct Replica {
        std::string id;
        std::string config_id;
        std::string model;
        double free_at = 0;
        double busy = 0;
    };
    std::vector<Replica> replicas;
    for (const auto& [config_id, count] : plan.activations) {
        const Configuration* config = nullptr;
        for (const auto& c : configs) {
            if (c.id == config_id) config = &c;
        }
        if (!config) throw Error(cat("simulate_events: plan references unknown config '",
                                     config_id, "'"));
        for (int i = 0; i < count; ++i) {
            replicas.push_back({cat(config_id, "#", i), config_id, config->model, 0, 0});
        }
    }
    if (replicas.empty()) throw Error("simulate_events: plan has no active replicas");

    // Per (model, class): candidate replicas with weights x_{c,w}/y_c so the
    // expected split matches the plan.
    struct Candidate {
        size_t replica;
        double weight;
        double service;  // seconds per request
    };
    std::map<std::pair<std::string, int>, std::vector<Candidate>> dispatch;
    auto candidates_for = [&](const std::string& model, int workload)
        -> const std::vector<Candidate>& {
        auto key = std::make_pair(model, workload);
        auto it = dispatch.find(key);
        if (it != dispatch.end()) return it->second;
        std::vector<Candidate> cands;
        for (size_t r = 0; r < replicas.size(); ++r) {
            if (replicas[r].model != model) continue;
            auto xit = plan.assignment.find({replicas[r].config_id, model, workload});
            if (xit == plan.assignment.end() || xit->second <= 0) continue;
            if (!table.has(replicas[r].config_id, workload)) {
                throw Error(cat("simulate_events: no table entry for config '",
                                replicas[r].config_id, "' workload w", workload));
            }
            const double y = plan.activations.at(replicas[r].config_id);
            cands.push_back({r, xit->second / y,
                             1.0 / table.rate_at(replicas[r].config_id, workload)});
        }
        if (cands.empty()) {
            throw Error(cat("simulate_events: workload class (", model, ", w", workload,
                            ") has no active replica in the plan"));
        }
        return dispatch.emplace(key, std::move(cands)).first->second;
    };

    // Stable arrival order: time, then original index.
    std::vector<size_t> order(trace.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto arrival = [&](size_t i) { return trace[i].arrival_time.value_or(0.0); };
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return arrival(a) < arrival(b); });

    std::mt19937_64 rng(seed);
    auto uniform01 = [&]() {
        return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit
    };

    if (request_log) *request_log << "arrival_s,start_s,end_s,replica_id,class_id\n";

    std::vector<double> latencies;
    latencies.reserve(trace.size());
    double first_arrival = trace.empty() ? 0 : arrival(order.front());
    double last_completion = first_arrival;

    for (size_t idx : order) {
        const RequestRecord& req = trace[idx];
        const int workload = bucket_class(req.input_len, req.output_len, classes);
        const auto& cands = candidates_for(req.model, workload);

        double total_weight = 0;
        for (const auto& c : cands) total_weight += c.weight;
        const double pick = uniform01() * total_weight;
        double cum = 0;
        const Candidate* chosen = &cands.back();
        for (const auto& c : cands) {
            cum += c.weight;
            if (pick < cum) {
                chosen = &c;
                break;
            }
        }

        Replica& replica = replicas[chosen->replica];
        const double start = std::max(arrival(idx), replica.free_at);
        const double end = start + chosen->service;
        replica.free_at = end;
        replica.busy += chosen->service;
        latencies.push_back(end - arrival(idx));
        last_completion = std::max(last_completion, end);
        if (request_log) {
            *request_log << arrival(idx) << "," << start << "," << end << "," << replica.id << ","
                         << workload << "\n";
        }
    }

    SimReport report;
    report.completed = static_cast<long>(latencies.size());
    report.makespan = last_completion - first_arrival;
    report.throughput = report.makespan > 0 ? latencies.size() / report.makespan : 0;
    report.total_cost_for_run = plan.total_cost * report.makespan / 3600.0;
    for (const auto& r : replicas) {
        report.per_replica_utilization[r.id] =
            report.makespan > 0 ? std::min(1.0, r.busy / report.makespan) : 0;
    }
    std::sort(latencies.begin(), latencies.end());
    for (int pct = 5; pct <= 100; pct += 5) {
        if (latencies.empty()) {
            report.latency_percentiles[pct] = 0;
            continue;
        }
        const size_t rank = static_cast<size_t>(
            std::ceil(pct / 100.0 * static_cast<double>(latencies.size())));
        report.latency_percentiles[pct] = latencies[std::max<size_t>(1, rank) - 1];
    }
    return report;
}

json sim_report_to_json(const SimReport& report) {
    json percentiles = json::object();
    for (const auto& [pct, value] : report.latency_percentiles) {
        percentiles[cat("p", pct)] = value;
    }
    json utilization = json::object();
    for (const auto& [id, value] : report.per_replica_utilization) utilization[id] = value;
    return json{{"makespan", report.makespan},
                {"throughput", report.throughput},
                {"latency_percentiles", std::move(percentiles)},
                {"per_replica_utilization", std::move(utilization)},
                {"total_cost_for_run", report.total_cost_for_run},
                {"completed", report.completed}};
}

std::string sim_report_table(const SimReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << std::left << std::setw(26) << "metric" << "value\n";
    os << std::left << std::setw(26) << "makespan_s" << report.makespan << "\n";
    os << std::left << std::setw(26) << "throughput_rps" << report.throughput << "\n";
    os << std::left << std::setw(26) << "completed" << report.completed << "\n";
    os << std::left << std::setw(26) << "total_cost_for_run_usd" << report.total_cost_for_run
       << "\n";
    for (const auto& [pct, value] : report.latency_percentiles) {
        os << std::left << std::setw(26) << cat("latency_p", pct, "_s") << value << "\n";
    }
    for (const auto& [id, value] : report.per_replica_utilization) {
        os << std::left << std::setw(26) << cat("util ", id) << value << "\n";
    }
    return os.str();
}

}  // namespace hetplan
