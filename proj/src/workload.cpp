#include "hetplan/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

namespace hetplan {

using nlohmann::json;

LengthLabel classify(double input_len, double output_len, double in_threshold,
                     double out_threshold) {
    if (input_len < 0 || output_len < 0) throw Error("classify: lengths must be >= 0");
    if (!(in_threshold > 0) || !(out_threshold > 0)) {
        throw Error("classify: thresholds must be > 0");
    }
    return {input_len > in_threshold ? InputClass::LongIn : InputClass::ShortIn,
            output_len > out_threshold ? OutputClass::LongOut : OutputClass::ShortOut};
}

std::vector<WorkloadType> default_workload_classes() {
    std::vector<WorkloadType> classes;
    int id = 1;
    for (double in : {2455.0, 824.0, 496.0}) {
        for (double out : {510.0, 253.0, 18.0}) {
            classes.push_back({id++, in, out});
        }
    }
    return classes;
}

double DemandMatrix::at(const std::string& model, int workload) const {
    auto it = f.find({model, workload});
    return it == f.end() ? 0.0 : it->second;
}

double DemandMatrix::total() const {
    double sum = 0;
    for (const auto& [key, count] : f) sum += count;
    return sum;
}

bool DemandMatrix::any_positive() const {
    for (const auto& [key, count] : f) {
        if (count > 0) return true;
    }
    return false;
}

int bucket_class(double input_len, double output_len, const std::vector<WorkloadType>& classes,
                 double in_threshold, double out_threshold) {
    if (classes.empty()) throw Error("bucket_class: class set is empty");
    const LengthLabel label = classify(input_len, output_len, in_threshold, out_threshold);

    auto log_dist = [&](const WorkloadType& w) {
        const double di = std::log1p(input_len) - std::log1p(w.rep_input_len);
        const double dy = std::log1p(output_len) - std::log1p(w.rep_output_len);
        return di * di + dy * dy;
    };

    const WorkloadType* best = nullptr;
    double best_dist = 0;
    bool best_in_quadrant = false;
    for (const auto& w : classes) {
        const bool same_quadrant =
            classify(w.rep_input_len, w.rep_output_len, in_threshold, out_threshold) == label;
        const double d = log_dist(w);
        const bool better = !best || (same_quadrant && !best_in_quadrant) ||
                            (same_quadrant == best_in_quadrant &&
                             (d < best_dist || (d == best_dist && w.id < best->id)));
        if (better) {
            best = &w;
            best_dist = d;
            best_in_quadrant = same_quadrant;
        }
    }
    return best->id;
}

DemandMatrix ingest_trace(const std::vector<RequestRecord>& records,
                          const std::vector<WorkloadType>& classes,
                          const std::vector<std::string>& known_models) {
    if (classes.empty()) throw Error("ingest_trace: class set is empty");
    const std::set<std::string> models(known_models.begin(), known_models.end());
    DemandMatrix demand;
    for (const auto& r : records) {
        if (!models.empty() && !models.count(r.model)) {
            throw Error(cat("ingest_trace: record references unknown model '", r.model, "'"));
        }
        const int w = bucket_class(r.input_len, r.output_len, classes);
        demand.f[{r.model, w}] += 1.0;
    }
    return demand;
}

std::vector<RequestRecord> synth_trace(const std::map<int, double>& ratios_percent, long total,
                                       std::uint64_t seed, const std::string& model,
                                       const std::vector<WorkloadType>& classes) {
    if (total <= 0) throw Error("synth_trace: total must be > 0");
    double ratio_sum = 0;
    for (const auto& [id, pct] : ratios_percent) ratio_sum += pct;
    if (std::abs(ratio_sum - 100.0) > 0.5) {
        throw Error(cat("synth_trace: ratios sum to ", ratio_sum, ", expected 100 +/- 0.5"));
    }

    auto find_class = [&](int id) -> const WorkloadType& {
        for (const auto& w : classes) {
            if (w.id == id) return w;
        }
        throw Error(cat("synth_trace: ratio references unknown workload class ", id));
    };

    // Largest-remainder apportionment keeps every class within +/-1 of its
    // exact share.
    struct Share {
        int id;
        long count;
        double remainder;
    };
    std::vector<Share> shares;
    long assigned = 0;
    for (const auto& [id, pct] : ratios_percent) {
        const double exact = static_cast<double>(total) * pct / ratio_sum;
        const long base = static_cast<long>(std::floor(exact));
        shares.push_back({id, base, exact - static_cast<double>(base)});
        assigned += base;
    }
    std::stable_sort(shares.begin(), shares.end(), [](const Share& a, const Share& b) {
        if (a.remainder != b.remainder) return a.remainder > b.remainder;
        return a.id < b.id;
    });
    for (long i = 0; i < total - assigned; ++i) shares[static_cast<size_t>(i)].count += 1;

    std::vector<RequestRecord> records;
    records.reserve(static_cast<size_t>(total));
    std::sort(shares.begin(), shares.end(),
              [](const Share& a, const Share& b) { return a.id < b.id; });
    for (const auto& s : shares) {
        const WorkloadType& w = find_class(s.id);
        for (long i = 0; i < s.count; ++i) {
            records.push_back({w.rep_input_len, w.rep_output_len, model, std::nullopt});
        }
    }
    std::mt19937_64 rng(seed);
    std::shuffle(records.begin(), records.end(), rng);
    return records;
}

std::vector<RequestRecord> load_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(cat("cannot open trace file '", path, "'"));
    std::vector<RequestRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(cat("parse error in '", path, "' line ", line_no, ": ", e.what()));
        }
        RequestRecord r;
        if (!obj.contains("input_len") || !obj.contains("output_len") || !obj.contains("model")) {
            throw Error(cat("trace record at line ", line_no,
                            " needs fields input_len, output_len, model"));
        }
        r.input_len = obj["input_len"].get<double>();
        r.output_len = obj["output_len"].get<double>();
        r.model = obj["model"].get<std::string>();
        if (obj.contains("arrival_time")) r.arrival_time = obj["arrival_time"].get<double>();
        records.push_back(std::move(r));
    }
    return records;
}

void save_trace_file(const std::string& path, const std::vector<RequestRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error(cat("cannot write trace file '", path, "'"));
    for (const auto& r : records) {
        json obj = {{"input_len", r.input_len}, {"output_len", r.output_len}, {"model", r.model}};
        if (r.arrival_time) obj["arrival_time"] = *r.arrival_time;
        out << obj.dump() << "\n";
    }
}

std::vector<WorkloadType> workload_classes_from_json(const json& arr) {
    if (!arr.is_array()) throw Error("workload classes must be an array");
    std::vector<WorkloadType> classes;
    std::set<int> ids;
    for (const auto& obj : arr) {
        WorkloadType w;
        w.id = obj.at("id").get<int>();
        w.rep_input_len = obj.at("rep_input_len").get<double>();
        w.rep_output_len = obj.at("rep_output_len").get<double>();
        if (!(w.rep_input_len > 0) || !(w.rep_output_len > 0)) {
            throw Error(cat("workload class ", w.id, ": representative lengths must be > 0"));
        }
        if (!ids.insert(w.id).second) throw Error(cat("duplicate workload class id ", w.id));
        classes.push_back(w);
    }
    return classes;
}

json workload_classes_to_json(const std::vector<WorkloadType>& classes) {
    json arr = json::array();
    for (const auto& w : classes) {
        arr.push_back({{"id", w.id},
                       {"rep_input_len", w.rep_input_len},
                       {"rep_output_len", w.rep_output_len}});
    }
    return arr;
}

DemandDocument load_demand_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(cat("cannot open demand file '", path, "'"));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(cat("parse error in '", path, "': ", e.what()));
    }
    DemandDocument result;
    result.classes = doc.contains("classes") ? workload_classes_from_json(doc["classes"])
                                             : default_workload_classes();
    if (!doc.contains("demand") || !doc["demand"].is_object()) {
        throw Error(cat("demand file '", path, "' requires a 'demand' object"));
    }
    for (auto mit = doc["demand"].begin(); mit != doc["demand"].end(); ++mit) {
        for (auto wit = mit.value().begin(); wit != mit.value().end(); ++wit) {
            const int id = std::stoi(wit.key());
            const double count = wit.value().get<double>();
            if (count < 0) throw Error("demand counts must be >= 0");
            result.demand.f[{mit.key(), id}] = count;
        }
    }
    return result;
}

json demand_to_json(const DemandDocument& doc) {
    json out;
    out["classes"] = workload_classes_to_json(doc.classes);
    out["demand"] = json::object();
    for (const auto& [key, count] : doc.demand.f) {
        out["demand"][key.first][std::to_string(key.second)] = count;
    }
    return out;
}

}  // namespace hetplan
