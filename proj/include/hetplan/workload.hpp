#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hetplan/common.hpp"

namespace hetplan {

enum class InputClass { ShortIn, LongIn };
enum class OutputClass { ShortOut, LongOut };

struct LengthLabel {
    InputClass input;
    OutputClass output;
    bool operator==(const LengthLabel&) const = default;
};

inline constexpr double kDefaultInputThreshold = 512;
inline constexpr double kDefaultOutputThreshold = 128;

// LONG iff length strictly exceeds the threshold.
LengthLabel classify(double input_len, double output_len,
                     double in_threshold = kDefaultInputThreshold,
                     double out_threshold = kDefaultOutputThreshold);

struct RequestRecord {
    double input_len = 0;
    double output_len = 0;
    std::string model;
    std::optional<double> arrival_time;  // seconds; absent means t=0
};

struct WorkloadType {
    int id = 0;
    double rep_input_len = 0;
    double rep_output_len = 0;
};

// The nine benchmark classes: inputs {2455, 824, 496} x outputs {510, 253, 18},
// ids 1..9 input-major.
std::vector<WorkloadType> default_workload_classes();

struct DemandMatrix {
    // (model, workload id) -> request count
    std::map<std::pair<std::string, int>, double> f;

    double at(const std::string& model, int workload) const;
    double total() const;
    bool any_positive() const;
};

// Maps a record to the class with the same threshold quadrant as its
// representative, nearest in (log1p input, log1p output); falls back to the
// globally nearest representative when the quadrant is empty.
int bucket_class(double input_len, double output_len, const std::vector<WorkloadType>& classes,
                 double in_threshold = kDefaultInputThreshold,
                 double out_threshold = kDefaultOutputThreshold);

DemandMatrix ingest_trace(const std::vector<RequestRecord>& records,
                          const std::vector<WorkloadType>& classes,
                          const std::vector<std::string>& known_models);

// Deterministic synthetic trace: class counts by largest-remainder
// apportionment of `total`, record order shuffled by `seed`.
std::vector<RequestRecord> synth_trace(const std::map<int, double>& ratios_percent, long total,
                                       std::uint64_t seed, const std::string& model,
                                       const std::vector<WorkloadType>& classes);

std::vector<RequestRecord> load_trace_file(const std::string& path);
void save_trace_file(const std::string& path, const std::vector<RequestRecord>& records);

std::vector<WorkloadType> workload_classes_from_json(const nlohmann::json& arr);
nlohmann::json workload_classes_to_json(const std::vector<WorkloadType>& classes);

// Demand document: {"classes": [...], "demand": {model: {workload id: count}}}.
struct DemandDocument {
    std::vector<WorkloadType> classes;
    DemandMatrix demand;
};
DemandDocument load_demand_file(const std::string& path);
nlohmann::json demand_to_json(const DemandDocument& doc);

}  // namespace hetplan
