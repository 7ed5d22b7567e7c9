#include "hetplan/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace hetplan {

using nlohmann::json;

double ModelSpec::hidden_size() const {
    return std::sqrt(weight_bytes / (24.0 * std::max(1, num_layers)));
}

const GpuType* Catalog::find(const std::string& name) const {
    for (const auto& t : gpu_types) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

const GpuType& Catalog::at(const std::string& name) const {
    const GpuType* t = find(name);
    if (!t) throw Error(cat("unknown GPU type '", name, "'"));
    return *t;
}

const ModelSpec* CatalogBundle::find_model(const std::string& name) const {
    for (const auto& m : models) {
        if (m.name == name) return &m;
    }
    return nullptr;
}

const ModelSpec& CatalogBundle::model_at(const std::string& name) const {
    const ModelSpec* m = find_model(name);
    if (!m) throw Error(cat("unknown model '", name, "'"));
    return *m;
}

namespace {

void reject_unknown_fields(const json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw Error(cat("unknown field '", it.key(), "' in ", where));
        }
    }
}

double require_number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw Error(cat("missing field '", key, "' in ", where));
    if (!obj[key].is_number()) throw Error(cat("field '", key, "' in ", where, " must be a number"));
    return obj[key].get<double>();
}

std::string require_string(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw Error(cat("missing field '", key, "' in ", where));
    if (!obj[key].is_string()) throw Error(cat("field '", key, "' in ", where, " must be a string"));
    return obj[key].get<std::string>();
}

void check_positive(double v, const std::string& type_name, const std::string& field) {
    if (!(v > 0)) {
        throw Error(cat("invalid ", type_name, ": field '", field, "' must be strictly positive"));
    }
}

GpuType parse_gpu_type(const json& obj) {
    reject_unknown_fields(obj,
                          {"name", "peak_flops", "mem_bandwidth", "mem_capacity", "price",
                           "gpus_per_machine", "zone"},
                          "gpu_types entry");
    GpuType t;
    t.name = require_string(obj, "name", "gpu_types entry");
    const std::string where = cat("GpuType '", t.name, "'");
    t.peak_flops = require_number(obj, "peak_flops", where);
    t.mem_bandwidth = require_number(obj, "mem_bandwidth", where);
    t.mem_capacity = require_number(obj, "mem_capacity", where);
    t.price = require_number(obj, "price", where);
    if (obj.contains("gpus_per_machine")) {
        t.gpus_per_machine = static_cast<int>(require_number(obj, "gpus_per_machine", where));
    }
    if (obj.contains("zone")) t.zone = require_string(obj, "zone", where);

    check_positive(t.peak_flops, where, "peak_flops");
    check_positive(t.mem_bandwidth, where, "mem_bandwidth");
    check_positive(t.mem_capacity, where, "mem_capacity");
    check_positive(t.price, where, "price");
    if (t.gpus_per_machine < 1) {
        throw Error(cat("invalid ", where, ": field 'gpus_per_machine' must be >= 1"));
    }
    return t;
}

ModelSpec parse_model(const json& obj) {
    reject_unknown_fields(obj,
                          {"name", "num_layers", "weight_bytes", "flops_per_token",
                           "kv_bytes_per_token", "min_replica_memory", "mem_overhead_factor"},
                          "models entry");
    ModelSpec m;
    m.name = require_string(obj, "name", "models entry");
    const std::string where = cat("ModelSpec '", m.name, "'");
    m.num_layers = static_cast<int>(require_number(obj, "num_layers", where));
    m.weight_bytes = require_number(obj, "weight_bytes", where);
    m.flops_per_token = require_number(obj, "flops_per_token", where);
    m.kv_bytes_per_token = require_number(obj, "kv_bytes_per_token", where);
    m.min_replica_memory = require_number(obj, "min_replica_memory", where);
    if (obj.contains("mem_overhead_factor")) {
        m.mem_overhead_factor = require_number(obj, "mem_overhead_factor", where);
    }

    if (m.num_layers < 1) throw Error(cat("invalid ", where, ": field 'num_layers' must be >= 1"));
    check_positive(m.weight_bytes, where, "weight_bytes");
    check_positive(m.flops_per_token, where, "flops_per_token");
    check_positive(m.kv_bytes_per_token, where, "kv_bytes_per_token");
    check_positive(m.min_replica_memory, where, "min_replica_memory");
    if (m.mem_overhead_factor < 1.0) {
        throw Error(cat("invalid ", where, ": field 'mem_overhead_factor' must be >= 1"));
    }
    if (m.min_replica_memory < m.weight_bytes / kBytesPerGb) {
        throw Error(cat("invalid ", where,
                        ": field 'min_replica_memory' must cover the model weights (",
                        m.weight_bytes / kBytesPerGb, " GB)"));
    }
    return m;
}

}  // namespace

CatalogBundle load_catalog(const json& doc) {
    if (!doc.is_object()) throw Error("catalog document must be an object");
    reject_unknown_fields(doc, {"gpu_types", "availability", "budget_per_hour", "models"},
                          "catalog document");
    if (!doc.contains("gpu_types") || !doc["gpu_types"].is_array()) {
        throw Error("catalog document requires a 'gpu_types' array");
    }

    CatalogBundle bundle;
    std::set<std::string> names;
    for (const auto& entry : doc["gpu_types"]) {
        GpuType t = parse_gpu_type(entry);
        if (!names.insert(t.name).second) {
            throw Error(cat("invalid GpuType '", t.name, "': field 'name' duplicated in catalog"));
        }
        bundle.catalog.gpu_types.push_back(std::move(t));
    }

    if (doc.contains("availability")) {
        if (!doc["availability"].is_object()) throw Error("'availability' must be an object");
        for (auto it = doc["availability"].begin(); it != doc["availability"].end(); ++it) {
            if (!bundle.catalog.find(it.key())) {
                throw Error(cat("invalid Availability: unknown GPU type '", it.key(), "'"));
            }
            if (!it.value().is_number() || it.value().get<double>() < 0) {
                throw Error(cat("invalid Availability: count for '", it.key(),
                                "' must be a non-negative integer"));
            }
            bundle.availability.counts[it.key()] = it.value().get<int>();
        }
    }

    if (doc.contains("budget_per_hour")) {
        if (!doc["budget_per_hour"].is_number() || !(doc["budget_per_hour"].get<double>() > 0)) {
            throw Error("invalid Budget: field 'budget_per_hour' must be strictly positive");
        }
        bundle.budget.limit = doc["budget_per_hour"].get<double>();
    }

    if (doc.contains("models")) {
        if (!doc["models"].is_array()) throw Error("'models' must be an array");
        std::set<std::string> model_names;
        for (const auto& entry : doc["models"]) {
            ModelSpec m = parse_model(entry);
            if (!model_names.insert(m.name).second) {
                throw Error(cat("invalid ModelSpec '", m.name, "': duplicate model name"));
            }
            bundle.models.push_back(std::move(m));
        }
    }
    return bundle;
}

CatalogBundle load_catalog_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(cat("cannot open catalog file '", path, "'"));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(cat("parse error in '", path, "': ", e.what()));
    }
    return load_catalog(doc);
}

json serialize_catalog(const CatalogBundle& bundle) {
    json doc;
    doc["gpu_types"] = json::array();
    for (const auto& t : bundle.catalog.gpu_types) {
        doc["gpu_types"].push_back({{"name", t.name},
                                    {"peak_flops", t.peak_flops},
                                    {"mem_bandwidth", t.mem_bandwidth},
                                    {"mem_capacity", t.mem_capacity},
                                    {"price", t.price},
                                    {"gpus_per_machine", t.gpus_per_machine},
                                    {"zone", t.zone}});
    }
    doc["availability"] = json::object();
    for (const auto& [name, count] : bundle.availability.counts) {
        doc["availability"][name] = count;
    }
    if (bundle.budget.limit > 0) doc["budget_per_hour"] = bundle.budget.limit;
    doc["models"] = json::array();
    for (const auto& m : bundle.models) {
        doc["models"].push_back({{"name", m.name},
                                 {"num_layers", m.num_layers},
                                 {"weight_bytes", m.weight_bytes},
                                 {"flops_per_token", m.flops_per_token},
                                 {"kv_bytes_per_token", m.kv_bytes_per_token},
                                 {"min_replica_memory", m.min_replica_memory},
                                 {"mem_overhead_factor", m.mem_overhead_factor}});
    }
    return doc;
}

Catalog default_catalog() {
    Catalog c;
    // Data-center parts ship 8 per machine, workstation/consumer parts 4.
    c.gpu_types = {
        {"A6000", 91, 960, 48, 0.83, 4, "default"},
        {"A40", 150, 696, 48, 0.55, 4, "default"},
        {"L40", 181, 864, 48, 0.83, 4, "default"},
        {"A100", 312, 1555, 80, 1.75, 8, "default"},
        {"H100", 1979, 3350, 80, 2.99, 8, "default"},
        {"4090", 83, 1008, 24, 0.53, 4, "default"},
    };
    return c;
}

std::vector<ModelSpec> default_models() {
    ModelSpec small;
    small.name = "llama3-8b";
    small.num_layers = 32;
    small.weight_bytes = 16e9;
    small.flops_per_token = 16e9;
    small.kv_bytes_per_token = 131072;  // 2 (K,V) * 32 layers * 8 kv heads * 128 dim * 2 bytes
    small.min_replica_memory = 16;
    small.mem_overhead_factor = 1.2;

    ModelSpec large;
    large.name = "llama3-70b";
    large.num_layers = 80;
    large.weight_bytes = 140e9;
    large.flops_per_token = 140e9;
    large.kv_bytes_per_token = 327680;  // 2 * 80 layers * 8 kv heads * 128 dim * 2 bytes
    large.min_replica_memory = 140;
    large.mem_overhead_factor = 1.2;

    return {small, large};
}

}  // namespace hetplan
