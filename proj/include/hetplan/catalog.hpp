#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hetplan/common.hpp"

namespace hetplan {

struct GpuType {
    std::string name;
    double peak_flops = 0;     // TFLOP/s, fp16
    double mem_bandwidth = 0;  // GB/s
    double mem_capacity = 0;   // GB
    double price = 0;          // USD/hour per GPU
    int gpus_per_machine = 4;  // max intra-machine TP group size
    std::string zone = "default";
};

struct Availability {
    std::map<std::string, int> counts;

    int of(const std::string& type) const {
        auto it = counts.find(type);
        return it == counts.end() ? 0 : it->second;
    }
};

struct Budget {
    double limit = 0;  // USD/hour
};

struct ModelSpec {
    std::string name;
    int num_layers = 0;
    double weight_bytes = 0;        // fp16 parameter bytes
    double flops_per_token = 0;     // ~2x parameter count
    double kv_bytes_per_token = 0;  // both K and V, all layers
    double min_replica_memory = 0;  // GB, least memory for one replica
    double mem_overhead_factor = 1.2;

    // Square-layer approximation: one layer holds ~12*h^2 params (4 attention
    // + 8 MLP), 2 bytes each.
    double hidden_size() const;
};

struct Catalog {
    std::vector<GpuType> gpu_types;

    const GpuType* find(const std::string& name) const;
    const GpuType& at(const std::string& name) const;
};

struct CatalogBundle {
    Catalog catalog;
    Availability availability;
    Budget budget;
    std::vector<ModelSpec> models;

    const ModelSpec* find_model(const std::string& name) const;
    const ModelSpec& model_at(const std::string& name) const;
};

// Strict loader: unknown fields are rejected, invariant violations name the
// offending type and field.
CatalogBundle load_catalog(const nlohmann::json& doc);
CatalogBundle load_catalog_file(const std::string& path);
nlohmann::json serialize_catalog(const CatalogBundle& bundle);

// The six stock cloud GPU types with list prices.
Catalog default_catalog();
// Llama3-8B / Llama3-70B style model cards used by the CLI when a catalog
// file does not carry its own.
std::vector<ModelSpec> default_models();

}  // namespace hetplan
