#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsim/common.hpp"
#include "mcsim/device.hpp"
#include "mcsim/fabric.hpp"
#include "mcsim/workload.hpp"

namespace mcsim {

struct ExperimentConfig {
    std::string workload;  // bundled name or path to a network document
    SystemDesign design = SystemDesign::dc;   // first entry of `designs`
    std::vector<SystemDesign> designs;        // sweep targets, in request order
    TrainingConfig training;
    DeviceSpec device;
    FabricOptions fabric;
    std::string out_dir;  // empty: resolved by the caller (flag/env/default)
};

namespace detail {

inline void expect_object(const nlohmann::json& j, const std::string& ctx) {
    if (!j.is_object())
        fail_config(format("%s: expected a JSON object", ctx.c_str()));
}

inline double get_number(const nlohmann::json& j, const std::string& ctx,
                         const char* field, double fallback) {
    if (!j.contains(field)) return fallback;
    const auto& v = j.at(field);
    if (!v.is_number())
        fail_config(format("%s.%s: expected a number", ctx.c_str(), field));
    return v.get<double>();
}

inline u64 get_u64(const nlohmann::json& j, const std::string& ctx,
                   const char* field, u64 fallback) {
    if (!j.contains(field)) return fallback;
    const auto& v = j.at(field);
    if (!v.is_number_integer() || v.get<i64>() < 0)
        fail_config(format("%s.%s: expected a non-negative integer", ctx.c_str(), field));
    return v.get<u64>();
}

inline bool get_bool(const nlohmann::json& j, const std::string& ctx,
                     const char* field, bool fallback) {
    if (!j.contains(field)) return fallback;
    const auto& v = j.at(field);
    if (!v.is_boolean())
        fail_config(format("%s.%s: expected true or false", ctx.c_str(), field));
    return v.get<bool>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& ctx,
                              const char* field, const std::string& fallback,
                              bool required = false) {
    if (!j.contains(field)) {
        if (required) fail_config(format("%s.%s: missing required field", ctx.c_str(), field));
        return fallback;
    }
    const auto& v = j.at(field);
    if (!v.is_string())
        fail_config(format("%s.%s: expected a string", ctx.c_str(), field));
    return v.get<std::string>();
}

}  // namespace detail

// "dc" or a comma-separated sweep list such as "dc,mc_ring_bw".
inline std::vector<SystemDesign> parse_design_list(const std::string& text,
                                                   const std::string& ctx) {
    std::vector<SystemDesign> designs;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        auto d = design_from_name(item);
        if (!d)
            fail_config(format(
                "%s: unknown design '%s' (expected dc, hc, mc_star, mc_folded, "
                "mc_ring_local, mc_ring_bw, or oracle)",
                ctx.c_str(), item.c_str()));
        designs.push_back(*d);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return designs;
}

inline DeviceSpec parse_device_spec(const nlohmann::json& j, const std::string& ctx,
                                    DeviceSpec base = {}) {
    detail::expect_object(j, ctx);
    static const std::vector<std::string> known = {
        "num_pes",          "macs_per_pe",
        "frequency_hz",     "sram_per_pe_bytes",
        "local_mem_bandwidth", "local_mem_latency_cycles",
        "local_mem_capacity_bytes", "link_count",
        "link_bandwidth",   "mac_efficiency",
        "unbounded_local_memory"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            fail_config(format("%s.%s: unknown field", ctx.c_str(), it.key().c_str()));
    base.num_pes = detail::get_u64(j, ctx, "num_pes", base.num_pes);
    base.macs_per_pe = detail::get_u64(j, ctx, "macs_per_pe", base.macs_per_pe);
    base.freq_hz = detail::get_number(j, ctx, "frequency_hz", base.freq_hz);
    base.sram_per_pe_bytes = detail::get_u64(j, ctx, "sram_per_pe_bytes", base.sram_per_pe_bytes);
    base.local_mem_bandwidth =
        detail::get_number(j, ctx, "local_mem_bandwidth", base.local_mem_bandwidth);
    base.local_mem_latency_cycles =
        detail::get_u64(j, ctx, "local_mem_latency_cycles", base.local_mem_latency_cycles);
    base.local_mem_capacity_bytes =
        detail::get_number(j, ctx, "local_mem_capacity_bytes", base.local_mem_capacity_bytes);
    base.link_count = detail::get_u64(j, ctx, "link_count", base.link_count);
    base.link_bandwidth = detail::get_number(j, ctx, "link_bandwidth", base.link_bandwidth);
    base.mac_efficiency = detail::get_number(j, ctx, "mac_efficiency", base.mac_efficiency);
    base.unbounded_local_memory =
        detail::get_bool(j, ctx, "unbounded_local_memory", base.unbounded_local_memory);
    base.check();
    return base;
}

inline FabricOptions parse_fabric_options(const nlohmann::json& j, const std::string& ctx,
                                          FabricOptions base = {}) {
    detail::expect_object(j, ctx);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k != "pcie_bandwidth" && k != "shared_pcie" && k != "pcie_aggregate" &&
            k != "hop_latency")
            fail_config(format("%s.%s: unknown field", ctx.c_str(), k.c_str()));
    }
    base.pcie_bandwidth = detail::get_number(j, ctx, "pcie_bandwidth", base.pcie_bandwidth);
    base.shared_pcie = detail::get_bool(j, ctx, "shared_pcie", base.shared_pcie);
    base.pcie_aggregate = detail::get_number(j, ctx, "pcie_aggregate", base.pcie_aggregate);
    base.hop_latency = detail::get_number(j, ctx, "hop_latency", base.hop_latency);
    if (base.pcie_bandwidth <= 0 || base.pcie_aggregate <= 0)
        fail_config(format("%s: bandwidths must be strictly positive", ctx.c_str()));
    if (base.hop_latency < 0)
        fail_config(format("%s.hop_latency: must be non-negative", ctx.c_str()));
    return base;
}

inline ExperimentConfig parse_experiment(const nlohmann::json& j) {
    const std::string ctx = "experiment";
    detail::expect_object(j, ctx);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k != "workload" && k != "design" && k != "parallelism" &&
            k != "batch_size" && k != "device_count" && k != "device" && k != "fabric" &&
            k != "out_dir")
            fail_config(format("%s.%s: unknown field", ctx.c_str(), k.c_str()));
    }
    ExperimentConfig cfg;
    cfg.workload = detail::get_string(j, ctx, "workload", "", true);
    std::string design = detail::get_string(j, ctx, "design", "", true);
    cfg.designs = parse_design_list(design, ctx + ".design");
    cfg.design = cfg.designs.front();
    cfg.out_dir = detail::get_string(j, ctx, "out_dir", "");
    std::string par = detail::get_string(j, ctx, "parallelism", "data");
    auto p = parallelism_from_name(par);
    if (!p)
        fail_config(format("%s.parallelism: unknown strategy '%s' (expected data or model)",
                           ctx.c_str(), par.c_str()));
    cfg.training.parallelism = *p;
    cfg.training.batch_size = detail::get_u64(j, ctx, "batch_size", cfg.training.batch_size);
    if (cfg.training.batch_size == 0)
        fail_config("experiment.batch_size: must be strictly positive");
    cfg.training.device_count =
        detail::get_u64(j, ctx, "device_count", cfg.training.device_count);
    if (cfg.training.device_count == 0)
        fail_config("experiment.device_count: must be strictly positive");
    if (cfg.training.batch_size % cfg.training.device_count != 0)
        fail_config(format(
            "experiment.batch_size: %llu is not divisible by device_count %llu",
            static_cast<unsigned long long>(cfg.training.batch_size),
            static_cast<unsigned long long>(cfg.training.device_count)));
    if (j.contains("device"))
        cfg.device = parse_device_spec(j.at("device"), ctx + ".device", cfg.device);
    if (j.contains("fabric"))
        cfg.fabric = parse_fabric_options(j.at("fabric"), ctx + ".fabric", cfg.fabric);
    return cfg;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_config(format("cannot open '%s'", path.c_str()));
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_config(format("%s: invalid JSON (%s)", path.c_str(), e.what()));
    }
    return j;
}

inline ExperimentConfig load_experiment(const std::string& path) {
    return parse_experiment(read_json_file(path));
}

// Bundled workload documents live under <source>/workloads; a workload spec is
// either one of those names or a path to a compatible JSON document.
inline std::string resolve_workload_path(const std::string& name_or_path) {
    namespace fs = std::filesystem;
    if (fs::exists(name_or_path)) return name_or_path;
#ifdef MCSIM_SOURCE_DIR
    fs::path bundled = fs::path(MCSIM_SOURCE_DIR) / "workloads" / (name_or_path + ".json");
    if (fs::exists(bundled)) return bundled.string();
#endif
    fail_config(format("workload '%s' not found (not a file, and no bundled "
                       "document with that name)",
                       name_or_path.c_str()));
}

inline NetworkDAG load_workload(const std::string& name_or_path) {
    std::string path = resolve_workload_path(name_or_path);
    return load_network(read_json_file(path));
}

inline Topology build_topology(const ExperimentConfig& cfg) {
    return build_design(cfg.design, static_cast<int>(cfg.training.device_count),
                        cfg.device, cfg.fabric);
}

}  // namespace mcsim
