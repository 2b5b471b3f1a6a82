#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsim/common.hpp"
#include "mcsim/engine.hpp"
#include "mcsim/fabric.hpp"
#include "mcsim/workload.hpp"

namespace mcsim {

struct ResultRow {
    std::string workload;
    std::string design;
    std::string parallelism;
    u64 batch_size = 0;
    u64 device_count = 0;
    double total_seconds = 0;
    double exposed_compute = 0;
    double exposed_sync = 0;
    double exposed_migration = 0;
    double speedup_vs_dc = 0;  // 0 when not applicable
    double host_bw_avg = 0;    // bytes/s aggregated over all devices
    double host_bw_peak = 0;
    double max_link_utilization = 0;  // busiest link direction, fraction of capacity
    u64 offload_bytes = 0;            // per device
    u64 prefetch_bytes = 0;
    u64 peak_resident_bytes = 0;
    std::string error;  // non-empty: the row records a failed run
};

inline ResultRow make_row(const std::string& workload, const Topology& t,
                          const TrainingConfig& cfg, const IterationResult& r) {
    ResultRow row;
    row.workload = workload;
    row.design = design_name(t.design);
    row.parallelism = parallelism_name(cfg.parallelism);
    row.batch_size = cfg.batch_size;
    row.device_count = cfg.device_count;
    row.total_seconds = r.total_seconds;
    row.exposed_compute = r.exposed_compute;
    row.exposed_sync = r.exposed_sync;
    row.exposed_migration = r.exposed_migration;
    if (r.total_seconds > 0) {
        row.host_bw_avg = r.host_bytes / r.total_seconds;
        row.host_bw_peak = r.host_bw_peak;
        for (const auto& [key, bytes] : r.link_dir_bytes) {
            const Link& link = t.links[key / 2];
            double util = bytes / (link.per_direction_bandwidth * r.total_seconds);
            row.max_link_utilization = std::max(row.max_link_utilization, util);
        }
    }
    row.offload_bytes = r.offload_bytes;
    row.prefetch_bytes = r.prefetch_bytes;
    row.peak_resident_bytes = r.peak_resident_bytes;
    return row;
}

inline ResultRow error_row(const std::string& workload, const std::string& design,
                           const std::string& parallelism, u64 batch, u64 devices,
                           const std::string& message) {
    ResultRow row;
    row.workload = workload;
    row.design = design;
    row.parallelism = parallelism;
    row.batch_size = batch;
    row.device_count = devices;
    row.error = message;
    return row;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::string result_csv_header() {
    return "workload,design,parallelism,batch_size,device_count,total_seconds,"
           "exposed_compute_seconds,exposed_sync_seconds,exposed_migration_seconds,"
           "speedup_vs_dc,host_bw_avg_bytes_per_s,host_bw_peak_bytes_per_s,"
           "max_link_utilization,offload_bytes,prefetch_bytes,peak_resident_bytes,error";
}

inline std::string to_csv(const ResultRow& r) {
    return format(
        "%s,%s,%s,%llu,%llu,%s,%s,%s,%s,%s,%s,%s,%s,%llu,%llu,%llu,%s",
        csv_escape(r.workload).c_str(), csv_escape(r.design).c_str(),
        csv_escape(r.parallelism).c_str(),
        static_cast<unsigned long long>(r.batch_size),
        static_cast<unsigned long long>(r.device_count),
        format_double(r.total_seconds).c_str(), format_double(r.exposed_compute).c_str(),
        format_double(r.exposed_sync).c_str(), format_double(r.exposed_migration).c_str(),
        format_double(r.speedup_vs_dc).c_str(), format_double(r.host_bw_avg).c_str(),
        format_double(r.host_bw_peak).c_str(),
        format_double(r.max_link_utilization).c_str(),
        static_cast<unsigned long long>(r.offload_bytes),
        static_cast<unsigned long long>(r.prefetch_bytes),
        static_cast<unsigned long long>(r.peak_resident_bytes),
        csv_escape(r.error).c_str());
}

inline std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::string out = result_csv_header() + "\n";
    for (const ResultRow& r : rows) out += to_csv(r) + "\n";
    return out;
}

inline nlohmann::json to_json(const ResultRow& r) {
    return nlohmann::json{{"workload", r.workload},
                          {"design", r.design},
                          {"parallelism", r.parallelism},
                          {"batch_size", r.batch_size},
                          {"device_count", r.device_count},
                          {"total_seconds", r.total_seconds},
                          {"exposed_compute_seconds", r.exposed_compute},
                          {"exposed_sync_seconds", r.exposed_sync},
                          {"exposed_migration_seconds", r.exposed_migration},
                          {"speedup_vs_dc", r.speedup_vs_dc},
                          {"host_bw_avg_bytes_per_s", r.host_bw_avg},
                          {"host_bw_peak_bytes_per_s", r.host_bw_peak},
                          {"max_link_utilization", r.max_link_utilization},
                          {"offload_bytes", r.offload_bytes},
                          {"prefetch_bytes", r.prefetch_bytes},
                          {"peak_resident_bytes", r.peak_resident_bytes},
                          {"error", r.error}};
}

inline nlohmann::json rows_to_json(const std::vector<ResultRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ResultRow& r : rows) arr.push_back(to_json(r));
    return arr;
}

// Fixed-width console table: one line per run, milliseconds for readability.
inline std::string format_table(const std::vector<ResultRow>& rows) {
    std::string out = format("%-12s %-14s %-6s %6s %12s %11s %11s %11s %9s\n",
                             "workload", "design", "par", "batch", "total_ms",
                             "compute_ms", "sync_ms", "mig_ms", "vs_dc");
    for (const ResultRow& r : rows) {
        if (!r.error.empty()) {
            out += format("%-12s %-14s %-6s %6llu  error: %s\n", r.workload.c_str(),
                          r.design.c_str(), r.parallelism.c_str(),
                          static_cast<unsigned long long>(r.batch_size),
                          r.error.c_str());
            continue;
        }
        out += format("%-12s %-14s %-6s %6llu %12.4f %11.4f %11.4f %11.4f %9.3f\n",
                      r.workload.c_str(), r.design.c_str(), r.parallelism.c_str(),
                      static_cast<unsigned long long>(r.batch_size),
                      r.total_seconds * 1e3, r.exposed_compute * 1e3,
                      r.exposed_sync * 1e3, r.exposed_migration * 1e3,
                      r.speedup_vs_dc);
    }
    return out;
}

inline double harmonic_mean(const std::vector<double>& values) {
    if (values.empty()) fail_simulation("harmonic mean of empty set");
    double denom = 0;
    for (double v : values) {
        if (v <= 0) fail_simulation("harmonic mean requires positive values");
        denom += 1.0 / v;
    }
    return static_cast<double>(values.size()) / denom;
}

}  // namespace mcsim
