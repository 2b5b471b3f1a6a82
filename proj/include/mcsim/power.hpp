#pragma once

#include <string>
#include <vector>

#include "mcsim/common.hpp"

namespace mcsim {

// Modeled training-node baseline power draw (devices, host, fans, VRs).
inline constexpr double kBaselineSystemWatts = 3200.0;

struct DimmSpec {
    std::string name;
    u64 capacity_gb = 0;   // decimal GB (1e9 bytes)
    double watts = 0;      // per-DIMM draw at full utilization
};

inline const std::vector<DimmSpec>& dimm_catalog() {
    static const std::vector<DimmSpec> rows = {
        {"rdimm_8gb", 8, 2.9},     {"rdimm_16gb", 16, 6.6},
        {"lrdimm_32gb", 32, 8.7},  {"lrdimm_64gb", 64, 10.2},
        {"lrdimm_128gb", 128, 12.7},
    };
    return rows;
}

inline const DimmSpec& dimm_by_name(const std::string& name) {
    for (const DimmSpec& d : dimm_catalog())
        if (d.name == name) return d;
    fail_config(format("unknown DIMM type '%s'", name.c_str()));
}

inline double round_to(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

inline double node_memory_watts(const DimmSpec& d, u64 dimm_count) {
    return round_to(d.watts * static_cast<double>(dimm_count), 1);
}

inline double node_capacity_bytes(const DimmSpec& d, u64 dimm_count) {
    return static_cast<double>(d.capacity_gb) * 1e9 * static_cast<double>(dimm_count);
}

inline double gb_per_watt(const DimmSpec& d) {
    return round_to(static_cast<double>(d.capacity_gb) / d.watts, 1);
}

struct PowerDelta {
    double added_watts = 0;
    double fraction = 0;  // of the baseline system draw
};

inline PowerDelta system_power_delta(const DimmSpec& d, u64 node_count,
                                     u64 dimms_per_node,
                                     double baseline_watts = kBaselineSystemWatts) {
    PowerDelta delta;
    delta.added_watts = round_to(
        d.watts * static_cast<double>(dimms_per_node) * static_cast<double>(node_count), 1);
    delta.fraction = delta.added_watts / baseline_watts;
    return delta;
}

// Speedup discounted by the memory subsystem's share of added system power.
inline double perf_per_watt(double speedup, double power_fraction) {
    return speedup / (1.0 + power_fraction);
}

// Deterministic catalog table (8 memory nodes x 10 DIMMs system deltas).
inline std::string power_table_csv() {
    std::string out =
        "dimm,capacity_gb,dimm_watts,node_watts,gb_per_watt,"
        "system_delta_watts,system_delta_percent\n";
    for (const DimmSpec& d : dimm_catalog()) {
        PowerDelta delta = system_power_delta(d, 8, 10);
        out += format("%s,%llu,%.10g,%.10g,%.10g,%.10g,%.10g\n", d.name.c_str(),
                      static_cast<unsigned long long>(d.capacity_gb), d.watts,
                      node_memory_watts(d, 10), gb_per_watt(d), delta.added_watts,
                      round_to(delta.fraction * 100.0, 2));
    }
    return out;
}

}  // namespace mcsim
