#pragma once

#include "mcsim/common.hpp"
#include "mcsim/workload.hpp"

namespace mcsim {

struct DeviceSpec {
    u64 num_pes = 1024;
    u64 macs_per_pe = 125;
    double freq_hz = 1e9;
    u64 sram_per_pe_bytes = 32 * 1024;
    double local_mem_bandwidth = 900e9;      // bytes/s
    u64 local_mem_latency_cycles = 100;
    double local_mem_capacity_bytes = 16e9;
    u64 link_count = 6;                      // N
    double link_bandwidth = 25e9;            // B, bytes/s per direction
    double mac_efficiency = 0.75;
    bool unbounded_local_memory = false;     // oracle sentinel

    void check() const {
        if (num_pes == 0 || macs_per_pe == 0 || freq_hz <= 0 ||
            local_mem_bandwidth <= 0 || local_mem_capacity_bytes <= 0 ||
            link_count == 0 || link_bandwidth <= 0)
            fail_config("device: all spec fields must be positive");
        if (mac_efficiency <= 0.0 || mac_efficiency > 1.0)
            fail_config("device.mac_efficiency: must be in (0, 1]");
    }
};

struct PhaseCost {
    double seconds = 0.0;
    double mac_bound_fraction = 0.0;  // 1 when MAC-limited, 0 when memory-limited
    u64 bytes_touched = 0;
};

enum class Phase { forward, backward };

inline double peak_mac_throughput(const DeviceSpec& spec) {
    return static_cast<double>(spec.num_pes) *
           static_cast<double>(spec.macs_per_pe) * spec.freq_hz;
}

// Roofline per layer phase: whichever of the MAC array or local memory is the
// bottleneck sets the time; double-buffered SRAM hides the cheaper side. The
// fixed memory latency is charged once per phase (bulk transfers).
inline PhaseCost phase_cost(u64 macs, u64 bytes_touched, const DeviceSpec& spec) {
    PhaseCost c;
    c.bytes_touched = bytes_touched;
    if (macs == 0 && bytes_touched == 0) return c;
    double mac_time =
        static_cast<double>(macs) / (peak_mac_throughput(spec) * spec.mac_efficiency);
    double mem_time = static_cast<double>(bytes_touched) / spec.local_mem_bandwidth;
    c.seconds = (mac_time > mem_time ? mac_time : mem_time) +
                static_cast<double>(spec.local_mem_latency_cycles) / spec.freq_hz;
    c.mac_bound_fraction = mac_time > mem_time ? 1.0 : 0.0;
    return c;
}

inline PhaseCost layer_compute_time(const TensorFootprint& f, const DeviceSpec& spec,
                                    Phase phase) {
    u64 bytes, macs;
    if (phase == Phase::forward) {
        bytes = checked_add(checked_add(f.feature_in_bytes, f.weight_bytes, "fwd bytes"),
                            f.feature_out_bytes, "fwd bytes");
        macs = f.fwd_macs;
    } else {
        bytes = checked_add(
            checked_add(checked_add(f.grad_in_bytes, f.feature_in_bytes, "bwd bytes"),
                        checked_add(f.weight_bytes, f.grad_out_bytes, "bwd bytes"),
                        "bwd bytes"),
            f.weight_grad_bytes, "bwd bytes");
        macs = f.bwd_macs;
    }
    return phase_cost(macs, bytes, spec);
}

}  // namespace mcsim
