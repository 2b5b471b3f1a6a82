#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mcsim/common.hpp"
#include "mcsim/fabric.hpp"
#include "mcsim/workload.hpp"

namespace mcsim {

inline constexpr u64 kPageBytes = 2ull * 1024 * 1024;

inline u64 pages_for(u64 bytes) { return (bytes + kPageBytes - 1) / kPageBytes; }

// One-way transfer time for `bytes` between a device and its backing store
// under the design's placement policy. Latency is charged once per transfer.
inline double migration_time(const Topology& t, int device, u64 bytes) {
    if (bytes == 0) return 0;
    if (!t.migrates())
        fail_simulation("migration requested on a design with unbounded local memory");
    double bw = t.migration_bandwidth(device);
    const DeviceMigration& m = t.migration.at(static_cast<size_t>(device));
    return static_cast<double>(bytes) / bw + m.halves.at(m.designated).hop_latency;
}

// A feature-map stash the training loop must keep somewhere between its last
// forward use and its backward uses. Positions index the program's forward
// (resp. backward) unit order; recurrent layers contribute one unit per
// timestep slice, every other layer exactly one.
struct StashTensor {
    std::string id;
    u64 bytes = 0;
    int producer_pos = 0;
    int last_forward_use = 0;    // forward position; eligible to leave after this
    int first_backward_use = -1; // backward position ordinal (-1: not needed)
    int last_backward_use = -1;  // backward position ordinal (-1: dies with fwd)
    LayerKind producer_kind = LayerKind::conv;
    double recompute_seconds = 0;   // forward recompute cost at this sharding
    std::vector<int> source_stashes;  // inputs the producer reads when rebuilt
    bool eligible_recompute = false;
};

enum class StashDisposition { resident, offloaded, recomputed };

inline const char* disposition_name(StashDisposition d) {
    switch (d) {
        case StashDisposition::resident: return "resident";
        case StashDisposition::offloaded: return "offloaded";
        case StashDisposition::recomputed: return "recomputed";
    }
    return "?";
}

struct PagePlacement {
    size_t half = 0;  // index into DeviceMigration::halves
    u64 pages = 0;
    u64 bytes = 0;
};

struct StashPlan {
    StashDisposition disposition = StashDisposition::resident;
    std::vector<PagePlacement> placement;
    double transfer_seconds = 0;   // one-way migration time for this stash
    int effective_deadline = -1;   // backward position by which it must be back
};

// Placement and movement plan for one device's stash set: which tensors stay,
// which round-trip through backing memory, which are rebuilt by recompute, and
// where offloaded pages land.
struct AddressSpaceMap {
    std::vector<StashPlan> entries;
    u64 offloaded_bytes = 0;
    u64 recomputed_bytes = 0;
    u64 resident_bytes = 0;
    u64 peak_resident_bytes = 0;  // from the static residency walk
};

namespace detail {

inline std::vector<PagePlacement> place_pages(const Topology& t, int device, u64 bytes) {
    const DeviceMigration& m = t.migration.at(static_cast<size_t>(device));
    u64 pages = pages_for(bytes);
    std::vector<PagePlacement> out;
    if (t.policy() == PlacementPolicy::bw_aware && m.halves.size() >= 2) {
        // stripe page-granular halves; an odd page count favors the left half
        u64 left_pages = (pages + 1) / 2;
        u64 right_pages = pages - left_pages;
        u64 left_bytes = std::min(left_pages * kPageBytes, bytes);
        out.push_back({0, left_pages, left_bytes});
        out.push_back({1, right_pages, bytes - left_bytes});
    } else {
        out.push_back({m.designated, pages, bytes});
    }
    return out;
}

}  // namespace detail

// Plans residency for a stash set under the stress policy: every stash leaves
// local memory after its last forward use and must be back (prefetched or
// recomputed) before its first backward use. Cheap re-runnable producers are
// recomputed instead of round-tripped when the rebuild is faster than the
// round-trip and none of their inputs is itself recomputed.
//
// `resident_floor_bytes` covers everything that never leaves the device
// (weights, gradients, workspace). The static walk checks the plan fits the
// device's local capacity at every step; an overflow is a simulation error.
inline AddressSpaceMap plan_migration(const Topology& t, int device,
                                      const std::vector<StashTensor>& stash,
                                      u64 resident_floor_bytes) {
    AddressSpaceMap map;
    map.entries.resize(stash.size());
    const bool unbounded = t.device_spec.unbounded_local_memory;

    if (unbounded) {
        u64 total = resident_floor_bytes;
        for (size_t i = 0; i < stash.size(); ++i) {
            map.entries[i].disposition = StashDisposition::resident;
            map.entries[i].effective_deadline = stash[i].first_backward_use;
            map.resident_bytes += stash[i].bytes;
            total = checked_add(total, stash[i].bytes, "resident bytes");
        }
        map.peak_resident_bytes = total;
        return map;
    }

    for (size_t i = 0; i < stash.size(); ++i) {
        const StashTensor& s = stash[i];
        StashPlan& plan = map.entries[i];
        plan.effective_deadline = s.first_backward_use;
        double round_trip = 2 * migration_time(t, device, s.bytes);
        bool source_recomputed = false;
        for (int src : s.source_stashes)
            if (map.entries[static_cast<size_t>(src)].disposition ==
                StashDisposition::recomputed)
                source_recomputed = true;
        if (s.eligible_recompute && !source_recomputed &&
            s.recompute_seconds < round_trip) {
            plan.disposition = StashDisposition::recomputed;
            map.recomputed_bytes += s.bytes;
        } else {
            plan.disposition = StashDisposition::offloaded;
            plan.placement = detail::place_pages(t, device, s.bytes);
            plan.transfer_seconds = migration_time(t, device, s.bytes);
            map.offloaded_bytes += s.bytes;
        }
    }

    // A recomputed stash pulls its sources back early: they must all be on
    // device when the rebuild runs, i.e. by the recomputed tensor's deadline.
    for (size_t i = 0; i < stash.size(); ++i) {
        if (map.entries[i].disposition != StashDisposition::recomputed) continue;
        int needed_by = map.entries[i].effective_deadline;
        if (needed_by < 0) continue;
        for (int src : stash[i].source_stashes) {
            StashPlan& sp = map.entries[static_cast<size_t>(src)];
            if (sp.effective_deadline < 0 || needed_by < sp.effective_deadline)
                sp.effective_deadline = needed_by;
        }
    }

    // Static residency walk over forward then backward program order.
    int max_fwd = 0, max_bwd = 0;
    for (const StashTensor& s : stash) {
        max_fwd = std::max(max_fwd, s.last_forward_use);
        max_bwd = std::max({max_bwd, s.last_backward_use, s.first_backward_use});
    }
    u64 occupancy = resident_floor_bytes;
    u64 peak = occupancy;
    for (int l = 0; l <= max_fwd; ++l) {
        for (size_t i = 0; i < stash.size(); ++i)
            if (stash[i].producer_pos == l) {
                occupancy = checked_add(occupancy, stash[i].bytes, "resident bytes");
            }
        peak = std::max(peak, occupancy);
        for (size_t i = 0; i < stash.size(); ++i)
            if (stash[i].last_forward_use == l &&
                map.entries[i].disposition != StashDisposition::resident)
                occupancy -= stash[i].bytes;
    }
    for (int pos = 0; pos <= max_bwd; ++pos) {
        for (size_t i = 0; i < stash.size(); ++i)
            if (map.entries[i].disposition != StashDisposition::resident &&
                map.entries[i].effective_deadline == pos)
                occupancy = checked_add(occupancy, stash[i].bytes, "resident bytes");
        peak = std::max(peak, occupancy);
        for (size_t i = 0; i < stash.size(); ++i)
            if (stash[i].last_backward_use == pos) occupancy -= stash[i].bytes;
    }
    map.peak_resident_bytes = peak;

    double capacity = t.device_spec.local_mem_capacity_bytes;
    if (static_cast<double>(peak) > capacity)
        fail_simulation(format(
            "virtual memory plan infeasible: peak resident %llu bytes exceeds "
            "local capacity %.0f bytes",
            static_cast<unsigned long long>(peak), capacity));
    return map;
}

inline std::string dump_plan(const std::vector<StashTensor>& stash,
                             const AddressSpaceMap& map) {
    std::string out;
    for (size_t i = 0; i < stash.size(); ++i) {
        const StashTensor& s = stash[i];
        const StashPlan& p = map.entries[i];
        out += format("%-14s %12llu B  %-10s fwd_last %3d  bwd_first %3d", s.id.c_str(),
                      static_cast<unsigned long long>(s.bytes),
                      disposition_name(p.disposition), s.last_forward_use,
                      p.effective_deadline);
        for (const PagePlacement& pp : p.placement)
            out += format("  half%zu:%llu pages", pp.half,
                          static_cast<unsigned long long>(pp.pages));
        out += "\n";
    }
    out += format("offloaded %llu B  recomputed %llu B  resident %llu B  peak %llu B\n",
                  static_cast<unsigned long long>(map.offloaded_bytes),
                  static_cast<unsigned long long>(map.recomputed_bytes),
                  static_cast<unsigned long long>(map.resident_bytes),
                  static_cast<unsigned long long>(map.peak_resident_bytes));
    return out;
}

}  // namespace mcsim
