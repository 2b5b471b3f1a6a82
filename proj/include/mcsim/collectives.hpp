#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mcsim/common.hpp"
#include "mcsim/fabric.hpp"

namespace mcsim {

enum class CollectiveKind { all_reduce, all_gather, broadcast };

inline const char* collective_name(CollectiveKind k) {
    switch (k) {
        case CollectiveKind::all_reduce: return "all_reduce";
        case CollectiveKind::all_gather: return "all_gather";
        case CollectiveKind::broadcast: return "broadcast";
    }
    return "?";
}

// Ring-step count: reduce+gather passes for all_reduce, one pass otherwise.
inline u64 collective_steps(CollectiveKind kind, int participants) {
    if (participants <= 1) return 0;
    u64 p = static_cast<u64>(participants);
    return kind == CollectiveKind::all_reduce ? 2 * (p - 1) : p - 1;
}

struct RingShare {
    size_t ring = 0;
    u64 bytes = 0;           // slice of the payload carried by this ring
    int participants = 0;
    u64 steps = 0;
    double chunk_bytes = 0;  // bytes moved per link per step
    double gap_hops = 0;     // mean link hops between consecutive participants
    double seconds = 0;
};

struct CollectiveCost {
    double seconds = 0;
    std::vector<RingShare> rings;
};

namespace detail {

inline int ring_participants(const Ring& r) {
    int count = 0;
    for (NodeId n : r.cycle)
        if (n.kind == NodeKind::device) ++count;
    return count;
}

inline double ring_bandwidth(const Topology& t, const Ring& r) {
    double bw = std::numeric_limits<double>::infinity();
    for (size_t li : r.member_links)
        bw = std::min(bw, t.links[li].per_direction_bandwidth);
    return bw;
}

}  // namespace detail

// Splits `bytes` across the topology's rings proportionally to each ring's
// asymptotic bandwidth (bandwidth / participants is identical across built-in
// designs, so this reduces to a near-even integer split), then charges each
// ring steps * (chunk transfer + per-hop latency). The slowest ring bounds the
// whole collective since rings run concurrently.
inline CollectiveCost collective_cost(const Topology& t, CollectiveKind kind, u64 bytes) {
    CollectiveCost cost;
    if (bytes == 0 || t.rings.empty()) return cost;
    std::vector<double> weights;
    double total_weight = 0;
    for (const Ring& r : t.rings) {
        double w = detail::ring_bandwidth(t, r);
        weights.push_back(w);
        total_weight += w;
    }
    double cum = 0;
    u64 assigned_before = 0;
    for (size_t ri = 0; ri < t.rings.size(); ++ri) {
        const Ring& r = t.rings[ri];
        cum += weights[ri];
        u64 assigned_through =
            ri + 1 == t.rings.size()
                ? bytes
                : static_cast<u64>(static_cast<double>(bytes) * (cum / total_weight));
        RingShare share;
        share.ring = ri;
        share.bytes = assigned_through - assigned_before;
        assigned_before = assigned_through;
        share.participants = detail::ring_participants(r);
        if (share.participants <= 1 || share.bytes == 0) {
            cost.rings.push_back(share);
            continue;
        }
        share.steps = collective_steps(kind, share.participants);
        share.chunk_bytes =
            static_cast<double>(share.bytes) / share.participants;
        share.gap_hops = static_cast<double>(r.hops()) / share.participants;
        double step_seconds = share.chunk_bytes / weights[ri] +
                              share.gap_hops * t.hop_latency;
        share.seconds = static_cast<double>(share.steps) * step_seconds;
        cost.rings.push_back(share);
        cost.seconds = std::max(cost.seconds, share.seconds);
    }
    return cost;
}

inline double collective_time(const Topology& t, CollectiveKind kind, u64 bytes) {
    return collective_cost(t, kind, bytes).seconds;
}

// ---------------------------------------------------------------------------
// Functional ring algorithms (reference semantics for tests)
// ---------------------------------------------------------------------------

struct CollectiveStep {
    int phase = 0;  // 0 = reduce-scatter, 1 = gather/relay
    int step = 0;
    int src = 0;
    int dst = 0;
    int chunk = 0;
    u64 elements = 0;
};

using CollectiveTrace = std::vector<CollectiveStep>;

namespace detail {

inline std::pair<size_t, size_t> chunk_range(size_t n, int p, int chunk) {
    size_t lo = n * static_cast<size_t>(chunk) / static_cast<size_t>(p);
    size_t hi = n * static_cast<size_t>(chunk + 1) / static_cast<size_t>(p);
    return {lo, hi};
}

}  // namespace detail

// Chunked ring all-reduce (sum): p-1 reduce-scatter steps followed by p-1
// gather steps. Every rank ends with the elementwise sum.
inline std::vector<std::vector<double>> simulate_all_reduce(
    std::vector<std::vector<double>> data, CollectiveTrace* trace = nullptr) {
    int p = static_cast<int>(data.size());
    if (p <= 1) return data;
    size_t n = data[0].size();
    for (const auto& v : data)
        if (v.size() != n) fail_simulation("all_reduce: rank payload sizes differ");
    for (int s = 0; s < p - 1; ++s) {
        // snapshot send buffers so all ranks act on the same step state
        std::vector<std::vector<double>> snapshot = data;
        for (int r = 0; r < p; ++r) {
            int dst = (r + 1) % p;
            int chunk = ((r - s) % p + p) % p;
            auto [lo, hi] = detail::chunk_range(n, p, chunk);
            for (size_t i = lo; i < hi; ++i) data[dst][i] += snapshot[r][i];
            if (trace)
                trace->push_back({0, s, r, dst, chunk, static_cast<u64>(hi - lo)});
        }
    }
    for (int s = 0; s < p - 1; ++s) {
        std::vector<std::vector<double>> snapshot = data;
        for (int r = 0; r < p; ++r) {
            int dst = (r + 1) % p;
            int chunk = ((r + 1 - s) % p + p) % p;
            auto [lo, hi] = detail::chunk_range(n, p, chunk);
            for (size_t i = lo; i < hi; ++i) data[dst][i] = snapshot[r][i];
            if (trace)
                trace->push_back({1, s, r, dst, chunk, static_cast<u64>(hi - lo)});
        }
    }
    return data;
}

// Ring all-gather: every rank contributes its shard; all ranks end with the
// concatenation shard_0 | shard_1 | ... | shard_{p-1}.
inline std::vector<std::vector<double>> simulate_all_gather(
    const std::vector<std::vector<double>>& shards, CollectiveTrace* trace = nullptr) {
    int p = static_cast<int>(shards.size());
    std::vector<std::vector<std::vector<double>>> held(static_cast<size_t>(p));
    for (int r = 0; r < p; ++r) {
        held[static_cast<size_t>(r)].resize(static_cast<size_t>(p));
        held[static_cast<size_t>(r)][static_cast<size_t>(r)] = shards[static_cast<size_t>(r)];
    }
    for (int s = 0; s < p - 1; ++s) {
        auto snapshot = held;
        for (int r = 0; r < p; ++r) {
            int dst = (r + 1) % p;
            int chunk = ((r - s) % p + p) % p;
            held[static_cast<size_t>(dst)][static_cast<size_t>(chunk)] =
                snapshot[static_cast<size_t>(r)][static_cast<size_t>(chunk)];
            if (trace)
                trace->push_back({1, s, r, dst, chunk,
                                  static_cast<u64>(shards[static_cast<size_t>(chunk)].size())});
        }
    }
    std::vector<std::vector<double>> out(static_cast<size_t>(p));
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c)
            out[static_cast<size_t>(r)].insert(out[static_cast<size_t>(r)].end(),
                                               held[static_cast<size_t>(r)][static_cast<size_t>(c)].begin(),
                                               held[static_cast<size_t>(r)][static_cast<size_t>(c)].end());
    return out;
}

// Ring broadcast: the root's payload is relayed around the ring in p-1 steps.
inline std::vector<std::vector<double>> simulate_broadcast(
    const std::vector<double>& root_data, int p, CollectiveTrace* trace = nullptr) {
    std::vector<std::vector<double>> out(static_cast<size_t>(p));
    if (p <= 0) return out;
    out[0] = root_data;
    for (int s = 0; s < p - 1; ++s) {
        out[static_cast<size_t>(s + 1)] = out[static_cast<size_t>(s)];
        if (trace)
            trace->push_back({1, s, s, s + 1, 0, static_cast<u64>(root_data.size())});
    }
    return out;
}

}  // namespace mcsim
