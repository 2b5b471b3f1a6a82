#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcsim/common.hpp"
#include "mcsim/device.hpp"

namespace mcsim {

enum class SystemDesign { dc, hc, mc_star, mc_folded, mc_ring_local, mc_ring_bw, oracle };

inline const char* design_name(SystemDesign d) {
    switch (d) {
        case SystemDesign::dc: return "dc";
        case SystemDesign::hc: return "hc";
        case SystemDesign::mc_star: return "mc_star";
        case SystemDesign::mc_folded: return "mc_folded";
        case SystemDesign::mc_ring_local: return "mc_ring_local";
        case SystemDesign::mc_ring_bw: return "mc_ring_bw";
        case SystemDesign::oracle: return "oracle";
    }
    return "?";
}

inline std::optional<SystemDesign> design_from_name(const std::string& s) {
    for (SystemDesign d : {SystemDesign::dc, SystemDesign::hc, SystemDesign::mc_star,
                           SystemDesign::mc_folded, SystemDesign::mc_ring_local,
                           SystemDesign::mc_ring_bw, SystemDesign::oracle})
        if (s == design_name(d)) return d;
    return std::nullopt;
}

enum class PlacementPolicy { local, bw_aware };

enum class NodeKind { device, memory, host };

struct NodeId {
    NodeKind kind = NodeKind::device;
    int index = 0;
    friend bool operator==(const NodeId&, const NodeId&) = default;
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

inline std::string node_name(NodeId n) {
    const char* prefix = n.kind == NodeKind::device ? "D"
                         : n.kind == NodeKind::memory ? "M"
                                                      : "H";
    return format("%s%d", prefix, n.index);
}

enum class LinkClass { high_bandwidth, pcie };

struct Link {
    NodeId a, b;
    double per_direction_bandwidth = 25e9;
    double hop_latency = 0.5e-6;
    LinkClass link_class = LinkClass::high_bandwidth;
};

struct Ring {
    std::vector<NodeId> cycle;        // cycle[i] -> cycle[i+1], last wraps to first
    std::vector<size_t> member_links; // link id carrying cycle[i] -> cycle[i+1]

    size_t hops() const { return member_links.size(); }
};

struct MemoryNodeSpec {
    u64 dimm_count = 10;
    double dimm_capacity_bytes = 128e9;
    double aggregate_bandwidth = 256e9;
    u64 access_latency_cycles = 100;
    u64 groups = 2;

    double node_capacity_bytes() const {
        return static_cast<double>(dimm_count) * dimm_capacity_bytes;
    }
};

struct HostSpec {
    int socket_count = 0;
    int devices_per_socket = 0;
    double socket_mem_bandwidth = 0.0;
};

// One half of a device's virtualization route: a bundle of parallel links to a
// single backing target (memory node or host).
struct MigrationPath {
    NodeId target;
    std::vector<size_t> links;
    double bandwidth = 0.0;   // per direction, already capped by the memory side
    double hop_latency = 0.5e-6;
};

struct DeviceMigration {
    std::vector<MigrationPath> halves;
    size_t designated = 0;  // the LOCAL-policy half
};

struct FabricOptions {
    double pcie_bandwidth = 16e9;
    bool shared_pcie = false;           // per-device = pcie_aggregate / device_count
    double pcie_aggregate = 128e9;
    double hop_latency = 0.5e-6;
};

struct Topology {
    SystemDesign design = SystemDesign::dc;
    int device_count = 0;
    std::vector<NodeId> nodes;
    std::vector<Link> links;
    std::vector<Ring> rings;
    std::vector<DeviceMigration> migration;  // indexed by device
    HostSpec host;
    MemoryNodeSpec memory_node;
    DeviceSpec device_spec;
    double hop_latency = 0.5e-6;

    bool host_backed() const {
        return design == SystemDesign::dc || design == SystemDesign::hc ||
               design == SystemDesign::oracle;
    }
    bool migrates() const { return design != SystemDesign::oracle; }
    PlacementPolicy policy() const {
        return design == SystemDesign::mc_ring_bw ? PlacementPolicy::bw_aware
                                                  : PlacementPolicy::local;
    }
    std::vector<size_t> ring_hop_multiset() const {
        std::vector<size_t> hops;
        for (const Ring& r : rings) hops.push_back(r.hops());
        std::sort(hops.begin(), hops.end());
        return hops;
    }
    // Per-direction migration bandwidth under the design's placement policy.
    double migration_bandwidth(int device) const {
        const DeviceMigration& m = migration.at(static_cast<size_t>(device));
        if (policy() == PlacementPolicy::bw_aware) {
            double sum = 0;
            for (const MigrationPath& p : m.halves) sum += p.bandwidth;
            return sum;
        }
        return m.halves.at(m.designated).bandwidth;
    }
};

// ---------------------------------------------------------------------------
// Construction helpers
// ---------------------------------------------------------------------------

namespace detail {

struct TopologyBuilder {
    Topology t;

    NodeId device(int i) { return NodeId{NodeKind::device, i}; }
    NodeId memory(int i) { return NodeId{NodeKind::memory, i}; }
    NodeId host(int i) { return NodeId{NodeKind::host, i}; }

    size_t add_link(NodeId a, NodeId b, double bw, LinkClass cls) {
        t.links.push_back(Link{a, b, bw, t.hop_latency, cls});
        return t.links.size() - 1;
    }

    // Builds a ring from an explicit node visit sequence, creating one fresh
    // link per hop. Parallel links between the same endpoints get distinct ids.
    void add_ring(const std::vector<NodeId>& cycle, double bw) {
        Ring r;
        r.cycle = cycle;
        for (size_t i = 0; i < cycle.size(); ++i) {
            NodeId a = cycle[i];
            NodeId b = cycle[(i + 1) % cycle.size()];
            r.member_links.push_back(add_link(a, b, bw, LinkClass::high_bandwidth));
        }
        t.rings.push_back(std::move(r));
    }

    void add_nodes(int devices, int memories, int hosts) {
        for (int i = 0; i < devices; ++i) t.nodes.push_back(device(i));
        for (int i = 0; i < memories; ++i) t.nodes.push_back(memory(i));
        for (int i = 0; i < hosts; ++i) t.nodes.push_back(host(i));
    }
};

inline std::vector<std::vector<int>> dc_ring_orders(int device_count) {
    if (device_count == 8) {
        // three edge-disjoint Hamiltonian cycles on 8 nodes (hub-and-rotate)
        return {{7, 0, 1, 6, 2, 5, 3, 4},
                {7, 1, 2, 0, 3, 6, 4, 5},
                {7, 2, 3, 1, 4, 0, 5, 6}};
    }
    if (device_count == 4) {
        // K4 carries doubled links, giving three 4-cycles
        return {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 1, 3, 2}};
    }
    fail_config(format("dc: unsupported device count %d (supported: 4, 8)", device_count));
}

inline void attach_host(TopologyBuilder& b, int device_count, int devices_per_socket,
                        int links_per_device, double link_bw, LinkClass cls,
                        double socket_bw) {
    int sockets = (device_count + devices_per_socket - 1) / devices_per_socket;
    for (int s = 0; s < sockets; ++s) b.t.nodes.push_back(b.host(s));
    b.t.host = HostSpec{sockets, devices_per_socket, socket_bw};
    b.t.migration.resize(static_cast<size_t>(device_count));
    for (int d = 0; d < device_count; ++d) {
        MigrationPath path;
        path.target = b.host(d / devices_per_socket);
        path.hop_latency = b.t.hop_latency;
        for (int k = 0; k < links_per_device; ++k)
            path.links.push_back(b.add_link(b.device(d), path.target, link_bw, cls));
        path.bandwidth = link_bw * links_per_device;
        b.t.migration[static_cast<size_t>(d)] =
            DeviceMigration{{std::move(path)}, 0};
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline Topology build_dc(int device_count, const DeviceSpec& spec,
                         const FabricOptions& opt = {}) {
    spec.check();
    detail::TopologyBuilder b;
    b.t.design = SystemDesign::dc;
    b.t.device_count = device_count;
    b.t.device_spec = spec;
    b.t.hop_latency = opt.hop_latency;
    b.add_nodes(device_count, 0, 0);
    for (const auto& order : detail::dc_ring_orders(device_count)) {
        std::vector<NodeId> cycle;
        for (int d : order) cycle.push_back(b.device(d));
        b.add_ring(cycle, spec.link_bandwidth);
    }
    double pcie = opt.shared_pcie ? opt.pcie_aggregate / device_count : opt.pcie_bandwidth;
    // the host platform has two sockets; devices balance across them
    int per_socket = std::max(1, (device_count + 1) / 2);
    detail::attach_host(b, device_count, per_socket, 1, pcie, LinkClass::pcie, 80e9);
    return std::move(b.t);
}

inline Topology build_hc(int device_count, const DeviceSpec& spec,
                         const FabricOptions& opt = {}) {
    spec.check();
    if (device_count != 8)
        fail_config(format("hc: unsupported device count %d (supported: 8)", device_count));
    detail::TopologyBuilder b;
    b.t.design = SystemDesign::hc;
    b.t.device_count = device_count;
    b.t.device_spec = spec;
    b.t.hop_latency = opt.hop_latency;
    b.add_nodes(device_count, 0, 0);
    // half the link budget goes to the host; the rest supports one ring
    // (2 links per device) with one endpoint left idle
    std::vector<NodeId> cycle;
    for (int d = 0; d < device_count; ++d) cycle.push_back(b.device(d));
    b.add_ring(cycle, spec.link_bandwidth);
    detail::attach_host(b, device_count, 4, 3, spec.link_bandwidth,
                        LinkClass::high_bandwidth, 300e9);
    return std::move(b.t);
}

enum class StarVariant { star, folded };

inline Topology build_mc_star(int device_count, const DeviceSpec& spec,
                              StarVariant variant, const FabricOptions& opt = {}) {
    spec.check();
    if (device_count != 8)
        fail_config(format("%s: unsupported device count %d (supported: 8)",
                           variant == StarVariant::star ? "mc_star" : "mc_folded",
                           device_count));
    detail::TopologyBuilder b;
    b.t.design = variant == StarVariant::star ? SystemDesign::mc_star
                                              : SystemDesign::mc_folded;
    b.t.device_count = device_count;
    b.t.device_spec = spec;
    b.t.hop_latency = opt.hop_latency;
    b.add_nodes(device_count, device_count, 0);
    double bw = spec.link_bandwidth;

    auto D = [&](int i) { return b.device(((i % 8) + 8) % 8); };
    auto M = [&](int i) { return b.memory(((i % 8) + 8) % 8); };

    if (variant == StarVariant::star) {
        // two device-only rings plus one ring threading every memory node twice
        for (const auto& order : std::vector<std::vector<int>>{
                 {7, 0, 1, 6, 2, 5, 3, 4}, {7, 1, 2, 0, 3, 6, 4, 5}}) {
            std::vector<NodeId> cycle;
            for (int d : order) cycle.push_back(b.device(d));
            b.add_ring(cycle, bw);
        }
        std::vector<NodeId> threaded;
        for (int i = 0; i < 8; ++i) {
            threaded.push_back(M(i));
            threaded.push_back(D(i));
            threaded.push_back(M(i));
        }
        b.add_ring(threaded, bw);  // 24 hops
        // leftover memory endpoints form a memory-only loop that no collective
        // can use (devices are not on it)
        for (int i = 0; i < 8; ++i)
            b.add_link(M(i), M(i + 1), bw, LinkClass::high_bandwidth);
    } else {
        std::vector<NodeId> ring_a;
        for (int i = 0; i < 8; ++i) ring_a.push_back(D(i));
        b.add_ring(ring_a, bw);  // 8 hops
        b.add_ring({M(0), D(0), M(0), D(1), D(2), D(3), M(4), D(4), M(4), D(5),
                    D(6), D(7)},
                   bw);  // 12 hops
        b.add_ring({D(0), M(1), D(1), M(1), M(2), D(2), M(2), M(3), D(3), M(3),
                    D(4), M(5), D(5), M(5), M(6), D(6), M(6), M(7), D(7), M(7)},
                   bw);  // 20 hops
    }

    // designated migration pair: the two parallel D_i <-> M_i links threaded by
    // the wrapped ring(s)
    b.t.migration.resize(static_cast<size_t>(device_count));
    for (int d = 0; d < device_count; ++d) {
        MigrationPath path;
        path.target = M(d);
        path.hop_latency = b.t.hop_latency;
        for (size_t li = 0; li < b.t.links.size(); ++li) {
            const Link& l = b.t.links[li];
            if ((l.a == D(d) && l.b == M(d)) || (l.a == M(d) && l.b == D(d)))
                path.links.push_back(li);
        }
        if (path.links.size() != 2)
            fail_simulation(format("mc_star: device %d expected a doubled link to its "
                                   "memory node, found %zu",
                                   d, path.links.size()));
        path.bandwidth = 2 * bw;
        double dimm_share = b.t.memory_node.aggregate_bandwidth;  // whole node serves one device
        path.bandwidth = std::min(path.bandwidth, dimm_share);
        b.t.migration[static_cast<size_t>(d)] = DeviceMigration{{std::move(path)}, 0};
    }
    return std::move(b.t);
}

inline Topology build_mc_ring(int device_count, const DeviceSpec& spec,
                              PlacementPolicy policy, const FabricOptions& opt = {}) {
    spec.check();
    if (device_count < 2 || device_count % 2 != 0)
        fail_config(format("mc_ring: device count must be even and >= 2 (got %d)",
                           device_count));
    detail::TopologyBuilder b;
    b.t.design = policy == PlacementPolicy::bw_aware ? SystemDesign::mc_ring_bw
                                                     : SystemDesign::mc_ring_local;
    b.t.device_count = device_count;
    b.t.device_spec = spec;
    b.t.hop_latency = opt.hop_latency;
    b.add_nodes(device_count, device_count, 0);
    double bw = spec.link_bandwidth;
    int n = device_count;
    auto D = [&](int i) { return b.device(((i % n) + n) % n); };
    auto M = [&](int i) { return b.memory(((i % n) + n) % n); };

    // N/2 alternating device/memory rings over the same node order; directions
    // alternate so both link directions carry collective traffic
    std::vector<NodeId> clockwise;
    for (int i = 0; i < n; ++i) {
        clockwise.push_back(D(i));
        clockwise.push_back(M(i));
    }
    std::vector<NodeId> counter = clockwise;
    std::reverse(counter.begin() + 1, counter.end());
    int ring_count = static_cast<int>(spec.link_count / 2);
    for (int r = 0; r < ring_count; ++r)
        b.add_ring(r % 2 == 0 ? clockwise : counter, bw);

    b.t.migration.resize(static_cast<size_t>(device_count));
    double half_link_bw = ring_count * bw;  // 3 parallel links per side
    double group_share =
        b.t.memory_node.aggregate_bandwidth / static_cast<double>(b.t.memory_node.groups);
    for (int d = 0; d < device_count; ++d) {
        auto collect = [&](NodeId target) {
            MigrationPath path;
            path.target = target;
            path.hop_latency = b.t.hop_latency;
            for (size_t li = 0; li < b.t.links.size(); ++li) {
                const Link& l = b.t.links[li];
                if ((l.a == D(d) && l.b == target) || (l.a == target && l.b == D(d)))
                    path.links.push_back(li);
            }
            path.bandwidth = std::min(half_link_bw, group_share);
            return path;
        };
        DeviceMigration m;
        m.halves.push_back(collect(M(d - 1)));  // left neighbor
        m.halves.push_back(collect(M(d)));      // right (index-matching) neighbor
        m.designated = 1;
        b.t.migration[static_cast<size_t>(d)] = std::move(m);
    }
    return std::move(b.t);
}

inline Topology build_oracle(int device_count, const DeviceSpec& spec,
                             const FabricOptions& opt = {}) {
    DeviceSpec s = spec;
    s.unbounded_local_memory = true;
    Topology t = build_dc(device_count, s, opt);
    t.design = SystemDesign::oracle;
    return t;
}

// Measurement fixture: a single ring of `participants` devices, one link per
// hop. Used for collective-latency studies as a function of ring size; carries
// no migration paths (unbounded local memory, nothing to virtualize).
inline Topology build_single_ring(int participants, const DeviceSpec& spec,
                                  const FabricOptions& opt = {}) {
    spec.check();
    if (participants < 2) fail_config(format("ring: need at least 2 participants, got %d", participants));
    detail::TopologyBuilder b;
    b.t.design = SystemDesign::oracle;
    b.t.device_count = participants;
    b.t.device_spec = spec;
    b.t.device_spec.unbounded_local_memory = true;
    b.t.hop_latency = opt.hop_latency;
    b.add_nodes(participants, 0, 0);
    std::vector<NodeId> cycle;
    for (int d = 0; d < participants; ++d) cycle.push_back(b.device(d));
    b.add_ring(cycle, spec.link_bandwidth);
    return std::move(b.t);
}

inline Topology build_design(SystemDesign design, int device_count,
                             const DeviceSpec& spec, const FabricOptions& opt = {}) {
    switch (design) {
        case SystemDesign::dc: return build_dc(device_count, spec, opt);
        case SystemDesign::hc: return build_hc(device_count, spec, opt);
        case SystemDesign::mc_star:
            return build_mc_star(device_count, spec, StarVariant::star, opt);
        case SystemDesign::mc_folded:
            return build_mc_star(device_count, spec, StarVariant::folded, opt);
        case SystemDesign::mc_ring_local:
            return build_mc_ring(device_count, spec, PlacementPolicy::local, opt);
        case SystemDesign::mc_ring_bw:
            return build_mc_ring(device_count, spec, PlacementPolicy::bw_aware, opt);
        case SystemDesign::oracle: return build_oracle(device_count, spec, opt);
    }
    fail_config("unknown system design");
}

// ---------------------------------------------------------------------------
// Validation & dump
// ---------------------------------------------------------------------------

inline std::vector<std::string> validate(const Topology& t) {
    std::vector<std::string> violations;
    // link budget: high-bandwidth endpoints per device/memory node <= N
    std::map<NodeId, u64> endpoints;
    for (const Link& l : t.links) {
        if (l.link_class != LinkClass::high_bandwidth) continue;
        endpoints[l.a]++;
        endpoints[l.b]++;
    }
    for (const auto& [node, used] : endpoints) {
        if (node.kind == NodeKind::host) continue;
        if (used > t.device_spec.link_count)
            violations.push_back(format("%s uses %llu high-bandwidth endpoints (budget %llu)",
                                        node_name(node).c_str(),
                                        static_cast<unsigned long long>(used),
                                        static_cast<unsigned long long>(t.device_spec.link_count)));
    }
    // rings: closed cycles over their member links, links used at most once
    // across all rings
    std::set<size_t> used_links;
    for (size_t ri = 0; ri < t.rings.size(); ++ri) {
        const Ring& r = t.rings[ri];
        if (r.cycle.size() != r.member_links.size()) {
            violations.push_back(format("ring %zu: cycle/link length mismatch", ri));
            continue;
        }
        for (size_t i = 0; i < r.cycle.size(); ++i) {
            NodeId a = r.cycle[i];
            NodeId b = r.cycle[(i + 1) % r.cycle.size()];
            size_t li = r.member_links[i];
            if (li >= t.links.size()) {
                violations.push_back(format("ring %zu: bad link id", ri));
                continue;
            }
            const Link& l = t.links[li];
            bool matches = (l.a == a && l.b == b) || (l.a == b && l.b == a);
            if (!matches)
                violations.push_back(format("ring %zu hop %zu: link does not join %s-%s",
                                            ri, i, node_name(a).c_str(),
                                            node_name(b).c_str()));
            if (!used_links.insert(li).second)
                violations.push_back(format("ring %zu: link %zu reused across rings", ri, li));
        }
    }
    for (size_t d = 0; d < t.migration.size(); ++d)
        for (const MigrationPath& p : t.migration[d].halves)
            if (t.migrates() && (p.links.empty() || p.bandwidth <= 0))
                violations.push_back(format("D%zu: empty migration path", d));
    return violations;
}

inline std::string dump_topology(const Topology& t) {
    std::string out;
    out += format("design %s  devices %d\n", design_name(t.design), t.device_count);
    out += "nodes:";
    for (NodeId n : t.nodes) out += " " + node_name(n);
    out += "\n";
    for (size_t i = 0; i < t.links.size(); ++i) {
        const Link& l = t.links[i];
        out += format("link %3zu  %-3s <-> %-3s  %.1f GB/s  %s\n", i,
                      node_name(l.a).c_str(), node_name(l.b).c_str(),
                      l.per_direction_bandwidth / 1e9,
                      l.link_class == LinkClass::pcie ? "pcie" : "hb");
    }
    for (size_t r = 0; r < t.rings.size(); ++r) {
        out += format("ring %zu  hops %zu  ", r, t.rings[r].hops());
        for (NodeId n : t.rings[r].cycle) out += node_name(n) + " ";
        out += "\n";
    }
    for (size_t d = 0; d < t.migration.size(); ++d) {
        const DeviceMigration& m = t.migration[d];
        out += format("migration D%zu:", d);
        for (size_t h = 0; h < m.halves.size(); ++h) {
            const MigrationPath& p = m.halves[h];
            out += format(" [%s%s %.1f GB/s x%zu]", node_name(p.target).c_str(),
                          h == m.designated ? "*" : "", p.bandwidth / 1e9,
                          p.links.size());
        }
        out += "\n";
    }
    if (t.host.socket_count > 0)
        out += format("host: %d sockets x %d devices, %.0f GB/s per socket\n",
                      t.host.socket_count, t.host.devices_per_socket,
                      t.host.socket_mem_bandwidth / 1e9);
    return out;
}

}  // namespace mcsim
