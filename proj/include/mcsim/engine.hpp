#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "mcsim/collectives.hpp"
#include "mcsim/common.hpp"
#include "mcsim/device.hpp"
#include "mcsim/fabric.hpp"
#include "mcsim/vmem.hpp"
#include "mcsim/workload.hpp"

namespace mcsim {

// ---------------------------------------------------------------------------
// Per-layer work sizing under a parallelism strategy (representative device)
// ---------------------------------------------------------------------------
//
// data parallelism: every layer processes batch/devices samples and holds the
// full weight set; weight gradients are all-reduced after each layer's
// backward pass (non-blocking).
//
// model parallelism (hybrid): spatial layers (conv/pool/norm/joins) stay
// batch-sharded exactly like data parallelism; dense layers (fully-connected,
// recurrent) process the full batch with their output dimension sharded
// across devices. Entering a dense layer requires an all-gather of its full
// input; each dense layer's backward ends with a blocking all-reduce of the
// full input-gradient.
//
// Recurrent layers execute at timestep granularity: forward and backward
// unroll into chained slices, each hidden-state slice is stashed (and under
// model parallelism gathered/reduced) on its own, so offload and prefetch
// traffic pipelines against the timestep loop instead of round-tripping the
// whole sequence at once.

struct LayerSizing {
    bool sharded = false;      // dense layer under model parallelism
    u64 samples = 0;           // samples this device processes
    u64 x_bytes = 0;           // input feature bytes read per pass
    u64 y_bytes = 0;           // output feature bytes produced (per device)
    u64 w_bytes = 0;           // weight bytes held per device
    u64 fwd_macs = 0;
    u64 bwd_macs = 0;
    u64 gather_bytes = 0;       // blocking all-gather before forward
    u64 scatter_bytes = 0;      // blocking all-reduce after backward
    u64 weight_sync_bytes = 0;  // non-blocking weight-gradient all-reduce
    u64 self_gather_bytes = 0;  // recurrent overlap all-gather (forward)
    u64 self_reduce_bytes = 0;  // recurrent overlap all-reduce (backward)
};

inline bool layer_output_sharded(const NetworkDAG& net, int id, Parallelism par) {
    if (par != Parallelism::model) return false;
    LayerKind k = net.layer(id).kind;
    return k == LayerKind::fully_connected || kind_is_recurrent(k);
}

// True when layer `id` sees its full input replicated on every device without
// an explicit gather (recurrent layers replicate their own output).
inline bool layer_input_replicated(const NetworkDAG& net, int id, Parallelism par) {
    if (par != Parallelism::model) return false;
    const LayerSpec& l = net.layer(id);
    if (l.predecessors.empty()) return false;
    for (int p : l.predecessors)
        if (!kind_is_recurrent(net.layer(p).kind)) return false;
    return true;
}

inline std::vector<LayerSizing> compute_sizings(const NetworkDAG& net,
                                                const TrainingConfig& cfg) {
    if (cfg.device_count == 0 || cfg.batch_size % cfg.device_count != 0)
        fail_config(format("batch_size %llu must be divisible by device_count %llu",
                           static_cast<unsigned long long>(cfg.batch_size),
                           static_cast<unsigned long long>(cfg.device_count)));
    u64 d = cfg.device_count;
    u64 eb = net.element_bytes;
    std::vector<LayerSizing> out(net.size());
    for (int i = 0; i < static_cast<int>(net.size()); ++i) {
        const LayerSpec& l = net.layer(i);
        LayerSizing& s = out[static_cast<size_t>(i)];
        u64 in_elems = layer_in_elems_per_sample(net, i);
        u64 out_elems = layer_out_elems_per_sample(net, i);
        u64 w_elems = layer_weight_elems(l);
        u64 macs = layer_fwd_macs_per_sample(net, i);
        s.sharded = layer_output_sharded(net, i, cfg.parallelism);
        if (!s.sharded) {
            s.samples = cfg.batch_size / d;
            s.x_bytes = checked_mul(checked_mul(in_elems, s.samples, "bytes"), eb, "bytes");
            s.y_bytes = checked_mul(checked_mul(out_elems, s.samples, "bytes"), eb, "bytes");
            s.w_bytes = checked_mul(w_elems, eb, "bytes");
            s.fwd_macs = checked_mul(macs, s.samples, "macs");
            if (kind_has_weights(l.kind))
                s.weight_sync_bytes = cfg.device_count > 1 ? s.w_bytes : 0;
        } else {
            s.samples = cfg.batch_size;
            u64 full_in = checked_mul(checked_mul(in_elems, s.samples, "bytes"), eb, "bytes");
            u64 full_out = checked_mul(checked_mul(out_elems, s.samples, "bytes"), eb, "bytes");
            s.x_bytes = full_in;                      // reads the gathered input
            s.y_bytes = full_out / d;                 // output-dimension shard
            s.w_bytes = checked_mul(w_elems, eb, "bytes") / d;
            s.fwd_macs = checked_mul(macs, s.samples, "macs") / d;
            if (cfg.device_count > 1) {
                if (!layer_input_replicated(net, i, cfg.parallelism))
                    s.gather_bytes = full_in;
                if (!l.predecessors.empty()) s.scatter_bytes = full_in;
                if (kind_is_recurrent(l.kind)) {
                    s.self_gather_bytes = full_out;
                    s.self_reduce_bytes = full_out;
                }
            }
        }
        s.bwd_macs = kind_has_weights(l.kind) ? 2 * s.fwd_macs : s.fwd_macs;
    }
    return out;
}

inline TensorFootprint sizing_footprint(const LayerSizing& s) {
    TensorFootprint f;
    f.feature_in_bytes = s.x_bytes;
    f.feature_out_bytes = s.y_bytes;
    f.weight_bytes = s.w_bytes;
    f.grad_in_bytes = s.y_bytes;
    f.grad_out_bytes = s.x_bytes;
    f.weight_grad_bytes = s.w_bytes;
    f.fwd_macs = s.fwd_macs;
    f.bwd_macs = s.bwd_macs;
    return f;
}

// ---------------------------------------------------------------------------
// Task program
// ---------------------------------------------------------------------------

enum class LaneKind { compute, sync, mig_out, mig_in };
enum class WorkClass { compute, sync, migration };

struct Task {
    int id = -1;
    LaneKind lane = LaneKind::compute;
    WorkClass cls = WorkClass::compute;
    std::string label;
    double seconds = 0;  // duration for compute/sync lanes
    u64 bytes = 0;       // payload for migration lanes (fluid)
    std::vector<int> deps;
    int deadline = std::numeric_limits<int>::max();  // EDF key on migration lanes
    std::vector<std::pair<size_t, double>> link_dir_bytes;  // key = link*2 + dir
};

struct Program {
    std::vector<Task> tasks;
    std::vector<int> compute_fifo;
    std::vector<int> sync_fifo;
    std::vector<int> mig_out;
    std::vector<int> mig_in;
    std::vector<StashTensor> stash;
    AddressSpaceMap plan;
    double compute_seconds_total = 0;   // sum of compute-lane durations
    double sync_seconds_total = 0;      // sum of sync-lane durations
    double recompute_seconds_total = 0;
    u64 sync_payload_bytes = 0;
    u64 offload_bytes = 0;
    u64 prefetch_bytes = 0;
    u64 resident_floor_bytes = 0;
};

namespace detail {

inline size_t link_dir_key(const Topology& t, size_t link, NodeId from) {
    return link * 2 + (t.links[link].a == from ? 0u : 1u);
}

inline void add_collective_accounting(const Topology& t, Task& task,
                                      CollectiveKind kind, u64 bytes) {
    CollectiveCost cost = collective_cost(t, kind, bytes);
    task.seconds = cost.seconds;
    for (const RingShare& share : cost.rings) {
        if (share.steps == 0) continue;
        const Ring& ring = t.rings[share.ring];
        double per_link = static_cast<double>(share.steps) * share.chunk_bytes;
        for (size_t i = 0; i < ring.member_links.size(); ++i) {
            size_t key = link_dir_key(t, ring.member_links[i], ring.cycle[i]);
            task.link_dir_bytes.emplace_back(key, per_link);
        }
    }
}

inline void add_migration_accounting(const Topology& t, Task& task, int device,
                                     const StashPlan& plan, bool outbound) {
    NodeId dev{NodeKind::device, device};
    const DeviceMigration& m = t.migration.at(static_cast<size_t>(device));
    for (const PagePlacement& pp : plan.placement) {
        if (pp.bytes == 0) continue;
        const MigrationPath& path = m.halves.at(pp.half);
        double per_link = static_cast<double>(pp.bytes) /
                          static_cast<double>(path.links.size());
        for (size_t li : path.links) {
            NodeId from = outbound ? dev : path.target;
            task.link_dir_bytes.emplace_back(link_dir_key(t, li, from), per_link);
        }
    }
}

}  // namespace detail

// Builds the one-iteration task program for the representative device:
// forward sweep, backward sweep, collectives required by the parallelism
// strategy, and the offload/prefetch/recompute traffic dictated by the
// residency plan. Recurrent layers unroll into per-timestep units so their
// stash traffic and collectives pipeline against the timestep loop.
inline Program build_program(const Topology& t, const NetworkDAG& net,
                             const TrainingConfig& cfg) {
    if (static_cast<int>(cfg.device_count) != t.device_count)
        fail_config(format("device_count %llu does not match topology (%d devices)",
                           static_cast<unsigned long long>(cfg.device_count),
                           t.device_count));
    Program prog;
    std::vector<LayerSizing> sizing = compute_sizings(net, cfg);
    int n = static_cast<int>(net.size());
    u64 eb = net.element_bytes;
    const DeviceSpec& dev = t.device_spec;
    const int device = 0;

    // tasks are addressed by id; the vector may reallocate between additions
    auto new_task = [&](LaneKind lane, WorkClass cls, std::string label) -> int {
        Task task;
        task.id = static_cast<int>(prog.tasks.size());
        task.lane = lane;
        task.cls = cls;
        task.label = std::move(label);
        prog.tasks.push_back(std::move(task));
        return prog.tasks.back().id;
    };
    auto T = [&](int id) -> Task& { return prog.tasks[static_cast<size_t>(id)]; };
    auto add_sync = [&](const std::string& label, CollectiveKind kind, u64 bytes,
                        const std::vector<int>& deps) -> int {
        int id = new_task(LaneKind::sync, WorkClass::sync, label);
        detail::add_collective_accounting(t, T(id), kind, bytes);
        for (int d : deps)
            if (d >= 0) T(id).deps.push_back(d);
        prog.sync_fifo.push_back(id);
        prog.sync_seconds_total += T(id).seconds;
        prog.sync_payload_bytes = checked_add(prog.sync_payload_bytes, bytes, "bytes");
        return id;
    };

    // ---- unit decomposition ------------------------------------------------
    // Forward program order visits units (layer ascending, slice ascending);
    // backward order is its exact reverse. A recurrent layer contributes one
    // unit per timestep (capped), everything else a single unit.
    constexpr u64 kMaxSlicesPerLayer = 256;
    std::vector<int> unit_count(static_cast<size_t>(n), 1);
    std::vector<int> unit_start(static_cast<size_t>(n), 0);
    int total_units = 0;
    for (int i = 0; i < n; ++i) {
        const LayerSpec& l = net.layer(i);
        if (kind_is_recurrent(l.kind))
            unit_count[static_cast<size_t>(i)] =
                static_cast<int>(std::min(l.timesteps, kMaxSlicesPerLayer));
        unit_start[static_cast<size_t>(i)] = total_units;
        total_units += unit_count[static_cast<size_t>(i)];
    }
    const int U = total_units;
    std::vector<int> unit_layer(static_cast<size_t>(U));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < unit_count[static_cast<size_t>(i)]; ++k)
            unit_layer[static_cast<size_t>(unit_start[static_cast<size_t>(i)] + k)] = i;
    auto unit_of = [&](int layer, int slice) {
        return unit_start[static_cast<size_t>(layer)] + slice;
    };
    auto last_unit = [&](int layer) {
        return unit_start[static_cast<size_t>(layer)] + unit_count[static_cast<size_t>(layer)] - 1;
    };
    auto bwd_pos = [&](int unit) { return U - 1 - unit; };
    // slice k of a payload split into K near-equal contiguous parts (exact sum)
    auto slice_part = [](u64 total, int k, int K) -> u64 {
        return total * static_cast<u64>(k + 1) / static_cast<u64>(K) -
               total * static_cast<u64>(k) / static_cast<u64>(K);
    };
    // per-unit roofline footprint: MACs and feature bytes split across slices,
    // the single weight pass amortized over them
    auto unit_footprint = [&](const LayerSizing& s, int k, int K) {
        TensorFootprint f;
        f.feature_in_bytes = slice_part(s.x_bytes, k, K);
        f.feature_out_bytes = slice_part(s.y_bytes, k, K);
        f.weight_bytes = slice_part(s.w_bytes, k, K);
        f.grad_in_bytes = f.feature_out_bytes;
        f.grad_out_bytes = f.feature_in_bytes;
        f.weight_grad_bytes = f.weight_bytes;
        f.fwd_macs = slice_part(s.fwd_macs, k, K);
        f.bwd_macs = slice_part(s.bwd_macs, k, K);
        return f;
    };
    auto unit_suffix = [&](int i, int k) {
        return unit_count[static_cast<size_t>(i)] > 1
                   ? std::to_string(i) + "." + std::to_string(k)
                   : std::to_string(i);
    };

    // ---- stash set -----------------------------------------------------
    // network input first, then one entry per unit output (bytes may be zero
    // when the tensor dies before backward, e.g. pre-gather shards)
    std::vector<std::vector<int>> out_stash(static_cast<size_t>(n));
    std::vector<int> stash_gate_unit;  // unit whose self-gather gates the offload
    auto push_stash = [&](StashTensor st, int gate_unit) -> int {
        prog.stash.push_back(std::move(st));
        stash_gate_unit.push_back(gate_unit);
        return static_cast<int>(prog.stash.size()) - 1;
    };

    std::vector<int> input_stash;
    {
        std::vector<int> readers;  // source layers reading their own input shard
        u64 bytes = 0;
        int last_use = 0;
        for (int i = 0; i < n; ++i) {
            const LayerSpec& l = net.layer(i);
            if (!l.predecessors.empty()) continue;
            last_use = std::max(last_use, last_unit(i));
            if (sizing[static_cast<size_t>(i)].sharded) continue;  // gathered copy carries the need
            readers.push_back(i);
            u64 in_elems = layer_in_elems_per_sample(net, i);
            bytes = checked_add(
                bytes,
                checked_mul(checked_mul(in_elems, sizing[static_cast<size_t>(i)].samples, "bytes"),
                            eb, "bytes"),
                "bytes");
        }
        if (readers.size() == 1 && unit_count[static_cast<size_t>(readers[0])] > 1) {
            // a single recurrent reader consumes the input timestep by timestep
            int i = readers[0];
            int K = unit_count[static_cast<size_t>(i)];
            for (int k = 0; k < K; ++k) {
                StashTensor st;
                st.id = "x:in." + std::to_string(k);
                st.producer_kind = LayerKind::activation;
                st.producer_pos = 0;
                st.bytes = slice_part(bytes, k, K);
                st.last_forward_use = unit_of(i, k);
                st.first_backward_use = bwd_pos(unit_of(i, k));
                st.last_backward_use = st.first_backward_use;
                input_stash.push_back(push_stash(std::move(st), -1));
            }
        } else {
            StashTensor st;
            st.id = "x:in";
            st.producer_kind = LayerKind::activation;
            st.producer_pos = 0;
            st.bytes = bytes;
            st.last_forward_use = last_use;
            int first = -1, last = -1;  // backward positions
            for (int i : readers) {
                int fp = bwd_pos(last_unit(i));   // reader's first backward unit
                int lp = bwd_pos(unit_of(i, 0));  // reader's last backward unit
                if (first < 0 || fp < first) first = fp;
                if (last < 0 || lp > last) last = lp;
            }
            st.first_backward_use = first;
            st.last_backward_use = last;
            input_stash.push_back(push_stash(std::move(st), -1));
        }
    }
    for (int i = 0; i < n; ++i) {
        const LayerSpec& l = net.layer(i);
        const LayerSizing& s = sizing[static_cast<size_t>(i)];
        const int K = unit_count[static_cast<size_t>(i)];
        const std::vector<int>& succs = net.successors[static_cast<size_t>(i)];
        out_stash[static_cast<size_t>(i)].reserve(static_cast<size_t>(K));
        if (!s.sharded) {
            // keep the per-device output; under model parallelism dense
            // consumers hold their own gathered copy, so only spatial
            // consumers (and a recurrent producer itself) still need it
            bool self_need = kind_is_recurrent(l.kind) || succs.empty();
            bool consumer_need = false;
            for (int c : succs)
                if (!sizing[static_cast<size_t>(c)].sharded) consumer_need = true;
            for (int k = 0; k < K; ++k) {
                StashTensor st;
                st.id = "y:" + unit_suffix(i, k);
                st.producer_kind = l.kind;
                st.producer_pos = unit_of(i, k);
                st.last_forward_use = st.producer_pos;
                if (K > 1 && k + 1 < K)  // the next timestep reads this state
                    st.last_forward_use = unit_of(i, k + 1);
                for (int c : succs)
                    st.last_forward_use = std::max(st.last_forward_use, last_unit(c));
                if (self_need || consumer_need) {
                    st.bytes = slice_part(s.y_bytes, k, K);
                    int first = -1, last = -1;
                    auto note = [&](int fp, int lp) {
                        if (first < 0 || fp < first) first = fp;
                        if (last < 0 || lp > last) last = lp;
                    };
                    if (self_need) {
                        int next = K > 1 ? std::min(k + 1, K - 1) : k;
                        note(bwd_pos(unit_of(i, next)), bwd_pos(unit_of(i, k)));
                    }
                    for (int c : succs)
                        if (!sizing[static_cast<size_t>(c)].sharded)
                            note(bwd_pos(last_unit(c)), bwd_pos(unit_of(c, 0)));
                    st.first_backward_use = first;
                    st.last_backward_use = last;
                }  // else: dies at the gather boundary (bytes stay zero)
                out_stash[static_cast<size_t>(i)].push_back(push_stash(std::move(st), -1));
            }
        } else if (kind_is_recurrent(l.kind)) {
            // gathered hidden-state slices: consumers read them as input and
            // the producer re-reads them during backward-through-time
            u64 full_out = checked_mul(
                checked_mul(layer_out_elems_per_sample(net, i), cfg.batch_size, "bytes"),
                eb, "bytes");
            for (int k = 0; k < K; ++k) {
                StashTensor st;
                st.id = "gx:" + unit_suffix(i, k);
                st.producer_kind = l.kind;
                st.producer_pos = unit_of(i, k);
                st.bytes = slice_part(full_out, k, K);
                int next = std::min(k + 1, K - 1);
                st.last_forward_use = unit_of(i, next);
                int first = bwd_pos(unit_of(i, next));
                int last = bwd_pos(unit_of(i, k));
                for (int c : succs) {
                    st.last_forward_use = std::max(st.last_forward_use, last_unit(c));
                    first = std::min(first, bwd_pos(last_unit(c)));
                    last = std::max(last, bwd_pos(unit_of(c, 0)));
                }
                st.first_backward_use = first;
                st.last_backward_use = last;
                out_stash[static_cast<size_t>(i)].push_back(
                    push_stash(std::move(st), unit_of(i, k)));
            }
        } else {
            // dense layer: the gathered full input is what backward needs (for
            // the weight gradient); the pre-gather shard is never stashed
            StashTensor st;
            st.id = "gx:" + std::to_string(i);
            st.producer_kind = l.kind;
            st.producer_pos = unit_of(i, 0);
            st.bytes = s.x_bytes;  // full gathered input
            st.last_forward_use = unit_of(i, 0);
            st.first_backward_use = bwd_pos(unit_of(i, 0));
            st.last_backward_use = st.first_backward_use;
            out_stash[static_cast<size_t>(i)].push_back(push_stash(std::move(st), -1));
        }
    }
    // recompute eligibility: cheap spatial transforms (elementwise maps,
    // pooling, normalization, joins) whose inputs are all materialized
    for (int i = 0; i < n; ++i) {
        const LayerSpec& l = net.layer(i);
        if (unit_count[static_cast<size_t>(i)] != 1) continue;
        bool kind_ok = l.kind == LayerKind::activation ||
                       l.kind == LayerKind::pooling ||
                       l.kind == LayerKind::normalization;
        if (!kind_ok) continue;
        int si = out_stash[static_cast<size_t>(i)][0];
        StashTensor& st = prog.stash[static_cast<size_t>(si)];
        if (st.bytes == 0) continue;
        std::vector<int> srcs;
        if (l.predecessors.empty()) {
            srcs = input_stash;
        } else {
            for (int p : l.predecessors)
                for (int idx : out_stash[static_cast<size_t>(p)]) srcs.push_back(idx);
        }
        bool materialized = !srcs.empty();
        for (int idx : srcs)
            if (prog.stash[static_cast<size_t>(idx)].bytes == 0) materialized = false;
        if (!materialized) continue;
        st.eligible_recompute = true;
        st.source_stashes = std::move(srcs);
        st.recompute_seconds =
            layer_compute_time(sizing_footprint(sizing[static_cast<size_t>(i)]), dev,
                               Phase::forward)
                .seconds;
    }

    // ---- residency plan ---------------------------------------------------
    u64 weights = 0;
    for (const LayerSizing& s : sizing)
        weights = checked_add(weights, s.w_bytes, "bytes");
    prog.resident_floor_bytes = checked_mul(weights, 2, "bytes");  // W + dW
    prog.plan = plan_migration(t, device, prog.stash, prog.resident_floor_bytes);

    // ---- forward sweep ----------------------------------------------------
    std::vector<int> fwd_task(static_cast<size_t>(U), -1);
    std::vector<int> self_gather_task(static_cast<size_t>(U), -1);
    for (int i = 0; i < n; ++i) {
        const LayerSizing& s = sizing[static_cast<size_t>(i)];
        const int K = unit_count[static_cast<size_t>(i)];
        const std::vector<int>& preds = net.layer(i).predecessors;
        for (int k = 0; k < K; ++k) {
            int u = unit_of(i, k);
            std::string suffix = unit_suffix(i, k);
            // tasks delivering this unit's input
            std::vector<int> input_deps;
            auto add_input = [&](int unit) {
                input_deps.push_back(fwd_task[static_cast<size_t>(unit)]);
                int sag = self_gather_task[static_cast<size_t>(unit)];
                if (sag >= 0) input_deps.push_back(sag);
            };
            if (k > 0) add_input(unit_of(i, k - 1));  // hidden-state chain
            for (int p : preds) {
                bool aligned = K > 1 && unit_count[static_cast<size_t>(p)] == K;
                if (aligned)
                    add_input(unit_of(p, k));
                else if (k == 0)
                    add_input(last_unit(p));
            }
            int gather_id = -1;
            if (s.gather_bytes > 0)
                gather_id = add_sync("ag:" + suffix, CollectiveKind::all_gather,
                                     slice_part(s.gather_bytes, k, K), input_deps);
            int fwd = new_task(LaneKind::compute, WorkClass::compute, "fwd:" + suffix);
            T(fwd).seconds =
                layer_compute_time(unit_footprint(s, k, K), dev, Phase::forward).seconds;
            if (gather_id >= 0) T(fwd).deps.push_back(gather_id);
            for (int d : input_deps) T(fwd).deps.push_back(d);
            prog.compute_fifo.push_back(fwd);
            prog.compute_seconds_total += T(fwd).seconds;
            fwd_task[static_cast<size_t>(u)] = fwd;
            if (s.self_gather_bytes > 0)
                // the produced state shard is replicated before the next
                // timestep (or any consumer) reads it
                self_gather_task[static_cast<size_t>(u)] =
                    add_sync("sag:" + suffix, CollectiveKind::all_gather,
                             slice_part(s.self_gather_bytes, k, K), {fwd});
        }
    }
    int forward_end = fwd_task[static_cast<size_t>(U - 1)];

    // ---- migration tasks --------------------------------------------------
    std::vector<int> prefetch_task(prog.stash.size(), -1);
    std::vector<int> recompute_task(prog.stash.size(), -1);
    for (size_t si = 0; si < prog.stash.size(); ++si) {
        const StashTensor& st = prog.stash[si];
        const StashPlan& plan = prog.plan.entries[si];
        if (plan.disposition != StashDisposition::offloaded || st.bytes == 0) continue;
        int off = new_task(LaneKind::mig_out, WorkClass::migration, "off:" + st.id);
        T(off).bytes = st.bytes;
        T(off).deadline = plan.effective_deadline >= 0 ? plan.effective_deadline
                                                       : std::numeric_limits<int>::max();
        T(off).deps.push_back(fwd_task[static_cast<size_t>(st.last_forward_use)]);
        int gate = stash_gate_unit[si];
        if (gate >= 0 && self_gather_task[static_cast<size_t>(gate)] >= 0)
            T(off).deps.push_back(self_gather_task[static_cast<size_t>(gate)]);
        detail::add_migration_accounting(t, T(off), device, plan, true);
        prog.mig_out.push_back(off);
        prog.offload_bytes = checked_add(prog.offload_bytes, st.bytes, "bytes");
        if (plan.effective_deadline >= 0) {
            int pre = new_task(LaneKind::mig_in, WorkClass::migration, "pre:" + st.id);
            T(pre).bytes = st.bytes;
            T(pre).deadline = plan.effective_deadline;
            T(pre).deps.push_back(off);
            T(pre).deps.push_back(forward_end);  // prefetches belong to the backward phase
            detail::add_migration_accounting(t, T(pre), device, plan, false);
            prog.mig_in.push_back(pre);
            prog.prefetch_bytes = checked_add(prog.prefetch_bytes, st.bytes, "bytes");
            prefetch_task[si] = pre;
        }
    }

    // ---- backward sweep ---------------------------------------------------
    int prev_blocking = -1;  // blocking collective the next backward must wait for
    for (int pos = 0; pos < U; ++pos) {
        int u = U - 1 - pos;
        int i = unit_layer[static_cast<size_t>(u)];
        int k = u - unit_start[static_cast<size_t>(i)];
        const LayerSizing& s = sizing[static_cast<size_t>(i)];
        const int K = unit_count[static_cast<size_t>(i)];
        std::string suffix = unit_suffix(i, k);
        // recompute tasks land in the compute lane just before their consumer
        for (size_t si = 0; si < prog.stash.size(); ++si) {
            if (prog.plan.entries[si].disposition != StashDisposition::recomputed)
                continue;
            if (prog.plan.entries[si].effective_deadline != pos) continue;
            const StashTensor& st = prog.stash[si];
            int rc = new_task(LaneKind::compute, WorkClass::compute, "rc:" + st.id);
            T(rc).seconds = st.recompute_seconds;
            for (int src : st.source_stashes) {
                int dep = prefetch_task[static_cast<size_t>(src)];
                if (dep >= 0) T(rc).deps.push_back(dep);
            }
            prog.compute_fifo.push_back(rc);
            prog.compute_seconds_total += T(rc).seconds;
            prog.recompute_seconds_total += T(rc).seconds;
            recompute_task[si] = rc;
        }
        int bwd = new_task(LaneKind::compute, WorkClass::compute, "bwd:" + suffix);
        T(bwd).seconds =
            layer_compute_time(unit_footprint(s, k, K), dev, Phase::backward).seconds;
        if (prev_blocking >= 0) T(bwd).deps.push_back(prev_blocking);
        prev_blocking = -1;
        // wait for every tensor whose first backward need is this position
        std::vector<int> retrieval_deps;
        for (size_t si = 0; si < prog.stash.size(); ++si) {
            if (prog.stash[si].first_backward_use != pos) continue;
            if (prefetch_task[si] >= 0) retrieval_deps.push_back(prefetch_task[si]);
            if (recompute_task[si] >= 0) retrieval_deps.push_back(recompute_task[si]);
        }
        for (int dep : retrieval_deps) T(bwd).deps.push_back(dep);
        int sag = self_gather_task[static_cast<size_t>(u)];
        if (sag >= 0) T(bwd).deps.push_back(sag);
        prog.compute_fifo.push_back(bwd);
        prog.compute_seconds_total += T(bwd).seconds;

        if (s.self_reduce_bytes > 0)
            // overlaps this unit's own backward: shares its readiness instead
            // of depending on it; the previous timestep's backward waits for it
            prev_blocking = add_sync("sar:" + suffix, CollectiveKind::all_reduce,
                                     slice_part(s.self_reduce_bytes, k, K),
                                     retrieval_deps);
        if (s.scatter_bytes > 0) {
            int arx = add_sync("arx:" + suffix, CollectiveKind::all_reduce,
                               slice_part(s.scatter_bytes, k, K), {bwd});
            // only the final slice gates the next layer's backward; earlier
            // slices drain on the sync lane behind the timestep loop
            if (k == 0) prev_blocking = arx;
        }
        if (s.weight_sync_bytes > 0 && k == 0)
            add_sync("arw:" + std::to_string(i), CollectiveKind::all_reduce,
                     s.weight_sync_bytes, {bwd});
    }

    // ---- iteration sentinel -----------------------------------------------
    int end = new_task(LaneKind::compute, WorkClass::compute, "end");
    for (int id = 0; id < end; ++id) T(end).deps.push_back(id);
    prog.compute_fifo.push_back(end);
    return prog;
}

// ---------------------------------------------------------------------------
// Fluid execution
// ---------------------------------------------------------------------------

// Concurrent per-direction device<->backing-store rates. Host-backed designs
// share the socket's memory bandwidth slice across active directions; designs
// backed by memory nodes are capped by the node's aggregate DIMM bandwidth
// (with bandwidth-aware striping, one node serves two devices, so the node cap
// binds before the link path does).
inline std::pair<double, double> migration_rates(const Topology& t, bool out_active,
                                                 bool in_active) {
    int dirs = (out_active ? 1 : 0) + (in_active ? 1 : 0);
    if (dirs == 0 || !t.migrates()) return {0.0, 0.0};
    double per_dir = t.migration_bandwidth(0);
    double rate;
    if (t.host_backed()) {
        double share = t.host.socket_mem_bandwidth / t.host.devices_per_socket;
        rate = std::min(per_dir, share / dirs);
    } else {
        // by symmetry each memory node sees `dirs * per_dir` total demand
        double node_demand = dirs * per_dir;
        double cap = t.memory_node.aggregate_bandwidth;
        rate = node_demand > cap ? per_dir * (cap / node_demand) : per_dir;
    }
    return {out_active ? rate : 0.0, in_active ? rate : 0.0};
}

struct IterationResult {
    double total_seconds = 0;
    double exposed_compute = 0;
    double exposed_sync = 0;
    double exposed_migration = 0;
    double busy_compute = 0;
    double busy_sync = 0;
    double busy_mig_out = 0;
    double busy_mig_in = 0;
    u64 sync_payload_bytes = 0;
    u64 offload_bytes = 0;    // per representative device
    u64 prefetch_bytes = 0;
    u64 recomputed_bytes = 0;
    double recompute_seconds = 0;
    double host_bytes = 0;    // integrated across all devices
    double host_bw_peak = 0;
    u64 peak_resident_bytes = 0;
    std::map<size_t, double> link_dir_bytes;  // key = link*2 + dir
    int task_count = 0;
};

inline IterationResult run_program(const Topology& t, const Program& prog) {
    const size_t task_count = prog.tasks.size();
    std::vector<double> progress(task_count, 0.0);
    std::vector<char> done(task_count, 0);
    size_t compute_head = 0, sync_head = 0;
    size_t remaining = task_count;
    double now = 0;
    IterationResult res;
    res.task_count = static_cast<int>(task_count);

    auto deps_met = [&](int id) {
        for (int d : prog.tasks[static_cast<size_t>(id)].deps)
            if (!done[static_cast<size_t>(d)]) return false;
        return true;
    };
    auto fifo_current = [&](const std::vector<int>& fifo, size_t& head) -> int {
        while (head < fifo.size() && done[static_cast<size_t>(fifo[head])]) ++head;
        if (head == fifo.size()) return -1;
        int id = fifo[head];
        return deps_met(id) ? id : -1;  // head-of-line blocking
    };
    auto edf_current = [&](const std::vector<int>& pool) -> int {
        int best = -1;
        for (int id : pool) {
            if (done[static_cast<size_t>(id)] || !deps_met(id)) continue;
            if (best < 0 ||
                prog.tasks[static_cast<size_t>(id)].deadline <
                    prog.tasks[static_cast<size_t>(best)].deadline ||
                (prog.tasks[static_cast<size_t>(id)].deadline ==
                     prog.tasks[static_cast<size_t>(best)].deadline &&
                 id < best))
                best = id;
        }
        return best;
    };
    auto finish = [&](int id) {
        done[static_cast<size_t>(id)] = 1;
        --remaining;
        const Task& task = prog.tasks[static_cast<size_t>(id)];
        for (const auto& [key, bytes] : task.link_dir_bytes)
            res.link_dir_bytes[key] += bytes;
    };

    while (remaining > 0) {
        int cur_compute = fifo_current(prog.compute_fifo, compute_head);
        int cur_sync = fifo_current(prog.sync_fifo, sync_head);
        int cur_out = edf_current(prog.mig_out);
        int cur_in = edf_current(prog.mig_in);

        // drain zero-length work without advancing time
        bool drained = false;
        for (int id : {cur_compute, cur_sync}) {
            if (id >= 0 &&
                progress[static_cast<size_t>(id)] >= prog.tasks[static_cast<size_t>(id)].seconds) {
                finish(id);
                drained = true;
            }
        }
        for (int id : {cur_out, cur_in}) {
            if (id >= 0 && progress[static_cast<size_t>(id)] >=
                               static_cast<double>(prog.tasks[static_cast<size_t>(id)].bytes)) {
                finish(id);
                drained = true;
            }
        }
        if (drained) continue;

        if (cur_compute < 0 && cur_sync < 0 && cur_out < 0 && cur_in < 0) {
            // nothing can run but work remains: report the first blocked task
            for (size_t i = 0; i < task_count; ++i) {
                if (done[i]) continue;
                std::string unmet;
                for (int d : prog.tasks[i].deps)
                    if (!done[static_cast<size_t>(d)])
                        unmet += " " + prog.tasks[static_cast<size_t>(d)].label;
                fail_simulation(format("schedule deadlock: task '%s' blocked on:%s",
                                       prog.tasks[i].label.c_str(), unmet.c_str()));
            }
            fail_simulation("schedule deadlock with no blocked task (internal error)");
        }

        auto [rate_out, rate_in] = migration_rates(t, cur_out >= 0, cur_in >= 0);
        double dt = std::numeric_limits<double>::infinity();
        if (cur_compute >= 0)
            dt = std::min(dt, prog.tasks[static_cast<size_t>(cur_compute)].seconds -
                                  progress[static_cast<size_t>(cur_compute)]);
        if (cur_sync >= 0)
            dt = std::min(dt, prog.tasks[static_cast<size_t>(cur_sync)].seconds -
                                  progress[static_cast<size_t>(cur_sync)]);
        if (cur_out >= 0 && rate_out > 0)
            dt = std::min(dt, (static_cast<double>(prog.tasks[static_cast<size_t>(cur_out)].bytes) -
                               progress[static_cast<size_t>(cur_out)]) /
                                  rate_out);
        if (cur_in >= 0 && rate_in > 0)
            dt = std::min(dt, (static_cast<double>(prog.tasks[static_cast<size_t>(cur_in)].bytes) -
                               progress[static_cast<size_t>(cur_in)]) /
                                  rate_in);
        if (!std::isfinite(dt))
            fail_simulation("schedule stalled: active work with zero service rate");

        now += dt;
        if (cur_compute >= 0) {
            progress[static_cast<size_t>(cur_compute)] += dt;
            res.busy_compute += dt;
        }
        if (cur_sync >= 0) {
            progress[static_cast<size_t>(cur_sync)] += dt;
            res.busy_sync += dt;
        }
        if (cur_out >= 0) {
            progress[static_cast<size_t>(cur_out)] += dt * rate_out;
            res.busy_mig_out += dt;
        }
        if (cur_in >= 0) {
            progress[static_cast<size_t>(cur_in)] += dt * rate_in;
            res.busy_mig_in += dt;
        }
        // interval attribution: compute beats sync beats migration
        if (cur_compute >= 0)
            res.exposed_compute += dt;
        else if (cur_sync >= 0)
            res.exposed_sync += dt;
        else
            res.exposed_migration += dt;
        if (t.host_backed() && (cur_out >= 0 || cur_in >= 0)) {
            double host_rate = (rate_out + rate_in) * t.device_count;
            res.host_bytes += host_rate * dt;
            res.host_bw_peak = std::max(res.host_bw_peak, host_rate);
        }
        // completions (tolerate FP residue on the argmin lanes)
        const double slack = 1.0 + 1e-12;
        auto maybe_finish_fixed = [&](int id) {
            if (id < 0 || done[static_cast<size_t>(id)]) return;
            if (progress[static_cast<size_t>(id)] * slack >=
                prog.tasks[static_cast<size_t>(id)].seconds)
                finish(id);
        };
        auto maybe_finish_fluid = [&](int id) {
            if (id < 0 || done[static_cast<size_t>(id)]) return;
            if (progress[static_cast<size_t>(id)] * slack >=
                static_cast<double>(prog.tasks[static_cast<size_t>(id)].bytes))
                finish(id);
        };
        maybe_finish_fixed(cur_compute);
        maybe_finish_fixed(cur_sync);
        maybe_finish_fluid(cur_out);
        maybe_finish_fluid(cur_in);
    }

    res.total_seconds = now;
    res.sync_payload_bytes = prog.sync_payload_bytes;
    res.offload_bytes = prog.offload_bytes;
    res.prefetch_bytes = prog.prefetch_bytes;
    res.recomputed_bytes = prog.plan.recomputed_bytes;
    res.recompute_seconds = prog.recompute_seconds_total;
    res.peak_resident_bytes = prog.plan.peak_resident_bytes;
    return res;
}

inline IterationResult simulate_iteration(const Topology& t, const NetworkDAG& net,
                                          const TrainingConfig& cfg) {
    Program prog = build_program(t, net, cfg);
    return run_program(t, prog);
}

}  // namespace mcsim
