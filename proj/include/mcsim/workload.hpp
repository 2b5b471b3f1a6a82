#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsim/common.hpp"

namespace mcsim {

enum class LayerKind {
    conv,
    fully_connected,
    recurrent_gemv,
    lstm_cell,
    gru_cell,
    activation,
    pooling,
    normalization,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::fully_connected: return "fully_connected";
        case LayerKind::recurrent_gemv: return "recurrent_gemv";
        case LayerKind::lstm_cell: return "lstm_cell";
        case LayerKind::gru_cell: return "gru_cell";
        case LayerKind::activation: return "activation";
        case LayerKind::pooling: return "pooling";
        case LayerKind::normalization: return "normalization";
    }
    return "?";
}

inline std::optional<LayerKind> layer_kind_from_name(const std::string& s) {
    for (LayerKind k : {LayerKind::conv, LayerKind::fully_connected,
                        LayerKind::recurrent_gemv, LayerKind::lstm_cell,
                        LayerKind::gru_cell, LayerKind::activation,
                        LayerKind::pooling, LayerKind::normalization})
        if (s == layer_kind_name(k)) return k;
    return std::nullopt;
}

inline bool kind_has_weights(LayerKind k) {
    switch (k) {
        case LayerKind::conv:
        case LayerKind::fully_connected:
        case LayerKind::recurrent_gemv:
        case LayerKind::lstm_cell:
        case LayerKind::gru_cell: return true;
        default: return false;
    }
}

inline bool kind_is_recurrent(LayerKind k) {
    return k == LayerKind::recurrent_gemv || k == LayerKind::lstm_cell ||
           k == LayerKind::gru_cell;
}

inline u64 recurrent_gate_count(LayerKind k) {
    if (k == LayerKind::lstm_cell) return 4;
    if (k == LayerKind::gru_cell) return 3;
    return 1;
}

// Per-kind shape parameters. Only the fields relevant to the kind are used:
//   conv:       in_channels, out_channels, filter_h/w, out_h/w
//   fc:         in_dim, out_dim
//   recurrent:  in_dim, out_dim (hidden), timesteps
//   weight-free: out_elems (defaults to the sum of predecessor outputs)
struct LayerDims {
    u64 in_channels = 0, out_channels = 0;
    u64 filter_h = 0, filter_w = 0;
    u64 out_h = 0, out_w = 0;
    u64 in_dim = 0, out_dim = 0;
    u64 out_elems = 0;
    u64 in_elems = 0;  // source layers (no predecessors) declare their input
};

struct LayerSpec {
    int id = 0;
    std::string name;
    LayerKind kind = LayerKind::conv;
    std::vector<int> predecessors;  // empty = fed by the network input
    LayerDims dims;
    u64 timesteps = 1;
};

struct NetworkDAG {
    std::string name;
    u64 element_bytes = 4;
    std::vector<LayerSpec> layers;            // stored in topological order
    std::vector<std::vector<int>> successors; // derived adjacency

    const LayerSpec& layer(int id) const { return layers.at(static_cast<size_t>(id)); }
    size_t size() const { return layers.size(); }

    int weighted_layer_count() const {
        int n = 0;
        for (const auto& l : layers) n += kind_has_weights(l.kind) ? 1 : 0;
        return n;
    }
};

enum class Parallelism { data, model };

inline const char* parallelism_name(Parallelism p) {
    return p == Parallelism::data ? "data" : "model";
}

inline std::optional<Parallelism> parallelism_from_name(const std::string& s) {
    if (s == "data") return Parallelism::data;
    if (s == "model") return Parallelism::model;
    return std::nullopt;
}

struct TrainingConfig {
    u64 batch_size = 512;
    Parallelism parallelism = Parallelism::data;
    u64 device_count = 8;
};

// ---------------------------------------------------------------------------
// Per-sample element counts (shape algebra shared by footprint and validation)
// ---------------------------------------------------------------------------

inline u64 layer_out_elems_per_sample(const NetworkDAG& net, int id);

inline u64 layer_in_elems_per_sample(const NetworkDAG& net, int id) {
    const LayerSpec& l = net.layer(id);
    if (l.predecessors.empty()) {
        if (kind_is_recurrent(l.kind))
            return checked_mul(l.dims.in_dim, l.timesteps, l.name.c_str());
        if (l.kind == LayerKind::fully_connected) return l.dims.in_dim;
        return l.dims.in_elems;
    }
    u64 total = 0;
    for (int p : l.predecessors)
        total = checked_add(total, layer_out_elems_per_sample(net, p), l.name.c_str());
    return total;
}

inline u64 layer_out_elems_per_sample(const NetworkDAG& net, int id) {
    const LayerSpec& l = net.layer(id);
    const char* n = l.name.c_str();
    switch (l.kind) {
        case LayerKind::conv:
            return checked_mul(l.dims.out_channels,
                               checked_mul(l.dims.out_h, l.dims.out_w, n), n);
        case LayerKind::fully_connected:
            return l.dims.out_dim;
        case LayerKind::recurrent_gemv:
        case LayerKind::lstm_cell:
        case LayerKind::gru_cell:
            // all timestep hidden states are live for backpropagation-through-time
            return checked_mul(l.dims.out_dim, l.timesteps, n);
        default:
            if (l.dims.out_elems > 0) return l.dims.out_elems;
            return layer_in_elems_per_sample(net, id);
    }
}

inline u64 layer_weight_elems(const LayerSpec& l) {
    const char* n = l.name.c_str();
    switch (l.kind) {
        case LayerKind::conv:
            return checked_mul(
                checked_mul(l.dims.out_channels, l.dims.in_channels, n),
                checked_mul(l.dims.filter_h, l.dims.filter_w, n), n);
        case LayerKind::fully_connected:
            return checked_mul(l.dims.in_dim, l.dims.out_dim, n);
        case LayerKind::recurrent_gemv:
        case LayerKind::lstm_cell:
        case LayerKind::gru_cell: {
            // gates x (input GEMM + hidden GEMM)
            u64 per_gate = checked_add(
                checked_mul(l.dims.in_dim, l.dims.out_dim, n),
                checked_mul(l.dims.out_dim, l.dims.out_dim, n), n);
            return checked_mul(recurrent_gate_count(l.kind), per_gate, n);
        }
        default: return 0;
    }
}

inline u64 layer_fwd_macs_per_sample(const NetworkDAG& net, int id) {
    const LayerSpec& l = net.layer(id);
    const char* n = l.name.c_str();
    switch (l.kind) {
        case LayerKind::conv:
            // K*C*R*S MACs per output pixel
            return checked_mul(layer_weight_elems(l),
                               checked_mul(l.dims.out_h, l.dims.out_w, n), n);
        case LayerKind::fully_connected:
            return layer_weight_elems(l);
        case LayerKind::recurrent_gemv:
        case LayerKind::lstm_cell:
        case LayerKind::gru_cell:
            // the weight matrices are applied once per timestep
            return checked_mul(layer_weight_elems(l), l.timesteps, n);
        default:
            // one op per output element
            return layer_out_elems_per_sample(net, id);
    }
}

// ---------------------------------------------------------------------------
// Footprints
// ---------------------------------------------------------------------------

struct TensorFootprint {
    u64 feature_in_bytes = 0;
    u64 feature_out_bytes = 0;
    u64 weight_bytes = 0;
    u64 grad_in_bytes = 0;    // == feature_out_bytes
    u64 grad_out_bytes = 0;   // == feature_in_bytes
    u64 weight_grad_bytes = 0;  // == weight_bytes
    u64 fwd_macs = 0;
    u64 bwd_macs = 0;
};

struct WorkloadFootprint {
    std::vector<TensorFootprint> per_layer;
    u64 total_feature_bytes = 0;  // sum of feature_out over layers + network input
    u64 total_weight_bytes = 0;
    u64 network_input_bytes = 0;
    u64 total_fwd_macs = 0;
    u64 total_bwd_macs = 0;
};

// Footprint of one layer for `samples` samples held on one device.
inline TensorFootprint layer_footprint(const NetworkDAG& net, int id, u64 samples) {
    const LayerSpec& l = net.layer(id);
    const char* n = l.name.c_str();
    u64 eb = net.element_bytes;
    TensorFootprint f;
    f.feature_in_bytes =
        checked_mul(checked_mul(layer_in_elems_per_sample(net, id), samples, n), eb, n);
    f.feature_out_bytes =
        checked_mul(checked_mul(layer_out_elems_per_sample(net, id), samples, n), eb, n);
    f.weight_bytes = checked_mul(layer_weight_elems(l), eb, n);
    f.grad_in_bytes = f.feature_out_bytes;
    f.grad_out_bytes = f.feature_in_bytes;
    f.weight_grad_bytes = f.weight_bytes;
    f.fwd_macs = checked_mul(layer_fwd_macs_per_sample(net, id), samples, n);
    // GEMM-backed layers run one extra GEMM each for dX and dW; weight-free
    // backward touches each element about as often as forward.
    f.bwd_macs = kind_has_weights(l.kind) ? checked_mul(f.fwd_macs, 2, n) : f.fwd_macs;
    return f;
}

inline WorkloadFootprint footprint(const NetworkDAG& net, u64 samples) {
    WorkloadFootprint w;
    w.per_layer.reserve(net.size());
    for (int i = 0; i < static_cast<int>(net.size()); ++i) {
        TensorFootprint f = layer_footprint(net, i, samples);
        w.per_layer.push_back(f);
        w.total_feature_bytes = checked_add(w.total_feature_bytes, f.feature_out_bytes, "totals");
        w.total_weight_bytes = checked_add(w.total_weight_bytes, f.weight_bytes, "totals");
        w.total_fwd_macs = checked_add(w.total_fwd_macs, f.fwd_macs, "totals");
        w.total_bwd_macs = checked_add(w.total_bwd_macs, f.bwd_macs, "totals");
        if (net.layer(i).predecessors.empty())
            w.network_input_bytes =
                checked_add(w.network_input_bytes, f.feature_in_bytes, "totals");
    }
    w.total_feature_bytes =
        checked_add(w.total_feature_bytes, w.network_input_bytes, "totals");
    return w;
}

// ---------------------------------------------------------------------------
// Reuse schedule
// ---------------------------------------------------------------------------

// One entry per layer-output tensor (plus conceptually the network input,
// which the callers treat as produced at "layer -1").
struct TensorReuse {
    int producer = -1;
    int last_forward_use = -1;   // layer ordinal; == producer when unconsumed
    int first_backward_use = -1; // layer ordinal whose backward needs it first
    int last_backward_use = -1;
};

// Backward visits layers in reverse topological order, so a higher layer
// ordinal means an EARLIER backward position.
struct ReuseSchedule {
    std::vector<TensorReuse> per_layer_output;

    static int backward_position(const NetworkDAG& net, int layer_id) {
        return static_cast<int>(net.size()) - 1 - layer_id;
    }
};

inline ReuseSchedule reuse_schedule(const NetworkDAG& net) {
    ReuseSchedule sched;
    sched.per_layer_output.resize(net.size());
    for (int i = 0; i < static_cast<int>(net.size()); ++i) {
        TensorReuse r;
        r.producer = i;
        r.last_forward_use = i;
        for (int s : net.successors[static_cast<size_t>(i)])
            r.last_forward_use = std::max(r.last_forward_use, s);
        // Backward consumers of featureOut(i): every consumer layer s reads its
        // featureIn (which includes featureOut(i)) while computing gradients,
        // and recurrent producers re-read their own output for BPTT.
        int first_bwd = -1;  // as layer ordinal; larger ordinal = earlier in backward
        int last_bwd = -1;
        auto note = [&](int layer) {
            if (first_bwd < 0 || layer > first_bwd) first_bwd = layer;
            if (last_bwd < 0 || layer < last_bwd) last_bwd = layer;
        };
        for (int s : net.successors[static_cast<size_t>(i)]) note(s);
        if (kind_is_recurrent(net.layer(i).kind)) note(i);
        if (first_bwd < 0) {
            // unconsumed output (network head): only its own backward touches it
            first_bwd = last_bwd = i;
        }
        r.first_backward_use = first_bwd;
        r.last_backward_use = last_bwd;
        sched.per_layer_output[static_cast<size_t>(i)] = r;
    }
    return sched;
}

// ---------------------------------------------------------------------------
// Document I/O
// ---------------------------------------------------------------------------

namespace detail {

inline u64 require_positive_u64(const nlohmann::json& j, const std::string& ctx,
                                const char* field) {
    if (!j.contains(field))
        fail_config(format("%s: missing field '%s'", ctx.c_str(), field));
    const auto& v = j.at(field);
    if (!v.is_number_unsigned() && !v.is_number_integer())
        fail_config(format("%s.%s: expected a positive integer", ctx.c_str(), field));
    i64 raw = v.get<i64>();
    if (raw <= 0)
        fail_config(format("%s.%s: must be strictly positive (got %lld)",
                           ctx.c_str(), field, static_cast<long long>(raw)));
    return static_cast<u64>(raw);
}

inline void validate_dag(NetworkDAG& net) {
    size_t n = net.layers.size();
    net.successors.assign(n, {});
    for (size_t i = 0; i < n; ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.id != static_cast<int>(i))
            fail_config(format("%s: layer ids must be 0..n-1 in order (layer %zu has id %d)",
                               net.name.c_str(), i, l.id));
        for (int p : l.predecessors) {
            if (p < 0 || p >= static_cast<int>(n))
                fail_config(format("%s: layer '%s' references unknown predecessor %d",
                                   net.name.c_str(), l.name.c_str(), p));
            if (p >= l.id)
                fail_config(format("%s: cycle detected at layer '%s' (edge %d -> %d)",
                                   net.name.c_str(), l.name.c_str(), p, l.id));
            net.successors[static_cast<size_t>(p)].push_back(l.id);
        }
    }
    // Shape sanity: every derived size must be computable and positive.
    for (size_t i = 0; i < n; ++i) {
        u64 out = layer_out_elems_per_sample(net, static_cast<int>(i));
        u64 in = layer_in_elems_per_sample(net, static_cast<int>(i));
        if (out == 0)
            fail_config(format("%s: layer '%s' has empty output shape",
                               net.name.c_str(), net.layers[i].name.c_str()));
        if (in == 0)
            fail_config(format("%s: layer '%s' has empty input shape",
                               net.name.c_str(), net.layers[i].name.c_str()));
    }
}

}  // namespace detail

inline NetworkDAG load_network(const nlohmann::json& doc) {
    NetworkDAG net;
    if (!doc.is_object()) fail_config("workload: document must be a JSON object");
    if (!doc.contains("name") || !doc.at("name").is_string())
        fail_config("workload: missing string field 'name'");
    net.name = doc.at("name").get<std::string>();
    net.element_bytes = doc.contains("element_bytes")
                            ? detail::require_positive_u64(doc, net.name, "element_bytes")
                            : 4;
    if (!doc.contains("layers") || !doc.at("layers").is_array() || doc.at("layers").empty())
        fail_config(format("%s: 'layers' must be a non-empty array", net.name.c_str()));

    for (const auto& jl : doc.at("layers")) {
        LayerSpec l;
        std::string ctx = net.name + ".layers[" + std::to_string(net.layers.size()) + "]";
        if (!jl.is_object()) fail_config(ctx + ": layer must be an object");
        if (!jl.contains("id") || !jl.at("id").is_number_integer())
            fail_config(ctx + ": missing integer field 'id'");
        l.id = jl.at("id").get<int>();
        if (l.id < 0) fail_config(ctx + ".id: must be non-negative");
        if (!jl.contains("name") || !jl.at("name").is_string())
            fail_config(ctx + ": missing string field 'name'");
        l.name = jl.at("name").get<std::string>();
        ctx = net.name + "." + l.name;
        if (!jl.contains("kind") || !jl.at("kind").is_string())
            fail_config(ctx + ": missing string field 'kind'");
        auto kind = layer_kind_from_name(jl.at("kind").get<std::string>());
        if (!kind)
            fail_config(format("%s: unknown layer kind '%s'", ctx.c_str(),
                               jl.at("kind").get<std::string>().c_str()));
        l.kind = *kind;
        if (jl.contains("predecessors")) {
            if (!jl.at("predecessors").is_array())
                fail_config(ctx + ".predecessors: expected an array of layer ids");
            for (const auto& p : jl.at("predecessors")) {
                if (!p.is_number_integer())
                    fail_config(ctx + ".predecessors: expected an array of layer ids");
                l.predecessors.push_back(p.get<int>());
            }
        }
        const nlohmann::json params =
            jl.contains("params") ? jl.at("params") : nlohmann::json::object();
        auto opt = [&](const char* field, u64 fallback) -> u64 {
            if (!params.contains(field)) return fallback;
            return detail::require_positive_u64(params, ctx, field);
        };
        switch (l.kind) {
            case LayerKind::conv:
                l.dims.in_channels = detail::require_positive_u64(params, ctx, "in_channels");
                l.dims.out_channels = detail::require_positive_u64(params, ctx, "out_channels");
                l.dims.filter_h = detail::require_positive_u64(params, ctx, "filter_h");
                l.dims.filter_w = detail::require_positive_u64(params, ctx, "filter_w");
                l.dims.out_h = detail::require_positive_u64(params, ctx, "out_h");
                l.dims.out_w = detail::require_positive_u64(params, ctx, "out_w");
                l.dims.in_elems = opt("in_elems", 0);
                break;
            case LayerKind::fully_connected:
                l.dims.in_dim = detail::require_positive_u64(params, ctx, "in_dim");
                l.dims.out_dim = detail::require_positive_u64(params, ctx, "out_dim");
                break;
            case LayerKind::recurrent_gemv:
            case LayerKind::lstm_cell:
            case LayerKind::gru_cell:
                l.dims.in_dim = detail::require_positive_u64(params, ctx, "in_dim");
                l.dims.out_dim = detail::require_positive_u64(params, ctx, "out_dim");
                l.timesteps = detail::require_positive_u64(jl, ctx, "timesteps");
                break;
            default:
                l.dims.out_elems = opt("out_elems", 0);
                l.dims.in_elems = opt("in_elems", 0);
                break;
        }
        if (!kind_is_recurrent(l.kind) && jl.contains("timesteps")) {
            u64 t = detail::require_positive_u64(jl, ctx, "timesteps");
            if (t != 1)
                fail_config(ctx + ": timesteps must be 1 for non-recurrent kinds");
        }
        if (l.predecessors.empty() && l.kind != LayerKind::fully_connected &&
            !kind_is_recurrent(l.kind) && l.dims.in_elems == 0)
            fail_config(ctx + ": source layers must declare params.in_elems");
        net.layers.push_back(std::move(l));
    }
    detail::validate_dag(net);
    return net;
}

inline nlohmann::json serialize_network(const NetworkDAG& net) {
    nlohmann::json doc;
    doc["name"] = net.name;
    doc["element_bytes"] = net.element_bytes;
    doc["layers"] = nlohmann::json::array();
    for (const LayerSpec& l : net.layers) {
        nlohmann::json jl;
        jl["id"] = l.id;
        jl["name"] = l.name;
        jl["kind"] = layer_kind_name(l.kind);
        jl["predecessors"] = l.predecessors;
        nlohmann::json params = nlohmann::json::object();
        switch (l.kind) {
            case LayerKind::conv:
                params["in_channels"] = l.dims.in_channels;
                params["out_channels"] = l.dims.out_channels;
                params["filter_h"] = l.dims.filter_h;
                params["filter_w"] = l.dims.filter_w;
                params["out_h"] = l.dims.out_h;
                params["out_w"] = l.dims.out_w;
                if (l.dims.in_elems) params["in_elems"] = l.dims.in_elems;
                break;
            case LayerKind::fully_connected:
                params["in_dim"] = l.dims.in_dim;
                params["out_dim"] = l.dims.out_dim;
                break;
            case LayerKind::recurrent_gemv:
            case LayerKind::lstm_cell:
            case LayerKind::gru_cell:
                params["in_dim"] = l.dims.in_dim;
                params["out_dim"] = l.dims.out_dim;
                jl["timesteps"] = l.timesteps;
                break;
            default:
                if (l.dims.out_elems) params["out_elems"] = l.dims.out_elems;
                if (l.dims.in_elems) params["in_elems"] = l.dims.in_elems;
                break;
        }
        jl["params"] = params;
        doc["layers"].push_back(jl);
    }
    return doc;
}

}  // namespace mcsim
