#include <catch2/catch_amalgamated.hpp>

#include <mcsim/config.hpp>
#include <mcsim/workload.hpp>

using namespace mcsim;

namespace {

LayerSpec make_layer(int id, const std::string& name, LayerKind kind,
                     std::vector<int> preds = {}) {
    LayerSpec l;
    l.id = id;
    l.name = name;
    l.kind = kind;
    l.predecessors = std::move(preds);
    return l;
}

// Linear chain: source fc -> activation -> fc.
NetworkDAG chain_net() {
    NetworkDAG net;
    net.name = "chain";
    LayerSpec fc0 = make_layer(0, "fc0", LayerKind::fully_connected);
    fc0.dims.in_dim = 64;
    fc0.dims.out_dim = 32;
    fc0.dims.in_elems = 64;
    LayerSpec act = make_layer(1, "act", LayerKind::activation, {0});
    LayerSpec fc1 = make_layer(2, "fc1", LayerKind::fully_connected, {1});
    fc1.dims.in_dim = 32;
    fc1.dims.out_dim = 16;
    net.layers = {fc0, act, fc1};
    net.successors = {{1}, {2}, {}};
    return net;
}

}  // namespace

TEST_CASE("convolution shape and cost algebra") {
    NetworkDAG net;
    net.name = "single_conv";
    LayerSpec c = make_layer(0, "conv1", LayerKind::conv);
    c.dims.in_channels = 3;
    c.dims.out_channels = 64;
    c.dims.filter_h = 11;
    c.dims.filter_w = 11;
    c.dims.out_h = 55;
    c.dims.out_w = 55;
    c.dims.in_elems = 3 * 227 * 227;
    net.layers = {c};
    net.successors = {{}};

    // weights = K*C*R*S; output = K*OH*OW; MACs = weights * OH * OW
    CHECK(layer_weight_elems(net.layer(0)) == 64ull * 3 * 11 * 11);
    CHECK(layer_out_elems_per_sample(net, 0) == 64ull * 55 * 55);
    CHECK(layer_in_elems_per_sample(net, 0) == 3ull * 227 * 227);
    CHECK(layer_fwd_macs_per_sample(net, 0) == 64ull * 3 * 11 * 11 * 55 * 55);
}

TEST_CASE("fully connected and recurrent shape algebra") {
    NetworkDAG net;
    net.name = "rnn_shapes";
    LayerSpec g = make_layer(0, "gemv", LayerKind::recurrent_gemv);
    g.dims.in_dim = 128;
    g.dims.out_dim = 256;
    g.dims.in_elems = 128;
    g.timesteps = 10;
    LayerSpec lstm = make_layer(1, "lstm", LayerKind::lstm_cell, {0});
    lstm.dims.in_dim = 256;
    lstm.dims.out_dim = 512;
    lstm.timesteps = 10;
    LayerSpec gru = make_layer(2, "gru", LayerKind::gru_cell, {1});
    gru.dims.in_dim = 512;
    gru.dims.out_dim = 512;
    gru.timesteps = 10;
    net.layers = {g, lstm, gru};
    net.successors = {{1}, {2}, {}};

    // gate counts: gemv 1, lstm 4, gru 3; weights = gates * (I*H + H*H)
    CHECK(recurrent_gate_count(LayerKind::recurrent_gemv) == 1);
    CHECK(recurrent_gate_count(LayerKind::lstm_cell) == 4);
    CHECK(recurrent_gate_count(LayerKind::gru_cell) == 3);
    CHECK(layer_weight_elems(net.layer(0)) == 1ull * (128 * 256 + 256 * 256));
    CHECK(layer_weight_elems(net.layer(1)) == 4ull * (256 * 512 + 512 * 512));
    CHECK(layer_weight_elems(net.layer(2)) == 3ull * (512 * 512 + 512 * 512));
    // recurrent IO spans all timesteps
    CHECK(layer_out_elems_per_sample(net, 0) == 256ull * 10);
    CHECK(layer_in_elems_per_sample(net, 0) == 128ull * 10);
    // MACs repeat the weight matrix every timestep
    CHECK(layer_fwd_macs_per_sample(net, 1) ==
          4ull * (256 * 512 + 512 * 512) * 10);
}

TEST_CASE("join layers read the concatenation of their predecessors") {
    NetworkDAG net;
    net.name = "diamond";
    LayerSpec src = make_layer(0, "src", LayerKind::activation);
    src.dims.in_elems = 100;
    src.dims.out_elems = 100;
    LayerSpec a = make_layer(1, "a", LayerKind::pooling, {0});
    a.dims.out_elems = 40;
    LayerSpec b = make_layer(2, "b", LayerKind::pooling, {0});
    b.dims.out_elems = 60;
    LayerSpec join = make_layer(3, "join", LayerKind::activation, {1, 2});
    net.layers = {src, a, b, join};
    net.successors = {{1, 2}, {3}, {3}, {}};

    CHECK(layer_in_elems_per_sample(net, 3) == 100);  // 40 + 60
    // weight-free layer without out_elems passes its input through
    CHECK(layer_out_elems_per_sample(net, 3) == 100);
    CHECK(layer_weight_elems(net.layer(3)) == 0);
}

TEST_CASE("footprint mirrors gradients and scales with samples") {
    NetworkDAG net = chain_net();
    WorkloadFootprint fp = footprint(net, 8);
    REQUIRE(fp.per_layer.size() == 3);
    const TensorFootprint& f = fp.per_layer[0];
    CHECK(f.feature_in_bytes == 64ull * 8 * 4);
    CHECK(f.feature_out_bytes == 32ull * 8 * 4);
    CHECK(f.weight_bytes == 64ull * 32 * 4);
    CHECK(f.grad_in_bytes == f.feature_out_bytes);
    CHECK(f.grad_out_bytes == f.feature_in_bytes);
    CHECK(f.weight_grad_bytes == f.weight_bytes);
    CHECK(f.bwd_macs == 2 * f.fwd_macs);
    CHECK(fp.network_input_bytes == 64ull * 8 * 4);
    CHECK(fp.total_weight_bytes == (64ull * 32 + 32ull * 16) * 4);

    WorkloadFootprint fp2 = footprint(net, 16);
    CHECK(fp2.per_layer[0].feature_out_bytes == 2 * f.feature_out_bytes);
    CHECK(fp2.total_weight_bytes == fp.total_weight_bytes);  // weights don't scale
}

TEST_CASE("reuse schedule on a linear chain") {
    NetworkDAG net = chain_net();
    ReuseSchedule s = reuse_schedule(net);
    // layer 0's output feeds layer 1: alive through forward position 1,
    // needed again when layer 1 runs backward.
    CHECK(s.per_layer_output[0].last_forward_use == 1);
    CHECK(s.per_layer_output[0].first_backward_use == 1);
    CHECK(s.per_layer_output[0].last_backward_use == 1);
    // head output has no consumers: only its own backward touches it
    CHECK(s.per_layer_output[2].last_forward_use == 2);
    CHECK(s.per_layer_output[2].first_backward_use == 2);
    CHECK(ReuseSchedule::backward_position(net, 2) == 0);
    CHECK(ReuseSchedule::backward_position(net, 0) == 2);
}

TEST_CASE("reuse schedule on a diamond keeps the tensor until its last reader") {
    NetworkDAG net;
    net.name = "diamond2";
    LayerSpec src = make_layer(0, "src", LayerKind::activation);
    src.dims.in_elems = 10;
    LayerSpec a = make_layer(1, "a", LayerKind::pooling, {0});
    LayerSpec b = make_layer(2, "b", LayerKind::pooling, {0});
    LayerSpec join = make_layer(3, "join", LayerKind::activation, {1, 2});
    net.layers = {src, a, b, join};
    net.successors = {{1, 2}, {3}, {3}, {}};
    ReuseSchedule s = reuse_schedule(net);
    CHECK(s.per_layer_output[0].last_forward_use == 2);
    // backward visits 3,2,1,0: layer 2's backward is the FIRST to re-read src
    CHECK(s.per_layer_output[0].first_backward_use == 2);
    CHECK(s.per_layer_output[0].last_backward_use == 1);
}

TEST_CASE("recurrent layers re-read their own output during backward") {
    NetworkDAG net;
    net.name = "rnn_reuse";
    LayerSpec l = make_layer(0, "cell", LayerKind::lstm_cell);
    l.dims.in_dim = 8;
    l.dims.out_dim = 8;
    l.dims.in_elems = 8;
    l.timesteps = 4;
    net.layers = {l};
    net.successors = {{}};
    ReuseSchedule s = reuse_schedule(net);
    CHECK(s.per_layer_output[0].first_backward_use == 0);
    CHECK(s.per_layer_output[0].last_backward_use == 0);
}

TEST_CASE("loader rejects malformed documents with precise diagnostics") {
    auto load = [](const char* text) { return load_network(nlohmann::json::parse(text)); };

    CHECK_THROWS_WITH(load("[1,2]"),
                      Catch::Matchers::ContainsSubstring("must be a JSON object"));
    CHECK_THROWS_WITH(load(R"({"layers": []})"),
                      Catch::Matchers::ContainsSubstring("missing string field 'name'"));
    CHECK_THROWS_WITH(load(R"({"name": "x", "layers": []})"),
                      Catch::Matchers::ContainsSubstring("'layers' must be a non-empty array"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 1, "name": "a", "kind": "activation", "params": {"in_elems": 4}}]})"),
        Catch::Matchers::ContainsSubstring("layer ids must be 0..n-1"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 0, "name": "a", "kind": "activation", "predecessors": [5],
             "params": {"in_elems": 4}}]})"),
        Catch::Matchers::ContainsSubstring("references unknown predecessor 5"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 0, "name": "a", "kind": "activation", "predecessors": [0],
             "params": {"in_elems": 4}}]})"),
        Catch::Matchers::ContainsSubstring("cycle detected at layer 'a'"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 0, "name": "a", "kind": "warp", "params": {"in_elems": 4}}]})"),
        Catch::Matchers::ContainsSubstring("unknown layer kind 'warp'"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 0, "name": "a", "kind": "fully_connected",
             "params": {"in_dim": 4}}]})"),
        Catch::Matchers::ContainsSubstring("missing field 'out_dim'"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 0, "name": "a", "kind": "fully_connected",
             "params": {"in_dim": -3, "out_dim": 4}}]})"),
        Catch::Matchers::ContainsSubstring("must be strictly positive (got -3)"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 0, "name": "a", "kind": "activation", "timesteps": 7,
             "params": {"in_elems": 4}}]})"),
        Catch::Matchers::ContainsSubstring("timesteps must be 1"));
    CHECK_THROWS_WITH(
        load(R"({"name": "x", "layers": [
            {"id": 0, "name": "a", "kind": "activation", "params": {}}]})"),
        Catch::Matchers::ContainsSubstring("in_elems"));

    // config-kind errors, so the CLI can map them to exit code 1
    try {
        load(R"({"layers": []})");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
}

TEST_CASE("serialization round-trips every bundled workload") {
    for (const char* name :
         {"alexnet", "googlenet", "vgg_e", "resnet34", "rnn_gemv",
          "rnn_lstm_small", "rnn_lstm_large", "rnn_gru"}) {
        NetworkDAG net = load_workload(name);
        NetworkDAG again = load_network(serialize_network(net));
        REQUIRE(again.size() == net.size());
        CHECK(again.name == net.name);
        for (size_t i = 0; i < net.size(); ++i) {
            CHECK(again.layers[i].kind == net.layers[i].kind);
            CHECK(again.layers[i].predecessors == net.layers[i].predecessors);
            CHECK(layer_weight_elems(again.layers[i]) ==
                  layer_weight_elems(net.layers[i]));
            CHECK(layer_out_elems_per_sample(again, static_cast<int>(i)) ==
                  layer_out_elems_per_sample(net, static_cast<int>(i)));
        }
    }
}

TEST_CASE("bundled workload structure") {
    struct Expect {
        const char* name;
        size_t layers;
        int weighted;
        u64 max_timesteps;
        u64 weight_bytes;
    };
    // Weight totals follow from the layer dims at 4 bytes per element.
    const Expect table[] = {
        {"alexnet", 13, 8, 1, 249471104},
        {"googlenet", 81, 58, 1, 27961088},
        {"vgg_e", 24, 19, 1, 574610176},
        {"resnet34", 52, 34, 1, 86430464},
        {"rnn_gemv", 1, 1, 50, 24780800},
        {"rnn_lstm_small", 1, 1, 25, 8388608},
        {"rnn_lstm_large", 1, 1, 25, 134217728},
        {"rnn_gru", 1, 1, 187, 190316544},
    };
    for (const Expect& e : table) {
        INFO(e.name);
        NetworkDAG net = load_workload(e.name);
        CHECK(net.size() == e.layers);
        CHECK(net.weighted_layer_count() == e.weighted);
        u64 ts = 0;
        for (const auto& l : net.layers) ts = std::max(ts, l.timesteps);
        CHECK(ts == e.max_timesteps);
        CHECK(footprint(net, 512).total_weight_bytes == e.weight_bytes);
    }
}
