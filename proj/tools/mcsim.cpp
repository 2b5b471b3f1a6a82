// Command-line front end for the training-platform simulator.
//
// Subcommands:
//   simulate       run one workload over one or more system designs, emit CSV+JSON
//   reproduce TAG  run a curated experiment bundle (fig9..fig13, table4, scaling54)
//   validate FILE  check an experiment config (schema, workload, topology)
//   dump-topology  print a deterministic description of a system design
//
// Exit codes: 0 success, 1 configuration error, 2 simulation error.
// Output directory: --out flag > config `out_dir` > $MCSIM_OUT_DIR > ./results

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcsim/config.hpp"
#include "mcsim/engine.hpp"
#include "mcsim/fabric.hpp"
#include "mcsim/report.hpp"
#include "mcsim/reproduce.hpp"

namespace {

namespace fs = std::filesystem;

std::string resolve_out_dir(const std::string& flag_value, const std::string& cfg_value) {
    if (!flag_value.empty()) return flag_value;
    if (!cfg_value.empty()) return cfg_value;
    if (const char* env = std::getenv("MCSIM_OUT_DIR"); env && *env) return env;
    return "results";
}

void write_file(const fs::path& path, const std::string& content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) mcsim::fail_simulation(mcsim::format("cannot write '%s'", path.string().c_str()));
    out << content;
}

struct SimulateArgs {
    std::string config_path;
    std::string workload;
    std::string designs;
    std::string parallelism;
    mcsim::u64 batch_size = 0;
    mcsim::u64 device_count = 0;
    std::string out_dir;
};

int run_simulate(const SimulateArgs& args) {
    mcsim::ExperimentConfig cfg;
    cfg.designs = {cfg.design};
    if (!args.config_path.empty()) cfg = mcsim::load_experiment(args.config_path);

    // flags override file values
    if (!args.workload.empty()) cfg.workload = args.workload;
    if (!args.designs.empty()) {
        cfg.designs = mcsim::parse_design_list(args.designs, "--design");
        cfg.design = cfg.designs.front();
    }
    if (!args.parallelism.empty()) {
        auto p = mcsim::parallelism_from_name(args.parallelism);
        if (!p)
            mcsim::fail_config(mcsim::format(
                "--parallelism: unknown strategy '%s' (expected data or model)",
                args.parallelism.c_str()));
        cfg.training.parallelism = *p;
    }
    if (args.batch_size > 0) cfg.training.batch_size = args.batch_size;
    if (args.device_count > 0) cfg.training.device_count = args.device_count;
    if (cfg.workload.empty())
        mcsim::fail_config("simulate: a workload is required (--workload or --config)");
    if (cfg.training.batch_size % cfg.training.device_count != 0)
        mcsim::fail_config(mcsim::format(
            "--batch-size: %llu is not divisible by device count %llu",
            static_cast<unsigned long long>(cfg.training.batch_size),
            static_cast<unsigned long long>(cfg.training.device_count)));

    mcsim::NetworkDAG net = mcsim::load_workload(cfg.workload);
    std::vector<mcsim::ResultRow> rows;
    for (mcsim::SystemDesign design : cfg.designs) {
        try {
            mcsim::Topology t = mcsim::build_design(
                design, static_cast<int>(cfg.training.device_count), cfg.device, cfg.fabric);
            mcsim::IterationResult r = mcsim::simulate_iteration(t, net, cfg.training);
            rows.push_back(mcsim::make_row(net.name, t, cfg.training, r));
        } catch (const mcsim::Error& e) {
            if (e.kind() == mcsim::ErrorKind::config) throw;  // bad request, not a sim outcome
            rows.push_back(mcsim::error_row(net.name, mcsim::design_name(design),
                                            mcsim::parallelism_name(cfg.training.parallelism),
                                            cfg.training.batch_size,
                                            cfg.training.device_count, e.what()));
        }
    }
    // self-baseline: speedup relative to the dc row when the sweep contains one
    for (mcsim::ResultRow& r : rows) {
        if (!r.error.empty() || r.total_seconds <= 0) continue;
        for (const mcsim::ResultRow& base : rows) {
            if (base.design == "dc" && base.error.empty() && base.total_seconds > 0) {
                r.speedup_vs_dc = base.total_seconds / r.total_seconds;
                break;
            }
        }
    }

    fs::path out_dir = resolve_out_dir(args.out_dir, cfg.out_dir);
    write_file(out_dir / "simulate.csv", mcsim::rows_to_csv(rows));
    write_file(out_dir / "simulate.json", mcsim::rows_to_json(rows).dump(2) + "\n");
    std::cout << mcsim::format_table(rows);
    std::cout << "wrote " << (out_dir / "simulate.csv").string() << " and "
              << (out_dir / "simulate.json").string() << "\n";
    // Individual design failures stay in the CSV error column so a sweep keeps
    // going, but an invocation where nothing simulated is a simulation error.
    bool all_failed = !rows.empty();
    for (const mcsim::ResultRow& r : rows)
        if (r.error.empty()) { all_failed = false; break; }
    if (all_failed) {
        std::cerr << "error: all requested designs failed to simulate ("
                  << rows.front().error << ")\n";
        return 2;
    }
    return 0;
}

int run_reproduce(const std::string& tag, const std::string& out_flag) {
    mcsim::ReproduceBundle bundle = mcsim::reproduce_bundle(tag);
    fs::path out_dir = resolve_out_dir(out_flag, "");
    for (const mcsim::ReproducedFile& f : bundle.files) {
        write_file(out_dir / f.name, f.content);
        std::cout << "wrote " << (out_dir / f.name).string() << "\n";
    }
    return 0;
}

int run_validate(const std::string& path) {
    mcsim::ExperimentConfig cfg = mcsim::load_experiment(path);
    mcsim::NetworkDAG net = mcsim::load_workload(cfg.workload);
    for (mcsim::SystemDesign design : cfg.designs) {
        mcsim::Topology t = mcsim::build_design(
            design, static_cast<int>(cfg.training.device_count), cfg.device, cfg.fabric);
        std::vector<std::string> violations = mcsim::validate(t);
        if (!violations.empty()) {
            std::string joined;
            for (const std::string& v : violations) joined += "\n  " + v;
            mcsim::fail_config(mcsim::format("%s: design %s fails topology validation:%s",
                                             path.c_str(), mcsim::design_name(design),
                                             joined.c_str()));
        }
        mcsim::compute_sizings(net, cfg.training);  // shape/partition dry-run
    }
    std::cout << "ok: " << path << " (workload " << net.name << ", "
              << net.layers.size() << " layers, " << cfg.designs.size()
              << " design(s), batch " << cfg.training.batch_size << " on "
              << cfg.training.device_count << " devices)\n";
    return 0;
}

int run_dump(const std::string& design_name_text, int device_count) {
    auto d = mcsim::design_from_name(design_name_text);
    if (!d)
        mcsim::fail_config(mcsim::format(
            "dump-topology: unknown design '%s' (expected dc, hc, mc_star, mc_folded, "
            "mc_ring_local, mc_ring_bw, or oracle)",
            design_name_text.c_str()));
    mcsim::Topology t = mcsim::build_design(*d, device_count, mcsim::DeviceSpec{});
    std::cout << mcsim::dump_topology(t);
    std::vector<std::string> violations = mcsim::validate(t);
    if (violations.empty()) {
        std::cout << "validate: ok\n";
    } else {
        for (const std::string& v : violations) std::cout << "violation: " << v << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic system-level simulator for multi-device training platforms"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "run one workload over one or more designs");
    simulate->add_option("--config", sim.config_path, "experiment config JSON (flags override it)");
    simulate->add_option("--workload", sim.workload, "bundled workload name or path to a document");
    simulate->add_option("--design", sim.designs, "design or comma-separated sweep (dc,mc_ring_bw,...)");
    simulate->add_option("--parallelism", sim.parallelism, "data or model");
    simulate->add_option("--batch-size", sim.batch_size, "total batch size");
    simulate->add_option("--device-count", sim.device_count, "number of devices");
    simulate->add_option("--out", sim.out_dir, "output directory (default $MCSIM_OUT_DIR or ./results)");

    std::string tag, repro_out;
    CLI::App* reproduce = app.add_subcommand("reproduce", "run a curated experiment bundle");
    reproduce->add_option("tag", tag, "fig9|fig10|fig11|fig12|fig13|table4|scaling54")->required();
    reproduce->add_option("--out", repro_out, "output directory (default $MCSIM_OUT_DIR or ./results)");

    std::string config_path;
    CLI::App* validate = app.add_subcommand("validate", "check an experiment config file");
    validate->add_option("config", config_path, "path to an experiment config JSON")->required();

    std::string design_text;
    int dump_devices = 8;
    CLI::App* dump = app.add_subcommand("dump-topology", "print a system design's topology");
    dump->add_option("design", design_text, "dc|hc|mc_star|mc_folded|mc_ring_local|mc_ring_bw|oracle")
        ->required();
    dump->add_option("--device-count", dump_devices, "number of devices (default 8)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage problems are configuration errors
    }

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (reproduce->parsed()) return run_reproduce(tag, repro_out);
        if (validate->parsed()) return run_validate(config_path);
        if (dump->parsed()) return run_dump(design_text, dump_devices);
    } catch (const mcsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == mcsim::ErrorKind::config ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
