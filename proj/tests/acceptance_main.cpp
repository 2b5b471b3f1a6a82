// Acceptance gate: one PASS/FAIL line per numbered check, detail lines
// indented beneath. Three sub-checks carry documented deviations (README,
// "Known deviations": D1, D2, D3); they print FAIL honestly. The process
// exits 0 only when every sub-check matches its documented expectation, so
// an unexpected failure *or* an unexpected pass of a documented deviation
// flips the exit code and flags the documentation as stale.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <mcsim/power.hpp>
#include <mcsim/reproduce.hpp>

namespace fs = std::filesystem;
using namespace mcsim;

namespace {

int g_unexpected = 0;

struct Check {
    int index;
    std::string title;
    bool all_ok = true;
    bool any_documented_fail = false;
    std::chrono::steady_clock::time_point start;

    Check(int i, std::string t) : index(i), title(std::move(t)) {
        start = std::chrono::steady_clock::now();
        std::printf("check %d: %s\n", index, title.c_str());
    }

    void sub(bool ok, const std::string& what, bool documented_deviation = false) {
        all_ok = all_ok && ok;
        if (ok && !documented_deviation) {
            std::printf("    ok   %s\n", what.c_str());
        } else if (!ok && documented_deviation) {
            any_documented_fail = true;
            std::printf("    fail %s  [documented deviation]\n", what.c_str());
        } else if (!ok) {
            ++g_unexpected;
            std::printf("    FAIL %s  [UNEXPECTED]\n", what.c_str());
        } else {
            ++g_unexpected;
            std::printf("    pass %s  [UNEXPECTED PASS of a documented deviation "
                        "- update the deviation notes]\n",
                        what.c_str());
        }
    }

    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }

    void finish(double budget_seconds = 0) {
        double s = seconds();
        if (budget_seconds > 0)
            sub(s < budget_seconds,
                format("completed in %.2f s (budget %.0f s)", s, budget_seconds));
        std::printf("[%s] check %d: %s (%.2f s)%s\n\n", all_ok ? "PASS" : "FAIL",
                    index, title.c_str(), s,
                    !all_ok && any_documented_fail ? " - documented deviations only"
                                                   : "");
    }
};

bool approx(double a, double b, double rel) {
    return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Shared simulation matrix: 8 workloads x 2 parallelisms x 7 designs
// ---------------------------------------------------------------------------

const std::vector<SystemDesign>& all_designs() {
    static const std::vector<SystemDesign> d = {
        SystemDesign::dc,          SystemDesign::hc,
        SystemDesign::mc_star,     SystemDesign::mc_folded,
        SystemDesign::mc_ring_local, SystemDesign::mc_ring_bw,
        SystemDesign::oracle};
    return d;
}

struct MatrixKey {
    std::string workload;
    Parallelism par;
    SystemDesign design;
    bool operator<(const MatrixKey& o) const {
        if (workload != o.workload) return workload < o.workload;
        if (par != o.par) return par < o.par;
        return design < o.design;
    }
};

using Matrix = std::map<MatrixKey, IterationResult>;

Matrix run_matrix() {
    Matrix m;
    for (const std::string& w : detail::bundled_workloads()) {
        NetworkDAG net = load_workload(w);
        for (Parallelism par : {Parallelism::data, Parallelism::model})
            for (SystemDesign d : all_designs()) {
                detail::Point p = detail::run_point(net, d, par, 512, 8);
                if (!p.ok)
                    fail_simulation(format("matrix point %s/%s/%s failed: %s",
                                           w.c_str(), design_name(d),
                                           parallelism_name(par),
                                           p.row.error.c_str()));
                m[{w, par, d}] = p.iter;
            }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Checks 1-3: structural and arithmetic facts
// ---------------------------------------------------------------------------

void check_topology() {
    Check c(1, "topology structure of the six designs and the baseline");
    auto hops = [](SystemDesign d, int n = 8) {
        return build_design(d, n, DeviceSpec{}).ring_hop_multiset();
    };
    c.sub(hops(SystemDesign::mc_star) == std::vector<size_t>{8, 8, 24},
          "star-with-threaded-ring hop multiset {8, 8, 24}");
    c.sub(hops(SystemDesign::mc_folded) == std::vector<size_t>{8, 12, 20},
          "folded variant hop multiset {8, 12, 20}");
    c.sub(hops(SystemDesign::dc) == std::vector<size_t>{8, 8, 8},
          "device-centric: three direct rings of 8");
    c.sub(hops(SystemDesign::mc_ring_bw) == std::vector<size_t>{16, 16, 16} &&
              hops(SystemDesign::mc_ring_local) == std::vector<size_t>{16, 16, 16},
          "memory-in-ring: three rings of 16 nodes");
    bool ok = true;
    for (SystemDesign d : all_designs())
        ok = ok && validate(build_design(d, 8, DeviceSpec{})).empty();
    c.sub(ok, "all seven topologies pass structural validation");
    c.finish(1.0);
}

void check_bandwidth() {
    Check c(2, "virtualization path bandwidth arithmetic");
    Topology bw = build_design(SystemDesign::mc_ring_bw, 8, DeviceSpec{});
    Topology local = build_design(SystemDesign::mc_ring_local, 8, DeviceSpec{});
    Topology star = build_design(SystemDesign::mc_star, 8, DeviceSpec{});
    Topology hc = build_design(SystemDesign::hc, 8, DeviceSpec{});
    Topology dc = build_design(SystemDesign::dc, 8, DeviceSpec{});

    double agg = 0;
    bool per_dev = true;
    for (int d = 0; d < 8; ++d) {
        per_dev = per_dev && bw.migration_bandwidth(d) == 150e9;
        agg += bw.migration_bandwidth(d);
    }
    c.sub(per_dev, "bandwidth-aware ring: 150 GB/s per device (both halves)");
    c.sub(agg == 1200e9, "bandwidth-aware ring: 1.2 TB/s aggregate");
    c.sub(star.migration_bandwidth(0) == 50e9,
          "star: 50 GB/s to the dedicated memory node");
    c.sub(hc.migration_bandwidth(0) == 75e9 &&
              hc.host.socket_mem_bandwidth == 300e9,
          "host-centric: 75 GB/s per device under a 300 GB/s socket cap");
    c.sub(dc.migration_bandwidth(0) == 16e9, "device-centric: 16 GB/s PCIe path");
    c.sub(2 * local.migration_bandwidth(0) == bw.migration_bandwidth(0),
          "locality-first ring path is exactly half the bandwidth-aware path");
    double ratio = migration_time(local, 0, 1'500'000'000ull) /
                   migration_time(bw, 0, 1'500'000'000ull);
    c.sub(approx(ratio, 2.0, 1e-3),
          format("equal-byte transfer-time ratio %.6f == 2.0 within 0.1%%", ratio));
    c.finish();
}

void check_power() {
    Check c(3, "memory subsystem power model");
    std::string golden =
        slurp(fs::path(MCSIM_SOURCE_DIR) / "tests" / "goldens" / "table4.csv");
    c.sub(!golden.empty() && power_table_csv() == golden,
          "module power table matches the golden byte for byte");

    PowerDelta lo = system_power_delta(dimm_by_name("rdimm_8gb"), 8, 10);
    PowerDelta hi = system_power_delta(dimm_by_name("lrdimm_128gb"), 8, 10);
    c.sub(lo.added_watts == 232.0 && std::fabs(lo.fraction - 0.0725) < 1e-12,
          "8 GB modules: +232 W, +7.25% of the 3200 W baseline");
    c.sub(hi.added_watts == 1016.0 && std::fabs(hi.fraction - 0.3175) < 1e-12,
          "128 GB modules: +1016 W, +31.75% of the 3200 W baseline");

    // Reference values for the modeled platform comparison are 2.62 and 2.14;
    // they came from an unrounded speedup, so the pinned 2.8x input agrees to
    // within 1%.
    double pw_lo = perf_per_watt(2.8, lo.fraction);
    double pw_hi = perf_per_watt(2.8, hi.fraction);
    c.sub(approx(pw_lo, 2.62, 0.01),
          format("perf/W at 2.8x, +7.25%%: %.4f vs reference 2.62 (within 1%%)", pw_lo));
    c.sub(approx(pw_hi, 2.14, 0.01),
          format("perf/W at 2.8x, +31.75%%: %.4f vs reference 2.14 (within 1%%)", pw_hi));
    c.finish(1.0);
}

// ---------------------------------------------------------------------------
// Check 4: collectives
// ---------------------------------------------------------------------------

void check_collectives() {
    Check c(4, "ring collectives: semantics and latency model");

    bool functional = true;
    for (int p : {2, 4, 8}) {
        size_t n = 13;  // not divisible by p
        std::vector<std::vector<double>> data(static_cast<size_t>(p));
        std::vector<double> expect(n, 0);
        for (int r = 0; r < p; ++r) {
            data[static_cast<size_t>(r)].resize(n);
            for (size_t i = 0; i < n; ++i) {
                data[static_cast<size_t>(r)][i] = (r + 1) * 10.0 + static_cast<double>(i);
                expect[i] += data[static_cast<size_t>(r)][i];
            }
        }
        auto summed = simulate_all_reduce(data);
        for (int r = 0; r < p; ++r)
            for (size_t i = 0; i < n; ++i)
                functional = functional &&
                             std::fabs(summed[static_cast<size_t>(r)][i] - expect[i]) <
                                 1e-9;

        std::vector<std::vector<double>> shards(static_cast<size_t>(p));
        std::vector<double> concat;
        for (int r = 0; r < p; ++r) {
            shards[static_cast<size_t>(r)].assign(static_cast<size_t>(r + 1), r * 5.0);
            concat.insert(concat.end(), shards[static_cast<size_t>(r)].begin(),
                          shards[static_cast<size_t>(r)].end());
        }
        auto gathered = simulate_all_gather(shards);
        for (int r = 0; r < p; ++r)
            functional = functional && gathered[static_cast<size_t>(r)] == concat;

        std::vector<double> root = {1, 2, 3};
        auto bc = simulate_broadcast(root, p);
        for (int r = 0; r < p; ++r)
            functional = functional && bc[static_cast<size_t>(r)] == root;
    }
    c.sub(functional,
          "all-reduce sums, all-gather concatenates, broadcast copies (p = 2, 4, 8)");

    DeviceSpec spec;
    const u64 big = 64ull << 20;
    Topology ring8 = build_single_ring(8, spec);
    double modeled = collective_time(ring8, CollectiveKind::all_reduce, big);
    double bound = 2.0 * 7.0 / 8.0 * static_cast<double>(big) / spec.link_bandwidth;
    c.sub(modeled >= bound && modeled <= 1.05 * bound,
          format("64 MB all-reduce %.6e s within 5%% of the 2(p-1)/p bound %.6e s",
                 modeled, bound));

    Topology dc = build_design(SystemDesign::dc, 8, spec);
    Topology mc = build_design(SystemDesign::mc_ring_bw, 8, spec);
    double r_big = collective_time(mc, CollectiveKind::all_reduce, 8ull << 20) /
                   collective_time(dc, CollectiveKind::all_reduce, 8ull << 20);
    double r_small = collective_time(mc, CollectiveKind::all_reduce, 4096) /
                     collective_time(dc, CollectiveKind::all_reduce, 4096);
    c.sub(r_big <= 1.15,
          format("memory-threaded/direct all-reduce ratio %.4f <= 1.15 at 8 MB", r_big));
    c.sub(r_small > 1.0,
          format("memory-threaded/direct all-reduce ratio %.4f > 1.0 at 4 KB", r_small));
    c.finish(10.0);
}

// ---------------------------------------------------------------------------
// Check 5: address-space planning
// ---------------------------------------------------------------------------

std::vector<StashTensor> synthetic_chain(int n, u64 bytes) {
    std::vector<StashTensor> stash(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        StashTensor& s = stash[static_cast<size_t>(i)];
        s.id = "t" + std::to_string(i);
        s.bytes = bytes;
        s.producer_pos = i;
        s.last_forward_use = std::min(i + 1, n - 1);
        s.first_backward_use = n - 1 - std::min(i + 1, n - 1);
        s.last_backward_use = s.first_backward_use;
        s.producer_kind = LayerKind::activation;
    }
    return stash;
}

void check_vmem() {
    Check c(5, "address-space planning under the stress policy");
    Topology t = build_design(SystemDesign::mc_ring_bw, 8, DeviceSpec{});
    const u64 floor = 100ull << 20, bytes = 8ull << 20;

    u64 first_peak = 0;
    bool flat = true, conserve = true;
    for (int depth : {4, 16, 64, 256}) {
        AddressSpaceMap map =
            plan_migration(t, 0, synthetic_chain(depth, bytes), floor);
        if (first_peak == 0) first_peak = map.peak_resident_bytes;
        flat = flat && map.peak_resident_bytes == first_peak &&
               map.peak_resident_bytes <= floor + 2 * bytes;
        conserve = conserve &&
                   map.offloaded_bytes + map.recomputed_bytes + map.resident_bytes ==
                       bytes * static_cast<u64>(depth);
    }
    c.sub(flat, format("peak residency is depth-independent over chains 4..256 "
                       "(%llu bytes = floor + 2 tensors)",
                       static_cast<unsigned long long>(first_peak)));
    c.sub(conserve, "every stash byte is offloaded, recomputed, or resident");

    bool engine_conserves = true;
    for (Parallelism par : {Parallelism::data, Parallelism::model}) {
        NetworkDAG net = load_workload("rnn_gru");
        TrainingConfig cfg;
        cfg.parallelism = par;
        IterationResult r = simulate_iteration(t, net, cfg);
        engine_conserves = engine_conserves && r.offload_bytes == r.prefetch_bytes &&
                           r.offload_bytes > 0;
    }
    c.sub(engine_conserves,
          "offloaded bytes equal prefetched bytes on sliced recurrent programs");

    Topology oracle = build_design(SystemDesign::oracle, 8, DeviceSpec{});
    AddressSpaceMap om = plan_migration(oracle, 0, synthetic_chain(64, bytes), floor);
    c.sub(om.offloaded_bytes == 0 && om.recomputed_bytes == 0,
          "the unbounded-memory baseline moves zero bytes");

    std::vector<StashTensor> odd(1);
    odd[0].bytes = 5 * kPageBytes - 7;
    odd[0].last_forward_use = 0;
    odd[0].first_backward_use = 0;
    odd[0].last_backward_use = 0;
    AddressSpaceMap a = plan_migration(t, 0, odd, 0);
    AddressSpaceMap b = plan_migration(t, 0, odd, 0);
    bool stable = a.entries[0].placement.size() == 2 &&
                  a.entries[0].placement[0].pages == 3 &&
                  a.entries[0].placement[1].pages == 2 &&
                  a.entries[0].placement[0].bytes + a.entries[0].placement[1].bytes ==
                      odd[0].bytes;
    for (size_t i = 0; i < 2; ++i)
        stable = stable &&
                 a.entries[0].placement[i].pages == b.entries[0].placement[i].pages &&
                 a.entries[0].placement[i].half == b.entries[0].placement[i].half;
    c.sub(stable, "odd page counts stripe 3+2 toward the first half, stably");
    c.finish(10.0);
}

// ---------------------------------------------------------------------------
// Check 6: engine orderings, attribution, determinism
// ---------------------------------------------------------------------------

void check_engine(const Matrix& m) {
    Check c(6, "iteration-engine orderings over the full design matrix");

    bool oracle_floor = true, ring_order = true, attribution = true, host_cap = true;
    for (const std::string& w : detail::bundled_workloads()) {
        for (Parallelism par : {Parallelism::data, Parallelism::model}) {
            const IterationResult& oracle = m.at({w, par, SystemDesign::oracle});
            const IterationResult& ring_bw = m.at({w, par, SystemDesign::mc_ring_bw});
            const IterationResult& ring_local =
                m.at({w, par, SystemDesign::mc_ring_local});
            ring_order = ring_order &&
                         oracle.total_seconds <= ring_bw.total_seconds * (1 + 1e-9) &&
                         ring_bw.total_seconds <= ring_local.total_seconds * (1 + 1e-9);
            for (SystemDesign d : all_designs()) {
                const IterationResult& r = m.at({w, par, d});
                oracle_floor = oracle_floor &&
                               oracle.total_seconds <= r.total_seconds * (1 + 1e-9);
                attribution =
                    attribution &&
                    std::fabs(r.exposed_compute + r.exposed_sync + r.exposed_migration -
                              r.total_seconds) <= 1e-9 * r.total_seconds;
                Topology t = build_design(d, 8, DeviceSpec{});
                if (t.host_backed() && t.migrates())
                    host_cap = host_cap &&
                               r.host_bw_peak <= t.host.socket_mem_bandwidth *
                                                     t.host.socket_count * (1 + 1e-9);
            }
        }
    }
    c.sub(oracle_floor, "the unbounded-memory baseline lower-bounds every design");
    c.sub(ring_order,
          "baseline <= bandwidth-aware ring <= locality-first ring (total time)");
    c.sub(attribution, "compute + sync + migration exposure sums to the makespan");
    c.sub(host_cap, "peak host traffic never exceeds socket bandwidth x socket count");

    // Exposed-migration chain on migration-bound cells (device-centric design
    // spends >= 50% of its iteration on exposed migration).
    int cells = 0;
    bool leg_dc_star = true, leg_star_hc = true, leg_star_local = true,
         leg_hc_bw = true, leg_local_bw = true;
    std::string star_hc_detail;
    for (const std::string& w : detail::bundled_workloads()) {
        for (Parallelism par : {Parallelism::data, Parallelism::model}) {
            const IterationResult& dc = m.at({w, par, SystemDesign::dc});
            if (dc.exposed_migration < 0.5 * dc.total_seconds) continue;
            ++cells;
            double star = m.at({w, par, SystemDesign::mc_star}).exposed_migration;
            double hc = m.at({w, par, SystemDesign::hc}).exposed_migration;
            double local = m.at({w, par, SystemDesign::mc_ring_local}).exposed_migration;
            double ring = m.at({w, par, SystemDesign::mc_ring_bw}).exposed_migration;
            leg_dc_star = leg_dc_star && dc.exposed_migration > star;
            leg_star_local = leg_star_local && star > local;
            leg_hc_bw = leg_hc_bw && hc > ring;
            leg_local_bw = leg_local_bw && local > ring;
            if (!(star > hc)) {
                leg_star_hc = false;
                star_hc_detail += format("\n         %s/%s: star %.3e <= hc %.3e",
                                         w.c_str(), parallelism_name(par), star, hc);
            }
        }
    }
    c.sub(cells >= 10, format("%d of 16 cells are migration-bound", cells));
    c.sub(leg_dc_star, "exposure leg: device-centric above star");
    c.sub(leg_star_local, "exposure leg: star above locality-first ring");
    c.sub(leg_hc_bw, "exposure leg: host-centric above bandwidth-aware ring");
    c.sub(leg_local_bw, "exposure leg: locality-first above bandwidth-aware ring");
    // D1: under the stress policy both directions stay busy, and the star's
    // duplex aggregate (2 x 50 GB/s) beats the host share (300 GB/s across 4
    // devices, split over 2 directions), inverting this leg on most cells.
    c.sub(leg_star_hc,
          "exposure leg: star above host-centric on every migration-bound cell" +
              star_hc_detail,
          /*documented_deviation=*/true);

    Matrix again = run_matrix();
    bool deterministic = again.size() == m.size();
    for (const auto& [key, r] : m) {
        const IterationResult& s = again.at(key);
        deterministic =
            deterministic &&
            std::memcmp(&r.total_seconds, &s.total_seconds, sizeof(double)) == 0 &&
            std::memcmp(&r.exposed_compute, &s.exposed_compute, sizeof(double)) == 0 &&
            std::memcmp(&r.exposed_sync, &s.exposed_sync, sizeof(double)) == 0 &&
            std::memcmp(&r.exposed_migration, &s.exposed_migration, sizeof(double)) ==
                0 &&
            r.offload_bytes == s.offload_bytes && r.task_count == s.task_count;
    }
    c.sub(deterministic, "a full re-run of the matrix is bit-identical");
    c.finish(120.0);
}

// ---------------------------------------------------------------------------
// Check 7: directional platform comparisons (measured vs reference)
// ---------------------------------------------------------------------------

double matrix_hm(const Matrix& m, Parallelism par, SystemDesign num,
                 SystemDesign den) {
    std::vector<double> ratios;
    for (const std::string& w : detail::bundled_workloads())
        ratios.push_back(m.at({w, par, den}).total_seconds /
                         m.at({w, par, num}).total_seconds);
    return harmonic_mean(ratios);
}

void check_comparisons(const Matrix& m) {
    Check c(7, "directional comparisons against the reference platform study");

    double hm_data = matrix_hm(m, Parallelism::data, SystemDesign::mc_ring_bw,
                               SystemDesign::dc);
    double hm_model = matrix_hm(m, Parallelism::model, SystemDesign::mc_ring_bw,
                                SystemDesign::dc);
    c.sub(hm_data >= 1.5 && hm_model >= 1.5,
          format("bandwidth-aware ring vs device-centric: HM speedup %.3fx data / "
                 "%.3fx model (reference 3.5x / 2.1x; gate >= 1.5x)",
                 hm_data, hm_model));

    double near_data = matrix_hm(m, Parallelism::data, SystemDesign::mc_ring_local,
                                 SystemDesign::mc_ring_bw);
    double near_model = matrix_hm(m, Parallelism::model, SystemDesign::mc_ring_local,
                                  SystemDesign::mc_ring_bw);
    c.sub(near_data >= 0.80 && near_model >= 0.80,
          format("locality-first ring within 20 points of bandwidth-aware "
                 "(%.1f%% data / %.1f%% model)",
                 100 * near_data, 100 * near_model));
    // D2: migration-bandwidth-bound workloads pin the ratio near the 75/150
    // path-bandwidth ratio, below the reference report of 96%.
    c.sub(near_data >= 0.90 && near_model >= 0.90,
          format("locality-first ring within 10 points of bandwidth-aware "
                 "(%.1f%% data / %.1f%% model; reference 96%%)",
                 100 * near_data, 100 * near_model),
          /*documented_deviation=*/true);

    double worst = 1.0;
    std::string worst_cell = "-";
    std::string below_084;
    bool all_above_080 = true;
    for (const std::string& w : detail::bundled_workloads()) {
        for (Parallelism par : {Parallelism::data, Parallelism::model}) {
            double frac = m.at({w, par, SystemDesign::oracle}).total_seconds /
                          m.at({w, par, SystemDesign::mc_ring_bw}).total_seconds;
            if (frac < worst) {
                worst = frac;
                worst_cell = w + "/" + parallelism_name(par);
            }
            if (frac < 0.84)
                below_084 += format("\n         %s/%s at %.3f", w.c_str(),
                                    parallelism_name(par), frac);
            all_above_080 = all_above_080 && frac >= 0.80;
        }
    }
    c.sub(all_above_080,
          format("bandwidth-aware ring reaches >= 80%% of the unbounded baseline "
                 "everywhere (worst %.3f at %s)",
                 worst, worst_cell.c_str()));
    // D3: one recurrent cell sits just below the reference band of 84-99%.
    c.sub(below_084.empty(),
          "bandwidth-aware ring reaches >= 84% of the unbounded baseline in every "
          "cell (reference band 84-99%)" +
              below_084,
          /*documented_deviation=*/true);

    std::vector<double> reductions;
    bool sync_up = true;
    for (const std::string& w : detail::bundled_workloads()) {
        const IterationResult& dc = m.at({w, Parallelism::data, SystemDesign::dc});
        const IterationResult& hc = m.at({w, Parallelism::data, SystemDesign::hc});
        if (dc.exposed_migration < 0.01 * dc.total_seconds) continue;
        reductions.push_back(1.0 - hc.exposed_migration / dc.exposed_migration);
        sync_up = sync_up && hc.exposed_sync > dc.exposed_sync;
    }
    double mean_red = 0;
    for (double r : reductions) mean_red += r;
    mean_red /= static_cast<double>(reductions.size());
    c.sub(mean_red >= 0.5 && sync_up,
          format("host-centric staging cuts migration exposure by %.0f%% on average "
                 "(reference ~88-90%%) while raising sync exposure in all %zu cells",
                 100 * mean_red, reductions.size()));

    // Weak scaling, 64 samples per device: 4 devices (batch 256) vs 8 (batch
    // 512), device-centric with a shared PCIe complex vs the bandwidth-aware
    // ring. Efficiency = T4/T8 per workload, harmonically averaged.
    FabricOptions shared;
    shared.shared_pcie = true;
    std::vector<double> eff_dc, eff_ring;
    for (const std::string& w :
         {std::string("alexnet"), std::string("googlenet"), std::string("vgg_e"),
          std::string("resnet34")}) {
        NetworkDAG net = load_workload(w);
        eff_dc.push_back(
            detail::run_point(net, SystemDesign::dc, Parallelism::data, 256, 4, shared)
                .iter.total_seconds /
            detail::run_point(net, SystemDesign::dc, Parallelism::data, 512, 8, shared)
                .iter.total_seconds);
        eff_ring.push_back(
            detail::run_point(net, SystemDesign::mc_ring_bw, Parallelism::data, 256, 4)
                .iter.total_seconds /
            detail::run_point(net, SystemDesign::mc_ring_bw, Parallelism::data, 512, 8)
                .iter.total_seconds);
    }
    double hm_dc = harmonic_mean(eff_dc), hm_ring = harmonic_mean(eff_ring);
    c.sub(hm_dc < 0.9 && hm_ring >= 0.9,
          format("4->8 device weak scaling: device-centric %.1f%% (sublinear, "
                 "reference ~54%%) vs ring %.1f%% (>= 90%% linear)",
                 100 * hm_dc, 100 * hm_ring));

    bool batches_ok = true;
    std::string batch_note;
    for (u64 batch : {64ull, 128ull, 256ull, 512ull}) {
        std::vector<double> ratios;
        for (const std::string& w :
             {std::string("alexnet"), std::string("googlenet"), std::string("vgg_e"),
              std::string("resnet34")}) {
            NetworkDAG net = load_workload(w);
            double dc =
                detail::run_point(net, SystemDesign::dc, Parallelism::data, batch, 8)
                    .iter.total_seconds;
            double ring = detail::run_point(net, SystemDesign::mc_ring_bw,
                                            Parallelism::data, batch, 8)
                              .iter.total_seconds;
            ratios.push_back(dc / ring);
        }
        double hm = harmonic_mean(ratios);
        batches_ok = batches_ok && hm > 1.0;
        batch_note +=
            format(" %.2fx@%llu", hm, static_cast<unsigned long long>(batch));
    }
    c.sub(batches_ok,
          "ring beats device-centric at every batch size:" + batch_note +
              " (reference average 2.17x)");
    c.finish();
}

// ---------------------------------------------------------------------------
// Check 8: command-line contract
// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
    std::string cmd = std::string(MCSIM_CLI_PATH) + " " + args + " >" +
                      log.string() + " 2>&1";
    int raw = std::system(cmd.c_str());
    return raw < 0 ? raw : WEXITSTATUS(raw);
}

// Quote-aware comma count, so quoted error messages don't skew the schema.
int csv_fields(const std::string& line) {
    int fields = 1;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (ch == '"') quoted = !quoted;
        else if (ch == ',' && !quoted) ++fields;
    }
    return fields;
}

bool csv_schema_valid(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty()) return false;
    int fields = csv_fields(line);
    if (fields < 2) return false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (csv_fields(line) != fields) return false;
    }
    return true;
}

void check_cli() {
    Check c(8, "command-line contract: curated bundles and config validation");
    fs::path root = fs::temp_directory_path() / "mcsim_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    const char* tags[] = {"fig9", "fig10", "fig11", "fig12",
                          "fig13", "table4", "scaling54"};
    bool ran = true, stable = true, schema = true;
    for (const char* tag : tags) {
        fs::path a = root / (std::string(tag) + "_a");
        fs::path b = root / (std::string(tag) + "_b");
        ran = ran &&
              run_cli(std::string("reproduce ") + tag + " --out " + a.string(),
                      root / "log") == 0 &&
              run_cli(std::string("reproduce ") + tag + " --out " + b.string(),
                      root / "log") == 0;
        if (!ran) break;
        bool saw_csv = false;
        for (const fs::directory_entry& e : fs::directory_iterator(a)) {
            std::string first = slurp(e.path());
            std::string second = slurp(b / e.path().filename());
            stable = stable && !first.empty() && first == second;
            if (e.path().extension() == ".csv") {
                saw_csv = true;
                schema = schema && csv_schema_valid(first);
            }
        }
        schema = schema && saw_csv;
    }
    c.sub(ran, "all seven curated tags run to completion");
    c.sub(stable, "every emitted file is byte-identical across two runs");
    c.sub(schema, "every emitted table is schema-consistent CSV");

    struct Bad {
        const char* file;
        const char* fragment;
    };
    const Bad bad[] = {
        {"bad_json.json", "invalid JSON"},
        {"missing_workload.json", "experiment.workload: missing required field"},
        {"missing_design.json", "experiment.design: missing required field"},
        {"unknown_design.json", "experiment.design: unknown design 'quantum'"},
        {"bad_parallelism.json", "experiment.parallelism: unknown strategy 'pipeline'"},
        {"zero_batch.json", "experiment.batch_size: must be strictly positive"},
        {"indivisible_batch.json",
         "experiment.batch_size: 100 is not divisible by device_count 8"},
        {"unknown_field.json", "experiment.optimizer: unknown field"},
        {"bad_mac_efficiency.json", "device.mac_efficiency: must be in (0, 1]"},
        {"negative_hop_latency.json",
         "experiment.fabric.hop_latency: must be non-negative"},
    };
    int rejected = 0;
    for (const Bad& b : bad) {
        fs::path log = root / "validate.log";
        int code = run_cli("validate " + std::string(MCSIM_SOURCE_DIR) +
                               "/tests/data/invalid_configs/" + b.file,
                           log);
        std::string text = slurp(log);
        if (code == 1 && text.find(b.fragment) != std::string::npos) {
            ++rejected;
        } else {
            std::printf("      %s: exit %d, missing '%s' in: %s\n", b.file, code,
                        b.fragment, text.c_str());
        }
    }
    c.sub(rejected == 10,
          format("%d/10 malformed configs rejected with field-accurate diagnostics",
                 rejected));
    c.finish();
}

}  // namespace

int main() {
    std::printf("acceptance gate: deterministic platform-comparison simulator\n\n");
    check_topology();
    check_bandwidth();
    check_power();
    check_collectives();
    check_vmem();
    Matrix m = run_matrix();
    check_engine(m);
    check_comparisons(m);
    check_cli();
    if (g_unexpected == 0) {
        std::printf("acceptance: all checks match their documented expectations\n");
        return 0;
    }
    std::printf("acceptance: %d sub-check(s) deviated from the documented "
                "expectations\n",
                g_unexpected);
    return 1;
}
