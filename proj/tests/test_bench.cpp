#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "conv1d/bench.hpp"

using namespace conv1d;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p, const std::string& content = {}) : path(std::move(p)) {
        if (!content.empty()) {
            std::ofstream f(path, std::ios::binary);
            f << content;
        }
    }
    ~TempFile() { std::remove(path.c_str()); }
};

SweepConfig tiny_config() {
    SweepConfig cfg;
    cfg.widths = {64};
    cfg.channels = {2};
    cfg.filters = {2};
    cfg.filter_sizes = {3};
    cfg.dilations = {1};
    cfg.batch = 1;
    cfg.iterations = 1;
    cfg.warmup = 0;
    cfg.peak_flops = 1e9;
    return cfg;
}

} // namespace

TEST_CASE("pass names round-trip and the CLI shorthand parses") {
    CHECK(pass_name(Pass::Forward) == "forward");
    CHECK(pass_name(Pass::BackwardData) == "backward_data");
    CHECK(pass_name(Pass::BackwardWeight) == "backward_weight");
    for (const Pass p : {Pass::Forward, Pass::BackwardData, Pass::BackwardWeight}) {
        CHECK(parse_pass(pass_name(p)) == p);
    }
    CHECK(parse_pass("fwd") == Pass::Forward);
    CHECK(parse_pass("bwd_d") == Pass::BackwardData);
    CHECK(parse_pass("bwd_w") == Pass::BackwardWeight);
    CHECK_THROWS_AS(parse_pass("sideways"), ConfigError);
}

TEST_CASE("efficiency is flops per second over peak") {
    CHECK(efficiency(1000000000LL, 0.25, 8e9) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(efficiency(0, 1.0, 8e9) == 0.0);
    CHECK(efficiency(1377000000LL, 1.0, 4.3e12) ==
          doctest::Approx(1377000000.0 / 4.3e12).epsilon(1e-12));
    CHECK_THROWS_AS(efficiency(1, 0.0, 1e9), NonPositiveTime);
    CHECK_THROWS_AS(efficiency(1, -1.0, 1e9), NonPositiveTime);
    CHECK_THROWS_AS(efficiency(1, 1.0, 0.0), NonPositiveTime);
}

TEST_CASE("the advantage condition fires only for large multi-channel shapes") {
    CHECK(meets_condition(5, 1000, 2, 2));
    CHECK_FALSE(meets_condition(4, 1000, 2, 2));
    CHECK_FALSE(meets_condition(5, 999, 2, 2));
    CHECK_FALSE(meets_condition(5, 1000, 1, 2));
    CHECK_FALSE(meets_condition(5, 1000, 2, 1));
}

TEST_CASE("flop model counts the naive loop nest times two") {
    const idx_t n = 3, c = 4, k = 5, s = 2, q = 7;
    std::int64_t macs = 0;
    for (idx_t a = 0; a < n; ++a) {
        for (idx_t b = 0; b < k; ++b) {
            for (idx_t x = 0; x < q; ++x) {
                for (idx_t j = 0; j < c; ++j) {
                    for (idx_t t = 0; t < s; ++t) ++macs;
                }
            }
        }
    }
    ConvParams p;
    p.channels = c;
    p.filters = k;
    p.taps = s;
    CHECK(conv_flops(p, n, q) == 2 * macs);
}

TEST_CASE("config files parse keys, lists, and comments") {
    const TempFile file("test_bench_tmp.cfg",
                        "# sweep grid\n"
                        "widths = 1000, 2000\n"
                        "channels = 15\n"
                        "filters = 15\n"
                        "filter_sizes = 5, 51\n"
                        "dilations = 8\n"
                        "batch = 2\n"
                        "iterations = 4\n"
                        "warmup = 1\n"
                        "precision = bf16\n"
                        "peak_flops = 4.3e12\n"
                        "passes = fwd, bwd_w\n"
                        "seed = 99\n");
    const SweepConfig cfg = load_sweep_config(file.path);
    CHECK(cfg.widths == std::vector<idx_t>{1000, 2000});
    CHECK(cfg.channels == std::vector<idx_t>{15});
    CHECK(cfg.filter_sizes == std::vector<idx_t>{5, 51});
    CHECK(cfg.dilations == std::vector<idx_t>{8});
    CHECK(cfg.batch == 2);
    CHECK(cfg.iterations == 4);
    CHECK(cfg.warmup == 1);
    CHECK(cfg.precision == Precision::Bf16);
    CHECK(cfg.peak_flops == 4.3e12);
    REQUIRE(cfg.passes.size() == 2);
    CHECK(cfg.passes[0] == Pass::Forward);
    CHECK(cfg.passes[1] == Pass::BackwardWeight);
    CHECK(cfg.seed == 99);
}

TEST_CASE("config errors are reported with cause") {
    CHECK_THROWS_AS(load_sweep_config("does_not_exist.cfg"), ConfigError);
    const TempFile bad_key("test_bench_bad1.cfg", "widht = 10\n");
    CHECK_THROWS_AS(load_sweep_config(bad_key.path), ConfigError);
    const TempFile no_eq("test_bench_bad2.cfg", "widths 10\n");
    CHECK_THROWS_AS(load_sweep_config(no_eq.path), ConfigError);
    const TempFile bad_num("test_bench_bad3.cfg", "widths = ten\n");
    CHECK_THROWS_AS(load_sweep_config(bad_num.path), ConfigError);
}

TEST_CASE("measure_kernel returns positive finite durations") {
    BenchShape shape; // all dimensions 1
    const double s = measure_kernel(shape, Pass::Forward, 1, 0, 1, 7);
    CHECK(s > 0.0);
    CHECK(std::isfinite(s));

    // Repeatability is loose by design; only sanity is asserted.
    BenchShape mid;
    mid.channels = mid.filters = 8;
    mid.taps = 5;
    mid.q = 512;
    const double a = measure_kernel(mid, Pass::Forward, 5, 2, 1, 7);
    const double b = measure_kernel(mid, Pass::Forward, 5, 2, 1, 7);
    CHECK(a > 0.0);
    CHECK(b > 0.0);
    CHECK(a <= 3.0 * b);
    CHECK(b <= 3.0 * a);

    const double no_warm = measure_kernel(mid, Pass::BackwardData, 2, 0, 1, 7);
    const double warm = measure_kernel(mid, Pass::BackwardData, 2, 3, 1, 7);
    CHECK(std::isfinite(no_warm));
    CHECK(std::isfinite(warm));
}

TEST_CASE("a singleton grid yields one record per pass") {
    const SweepConfig cfg = tiny_config();
    const SweepResult r = run_sweep(cfg);
    CHECK(r.records.size() == 3);
    CHECK(r.skips.empty());
}

TEST_CASE("grid size multiplies out and meets_condition is carried through") {
    SweepConfig cfg = tiny_config();
    cfg.widths = {1000, 2000};
    cfg.channels = {15};
    cfg.filters = {15};
    cfg.filter_sizes = {5, 51};
    cfg.dilations = {8};
    cfg.passes = {Pass::Forward};
    const SweepResult r = run_sweep(cfg);
    REQUIRE(r.records.size() == 4);
    for (const SweepRecord& rec : r.records) {
        CHECK(rec.meets_condition);
        CHECK(rec.flops == conv_flops(ConvParams{15, 15, rec.s, 8}, 1, rec.q));
        CHECK(rec.efficiency ==
              doctest::Approx(static_cast<double>(rec.flops) / rec.seconds / 1e9).epsilon(1e-12));
    }
}

TEST_CASE("bf16 grids record skips for odd shapes and stay complete") {
    SweepConfig cfg = tiny_config();
    cfg.precision = Precision::Bf16;
    cfg.widths = {64, 63};
    cfg.channels = {2, 3};
    cfg.filters = {2};
    cfg.filter_sizes = {3};
    cfg.dilations = {1};
    const SweepResult r = run_sweep(cfg);
    const std::size_t grid = 2 * 2 * 1 * 1 * 1;
    CHECK(r.records.size() + r.skips.size() == grid * cfg.passes.size());
    CHECK(r.records.size() == 3); // only (w=64, c=2) runs, one per pass
    for (const SweepSkip& s : r.skips) CHECK_FALSE(s.reason.empty());
}

TEST_CASE("csv writing round-trips every field exactly") {
    SweepConfig cfg = tiny_config();
    cfg.widths = {64, 100};
    const SweepResult r = run_sweep(cfg);

    const TempFile csv("test_bench_tmp.csv");
    write_csv(r.records, csv.path);
    const std::vector<SweepRecord> back = parse_csv(csv.path);
    REQUIRE(back.size() == r.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        const SweepRecord& a = r.records[i];
        const SweepRecord& b = back[i];
        CHECK(a.n == b.n);
        CHECK(a.c == b.c);
        CHECK(a.k == b.k);
        CHECK(a.s == b.s);
        CHECK(a.d == b.d);
        CHECK(a.q == b.q);
        CHECK(a.pass == b.pass);
        CHECK(a.seconds == b.seconds);
        CHECK(a.flops == b.flops);
        CHECK(a.gflops == b.gflops);
        CHECK(a.efficiency == b.efficiency);
        CHECK(a.meets_condition == b.meets_condition);
        CHECK(a.threads == b.threads);
    }
}

TEST_CASE("an empty record list writes a header-only csv") {
    const TempFile csv("test_bench_empty.csv");
    write_csv({}, csv.path);
    std::ifstream f(csv.path);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "N,C,K,S,d,Q,pass,seconds,flops,gflops,efficiency,meets_condition,threads");
    CHECK_FALSE(std::getline(f, line));
    CHECK(parse_csv(csv.path).empty());
}

TEST_CASE("the summary orders best above worst") {
    SweepConfig cfg = tiny_config();
    cfg.widths = {64, 128, 256};
    cfg.passes = {Pass::Forward};
    const SweepResult r = run_sweep(cfg);
    const std::string text = summarize(r);
    CHECK(text.find("forward") != std::string::npos);
    const SweepRecord* best = nullptr;
    const SweepRecord* worst = nullptr;
    for (const SweepRecord& rec : r.records) {
        if (!best || rec.efficiency > best->efficiency) best = &rec;
        if (!worst || rec.efficiency < worst->efficiency) worst = &rec;
    }
    REQUIRE(best);
    CHECK(best->efficiency >= worst->efficiency);
}

TEST_CASE("run_sweep validates its configuration") {
    SweepConfig cfg = tiny_config();
    cfg.widths.clear();
    CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
    cfg = tiny_config();
    cfg.peak_flops = 0.0;
    CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
    cfg = tiny_config();
    cfg.iterations = 0;
    CHECK_THROWS_AS(run_sweep(cfg), ConfigError);
}
