#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "conv1d/conv.hpp"

namespace conv1d {

enum class Pass { Forward, BackwardData, BackwardWeight };

// Canonical CSV spelling: "forward", "backward_data", "backward_weight".
std::string_view pass_name(Pass pass);

// Accepts both the CSV spelling and the CLI shorthand (fwd, bwd_d, bwd_w).
// Throws ConfigError on anything else.
Pass parse_pass(std::string_view text);

// Parameter grid plus measurement settings for one sweep. widths holds
// output widths; the input buffers are sized Q + d*(S-1) per combination.
struct SweepConfig {
    std::vector<idx_t> widths;
    std::vector<idx_t> channels;
    std::vector<idx_t> filters;
    std::vector<idx_t> filter_sizes;
    std::vector<idx_t> dilations;
    idx_t batch = 1;
    int iterations = 20;
    int warmup = 3;
    Precision precision = Precision::Fp32;
    double peak_flops = 0.0;      // machine peak in FLOP/s, always user-declared
    std::vector<Pass> passes = {Pass::Forward, Pass::BackwardData, Pass::BackwardWeight};
    int threads = 1;
    std::uint64_t seed = 20260822; // buffer-content seed, fixed for reproducibility
};

struct BenchShape {
    idx_t batch = 1, channels = 1, filters = 1, taps = 1, dilation = 1, q = 1;
    Precision precision = Precision::Fp32;
};

struct SweepRecord {
    idx_t n = 0, c = 0, k = 0, s = 0, d = 0, q = 0;
    Pass pass = Pass::Forward;
    double seconds = 0.0;
    std::int64_t flops = 0;
    double gflops = 0.0;
    double efficiency = 0.0;
    bool meets_condition = false;
    int threads = 1;
};

// A grid point that could not be measured, with the reason (for example
// BF16 shapes with odd dimensions). records + skips always cover the full
// grid x passes product.
struct SweepSkip {
    idx_t n = 0, c = 0, k = 0, s = 0, d = 0, q = 0;
    Pass pass = Pass::Forward;
    std::string reason;
};

struct SweepResult {
    std::vector<SweepRecord> records;
    std::vector<SweepSkip> skips;
};

// Flat "key = value, value, ..." text file, one key per line, '#' comments.
// Recognized keys are the SweepConfig field names. Throws ConfigError on
// unreadable files, unknown keys or unparseable values.
SweepConfig load_sweep_config(const std::string& path);

// Mean wall-clock seconds per call of one pass on one shape. Buffers are
// filled once from `seed` before the clock starts; only the kernel call is
// timed. warmup calls run first and are discarded.
double measure_kernel(const BenchShape& shape, Pass pass, int iterations, int warmup, int threads,
                      std::uint64_t seed);

// flops / seconds / peak_flops. Throws NonPositiveTime unless seconds and
// peak_flops are both positive.
double efficiency(std::int64_t flops, double seconds, double peak_flops);

// The shape-dependent advantage condition: S >= 5, Q >= 1000, C > 1, K > 1.
bool meets_condition(idx_t s, idx_t q, idx_t c, idx_t k);

// Full Cartesian product of the config grid times the requested passes.
// progress, when set, is called after each finished measurement.
SweepResult run_sweep(const SweepConfig& cfg,
                      const std::function<void(const SweepRecord&)>& progress = {});

// One header row, then one row per record. Numeric fields are written with
// shortest-round-trip formatting so parse_csv reproduces them exactly.
void write_csv(const std::vector<SweepRecord>& records, const std::string& path);
std::vector<SweepRecord> parse_csv(const std::string& path);

// Human-readable best/worst efficiency per pass plus skip counts.
std::string summarize(const SweepResult& result);

} // namespace conv1d
