// Parameter-sweep benchmark driver. Reads the grid from a config file,
// times each (shape, pass) combination, and writes one CSV row per
// measurement plus a short text summary to stdout.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "conv1d/bench.hpp"

int main(int argc, char** argv) {
    CLI::App app{"1D dilated convolution parameter sweep"};

    std::string config_path, out_path, precision_text, passes_text;
    double peak_flops = 0.0;
    int threads = 0;

    app.add_option("--config", config_path, "sweep config file")->required();
    app.add_option("--out", out_path, "output CSV path")->required();
    app.add_option("--peak-flops", peak_flops,
                   "declared machine peak in FLOP/s (never auto-detected)");
    app.add_option("--threads", threads, "worker threads for the batch dimension");
    app.add_option("--precision", precision_text, "fp32 or bf16");
    app.add_option("--passes", passes_text, "comma list of fwd,bwd_d,bwd_w");

    CLI11_PARSE(app, argc, argv);

    try {
        conv1d::SweepConfig cfg = conv1d::load_sweep_config(config_path);
        if (peak_flops != 0.0) cfg.peak_flops = peak_flops;
        if (threads != 0) cfg.threads = threads;
        if (!precision_text.empty()) {
            if (precision_text == "fp32") cfg.precision = conv1d::Precision::Fp32;
            else if (precision_text == "bf16") cfg.precision = conv1d::Precision::Bf16;
            else throw conv1d::ConfigError("precision must be fp32 or bf16");
        }
        if (!passes_text.empty()) {
            cfg.passes.clear();
            std::string part;
            for (const char ch : passes_text + ",") {
                if (ch == ',') {
                    if (!part.empty()) cfg.passes.push_back(conv1d::parse_pass(part));
                    part.clear();
                } else {
                    part += ch;
                }
            }
        }

        const conv1d::SweepResult result =
            conv1d::run_sweep(cfg, [](const conv1d::SweepRecord& r) {
                std::printf("%-15s N=%lld C=%lld K=%lld S=%lld d=%lld Q=%lld  %.3f ms  %.2f "
                            "GFLOP/s  eff %.4f\n",
                            std::string(conv1d::pass_name(r.pass)).c_str(),
                            static_cast<long long>(r.n), static_cast<long long>(r.c),
                            static_cast<long long>(r.k), static_cast<long long>(r.s),
                            static_cast<long long>(r.d), static_cast<long long>(r.q),
                            r.seconds * 1e3, r.gflops, r.efficiency);
            });

        conv1d::write_csv(result.records, out_path);
        for (const conv1d::SweepSkip& s : result.skips) {
            std::printf("skipped %s N=%lld C=%lld K=%lld S=%lld d=%lld Q=%lld: %s\n",
                        std::string(conv1d::pass_name(s.pass)).c_str(),
                        static_cast<long long>(s.n), static_cast<long long>(s.c),
                        static_cast<long long>(s.k), static_cast<long long>(s.s),
                        static_cast<long long>(s.d), static_cast<long long>(s.q),
                        s.reason.c_str());
        }
        std::printf("%s", conv1d::summarize(result).c_str());
        std::printf("wrote %zu rows to %s\n", result.records.size(), out_path.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bench: %s\n", e.what());
        return 1;
    }
    return 0;
}
