#include "conv1d/bench.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "conv1d/rng.hpp"

namespace conv1d {

namespace {

// Keeps the optimizer from treating a timed kernel call as dead code.
volatile float g_sink = 0.0f;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    while (true) {
        const auto pos = s.find(sep);
        if (pos == std::string_view::npos) {
            parts.push_back(s);
            return parts;
        }
        parts.push_back(s.substr(0, pos));
        s.remove_prefix(pos + 1);
    }
}

template <typename T>
T parse_number(std::string_view text, const std::string& what) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("cannot parse " + what + " from '" + std::string(text) + "'");
    }
    return value;
}

std::vector<idx_t> parse_list(std::string_view text, const std::string& what) {
    std::vector<idx_t> out;
    for (const auto part : split(text, ',')) out.push_back(parse_number<idx_t>(part, what));
    return out;
}

Precision parse_precision(std::string_view text) {
    text = trim(text);
    if (text == "fp32") return Precision::Fp32;
    if (text == "bf16") return Precision::Bf16;
    throw ConfigError("precision must be fp32 or bf16, got '" + std::string(text) + "'");
}

template <typename T>
void append_number(std::string& out, T value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    out.append(buf, res.ptr);
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void validate_config(const SweepConfig& cfg) {
    const auto need = [](const std::vector<idx_t>& v, const char* name) {
        if (v.empty()) throw ConfigError(std::string("sweep config is missing ") + name);
        for (const idx_t x : v) {
            if (x < 1) throw ConfigError(std::string(name) + " entries must be positive");
        }
    };
    need(cfg.widths, "widths");
    need(cfg.channels, "channels");
    need(cfg.filters, "filters");
    need(cfg.filter_sizes, "filter_sizes");
    need(cfg.dilations, "dilations");
    if (cfg.batch < 1) throw ConfigError("batch must be positive");
    if (cfg.iterations < 1) throw ConfigError("iterations must be at least 1");
    if (cfg.warmup < 0) throw ConfigError("warmup cannot be negative");
    if (cfg.threads < 1) throw ConfigError("threads must be positive");
    if (cfg.passes.empty()) throw ConfigError("no passes requested");
    if (!(cfg.peak_flops > 0.0)) throw ConfigError("peak_flops must be positive");
}

// Reason a grid point cannot run, or empty if it can. Only the BF16 path
// has shape constraints beyond positivity.
std::string skip_reason(const BenchShape& shape) {
    if (shape.precision != Precision::Bf16) return {};
    const idx_t width = shape.q + shape.dilation * (shape.taps - 1);
    if (shape.channels % 2 != 0) return "bf16 needs even channels";
    if (shape.filters % 2 != 0) return "bf16 needs even filters";
    if (shape.q % 2 != 0) return "bf16 needs an even output width";
    if (width % 2 != 0) return "bf16 needs an even input width";
    return {};
}

} // namespace

std::string_view pass_name(Pass pass) {
    switch (pass) {
    case Pass::Forward: return "forward";
    case Pass::BackwardData: return "backward_data";
    case Pass::BackwardWeight: return "backward_weight";
    }
    return "unknown";
}

Pass parse_pass(std::string_view text) {
    text = trim(text);
    if (text == "forward" || text == "fwd") return Pass::Forward;
    if (text == "backward_data" || text == "bwd_d") return Pass::BackwardData;
    if (text == "backward_weight" || text == "bwd_w") return Pass::BackwardWeight;
    throw ConfigError("unknown pass '" + std::string(text) + "'");
}

SweepConfig load_sweep_config(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config file " + path);

    SweepConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        std::string_view text = line;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = trim(text);
        if (text.empty()) continue;

        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string_view key = trim(text.substr(0, eq));
        const std::string_view value = trim(text.substr(eq + 1));

        if (key == "widths") cfg.widths = parse_list(value, "widths");
        else if (key == "channels") cfg.channels = parse_list(value, "channels");
        else if (key == "filters") cfg.filters = parse_list(value, "filters");
        else if (key == "filter_sizes") cfg.filter_sizes = parse_list(value, "filter_sizes");
        else if (key == "dilations") cfg.dilations = parse_list(value, "dilations");
        else if (key == "batch") cfg.batch = parse_number<idx_t>(value, "batch");
        else if (key == "iterations") cfg.iterations = parse_number<int>(value, "iterations");
        else if (key == "warmup") cfg.warmup = parse_number<int>(value, "warmup");
        else if (key == "precision") cfg.precision = parse_precision(value);
        else if (key == "peak_flops") cfg.peak_flops = parse_number<double>(value, "peak_flops");
        else if (key == "threads") cfg.threads = parse_number<int>(value, "threads");
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, "seed");
        else if (key == "passes") {
            cfg.passes.clear();
            for (const auto part : split(value, ',')) cfg.passes.push_back(parse_pass(part));
        } else {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" +
                              std::string(key) + "'");
        }
    }
    return cfg;
}

double measure_kernel(const BenchShape& shape, Pass pass, int iterations, int warmup, int threads,
                      std::uint64_t seed) {
    if (iterations < 1) throw ConfigError("iterations must be at least 1");
    if (warmup < 0) throw ConfigError("warmup cannot be negative");

    ConvParams p;
    p.channels = shape.channels;
    p.filters = shape.filters;
    p.taps = shape.taps;
    p.dilation = shape.dilation;
    p.precision = shape.precision;
    const idx_t width = shape.q + p.dilation * (p.taps - 1);

    // All buffer setup, including weight packing, happens before the clock
    // starts. The backward-data pass pads internally; that cost belongs to
    // the pass and stays inside the timed region.
    Rng rng(seed);
    WeightKCS weights(p.filters, p.channels, p.taps);
    rng.fill_uniform(weights.data, -1.0f, 1.0f);

    Tensor3Df in, grad_out;
    PackedWeights packed;
    if (pass == Pass::Forward || pass == Pass::BackwardWeight) {
        in = Tensor3Df(shape.batch, p.channels, width);
        rng.fill_uniform(in.data, -1.0f, 1.0f);
    }
    if (pass == Pass::BackwardData || pass == Pass::BackwardWeight) {
        grad_out = Tensor3Df(shape.batch, p.filters, shape.q);
        rng.fill_uniform(grad_out.data, -1.0f, 1.0f);
    }
    if (pass == Pass::Forward) packed = pack_weights_forward(weights);
    if (pass == Pass::BackwardData) packed = pack_weights_backward(weights);

    const auto run_once = [&] {
        switch (pass) {
        case Pass::Forward: {
            const Tensor3Df out = conv1d_forward(in, packed, p, threads);
            g_sink = g_sink + out.data[0];
            break;
        }
        case Pass::BackwardData: {
            const Tensor3Df out = conv1d_backward_data(grad_out, packed, p, threads);
            g_sink = g_sink + out.data[0];
            break;
        }
        case Pass::BackwardWeight: {
            const WeightKCS out = conv1d_backward_weight(grad_out, in, p, threads);
            g_sink = g_sink + out.data[0];
            break;
        }
        }
    };

    for (int i = 0; i < warmup; ++i) run_once();

    double total = 0.0;
    for (int i = 0; i < iterations; ++i) {
        const double t0 = now_seconds();
        run_once();
        total += now_seconds() - t0;
    }
    return total / iterations;
}

double efficiency(std::int64_t flops, double seconds, double peak_flops) {
    if (!(seconds > 0.0)) throw NonPositiveTime("seconds must be positive");
    if (!(peak_flops > 0.0)) throw NonPositiveTime("peak_flops must be positive");
    return static_cast<double>(flops) / seconds / peak_flops;
}

bool meets_condition(idx_t s, idx_t q, idx_t c, idx_t k) {
    return s >= 5 && q >= 1000 && c > 1 && k > 1;
}

SweepResult run_sweep(const SweepConfig& cfg,
                      const std::function<void(const SweepRecord&)>& progress) {
    validate_config(cfg);

    SweepResult result;
    for (const idx_t q : cfg.widths) {
        for (const idx_t c : cfg.channels) {
            for (const idx_t k : cfg.filters) {
                for (const idx_t s : cfg.filter_sizes) {
                    for (const idx_t d : cfg.dilations) {
                        BenchShape shape;
                        shape.batch = cfg.batch;
                        shape.channels = c;
                        shape.filters = k;
                        shape.taps = s;
                        shape.dilation = d;
                        shape.q = q;
                        shape.precision = cfg.precision;
                        const std::string reason = skip_reason(shape);

                        for (const Pass pass : cfg.passes) {
                            if (!reason.empty()) {
                                result.skips.push_back(
                                    {cfg.batch, c, k, s, d, q, pass, reason});
                                continue;
                            }
                            const double seconds = measure_kernel(
                                shape, pass, cfg.iterations, cfg.warmup, cfg.threads, cfg.seed);

                            ConvParams p;
                            p.channels = c;
                            p.filters = k;
                            p.taps = s;
                            p.dilation = d;
                            SweepRecord rec;
                            rec.n = cfg.batch;
                            rec.c = c;
                            rec.k = k;
                            rec.s = s;
                            rec.d = d;
                            rec.q = q;
                            rec.pass = pass;
                            rec.seconds = seconds;
                            rec.flops = conv_flops(p, cfg.batch, q);
                            rec.gflops = static_cast<double>(rec.flops) / seconds / 1e9;
                            rec.efficiency = efficiency(rec.flops, seconds, cfg.peak_flops);
                            rec.meets_condition = meets_condition(s, q, c, k);
                            rec.threads = cfg.threads;
                            result.records.push_back(rec);
                            if (progress) progress(rec);
                        }
                    }
                }
            }
        }
    }
    return result;
}

namespace {

constexpr std::string_view kCsvHeader =
    "N,C,K,S,d,Q,pass,seconds,flops,gflops,efficiency,meets_condition,threads";

} // namespace

void write_csv(const std::vector<SweepRecord>& records, const std::string& path) {
    std::string out;
    out += kCsvHeader;
    out += '\n';
    for (const SweepRecord& r : records) {
        append_number(out, r.n); out += ',';
        append_number(out, r.c); out += ',';
        append_number(out, r.k); out += ',';
        append_number(out, r.s); out += ',';
        append_number(out, r.d); out += ',';
        append_number(out, r.q); out += ',';
        out += pass_name(r.pass); out += ',';
        append_number(out, r.seconds); out += ',';
        append_number(out, r.flops); out += ',';
        append_number(out, r.gflops); out += ',';
        append_number(out, r.efficiency); out += ',';
        out += r.meets_condition ? '1' : '0'; out += ',';
        append_number(out, r.threads);
        out += '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file || !(file << out)) throw IoError("cannot write CSV to " + path);
}

std::vector<SweepRecord> parse_csv(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw IoError("cannot open CSV " + path);

    std::string line;
    if (!std::getline(file, line)) throw IoError("empty CSV " + path);
    if (trim(line) != kCsvHeader) throw IoError("unexpected CSV header in " + path);

    std::vector<SweepRecord> records;
    while (std::getline(file, line)) {
        const std::string_view text = trim(line);
        if (text.empty()) continue;
        const auto fields = split(text, ',');
        if (fields.size() != 13) {
            throw IoError("CSV row with " + std::to_string(fields.size()) + " fields in " + path);
        }
        SweepRecord r;
        r.n = parse_number<idx_t>(fields[0], "N");
        r.c = parse_number<idx_t>(fields[1], "C");
        r.k = parse_number<idx_t>(fields[2], "K");
        r.s = parse_number<idx_t>(fields[3], "S");
        r.d = parse_number<idx_t>(fields[4], "d");
        r.q = parse_number<idx_t>(fields[5], "Q");
        r.pass = parse_pass(fields[6]);
        r.seconds = parse_number<double>(fields[7], "seconds");
        r.flops = parse_number<std::int64_t>(fields[8], "flops");
        r.gflops = parse_number<double>(fields[9], "gflops");
        r.efficiency = parse_number<double>(fields[10], "efficiency");
        const std::string_view mc = trim(fields[11]);
        if (mc != "0" && mc != "1") throw IoError("meets_condition must be 0 or 1");
        r.meets_condition = mc == "1";
        r.threads = parse_number<int>(fields[12], "threads");
        records.push_back(r);
    }
    return records;
}

std::string summarize(const SweepResult& result) {
    std::ostringstream out;
    out << result.records.size() << " measurements, " << result.skips.size() << " skipped\n";
    for (const Pass pass : {Pass::Forward, Pass::BackwardData, Pass::BackwardWeight}) {
        const SweepRecord* best = nullptr;
        const SweepRecord* worst = nullptr;
        for (const SweepRecord& r : result.records) {
            if (r.pass != pass) continue;
            if (!best || r.efficiency > best->efficiency) best = &r;
            if (!worst || r.efficiency < worst->efficiency) worst = &r;
        }
        if (!best) continue;
        const auto shape = [](const SweepRecord& r) {
            std::ostringstream s;
            s << "N=" << r.n << " C=" << r.c << " K=" << r.k << " S=" << r.s << " d=" << r.d
              << " Q=" << r.q;
            return s.str();
        };
        out << pass_name(pass) << ": best efficiency " << best->efficiency << " ("
            << shape(*best) << ", " << best->gflops << " GFLOP/s), worst " << worst->efficiency
            << " (" << shape(*worst) << ")\n";
    }
    int anomalies = 0;
    for (const SweepRecord& r : result.records) {
        if (r.efficiency > 1.0) ++anomalies;
    }
    if (anomalies > 0) {
        out << anomalies << " rows exceed the declared peak (timing anomaly or wrong peak)\n";
    }
    return out.str();
}

} // namespace conv1d
