#include "conv1d/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "conv1d/rng.hpp"

namespace conv1d {

namespace {

constexpr float kPeakThreshold = 0.5f;
constexpr float kNoiseSigma = 0.3f;

Tensor3Df strip_pad_width(const Tensor3Df& t, idx_t left, idx_t right) {
    Tensor3Df out(t.n, t.c, t.w - left - right);
    for (idx_t i = 0; i < t.n; ++i) {
        for (idx_t j = 0; j < t.c; ++j) {
            const float* src = t.item(i) + j * t.w + left;
            float* dst = out.item(i) + j * out.w;
            std::copy(src, src + out.w, dst);
        }
    }
    return out;
}

// Batch slice [begin, end) of a (count, 1, width) tensor as its own tensor.
Tensor3Df batch_slice(const Tensor3Df& t, idx_t begin, idx_t end) {
    Tensor3Df out(end - begin, t.c, t.w);
    std::copy(t.item(begin), t.item(end), out.data.data());
    return out;
}

double stable_softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_spans(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeMismatch(std::string(what) + ": lengths " + std::to_string(a) + " vs " +
                            std::to_string(b));
    }
}

void append_double(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

} // namespace

SyntheticDataset generate_synthetic_dataset(std::uint64_t seed, idx_t count, idx_t width) {
    if (count < 1) throw ConfigError("dataset needs at least one segment");
    if (width < 256) throw ConfigError("segment width must be at least 256");

    SyntheticDataset ds;
    ds.noisy = Tensor3Df(count, 1, width);
    ds.clean = Tensor3Df(count, 1, width);
    ds.mask = Tensor3Df(count, 1, width);

    Rng rng(seed);
    for (idx_t i = 0; i < count; ++i) {
        float* clean = ds.clean.item(i);
        const idx_t bumps = static_cast<idx_t>(rng.next_below(11)); // 0..10
        for (idx_t b = 0; b < bumps; ++b) {
            const double center = rng.next_double() * static_cast<double>(width);
            const double sigma = rng.next_float(8.0f, 40.0f);
            const double height = rng.next_float(0.5f, 2.0f);
            for (idx_t x = 0; x < width; ++x) {
                const double d = (static_cast<double>(x) - center) / sigma;
                clean[x] += static_cast<float>(height * std::exp(-0.5 * d * d));
            }
        }
        float* noisy = ds.noisy.item(i);
        float* mask = ds.mask.item(i);
        for (idx_t x = 0; x < width; ++x) {
            mask[x] = clean[x] > kPeakThreshold ? 1.0f : 0.0f;
            noisy[x] = clean[x] + kNoiseSigma * static_cast<float>(rng.next_normal());
        }
    }
    return ds;
}

void relu_forward(std::span<const float> x, std::span<float> y) {
    check_spans(x.size(), y.size(), "relu_forward");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::span<const float> grad_y, std::span<const float> x,
                   std::span<float> grad_x) {
    check_spans(grad_y.size(), x.size(), "relu_backward");
    check_spans(grad_y.size(), grad_x.size(), "relu_backward");
    for (std::size_t i = 0; i < x.size(); ++i) grad_x[i] = x[i] > 0.0f ? grad_y[i] : 0.0f;
}

LossResult mse_loss(std::span<const float> pred, std::span<const float> target) {
    check_spans(pred.size(), target.size(), "mse_loss");
    LossResult r;
    r.grad.resize(pred.size());
    const double inv = 1.0 / static_cast<double>(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        acc += diff * diff;
        r.grad[i] = static_cast<float>(2.0 * diff * inv);
    }
    r.value = acc * inv;
    return r;
}

LossResult bce_with_logits(std::span<const float> logits, std::span<const float> mask) {
    check_spans(logits.size(), mask.size(), "bce_with_logits");
    LossResult r;
    r.grad.resize(logits.size());
    const double inv = 1.0 / static_cast<double>(logits.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double l = logits[i];
        const double m = mask[i];
        acc += stable_softplus(l) - m * l;
        r.grad[i] = static_cast<float>((stable_sigmoid(l) - m) * inv);
    }
    r.value = acc * inv;
    return r;
}

void sgd_step(std::span<float> params, std::span<const float> grads, float lr) {
    check_spans(params.size(), grads.size(), "sgd_step");
    if (!(lr > 0.0f)) throw ConfigError("sgd_step needs a positive learning rate");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

double auroc(std::span<const float> scores, std::span<const float> labels) {
    check_spans(scores.size(), labels.size(), "auroc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos = 0.0, neg = 0.0, pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // 1-based ranks i+1 .. j averaged over the tie group
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]] > 0.5f) {
                pos += 1.0;
                pos_rank_sum += rank;
            } else {
                neg += 1.0;
            }
        }
        i = j;
    }
    if (pos == 0.0 || neg == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double u = pos_rank_sum - pos * (pos + 1.0) / 2.0;
    return u / (pos * neg);
}

Tensor3Df ConvLayer::forward(const Tensor3Df& x, int threads) {
    x_padded = pad > 0 ? zero_pad_width(x, pad, pad) : x;
    const PackedWeights packed = pack_weights_forward(w);
    pre = conv1d_forward(x_padded, packed, p, threads);
    for (idx_t i = 0; i < pre.n; ++i) {
        for (idx_t k = 0; k < pre.c; ++k) {
            float* row = pre.item(i) + k * pre.w;
            const float b = bias[static_cast<std::size_t>(k)];
            for (idx_t q = 0; q < pre.w; ++q) row[q] += b;
        }
    }

    Tensor3Df out = pre;
    if (relu) relu_forward(pre.data, out.data);
    if (residual) {
        if (!out.same_shape(x)) {
            throw ShapeMismatch("residual layer must preserve its input shape");
        }
        for (std::size_t e = 0; e < out.data.size(); ++e) out.data[e] += x.data[e];
    }
    return out;
}

Tensor3Df ConvLayer::backward(const Tensor3Df& grad_out, int threads) {
    if (!grad_out.same_shape(pre)) throw ShapeMismatch("grad_out does not match the cached forward");

    Tensor3Df grad_pre = grad_out;
    if (relu) relu_backward(grad_out.data, pre.data, grad_pre.data);

    grad_bias.assign(static_cast<std::size_t>(p.filters), 0.0f);
    for (idx_t i = 0; i < grad_pre.n; ++i) {
        for (idx_t k = 0; k < grad_pre.c; ++k) {
            const float* row = grad_pre.item(i) + k * grad_pre.w;
            float acc = grad_bias[static_cast<std::size_t>(k)];
            for (idx_t q = 0; q < grad_pre.w; ++q) acc += row[q];
            grad_bias[static_cast<std::size_t>(k)] = acc;
        }
    }

    grad_w = conv1d_backward_weight(grad_pre, x_padded, p, threads);

    const PackedWeights packed = pack_weights_backward(w);
    Tensor3Df grad_x = conv1d_backward_data(grad_pre, packed, p, threads);
    if (pad > 0) grad_x = strip_pad_width(grad_x, pad, pad);
    if (residual) {
        for (std::size_t e = 0; e < grad_x.data.size(); ++e) grad_x.data[e] += grad_out.data[e];
    }
    return grad_x;
}

void ConvLayer::step(float lr) {
    sgd_step(w.data, grad_w.data, lr);
    sgd_step(bias, grad_bias, lr);
}

namespace {

ConvLayer make_layer(idx_t in_ch, idx_t out_ch, idx_t taps, idx_t dilation, Precision precision,
                     bool relu, bool residual, bool same_pad, float weight_scale, Rng& rng) {
    ConvLayer layer;
    layer.p.channels = in_ch;
    layer.p.filters = out_ch;
    layer.p.taps = taps;
    layer.p.dilation = dilation;
    // BF16 only where the even-dimension rule allows it; odd-channel entry
    // and single-filter heads stay FP32.
    layer.p.precision =
        (precision == Precision::Bf16 && in_ch % 2 == 0 && out_ch % 2 == 0) ? Precision::Bf16
                                                                            : Precision::Fp32;
    layer.pad = same_pad ? same_pad_width(taps, dilation) : 0;
    layer.relu = relu;
    layer.residual = residual;

    layer.w = WeightKCS(out_ch, in_ch, taps);
    const float limit = weight_scale * std::sqrt(6.0f / static_cast<float>(in_ch * taps));
    rng.fill_uniform(layer.w.data, -limit, limit);
    layer.bias.assign(static_cast<std::size_t>(out_ch), 0.0f);
    layer.grad_w = WeightKCS(out_ch, in_ch, taps);
    layer.grad_bias.assign(static_cast<std::size_t>(out_ch), 0.0f);
    return layer;
}

} // namespace

DemoNet::DemoNet(int block_count, idx_t hidden, idx_t taps, idx_t dilation, Precision precision,
                 std::uint64_t seed) {
    if (block_count < 0) throw ConfigError("negative residual block count");
    Rng rng(seed);
    // Residual branches and heads start damped so the initial network is
    // near identity with near-zero predictions; otherwise activations
    // double per block and the first SGD steps on the heads diverge.
    input = make_layer(1, hidden, taps, dilation, precision, true, false, false, 1.0f, rng);
    for (int b = 0; b < block_count; ++b) {
        blocks.push_back(
            make_layer(hidden, hidden, taps, dilation, precision, true, true, true, 0.3f, rng));
    }
    reg_head = make_layer(hidden, 1, 1, 1, precision, false, false, false, 0.1f, rng);
    peak_head = make_layer(hidden, 1, 1, 1, precision, false, false, false, 0.1f, rng);
}

std::vector<ConvLayer*> DemoNet::layers() {
    std::vector<ConvLayer*> out;
    out.push_back(&input);
    for (ConvLayer& b : blocks) out.push_back(&b);
    out.push_back(&reg_head);
    out.push_back(&peak_head);
    return out;
}

DemoNet::Output DemoNet::forward(const Tensor3Df& padded_noisy, int threads) {
    Tensor3Df h = input.forward(padded_noisy, threads);
    for (ConvLayer& b : blocks) h = b.forward(h, threads);
    Output out;
    out.pred = reg_head.forward(h, threads);
    out.logits = peak_head.forward(h, threads);
    return out;
}

void DemoNet::backward(const Tensor3Df& grad_pred, const Tensor3Df& grad_logits, int threads) {
    Tensor3Df grad_h = reg_head.backward(grad_pred, threads);
    const Tensor3Df grad_h2 = peak_head.backward(grad_logits, threads);
    if (!grad_h.same_shape(grad_h2)) throw ShapeMismatch("head gradients disagree in shape");
    for (std::size_t e = 0; e < grad_h.data.size(); ++e) grad_h.data[e] += grad_h2.data[e];

    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        grad_h = it->backward(grad_h, threads);
    }
    input.backward(grad_h, threads); // gradient w.r.t. the padded input is discarded
}

void DemoNet::step(float lr) {
    for (ConvLayer* layer : layers()) layer->step(lr);
}

std::vector<float> gather_params(DemoNet& net) {
    std::vector<float> flat;
    for (ConvLayer* layer : net.layers()) {
        flat.insert(flat.end(), layer->w.data.begin(), layer->w.data.end());
        flat.insert(flat.end(), layer->bias.begin(), layer->bias.end());
    }
    return flat;
}

void scatter_params(DemoNet& net, std::span<const float> flat) {
    std::size_t at = 0;
    for (ConvLayer* layer : net.layers()) {
        for (float& v : layer->w.data) v = flat[at++];
        for (float& v : layer->bias) v = flat[at++];
    }
    if (at != flat.size()) throw ShapeMismatch("flat parameter vector has the wrong length");
}

std::vector<float> gather_grads(DemoNet& net) {
    std::vector<float> flat;
    for (ConvLayer* layer : net.layers()) {
        flat.insert(flat.end(), layer->grad_w.data.begin(), layer->grad_w.data.end());
        flat.insert(flat.end(), layer->grad_bias.begin(), layer->grad_bias.end());
    }
    return flat;
}

double train_step(DemoNet& net, const Tensor3Df& padded_noisy, const Tensor3Df& clean,
                  const Tensor3Df& mask, float bce_weight, int threads) {
    const DemoNet::Output out = net.forward(padded_noisy, threads);
    const LossResult mse = mse_loss(out.pred.data, clean.data);
    const LossResult bce = bce_with_logits(out.logits.data, mask.data);
    const double loss = mse.value + static_cast<double>(bce_weight) * bce.value;
    if (!std::isfinite(loss)) {
        throw NonFiniteLoss("loss diverged: mse=" + std::to_string(mse.value) +
                            " bce=" + std::to_string(bce.value));
    }

    Tensor3Df grad_pred(out.pred.n, out.pred.c, out.pred.w);
    grad_pred.data = mse.grad;
    Tensor3Df grad_logits(out.logits.n, out.logits.c, out.logits.w);
    for (std::size_t e = 0; e < grad_logits.data.size(); ++e) {
        grad_logits.data[e] = bce_weight * bce.grad[e];
    }
    net.backward(grad_pred, grad_logits, threads);
    return loss;
}

EvalResult evaluate(DemoNet& net, const Tensor3Df& padded_noisy, const Tensor3Df& clean,
                    const Tensor3Df& mask, float bce_weight, int threads) {
    const DemoNet::Output out = net.forward(padded_noisy, threads);
    const LossResult mse = mse_loss(out.pred.data, clean.data);
    const LossResult bce = bce_with_logits(out.logits.data, mask.data);
    EvalResult r;
    r.loss = mse.value + static_cast<double>(bce_weight) * bce.value;
    r.roc_auc = auroc(out.logits.data, mask.data);
    return r;
}

std::vector<EpochStats> train(const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.batch < 1 || cfg.width < 1 || cfg.segments < 2 || cfg.blocks < 0 ||
        cfg.threads < 1) {
        throw ConfigError("train config fields must be positive (and segments >= 2)");
    }
    if (cfg.lr < 0.0f) throw ConfigError("negative learning rate");
    const idx_t receptive = cfg.dilation * (cfg.taps - 1);
    if (cfg.pad * 2 != receptive) {
        throw ConfigError("pad must equal d*(S-1)/2 = " + std::to_string(receptive / 2) +
                          ", got " + std::to_string(cfg.pad));
    }

    const idx_t hidden = cfg.precision == Precision::Bf16 ? 16 : 15;
    DemoNet net(cfg.blocks, hidden, cfg.taps, cfg.dilation, cfg.precision, cfg.seed);

    const SyntheticDataset ds = generate_synthetic_dataset(cfg.seed, cfg.segments, cfg.width);
    const Tensor3Df padded = zero_pad_width(ds.noisy, cfg.pad, cfg.pad);

    const idx_t val_count = std::max<idx_t>(1, cfg.segments / 10);
    const idx_t train_count = cfg.segments - val_count;

    const Tensor3Df val_noisy = batch_slice(padded, train_count, cfg.segments);
    const Tensor3Df val_clean = batch_slice(ds.clean, train_count, cfg.segments);
    const Tensor3Df val_mask = batch_slice(ds.mask, train_count, cfg.segments);

    std::vector<EpochStats> stats;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        idx_t seen = 0;
        for (idx_t begin = 0; begin < train_count; begin += cfg.batch) {
            const idx_t end = std::min(train_count, begin + cfg.batch);
            const Tensor3Df bx = batch_slice(padded, begin, end);
            const Tensor3Df by = batch_slice(ds.clean, begin, end);
            const Tensor3Df bm = batch_slice(ds.mask, begin, end);
            const double loss = train_step(net, bx, by, bm, cfg.bce_weight, cfg.threads);
            if (cfg.lr > 0.0f) net.step(cfg.lr);
            loss_sum += loss * static_cast<double>(end - begin);
            seen += end - begin;
        }

        const EvalResult val = evaluate(net, val_noisy, val_clean, val_mask, cfg.bce_weight,
                                        cfg.threads);
        EpochStats s;
        s.epoch = epoch;
        s.train_loss = loss_sum / static_cast<double>(seen);
        s.val_loss = val.loss;
        s.val_auroc = val.roc_auc;
        stats.push_back(s);
    }

    if (!cfg.curve_path.empty()) {
        std::string out = "epoch,train_loss,val_loss,val_auroc\n";
        for (const EpochStats& s : stats) {
            out += std::to_string(s.epoch);
            out += ',';
            append_double(out, s.train_loss);
            out += ',';
            append_double(out, s.val_loss);
            out += ',';
            append_double(out, s.val_auroc);
            out += '\n';
        }
        std::ofstream file(cfg.curve_path, std::ios::binary);
        if (!file || !(file << out)) throw IoError("cannot write loss curve to " + cfg.curve_path);
    }
    return stats;
}

} // namespace conv1d
