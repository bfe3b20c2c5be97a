#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "conv1d/conv.hpp"
#include "conv1d/tensor.hpp"

namespace conv1d {

// Synthetic denoising task: clean tracks are sums of random Gaussian bumps,
// the peak mask marks where the clean signal exceeds 0.5, and the noisy
// input adds Gaussian noise. All three tensors are (count, 1, width).
struct SyntheticDataset {
    Tensor3Df noisy;
    Tensor3Df clean;
    Tensor3Df mask;
};

// Deterministic for a given seed. Requires width >= 256.
SyntheticDataset generate_synthetic_dataset(std::uint64_t seed, idx_t count, idx_t width);

void relu_forward(std::span<const float> x, std::span<float> y);

// Gradient convention: positions with x > 0 pass the gradient, x <= 0
// blocks it (a tie at exactly 0 passes nothing).
void relu_backward(std::span<const float> grad_y, std::span<const float> x,
                   std::span<float> grad_x);

struct LossResult {
    double value = 0.0;
    std::vector<float> grad;
};

// mean((pred - target)^2); grad = 2*(pred - target)/count.
LossResult mse_loss(std::span<const float> pred, std::span<const float> target);

// mean(softplus(logit) - mask*logit), evaluated in the stable branch form;
// grad = (sigmoid(logit) - mask)/count.
LossResult bce_with_logits(std::span<const float> logits, std::span<const float> mask);

// p <- p - lr*g. lr must be positive; a zero learning rate means the caller
// wants no update and should simply not call this.
void sgd_step(std::span<float> params, std::span<const float> grads, float lr);

// Area under the ROC curve by the rank statistic, ties averaged. labels are
// 0/1; returns NaN when only one class is present.
double auroc(std::span<const float> scores, std::span<const float> labels);

// One convolution layer with bias, optional ReLU and optional residual
// skip. pad is the internal symmetric zero pad applied before the conv;
// layers fed pre-padded input (the network's first layer) use pad = 0.
// forward() caches what backward() needs; backward() fills grad_w and
// grad_bias and returns the gradient with respect to the layer input.
struct ConvLayer {
    ConvParams p;
    idx_t pad = 0;
    bool relu = false;
    bool residual = false;

    WeightKCS w;
    std::vector<float> bias;
    WeightKCS grad_w;
    std::vector<float> grad_bias;

    Tensor3Df x_padded; // conv input including pad, cached by forward
    Tensor3Df pre;      // conv output + bias before ReLU, cached by forward

    Tensor3Df forward(const Tensor3Df& x, int threads);
    Tensor3Df backward(const Tensor3Df& grad_out, int threads);
    void step(float lr);
};

// Denoiser body: one valid conv lifting 1 channel to the hidden width
// (consuming the dataset pad), a chain of residual hidden->hidden blocks
// with internal same-pad, then two 1-tap heads producing the regression
// track and the peak logits. In BF16 mode only layers with even channel
// and filter counts run in BF16; the 1-channel entry and 1-filter heads
// stay FP32.
struct DemoNet {
    ConvLayer input;
    std::vector<ConvLayer> blocks;
    ConvLayer reg_head;
    ConvLayer peak_head;

    DemoNet(int block_count, idx_t hidden, idx_t taps, idx_t dilation, Precision precision,
            std::uint64_t seed);

    idx_t pad() const { return input.p.dilation * (input.p.taps - 1) / 2; }
    std::vector<ConvLayer*> layers();

    struct Output {
        Tensor3Df pred;
        Tensor3Df logits;
    };
    Output forward(const Tensor3Df& padded_noisy, int threads);
    void backward(const Tensor3Df& grad_pred, const Tensor3Df& grad_logits, int threads);
    void step(float lr);
};

// Flattened views over every weight and bias, in layer order; used by the
// optimizer-free gradient checks.
std::vector<float> gather_params(DemoNet& net);
void scatter_params(DemoNet& net, std::span<const float> flat);
std::vector<float> gather_grads(DemoNet& net);

// Forward, combined loss (mse + bce_weight*bce), and full backward; leaves
// the per-layer gradients populated. Throws NonFiniteLoss if the loss is
// NaN or infinite.
double train_step(DemoNet& net, const Tensor3Df& padded_noisy, const Tensor3Df& clean,
                  const Tensor3Df& mask, float bce_weight, int threads);

struct EvalResult {
    double loss = 0.0;
    double roc_auc = 0.0;
};

// Forward-only combined loss and peak-head AUROC over a dataset slice.
EvalResult evaluate(DemoNet& net, const Tensor3Df& padded_noisy, const Tensor3Df& clean,
                    const Tensor3Df& mask, float bce_weight, int threads);

struct TrainConfig {
    int epochs = 25;
    idx_t batch = 16;
    float lr = 0.05f;
    std::uint64_t seed = 1;
    idx_t width = 4096;   // unpadded segment width
    idx_t segments = 256;
    idx_t pad = 200;      // per side; must equal d*(S-1)/2 of the first layer
    idx_t taps = 51;
    idx_t dilation = 8;
    int blocks = 4;
    Precision precision = Precision::Fp32;
    float bce_weight = 1.0f;
    int threads = 1;
    std::string curve_path; // when set, per-epoch CSV is written here
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_auroc = 0.0;
};

// Full training run on the synthetic task: generate data, hold out the
// last 10% of segments for validation, loop epochs of batched SGD, record
// per-epoch stats (and the CSV curve when configured). Deterministic for a
// fixed seed at threads = 1.
std::vector<EpochStats> train(const TrainConfig& cfg);

} // namespace conv1d
