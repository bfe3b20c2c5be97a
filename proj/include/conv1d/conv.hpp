#pragma once

#include <cstdint>

#include "conv1d/microkernel.hpp"
#include "conv1d/tensor.hpp"

namespace conv1d {

enum class Precision { Fp32, Bf16 };

// 1D dilated convolution hyperparameters. dilation is the element stride
// between consecutive filter taps; block_w the width-tile edge for cache
// blocking. The BF16 path additionally requires channels, filters, the
// tensor widths, and block_w to be even.
struct ConvParams {
    idx_t channels = 1;
    idx_t filters = 1;
    idx_t taps = 1;
    idx_t dilation = 1;
    Precision precision = Precision::Fp32;
    idx_t block_w = 64;
};

struct ConvShapes {
    idx_t q = 0;        // output width
    idx_t w_padded = 0; // pre-padded input width, == q + receptive
    idx_t receptive = 0; // d*(S-1)
};

// Q = w_padded - d*(S-1) under valid semantics; throws TooNarrow when the
// padded input cannot produce a single output column.
idx_t output_width(const ConvParams& p, idx_t w_padded);
ConvShapes conv_shapes(const ConvParams& p, idx_t w_padded);

// 2 FLOPs (multiply + add) per filter-tap contribution.
std::int64_t conv_flops(const ConvParams& p, idx_t batch, idx_t q);

// Forward pass: Out(n,k,q) = sum_c sum_s In(n,c,q+d*s) * Weight(k,c,s).
// One BRGEMM of l_br = S blocks per width tile, beta = 0; the caller
// pre-pads the input. Parallel over the batch dimension.
Tensor3Df conv1d_forward(const Tensor3Df& in, const PackedWeights& w, const ConvParams& p,
                         int threads = 1);

// Backward data pass: Grad_d(n,c,x) = sum_k sum_s Grad_out(n,k,x-d*s) * Weight(k,c,s)
// with out-of-range gradient terms zero. Internally zero-pads grad_out by
// d*(S-1) per side, after which the tile loop is the forward loop with the
// tap-reversed (S,C,K) weights. Output width is q + d*(S-1).
Tensor3Df conv1d_backward_data(const Tensor3Df& grad_out, const PackedWeights& w,
                               const ConvParams& p, int threads = 1);

// Backward weight pass: Grad_w(k,c,s) = sum_n sum_q In(n,c,q+d*s) * Grad_out(n,k,q),
// computed per width tile and tap as an accumulating small GEMM against the
// transposed gradient tile. Per-batch partials are reduced in ascending
// batch order so results are bitwise identical for any thread count.
WeightKCS conv1d_backward_weight(const Tensor3Df& grad_out, const Tensor3Df& in,
                                 const ConvParams& p, int threads = 1);

} // namespace conv1d
