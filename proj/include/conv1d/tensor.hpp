#pragma once

#include <cstdint>
#include <vector>

#include "conv1d/bf16.hpp"
#include "conv1d/errors.hpp"

namespace conv1d {

using idx_t = std::int64_t;

// Dense rank-3 tensor (batch, channels, width), row-major with the width
// axis contiguous. Element (i, j, x) lives at flat index (i*c + j)*w + x.
template <typename T>
struct Tensor3D {
    idx_t n = 0, c = 0, w = 0;
    std::vector<T> data;

    Tensor3D() = default;
    Tensor3D(idx_t n_, idx_t c_, idx_t w_)
        : n(n_), c(c_), w(w_), data(static_cast<std::size_t>(n_ * c_ * w_)) {}

    idx_t size() const { return n * c * w; }

    T& at(idx_t i, idx_t j, idx_t x) { return data[static_cast<std::size_t>((i * c + j) * w + x)]; }
    const T& at(idx_t i, idx_t j, idx_t x) const {
        return data[static_cast<std::size_t>((i * c + j) * w + x)];
    }

    // Pointer to the contiguous (channels x width) slab of one batch item.
    T* item(idx_t i) { return data.data() + i * c * w; }
    const T* item(idx_t i) const { return data.data() + i * c * w; }

    bool same_shape(const Tensor3D& o) const { return n == o.n && c == o.c && w == o.w; }
};

using Tensor3Df = Tensor3D<float>;
using Tensor3Db = Tensor3D<Bf16>;

// Filter tensor in its natural (filters, channels, taps) order.
struct WeightKCS {
    idx_t k = 0, c = 0, s = 0;
    std::vector<float> data;

    WeightKCS() = default;
    WeightKCS(idx_t k_, idx_t c_, idx_t s_)
        : k(k_), c(c_), s(s_), data(static_cast<std::size_t>(k_ * c_ * s_)) {}

    idx_t size() const { return k * c * s; }

    float& at(idx_t a, idx_t b, idx_t t) { return data[static_cast<std::size_t>((a * c + b) * s + t)]; }
    const float& at(idx_t a, idx_t b, idx_t t) const {
        return data[static_cast<std::size_t>((a * c + b) * s + t)];
    }
};

enum class WeightLayout {
    ForwardSKC,  // slice s is the K x C matrix of tap s
    BackwardSCK, // slice s is the C x K matrix of tap S-1-s (tap axis reversed)
};

// Filter tensor repacked so that each tap slice is one contiguous GEMM
// operand. The backward layout transposes each slice to C x K and reverses
// the tap order: the backward-data pass pairs its block at offset
// pos - (S-1-s)*d with original tap S-1-s, so slot s must hold that tap.
struct PackedWeights {
    WeightLayout layout = WeightLayout::ForwardSKC;
    idx_t s = 0, k = 0, c = 0;
    std::vector<float> data;

    idx_t slice_elems() const { return k * c; }
    const float* slice(idx_t t) const { return data.data() + t * slice_elems(); }
    float* slice(idx_t t) { return data.data() + t * slice_elems(); }
};

PackedWeights pack_weights_forward(const WeightKCS& w);
PackedWeights pack_weights_backward(const WeightKCS& w);

// Inverse of either packing; used to validate layout round-trips.
WeightKCS unpack_weights(const PackedWeights& p);

template <typename T>
Tensor3D<T> zero_pad_width(const Tensor3D<T>& t, idx_t left, idx_t right);

// Per-side pad that keeps the output width equal to the unpadded input
// width: P = d*(S-1)/2. Throws ShapeMismatch when d*(S-1) is odd and no
// symmetric pad exists.
idx_t same_pad_width(idx_t taps, idx_t dilation);

// Channel pairs interleaved along the width axis, the layout a paired
// dot-product unit consumes: element (i, p, x, lane) at flat index
// ((i*c2 + p)*w + x)*2 + lane for lane in {0, 1}. Requires even channels.
struct Bf16PairPacked {
    idx_t n = 0, c2 = 0, w = 0;
    std::vector<Bf16> data;
};

Bf16PairPacked pack_bf16_pairs(const Tensor3Db& t);
Tensor3Db unpack_bf16_pairs(const Bf16PairPacked& p);

Tensor3Db round_to_bf16(const Tensor3Df& t);
Tensor3Df to_fp32(const Tensor3Db& t);

} // namespace conv1d
