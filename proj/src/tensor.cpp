#include "conv1d/tensor.hpp"

namespace conv1d {

PackedWeights pack_weights_forward(const WeightKCS& w) {
    PackedWeights p;
    p.layout = WeightLayout::ForwardSKC;
    p.s = w.s;
    p.k = w.k;
    p.c = w.c;
    p.data.resize(static_cast<std::size_t>(w.size()));
    for (idx_t t = 0; t < w.s; ++t) {
        float* slice = p.slice(t);
        for (idx_t a = 0; a < w.k; ++a) {
            for (idx_t b = 0; b < w.c; ++b) {
                slice[a * w.c + b] = w.at(a, b, t);
            }
        }
    }
    return p;
}

PackedWeights pack_weights_backward(const WeightKCS& w) {
    PackedWeights p;
    p.layout = WeightLayout::BackwardSCK;
    p.s = w.s;
    p.k = w.k;
    p.c = w.c;
    p.data.resize(static_cast<std::size_t>(w.size()));
    for (idx_t t = 0; t < w.s; ++t) {
        float* slice = p.slice(t);
        // slot t holds original tap S-1-t, transposed to C x K
        const idx_t src_tap = w.s - 1 - t;
        for (idx_t b = 0; b < w.c; ++b) {
            for (idx_t a = 0; a < w.k; ++a) {
                slice[b * w.k + a] = w.at(a, b, src_tap);
            }
        }
    }
    return p;
}

WeightKCS unpack_weights(const PackedWeights& p) {
    WeightKCS w(p.k, p.c, p.s);
    for (idx_t t = 0; t < p.s; ++t) {
        const float* slice = p.slice(t);
        for (idx_t a = 0; a < p.k; ++a) {
            for (idx_t b = 0; b < p.c; ++b) {
                if (p.layout == WeightLayout::ForwardSKC) {
                    w.at(a, b, t) = slice[a * p.c + b];
                } else {
                    w.at(a, b, p.s - 1 - t) = slice[b * p.k + a];
                }
            }
        }
    }
    return w;
}

template <typename T>
Tensor3D<T> zero_pad_width(const Tensor3D<T>& t, idx_t left, idx_t right) {
    Tensor3D<T> out(t.n, t.c, t.w + left + right);
    for (idx_t i = 0; i < t.n; ++i) {
        for (idx_t j = 0; j < t.c; ++j) {
            const T* src = &t.at(i, j, 0);
            T* dst = &out.at(i, j, 0) + left;
            for (idx_t x = 0; x < t.w; ++x) dst[x] = src[x];
        }
    }
    return out;
}

template Tensor3D<float> zero_pad_width(const Tensor3D<float>&, idx_t, idx_t);
template Tensor3D<Bf16> zero_pad_width(const Tensor3D<Bf16>&, idx_t, idx_t);

idx_t same_pad_width(idx_t taps, idx_t dilation) {
    const idx_t receptive = dilation * (taps - 1);
    if (receptive % 2 != 0) {
        throw ShapeMismatch("same padding needs even d*(S-1), got " + std::to_string(receptive));
    }
    return receptive / 2;
}

Bf16PairPacked pack_bf16_pairs(const Tensor3Db& t) {
    if (t.c % 2 != 0) {
        throw OddChannels("channel-pair packing needs an even channel count, got " +
                          std::to_string(t.c));
    }
    Bf16PairPacked p;
    p.n = t.n;
    p.c2 = t.c / 2;
    p.w = t.w;
    p.data.resize(static_cast<std::size_t>(t.size()));
    for (idx_t i = 0; i < t.n; ++i) {
        for (idx_t pr = 0; pr < p.c2; ++pr) {
            for (idx_t x = 0; x < t.w; ++x) {
                const idx_t base = ((i * p.c2 + pr) * p.w + x) * 2;
                p.data[static_cast<std::size_t>(base)] = t.at(i, 2 * pr, x);
                p.data[static_cast<std::size_t>(base + 1)] = t.at(i, 2 * pr + 1, x);
            }
        }
    }
    return p;
}

Tensor3Db unpack_bf16_pairs(const Bf16PairPacked& p) {
    Tensor3Db t(p.n, p.c2 * 2, p.w);
    for (idx_t i = 0; i < p.n; ++i) {
        for (idx_t pr = 0; pr < p.c2; ++pr) {
            for (idx_t x = 0; x < p.w; ++x) {
                const idx_t base = ((i * p.c2 + pr) * p.w + x) * 2;
                t.at(i, 2 * pr, x) = p.data[static_cast<std::size_t>(base)];
                t.at(i, 2 * pr + 1, x) = p.data[static_cast<std::size_t>(base + 1)];
            }
        }
    }
    return t;
}

Tensor3Db round_to_bf16(const Tensor3Df& t) {
    Tensor3Db out(t.n, t.c, t.w);
    for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = fp32_to_bf16(t.data[i]);
    return out;
}

Tensor3Df to_fp32(const Tensor3Db& t) {
    Tensor3Df out(t.n, t.c, t.w);
    for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = bf16_to_fp32(t.data[i]);
    return out;
}

} // namespace conv1d
