#include "conv1d/conv.hpp"

#include <algorithm>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace conv1d {

namespace {

// Batch items are split into contiguous ranges, one worker per range.
// Items never share output, so the partition does not affect results.
void parallel_for_items(idx_t count, int threads, const std::function<void(idx_t)>& fn) {
    const idx_t workers = std::clamp<idx_t>(threads, 1, count > 0 ? count : 1);
    if (workers <= 1) {
        for (idx_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (idx_t t = 0; t < workers; ++t) {
        const idx_t begin = count * t / workers;
        const idx_t end = count * (t + 1) / workers;
        pool.emplace_back([&fn, begin, end] {
            for (idx_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

void validate_params(const ConvParams& p) {
    if (p.channels < 1 || p.filters < 1 || p.taps < 1 || p.dilation < 1 || p.block_w < 1) {
        throw ShapeMismatch("conv params must be positive: C=" + std::to_string(p.channels) +
                            " K=" + std::to_string(p.filters) + " S=" + std::to_string(p.taps) +
                            " d=" + std::to_string(p.dilation) +
                            " block_w=" + std::to_string(p.block_w));
    }
    if (p.precision == Precision::Bf16) {
        if (p.channels % 2 != 0 || p.filters % 2 != 0) {
            throw OddDims("bf16 conv needs even channels and filters, got C=" +
                          std::to_string(p.channels) + " K=" + std::to_string(p.filters));
        }
        if (p.block_w % 2 != 0) {
            throw OddDims("bf16 conv needs an even width tile, got " + std::to_string(p.block_w));
        }
    }
}

void check_bf16_widths(const ConvParams& p, idx_t w_in, idx_t q) {
    if (p.precision != Precision::Bf16) return;
    if (w_in % 2 != 0 || q % 2 != 0) {
        throw OddDims("bf16 conv needs even tensor widths, got input " + std::to_string(w_in) +
                      ", output " + std::to_string(q));
    }
}

void check_packed(const PackedWeights& w, const ConvParams& p, WeightLayout want) {
    if (w.layout != want) throw ShapeMismatch("packed weights have the wrong layout for this pass");
    if (w.c != p.channels || w.k != p.filters || w.s != p.taps) {
        throw ShapeMismatch("packed weights are S=" + std::to_string(w.s) + " K=" +
                            std::to_string(w.k) + " C=" + std::to_string(w.c) +
                            ", conv params say S=" + std::to_string(p.taps) + " K=" +
                            std::to_string(p.filters) + " C=" + std::to_string(p.channels));
    }
}

std::vector<Bf16> round_span(const float* data, idx_t count) {
    std::vector<Bf16> out(static_cast<std::size_t>(count));
    for (idx_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fp32_to_bf16(data[i]);
    return out;
}

// Shared tile loop for forward and (padded) backward data. The A slices are
// the packed weight matrices, the B blocks sit at column pos + s*d of the
// source slab, and each tile is one BRGEMM with l_br = S and beta = 0.
template <typename Elem>
struct TileArgs {
    const Elem* src;    // one batch item, rows x src_w
    idx_t src_rows, src_w;
    float* dst;         // out_rows x out_w
    idx_t out_rows, out_w;
};

void run_tiles_fp32(const TileArgs<float>& t, const PackedWeights& w, const ConvParams& p) {
    const idx_t s_taps = p.taps;
    std::vector<ConstMatrixRef> a(static_cast<std::size_t>(s_taps)),
        b(static_cast<std::size_t>(s_taps));
    for (idx_t s = 0; s < s_taps; ++s) {
        a[static_cast<std::size_t>(s)] = {w.slice(s), t.out_rows, t.src_rows, t.src_rows};
    }
    for (idx_t pos = 0; pos < t.out_w; pos += p.block_w) {
        const idx_t tile = std::min(p.block_w, t.out_w - pos);
        for (idx_t s = 0; s < s_taps; ++s) {
            b[static_cast<std::size_t>(s)] = {t.src + pos + s * p.dilation, t.src_rows, tile,
                                              t.src_w};
        }
        BrgemmCall call;
        call.m = t.out_rows;
        call.n = tile;
        call.k = t.src_rows;
        call.a_blocks = a;
        call.b_blocks = b;
        call.c = {t.dst + pos, t.out_rows, tile, t.out_w};
        call.alpha = 1.0f;
        call.beta = 0.0f;
        brgemm(call);
    }
}

void run_tiles_bf16(const TileArgs<Bf16>& t, const std::vector<Bf16>& w_slices, idx_t slice_elems,
                    const ConvParams& p) {
    const idx_t s_taps = p.taps;
    std::vector<Bf16MatrixRef> a(static_cast<std::size_t>(s_taps)),
        b(static_cast<std::size_t>(s_taps));
    for (idx_t s = 0; s < s_taps; ++s) {
        a[static_cast<std::size_t>(s)] = {w_slices.data() + s * slice_elems, t.out_rows, t.src_rows,
                                          t.src_rows};
    }
    for (idx_t pos = 0; pos < t.out_w; pos += p.block_w) {
        const idx_t tile = std::min(p.block_w, t.out_w - pos);
        for (idx_t s = 0; s < s_taps; ++s) {
            b[static_cast<std::size_t>(s)] = {t.src + pos + s * p.dilation, t.src_rows, tile,
                                              t.src_w};
        }
        Bf16BrgemmCall call;
        call.m = t.out_rows;
        call.n = tile;
        call.k = t.src_rows;
        call.a_blocks = a;
        call.b_blocks = b;
        call.c = {t.dst + pos, t.out_rows, tile, t.out_w};
        call.alpha = 1.0f;
        call.beta = 0.0f;
        brgemm_bf16(call);
    }
}

} // namespace

idx_t output_width(const ConvParams& p, idx_t w_padded) {
    validate_params(p);
    const idx_t receptive = p.dilation * (p.taps - 1);
    if (w_padded <= receptive) {
        throw TooNarrow("padded width " + std::to_string(w_padded) +
                        " does not cover the receptive field d*(S-1) = " +
                        std::to_string(receptive));
    }
    return w_padded - receptive;
}

ConvShapes conv_shapes(const ConvParams& p, idx_t w_padded) {
    ConvShapes s;
    s.receptive = p.dilation * (p.taps - 1);
    s.q = output_width(p, w_padded);
    s.w_padded = w_padded;
    return s;
}

std::int64_t conv_flops(const ConvParams& p, idx_t batch, idx_t q) {
    return std::int64_t{2} * batch * p.filters * p.channels * p.taps * q;
}

Tensor3Df conv1d_forward(const Tensor3Df& in, const PackedWeights& w, const ConvParams& p,
                         int threads) {
    check_packed(w, p, WeightLayout::ForwardSKC);
    if (in.c != p.channels) {
        throw ShapeMismatch("input has " + std::to_string(in.c) + " channels, conv expects " +
                            std::to_string(p.channels));
    }
    const ConvShapes shapes = conv_shapes(p, in.w);
    check_bf16_widths(p, in.w, shapes.q);

    Tensor3Df out(in.n, p.filters, shapes.q);
    if (p.precision == Precision::Fp32) {
        parallel_for_items(in.n, threads, [&](idx_t i) {
            TileArgs<float> t{in.item(i), p.channels, in.w, out.item(i), p.filters, shapes.q};
            run_tiles_fp32(t, w, p);
        });
    } else {
        const std::vector<Bf16> in_b = round_span(in.data.data(), in.size());
        const std::vector<Bf16> w_b = round_span(w.data.data(), static_cast<idx_t>(w.data.size()));
        parallel_for_items(in.n, threads, [&](idx_t i) {
            TileArgs<Bf16> t{in_b.data() + i * in.c * in.w, p.channels, in.w, out.item(i),
                             p.filters, shapes.q};
            run_tiles_bf16(t, w_b, w.slice_elems(), p);
        });
    }
    return out;
}

Tensor3Df conv1d_backward_data(const Tensor3Df& grad_out, const PackedWeights& w,
                               const ConvParams& p, int threads) {
    check_packed(w, p, WeightLayout::BackwardSCK);
    if (grad_out.c != p.filters) {
        throw ShapeMismatch("grad_out has " + std::to_string(grad_out.c) +
                            " channels, conv has K=" + std::to_string(p.filters));
    }
    validate_params(p);
    const idx_t receptive = p.dilation * (p.taps - 1);
    const idx_t q = grad_out.w;
    const idx_t w_out = q + receptive; // padded input width of the forward pass
    check_bf16_widths(p, w_out, q);

    // Working copy padded by the full receptive field per side; afterwards
    // the block at pos - (S-1-s)*d sits at padded column pos + s*d.
    const Tensor3Df padded = zero_pad_width(grad_out, receptive, receptive);

    Tensor3Df grad_d(grad_out.n, p.channels, w_out);
    if (p.precision == Precision::Fp32) {
        parallel_for_items(grad_out.n, threads, [&](idx_t i) {
            TileArgs<float> t{padded.item(i), p.filters, padded.w, grad_d.item(i), p.channels,
                              w_out};
            run_tiles_fp32(t, w, p);
        });
    } else {
        const std::vector<Bf16> go_b = round_span(padded.data.data(), padded.size());
        const std::vector<Bf16> w_b = round_span(w.data.data(), static_cast<idx_t>(w.data.size()));
        parallel_for_items(grad_out.n, threads, [&](idx_t i) {
            TileArgs<Bf16> t{go_b.data() + i * padded.c * padded.w, p.filters, padded.w,
                             grad_d.item(i), p.channels, w_out};
            run_tiles_bf16(t, w_b, w.slice_elems(), p);
        });
    }
    return grad_d;
}

WeightKCS conv1d_backward_weight(const Tensor3Df& grad_out, const Tensor3Df& in,
                                 const ConvParams& p, int threads) {
    validate_params(p);
    if (in.n != grad_out.n) throw ShapeMismatch("batch sizes differ between input and grad_out");
    if (in.c != p.channels || grad_out.c != p.filters) {
        throw ShapeMismatch("channel counts do not match conv params");
    }
    const idx_t q = grad_out.w;
    const idx_t receptive = p.dilation * (p.taps - 1);
    if (in.w != q + receptive) {
        throw ShapeMismatch("input width " + std::to_string(in.w) + " != Q + d*(S-1) = " +
                            std::to_string(q + receptive));
    }
    check_bf16_widths(p, in.w, q);

    const idx_t slice = p.channels * p.filters;
    const bool bf16 = p.precision == Precision::Bf16;
    std::vector<Bf16> in_b, go_b;
    if (bf16) {
        in_b = round_span(in.data.data(), in.size());
        go_b = round_span(grad_out.data.data(), grad_out.size());
    }

    // One private (S, C, K) accumulator per batch item; the final reduction
    // walks items in ascending order, which keeps the result independent of
    // the thread partition.
    std::vector<float> partials(static_cast<std::size_t>(in.n * p.taps * slice), 0.0f);

    parallel_for_items(in.n, threads, [&](idx_t item) {
        float* gw = partials.data() + item * p.taps * slice;
        if (!bf16) {
            const float* in_i = in.item(item);
            const float* go_i = grad_out.item(item);
            std::vector<float> got_t(static_cast<std::size_t>(p.block_w * p.filters));
            for (idx_t pos = 0; pos < q; pos += p.block_w) {
                const idx_t tile = std::min(p.block_w, q - pos);
                for (idx_t kk = 0; kk < p.filters; ++kk) {
                    for (idx_t j = 0; j < tile; ++j) {
                        got_t[static_cast<std::size_t>(j * p.filters + kk)] =
                            go_i[kk * q + pos + j];
                    }
                }
                for (idx_t s = 0; s < p.taps; ++s) {
                    const ConstMatrixRef a{in_i + pos + s * p.dilation, p.channels, tile, in.w};
                    const ConstMatrixRef b{got_t.data(), tile, p.filters, p.filters};
                    const MatrixRef c{gw + s * slice, p.channels, p.filters, p.filters};
                    gemm(a, b, c, 1.0f, 1.0f);
                }
            }
        } else {
            const Bf16* in_i = in_b.data() + item * in.c * in.w;
            const Bf16* go_i = go_b.data() + item * grad_out.c * q;
            std::vector<Bf16> got_t(static_cast<std::size_t>(p.block_w * p.filters));
            for (idx_t pos = 0; pos < q; pos += p.block_w) {
                const idx_t tile = std::min(p.block_w, q - pos);
                for (idx_t kk = 0; kk < p.filters; ++kk) {
                    for (idx_t j = 0; j < tile; ++j) {
                        got_t[static_cast<std::size_t>(j * p.filters + kk)] =
                            go_i[kk * q + pos + j];
                    }
                }
                for (idx_t s = 0; s < p.taps; ++s) {
                    const Bf16MatrixRef a{in_i + pos + s * p.dilation, p.channels, tile, in.w};
                    const Bf16MatrixRef b{got_t.data(), tile, p.filters, p.filters};
                    Bf16BrgemmCall call;
                    call.m = p.channels;
                    call.n = p.filters;
                    call.k = tile;
                    call.a_blocks = {&a, 1};
                    call.b_blocks = {&b, 1};
                    call.c = {gw + s * slice, p.channels, p.filters, p.filters};
                    call.alpha = 1.0f;
                    call.beta = 1.0f;
                    brgemm_bf16(call);
                }
            }
        }
    });

    // Ascending-batch reduction of the (S, C, K) partials, then back to the
    // natural (K, C, S) order.
    std::vector<float> total(static_cast<std::size_t>(p.taps * slice), 0.0f);
    for (idx_t item = 0; item < in.n; ++item) {
        const float* gw = partials.data() + item * p.taps * slice;
        for (idx_t e = 0; e < p.taps * slice; ++e) total[static_cast<std::size_t>(e)] += gw[e];
    }

    WeightKCS grad(p.filters, p.channels, p.taps);
    for (idx_t s = 0; s < p.taps; ++s) {
        const float* sck = total.data() + s * slice;
        for (idx_t cc = 0; cc < p.channels; ++cc) {
            for (idx_t kk = 0; kk < p.filters; ++kk) {
                grad.at(kk, cc, s) = sck[cc * p.filters + kk];
            }
        }
    }
    return grad;
}

} // namespace conv1d
