#include "conv1d/microkernel.hpp"

#include <algorithm>
#include <cstddef>
#include <string>
#include <type_traits>

namespace conv1d {

namespace {

// Tile edge for the register/cache-blocked hot path. Problems with
// m, n, k <= 64 run entirely out of the stack accumulator and L1; larger
// shapes fall through the same loop in 64-wide chunks.
constexpr idx_t kTile = 64;

void check_block(const char* what, idx_t rows, idx_t cols, idx_t ld, idx_t want_rows,
                 idx_t want_cols) {
    if (rows != want_rows || cols != want_cols) {
        throw ShapeMismatch(std::string(what) + " block is " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", expected " + std::to_string(want_rows) + "x" +
                            std::to_string(want_cols));
    }
    if (ld < cols) {
        throw ShapeMismatch(std::string(what) + " leading dimension " + std::to_string(ld) +
                            " < cols " + std::to_string(cols));
    }
}

// Shared inner kernel. Accumulation order per output element is fixed:
// beta*c first, then blocks in ascending list order, then k ascending,
// one product at a time in FP32. Both gemm and brgemm compile to this one
// function, which is what makes the brgemm == loop-of-gemm equivalence
// bit-exact. AccessA/AccessB adapt the element type (FP32 or BF16).
template <typename ABlock, float (*LoadElem)(const ABlock&, idx_t, idx_t)>
void brgemm_tiles(idx_t m, idx_t n, idx_t k, const ABlock* a_blocks, const ABlock* b_blocks,
                  std::size_t l_br, MatrixRef c, float alpha, float beta) {
    float acc[kTile][kTile];
    for (idx_t i0 = 0; i0 < m; i0 += kTile) {
        const idx_t mi = std::min(kTile, m - i0);
        for (idx_t j0 = 0; j0 < n; j0 += kTile) {
            const idx_t nj = std::min(kTile, n - j0);

            if (beta == 0.0f) {
                for (idx_t i = 0; i < mi; ++i) {
                    for (idx_t j = 0; j < nj; ++j) acc[i][j] = 0.0f;
                }
            } else {
                for (idx_t i = 0; i < mi; ++i) {
                    const float* crow = c.data + (i0 + i) * c.ld + j0;
                    for (idx_t j = 0; j < nj; ++j) acc[i][j] = beta * crow[j];
                }
            }

            for (std::size_t bi = 0; bi < l_br; ++bi) {
                const ABlock& a = a_blocks[bi];
                const ABlock& b = b_blocks[bi];
                for (idx_t i = 0; i < mi; ++i) {
                    float* arow = acc[i];
                    for (idx_t kk = 0; kk < k; ++kk) {
                        const float aik = alpha * LoadElem(a, i0 + i, kk);
                        if constexpr (std::is_same_v<ABlock, ConstMatrixRef>) {
                            const float* brow = b.data + kk * b.ld + j0;
                            for (idx_t j = 0; j < nj; ++j) arow[j] += aik * brow[j];
                        } else {
                            const Bf16* brow = b.data + kk * b.ld + j0;
                            for (idx_t j = 0; j < nj; ++j) arow[j] += aik * bf16_to_fp32(brow[j]);
                        }
                    }
                }
            }

            for (idx_t i = 0; i < mi; ++i) {
                float* crow = c.data + (i0 + i) * c.ld + j0;
                for (idx_t j = 0; j < nj; ++j) crow[j] = acc[i][j];
            }
        }
    }
}

float load_fp32(const ConstMatrixRef& m, idx_t i, idx_t j) { return m.data[i * m.ld + j]; }
float load_bf16(const Bf16MatrixRef& m, idx_t i, idx_t j) { return bf16_to_fp32(m.data[i * m.ld + j]); }

template <typename ABlock>
void validate_call(idx_t m, idx_t n, idx_t k, std::span<const ABlock> a_blocks,
                   std::span<const ABlock> b_blocks, const MatrixRef& c) {
    if (a_blocks.empty() || b_blocks.empty()) {
        throw EmptyBatch("brgemm needs at least one block pair");
    }
    if (a_blocks.size() != b_blocks.size()) {
        throw ShapeMismatch("brgemm a/b block lists differ in length");
    }
    for (const auto& a : a_blocks) check_block("A", a.rows, a.cols, a.ld, m, k);
    for (const auto& b : b_blocks) check_block("B", b.rows, b.cols, b.ld, k, n);
    check_block("C", c.rows, c.cols, c.ld, m, n);
}

} // namespace

void gemm(ConstMatrixRef a, ConstMatrixRef b, MatrixRef c, float alpha, float beta) {
    check_block("A", a.rows, a.cols, a.ld, a.rows, a.cols);
    check_block("B", b.rows, b.cols, b.ld, a.cols, b.cols);
    check_block("C", c.rows, c.cols, c.ld, a.rows, b.cols);
    brgemm_tiles<ConstMatrixRef, load_fp32>(a.rows, b.cols, a.cols, &a, &b, 1, c, alpha, beta);
}

void brgemm(const BrgemmCall& call) {
    validate_call(call.m, call.n, call.k, call.a_blocks, call.b_blocks, call.c);
    brgemm_tiles<ConstMatrixRef, load_fp32>(call.m, call.n, call.k, call.a_blocks.data(),
                                            call.b_blocks.data(), call.a_blocks.size(), call.c,
                                            call.alpha, call.beta);
}

void brgemm_bf16(const Bf16BrgemmCall& call) {
    if (call.k % 2 != 0) {
        throw OddReduction("bf16 brgemm needs an even reduction dimension, got " +
                           std::to_string(call.k));
    }
    validate_call(call.m, call.n, call.k, call.a_blocks, call.b_blocks, call.c);
    brgemm_tiles<Bf16MatrixRef, load_bf16>(call.m, call.n, call.k, call.a_blocks.data(),
                                           call.b_blocks.data(), call.a_blocks.size(), call.c,
                                           call.alpha, call.beta);
}

} // namespace conv1d
