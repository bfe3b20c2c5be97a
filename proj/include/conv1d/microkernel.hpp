#pragma once

#include <span>

#include "conv1d/bf16.hpp"
#include "conv1d/errors.hpp"
#include "conv1d/tensor.hpp"

namespace conv1d {

// Non-owning view of a row-major matrix block inside a larger buffer.
// ld is the row stride in elements; blocks may overlap within the host.
struct ConstMatrixRef {
    const float* data = nullptr;
    idx_t rows = 0, cols = 0, ld = 0;
};

struct MatrixRef {
    float* data = nullptr;
    idx_t rows = 0, cols = 0, ld = 0;

    operator ConstMatrixRef() const { return {data, rows, cols, ld}; }
};

struct Bf16MatrixRef {
    const Bf16* data = nullptr;
    idx_t rows = 0, cols = 0, ld = 0;
};

// One batch-reduce GEMM invocation:
//   c <- beta*c + alpha * sum_i a_blocks[i] * b_blocks[i]
// with the block list summed in ascending i order. Every a block is m x k,
// every b block k x n, c is m x n; c must not alias any input block.
struct BrgemmCall {
    idx_t m = 0, n = 0, k = 0;
    std::span<const ConstMatrixRef> a_blocks;
    std::span<const ConstMatrixRef> b_blocks;
    MatrixRef c;
    float alpha = 1.0f;
    float beta = 0.0f;
};

// Same contract with BF16 a/b storage; accumulation stays in FP32 and the
// reduction dimension must be even (channel-pair constraint).
struct Bf16BrgemmCall {
    idx_t m = 0, n = 0, k = 0;
    std::span<const Bf16MatrixRef> a_blocks;
    std::span<const Bf16MatrixRef> b_blocks;
    MatrixRef c;
    float alpha = 1.0f;
    float beta = 0.0f;
};

// c <- beta*c + alpha*a*b. Per output element the products are accumulated
// one at a time in ascending k order, in FP32, so a brgemm is bit-identical
// to scaling c by beta and looping gemm(alpha, beta=1) over the blocks.
void gemm(ConstMatrixRef a, ConstMatrixRef b, MatrixRef c, float alpha, float beta);

void brgemm(const BrgemmCall& call);
void brgemm_bf16(const Bf16BrgemmCall& call);

} // namespace conv1d
