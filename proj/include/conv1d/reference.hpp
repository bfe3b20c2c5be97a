#pragma once

#include <functional>
#include <span>

#include "conv1d/conv.hpp"
#include "conv1d/tensor.hpp"

namespace conv1d {

// Slow direct implementations of the convolution and its gradients. Index
// arithmetic here is written from the definition, on purpose sharing no
// helpers with the fast path, and all sums accumulate in double. These are
// the ground truth the blocked kernels are tested against.

// out(n, k, q) = sum_c sum_s in(n, c, q + d*s) * w(k, c, s)
// in is already padded; out width is in.w - d*(S-1).
Tensor3Df naive_forward(const Tensor3Df& in, const WeightKCS& w, const ConvParams& p);

// grad_in(n, c, x) = sum_k sum_s grad_out(n, k, x - d*s) * w(k, c, s)
// with out-of-range grad_out reads treated as zero. Output width is
// grad_out.w + d*(S-1), the padded input width of the forward pass.
Tensor3Df naive_backward_data(const Tensor3Df& grad_out, const WeightKCS& w, const ConvParams& p);

// grad_w(k, c, s) = sum_n sum_q in(n, c, q + d*s) * grad_out(n, k, q)
WeightKCS naive_backward_weight(const Tensor3Df& grad_out, const Tensor3Df& in,
                                const ConvParams& p);

// Central-difference gradient check. Each coordinate of params is nudged by
// +/- eps (using the actually realized FP32 step sizes), f is re-evaluated,
// and the quotient is compared against analytic_grad. Returns the worst
// relative discrepancy, where each coordinate's denominator is the largest
// of |fd|, |grad| and the global gradient magnitude, so near-zero entries
// do not blow up the ratio. params is restored before returning.
// Throws NonFinite if any evaluation of f is NaN or infinite.
double finite_diff_check(const std::function<double(std::span<const float>)>& f,
                         std::span<float> params, std::span<const float> analytic_grad, float eps);

// Worst |got - want| scaled by max(max|want|, 1). Plain per-element ratios
// are useless where the reference entry is a near-cancelled sum, so errors
// are judged against the magnitude of the reference tensor as a whole.
double norm_rel_error(std::span<const float> got, std::span<const float> want);

} // namespace conv1d
