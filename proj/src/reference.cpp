#include "conv1d/reference.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace conv1d {

namespace {

void check_filter(const WeightKCS& w, const ConvParams& p) {
    if (w.k != p.filters || w.c != p.channels || w.s != p.taps) {
        throw ShapeMismatch("filter tensor is K=" + std::to_string(w.k) + " C=" +
                            std::to_string(w.c) + " S=" + std::to_string(w.s) +
                            ", params say K=" + std::to_string(p.filters) + " C=" +
                            std::to_string(p.channels) + " S=" + std::to_string(p.taps));
    }
}

} // namespace

Tensor3Df naive_forward(const Tensor3Df& in, const WeightKCS& w, const ConvParams& p) {
    check_filter(w, p);
    if (in.c != p.channels) throw ShapeMismatch("input channel count does not match the filter");
    const idx_t d = p.dilation;
    const idx_t q = in.w - d * (p.taps - 1);
    if (q < 1) throw ShapeMismatch("input narrower than the dilated filter");

    Tensor3Df out(in.n, p.filters, q);
    for (idx_t n = 0; n < in.n; ++n) {
        for (idx_t k = 0; k < p.filters; ++k) {
            for (idx_t x = 0; x < q; ++x) {
                double acc = 0.0;
                for (idx_t c = 0; c < p.channels; ++c) {
                    for (idx_t s = 0; s < p.taps; ++s) {
                        acc += static_cast<double>(in.at(n, c, x + d * s)) *
                               static_cast<double>(w.at(k, c, s));
                    }
                }
                out.at(n, k, x) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Tensor3Df naive_backward_data(const Tensor3Df& grad_out, const WeightKCS& w, const ConvParams& p) {
    check_filter(w, p);
    if (grad_out.c != p.filters) throw ShapeMismatch("grad_out channel count != filter count");
    const idx_t d = p.dilation;
    const idx_t q = grad_out.w;
    const idx_t width = q + d * (p.taps - 1);

    Tensor3Df grad_in(grad_out.n, p.channels, width);
    for (idx_t n = 0; n < grad_out.n; ++n) {
        for (idx_t c = 0; c < p.channels; ++c) {
            for (idx_t x = 0; x < width; ++x) {
                double acc = 0.0;
                for (idx_t k = 0; k < p.filters; ++k) {
                    for (idx_t s = 0; s < p.taps; ++s) {
                        const idx_t src = x - d * s;
                        if (src < 0 || src >= q) continue;
                        acc += static_cast<double>(grad_out.at(n, k, src)) *
                               static_cast<double>(w.at(k, c, s));
                    }
                }
                grad_in.at(n, c, x) = static_cast<float>(acc);
            }
        }
    }
    return grad_in;
}

WeightKCS naive_backward_weight(const Tensor3Df& grad_out, const Tensor3Df& in,
                                const ConvParams& p) {
    if (in.n != grad_out.n) throw ShapeMismatch("batch sizes differ");
    if (in.c != p.channels || grad_out.c != p.filters) {
        throw ShapeMismatch("channel counts do not match the params");
    }
    const idx_t d = p.dilation;
    const idx_t q = grad_out.w;
    if (in.w != q + d * (p.taps - 1)) {
        throw ShapeMismatch("input width " + std::to_string(in.w) +
                            " inconsistent with grad_out width " + std::to_string(q));
    }

    WeightKCS grad(p.filters, p.channels, p.taps);
    for (idx_t k = 0; k < p.filters; ++k) {
        for (idx_t c = 0; c < p.channels; ++c) {
            for (idx_t s = 0; s < p.taps; ++s) {
                double acc = 0.0;
                for (idx_t n = 0; n < in.n; ++n) {
                    for (idx_t x = 0; x < q; ++x) {
                        acc += static_cast<double>(in.at(n, c, x + d * s)) *
                               static_cast<double>(grad_out.at(n, k, x));
                    }
                }
                grad.at(k, c, s) = static_cast<float>(acc);
            }
        }
    }
    return grad;
}

double finite_diff_check(const std::function<double(std::span<const float>)>& f,
                         std::span<float> params, std::span<const float> analytic_grad,
                         float eps) {
    if (params.size() != analytic_grad.size()) {
        throw ShapeMismatch("gradient length does not match the parameter count");
    }
    if (!(eps > 0.0f)) throw ShapeMismatch("finite-difference step must be positive");

    std::vector<double> fd(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const float orig = params[i];
        const float hi = orig + eps;
        const float lo = orig - eps;

        params[i] = hi;
        const double f_hi = f(params);
        params[i] = lo;
        const double f_lo = f(params);
        params[i] = orig;

        if (!std::isfinite(f_hi) || !std::isfinite(f_lo)) {
            throw NonFinite("objective is not finite near coordinate " + std::to_string(i));
        }
        // Divide by the step the FP32 nudge actually realized, not the
        // requested eps; this keeps quadratics exact to round-off.
        const double step = static_cast<double>(hi) - static_cast<double>(lo);
        fd[i] = (f_hi - f_lo) / step;
    }

    double scale = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        scale = std::max(scale, std::abs(fd[i]));
        scale = std::max(scale, static_cast<double>(std::abs(analytic_grad[i])));
    }

    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double diff = std::abs(fd[i] - static_cast<double>(analytic_grad[i]));
        const double denom = std::max({std::abs(fd[i]),
                                       static_cast<double>(std::abs(analytic_grad[i])), scale});
        if (denom > 0.0) worst = std::max(worst, diff / denom);
    }
    return worst;
}

double norm_rel_error(std::span<const float> got, std::span<const float> want) {
    if (got.size() != want.size()) throw ShapeMismatch("compared tensors differ in length");
    double norm = 1.0;
    for (const float v : want) norm = std::max(norm, static_cast<double>(std::abs(v)));
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double diff =
            std::abs(static_cast<double>(got[i]) - static_cast<double>(want[i]));
        worst = std::max(worst, diff / norm);
    }
    return worst;
}

} // namespace conv1d
