#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "conv1d/reference.hpp"
#include "conv1d/rng.hpp"

using namespace conv1d;

namespace {

ConvParams params(idx_t c, idx_t k, idx_t s, idx_t d) {
    ConvParams p;
    p.channels = c;
    p.filters = k;
    p.taps = s;
    p.dilation = d;
    return p;
}

} // namespace

TEST_CASE("naive forward with a single-tap identity filter copies the input") {
    Tensor3Df in(2, 1, 9);
    Rng rng(31);
    rng.fill_uniform(in.data, -1.0f, 1.0f);
    WeightKCS w(1, 1, 1);
    w.data = {1.0f};
    const Tensor3Df out = naive_forward(in, w, params(1, 1, 1, 5));
    CHECK(out.same_shape(in));
    CHECK(out.data == in.data);
}

TEST_CASE("naive forward matches the hand-computed dilated example") {
    Tensor3Df in(1, 1, 5);
    in.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f};
    WeightKCS w(1, 1, 2);
    w.data = {1.0f, 1.0f};
    const Tensor3Df out = naive_forward(in, w, params(1, 1, 2, 2));
    CHECK(out.w == 3);
    CHECK(out.data == std::vector<float>{4.0f, 6.0f, 8.0f});
}

TEST_CASE("naive forward at dilation one equals a standard convolution") {
    // Independent undilated implementation, written directly from
    // out(k,q) = sum_c sum_s in(c, q+s) * w(k,c,s).
    const auto standard = [](const Tensor3Df& in, const WeightKCS& w) {
        Tensor3Df out(in.n, w.k, in.w - w.s + 1);
        for (idx_t n = 0; n < out.n; ++n) {
            for (idx_t k = 0; k < w.k; ++k) {
                for (idx_t q = 0; q < out.w; ++q) {
                    double acc = 0.0;
                    for (idx_t c = 0; c < w.c; ++c) {
                        for (idx_t s = 0; s < w.s; ++s) {
                            acc += static_cast<double>(in.at(n, c, q + s)) *
                                   static_cast<double>(w.at(k, c, s));
                        }
                    }
                    out.at(n, k, q) = static_cast<float>(acc);
                }
            }
        }
        return out;
    };

    Rng rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        const idx_t c = 1 + static_cast<idx_t>(rng.next_below(4));
        const idx_t k = 1 + static_cast<idx_t>(rng.next_below(4));
        const idx_t s = 1 + static_cast<idx_t>(rng.next_below(5));
        const idx_t q = 1 + static_cast<idx_t>(rng.next_below(12));
        Tensor3Df in(1 + static_cast<idx_t>(rng.next_below(3)), c, q + s - 1);
        rng.fill_uniform(in.data, -1.0f, 1.0f);
        WeightKCS w(k, c, s);
        rng.fill_uniform(w.data, -1.0f, 1.0f);

        const Tensor3Df dilated = naive_forward(in, w, params(c, k, s, 1));
        const Tensor3Df undilated = standard(in, w);
        REQUIRE(dilated.same_shape(undilated));
        REQUIRE(dilated.data == undilated.data);
    }
}

TEST_CASE("naive backward data with one tap is a pointwise transposed product") {
    Tensor3Df go(1, 2, 4);
    Rng rng(33);
    rng.fill_uniform(go.data, -1.0f, 1.0f);
    WeightKCS w(2, 3, 1);
    rng.fill_uniform(w.data, -1.0f, 1.0f);
    const Tensor3Df gd = naive_backward_data(go, w, params(3, 2, 1, 4));
    REQUIRE(gd.w == 4);
    for (idx_t c = 0; c < 3; ++c) {
        for (idx_t x = 0; x < 4; ++x) {
            double want = 0.0;
            for (idx_t k = 0; k < 2; ++k) {
                want += static_cast<double>(go.at(0, k, x)) * static_cast<double>(w.at(k, c, 0));
            }
            CHECK(gd.at(0, c, x) == doctest::Approx(want).epsilon(1e-6));
        }
    }
}

TEST_CASE("naive backward data matches the hand-computed dilated example") {
    Tensor3Df go(1, 1, 3);
    go.data = {1.0f, 1.0f, 1.0f};
    WeightKCS w(1, 1, 2);
    w.data = {1.0f, 1.0f};
    const Tensor3Df gd = naive_backward_data(go, w, params(1, 1, 2, 2));
    CHECK(gd.w == 5);
    CHECK(gd.data == std::vector<float>{1.0f, 1.0f, 2.0f, 1.0f, 1.0f});
}

TEST_CASE("naive backward weight matches the hand-computed dilated example") {
    Tensor3Df in(1, 1, 5);
    in.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f};
    Tensor3Df go(1, 1, 3);
    go.data = {1.0f, 1.0f, 1.0f};
    const WeightKCS gw = naive_backward_weight(go, in, params(1, 1, 2, 2));
    CHECK(gw.data == std::vector<float>{6.0f, 12.0f});
}

TEST_CASE("naive backward weight of a delta gradient reads out the input") {
    const idx_t C = 3, K = 2, S = 3, D = 2, Q = 6;
    Tensor3Df in(1, C, Q + D * (S - 1));
    Rng rng(34);
    rng.fill_uniform(in.data, -1.0f, 1.0f);
    Tensor3Df go(1, K, Q); // zero except one element
    const idx_t k0 = 1, q0 = 2;
    go.at(0, k0, q0) = 1.0f;

    const WeightKCS gw = naive_backward_weight(go, in, params(C, K, S, D));
    for (idx_t k = 0; k < K; ++k) {
        for (idx_t c = 0; c < C; ++c) {
            for (idx_t s = 0; s < S; ++s) {
                const float want = k == k0 ? in.at(0, c, q0 + D * s) : 0.0f;
                CHECK(gw.at(k, c, s) == want);
            }
        }
    }
}

TEST_CASE("backward data is the exact adjoint of forward") {
    Rng rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        const idx_t c = 1 + static_cast<idx_t>(rng.next_below(4));
        const idx_t k = 1 + static_cast<idx_t>(rng.next_below(4));
        const idx_t s = 1 + static_cast<idx_t>(rng.next_below(4));
        const idx_t d = 1 + static_cast<idx_t>(rng.next_below(3));
        const idx_t q = 1 + static_cast<idx_t>(rng.next_below(10));
        const ConvParams p = params(c, k, s, d);

        Tensor3Df x(2, c, q + d * (s - 1));
        rng.fill_uniform(x.data, -1.0f, 1.0f);
        WeightKCS w(k, c, s);
        rng.fill_uniform(w.data, -1.0f, 1.0f);
        Tensor3Df y(2, k, q);
        rng.fill_uniform(y.data, -1.0f, 1.0f);

        const Tensor3Df fx = naive_forward(x, w, p);
        const Tensor3Df bty = naive_backward_data(y, w, p);

        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < fx.data.size(); ++i) {
            lhs += static_cast<double>(fx.data[i]) * static_cast<double>(y.data[i]);
        }
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            rhs += static_cast<double>(x.data[i]) * static_cast<double>(bty.data[i]);
        }
        REQUIRE(std::abs(lhs - rhs) <= 1e-6 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("oracle shape validation") {
    Tensor3Df in(1, 2, 8);
    WeightKCS w(1, 3, 2); // channel mismatch vs params below
    CHECK_THROWS_AS(naive_forward(in, w, params(2, 1, 2, 1)), ShapeMismatch);
    WeightKCS w2(1, 2, 5);
    CHECK_THROWS_AS(naive_forward(in, w2, params(2, 1, 5, 2)), ShapeMismatch); // needs width 9
}

TEST_CASE("finite differences are exact on a quadratic") {
    std::vector<float> x = {3.0f};
    const std::vector<float> grad = {6.0f};
    const auto f = [](std::span<const float> p) {
        return static_cast<double>(p[0]) * static_cast<double>(p[0]);
    };
    const double err = finite_diff_check(f, x, grad, 1e-3f);
    CHECK(err <= 1e-6);
    CHECK(x[0] == 3.0f); // restored
}

TEST_CASE("finite differences validate the conv weight gradient") {
    const idx_t C = 2, K = 2, S = 3, D = 2, Q = 16;
    const ConvParams p = params(C, K, S, D);
    Tensor3Df in(1, C, Q + D * (S - 1));
    Rng rng(36);
    rng.fill_uniform(in.data, -1.0f, 1.0f);
    WeightKCS w(K, C, S);
    rng.fill_uniform(w.data, -1.0f, 1.0f);

    const auto f = [&](std::span<const float> flat) {
        WeightKCS cur(K, C, S);
        std::copy(flat.begin(), flat.end(), cur.data.begin());
        const Tensor3Df out = naive_forward(in, cur, p);
        double acc = 0.0;
        for (const float v : out.data) acc += static_cast<double>(v) * static_cast<double>(v);
        return acc;
    };

    const Tensor3Df out = naive_forward(in, w, p);
    Tensor3Df go(1, K, Q);
    for (std::size_t i = 0; i < out.data.size(); ++i) go.data[i] = 2.0f * out.data[i];
    const WeightKCS analytic = naive_backward_weight(go, in, p);

    const double err = finite_diff_check(f, w.data, analytic.data, 1e-3f);
    CHECK(err <= 1e-3);
}

TEST_CASE("finite differences validate the conv data gradient") {
    const idx_t C = 2, K = 2, S = 3, D = 2, Q = 16;
    const ConvParams p = params(C, K, S, D);
    Tensor3Df in(1, C, Q + D * (S - 1));
    Rng rng(37);
    rng.fill_uniform(in.data, -1.0f, 1.0f);
    WeightKCS w(K, C, S);
    rng.fill_uniform(w.data, -1.0f, 1.0f);

    const auto f = [&](std::span<const float> flat) {
        Tensor3Df cur = in;
        std::copy(flat.begin(), flat.end(), cur.data.begin());
        const Tensor3Df out = naive_forward(cur, w, p);
        double acc = 0.0;
        for (const float v : out.data) acc += static_cast<double>(v) * static_cast<double>(v);
        return acc;
    };

    const Tensor3Df out = naive_forward(in, w, p);
    Tensor3Df go(1, K, Q);
    for (std::size_t i = 0; i < out.data.size(); ++i) go.data[i] = 2.0f * out.data[i];
    const Tensor3Df analytic = naive_backward_data(go, w, p);

    const double err = finite_diff_check(f, in.data, analytic.data, 1e-3f);
    CHECK(err <= 1e-3);
}

TEST_CASE("the checker flags a deliberately scaled gradient") {
    const idx_t C = 2, K = 1, S = 2, D = 1, Q = 8;
    const ConvParams p = params(C, K, S, D);
    Tensor3Df in(1, C, Q + 1);
    Rng rng(38);
    rng.fill_uniform(in.data, 0.5f, 1.5f);
    WeightKCS w(K, C, S);
    rng.fill_uniform(w.data, 0.5f, 1.5f);

    const auto f = [&](std::span<const float> flat) {
        WeightKCS cur(K, C, S);
        std::copy(flat.begin(), flat.end(), cur.data.begin());
        const Tensor3Df out = naive_forward(in, cur, p);
        double acc = 0.0;
        for (const float v : out.data) acc += static_cast<double>(v) * static_cast<double>(v);
        return acc;
    };

    const Tensor3Df out = naive_forward(in, w, p);
    Tensor3Df go(1, K, Q);
    for (std::size_t i = 0; i < out.data.size(); ++i) go.data[i] = 2.0f * out.data[i];
    WeightKCS analytic = naive_backward_weight(go, in, p);
    for (float& v : analytic.data) v *= 1.1f;

    const double err = finite_diff_check(f, w.data, analytic.data, 1e-3f);
    CHECK(err >= 0.05);
    CHECK(err <= 0.15);
}

TEST_CASE("the checker rejects non-finite objectives") {
    std::vector<float> x = {1.0f};
    const std::vector<float> grad = {0.0f};
    const auto f = [](std::span<const float>) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(finite_diff_check(f, x, grad, 1e-3f), NonFinite);
}

TEST_CASE("norm-relative error helper") {
    const std::vector<float> want = {10.0f, -20.0f, 0.0f};
    const std::vector<float> same = want;
    CHECK(norm_rel_error(same, want) == 0.0);
    const std::vector<float> off = {10.0f, -20.0f, 0.002f};
    CHECK(norm_rel_error(off, want) == doctest::Approx(0.002 / 20.0).epsilon(1e-9));
    const std::vector<float> shorter = {1.0f};
    CHECK_THROWS_AS(norm_rel_error(shorter, want), ShapeMismatch);
}
