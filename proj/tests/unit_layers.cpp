// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gcodec/layers.hpp"
#include "test_util.hpp"

using namespace gcodec;
using test::max_grad_rel_err;
using test::random_tensor;

namespace {

// Direct-loop convolution used as the oracle for the im2col path.
Tensor naive_conv(const Tensor& x, const Conv2d& c) {
    const int oh = c.out_dim(x.h()), ow = c.out_dim(x.w());
    Tensor y(x.n(), c.out_ch, oh, ow);
    for (int n = 0; n < x.n(); ++n)
        for (int oc = 0; oc < c.out_ch; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double s = c.b[oc];
                    for (int ic = 0; ic < c.in_ch; ++ic)
                        for (int ky = 0; ky < c.k; ++ky)
                            for (int kx = 0; kx < c.k; ++kx) {
                                const int iy = oy * c.stride - c.pad + ky;
                                const int ix = ox * c.stride - c.pad + kx;
                                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                                s += c.w[((static_cast<size_t>(oc) * c.in_ch + ic) * c.k + ky) *
                                             c.k +
                                         kx] *
                                     x.at(n, ic, iy, ix);
                            }
                    y.at(n, oc, oy, ox) = s;
                }
    return y;
}

Tensor naive_deconv(const Tensor& x, const ConvTranspose2d& c) {
    const int oh = c.out_dim(x.h()), ow = c.out_dim(x.w());
    Tensor y(x.n(), c.out_ch, oh, ow);
    for (int n = 0; n < x.n(); ++n) {
        for (int oc = 0; oc < c.out_ch; ++oc)
            for (int p = 0; p < oh * ow; ++p)
                y.data()[((static_cast<size_t>(n) * c.out_ch + oc) * oh * ow) + p] = c.b[oc];
        for (int ic = 0; ic < c.in_ch; ++ic)
            for (int iy = 0; iy < x.h(); ++iy)
                for (int ix = 0; ix < x.w(); ++ix)
                    for (int oc = 0; oc < c.out_ch; ++oc)
                        for (int ky = 0; ky < c.k; ++ky)
                            for (int kx = 0; kx < c.k; ++kx) {
                                const int oy = iy * c.stride - c.pad + ky;
                                const int ox = ix * c.stride - c.pad + kx;
                                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                                y.at(n, oc, oy, ox) +=
                                    c.w[((static_cast<size_t>(ic) * c.out_ch + oc) * c.k + ky) *
                                            c.k +
                                        kx] *
                                    x.at(n, ic, iy, ix);
                            }
    }
    return y;
}

double weighted_sum(const Tensor& t, const Tensor& r) {
    double s = 0.0;
    for (size_t i = 0; i < t.size(); ++i) s += t[i] * r[i];
    return s;
}

}  // namespace

TEST_CASE("conv2d matches the direct-loop oracle") {
    Rng rng(11);
    for (int stride : {1, 2}) {
        Conv2d c;
        c.init(3, 5, 5, stride, 2, rng);
        Tensor x = random_tensor(2, 3, 9, 8, rng);
        Tensor got = c.forward(x);
        Tensor want = naive_conv(x, c);
        REQUIRE(got.same_shape(want));
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv_transpose matches the direct-loop oracle") {
    Rng rng(12);
    for (int op : {0, 1}) {
        ConvTranspose2d c;
        c.init(4, 3, 5, 2, 2, op, rng);
        Tensor x = random_tensor(2, 4, 5, 6, rng);
        Tensor got = c.forward(x);
        Tensor want = naive_deconv(x, c);
        REQUIRE(got.same_shape(want));
        for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("strided conv halves even dims, deconv doubles them") {
    Rng rng(13);
    Conv2d c;
    c.init(1, 1, 5, 2, 2, rng);
    CHECK(c.out_dim(64) == 32);
    CHECK(c.out_dim(10) == 5);
    ConvTranspose2d d;
    d.init(1, 1, 5, 2, 2, 1, rng);
    CHECK(d.out_dim(32) == 64);
    CHECK(d.out_dim(5) == 10);
}

TEST_CASE("conv2d backward matches finite differences") {
    Rng rng(14);
    Conv2d c;
    c.init(2, 3, 3, 2, 1, rng);
    Tensor x = random_tensor(2, 2, 6, 5, rng);
    Tensor r = random_tensor(2, 3, c.out_dim(6), c.out_dim(5), rng);

    auto loss = [&]() { return weighted_sum(c.forward(x), r); };
    std::fill(c.gw.begin(), c.gw.end(), 0.0);
    std::fill(c.gb.begin(), c.gb.end(), 0.0);
    Tensor gx = c.backward(x, r);

    CHECK(max_grad_rel_err(loss, c.w, c.gw) < 1e-5);
    CHECK(max_grad_rel_err(loss, c.b, c.gb) < 1e-5);
    CHECK(max_grad_rel_err(loss, x.vec(), gx.vec()) < 1e-5);
}

TEST_CASE("conv_transpose backward matches finite differences") {
    Rng rng(15);
    ConvTranspose2d c;
    c.init(3, 2, 5, 2, 2, 1, rng);
    Tensor x = random_tensor(1, 3, 4, 4, rng);
    Tensor r = random_tensor(1, 2, c.out_dim(4), c.out_dim(4), rng);

    auto loss = [&]() { return weighted_sum(c.forward(x), r); };
    std::fill(c.gw.begin(), c.gw.end(), 0.0);
    std::fill(c.gb.begin(), c.gb.end(), 0.0);
    Tensor gx = c.backward(x, r);

    CHECK(max_grad_rel_err(loss, c.w, c.gw) < 1e-5);
    CHECK(max_grad_rel_err(loss, c.b, c.gb) < 1e-5);
    CHECK(max_grad_rel_err(loss, x.vec(), gx.vec()) < 1e-5);
}

TEST_CASE("activation gradients match finite differences") {
    Rng rng(16);
    for (Act a : {Act::Silu, Act::Softplus}) {
        Tensor x = random_tensor(1, 2, 4, 4, rng, -2.0, 2.0);
        Tensor r = random_tensor(1, 2, 4, 4, rng);
        auto loss = [&]() { return weighted_sum(act_forward(x, a), r); };
        Tensor gx = act_backward(x, r, a);
        CHECK(max_grad_rel_err(loss, x.vec(), gx.vec()) < 1e-6);
    }
}

TEST_CASE("activation names round-trip and reject unknowns") {
    CHECK(act_from_name("silu") == Act::Silu);
    CHECK(act_name(act_from_name("softplus")) == "softplus");
    CHECK_THROWS_AS(act_from_name("gdn"), std::invalid_argument);
}
