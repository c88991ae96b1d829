// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gcodec/modulator.hpp"
#include "test_util.hpp"

using namespace gcodec;
using test::max_grad_rel_err;
using test::random_tensor;

TEST_CASE("zero output layer yields the all-ones vector") {
    Rng rng(31);
    ModulatorParams p;
    p.init(8, 6, LambdaTransform::Log, rng);
    for (double lam : {1e-3, 0.05, 1.0, 7.5}) {
        auto tr = modulation_vector(p, lam);
        for (double v : tr.vec) CHECK(v == 1.0);
    }
}

TEST_CASE("modulation vector entries are always positive") {
    Rng rng(32);
    for (int trial = 0; trial < 30; ++trial) {
        ModulatorParams p;
        p.init(4, 5, trial % 2 ? LambdaTransform::Log : LambdaTransform::Raw, rng);
        for (auto& v : p.w2) v = rng.uniform(-2.0, 2.0);
        for (auto& v : p.b2) v = rng.uniform(-2.0, 2.0);
        auto tr = modulation_vector(p, std::exp(rng.uniform(-6.0, 2.0)));
        for (double v : tr.vec) CHECK(v > 0.0);
    }
}

TEST_CASE("hand-evaluated single-hidden-unit case") {
    Rng rng(33);
    ModulatorParams p;
    p.init(1, 3, LambdaTransform::Raw, rng);
    p.w1 = {1.0};
    p.b1 = {0.0};
    p.w2 = {1.0, 1.0, 1.0};
    p.b2 = {0.0, 0.0, 0.0};
    auto tr = modulation_vector(p, 0.5);
    for (double v : tr.vec) CHECK(v == doctest::Approx(1.6487).epsilon(1e-4));
}

TEST_CASE("lambda must be positive") {
    Rng rng(34);
    ModulatorParams p;
    p.init(2, 2, LambdaTransform::Log, rng);
    CHECK_THROWS_AS(modulation_vector(p, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(modulation_vector(p, -1.0), std::invalid_argument);
}

TEST_CASE("modulate broadcasts channel-wise") {
    Rng rng(35);
    ModulatorPair pair;
    pair.init(4, 3, LambdaTransform::Log, false, rng);
    // neutral init: output = input bit-exact
    Tensor y = random_tensor(2, 3, 4, 4, rng);
    Tensor m = modulate(y, pair, 0.1);
    for (size_t i = 0; i < y.size(); ++i) CHECK(m[i] == y[i]);

    // constant channel scales by the vector entry
    for (auto& v : pair.bm.b2) v = rng.uniform(-1.0, 1.0);
    auto vec = modulation_vector(pair.bm, 0.1).vec;
    Tensor yc(1, 3, 2, 2, 0.0);
    for (int c = 0; c < 3; ++c)
        for (int s = 0; s < 4; ++s) yc.at(0, c, s / 2, s % 2) = 0.7;
    Tensor mc = modulate(yc, pair, 0.1);
    for (int c = 0; c < 3; ++c) CHECK(mc.at(0, c, 0, 0) == doctest::Approx(0.7 * vec[c]));

    Tensor bad(1, 2, 2, 2);
    CHECK_THROWS_AS(modulate(bad, pair, 0.1), std::invalid_argument);
}

TEST_CASE("tied reciprocal pair round-trips") {
    Rng rng(36);
    ModulatorPair pair;
    pair.init(4, 5, LambdaTransform::Log, true, rng);
    for (auto& v : pair.bm.w2) v = rng.uniform(-0.5, 0.5);
    for (auto& v : pair.bm.b2) v = rng.uniform(-0.5, 0.5);
    Tensor y = random_tensor(2, 5, 3, 3, rng);
    Tensor back = demodulate(modulate(y, pair, 0.02), pair, 0.02);
    for (size_t i = 0; i < y.size(); ++i)
        CHECK(back[i] == doctest::Approx(y[i]).epsilon(1e-6));
}

TEST_CASE("independent ibm at neutral init is the identity") {
    Rng rng(37);
    ModulatorPair pair;
    pair.init(4, 3, LambdaTransform::Log, false, rng);
    Tensor y = random_tensor(1, 3, 2, 2, rng);
    Tensor d = demodulate(y, pair, 0.3);
    for (size_t i = 0; i < y.size(); ++i) CHECK(d[i] == y[i]);
}

TEST_CASE("modulation vector gradients match finite differences") {
    Rng rng(38);
    ModulatorParams p;
    p.init(6, 4, LambdaTransform::Log, rng);
    for (auto& v : p.w2) v = rng.uniform(-0.4, 0.4);
    for (auto& v : p.b2) v = rng.uniform(-0.4, 0.4);
    // keep relu inputs away from the kink
    const double lam = 0.05;
    {
        auto tr = modulation_vector(p, lam);
        for (int i = 0; i < p.hidden; ++i) {
            const double z = p.w1[i] * tr.t + p.b1[i];
            if (std::abs(z) < 1e-2) p.b1[i] += 0.05;
        }
    }
    std::vector<double> r(4);
    for (auto& v : r) v = rng.uniform(-1.0, 1.0);

    auto loss = [&]() {
        auto tr = modulation_vector(p, lam);
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += tr.vec[c] * r[c];
        return s;
    };
    auto tr = modulation_vector(p, lam);
    std::fill(p.gw1.begin(), p.gw1.end(), 0.0);
    std::fill(p.gb1.begin(), p.gb1.end(), 0.0);
    std::fill(p.gw2.begin(), p.gw2.end(), 0.0);
    std::fill(p.gb2.begin(), p.gb2.end(), 0.0);
    modulation_vector_backward(p, tr, r);

    CHECK(max_grad_rel_err(loss, p.w1, p.gw1) < 1e-3);
    CHECK(max_grad_rel_err(loss, p.b1, p.gb1) < 1e-3);
    CHECK(max_grad_rel_err(loss, p.w2, p.gw2) < 1e-3);
    CHECK(max_grad_rel_err(loss, p.b2, p.gb2) < 1e-3);
}
