// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "gcodec/codec.hpp"
#include "gcodec/dataset.hpp"
#include "test_util.hpp"

using namespace gcodec;
using test::random_tensor;

namespace {
CodecConfig desk_config() {
    CodecConfig cfg;
    cfg.base_channels = 16;  // smaller than the desk default: keeps unit tests fast
    cfg.latent_channels = 24;
    return cfg;
}

Tensor toy_batch(int n, int hw, uint64_t seed) {
    Tensor batch(n, 3, hw, hw);
    for (int i = 0; i < n; ++i) {
        Tensor img = synthetic_image(seed + i, hw, hw);
        std::copy(img.data(), img.data() + img.size(),
                  batch.data() + static_cast<size_t>(i) * img.size());
    }
    return batch;
}
}  // namespace

TEST_CASE("build_codec: gate count and determinism") {
    CodecConfig cfg = desk_config();
    cfg.base_channels = 32;
    cfg.latent_channels = 48;
    CodecState a = build_codec(cfg, 7);
    CHECK(a.gates.size() == 10);

    CodecState b = build_codec(cfg, 7);
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].value->size() == pb[i].value->size());
        for (size_t j = 0; j < pa[i].value->size(); ++j)
            CHECK((*pa[i].value)[j] == (*pb[i].value)[j]);
    }
    CHECK(a.checksum() == b.checksum());
    CHECK(a.checksum() != build_codec(cfg, 8).checksum());

    cfg.gate_every_layer_except_first = false;
    CHECK(build_codec(cfg, 7).gates.empty());

    CodecConfig bad = cfg;
    bad.base_channels = 0;
    CHECK_THROWS_AS(build_codec(bad, 7), std::invalid_argument);
}

TEST_CASE("neutral modules match the plain baseline bit-exactly (eval)") {
    CodecConfig gated_cfg = desk_config();
    CodecConfig plain_cfg = gated_cfg;
    plain_cfg.gate_every_layer_except_first = false;
    plain_cfg.modulator_enabled = false;

    // same seed draws the same backbone; gates/modulator are appended streams
    CodecState gated = build_codec(gated_cfg, 3);
    CodecState plain = build_codec(plain_cfg, 3);
    // align backbone + prior parameters explicitly
    {
        auto pg = gated.params();
        auto pp = plain.params();
        size_t j = 0;
        for (size_t i = 0; i < pg.size(); ++i) {
            if (pg[i].name.rfind("gate", 0) == 0 || pg[i].name.rfind("mod", 0) == 0) continue;
            REQUIRE(pg[i].name == pp[j].name);
            *pg[i].value = *pp[j].value;
            ++j;
        }
        REQUIRE(j == pp.size());
    }

    Tensor x = toy_batch(2, 64, 100);
    ForwardOptions opts;
    opts.quant = QuantMode::Eval;
    opts.gates = GatePass::Hard;
    opts.lam = 0.05;
    ForwardResult rg = gated.forward(x, opts);
    ForwardResult rp = plain.forward(x, opts);

    CHECK(rg.rate_bits_main == rp.rate_bits_main);
    CHECK(rg.rate_bits_hyper == rp.rate_bits_hyper);
    for (size_t i = 0; i < rg.reconstruction.size(); ++i)
        CHECK(rg.reconstruction[i] == rp.reconstruction[i]);
    for (size_t i = 0; i < rg.y_mod.size(); ++i) CHECK(rg.y_mod[i] == rp.y_mod[i]);
    for (double s : rg.gate_sparsity) CHECK(s == 0.0);

    // train mode with identical noise: the zero-initialized modulator is
    // still an exact identity (soft gates are exercised separately)
    ForwardOptions topts = opts;
    topts.quant = QuantMode::Train;
    topts.gates = GatePass::Off;
    topts.noise_seed = 99;
    ForwardResult tg = gated.forward(x, topts);
    ForwardResult tp = plain.forward(x, topts);
    CHECK(tg.rate_bits_main == tp.rate_bits_main);
    for (size_t i = 0; i < tg.reconstruction.size(); ++i)
        CHECK(tg.reconstruction[i] == tp.reconstruction[i]);
}

TEST_CASE("downsampling contract: y = x/16, z = x/64") {
    CodecState s = build_codec(desk_config(), 5);
    for (int hw : {64, 128}) {
        Tensor x = toy_batch(1, hw, 200);
        ForwardOptions opts;
        ForwardResult r = s.forward(x, opts);
        CHECK(r.y_h == hw / 16);
        CHECK(r.y_w == hw / 16);
        CHECK(r.z_h == hw / 64);
        CHECK(r.z_w == hw / 64);
        CHECK(r.reconstruction.h() == hw);
        CHECK(r.reconstruction.w() == hw);
    }
    Tensor bad(1, 3, 60, 64, 0.1);
    ForwardOptions opts;
    CHECK_THROWS_AS(s.forward(bad, opts), std::invalid_argument);
}

TEST_CASE("rates are nonnegative and additive") {
    CodecState s = build_codec(desk_config(), 6);
    Tensor x = toy_batch(2, 64, 300);
    for (auto quant : {QuantMode::Eval, QuantMode::Train}) {
        ForwardOptions opts;
        opts.quant = quant;
        opts.noise_seed = 17;
        ForwardResult r = s.forward(x, opts);
        CHECK(r.rate_bits_main >= 0.0);
        CHECK(r.rate_bits_hyper >= 0.0);
        CHECK(std::isfinite(r.rate_bits_main + r.rate_bits_hyper));
    }
}

TEST_CASE("eval rate equals an independent recount from stored symbols") {
    CodecState s = build_codec(desk_config(), 8);
    Tensor x = toy_batch(1, 64, 400);
    ForwardOptions opts;
    opts.lam = 0.02;
    ForwardResult r = s.forward(x, opts);

    // recount: rebuild scales from the stored hyper symbols and re-evaluate
    // the likelihoods from scratch
    Tensor z_hat(1, r.z_c, r.z_h, r.z_w);
    for (size_t i = 0; i < z_hat.size(); ++i) z_hat[i] = r.z_symbols[i];
    auto [scales_sp, means] = s.run_hyper_decoder(z_hat, r.y_h, r.y_w, GatePass::Hard);
    Tensor y_hat(1, r.y_c, r.y_h, r.y_w);
    for (size_t i = 0; i < y_hat.size(); ++i) y_hat[i] = r.y_symbols[i];

    double bits_main = 0.0;
    for (size_t i = 0; i < y_hat.size(); ++i) {
        const double sigma = scales_sp[i] < kScaleFloor ? kScaleFloor : scales_sp[i];
        double p = gaussian_bin_prob(y_hat[i], 0.0, sigma);
        if (p < kProbFloor) p = kProbFloor;
        bits_main -= std::log2(p);
    }
    double bits_hyper = 0.0;
    Tensor ph = s.prior.likelihood(z_hat);
    for (size_t i = 0; i < ph.size(); ++i) bits_hyper -= std::log2(ph[i]);

    CHECK(r.rate_bits_main == bits_main);
    CHECK(r.rate_bits_hyper == bits_hyper);
}

TEST_CASE("end-to-end gradient of R + lambda*D matches finite differences") {
    CodecConfig cfg = desk_config();
    cfg.base_channels = 8;
    cfg.latent_channels = 12;
    CodecState s = build_codec(cfg, 9);
    // move the modulator off its zero init so its gradients are visible
    Rng mrng(91);
    for (auto& v : s.pair.bm.w2) v = mrng.uniform(-0.05, 0.05);
    for (auto& v : s.pair.ibm.w2) v = mrng.uniform(-0.05, 0.05);
    for (auto& g : s.gates)
        for (auto& a : g.alpha) a = mrng.uniform(0.0, 0.05);

    Tensor x = toy_batch(1, 32, 500);
    const double lam = 0.05;
    ForwardOptions opts;
    opts.quant = QuantMode::Train;
    opts.gates = GatePass::Soft;
    opts.modulator = true;
    opts.lam = lam;
    opts.noise_seed = 1234;  // frozen noise

    auto loss = [&]() {
        ForwardResult r = s.forward(x, opts);
        const double pixels = static_cast<double>(x.n()) * x.h() * x.w();
        const double R = (r.rate_bits_main + r.rate_bits_hyper) / pixels;
        double mse = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            const double d = r.reconstruction[i] - x[i];
            mse += d * d;
        }
        mse /= static_cast<double>(x.size());
        return R + lam * mse;
    };

    Trace tr;
    s.forward(x, opts, &tr);
    s.zero_grads();
    const double pixels = static_cast<double>(x.n()) * x.h() * x.w();
    s.backward(tr, 1.0 / pixels, lam);

    // probe a spread of parameters across every group
    auto params = s.params();
    Rng prng(92);
    int probed = 0;
    double worst = 0.0;
    for (auto& p : params) {
        const size_t idx = prng.uniform_index(p.value->size());
        const double analytic = (*p.grad)[idx];
        const double fd =
            test::central_diff(loss, &(*p.value)[idx], 1e-5);
        if (std::abs(fd) < 1e-9 && std::abs(analytic) < 1e-9) continue;
        worst = std::max(worst, test::rel_err(analytic, fd));
        ++probed;
    }
    CHECK(probed >= 20);
    CHECK(worst < 1e-2);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    namespace fs = std::filesystem;
    CodecState s = build_codec(desk_config(), 10);
    // perturb away from init so the test is not vacuous
    Rng rng(101);
    for (auto& p : s.params())
        for (auto& v : *p.value) v += rng.uniform(-0.01, 0.01);

    const std::string path = (fs::temp_directory_path() / "gcodec_ckpt_test.bin").string();
    save_checkpoint(s, path);
    CodecState loaded = load_checkpoint(path);
    CHECK(loaded.cfg == s.cfg);
    auto pa = s.params(), pb = loaded.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i)
        for (size_t j = 0; j < pa[i].value->size(); ++j)
            CHECK((*pa[i].value)[j] == (*pb[i].value)[j]);
    CHECK(loaded.checksum() == s.checksum());
    fs::remove(path);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), std::runtime_error);
}

TEST_CASE("layer table: 14 layers, 10 gated, grid dims") {
    CodecConfig cfg = desk_config();
    CodecState s = build_codec(cfg, 11);
    auto table = s.layer_table(64, 64);
    REQUIRE(table.size() == 14);
    int gated = 0;
    for (const auto& l : table)
        if (l.gate_index >= 0) ++gated;
    CHECK(gated == 10);
    CHECK(table[0].name == "enc0");
    CHECK(table[0].grid_h == 32);
    CHECK(table[3].grid_h == 4);   // y grid
    CHECK(table[6].grid_h == 1);   // z grid
    CHECK(table[10].name == "dec0");
    CHECK(table[10].grid_h == 4);  // deconv counts on its input grid
    CHECK(table[13].grid_h == 32);

    CodecConfig ungated = cfg;
    ungated.gate_every_layer_except_first = false;
    auto t2 = build_codec(ungated, 11).layer_table(64, 64);
    for (const auto& l : t2) CHECK(l.gate_index == -1);
}
