// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gcodec/coder.hpp"
#include "gcodec/dataset.hpp"
#include "test_util.hpp"

using namespace gcodec;

namespace {
CdfTable random_table(Rng& rng, int max_symbols = 32) {
    const int n = 2 + static_cast<int>(rng.uniform_index(max_symbols - 1));
    std::vector<double> p(n);
    double sum = 0.0;
    for (auto& v : p) {
        v = rng.uniform(0.0, 1.0);
        sum += v;
    }
    for (auto& v : p) v /= sum * 1.0000001;  // keep the total strictly below 1
    return build_cdf(p, 16, static_cast<int32_t>(rng.uniform_index(41)) - 20);
}

double quantized_cross_entropy_bits(const std::vector<int32_t>& symbols,
                                    const std::vector<const CdfTable*>& tables) {
    double bits = 0.0;
    for (size_t i = 0; i < symbols.size(); ++i) {
        const auto& t = *tables[i];
        const size_t k = static_cast<size_t>(symbols[i] - t.symbol_offset);
        const double p = static_cast<double>(t.cdf[k + 1] - t.cdf[k]) /
                         static_cast<double>(1u << t.precision);
        bits -= std::log2(p);
    }
    return bits;
}
}  // namespace

TEST_CASE("build_cdf: uniform-4 at precision 16 divides exactly") {
    CdfTable t = build_cdf({0.25, 0.25, 0.25, 0.25}, 16);
    REQUIRE(t.symbol_count() == 4);
    for (int i = 0; i < 4; ++i) CHECK(t.cdf[i + 1] - t.cdf[i] == 16384);
    CHECK(t.cdf[0] == 0);
    CHECK(t.cdf[4] == 65536);
}

TEST_CASE("build_cdf: rare symbols keep a nonzero frequency") {
    CdfTable t = build_cdf({0.999, 0.001}, 16);
    CHECK(t.cdf[1] - t.cdf[0] >= 1);
    CHECK(t.cdf[2] - t.cdf[1] >= 1);
    CdfTable t2 = build_cdf({1.0, 0.0, 0.0}, 16);
    CHECK(t2.cdf[2] - t2.cdf[1] == 1);
    CHECK(t2.cdf[3] - t2.cdf[2] == 1);
}

TEST_CASE("build_cdf: reconstruction error stays within quantization noise") {
    Rng rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(15));
        std::vector<double> p(n);
        double sum = 0.0;
        for (auto& v : p) {
            v = rng.uniform(0.0, 1.0);
            sum += v;
        }
        for (auto& v : p) v /= sum;
        CdfTable t = build_cdf(p, 16);
        CHECK(t.cdf.back() == 65536);
        for (int i = 0; i < n; ++i) {
            const double q = static_cast<double>(t.cdf[i + 1] - t.cdf[i]) / 65536.0;
            CHECK(std::abs(q - p[i]) <= 2.5 / 65536.0);
        }
    }
}

TEST_CASE("build_cdf rejects bad inputs") {
    CHECK_THROWS_AS(build_cdf({}, 16), std::invalid_argument);
    CHECK_THROWS_AS(build_cdf({0.6, 0.6}, 16), std::invalid_argument);
    CHECK_THROWS_AS(build_cdf({-0.1, 0.5}, 16), std::invalid_argument);
}

TEST_CASE("empty sequence flushes to at most 8 bytes") {
    RangeEncoder enc;
    auto bytes = enc.finish();
    CHECK(bytes.size() <= 8);
    std::vector<int32_t> out = range_decode(bytes, {}, 0);
    CHECK(out.empty());
}

TEST_CASE("uniform-4 stream approaches 2 bits per symbol") {
    CdfTable t = build_cdf({0.25, 0.25, 0.25, 0.25}, 16);
    Rng rng(52);
    std::vector<int32_t> symbols(10000);
    std::vector<const CdfTable*> tables(symbols.size(), &t);
    for (auto& s : symbols) s = static_cast<int32_t>(rng.uniform_index(4));
    auto bytes = range_encode(symbols, tables);
    CHECK(bytes.size() >= 2500);
    CHECK(bytes.size() <= 2540);
    CHECK(range_decode(bytes, tables, symbols.size()) == symbols);
}

TEST_CASE("lossless round-trip over random tables and symbols") {
    Rng rng(53);
    size_t total_symbols = 0;
    for (int trial = 0; trial < 250; ++trial) {
        // a fresh set of tables, shared across a random-length sequence
        std::vector<CdfTable> pool;
        for (int i = 0; i < 4; ++i) pool.push_back(random_table(rng));
        const size_t count = 1 + rng.uniform_index(100);
        std::vector<int32_t> symbols(count);
        std::vector<const CdfTable*> tables(count);
        for (size_t i = 0; i < count; ++i) {
            const CdfTable& t = pool[rng.uniform_index(pool.size())];
            tables[i] = &t;
            symbols[i] = t.symbol_offset +
                         static_cast<int32_t>(rng.uniform_index(t.symbol_count()));
        }
        auto bytes = range_encode(symbols, tables);
        CHECK(range_decode(bytes, tables, count) == symbols);
        total_symbols += count;

        // near-optimality on every stream
        const double ce = quantized_cross_entropy_bits(symbols, tables);
        const double actual = 8.0 * static_cast<double>(bytes.size());
        CHECK(actual >= ce - 1.0);
        CHECK(actual <= ce + 8.0 * 32.0);
    }
    CHECK(total_symbols >= 10000);
}

TEST_CASE("encode/decode determinism across runs") {
    Rng rng(54);
    CdfTable t = random_table(rng);
    std::vector<int32_t> symbols(500);
    std::vector<const CdfTable*> tables(symbols.size(), &t);
    for (auto& s : symbols)
        s = t.symbol_offset + static_cast<int32_t>(rng.uniform_index(t.symbol_count()));
    auto a = range_encode(symbols, tables);
    auto b = range_encode(symbols, tables);
    CHECK(a == b);
}

TEST_CASE("out-of-range symbol raises encode-range-error") {
    CdfTable t = build_cdf({0.5, 0.5}, 16, 10);
    RangeEncoder enc;
    CHECK_THROWS_AS(enc.encode_symbol(9, t), EncodeRangeError);
    CHECK_THROWS_AS(enc.encode_symbol(12, t), EncodeRangeError);
}

TEST_CASE("mismatched tables decode to garbage or an error, never crash") {
    Rng rng(55);
    CdfTable t1 = random_table(rng);
    CdfTable t2 = random_table(rng);
    std::vector<int32_t> symbols(64);
    std::vector<const CdfTable*> enc_tables(symbols.size(), &t1);
    std::vector<const CdfTable*> dec_tables(symbols.size(), &t2);
    for (auto& s : symbols)
        s = t1.symbol_offset + static_cast<int32_t>(rng.uniform_index(t1.symbol_count()));
    auto bytes = range_encode(symbols, enc_tables);
    try {
        auto out = range_decode(bytes, dec_tables, symbols.size());
        CHECK(out.size() == symbols.size());  // garbage is acceptable
    } catch (const DecodeError&) {
        // also acceptable
    }
}

TEST_CASE("bitstream container round-trip and error taxonomy") {
    Bitstream bs;
    bs.model_checksum = 0x1122334455667788ull;
    bs.lambda = 0.0375;
    bs.image_h = 64;
    bs.image_w = 96;
    bs.y_c = 24;
    bs.y_h = 4;
    bs.y_w = 6;
    bs.z_c = 16;
    bs.z_h = 1;
    bs.z_w = 1;
    bs.payload_hyper = {1, 2, 3};
    bs.payload_main = {9, 8, 7, 6};
    auto bytes = bs.to_bytes();
    CHECK(bs.total_bits() == 8 * bytes.size());

    Bitstream back = Bitstream::from_bytes(bytes);
    CHECK(back.model_checksum == bs.model_checksum);
    CHECK(back.lambda == bs.lambda);
    CHECK(back.image_w == 96);
    CHECK(back.payload_hyper == bs.payload_hyper);
    CHECK(back.payload_main == bs.payload_main);

    auto corrupted = bytes;
    corrupted[0] = 'X';
    CHECK_THROWS_AS(Bitstream::from_bytes(corrupted), UnsupportedFormatError);

    auto wrong_version = bytes;
    wrong_version[4] = 99;
    CHECK_THROWS_AS(Bitstream::from_bytes(wrong_version), UnsupportedFormatError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 5);
    CHECK_THROWS_AS(Bitstream::from_bytes(truncated), DecodeError);
}

TEST_CASE("compress/decompress equals the eval-mode forward") {
    CodecConfig cfg;
    cfg.base_channels = 16;
    cfg.latent_channels = 24;
    CodecState state = build_codec(cfg, 21);
    // nudge the modulator so lambda actually matters in the header
    Rng rng(211);
    for (auto& v : state.pair.bm.w2) v = rng.uniform(-0.02, 0.02);
    for (auto& v : state.pair.ibm.w2) v = rng.uniform(-0.02, 0.02);

    Tensor x = synthetic_image(4242, 64, 64);
    const double lam = 0.0375;
    Bitstream bs = compress_image(state, x, lam);
    CHECK(bs.lambda == lam);

    Tensor rec = decompress_image(state, bs);
    ForwardOptions opts;
    opts.lam = lam;
    ForwardResult fr = state.forward(x, opts);
    REQUIRE(rec.same_shape(fr.reconstruction));
    for (size_t i = 0; i < rec.size(); ++i) CHECK(rec[i] == fr.reconstruction[i]);

    // determinism of the byte stream
    Bitstream bs2 = compress_image(state, x, lam);
    CHECK(bs.to_bytes() == bs2.to_bytes());

    // actual payload vs the eval-mode estimate
    const double estimate = fr.rate_bits_main + fr.rate_bits_hyper;
    const double actual = 8.0 * static_cast<double>(bs.payload_main.size() +
                                                    bs.payload_hyper.size());
    CHECK(actual <= estimate * 1.02 + 64.0 * 8.0);
    CHECK(actual >= estimate * 0.98 - 64.0 * 8.0);

    // wrong model
    CodecState other = build_codec(cfg, 22);
    CHECK_THROWS_AS(decompress_image(other, bs), WrongModelError);
}
