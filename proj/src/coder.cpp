// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/coder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace gcodec {

namespace {
constexpr uint32_t kTopValue = 1u << 24;

// Symbols escaping the modeled range are coded raw as two 16-bit halves.
const CdfTable& uniform16_table() {
    static const CdfTable t = [] {
        CdfTable u;
        u.symbol_offset = 0;
        u.precision = 16;
        u.cdf.resize(65537);
        for (uint32_t i = 0; i <= 65536; ++i) u.cdf[i] = i;
        return u;
    }();
    return t;
}
}  // namespace

CdfTable build_cdf(const std::vector<double>& probabilities, int precision,
                   int32_t symbol_offset) {
    if (probabilities.empty()) throw std::invalid_argument("build_cdf: empty symbol range");
    if (precision < 2 || precision > 16) throw std::invalid_argument("build_cdf: bad precision");
    const size_t n = probabilities.size();
    const uint64_t total = 1ull << precision;
    if (n > total) throw std::invalid_argument("build_cdf: more symbols than code points");
    double psum = 0.0;
    for (double p : probabilities) {
        if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("build_cdf: bad probability");
        psum += p;
    }
    if (psum > 1.0 + 1e-6) throw std::invalid_argument("build_cdf: probabilities sum above 1");

    std::vector<uint64_t> freq(n);
    uint64_t sum = 0;
    for (size_t i = 0; i < n; ++i) {
        uint64_t f = static_cast<uint64_t>(
            std::llround(probabilities[i] * static_cast<double>(total)));
        if (f < 1) f = 1;
        freq[i] = f;
        sum += f;
    }
    // repair to an exact total, spreading units over bins in descending
    // frequency order (deterministic, ties by index)
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&freq](size_t a, size_t b) { return freq[a] > freq[b]; });
    if (sum < total) {
        const uint64_t diff = total - sum;
        const uint64_t q = diff / n, r = diff % n;
        for (size_t i = 0; i < n; ++i) freq[order[i]] += q + (i < r ? 1 : 0);
    } else if (sum > total) {
        uint64_t need = sum - total;
        while (need > 0) {
            bool moved = false;
            for (size_t i = 0; i < n && need > 0; ++i) {
                if (freq[order[i]] > 1) {
                    --freq[order[i]];
                    --need;
                    moved = true;
                }
            }
            if (!moved) throw std::invalid_argument("build_cdf: cannot satisfy total");
        }
    }

    CdfTable t;
    t.symbol_offset = symbol_offset;
    t.precision = precision;
    t.cdf.resize(n + 1);
    t.cdf[0] = 0;
    for (size_t i = 0; i < n; ++i) t.cdf[i + 1] = t.cdf[i] + static_cast<uint32_t>(freq[i]);
    return t;
}

void RangeEncoder::shift_low() {
    if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
        const auto carry = static_cast<uint8_t>(low_ >> 32);
        do {
            out_.push_back(static_cast<uint8_t>(cache_ + carry));
            cache_ = 0xFF;
        } while (--cache_size_ != 0);
        cache_ = static_cast<uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFull) << 8;
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq, uint32_t total_bits) {
    const uint32_t r = range_ >> total_bits;
    low_ += static_cast<uint64_t>(r) * cum;
    range_ = r * freq;
    while (range_ < kTopValue) {
        range_ <<= 8;
        shift_low();
    }
}

void RangeEncoder::encode_symbol(int32_t symbol, const CdfTable& table) {
    if (!table.contains(symbol))
        throw EncodeRangeError("range_encode: symbol outside table range");
    const size_t i = static_cast<size_t>(symbol - table.symbol_offset);
    encode(table.cdf[i], table.cdf[i + 1] - table.cdf[i],
           static_cast<uint32_t>(table.precision));
}

std::vector<uint8_t> RangeEncoder::finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::vector<uint8_t>& data) : data_(data) {
    // the encoder's first byte is always the initial zero cache
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
    if (pos_ < data_.size()) return data_[pos_++];
    if (pos_ < data_.size() + 8) {  // flush slack
        ++pos_;
        return 0;
    }
    throw DecodeError("range_decode: data exhausted");
}

uint32_t RangeDecoder::decode_freq(uint32_t total_bits) {
    const uint32_t r = range_ >> total_bits;
    uint64_t f = code_ / r;
    const uint64_t maxf = (1ull << total_bits) - 1;
    return static_cast<uint32_t>(f > maxf ? maxf : f);
}

void RangeDecoder::consume(uint32_t cum, uint32_t freq, uint32_t total_bits) {
    const uint32_t r = range_ >> total_bits;
    code_ -= static_cast<uint64_t>(r) * cum;
    range_ = r * freq;
    while (range_ < kTopValue) {
        code_ = (code_ << 8) | next_byte();
        range_ <<= 8;
    }
}

int32_t RangeDecoder::decode_symbol(const CdfTable& table) {
    const uint32_t f = decode_freq(static_cast<uint32_t>(table.precision));
    // largest i with cdf[i] <= f
    const auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), f);
    const size_t i = static_cast<size_t>(it - table.cdf.begin()) - 1;
    if (i >= static_cast<size_t>(table.symbol_count()))
        throw DecodeError("range_decode: frequency outside table");
    consume(table.cdf[i], table.cdf[i + 1] - table.cdf[i],
            static_cast<uint32_t>(table.precision));
    return table.symbol_offset + static_cast<int32_t>(i);
}

std::vector<uint8_t> range_encode(const std::vector<int32_t>& symbols,
                                  const std::vector<const CdfTable*>& tables) {
    if (symbols.size() != tables.size())
        throw std::invalid_argument("range_encode: one table per symbol required");
    RangeEncoder enc;
    for (size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(symbols[i], *tables[i]);
    return enc.finish();
}

std::vector<int32_t> range_decode(const std::vector<uint8_t>& data,
                                  const std::vector<const CdfTable*>& tables, size_t count) {
    if (count > tables.size())
        throw std::invalid_argument("range_decode: one table per symbol required");
    RangeDecoder dec(data);
    std::vector<int32_t> out(count);
    for (size_t i = 0; i < count; ++i) out[i] = dec.decode_symbol(*tables[i]);
    return out;
}

// ---------------------------------------------------------------------------
// bitstream container

namespace {
template <typename T>
void append(std::vector<uint8_t>& v, const T& x) {
    const auto* p = reinterpret_cast<const uint8_t*>(&x);
    v.insert(v.end(), p, p + sizeof(T));
}
template <typename T>
T read(const std::vector<uint8_t>& v, size_t& pos) {
    if (pos + sizeof(T) > v.size()) throw DecodeError("bitstream: truncated header");
    T x;
    std::memcpy(&x, v.data() + pos, sizeof(T));
    pos += sizeof(T);
    return x;
}
}  // namespace

std::vector<uint8_t> Bitstream::to_bytes() const {
    std::vector<uint8_t> v;
    v.insert(v.end(), kMagic, kMagic + 4);
    append<uint32_t>(v, kVersion);
    append<uint64_t>(v, model_checksum);
    append<double>(v, lambda);
    append<uint32_t>(v, image_h);
    append<uint32_t>(v, image_w);
    append<uint32_t>(v, y_c);
    append<uint32_t>(v, y_h);
    append<uint32_t>(v, y_w);
    append<uint32_t>(v, z_c);
    append<uint32_t>(v, z_h);
    append<uint32_t>(v, z_w);
    append<uint64_t>(v, payload_hyper.size());
    v.insert(v.end(), payload_hyper.begin(), payload_hyper.end());
    append<uint64_t>(v, payload_main.size());
    v.insert(v.end(), payload_main.begin(), payload_main.end());
    return v;
}

Bitstream Bitstream::from_bytes(const std::vector<uint8_t>& data) {
    if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0)
        throw UnsupportedFormatError("bitstream: bad magic");
    size_t pos = 4;
    const auto version = read<uint32_t>(data, pos);
    if (version != kVersion)
        throw UnsupportedFormatError("bitstream: unsupported version " + std::to_string(version));
    Bitstream bs;
    bs.model_checksum = read<uint64_t>(data, pos);
    bs.lambda = read<double>(data, pos);
    bs.image_h = read<uint32_t>(data, pos);
    bs.image_w = read<uint32_t>(data, pos);
    bs.y_c = read<uint32_t>(data, pos);
    bs.y_h = read<uint32_t>(data, pos);
    bs.y_w = read<uint32_t>(data, pos);
    bs.z_c = read<uint32_t>(data, pos);
    bs.z_h = read<uint32_t>(data, pos);
    bs.z_w = read<uint32_t>(data, pos);
    const auto nh = read<uint64_t>(data, pos);
    if (pos + nh > data.size()) throw DecodeError("bitstream: truncated hyper payload");
    bs.payload_hyper.assign(data.begin() + pos, data.begin() + pos + nh);
    pos += nh;
    const auto nm = read<uint64_t>(data, pos);
    if (pos + nm > data.size()) throw DecodeError("bitstream: truncated main payload");
    bs.payload_main.assign(data.begin() + pos, data.begin() + pos + nm);
    return bs;
}

size_t Bitstream::total_bits() const { return 8 * to_bytes().size(); }

// ---------------------------------------------------------------------------
// image coding

namespace {
// Model the symbols of one Gaussian element over mu +- 16 sigma; the final
// slot is an escape for the (practically impossible) tails.
CdfTable gaussian_table(double mu, double sigma) {
    int32_t lo = static_cast<int32_t>(std::floor(mu - 16.0 * sigma));
    int32_t hi = static_cast<int32_t>(std::ceil(mu + 16.0 * sigma));
    if (hi - lo > 60000) {  // keep tables bounded for absurd scales
        lo = static_cast<int32_t>(std::floor(mu)) - 30000;
        hi = static_cast<int32_t>(std::ceil(mu)) + 30000;
    }
    std::vector<double> probs(static_cast<size_t>(hi - lo + 1) + 1, 0.0);
    for (int32_t s = lo; s <= hi; ++s)
        probs[static_cast<size_t>(s - lo)] = gaussian_bin_prob(s, mu, sigma);
    // probs.back() == 0 -> escape keeps the minimum frequency
    return build_cdf(probs, 16, lo);
}

CdfTable prior_table(const FactorizedPrior& prior, int channel, int lo, int hi) {
    std::vector<double> probs(static_cast<size_t>(hi - lo + 1) + 1, 0.0);
    for (int s = lo; s <= hi; ++s) {
        double p = prior.cdf(channel, s + 0.5) - prior.cdf(channel, s - 0.5);
        probs[static_cast<size_t>(s - lo)] = p < 0.0 ? 0.0 : p;
    }
    return build_cdf(probs, 16, lo);
}

void encode_with_escape(RangeEncoder& enc, int32_t symbol, const CdfTable& table) {
    const int32_t escape = table.symbol_offset + table.symbol_count() - 1;
    if (symbol >= table.symbol_offset && symbol < escape) {
        enc.encode_symbol(symbol, table);
        return;
    }
    enc.encode_symbol(escape, table);
    const auto u = static_cast<uint32_t>(static_cast<int64_t>(symbol) + 0x80000000ll);
    enc.encode_symbol(static_cast<int32_t>(u >> 16), uniform16_table());
    enc.encode_symbol(static_cast<int32_t>(u & 0xFFFFu), uniform16_table());
}

int32_t decode_with_escape(RangeDecoder& dec, const CdfTable& table) {
    const int32_t escape = table.symbol_offset + table.symbol_count() - 1;
    const int32_t s = dec.decode_symbol(table);
    if (s < escape) return s;
    const auto hi = static_cast<uint32_t>(dec.decode_symbol(uniform16_table()));
    const auto lo = static_cast<uint32_t>(dec.decode_symbol(uniform16_table()));
    return static_cast<int32_t>(static_cast<int64_t>((hi << 16) | lo) - 0x80000000ll);
}
}  // namespace

Bitstream compress_image(CodecState& state, const Tensor& x, double lam) {
    if (x.n() != 1) throw std::invalid_argument("compress_image: expects a single image");
    if (!(lam > 0.0)) throw std::invalid_argument("compress_image: lambda must be > 0");
    const bool mod = state.cfg.modulator_enabled;
    const bool mean_scale = state.cfg.entropy_mode == EntropyMode::MeanScale;

    Tensor y = state.run_encoder(x, GatePass::Hard);
    Tensor y_mod = mod ? modulate(y, state.pair, lam) : y;
    Tensor z = state.run_hyper_encoder(y_mod, GatePass::Hard);
    Tensor z_hat = quantize(z, QuantMode::Eval);

    Bitstream bs;
    bs.model_checksum = state.checksum();
    bs.lambda = lam;
    bs.image_h = static_cast<uint32_t>(x.h());
    bs.image_w = static_cast<uint32_t>(x.w());
    bs.y_c = static_cast<uint32_t>(y.c());
    bs.y_h = static_cast<uint32_t>(y.h());
    bs.y_w = static_cast<uint32_t>(y.w());
    bs.z_c = static_cast<uint32_t>(z.c());
    bs.z_h = static_cast<uint32_t>(z.h());
    bs.z_w = static_cast<uint32_t>(z.w());

    // hyper payload under the factorized prior
    const auto support = state.prior.integer_support(1e-6);
    std::vector<CdfTable> ztables(state.prior.channels);
    for (int c = 0; c < state.prior.channels; ++c)
        ztables[c] = prior_table(state.prior, c, support[c].first, support[c].second);
    RangeEncoder zenc;
    for (int c = 0; c < z_hat.c(); ++c)
        for (int yy = 0; yy < z_hat.h(); ++yy)
            for (int xx = 0; xx < z_hat.w(); ++xx)
                encode_with_escape(zenc, static_cast<int32_t>(z_hat.at(0, c, yy, xx)),
                                   ztables[c]);
    bs.payload_hyper = zenc.finish();

    // main payload under Gaussian tables derived from the decoded hyper latent
    auto [scales_sp, means] = state.run_hyper_decoder(z_hat, y.h(), y.w(), GatePass::Hard);
    Tensor y_hat = quantize(y_mod, QuantMode::Eval);
    RangeEncoder yenc;
    for (size_t i = 0; i < y_hat.size(); ++i) {
        const double sigma = scales_sp[i] < kScaleFloor ? kScaleFloor : scales_sp[i];
        const double mu = mean_scale ? means[i] : 0.0;
        encode_with_escape(yenc, static_cast<int32_t>(y_hat[i]), gaussian_table(mu, sigma));
    }
    bs.payload_main = yenc.finish();
    return bs;
}

Tensor decompress_image(CodecState& state, const Bitstream& bs) {
    if (bs.model_checksum != state.checksum())
        throw WrongModelError("decompress_image: bitstream was produced by a different model");
    const bool mean_scale = state.cfg.entropy_mode == EntropyMode::MeanScale;

    const auto support = state.prior.integer_support(1e-6);
    std::vector<CdfTable> ztables(state.prior.channels);
    for (int c = 0; c < state.prior.channels; ++c)
        ztables[c] = prior_table(state.prior, c, support[c].first, support[c].second);
    RangeDecoder zdec(bs.payload_hyper);
    Tensor z_hat(1, static_cast<int>(bs.z_c), static_cast<int>(bs.z_h),
                 static_cast<int>(bs.z_w));
    for (int c = 0; c < z_hat.c(); ++c)
        for (int yy = 0; yy < z_hat.h(); ++yy)
            for (int xx = 0; xx < z_hat.w(); ++xx)
                z_hat.at(0, c, yy, xx) = decode_with_escape(zdec, ztables[c]);

    auto [scales_sp, means] = state.run_hyper_decoder(
        z_hat, static_cast<int>(bs.y_h), static_cast<int>(bs.y_w), GatePass::Hard);
    RangeDecoder ydec(bs.payload_main);
    Tensor y_hat(1, static_cast<int>(bs.y_c), static_cast<int>(bs.y_h),
                 static_cast<int>(bs.y_w));
    for (size_t i = 0; i < y_hat.size(); ++i) {
        const double sigma = scales_sp[i] < kScaleFloor ? kScaleFloor : scales_sp[i];
        const double mu = mean_scale ? means[i] : 0.0;
        y_hat[i] = decode_with_escape(ydec, gaussian_table(mu, sigma));
    }

    Tensor y_dec =
        state.cfg.modulator_enabled ? demodulate(y_hat, state.pair, bs.lambda) : y_hat;
    return state.run_decoder(y_dec, GatePass::Hard);
}

}  // namespace gcodec
