// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcodec/codec.hpp"
#include "gcodec/common.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

// Integer cumulative-frequency table over the contiguous symbol range
// [symbol_offset, symbol_offset + n - 1]. cdf has n + 1 entries with
// cdf[0] = 0 and cdf[n] = 2^precision; every in-range symbol keeps a
// nonzero frequency.
struct CdfTable {
    int32_t symbol_offset = 0;
    int precision = 16;
    std::vector<uint32_t> cdf;

    int symbol_count() const { return static_cast<int>(cdf.size()) - 1; }
    bool contains(int32_t symbol) const {
        return symbol >= symbol_offset && symbol < symbol_offset + symbol_count();
    }
};

// Integer frequencies proportional to the probabilities, each >= 1, summing
// exactly to 2^precision.
CdfTable build_cdf(const std::vector<double>& probabilities, int precision = 16,
                   int32_t symbol_offset = 0);

// Byte-oriented range coder (carry-propagating, 32-bit range). Encode and
// decode are integer-only and deterministic across platforms.
class RangeEncoder {
public:
    void encode(uint32_t cum, uint32_t freq, uint32_t total_bits);
    void encode_symbol(int32_t symbol, const CdfTable& table);
    std::vector<uint8_t> finish();

private:
    void shift_low();
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t cache_size_ = 1;
    std::vector<uint8_t> out_;
};

class RangeDecoder {
public:
    explicit RangeDecoder(const std::vector<uint8_t>& data);
    uint32_t decode_freq(uint32_t total_bits);
    void consume(uint32_t cum, uint32_t freq, uint32_t total_bits);
    int32_t decode_symbol(const CdfTable& table);

private:
    uint8_t next_byte();
    const std::vector<uint8_t>& data_;
    size_t pos_ = 0;
    uint64_t code_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
};

// Convenience pair used by the tests: one table reference per symbol.
std::vector<uint8_t> range_encode(const std::vector<int32_t>& symbols,
                                  const std::vector<const CdfTable*>& tables);
std::vector<int32_t> range_decode(const std::vector<uint8_t>& data,
                                  const std::vector<const CdfTable*>& tables, size_t count);

// Self-describing bitstream container. The header pins everything the
// decoder needs besides the checkpoint itself.
struct Bitstream {
    static constexpr char kMagic[4] = {'G', 'C', 'V', '1'};
    static constexpr uint32_t kVersion = 1;
    uint64_t model_checksum = 0;
    double lambda = 0.0;
    uint32_t image_h = 0, image_w = 0;
    uint32_t y_c = 0, y_h = 0, y_w = 0;
    uint32_t z_c = 0, z_h = 0, z_w = 0;
    std::vector<uint8_t> payload_hyper, payload_main;

    std::vector<uint8_t> to_bytes() const;
    static Bitstream from_bytes(const std::vector<uint8_t>& data);
    size_t total_bits() const;
};

// Real entropy coding of one image (batch of one). Hyper symbols go under
// the factorized prior; main symbols under Gaussian tables rebuilt from the
// decoded hyper latent, so encode and decode see identical tables.
Bitstream compress_image(CodecState& state, const Tensor& x, double lam);
Tensor decompress_image(CodecState& state, const Bitstream& bs);

}  // namespace gcodec
