// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcodec/codec.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

// Lossless reporting cap for PSNR (MSE == 0).
inline constexpr double kPsnrCap = 100.0;

// -10 log10(MSE) on [0,1]-scaled images, capped at 100 dB.
double psnr(const Tensor& x, const Tensor& x_hat);

double bits_per_pixel(double total_bits, int width, int height);

// Convolution cost with the 1 MAC = 2 FLOPs convention.
uint64_t conv_flops(int c_in, int c_out, int k, int h_out, int w_out);

struct FlopLedgerEntry {
    std::string layer;
    uint64_t baseline_flops = 0;
    double effective_flops = 0.0;   // baseline * mean active input fraction
    double input_channels_active = 1.0;  // mean fraction over the batch
    int grid_h = 0, grid_w = 0;
    bool gated = false;
};

struct FlopLedger {
    std::vector<FlopLedgerEntry> entries;
    uint64_t baseline_total = 0;
    double effective_total = 0.0;
    double flop_weighted_sparsity = 0.0;  // over gated layers only

    double reduction() const;
    std::string table() const;  // printable per-layer table
};

// Per-layer effective FLOPs: a gated-off input channel removes its share of
// the consuming layer's MACs. Masks are eval-mode (binary), one (n, c, 1, 1)
// tensor per gate in the layer_table order.
FlopLedger effective_flops(const std::vector<LayerGeom>& layers,
                           const std::vector<Tensor>& gate_masks);

// baseline / effective
double flop_reduction(double baseline, double effective);

struct StorageReport {
    std::vector<size_t> per_model_bytes;
    size_t fixed_total_bytes = 0;     // sum over the fixed-rate set
    size_t variable_rate_bytes = 0;   // the single variable-rate model
    double saving = 0.0;              // 1 - variable / fixed_total
};

// states[0] is the variable-rate model, the rest are the fixed-rate set it
// replaces. Bytes are counted from the serialized parameters.
StorageReport storage_report(std::vector<CodecState*> states);

struct RDRecord {
    std::string image;
    double lambda = 0.0;
    double bpp = 0.0;
    double psnr_db = 0.0;
    double sparsity = 0.0;  // FLOP-weighted over gated layers
};

struct RDReport {
    std::vector<RDRecord> records;
    double lambda = 0.0;
    size_t model_storage_bytes = 0;
    double flop_reduction_ratio = 1.0;

    double mean_bpp() const;
    double mean_psnr() const;
};

// Line-oriented CSV with a fixed header; parses back losslessly.
std::string rd_records_to_csv(const std::vector<RDRecord>& records);
std::vector<RDRecord> rd_records_from_csv(const std::string& csv);

}  // namespace gcodec
