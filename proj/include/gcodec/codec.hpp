// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gcodec/common.hpp"
#include "gcodec/entropy.hpp"
#include "gcodec/gating.hpp"
#include "gcodec/layers.hpp"
#include "gcodec/modulator.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

enum class EntropyMode { ScaleOnly, MeanScale };
enum class GatePass { Off, Hard, Soft };

// Desk-scale widths. The reference architectures use 128-320 channels; all
// claims here are tested relatively (gated vs ungated twins), so small widths
// keep training in the minutes range.
struct CodecConfig {
    int image_channels = 3;
    int base_channels = 32;    // N
    int latent_channels = 48;  // M
    EntropyMode entropy_mode = EntropyMode::ScaleOnly;
    std::string nonlinearity = "silu";
    bool gate_every_layer_except_first = true;  // 10 gates when true, 0 when false
    bool modulator_enabled = true;
    double epsilon = 4.0;  // soft-gate temperature
    int modulator_hidden = 64;
    bool modulator_log_lambda = true;
    bool tied_reciprocal = false;
};

bool operator==(const CodecConfig& a, const CodecConfig& b);

// One conv layer's activations kept for the backward pass.
struct ConvStep {
    Tensor in;    // tensor the conv consumed (post-gate when gated)
    Tensor pre;   // conv output before the nonlinearity
    Tensor out;   // after the nonlinearity (== pre on final layers)
    GateOutput gate;
    bool gated = false;
};

// Everything the train-mode backward needs.
struct Trace {
    GatePass gates = GatePass::Off;
    bool modulator = false;
    double lam = 0.0;
    Tensor x;
    std::array<ConvStep, 4> enc;
    Tensor y;
    ModulatorTrace bm_tr;
    Tensor y_mod, y_hat;
    std::array<ConvStep, 3> henc;
    Tensor z, z_hat;
    std::array<ConvStep, 3> hdec;
    Tensor scales_sp;  // softplus(raw), cropped to y's grid, not floored
    Tensor scales_raw;
    Tensor means;  // empty in scale_only mode
    Tensor p_main, p_hyper;
    ModulatorTrace ibm_tr;
    Tensor y_dec;
    std::array<ConvStep, 4> dec;
    Tensor x_hat;
};

struct ForwardResult {
    Tensor reconstruction;
    double rate_bits_main = 0.0;   // total over the batch
    double rate_bits_hyper = 0.0;
    std::vector<double> gate_sparsity;  // per gate, 1 - mean(mask)
    std::vector<Tensor> gate_masks;     // per gate, (n, c, 1, 1)
    Tensor y_mod;
    std::vector<int32_t> y_symbols, z_symbols;  // eval mode only
    int y_c = 0, y_h = 0, y_w = 0;
    int z_c = 0, z_h = 0, z_w = 0;
    long scale_clamped = 0;  // scales that hit the floor (diagnostic)
};

struct ForwardOptions {
    QuantMode quant = QuantMode::Eval;
    GatePass gates = GatePass::Hard;
    bool modulator = true;
    double lam = 0.01;
    uint64_t noise_seed = 0;  // train mode only
};

// MAC-grid geometry of one conv layer (output grid for convs, input grid for
// transposed convs), used by the FLOP ledger.
struct LayerGeom {
    std::string name;
    int c_in = 0, c_out = 0, k = 0;
    int grid_h = 0, grid_w = 0;
    int gate_index = -1;  // -1 for the four ungated layers
};

class CodecState {
public:
    CodecConfig cfg;
    Act act = Act::Silu;

    // main encoder / hyper encoder / hyper decoder / main decoder
    std::array<Conv2d, 4> enc;
    std::array<Conv2d, 3> henc;
    ConvTranspose2d hdec0, hdec1;
    Conv2d hdec2;
    std::array<ConvTranspose2d, 4> dec;
    // gate order: enc1..3, henc1..2, hdec1..2, dec1..3
    std::vector<GateParams> gates;
    ModulatorPair pair;
    FactorizedPrior prior;

    // All learnable tensors in serialization order.
    std::vector<ParamView> params();
    void zero_grads();
    size_t parameter_count();

    // Pipeline blocks (shared by forward, compress and decompress).
    Tensor run_encoder(const Tensor& x, GatePass gp, std::array<ConvStep, 4>* tr = nullptr,
                       std::vector<double>* sparsity = nullptr,
                       std::vector<Tensor>* masks = nullptr) const;
    Tensor run_hyper_encoder(const Tensor& y_mod, GatePass gp,
                             std::array<ConvStep, 3>* tr = nullptr,
                             std::vector<double>* sparsity = nullptr,
                             std::vector<Tensor>* masks = nullptr) const;
    // returns (scales_softplus, means); means empty in scale_only mode
    std::pair<Tensor, Tensor> run_hyper_decoder(const Tensor& z_hat, int y_h, int y_w,
                                                GatePass gp,
                                                std::array<ConvStep, 3>* tr = nullptr,
                                                Tensor* scales_raw = nullptr,
                                                std::vector<double>* sparsity = nullptr,
                                                std::vector<Tensor>* masks = nullptr) const;
    Tensor run_decoder(const Tensor& y_dec, GatePass gp, std::array<ConvStep, 4>* tr = nullptr,
                       std::vector<double>* sparsity = nullptr,
                       std::vector<Tensor>* masks = nullptr) const;

    ForwardResult forward(const Tensor& x, const ForwardOptions& opts,
                          Trace* trace = nullptr) const;

    // Accumulates gradients of
    //   w_rate_per_bit * (rate_bits_main + rate_bits_hyper) + w_dist * MSE(x, x_hat)
    // into every parameter. Requires a train-mode trace. The calling code is
    // responsible for zero_grads() and for the sparsity-penalty term.
    void backward(const Trace& tr, double w_rate_per_bit, double w_dist);

    // Resolves the gate pass actually applied given the config.
    GatePass effective_gate_pass(GatePass requested) const;

    std::vector<LayerGeom> layer_table(int img_h, int img_w) const;

    uint64_t checksum();
};

// Deterministic initialization; zero-initialized modulator output layers and
// zero alpha keep a fresh codec bit-exact equal to the plain baseline.
CodecState build_codec(const CodecConfig& cfg, uint64_t seed);

// Self-describing checkpoint container; round-trips bit-exactly.
void save_checkpoint(CodecState& state, const std::string& path);
CodecState load_checkpoint(const std::string& path);
void serialize_params(CodecState& state, std::vector<unsigned char>& out);

}  // namespace gcodec
