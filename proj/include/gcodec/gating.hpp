// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gcodec/common.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

enum class GateMode { Train, Eval };

// Energy-based channel gate. Pools the squared input per channel, mixes
// neighbour channels with a shared bias-free 1-D convolution, squashes to an
// importance vector, and zeroes channels whose pooled energy falls below the
// learned threshold importance * alpha.
struct GateParams {
    std::vector<double> alpha;     // per input channel, init 0 (identity gate)
    std::vector<double> conv1d_w;  // shared across channels, length kernel_size
    double epsilon = 4.0;          // surrogate sigmoid temperature
    int kernel_size = 1;

    std::vector<double> g_alpha, g_conv1d_w;

    void init(int channels, double eps, Rng& rng);
    int channels() const { return static_cast<int>(alpha.size()); }
    std::vector<ParamView> params(const std::string& prefix);
};

struct GateOutput {
    Tensor masked_input;  // x * mask, channel-broadcast
    Tensor mask;          // (n, c, 1, 1); binary in eval mode, soft in train mode
    Tensor importance;    // (n, c, 1, 1), entries in (0, 1)
    double sparsity = 0.0;  // eval mode: fraction of zeroed (sample, channel) pairs

    // retained for the backward pass
    Tensor energy;    // (n, c, 1, 1) spatially pooled x^2
    Tensor conv_out;  // (n, c, 1, 1) pre-sigmoid neighbour mix
    GateMode mode = GateMode::Eval;
};

// Gradients produced by the gate backward pass.
struct GateGrads {
    Tensor gx;
    std::vector<double> g_alpha;
    std::vector<double> g_conv1d_w;
};

// k = nearest odd integer >= 1 to |log2(channels) / 2 + 1/2|, half-way cases
// rounded down (the cited channel-attention default).
int adaptive_kernel_size(int channels);

// Spatial mean of x^2 per (sample, channel).
Tensor pooled_energy(const Tensor& x);

// omega = sigmoid(conv1d(pooled_energy(x))), zero-padded by (k-1)/2.
Tensor importance_vector(const Tensor& x, const GateParams& p);

// 1 where u >= 0, else 0.
Tensor hard_gate(const Tensor& u);
// 1 / (1 + exp(-epsilon * u))
Tensor soft_gate(const Tensor& u, double epsilon);

GateOutput apply_gate(const Tensor& x, const GateParams& p, GateMode mode);

// Train-mode backward: d(sum(gy * masked_input))/d{x, alpha, conv1d_w}.
GateGrads apply_gate_backward(const Tensor& x, const GateParams& p, const GateOutput& out,
                              const Tensor& gy);

// Fraction of gated-off (sample, channel) pairs; requires a binary mask.
double measure_sparsity(const GateOutput& g);

}  // namespace gcodec
