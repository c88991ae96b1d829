// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gcodec/common.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

// Pointwise nonlinearity used in place of the original codecs' GDN.
// "silu" (x * sigmoid(x), a smooth ramp) is the default; relu is kept for
// ablations even though its kink spoils finite-difference checks.
enum class Act { Identity, Relu, Silu, Softplus };

Act act_from_name(const std::string& name);
std::string act_name(Act a);

Tensor act_forward(const Tensor& x, Act a);
// gx = gy * f'(x)
Tensor act_backward(const Tensor& x, const Tensor& gy, Act a);

// Strided 2-D convolution, weights (out_ch, in_ch, k, k) flattened row-major.
// Forward/backward use im2col plus a GEMM.
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
    std::vector<double> w, b;    // values
    std::vector<double> gw, gb;  // gradient accumulators

    void init(int in_channels, int out_channels, int kernel, int stride_, int pad_, Rng& rng);
    int out_dim(int in) const { return (in + 2 * pad - k) / stride + 1; }

    Tensor forward(const Tensor& x) const;
    // Accumulates gw/gb, returns gradient w.r.t. x. Needs the forward input.
    Tensor backward(const Tensor& x, const Tensor& gy);

    std::vector<ParamView> params(const std::string& prefix);
};

// Transposed convolution; weights (in_ch, out_ch, k, k) flattened row-major.
// out = (in - 1) * stride - 2 * pad + k + output_pad
struct ConvTranspose2d {
    int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0, output_pad = 0;
    std::vector<double> w, b;
    std::vector<double> gw, gb;

    void init(int in_channels, int out_channels, int kernel, int stride_, int pad_,
              int output_pad_, Rng& rng);
    int out_dim(int in) const { return (in - 1) * stride - 2 * pad + k + output_pad; }

    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& gy);

    std::vector<ParamView> params(const std::string& prefix);
};

}  // namespace gcodec
