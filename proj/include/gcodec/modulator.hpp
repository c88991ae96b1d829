// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gcodec/common.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

enum class LambdaTransform { Raw, Log };

// Two-layer map from the trade-off factor to a positive channel-wise scaling
// vector: exp(w2 * relu(w1 * t(lambda) + b1) + b2). The exp output keeps every
// entry positive and widens the dynamic range. w2/b2 start at zero so a fresh
// modulator is an exact identity.
struct ModulatorParams {
    int hidden = 64;
    int out_dim = 0;  // latent channel count
    LambdaTransform lambda_transform = LambdaTransform::Log;
    std::vector<double> w1, b1;  // hidden x 1, hidden
    std::vector<double> w2, b2;  // out_dim x hidden, out_dim
    std::vector<double> gw1, gb1, gw2, gb2;

    void init(int hidden_, int out_dim_, LambdaTransform t, Rng& rng);
    std::vector<ParamView> params(const std::string& prefix);
};

struct ModulatorPair {
    ModulatorParams bm;
    ModulatorParams ibm;
    bool tied_reciprocal = false;  // ibm = 1 / bm, ibm weights unused

    void init(int hidden, int out_dim, LambdaTransform t, bool tied, Rng& rng);
    std::vector<ParamView> params(const std::string& prefix);
};

// Forward cache for one modulation_vector evaluation.
struct ModulatorTrace {
    double t = 0.0;           // transformed lambda
    std::vector<double> f1;   // hidden activations (post-relu)
    std::vector<double> vec;  // output vector, all entries > 0
};

ModulatorTrace modulation_vector(const ModulatorParams& p, double lam);

// Accumulates parameter gradients given d(loss)/d(vec).
void modulation_vector_backward(ModulatorParams& p, const ModulatorTrace& tr,
                                const std::vector<double>& gvec);

// y * bm(lambda), channel-wise broadcast.
Tensor modulate(const Tensor& y, const ModulatorPair& pair, double lam);
// y_mod * ibm(lambda) (reciprocal of bm when tied).
Tensor demodulate(const Tensor& y_mod, const ModulatorPair& pair, double lam);

// The vector demodulate() multiplies by.
std::vector<double> inverse_vector(const ModulatorPair& pair, double lam);

// Channel-broadcast product helpers shared with the codec backward pass.
Tensor scale_channels(const Tensor& y, const std::vector<double>& v);
// d(sum(gy * (y .* v)))/dv per channel.
std::vector<double> scale_channels_grad_vec(const Tensor& y, const Tensor& gy);

}  // namespace gcodec
