// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gcodec/common.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

enum class QuantMode { Train, Eval };

// Train mode adds i.i.d. uniform noise on (-1/2, 1/2); eval mode rounds to
// the nearest integer. The noise tensor is drawn from rng so a frozen seed
// reproduces the exact surrogate (finite-difference checks rely on this).
Tensor quantize(const Tensor& y, QuantMode mode, Rng* rng = nullptr);

inline constexpr double kScaleFloor = 0.11;
inline constexpr double kProbFloor = 1e-9;

// Probability of the unit bin around v under N(mu, sigma^2):
// Phi((v - mu + 1/2) / sigma) - Phi((v - mu - 1/2) / sigma).
// sigma must already be floored. Not clamped to the probability floor.
double gaussian_bin_prob(double v, double mu, double sigma);

// d(bin prob) w.r.t. v, mu and sigma.
void gaussian_bin_prob_grad(double v, double mu, double sigma, double* dv, double* dmu,
                            double* dsigma);

// Elementwise bin probabilities with means = 0 when means is empty
// (scale_only mode). Scales below the floor are clamped; the count of
// clamped entries is reported through clamped if non-null. Probabilities
// are floored at kProbFloor.
Tensor likelihood_main(const Tensor& yhat, const Tensor& scales, const Tensor* means,
                       long* clamped = nullptr);

// Fully factorized learned prior for the hyper latent: per channel a
// monotone CDF built from softplus-weighted layers with tanh mixing and a
// final sigmoid. likelihood(v) = cdf(v + 1/2) - cdf(v - 1/2).
struct FactorizedPrior {
    int channels = 0;
    std::vector<int> dims;  // e.g. {1, 3, 3, 1}
    // per layer k: h[k] is channels x dims[k+1] x dims[k] (raw, softplus
    // applied on use), bias[k] is channels x dims[k+1], factor[k] likewise
    // (absent for the last layer).
    std::vector<std::vector<double>> h, bias, factor;
    std::vector<std::vector<double>> gh, gbias, gfactor;

    void init(int channels_, Rng& rng, double init_scale = 2.5,
              std::vector<int> hidden = {3, 3});

    int layer_count() const { return static_cast<int>(dims.size()) - 1; }

    // CDF at x for one channel; monotone nondecreasing in x by construction.
    double cdf(int ch, double x) const;

    // CDF plus d(cdf)/dx; when weight != 0 also accumulates
    // weight * d(cdf)/d(param) into the gradient arrays.
    double cdf_with_grad(int ch, double x, double weight, double* dx);

    // Floored bin probabilities for an (n, C, h, w) tensor.
    Tensor likelihood(const Tensor& zhat) const;

    // Accumulates parameter grads and returns d/d(zhat) given d(loss)/d(prob).
    // Entries whose probability was floored contribute no gradient.
    Tensor likelihood_backward(const Tensor& zhat, const Tensor& gprob);

    // Smallest integer range [lo, hi] per channel whose tail mass on each
    // side is below tail_mass. Used to build coder tables.
    std::vector<std::pair<int, int>> integer_support(double tail_mass = 1e-6) const;

    std::vector<ParamView> params(const std::string& prefix);
};

}  // namespace gcodec
