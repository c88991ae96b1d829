// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/entropy.hpp"

#include <cmath>
#include <stdexcept>

namespace gcodec {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
inline double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Tensor quantize(const Tensor& y, QuantMode mode, Rng* rng) {
    Tensor out = y;
    if (mode == QuantMode::Train) {
        if (!rng) throw std::invalid_argument("quantize: train mode needs an rng");
        for (size_t i = 0; i < out.size(); ++i) out[i] += rng->uniform() - 0.5;
    } else {
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::round(out[i]);
    }
    return out;
}

double gaussian_bin_prob(double v, double mu, double sigma) {
    // evaluate on the |v - mu| side so both CDF arguments sit in the same
    // (accurate) erfc tail
    const double d = std::abs(v - mu);
    const double a = (0.5 - d) / sigma;
    const double b = (-0.5 - d) / sigma;
    return std_normal_cdf(a) - std_normal_cdf(b);
}

void gaussian_bin_prob_grad(double v, double mu, double sigma, double* dv, double* dmu,
                            double* dsigma) {
    const double diff = v - mu;
    const double d = std::abs(diff);
    const double sign = diff < 0.0 ? -1.0 : 1.0;
    const double a = (0.5 - d) / sigma;
    const double b = (-0.5 - d) / sigma;
    const double pa = std_normal_pdf(a);
    const double pb = std_normal_pdf(b);
    const double dp_dd = (-pa + pb) / sigma;  // derivative w.r.t. |v - mu|
    if (dv) *dv = sign * dp_dd;
    if (dmu) *dmu = -sign * dp_dd;
    if (dsigma) *dsigma = (-a * pa + b * pb) / sigma;
}

Tensor likelihood_main(const Tensor& yhat, const Tensor& scales, const Tensor* means,
                       long* clamped) {
    check_same_shape(yhat, scales, "likelihood_main");
    if (means) check_same_shape(yhat, *means, "likelihood_main(means)");
    Tensor p = yhat;
    long nclamped = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        double s = scales[i];
        if (s < kScaleFloor) {
            s = kScaleFloor;
            ++nclamped;
        }
        const double mu = means ? (*means)[i] : 0.0;
        double prob = gaussian_bin_prob(yhat[i], mu, s);
        if (prob < kProbFloor) prob = kProbFloor;
        p[i] = prob;
    }
    if (clamped) *clamped = nclamped;
    return p;
}

void FactorizedPrior::init(int channels_, Rng& rng, double init_scale,
                           std::vector<int> hidden) {
    if (channels_ <= 0) throw std::invalid_argument("FactorizedPrior::init: channels must be > 0");
    channels = channels_;
    dims.clear();
    dims.push_back(1);
    for (int d : hidden) dims.push_back(d);
    dims.push_back(1);
    const int K = layer_count();
    h.assign(K, {});
    bias.assign(K, {});
    factor.assign(K > 1 ? K - 1 : 0, {});
    // spread the initial CDF over roughly +-init_scale
    const double scale = std::pow(init_scale, 1.0 / static_cast<double>(K));
    for (int k = 0; k < K; ++k) {
        const int din = dims[k], dout = dims[k + 1];
        const double hinit = std::log(std::expm1(1.0 / (scale * dout)));
        h[k].assign(static_cast<size_t>(channels) * dout * din, hinit);
        bias[k].resize(static_cast<size_t>(channels) * dout);
        for (auto& v : bias[k]) v = rng.uniform(-0.5, 0.5);
        if (k < K - 1) factor[k].assign(static_cast<size_t>(channels) * dout, 0.0);
    }
    gh.resize(K);
    gbias.resize(K);
    gfactor.resize(factor.size());
    for (int k = 0; k < K; ++k) {
        gh[k].assign(h[k].size(), 0.0);
        gbias[k].assign(bias[k].size(), 0.0);
        if (k < K - 1) gfactor[k].assign(factor[k].size(), 0.0);
    }
}

double FactorizedPrior::cdf(int ch, double x) const {
    const int K = layer_count();
    std::vector<double> u{x};
    for (int k = 0; k < K; ++k) {
        const int din = dims[k], dout = dims[k + 1];
        const double* H = h[k].data() + static_cast<size_t>(ch) * dout * din;
        const double* B = bias[k].data() + static_cast<size_t>(ch) * dout;
        std::vector<double> z(dout);
        for (int o = 0; o < dout; ++o) {
            double s = B[o];
            for (int i = 0; i < din; ++i) s += softplus(H[o * din + i]) * u[i];
            z[o] = s;
        }
        if (k < K - 1) {
            const double* A = factor[k].data() + static_cast<size_t>(ch) * dout;
            for (int o = 0; o < dout; ++o) z[o] += std::tanh(A[o]) * std::tanh(z[o]);
        }
        u = std::move(z);
    }
    return sigmoid(u[0]);
}

double FactorizedPrior::cdf_with_grad(int ch, double x, double weight, double* dx) {
    const int K = layer_count();
    // forward, keeping pre-activation z and input u of every layer
    std::vector<std::vector<double>> us(K + 1), zs(K);
    us[0] = {x};
    for (int k = 0; k < K; ++k) {
        const int din = dims[k], dout = dims[k + 1];
        const double* H = h[k].data() + static_cast<size_t>(ch) * dout * din;
        const double* B = bias[k].data() + static_cast<size_t>(ch) * dout;
        zs[k].resize(dout);
        us[k + 1].resize(dout);
        for (int o = 0; o < dout; ++o) {
            double s = B[o];
            for (int i = 0; i < din; ++i) s += softplus(H[o * din + i]) * us[k][i];
            zs[k][o] = s;
        }
        if (k < K - 1) {
            const double* A = factor[k].data() + static_cast<size_t>(ch) * dout;
            for (int o = 0; o < dout; ++o)
                us[k + 1][o] = zs[k][o] + std::tanh(A[o]) * std::tanh(zs[k][o]);
        } else {
            us[k + 1][0] = zs[k][0];
        }
    }
    const double logit = us[K][0];
    const double c = sigmoid(logit);

    // backward
    std::vector<double> du{c * (1.0 - c)};  // d(cdf)/d(logit)
    for (int k = K - 1; k >= 0; --k) {
        const int din = dims[k], dout = dims[k + 1];
        const double* H = h[k].data() + static_cast<size_t>(ch) * dout * din;
        std::vector<double> dz(dout);
        if (k < K - 1) {
            const double* A = factor[k].data() + static_cast<size_t>(ch) * dout;
            double* GA = gfactor[k].data() + static_cast<size_t>(ch) * dout;
            for (int o = 0; o < dout; ++o) {
                const double tz = std::tanh(zs[k][o]);
                const double ta = std::tanh(A[o]);
                dz[o] = du[o] * (1.0 + ta * (1.0 - tz * tz));
                if (weight != 0.0)
                    GA[o] += weight * du[o] * tz * (1.0 - ta * ta);
            }
        } else {
            dz[0] = du[0];
        }
        std::vector<double> dun(din, 0.0);
        double* GH = gh[k].data() + static_cast<size_t>(ch) * dout * din;
        double* GB = gbias[k].data() + static_cast<size_t>(ch) * dout;
        for (int o = 0; o < dout; ++o) {
            if (weight != 0.0) GB[o] += weight * dz[o];
            for (int i = 0; i < din; ++i) {
                const double hr = H[o * din + i];
                const double sp = softplus(hr);
                dun[i] += dz[o] * sp;
                if (weight != 0.0)
                    GH[o * din + i] += weight * dz[o] * us[k][i] * sigmoid(hr);
            }
        }
        du = std::move(dun);
    }
    if (dx) *dx = du[0];
    return c;
}

Tensor FactorizedPrior::likelihood(const Tensor& zhat) const {
    if (zhat.c() != channels)
        throw std::invalid_argument("FactorizedPrior::likelihood: channel mismatch");
    Tensor p = zhat;
    const int hw = zhat.pixels();
    for (int i = 0; i < zhat.n(); ++i)
        for (int c = 0; c < channels; ++c) {
            const size_t base = (static_cast<size_t>(i) * channels + c) * hw;
            for (int s = 0; s < hw; ++s) {
                const double v = zhat[base + s];
                double prob = cdf(c, v + 0.5) - cdf(c, v - 0.5);
                p[base + s] = prob < kProbFloor ? kProbFloor : prob;
            }
        }
    return p;
}

Tensor FactorizedPrior::likelihood_backward(const Tensor& zhat, const Tensor& gprob) {
    check_same_shape(zhat, gprob, "FactorizedPrior::likelihood_backward");
    Tensor gz(zhat.n(), zhat.c(), zhat.h(), zhat.w());
    const int hw = zhat.pixels();
    for (int i = 0; i < zhat.n(); ++i)
        for (int c = 0; c < channels; ++c) {
            const size_t base = (static_cast<size_t>(i) * channels + c) * hw;
            for (int s = 0; s < hw; ++s) {
                const double v = zhat[base + s];
                const double g = gprob[base + s];
                // skip floored entries: same policy as the scale clamp
                if (cdf(c, v + 0.5) - cdf(c, v - 0.5) < kProbFloor) continue;
                double dhi = 0.0, dlo = 0.0;
                cdf_with_grad(c, v + 0.5, g, &dhi);
                cdf_with_grad(c, v - 0.5, -g, &dlo);
                gz[base + s] = g * (dhi - dlo);
            }
        }
    return gz;
}

std::vector<std::pair<int, int>> FactorizedPrior::integer_support(double tail_mass) const {
    std::vector<std::pair<int, int>> out(channels);
    constexpr int kMaxAbs = 1 << 14;
    for (int c = 0; c < channels; ++c) {
        int lo = 0;
        while (lo > -kMaxAbs && cdf(c, lo - 0.5) > tail_mass) --lo;
        int hi = 0;
        while (hi < kMaxAbs && 1.0 - cdf(c, hi + 0.5) > tail_mass) ++hi;
        out[c] = {lo, hi};
    }
    return out;
}

std::vector<ParamView> FactorizedPrior::params(const std::string& prefix) {
    std::vector<ParamView> out;
    for (int k = 0; k < layer_count(); ++k) {
        out.push_back({prefix + ".h" + std::to_string(k), &h[k], &gh[k]});
        out.push_back({prefix + ".b" + std::to_string(k), &bias[k], &gbias[k]});
        if (k < layer_count() - 1)
            out.push_back({prefix + ".a" + std::to_string(k), &factor[k], &gfactor[k]});
    }
    return out;
}

}  // namespace gcodec
