// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace gcodec {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

Act act_from_name(const std::string& name) {
    if (name == "identity") return Act::Identity;
    if (name == "relu") return Act::Relu;
    if (name == "silu") return Act::Silu;
    if (name == "softplus") return Act::Softplus;
    throw std::invalid_argument("unknown nonlinearity: " + name);
}

std::string act_name(Act a) {
    switch (a) {
        case Act::Identity: return "identity";
        case Act::Relu: return "relu";
        case Act::Silu: return "silu";
        case Act::Softplus: return "softplus";
    }
    return "identity";
}

static inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor act_forward(const Tensor& x, Act a) {
    Tensor y = x;
    switch (a) {
        case Act::Identity:
            break;
        case Act::Relu:
            for (size_t i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
            break;
        case Act::Silu:
            for (size_t i = 0; i < y.size(); ++i) y[i] = y[i] * sigmoid(y[i]);
            break;
        case Act::Softplus:
            for (size_t i = 0; i < y.size(); ++i) {
                const double v = y[i];
                y[i] = v > 30.0 ? v : std::log1p(std::exp(v));
            }
            break;
    }
    return y;
}

Tensor act_backward(const Tensor& x, const Tensor& gy, Act a) {
    check_same_shape(x, gy, "act_backward");
    Tensor gx = gy;
    switch (a) {
        case Act::Identity:
            break;
        case Act::Relu:
            for (size_t i = 0; i < gx.size(); ++i)
                if (x[i] <= 0.0) gx[i] = 0.0;
            break;
        case Act::Silu:
            for (size_t i = 0; i < gx.size(); ++i) {
                const double s = sigmoid(x[i]);
                gx[i] *= s * (1.0 + x[i] * (1.0 - s));
            }
            break;
        case Act::Softplus:
            for (size_t i = 0; i < gx.size(); ++i) gx[i] *= sigmoid(x[i]);
            break;
    }
    return gx;
}

// col buffer layout: (in_ch * k * k) rows, (oh * ow) columns.
static void im2col(const Tensor& x, int item, int k, int stride, int pad, int oh, int ow,
                   std::vector<double>& col) {
    const int c = x.c(), h = x.h(), w = x.w();
    col.assign(static_cast<size_t>(c) * k * k * oh * ow, 0.0);
    size_t r = 0;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++r) {
                double* dst = col.data() + r * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= w) continue;
                        dst[oy * ow + ox] = x.at(item, ci, iy, ix);
                    }
                }
            }
        }
    }
}

// Scatter-add of a col buffer back onto the (c, h, w) image grid.
static void col2im_add(const std::vector<double>& col, int item, int k, int stride, int pad,
                       int oh, int ow, Tensor& x) {
    const int c = x.c(), h = x.h(), w = x.w();
    size_t r = 0;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++r) {
                const double* src = col.data() + r * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= w) continue;
                        x.at(item, ci, iy, ix) += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

static void uniform_fan_in_init(std::vector<double>& w, std::vector<double>& b, int fan_in,
                                Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : w) v = rng.uniform(-bound, bound);
    for (auto& v : b) v = rng.uniform(-bound, bound);
}

void Conv2d::init(int in_channels, int out_channels, int kernel, int stride_, int pad_,
                  Rng& rng) {
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0)
        throw std::invalid_argument("Conv2d: bad channel/kernel counts");
    in_ch = in_channels;
    out_ch = out_channels;
    k = kernel;
    stride = stride_;
    pad = pad_;
    w.assign(static_cast<size_t>(out_ch) * in_ch * k * k, 0.0);
    b.assign(out_ch, 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
    uniform_fan_in_init(w, b, in_ch * k * k, rng);
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.c() != in_ch) throw std::invalid_argument("Conv2d::forward: channel mismatch");
    const int oh = out_dim(x.h()), ow = out_dim(x.w());
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("Conv2d::forward: output underflow");
    Tensor y(x.n(), out_ch, oh, ow);
    const CMapM W(w.data(), out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n(); ++i) {
        std::vector<double> col;
        im2col(x, i, k, stride, pad, oh, ow, col);
        const CMapM C(col.data(), static_cast<Eigen::Index>(in_ch) * k * k,
                      static_cast<Eigen::Index>(oh) * ow);
        MapM Y(y.data() + static_cast<size_t>(i) * out_ch * oh * ow, out_ch,
               static_cast<Eigen::Index>(oh) * ow);
        Y.noalias() = W * C;
        for (int oc = 0; oc < out_ch; ++oc) Y.row(oc).array() += b[oc];
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& gy) {
    const int oh = gy.h(), ow = gy.w();
    Tensor gx(x.n(), x.c(), x.h(), x.w());
    const CMapM W(w.data(), out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
    // per-item weight-gradient scratch, reduced in item order afterwards so
    // the result does not depend on thread scheduling
    std::vector<std::vector<double>> gw_item(x.n());
    std::vector<std::vector<double>> gb_item(x.n());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n(); ++i) {
        std::vector<double> col, gcol(static_cast<size_t>(in_ch) * k * k * oh * ow);
        gw_item[i].assign(w.size(), 0.0);
        gb_item[i].assign(b.size(), 0.0);
        const CMapM GY(gy.data() + static_cast<size_t>(i) * out_ch * oh * ow, out_ch,
                       static_cast<Eigen::Index>(oh) * ow);
        im2col(x, i, k, stride, pad, oh, ow, col);
        const CMapM C(col.data(), static_cast<Eigen::Index>(in_ch) * k * k,
                      static_cast<Eigen::Index>(oh) * ow);
        MapM GWi(gw_item[i].data(), out_ch, static_cast<Eigen::Index>(in_ch) * k * k);
        GWi.noalias() = GY * C.transpose();
        for (int oc = 0; oc < out_ch; ++oc) gb_item[i][oc] = GY.row(oc).sum();
        MapM GC(gcol.data(), static_cast<Eigen::Index>(in_ch) * k * k,
                static_cast<Eigen::Index>(oh) * ow);
        GC.noalias() = W.transpose() * GY;
        col2im_add(gcol, i, k, stride, pad, oh, ow, gx);
    }
    for (int i = 0; i < x.n(); ++i) {
        for (size_t j = 0; j < w.size(); ++j) gw[j] += gw_item[i][j];
        for (size_t j = 0; j < b.size(); ++j) gb[j] += gb_item[i][j];
    }
    return gx;
}

std::vector<ParamView> Conv2d::params(const std::string& prefix) {
    return {{prefix + ".w", &w, &gw}, {prefix + ".b", &b, &gb}};
}

void ConvTranspose2d::init(int in_channels, int out_channels, int kernel, int stride_, int pad_,
                           int output_pad_, Rng& rng) {
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0)
        throw std::invalid_argument("ConvTranspose2d: bad channel/kernel counts");
    in_ch = in_channels;
    out_ch = out_channels;
    k = kernel;
    stride = stride_;
    pad = pad_;
    output_pad = output_pad_;
    w.assign(static_cast<size_t>(in_ch) * out_ch * k * k, 0.0);
    b.assign(out_ch, 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
    // fan-in of the equivalent forward conv
    uniform_fan_in_init(w, b, in_ch * k * k, rng);
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
    if (x.c() != in_ch) throw std::invalid_argument("ConvTranspose2d::forward: channel mismatch");
    const int oh = out_dim(x.h()), ow = out_dim(x.w());
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("ConvTranspose2d::forward: bad output");
    Tensor y(x.n(), out_ch, oh, ow);
    const int ihw = x.h() * x.w();
    const CMapM W(w.data(), in_ch, static_cast<Eigen::Index>(out_ch) * k * k);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n(); ++i) {
        std::vector<double> col(static_cast<size_t>(out_ch) * k * k * ihw);
        const CMapM X(x.data() + static_cast<size_t>(i) * in_ch * ihw, in_ch, ihw);
        MapM C(col.data(), static_cast<Eigen::Index>(out_ch) * k * k, ihw);
        C.noalias() = W.transpose() * X;
        // columns indexed by input pixels scatter onto the output grid; the
        // geometry is the mirror of a stride-s conv from y back to x
        col2im_add(col, i, k, stride, pad, x.h(), x.w(), y);
        for (int oc = 0; oc < out_ch; ++oc) {
            double* dst = y.data() + ((static_cast<size_t>(i) * out_ch + oc) * oh) * ow;
            for (int p = 0; p < oh * ow; ++p) dst[p] += b[oc];
        }
    }
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& x, const Tensor& gy) {
    const int ihw = x.h() * x.w();
    Tensor gx(x.n(), in_ch, x.h(), x.w());
    const CMapM W(w.data(), in_ch, static_cast<Eigen::Index>(out_ch) * k * k);
    std::vector<std::vector<double>> gw_item(x.n());
    std::vector<std::vector<double>> gb_item(x.n());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n(); ++i) {
        std::vector<double> gcol;
        gw_item[i].assign(w.size(), 0.0);
        gb_item[i].assign(b.size(), 0.0);
        // gradient of col2im is im2col on the output-side tensor
        im2col(gy, i, k, stride, pad, x.h(), x.w(), gcol);
        const CMapM GC(gcol.data(), static_cast<Eigen::Index>(out_ch) * k * k, ihw);
        MapM GX(gx.data() + static_cast<size_t>(i) * in_ch * ihw, in_ch, ihw);
        GX.noalias() = W * GC;
        const CMapM X(x.data() + static_cast<size_t>(i) * in_ch * ihw, in_ch, ihw);
        MapM GWi(gw_item[i].data(), in_ch, static_cast<Eigen::Index>(out_ch) * k * k);
        GWi.noalias() = X * GC.transpose();
        for (int oc = 0; oc < out_ch; ++oc) {
            const double* src =
                gy.data() + ((static_cast<size_t>(i) * out_ch + oc) * gy.h()) * gy.w();
            double s = 0.0;
            for (int p = 0; p < gy.h() * gy.w(); ++p) s += src[p];
            gb_item[i][oc] = s;
        }
    }
    for (int i = 0; i < x.n(); ++i) {
        for (size_t j = 0; j < w.size(); ++j) gw[j] += gw_item[i][j];
        for (size_t j = 0; j < b.size(); ++j) gb[j] += gb_item[i][j];
    }
    return gx;
}

std::vector<ParamView> ConvTranspose2d::params(const std::string& prefix) {
    return {{prefix + ".w", &w, &gw}, {prefix + ".b", &b, &gb}};
}

}  // namespace gcodec
