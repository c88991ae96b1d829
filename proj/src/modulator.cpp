// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/modulator.hpp"

#include <cmath>
#include <stdexcept>

namespace gcodec {

void ModulatorParams::init(int hidden_, int out_dim_, LambdaTransform t, Rng& rng) {
    if (hidden_ < 1) throw std::invalid_argument("ModulatorParams::init: hidden must be >= 1");
    if (out_dim_ < 1) throw std::invalid_argument("ModulatorParams::init: out_dim must be >= 1");
    hidden = hidden_;
    out_dim = out_dim_;
    lambda_transform = t;
    w1.assign(hidden, 0.0);
    b1.assign(hidden, 0.0);
    for (auto& v : w1) v = rng.uniform(-0.1, 0.1);
    for (auto& v : b1) v = rng.uniform(-0.1, 0.1);
    // zero output layer: bm(lambda) == 1 until trained
    w2.assign(static_cast<size_t>(out_dim) * hidden, 0.0);
    b2.assign(out_dim, 0.0);
    gw1.assign(w1.size(), 0.0);
    gb1.assign(b1.size(), 0.0);
    gw2.assign(w2.size(), 0.0);
    gb2.assign(b2.size(), 0.0);
}

std::vector<ParamView> ModulatorParams::params(const std::string& prefix) {
    return {{prefix + ".w1", &w1, &gw1},
            {prefix + ".b1", &b1, &gb1},
            {prefix + ".w2", &w2, &gw2},
            {prefix + ".b2", &b2, &gb2}};
}

void ModulatorPair::init(int hidden, int out_dim, LambdaTransform t, bool tied, Rng& rng) {
    tied_reciprocal = tied;
    bm.init(hidden, out_dim, t, rng);
    ibm.init(hidden, out_dim, t, rng);
}

std::vector<ParamView> ModulatorPair::params(const std::string& prefix) {
    auto out = bm.params(prefix + ".bm");
    if (!tied_reciprocal) {
        auto inv = ibm.params(prefix + ".ibm");
        out.insert(out.end(), inv.begin(), inv.end());
    }
    return out;
}

ModulatorTrace modulation_vector(const ModulatorParams& p, double lam) {
    if (!(lam > 0.0)) throw std::invalid_argument("modulation_vector: lambda must be > 0");
    ModulatorTrace tr;
    tr.t = p.lambda_transform == LambdaTransform::Log ? std::log(lam) : lam;
    tr.f1.resize(p.hidden);
    for (int i = 0; i < p.hidden; ++i) {
        const double z = p.w1[i] * tr.t + p.b1[i];
        tr.f1[i] = z > 0.0 ? z : 0.0;
    }
    tr.vec.resize(p.out_dim);
    for (int c = 0; c < p.out_dim; ++c) {
        double z = p.b2[c];
        const double* row = p.w2.data() + static_cast<size_t>(c) * p.hidden;
        for (int i = 0; i < p.hidden; ++i) z += row[i] * tr.f1[i];
        tr.vec[c] = std::exp(z);
    }
    return tr;
}

void modulation_vector_backward(ModulatorParams& p, const ModulatorTrace& tr,
                                const std::vector<double>& gvec) {
    std::vector<double> df1(p.hidden, 0.0);
    for (int c = 0; c < p.out_dim; ++c) {
        const double dz = gvec[c] * tr.vec[c];  // d exp
        p.gb2[c] += dz;
        double* grow = p.gw2.data() + static_cast<size_t>(c) * p.hidden;
        const double* row = p.w2.data() + static_cast<size_t>(c) * p.hidden;
        for (int i = 0; i < p.hidden; ++i) {
            grow[i] += dz * tr.f1[i];
            df1[i] += dz * row[i];
        }
    }
    for (int i = 0; i < p.hidden; ++i) {
        if (tr.f1[i] <= 0.0) continue;  // relu
        p.gw1[i] += df1[i] * tr.t;
        p.gb1[i] += df1[i];
    }
}

Tensor scale_channels(const Tensor& y, const std::vector<double>& v) {
    if (static_cast<size_t>(y.c()) != v.size())
        throw std::invalid_argument("scale_channels: channel mismatch");
    Tensor out = y;
    const int hw = y.pixels();
    for (int i = 0; i < y.n(); ++i)
        for (int c = 0; c < y.c(); ++c) {
            double* q = out.data() + (static_cast<size_t>(i) * y.c() + c) * hw;
            for (int s = 0; s < hw; ++s) q[s] *= v[c];
        }
    return out;
}

std::vector<double> scale_channels_grad_vec(const Tensor& y, const Tensor& gy) {
    check_same_shape(y, gy, "scale_channels_grad_vec");
    std::vector<double> gv(y.c(), 0.0);
    const int hw = y.pixels();
    for (int i = 0; i < y.n(); ++i)
        for (int c = 0; c < y.c(); ++c) {
            const double* a = y.data() + (static_cast<size_t>(i) * y.c() + c) * hw;
            const double* g = gy.data() + (static_cast<size_t>(i) * y.c() + c) * hw;
            double s = 0.0;
            for (int q = 0; q < hw; ++q) s += a[q] * g[q];
            gv[c] += s;
        }
    return gv;
}

Tensor modulate(const Tensor& y, const ModulatorPair& pair, double lam) {
    return scale_channels(y, modulation_vector(pair.bm, lam).vec);
}

std::vector<double> inverse_vector(const ModulatorPair& pair, double lam) {
    if (pair.tied_reciprocal) {
        auto v = modulation_vector(pair.bm, lam).vec;
        for (auto& x : v) x = 1.0 / x;
        return v;
    }
    return modulation_vector(pair.ibm, lam).vec;
}

Tensor demodulate(const Tensor& y_mod, const ModulatorPair& pair, double lam) {
    return scale_channels(y_mod, inverse_vector(pair, lam));
}

}  // namespace gcodec
