// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/gating.hpp"

#include <cmath>
#include <stdexcept>

namespace gcodec {

static inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int adaptive_kernel_size(int channels) {
    if (channels <= 0) throw std::invalid_argument("adaptive_kernel_size: channels must be > 0");
    const double v = std::abs(std::log2(static_cast<double>(channels)) / 2.0 + 0.5);
    int lo = static_cast<int>(std::floor(v));
    if (lo % 2 == 0) --lo;  // largest odd <= v
    if (lo < 1) lo = 1;
    const int hi = lo + 2;
    // ties go down
    return (hi - v < v - lo) ? hi : lo;
}

void GateParams::init(int channels, double eps, Rng& rng) {
    if (channels <= 0) throw std::invalid_argument("GateParams::init: channels must be > 0");
    if (eps <= 0.0) throw std::invalid_argument("GateParams::init: epsilon must be > 0");
    kernel_size = adaptive_kernel_size(channels);
    epsilon = eps;
    alpha.assign(channels, 0.0);
    conv1d_w.assign(kernel_size, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel_size));
    for (auto& v : conv1d_w) v = rng.uniform(-bound, bound);
    g_alpha.assign(channels, 0.0);
    g_conv1d_w.assign(kernel_size, 0.0);
}

std::vector<ParamView> GateParams::params(const std::string& prefix) {
    return {{prefix + ".alpha", &alpha, &g_alpha},
            {prefix + ".conv1d_w", &conv1d_w, &g_conv1d_w}};
}

Tensor pooled_energy(const Tensor& x) {
    Tensor e(x.n(), x.c(), 1, 1);
    const double inv = 1.0 / static_cast<double>(x.pixels());
    for (int i = 0; i < x.n(); ++i)
        for (int c = 0; c < x.c(); ++c) {
            const double* p = x.data() + ((static_cast<size_t>(i) * x.c() + c) * x.pixels());
            double s = 0.0;
            for (int q = 0; q < x.pixels(); ++q) s += p[q] * p[q];
            e.at(i, c, 0, 0) = s * inv;
        }
    return e;
}

// 1-D conv across the channel axis, zero padding (k-1)/2, no bias.
static Tensor conv1d_channels(const Tensor& e, const std::vector<double>& w) {
    const int k = static_cast<int>(w.size());
    const int half = (k - 1) / 2;
    Tensor t(e.n(), e.c(), 1, 1);
    for (int i = 0; i < e.n(); ++i)
        for (int c = 0; c < e.c(); ++c) {
            double s = 0.0;
            for (int j = 0; j < k; ++j) {
                const int cc = c + j - half;
                if (cc < 0 || cc >= e.c()) continue;
                s += w[j] * e.at(i, cc, 0, 0);
            }
            t.at(i, c, 0, 0) = s;
        }
    return t;
}

Tensor importance_vector(const Tensor& x, const GateParams& p) {
    if (x.c() != p.channels())
        throw std::invalid_argument("importance_vector: channel count does not match alpha");
    Tensor e = pooled_energy(x);
    Tensor t = conv1d_channels(e, p.conv1d_w);
    for (size_t i = 0; i < t.size(); ++i) t[i] = sigmoid(t[i]);
    return t;
}

Tensor hard_gate(const Tensor& u) {
    Tensor m = u;
    for (size_t i = 0; i < m.size(); ++i) m[i] = u[i] >= 0.0 ? 1.0 : 0.0;
    return m;
}

Tensor soft_gate(const Tensor& u, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("soft_gate: epsilon must be > 0");
    Tensor m = u;
    for (size_t i = 0; i < m.size(); ++i) m[i] = sigmoid(epsilon * u[i]);
    return m;
}

GateOutput apply_gate(const Tensor& x, const GateParams& p, GateMode mode) {
    if (x.c() != p.channels())
        throw std::invalid_argument("apply_gate: channel count does not match alpha");
    GateOutput out;
    out.mode = mode;
    out.energy = pooled_energy(x);
    out.conv_out = conv1d_channels(out.energy, p.conv1d_w);
    out.importance = out.conv_out;
    for (size_t i = 0; i < out.importance.size(); ++i)
        out.importance[i] = sigmoid(out.importance[i]);

    Tensor arg(x.n(), x.c(), 1, 1);
    for (int i = 0; i < x.n(); ++i)
        for (int c = 0; c < x.c(); ++c)
            arg.at(i, c, 0, 0) =
                out.energy.at(i, c, 0, 0) - out.importance.at(i, c, 0, 0) * p.alpha[c];

    out.mask = (mode == GateMode::Eval) ? hard_gate(arg) : soft_gate(arg, p.epsilon);

    out.masked_input = x;
    for (int i = 0; i < x.n(); ++i)
        for (int c = 0; c < x.c(); ++c) {
            const double m = out.mask.at(i, c, 0, 0);
            double* q = out.masked_input.data() +
                        ((static_cast<size_t>(i) * x.c() + c) * x.pixels());
            for (int s = 0; s < x.pixels(); ++s) q[s] *= m;
        }

    double off = 0.0;
    for (size_t i = 0; i < out.mask.size(); ++i) off += 1.0 - out.mask[i];
    out.sparsity = off / static_cast<double>(out.mask.size());
    return out;
}

double measure_sparsity(const GateOutput& g) {
    if (g.mode != GateMode::Eval)
        throw InvalidStateError("measure_sparsity: mask is not binary (train mode)");
    double off = 0.0;
    for (size_t i = 0; i < g.mask.size(); ++i) {
        const double m = g.mask[i];
        if (m != 0.0 && m != 1.0)
            throw InvalidStateError("measure_sparsity: mask is not binary");
        off += 1.0 - m;
    }
    return off / static_cast<double>(g.mask.size());
}

GateGrads apply_gate_backward(const Tensor& x, const GateParams& p, const GateOutput& out,
                              const Tensor& gy) {
    if (out.mode != GateMode::Train)
        throw InvalidStateError("apply_gate_backward: needs a train-mode forward");
    check_same_shape(x, gy, "apply_gate_backward");
    const int n = x.n(), c = x.c(), hw = x.pixels();
    const int k = p.kernel_size, half = (k - 1) / 2;

    GateGrads g;
    g.gx = Tensor(n, c, x.h(), x.w());
    g.g_alpha.assign(c, 0.0);
    g.g_conv1d_w.assign(k, 0.0);

    Tensor de(n, c, 1, 1);   // grad w.r.t. pooled energy
    Tensor dt(n, c, 1, 1);   // grad w.r.t. conv1d output
    for (int i = 0; i < n; ++i) {
        for (int ci = 0; ci < c; ++ci) {
            const size_t base = (static_cast<size_t>(i) * c + ci) * hw;
            const double m = out.mask.at(i, ci, 0, 0);
            // direct path: y = x * m
            double dm = 0.0;
            for (int s = 0; s < hw; ++s) {
                g.gx[base + s] = gy[base + s] * m;
                dm += gy[base + s] * x[base + s];
            }
            // mask path: m = sigmoid(eps * (e - omega * alpha))
            const double darg = dm * p.epsilon * m * (1.0 - m);
            const double omega = out.importance.at(i, ci, 0, 0);
            de.at(i, ci, 0, 0) = darg;                      // from the e term
            g.g_alpha[ci] += -darg * omega;                 // d arg / d alpha = -omega
            const double domega = -darg * p.alpha[ci];      // d arg / d omega = -alpha
            dt.at(i, ci, 0, 0) = domega * omega * (1.0 - omega);
        }
    }

    // conv1d backward: de += correlate(dt, w flipped); dw += <dt, shifted e>
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            const double d = dt.at(i, ci, 0, 0);
            for (int j = 0; j < k; ++j) {
                const int cc = ci + j - half;
                if (cc < 0 || cc >= c) continue;
                de.at(i, cc, 0, 0) += d * p.conv1d_w[j];
                g.g_conv1d_w[j] += d * out.energy.at(i, cc, 0, 0);
            }
        }

    // energy backward: e = mean(x^2) over space
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            const double scale = de.at(i, ci, 0, 0) * 2.0 / static_cast<double>(hw);
            const size_t base = (static_cast<size_t>(i) * c + ci) * hw;
            for (int s = 0; s < hw; ++s) g.gx[base + s] += scale * x[base + s];
        }

    return g;
}

}  // namespace gcodec
