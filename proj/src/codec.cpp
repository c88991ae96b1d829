// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/codec.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gcodec {

namespace {
constexpr double kLn2 = 0.6931471805599453094;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

Tensor crop_spatial(const Tensor& t, int h, int w) {
    if (t.h() == h && t.w() == w) return t;
    if (t.h() < h || t.w() < w) throw std::invalid_argument("crop_spatial: target larger than source");
    Tensor out(t.n(), t.c(), h, w);
    for (int i = 0; i < t.n(); ++i)
        for (int c = 0; c < t.c(); ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out.at(i, c, y, x) = t.at(i, c, y, x);
    return out;
}

Tensor embed_spatial(const Tensor& t, int h, int w) {
    if (t.h() == h && t.w() == w) return t;
    Tensor out(t.n(), t.c(), h, w);
    for (int i = 0; i < t.n(); ++i)
        for (int c = 0; c < t.c(); ++c)
            for (int y = 0; y < t.h(); ++y)
                for (int x = 0; x < t.w(); ++x) out.at(i, c, y, x) = t.at(i, c, y, x);
    return out;
}

Tensor slice_channels(const Tensor& t, int c0, int c1) {
    Tensor out(t.n(), c1 - c0, t.h(), t.w());
    const int hw = t.pixels();
    for (int i = 0; i < t.n(); ++i)
        for (int c = c0; c < c1; ++c)
            std::memcpy(out.data() + (static_cast<size_t>(i) * (c1 - c0) + (c - c0)) * hw,
                        t.data() + (static_cast<size_t>(i) * t.c() + c) * hw,
                        sizeof(double) * hw);
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
    const int hw = a.pixels();
    for (int i = 0; i < a.n(); ++i) {
        for (int c = 0; c < a.c(); ++c)
            std::memcpy(out.data() + (static_cast<size_t>(i) * out.c() + c) * hw,
                        a.data() + (static_cast<size_t>(i) * a.c() + c) * hw, sizeof(double) * hw);
        for (int c = 0; c < b.c(); ++c)
            std::memcpy(out.data() + (static_cast<size_t>(i) * out.c() + a.c() + c) * hw,
                        b.data() + (static_cast<size_t>(i) * b.c() + c) * hw, sizeof(double) * hw);
    }
    return out;
}

// Channel-broadcast product with a constant (n, c, 1, 1) mask.
Tensor mask_multiply(const Tensor& x, const Tensor& mask) {
    Tensor out = x;
    const int hw = x.pixels();
    for (int i = 0; i < x.n(); ++i)
        for (int c = 0; c < x.c(); ++c) {
            const double m = mask.at(i, c, 0, 0);
            double* p = out.data() + (static_cast<size_t>(i) * x.c() + c) * hw;
            for (int s = 0; s < hw; ++s) p[s] *= m;
        }
    return out;
}
}  // namespace

bool operator==(const CodecConfig& a, const CodecConfig& b) {
    return a.image_channels == b.image_channels && a.base_channels == b.base_channels &&
           a.latent_channels == b.latent_channels && a.entropy_mode == b.entropy_mode &&
           a.nonlinearity == b.nonlinearity &&
           a.gate_every_layer_except_first == b.gate_every_layer_except_first &&
           a.modulator_enabled == b.modulator_enabled && a.epsilon == b.epsilon &&
           a.modulator_hidden == b.modulator_hidden &&
           a.modulator_log_lambda == b.modulator_log_lambda &&
           a.tied_reciprocal == b.tied_reciprocal;
}

GatePass CodecState::effective_gate_pass(GatePass requested) const {
    return cfg.gate_every_layer_except_first ? requested : GatePass::Off;
}

CodecState build_codec(const CodecConfig& cfg, uint64_t seed) {
    if (cfg.image_channels <= 0 || cfg.base_channels <= 0 || cfg.latent_channels <= 0)
        throw std::invalid_argument("build_codec: channel counts must be positive");
    if (cfg.epsilon <= 0.0) throw std::invalid_argument("build_codec: epsilon must be > 0");
    CodecState s;
    s.cfg = cfg;
    s.act = act_from_name(cfg.nonlinearity);
    const int N = cfg.base_channels, M = cfg.latent_channels, ic = cfg.image_channels;
    Rng rng(substream_seed(seed, 1, 0));

    s.enc[0].init(ic, N, 5, 2, 2, rng);
    s.enc[1].init(N, N, 5, 2, 2, rng);
    s.enc[2].init(N, N, 5, 2, 2, rng);
    s.enc[3].init(N, M, 5, 2, 2, rng);

    s.henc[0].init(M, N, 3, 1, 1, rng);
    s.henc[1].init(N, N, 5, 2, 2, rng);
    s.henc[2].init(N, N, 5, 2, 2, rng);

    s.hdec0.init(N, N, 5, 2, 2, 1, rng);
    s.hdec1.init(N, N, 5, 2, 2, 1, rng);
    const int hout = cfg.entropy_mode == EntropyMode::MeanScale ? 2 * M : M;
    s.hdec2.init(N, hout, 3, 1, 1, rng);

    s.dec[0].init(M, N, 5, 2, 2, 1, rng);
    s.dec[1].init(N, N, 5, 2, 2, 1, rng);
    s.dec[2].init(N, N, 5, 2, 2, 1, rng);
    s.dec[3].init(N, ic, 5, 2, 2, 1, rng);

    if (cfg.gate_every_layer_except_first) {
        s.gates.resize(10);
        for (auto& g : s.gates) g.init(N, cfg.epsilon, rng);
    }

    s.pair.init(cfg.modulator_hidden, M,
                cfg.modulator_log_lambda ? LambdaTransform::Log : LambdaTransform::Raw,
                cfg.tied_reciprocal, rng);
    s.prior.init(N, rng);
    return s;
}

std::vector<ParamView> CodecState::params() {
    std::vector<ParamView> out;
    auto add = [&out](std::vector<ParamView> v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    for (int i = 0; i < 4; ++i) add(enc[i].params("enc" + std::to_string(i)));
    for (int i = 0; i < 3; ++i) add(henc[i].params("henc" + std::to_string(i)));
    add(hdec0.params("hdec0"));
    add(hdec1.params("hdec1"));
    add(hdec2.params("hdec2"));
    for (int i = 0; i < 4; ++i) add(dec[i].params("dec" + std::to_string(i)));
    for (size_t i = 0; i < gates.size(); ++i) add(gates[i].params("gate" + std::to_string(i)));
    if (cfg.modulator_enabled) add(pair.params("mod"));
    add(prior.params("prior"));
    return out;
}

void CodecState::zero_grads() {
    for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

size_t CodecState::parameter_count() {
    size_t n = 0;
    for (auto& p : params()) n += p.value->size();
    return n;
}

namespace {
// Applies gate i (when given) and the conv + optional activation, recording
// the step when a trace slot is provided.
template <typename Layer>
Tensor step_forward(const Tensor& x, const Layer& layer, Act act, bool use_act,
                    const GateParams* gate, GatePass gp, ConvStep* tr,
                    std::vector<double>* sparsity, std::vector<Tensor>* masks) {
    Tensor in = x;
    GateOutput gout;
    bool gated = false;
    if (gate != nullptr && gp != GatePass::Off) {
        gout = apply_gate(x, *gate, gp == GatePass::Soft ? GateMode::Train : GateMode::Eval);
        in = gout.masked_input;
        gated = true;
        if (sparsity) sparsity->push_back(gout.sparsity);
        if (masks) masks->push_back(gout.mask);
    }
    Tensor pre = layer.forward(in);
    Tensor out = use_act ? act_forward(pre, act) : pre;
    if (tr) {
        tr->in = std::move(in);
        tr->pre = pre;
        tr->out = out;
        tr->gate = std::move(gout);
        tr->gated = gated;
    }
    return out;
}
}  // namespace

Tensor CodecState::run_encoder(const Tensor& x, GatePass gp, std::array<ConvStep, 4>* tr,
                               std::vector<double>* sparsity,
                               std::vector<Tensor>* masks) const {
    if (x.c() != cfg.image_channels)
        throw std::invalid_argument("run_encoder: wrong image channel count");
    GatePass g = effective_gate_pass(gp);
    Tensor t = step_forward(x, enc[0], act, true, nullptr, g, tr ? &(*tr)[0] : nullptr, sparsity, masks);
    t = step_forward(t, enc[1], act, true, gates.empty() ? nullptr : &gates[0], g,
                     tr ? &(*tr)[1] : nullptr, sparsity, masks);
    t = step_forward(t, enc[2], act, true, gates.empty() ? nullptr : &gates[1], g,
                     tr ? &(*tr)[2] : nullptr, sparsity, masks);
    t = step_forward(t, enc[3], act, false, gates.empty() ? nullptr : &gates[2], g,
                     tr ? &(*tr)[3] : nullptr, sparsity, masks);
    return t;
}

Tensor CodecState::run_hyper_encoder(const Tensor& y_mod, GatePass gp,
                                     std::array<ConvStep, 3>* tr,
                                     std::vector<double>* sparsity,
                                     std::vector<Tensor>* masks) const {
    GatePass g = effective_gate_pass(gp);
    Tensor t = step_forward(y_mod, henc[0], act, true, nullptr, g, tr ? &(*tr)[0] : nullptr,
                            sparsity, masks);
    t = step_forward(t, henc[1], act, true, gates.empty() ? nullptr : &gates[3], g,
                     tr ? &(*tr)[1] : nullptr, sparsity, masks);
    t = step_forward(t, henc[2], act, false, gates.empty() ? nullptr : &gates[4], g,
                     tr ? &(*tr)[2] : nullptr, sparsity, masks);
    return t;
}

std::pair<Tensor, Tensor> CodecState::run_hyper_decoder(const Tensor& z_hat, int y_h, int y_w,
                                                        GatePass gp, std::array<ConvStep, 3>* tr,
                                                        Tensor* scales_raw_out,
                                                        std::vector<double>* sparsity,
                                                        std::vector<Tensor>* masks) const {
    GatePass g = effective_gate_pass(gp);
    Tensor t = step_forward(z_hat, hdec0, act, true, nullptr, g, tr ? &(*tr)[0] : nullptr,
                            sparsity, masks);
    t = step_forward(t, hdec1, act, true, gates.empty() ? nullptr : &gates[5], g,
                     tr ? &(*tr)[1] : nullptr, sparsity, masks);
    t = step_forward(t, hdec2, act, false, gates.empty() ? nullptr : &gates[6], g,
                     tr ? &(*tr)[2] : nullptr, sparsity, masks);
    // the deconv chain can overshoot the main latent grid when the image is
    // not a multiple of 64; keep the top-left y_h x y_w block
    Tensor cropped = crop_spatial(t, y_h, y_w);
    const int M = cfg.latent_channels;
    Tensor scales_raw, means;
    if (cfg.entropy_mode == EntropyMode::MeanScale) {
        scales_raw = slice_channels(cropped, 0, M);
        means = slice_channels(cropped, M, 2 * M);
    } else {
        scales_raw = cropped;
    }
    if (scales_raw_out) *scales_raw_out = scales_raw;
    Tensor scales_sp = scales_raw;
    for (size_t i = 0; i < scales_sp.size(); ++i) scales_sp[i] = softplus(scales_sp[i]);
    return {scales_sp, means};
}

Tensor CodecState::run_decoder(const Tensor& y_dec, GatePass gp, std::array<ConvStep, 4>* tr,
                               std::vector<double>* sparsity,
                               std::vector<Tensor>* masks) const {
    GatePass g = effective_gate_pass(gp);
    Tensor t = step_forward(y_dec, dec[0], act, true, nullptr, g, tr ? &(*tr)[0] : nullptr,
                            sparsity, masks);
    t = step_forward(t, dec[1], act, true, gates.empty() ? nullptr : &gates[7], g,
                     tr ? &(*tr)[1] : nullptr, sparsity, masks);
    t = step_forward(t, dec[2], act, true, gates.empty() ? nullptr : &gates[8], g,
                     tr ? &(*tr)[2] : nullptr, sparsity, masks);
    t = step_forward(t, dec[3], act, false, gates.empty() ? nullptr : &gates[9], g,
                     tr ? &(*tr)[3] : nullptr, sparsity, masks);
    return t;
}

ForwardResult CodecState::forward(const Tensor& x, const ForwardOptions& opts,
                                  Trace* trace) const {
    if (x.h() % 16 != 0 || x.w() % 16 != 0)
        throw std::invalid_argument("forward: spatial dims must be divisible by 16");
    if (!(opts.lam > 0.0)) throw std::invalid_argument("forward: lambda must be > 0");

    ForwardResult res;
    const GatePass gp = effective_gate_pass(opts.gates);
    const bool mod = cfg.modulator_enabled && opts.modulator;

    if (trace) {
        *trace = Trace{};
        trace->gates = gp;
        trace->modulator = mod;
        trace->lam = opts.lam;
        trace->x = x;
    }

    Tensor y = run_encoder(x, gp, trace ? &trace->enc : nullptr, &res.gate_sparsity,
                           &res.gate_masks);

    ModulatorTrace bm_tr;
    Tensor y_mod = y;
    if (mod) {
        bm_tr = modulation_vector(pair.bm, opts.lam);
        y_mod = scale_channels(y, bm_tr.vec);
    }

    Tensor z = run_hyper_encoder(y_mod, gp, trace ? &trace->henc : nullptr, &res.gate_sparsity,
                                 &res.gate_masks);

    Rng noise(opts.noise_seed);
    Rng* noise_ptr = opts.quant == QuantMode::Train ? &noise : nullptr;
    Tensor y_hat = quantize(y_mod, opts.quant, noise_ptr);
    Tensor z_hat = quantize(z, opts.quant, noise_ptr);

    Tensor scales_raw;
    auto [scales_sp, means] =
        run_hyper_decoder(z_hat, y.h(), y.w(), gp, trace ? &trace->hdec : nullptr, &scales_raw,
                          &res.gate_sparsity, &res.gate_masks);

    Tensor p_main = likelihood_main(y_hat, scales_sp,
                                    cfg.entropy_mode == EntropyMode::MeanScale ? &means : nullptr,
                                    &res.scale_clamped);
    Tensor p_hyper = prior.likelihood(z_hat);

    double bits_main = 0.0, bits_hyper = 0.0;
    for (size_t i = 0; i < p_main.size(); ++i) bits_main -= std::log2(p_main[i]);
    for (size_t i = 0; i < p_hyper.size(); ++i) bits_hyper -= std::log2(p_hyper[i]);
    res.rate_bits_main = bits_main;
    res.rate_bits_hyper = bits_hyper;

    ModulatorTrace ibm_tr;
    Tensor y_dec = y_hat;
    if (mod) {
        if (!pair.tied_reciprocal) ibm_tr = modulation_vector(pair.ibm, opts.lam);
        y_dec = scale_channels(y_hat, inverse_vector(pair, opts.lam));
    }

    Tensor x_hat = run_decoder(y_dec, gp, trace ? &trace->dec : nullptr, &res.gate_sparsity,
                               &res.gate_masks);

    res.reconstruction = x_hat;
    res.y_mod = y_mod;
    res.y_c = y.c();
    res.y_h = y.h();
    res.y_w = y.w();
    res.z_c = z.c();
    res.z_h = z.h();
    res.z_w = z.w();
    if (opts.quant == QuantMode::Eval) {
        res.y_symbols.resize(y_hat.size());
        for (size_t i = 0; i < y_hat.size(); ++i)
            res.y_symbols[i] = static_cast<int32_t>(y_hat[i]);
        res.z_symbols.resize(z_hat.size());
        for (size_t i = 0; i < z_hat.size(); ++i)
            res.z_symbols[i] = static_cast<int32_t>(z_hat[i]);
    }

    if (trace) {
        trace->y = std::move(y);
        trace->bm_tr = std::move(bm_tr);
        trace->y_mod = std::move(y_mod);
        trace->y_hat = std::move(y_hat);
        trace->z = std::move(z);
        trace->z_hat = std::move(z_hat);
        trace->scales_sp = std::move(scales_sp);
        trace->scales_raw = std::move(scales_raw);
        trace->means = std::move(means);
        trace->p_main = std::move(p_main);
        trace->p_hyper = std::move(p_hyper);
        trace->ibm_tr = std::move(ibm_tr);
        trace->y_dec = std::move(y_dec);
        trace->x_hat = res.reconstruction;
    }
    return res;
}

namespace {
// Backward through one recorded step. `gate_input` is the tensor the gate saw
// (the previous step's output). Returns the gradient w.r.t. that tensor.
template <typename Layer>
Tensor step_backward(Layer& layer, Act act, bool use_act, const ConvStep& st, GateParams* gate,
                     GatePass gp, const Tensor* gate_input, const Tensor& g_out) {
    Tensor g_pre = use_act ? act_backward(st.pre, g_out, act) : g_out;
    Tensor g_in = layer.backward(st.in, g_pre);
    if (!st.gated) return g_in;
    if (gp == GatePass::Soft) {
        GateGrads gg = apply_gate_backward(*gate_input, *gate, st.gate, g_in);
        for (size_t i = 0; i < gate->alpha.size(); ++i) gate->g_alpha[i] += gg.g_alpha[i];
        for (size_t i = 0; i < gate->conv1d_w.size(); ++i)
            gate->g_conv1d_w[i] += gg.g_conv1d_w[i];
        return std::move(gg.gx);
    }
    // hard gate: constant binary mask
    return mask_multiply(g_in, st.gate.mask);
}
}  // namespace

void CodecState::backward(const Trace& tr, double w_rate_per_bit, double w_dist) {
    if (tr.x.size() == 0) throw InvalidStateError("backward: empty trace");
    const GatePass gp = tr.gates;
    const size_t count = tr.x.size();

    // distortion seed
    Tensor g_xhat(tr.x.n(), tr.x.c(), tr.x.h(), tr.x.w());
    for (size_t i = 0; i < count; ++i)
        g_xhat[i] = w_dist * 2.0 * (tr.x_hat[i] - tr.x[i]) / static_cast<double>(count);

    // main decoder
    const Trace& t = tr;
    Tensor g = step_backward(dec[3], act, false, t.dec[3], gates.empty() ? nullptr : &gates[9],
                             gp, &t.dec[2].out, g_xhat);
    g = step_backward(dec[2], act, true, t.dec[2], gates.empty() ? nullptr : &gates[8], gp,
                      &t.dec[1].out, g);
    g = step_backward(dec[1], act, true, t.dec[1], gates.empty() ? nullptr : &gates[7], gp,
                      &t.dec[0].out, g);
    Tensor g_ydec = step_backward(dec[0], act, true, t.dec[0], nullptr, gp, nullptr, g);

    // inverse modulator
    Tensor g_yhat;
    std::vector<double> g_bm_vec(pair.bm.out_dim, 0.0);
    if (tr.modulator) {
        const std::vector<double> u = inverse_vector(pair, tr.lam);
        g_yhat = scale_channels(g_ydec, u);
        std::vector<double> gu = scale_channels_grad_vec(tr.y_hat, g_ydec);
        if (pair.tied_reciprocal) {
            // u = 1 / bm  =>  du/dbm = -u^2
            for (int c = 0; c < pair.bm.out_dim; ++c) g_bm_vec[c] += -gu[c] * u[c] * u[c];
        } else {
            modulation_vector_backward(pair.ibm, tr.ibm_tr, gu);
        }
    } else {
        g_yhat = g_ydec;
    }

    // main rate term
    const bool mean_scale = cfg.entropy_mode == EntropyMode::MeanScale;
    Tensor g_scales_raw(tr.scales_raw.n(), tr.scales_raw.c(), tr.scales_raw.h(),
                        tr.scales_raw.w());
    Tensor g_means;
    if (mean_scale) g_means = Tensor(tr.means.n(), tr.means.c(), tr.means.h(), tr.means.w());
    for (size_t i = 0; i < tr.p_main.size(); ++i) {
        const double p = tr.p_main[i];
        if (p <= kProbFloor) continue;  // floored bin: no gradient
        const double dLdp = -w_rate_per_bit / (kLn2 * p);
        const double sp = tr.scales_sp[i];
        const double sigma = sp < kScaleFloor ? kScaleFloor : sp;
        const double mu = mean_scale ? tr.means[i] : 0.0;
        double dv, dmu, dsig;
        gaussian_bin_prob_grad(tr.y_hat[i], mu, sigma, &dv, &dmu, &dsig);
        g_yhat[i] += dLdp * dv;
        if (mean_scale) g_means[i] += dLdp * dmu;
        if (sp > kScaleFloor) g_scales_raw[i] += dLdp * dsig * sigmoid(tr.scales_raw[i]);
    }

    // hyper decoder
    Tensor g_hs = mean_scale ? concat_channels(g_scales_raw, g_means) : g_scales_raw;
    g_hs = embed_spatial(g_hs, t.hdec[2].out.h(), t.hdec[2].out.w());
    g = step_backward(hdec2, act, false, t.hdec[2], gates.empty() ? nullptr : &gates[6], gp,
                      &t.hdec[1].out, g_hs);
    g = step_backward(hdec1, act, true, t.hdec[1], gates.empty() ? nullptr : &gates[5], gp,
                      &t.hdec[0].out, g);
    Tensor g_zhat = step_backward(hdec0, act, true, t.hdec[0], nullptr, gp, nullptr, g);

    // hyper rate term
    Tensor g_phyper(tr.p_hyper.n(), tr.p_hyper.c(), tr.p_hyper.h(), tr.p_hyper.w());
    for (size_t i = 0; i < tr.p_hyper.size(); ++i) {
        const double p = tr.p_hyper[i];
        if (p <= kProbFloor) continue;
        g_phyper[i] = -w_rate_per_bit / (kLn2 * p);
    }
    Tensor g_zhat2 = prior.likelihood_backward(tr.z_hat, g_phyper);
    for (size_t i = 0; i < g_zhat.size(); ++i) g_zhat[i] += g_zhat2[i];

    // additive-noise surrogate passes gradients straight through
    g = step_backward(henc[2], act, false, t.henc[2], gates.empty() ? nullptr : &gates[4], gp,
                      &t.henc[1].out, g_zhat);
    g = step_backward(henc[1], act, true, t.henc[1], gates.empty() ? nullptr : &gates[3], gp,
                      &t.henc[0].out, g);
    Tensor g_ymod = step_backward(henc[0], act, true, t.henc[0], nullptr, gp, nullptr, g);

    for (size_t i = 0; i < g_ymod.size(); ++i) g_ymod[i] += g_yhat[i];

    // modulator
    Tensor g_y;
    if (tr.modulator) {
        g_y = scale_channels(g_ymod, tr.bm_tr.vec);
        std::vector<double> gv = scale_channels_grad_vec(tr.y, g_ymod);
        for (int c = 0; c < pair.bm.out_dim; ++c) gv[c] += g_bm_vec[c];
        modulation_vector_backward(pair.bm, tr.bm_tr, gv);
    } else {
        g_y = g_ymod;
        // tied contribution can only exist when the modulator ran
    }

    // main encoder
    g = step_backward(enc[3], act, false, t.enc[3], gates.empty() ? nullptr : &gates[2], gp,
                      &t.enc[2].out, g_y);
    g = step_backward(enc[2], act, true, t.enc[2], gates.empty() ? nullptr : &gates[1], gp,
                      &t.enc[1].out, g);
    g = step_backward(enc[1], act, true, t.enc[1], gates.empty() ? nullptr : &gates[0], gp,
                      &t.enc[0].out, g);
    step_backward(enc[0], act, true, t.enc[0], nullptr, gp, nullptr, g);  // gx discarded
}

std::vector<LayerGeom> CodecState::layer_table(int img_h, int img_w) const {
    std::vector<LayerGeom> out;
    const bool gated = cfg.gate_every_layer_except_first;
    auto conv_geom = [&](const std::string& name, const Conv2d& c, int& h, int& w, int gi) {
        h = c.out_dim(h);
        w = c.out_dim(w);
        out.push_back({name, c.in_ch, c.out_ch, c.k, h, w, gated ? gi : -1});
    };
    auto deconv_geom = [&](const std::string& name, const ConvTranspose2d& c, int& h, int& w,
                           int gi) {
        out.push_back({name, c.in_ch, c.out_ch, c.k, h, w, gated ? gi : -1});
        h = c.out_dim(h);
        w = c.out_dim(w);
    };
    int h = img_h, w = img_w;
    conv_geom("enc0", enc[0], h, w, -1);
    conv_geom("enc1", enc[1], h, w, 0);
    conv_geom("enc2", enc[2], h, w, 1);
    conv_geom("enc3", enc[3], h, w, 2);
    const int yh = h, yw = w;
    conv_geom("henc0", henc[0], h, w, -1);
    conv_geom("henc1", henc[1], h, w, 3);
    conv_geom("henc2", henc[2], h, w, 4);
    deconv_geom("hdec0", hdec0, h, w, -1);
    deconv_geom("hdec1", hdec1, h, w, 5);
    conv_geom("hdec2", hdec2, h, w, 6);
    h = yh;
    w = yw;
    deconv_geom("dec0", dec[0], h, w, -1);
    deconv_geom("dec1", dec[1], h, w, 7);
    deconv_geom("dec2", dec[2], h, w, 8);
    deconv_geom("dec3", dec[3], h, w, 9);
    return out;
}

void serialize_params(CodecState& state, std::vector<unsigned char>& out) {
    out.clear();
    for (auto& p : state.params()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.value->data());
        out.insert(out.end(), bytes, bytes + p.value->size() * sizeof(double));
    }
}

uint64_t CodecState::checksum() {
    uint64_t h = 0xcbf29ce484222325ull;
    for (auto& p : params())
        h = fnv1a64(p.value->data(), p.value->size() * sizeof(double), h);
    return h;
}

namespace {
constexpr char kCkptMagic[4] = {'G', 'C', 'K', 'P'};
constexpr uint32_t kCkptVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DecodeError("checkpoint: truncated");
    return v;
}
void put_string(std::ostream& os, const std::string& s) {
    put<uint16_t>(os, static_cast<uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::istream& is) {
    const auto n = get<uint16_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw DecodeError("checkpoint: truncated string");
    return s;
}
}  // namespace

void save_checkpoint(CodecState& state, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kCkptMagic, 4);
    put<uint32_t>(os, kCkptVersion);
    const CodecConfig& c = state.cfg;
    put<int32_t>(os, c.image_channels);
    put<int32_t>(os, c.base_channels);
    put<int32_t>(os, c.latent_channels);
    put<uint8_t>(os, c.entropy_mode == EntropyMode::MeanScale ? 1 : 0);
    put_string(os, c.nonlinearity);
    put<uint8_t>(os, c.gate_every_layer_except_first ? 1 : 0);
    put<uint8_t>(os, c.modulator_enabled ? 1 : 0);
    put<double>(os, c.epsilon);
    put<int32_t>(os, c.modulator_hidden);
    put<uint8_t>(os, c.modulator_log_lambda ? 1 : 0);
    put<uint8_t>(os, c.tied_reciprocal ? 1 : 0);
    auto ps = state.params();
    put<uint32_t>(os, static_cast<uint32_t>(ps.size()));
    for (auto& p : ps) {
        put_string(os, p.name);
        put<uint64_t>(os, p.value->size());
        os.write(reinterpret_cast<const char*>(p.value->data()),
                 static_cast<std::streamsize>(p.value->size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

CodecState load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw UnsupportedFormatError("load_checkpoint: bad magic");
    const auto version = get<uint32_t>(is);
    if (version != kCkptVersion)
        throw UnsupportedFormatError("load_checkpoint: unsupported version " +
                                     std::to_string(version));
    CodecConfig c;
    c.image_channels = get<int32_t>(is);
    c.base_channels = get<int32_t>(is);
    c.latent_channels = get<int32_t>(is);
    c.entropy_mode = get<uint8_t>(is) ? EntropyMode::MeanScale : EntropyMode::ScaleOnly;
    c.nonlinearity = get_string(is);
    c.gate_every_layer_except_first = get<uint8_t>(is) != 0;
    c.modulator_enabled = get<uint8_t>(is) != 0;
    c.epsilon = get<double>(is);
    c.modulator_hidden = get<int32_t>(is);
    c.modulator_log_lambda = get<uint8_t>(is) != 0;
    c.tied_reciprocal = get<uint8_t>(is) != 0;

    CodecState state = build_codec(c, 0);
    auto ps = state.params();
    const auto nparams = get<uint32_t>(is);
    if (nparams != ps.size()) throw DecodeError("load_checkpoint: parameter table mismatch");
    for (auto& p : ps) {
        const std::string name = get_string(is);
        if (name != p.name) throw DecodeError("load_checkpoint: unexpected tensor " + name);
        const auto count = get<uint64_t>(is);
        if (count != p.value->size())
            throw DecodeError("load_checkpoint: size mismatch for " + name);
        is.read(reinterpret_cast<char*>(p.value->data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!is) throw DecodeError("load_checkpoint: truncated tensor " + name);
    }
    return state;
}

}  // namespace gcodec
