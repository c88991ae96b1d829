// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <tuple>

namespace gcodec {

namespace {
constexpr uint64_t kTagData = 2, kTagNoise = 3, kTagLambda = 4;
}

Stage stage_from_name(const std::string& name) {
    if (name == "fixed_rate") return Stage::FixedRate;
    if (name == "ecg") return Stage::Ecg;
    if (name == "bm_finetune") return Stage::BmFinetune;
    if (name == "joint") return Stage::Joint;
    throw std::invalid_argument("unknown stage: " + name);
}

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::FixedRate: return "fixed_rate";
        case Stage::Ecg: return "ecg";
        case Stage::BmFinetune: return "bm_finetune";
        case Stage::Joint: return "joint";
    }
    return "fixed_rate";
}

void TrainConfig::validate() const {
    if (lambda_set.empty()) throw std::invalid_argument("TrainConfig: empty lambda set");
    for (double l : lambda_set)
        if (!(l > 0.0)) throw std::invalid_argument("TrainConfig: lambda values must be > 0");
    if (stage == Stage::FixedRate && lambda_set.size() != 1)
        throw std::invalid_argument("TrainConfig: fixed_rate uses a single lambda");
    if (gamma < 0.0) throw std::invalid_argument("TrainConfig: gamma must be >= 0");
    if (steps < 0 || batch_size < 1) throw std::invalid_argument("TrainConfig: bad steps/batch");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: bad learning rate");
}

std::tuple<double, double, double> rd_loss(const ForwardResult& fr, const Tensor& x,
                                            double lam) {
    check_same_shape(fr.reconstruction, x, "rd_loss");
    const double pixels = static_cast<double>(x.n()) * x.h() * x.w();
    const double R = (fr.rate_bits_main + fr.rate_bits_hyper) / pixels;
    double mse = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = fr.reconstruction[i] - x[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    return {R, mse, R + lam * mse};
}

double sparsity_loss(const std::vector<GateParams>& gates, double alpha_target) {
    if (gates.empty()) {
        std::fprintf(stderr, "warning: sparsity_loss over an empty gate list\n");
        return 0.0;
    }
    double s = 0.0;
    for (const auto& g : gates)
        for (double a : g.alpha) {
            const double d = a - alpha_target;
            s += d * d;
        }
    return s;
}

LossBreakdown total_loss(const ForwardResult& fr, const Tensor& x, double lam,
                          const TrainConfig& cfg, const std::vector<GateParams>& gates) {
    LossBreakdown lb;
    auto [R, D, rd] = rd_loss(fr, x, lam);
    lb.rate = R;
    lb.distortion = D;
    lb.lambda_used = lam;
    lb.sparsity_penalty = gates.empty() ? 0.0 : sparsity_loss(gates, cfg.alpha_target);
    lb.total = R + lam * D + cfg.gamma * lb.sparsity_penalty;
    return lb;
}

double sample_lambda(const TrainConfig& cfg, uint64_t step, uint64_t seed_override) {
    if (cfg.lambda_set.empty()) throw std::invalid_argument("sample_lambda: empty lambda set");
    Rng rng(substream_seed(seed_override, kTagLambda, step));
    return cfg.lambda_set[rng.uniform_index(cfg.lambda_set.size())];
}

void Adam::step(std::vector<ParamView>& params,
                const std::function<bool(const std::string&)>& trainable, double clip_norm) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].value->size(), 0.0);
            v_[i].assign(params[i].value->size(), 0.0);
        }
    }
    // global norm over the trainable set
    double norm2 = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        if (!trainable(params[i].name)) continue;
        for (double g : *params[i].grad) norm2 += g * g;
    }
    const double norm = std::sqrt(norm2);
    const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        if (!trainable(params[i].name)) continue;
        auto& val = *params[i].value;
        auto& grad = *params[i].grad;
        for (size_t j = 0; j < val.size(); ++j) {
            const double g = grad[j] * scale;
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

bool parameter_trainable(const TrainConfig& cfg, const std::string& name) {
    const bool is_gate = name.rfind("gate", 0) == 0;
    const bool is_mod = name.rfind("mod", 0) == 0;
    switch (cfg.stage) {
        case Stage::FixedRate: return !is_gate && !is_mod;
        case Stage::Ecg: return !is_mod;
        case Stage::BmFinetune: return cfg.freeze_backbone ? is_mod : true;
        case Stage::Joint: return true;
    }
    return true;
}

namespace {
struct StageBehavior {
    GatePass gates = GatePass::Off;
    bool modulator = false;
    bool gates_trainable = false;
};

StageBehavior stage_behavior(const TrainConfig& cfg, const CodecState& state) {
    StageBehavior b;
    const bool have_gates = state.cfg.gate_every_layer_except_first;
    switch (cfg.stage) {
        case Stage::FixedRate:
            b = {GatePass::Off, false, false};
            break;
        case Stage::Ecg:
            b = {GatePass::Soft, false, true};
            break;
        case Stage::BmFinetune:
            // frozen gates keep their deployment-time hard masks
            b.gates = cfg.freeze_backbone ? GatePass::Hard : GatePass::Soft;
            b.modulator = true;
            b.gates_trainable = !cfg.freeze_backbone;
            break;
        case Stage::Joint:
            b = {GatePass::Soft, true, true};
            break;
    }
    if (!have_gates) {
        b.gates = GatePass::Off;
        b.gates_trainable = false;
    }
    return b;
}

std::vector<double> snapshot_params(std::vector<ParamView>& params) {
    std::vector<double> out;
    for (auto& p : params) out.insert(out.end(), p.value->begin(), p.value->end());
    return out;
}

void restore_params(std::vector<ParamView>& params, const std::vector<double>& snap) {
    size_t off = 0;
    for (auto& p : params) {
        std::copy(snap.begin() + off, snap.begin() + off + p.value->size(), p.value->begin());
        off += p.value->size();
    }
}
}  // namespace

std::string step_log_json(const StepLog& l) {
    char buf[360];
    std::snprintf(buf, sizeof(buf),
                  "{\"step\":%d,\"stage\":\"%s\",\"lambda\":%.17g,\"rate_bpp\":%.17g,"
                  "\"distortion\":%.17g,\"penalty\":%.17g,\"total\":%.17g,\"sparsity\":%.17g}",
                  l.step, stage_name(l.stage).c_str(), l.loss.lambda_used, l.loss.rate,
                  l.loss.distortion, l.loss.sparsity_penalty, l.loss.total, l.eval_sparsity);
    return buf;
}

TrainResult train(CodecState& state, const PatchSource& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty patch source");
    if (cfg.stage == Stage::BmFinetune && !state.cfg.modulator_enabled)
        throw std::invalid_argument("train: bm_finetune on a codec without modulators");

    TrainResult result;
    auto params = state.params();
    Adam opt(cfg.learning_rate);
    const auto behavior = stage_behavior(cfg, state);
    auto trainable = [&cfg](const std::string& name) { return parameter_trainable(cfg, name); };

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path, std::ios::app);
        if (!log) throw std::runtime_error("train: cannot open log " + cfg.log_path);
    }

    const Tensor probe = data.patch(0);
    const int pc = probe.c(), ph = probe.h(), pw = probe.w();
    if (ph % 16 != 0 || pw % 16 != 0)
        throw std::invalid_argument("train: patch dims must be divisible by 16");

    std::vector<double> last_good = snapshot_params(params);

    for (int step = 0; step < cfg.steps; ++step) {
        // batch assembly (with replacement, deterministic per step)
        Rng data_rng(substream_seed(cfg.seed, kTagData, static_cast<uint64_t>(step)));
        Tensor batch(cfg.batch_size, pc, ph, pw);
        for (int b = 0; b < cfg.batch_size; ++b) {
            Tensor p = data.patch(data_rng.uniform_index(data.size()));
            std::copy(p.data(), p.data() + p.size(),
                      batch.data() + static_cast<size_t>(b) * p.size());
        }

        const double lam = sample_lambda(cfg, static_cast<uint64_t>(step), cfg.seed);

        ForwardOptions opts;
        opts.quant = QuantMode::Train;
        opts.gates = behavior.gates;
        opts.modulator = behavior.modulator;
        opts.lam = lam;
        opts.noise_seed = substream_seed(cfg.seed, kTagNoise, static_cast<uint64_t>(step));

        Trace trace;
        ForwardResult fr = state.forward(batch, opts, &trace);
        LossBreakdown lb = total_loss(fr, batch, lam, cfg, state.gates);

        if (!std::isfinite(lb.total)) {
            restore_params(params, last_good);
            result.aborted = true;
            std::fprintf(stderr, "train: non-finite loss at step %d, restoring last checkpoint\n",
                         step);
            break;
        }

        state.zero_grads();
        const double pixels = static_cast<double>(batch.n()) * batch.h() * batch.w();
        state.backward(trace, 1.0 / pixels, lam);
        if (behavior.gates_trainable && cfg.gamma > 0.0) {
            for (auto& gate : state.gates)
                for (size_t c = 0; c < gate.alpha.size(); ++c)
                    gate.g_alpha[c] += cfg.gamma * 2.0 * (gate.alpha[c] - cfg.alpha_target);
        }
        opt.step(params, trainable, 1.0);

        StepLog sl;
        sl.step = step;
        sl.stage = cfg.stage;
        sl.loss = lb;
        // eval-mode sparsity on the same batch (hard gates, rounding)
        if (behavior.gates != GatePass::Off) {
            ForwardOptions eopts = opts;
            eopts.quant = QuantMode::Eval;
            eopts.gates = GatePass::Hard;
            ForwardResult efr = state.forward(batch, eopts);
            double s = 0.0;
            for (double v : efr.gate_sparsity) s += v;
            sl.eval_sparsity =
                efr.gate_sparsity.empty() ? 0.0 : s / static_cast<double>(efr.gate_sparsity.size());
        } else {
            sl.eval_sparsity = 0.0;
        }
        if (log.is_open()) log << step_log_json(sl) << "\n";
        result.log.push_back(sl);

        if (cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0) {
            last_good = snapshot_params(params);
            if (!cfg.checkpoint_path.empty()) save_checkpoint(state, cfg.checkpoint_path);
        }
    }

    if (!result.aborted && !cfg.checkpoint_path.empty()) save_checkpoint(state, cfg.checkpoint_path);
    return result;
}

}  // namespace gcodec
