// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gcodec/codec.hpp"
#include "gcodec/common.hpp"
#include "gcodec/tensor.hpp"

namespace gcodec {

enum class Stage { FixedRate, Ecg, BmFinetune, Joint };

Stage stage_from_name(const std::string& name);
std::string stage_name(Stage s);

struct TrainConfig {
    std::vector<double> lambda_set;  // nonempty; fixed_rate uses the first entry
    double gamma = 1e-4;             // sparsity penalty weight
    double alpha_target = 1e-4;
    int steps = 2000;
    int batch_size = 8;
    double learning_rate = 1e-4;
    uint64_t seed = 0;
    Stage stage = Stage::FixedRate;
    bool freeze_backbone = false;    // bm_finetune only
    int checkpoint_interval = 500;
    std::string checkpoint_path;     // empty: no intermediate checkpoints
    std::string log_path;            // empty: no metrics log

    void validate() const;
};

struct LossBreakdown {
    double rate = 0.0;              // bits per pixel
    double distortion = 0.0;        // mean squared error
    double sparsity_penalty = 0.0;  // sum over gates of |alpha - alpha_t|^2
    double total = 0.0;             // rate + lambda * distortion + gamma * penalty
    double lambda_used = 0.0;
};

// R = total rate bits / pixel count, D = MSE on [0,1] images.
std::tuple<double, double, double> rd_loss(const ForwardResult& fr, const Tensor& x,
                                            double lam);

// Sum over every alpha entry of (alpha - alpha_target)^2; empty list warns
// and returns 0.
double sparsity_loss(const std::vector<GateParams>& gates, double alpha_target);

LossBreakdown total_loss(const ForwardResult& fr, const Tensor& x, double lam,
                          const TrainConfig& cfg, const std::vector<GateParams>& gates);

// Uniform draw from the lambda grid, deterministic in (seed, step).
double sample_lambda(const TrainConfig& cfg, uint64_t step, uint64_t seed_override);
inline double sample_lambda(const TrainConfig& cfg, uint64_t step) {
    return sample_lambda(cfg, step, cfg.seed);
}

// Batched patch provider; all patches share one shape.
class PatchSource {
public:
    virtual ~PatchSource() = default;
    virtual size_t size() const = 0;
    virtual Tensor patch(size_t index) const = 0;  // (1, c, h, w)
};

class InMemoryPatches : public PatchSource {
public:
    explicit InMemoryPatches(std::vector<Tensor> patches) : patches_(std::move(patches)) {}
    size_t size() const override { return patches_.size(); }
    Tensor patch(size_t index) const override { return patches_[index]; }

private:
    std::vector<Tensor> patches_;
};

// First-order adaptive optimizer (Adam) with global gradient-norm clipping.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update over the views; `trainable(name)` filters parameters.
    void step(std::vector<ParamView>& params,
              const std::function<bool(const std::string&)>& trainable, double clip_norm);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct StepLog {
    int step = 0;
    Stage stage = Stage::FixedRate;
    LossBreakdown loss;
    double eval_sparsity = -1.0;  // filled on eval intervals, else -1
};

struct TrainResult {
    std::vector<StepLog> log;
    bool aborted = false;  // non-finite loss; state restored to last good step
};

// Runs the requested stage in place. Deterministic given (seed, config, data).
TrainResult train(CodecState& state, const PatchSource& data, const TrainConfig& cfg);

// True when the stage trains the given parameter.
bool parameter_trainable(const TrainConfig& cfg, const std::string& name);

std::string step_log_json(const StepLog& l);

}  // namespace gcodec
