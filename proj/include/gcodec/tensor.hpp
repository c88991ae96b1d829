// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcodec {

// Dense 4-D feature map (batch, channel, height, width), row-major, double.
// Per-channel quantities (masks, energies, importance) reuse the same type
// with h = w = 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w, double fill = 0.0)
        : n_(n), c_(c), h_(h), w_(w), v_(static_cast<size_t>(n) * c * h * w, fill) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw std::invalid_argument("Tensor: negative dimension");
    }

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    size_t size() const { return v_.size(); }
    int pixels() const { return h_ * w_; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& at(int n, int c, int h, int w) {
        return v_[((static_cast<size_t>(n) * c_ + c) * h_ + h) * w_ + w];
    }
    double at(int n, int c, int h, int w) const {
        return v_[((static_cast<size_t>(n) * c_ + c) * h_ + h) * w_ + w];
    }

    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> v_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// View of one learnable tensor: value and gradient storage plus the name
// used for serialization. Order of views is the serialization order.
struct ParamView {
    std::string name;
    std::vector<double>* value = nullptr;
    std::vector<double>* grad = nullptr;
};

}  // namespace gcodec
