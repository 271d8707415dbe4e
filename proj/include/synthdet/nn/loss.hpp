#pragma once

#include <cmath>
#include <vector>

#include "synthdet/core/errors.hpp"
#include "synthdet/nn/tensor.hpp"

namespace synthdet::nn {

template <typename T>
T sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

// Numerically stable binary cross-entropy on logits; returns the mean loss and
// fills grad with d(mean loss)/d(logit).
template <typename T>
double bce_with_logits(const Tensor<T>& logits, const std::vector<T>& targets, Tensor<T>& grad) {
    if (logits.v.size() != targets.size())
        throw StageError("bce_with_logits: logit/target count mismatch");
    grad = Tensor<T>(logits.n, logits.c, logits.h, logits.w);
    double total = 0.0;
    const T inv = T(1) / static_cast<T>(logits.v.size());
    for (size_t i = 0; i < logits.v.size(); ++i) {
        const double z = static_cast<double>(logits.v[i]);
        const double y = static_cast<double>(targets[i]);
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        grad.v[i] = (sigmoid(logits.v[i]) - targets[i]) * inv;
    }
    return total / static_cast<double>(logits.v.size());
}

}  // namespace synthdet::nn
