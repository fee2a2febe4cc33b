#pragma once

#include <cstdint>
#include <vector>

#include "safeaug/nn/tensor.hpp"

namespace safeaug::nn {

/// Scalar loss plus the gradient w.r.t. the logits that produced it.
struct LossResult {
    double value = 0.0;
    Tensor grad_logits;
};

/// Mean over batch and labels of the sigmoid binary cross-entropy
/// -[y log s(x) + (1-y) log(1-s(x))], computed in the numerically stable
/// max(x,0) - x*y + log1p(exp(-|x|)) form. Targets must be exactly 0 or 1.
LossResult augmentation_loss(const Tensor& logits, const Tensor& targets, bool with_grad = true);

/// Mean softmax cross-entropy over the batch; labels in [0, K).
LossResult classification_loss(const Tensor& logits, const std::vector<int>& labels, bool with_grad = true);

inline constexpr int kIgnoreIndex = 255;

/// Mean per-pixel softmax cross-entropy over non-ignored pixels.
/// logits: (N, K, H, W); mask: N*H*W class indices (kIgnoreIndex skipped).
LossResult segmentation_loss(const Tensor& logit_map, const std::vector<int>& mask, bool with_grad = true);

/// Unweighted sum of the augmentation loss and the task loss.
double total_loss(double l_augm, double l_task);

}  // namespace safeaug::nn
