#include "safeaug/nn/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace safeaug::nn {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string(what) + ": non-finite loss");
}

}  // namespace

LossResult augmentation_loss(const Tensor& logits, const Tensor& targets, bool with_grad) {
    require(logits.ndim() == 2, "augmentation_loss: logits must be (N, L)");
    require(logits.same_shape(targets), "augmentation_loss: shape mismatch " + logits.shape_str() + " vs " +
                                            targets.shape_str());
    const std::size_t n = logits.size();
    require(n > 0, "augmentation_loss: empty batch");
    for (std::size_t i = 0; i < n; ++i) {
        require(targets[i] == 0.0 || targets[i] == 1.0, "augmentation_loss: non-binary target");
    }

    LossResult res;
    if (with_grad) res.grad_logits = Tensor(logits.shape());
    double acc = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = logits[i];
        const double y = targets[i];
        acc += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
        if (with_grad) {
            const double sig = 1.0 / (1.0 + std::exp(-x));
            res.grad_logits[i] = (sig - y) * inv_n;
        }
    }
    res.value = acc * inv_n;
    require_finite(res.value, "augmentation_loss");
    return res;
}

LossResult classification_loss(const Tensor& logits, const std::vector<int>& labels, bool with_grad) {
    require(logits.ndim() == 2, "classification_loss: logits must be (N, K)");
    const int n = logits.dim(0);
    const int k = logits.dim(1);
    require(static_cast<int>(labels.size()) == n, "classification_loss: batch size mismatch");
    LossResult res;
    if (with_grad) res.grad_logits = Tensor(logits.shape());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const int label = labels[i];
        require(label >= 0 && label < k, "classification_loss: label " + std::to_string(label) + " out of [0," +
                                             std::to_string(k) + ")");
        double mx = logits.at2(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits.at2(i, j));
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(logits.at2(i, j) - mx);
        const double lse = mx + std::log(sum);
        acc += lse - logits.at2(i, label);
        if (with_grad) {
            for (int j = 0; j < k; ++j) {
                const double p = std::exp(logits.at2(i, j) - lse);
                res.grad_logits.at2(i, j) = (p - (j == label ? 1.0 : 0.0)) / n;
            }
        }
    }
    res.value = acc / n;
    require_finite(res.value, "classification_loss");
    return res;
}

LossResult segmentation_loss(const Tensor& logit_map, const std::vector<int>& mask, bool with_grad) {
    require(logit_map.ndim() == 4, "segmentation_loss: logits must be (N, K, H, W)");
    const int n = logit_map.dim(0), k = logit_map.dim(1), h = logit_map.dim(2), w = logit_map.dim(3);
    require(mask.size() == static_cast<std::size_t>(n) * h * w,
            "segmentation_loss: mask size mismatch, want " + std::to_string(static_cast<std::size_t>(n) * h * w));
    LossResult res;
    if (with_grad) res.grad_logits = Tensor(logit_map.shape());

    // First pass counts valid pixels so gradients are scaled by the final mean.
    std::size_t valid = 0;
    for (int cls : mask) {
        if (cls == kIgnoreIndex) continue;
        require(cls >= 0 && cls < k, "segmentation_loss: mask class " + std::to_string(cls) + " out of range");
        ++valid;
    }
    require(valid > 0, "segmentation_loss: all pixels ignored");

    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int cls = mask[(static_cast<std::size_t>(i) * h + y) * w + x];
                if (cls == kIgnoreIndex) continue;
                double mx = logit_map.at4(i, 0, y, x);
                for (int j = 1; j < k; ++j) mx = std::max(mx, logit_map.at4(i, j, y, x));
                double sum = 0.0;
                for (int j = 0; j < k; ++j) sum += std::exp(logit_map.at4(i, j, y, x) - mx);
                const double lse = mx + std::log(sum);
                acc += lse - logit_map.at4(i, cls, y, x);
                if (with_grad) {
                    for (int j = 0; j < k; ++j) {
                        const double p = std::exp(logit_map.at4(i, j, y, x) - lse);
                        res.grad_logits.at4(i, j, y, x) = (p - (j == cls ? 1.0 : 0.0)) / valid;
                    }
                }
            }
        }
    }
    res.value = acc / valid;
    require_finite(res.value, "segmentation_loss");
    return res;
}

double total_loss(double l_augm, double l_task) {
    require_finite(l_augm, "total_loss");
    require_finite(l_task, "total_loss");
    return l_augm + l_task;
}

}  // namespace safeaug::nn
