#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "safeaug/core/rng.hpp"
#include "safeaug/nn/losses.hpp"
#include "safeaug/nn/network.hpp"
#include "safeaug/nn/optimizer.hpp"

namespace safeaug::nn {

enum class TaskKind { Classification, Segmentation };

/// Everything needed to (re)build a model deterministically.
struct ModelDesc {
    /// "tiny" | "tiny-seg" | "densenet-121" | "densenet-169" | "fpn-densenet-121"
    std::string backbone = "tiny";
    TaskKind task = TaskKind::Classification;
    int num_classes = 10;
    int input_height = 32;
    int input_width = 32;
    int input_channels = 3;
    /// Base channel width of the tiny backbones; DenseNets ignore it.
    int tiny_width = 12;
    std::uint64_t init_seed = 0;
};

TaskKind task_kind_from_string(const std::string& s);
std::string to_string(TaskKind k);

/// Shared backbone with a 15-logit augmentation-prediction head and a task
/// head (K class logits, or a K-channel logit map for segmentation), both
/// computed from one backbone pass.
class Model {
public:
    Model(ModelDesc desc, std::vector<std::string> catalog_mapping);

    const ModelDesc& desc() const { return desc_; }
    const std::vector<std::string>& catalog_mapping() const { return mapping_; }

    struct Heads {
        Tensor aug_logits;   // (N, 15)
        Tensor task_logits;  // (N, K) or (N, K, H, W)
    };

    /// images: (N, C, H, W) matching the descriptor resolution.
    Heads forward(const Tensor& images, bool training);

    /// Seeds backward at one or both heads. Empty tensors mean "no gradient
    /// from this head" (task-only training leaves the aug head untouched).
    void backward(const Tensor& grad_aug, const Tensor& grad_task);

    Network& net() { return net_; }
    std::vector<Param*> params() { return net_.params(); }
    void zero_grad() { net_.zero_grad(); }

    std::size_t param_count();

private:
    void build();
    void build_tiny(Rng& init);
    void build_tiny_seg(Rng& init);
    void build_densenet(Rng& init, const std::vector<int>& block_layers, bool with_fpn);

    ModelDesc desc_;
    std::vector<std::string> mapping_;
    Network net_;
    int aug_head_node_ = -1;
    int task_head_node_ = -1;
};

/// One joint-loss batch: pipeline output plus task targets. Augmentation
/// labels are shared per batch (one subset per batch); per_item_aug_labels
/// overrides the broadcast when set.
struct JointBatch {
    Tensor images;                     // (N, C, H, W)
    std::vector<std::uint8_t> aug_labels;  // 15 bits, broadcast to the batch
    std::optional<Tensor> per_item_aug_labels;  // (N, 15), optional override
    std::vector<int> task_labels;      // N class indices, or N*H*W mask entries
};

struct LossBreakdown {
    double l_augm = 0.0;
    double l_task = 0.0;
    double l_total = 0.0;
};

/// Expand the batch's label vector into per-item targets.
Tensor broadcast_aug_targets(const JointBatch& batch, int batch_size);

/// One optimizer update on L_total = L_augm + L_task (joint = true) or on
/// the task loss alone (joint = false). Throws on non-finite loss before
/// touching the parameters.
LossBreakdown train_step(Model& model, const JointBatch& batch, Optimizer& opt, bool joint = true);

/// Loss evaluation without parameter updates (eval-mode forward).
LossBreakdown eval_losses(Model& model, const JointBatch& batch);

}  // namespace safeaug::nn
