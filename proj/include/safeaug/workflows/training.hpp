#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "safeaug/analyzer/safety.hpp"
#include "safeaug/data/dataset.hpp"
#include "safeaug/nn/models.hpp"
#include "safeaug/transforms/pipeline.hpp"
#include "safeaug/workflows/config.hpp"
#include "safeaug/workflows/registry.hpp"

namespace safeaug {

/// How training batches are augmented.
enum class TrainAugMode {
    None,               // normalization only
    Baseline,           // dataset-keyed conventional recipe
    FixedSubset,        // k-subset of an active set at probability p
    CombinedCutout,     // baseline, then k-subset of the safe set, then cutout
    LearnPhase,         // random-size subset of the full catalog at p=1, joint loss
};

/// Full 15-transform catalog with crop targets conventional for the
/// dataset's resolution (25x25 for the 32x32 datasets, 50x50 at 64x64;
/// larger inputs use the same 25/32 ratio, which also caps crops at the
/// image size when a configured crop would exceed it).
AugmentationSet catalog_for_dataset(const DatasetHandle& ds);

/// Dataset-keyed baseline recipes (flip + pad-and-crop for CIFAR-like data,
/// pad-and-crop for SVHN, flip + color jitter for Tiny ImageNet, flip +
/// 0..20 degree rotation for Cityscapes-style segmentation).
void apply_baseline_recipe(const DatasetHandle& ds, std::vector<Image>& images, std::vector<Image>* masks,
                           Rng& rng);

struct TrainOutcome {
    std::vector<EpochStats> epochs;
    std::string status = "ok";
    double final_lr = 0.0;
    int epochs_run = 0;
};

/// Seeded single-worker training loop: per batch, augment per mode, one
/// train_step (joint loss in LearnPhase, task-only otherwise); per epoch,
/// validation metric, reduce-LR-on-plateau and early stopping.
TrainOutcome run_training(nn::Model& model, nn::Optimizer& opt, const DatasetHandle& ds,
                          const ExperimentConfig& cfg, TrainAugMode mode,
                          const std::vector<std::string>& active_names, std::uint64_t seed);

/// Top-1 accuracy in percent (eval mode, no augmentation).
double evaluate_top1(nn::Model& model, const Split& split, const NormStats& stats, int batch_size);

/// Per-class intersection and union accumulated over a whole split;
/// classes absent from both prediction and truth are skipped in the mean.
class IoUAccumulator {
public:
    explicit IoUAccumulator(int num_classes) : inter_(num_classes, 0), uni_(num_classes, 0) {}
    void add(int predicted, int truth);
    double mean_iou_percent() const;

private:
    std::vector<long long> inter_, uni_;
};

double evaluate_miou(nn::Model& model, const Split& split, const NormStats& stats, int batch_size,
                     int num_classes);

/// Dispatch on the dataset task; returns percent.
double evaluate_metric(nn::Model& model, const DatasetHandle& ds, const Split& split, int batch_size);

/// Adapter exposing a trained model to the safety analyzer.
class ModelBatchPredictor : public BatchPredictor {
public:
    ModelBatchPredictor(nn::Model& model, const NormStats& stats) : model_(model), stats_(stats) {}
    nn::Tensor predict(const EvalUnit& unit) override;

private:
    nn::Model& model_;
    const NormStats& stats_;
};

/// Normalize + resize to the model grid and pack as (N, C, H, W).
nn::Tensor images_to_input(const std::vector<Image>& images, const NormStats& stats, int height, int width);

}  // namespace safeaug
