#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safeaug/core/image.hpp"
#include "safeaug/core/rng.hpp"
#include "safeaug/nn/tensor.hpp"
#include "safeaug/transforms/pipeline.hpp"

namespace safeaug {

/// One evaluation unit: a batch of images plus the transforms that actually
/// fired on it (all zeros for the clean pass). Real predictors look only at
/// the images; `fired` exists so test stubs can play oracle.
struct EvalUnit {
    std::vector<Image> images;
    AugmentationLabelVector fired;
};

/// Maps a batch of images to per-item augmentation logits (N, 15).
class BatchPredictor {
public:
    virtual ~BatchPredictor() = default;
    virtual nn::Tensor predict(const EvalUnit& unit) = 0;
};

/// Per-unit record kept so any rate in SafetyMetrics can be recounted
/// independently from the stored predictions.
struct UnitTrace {
    AugmentationLabelVector fired;      // 15 bits
    std::vector<double> mean_logits;    // 15, per-item logits mean-aggregated
};

struct SafetyMetrics {
    std::vector<std::string> mapping;   // label index -> transform name
    std::vector<double> clean_fp_rate;  // 15
    std::vector<double> aug_accuracy;   // 15, binary accuracy over all units
    std::vector<double> aug_recall;     // 15, accuracy over fired units only
    std::vector<int> aug_fired_units;   // per-label fired support
    int clean_units = 0;
    int aug_units = 0;
    std::vector<UnitTrace> clean_trace;
    std::vector<UnitTrace> aug_trace;

    bool complete() const;
};

struct Thresholds {
    /// A transform stays safe only if it is (almost) never predicted on the
    /// clean set and the head cannot tell when it fired. With units fired at
    /// rate E|a|/15 = 1/6, an undetectable label scores a binary accuracy
    /// near 5/6 ~ 0.83 (the majority-class floor) while detectable labels
    /// approach 1.0, so the accuracy cut sits between those regimes.
    double fp_max = 0.05;
    double acc_max = 0.92;
    double decision_threshold = 0.5;
};

struct SafeSet {
    std::vector<std::string> members;  // subset of the catalog, index order
    Thresholds thresholds;
    std::string provenance;
    std::vector<std::string> warnings;

    bool contains(const std::string& name) const;
};

struct AugSamplerConfig {
    int max_subset_size = 5;   // |a| uniform over {0..max}
    double p = 1.0;            // fire probability within the subset
    int batch_size = 32;
    /// Step 3 re-samples the test set this many times; more passes mean more
    /// evaluation units and steadier per-label rates.
    int passes = 4;
};

/// Step 2: run the predictor over clean batches (no transforms) and report,
/// per label, the fraction of units predicted positive.
SafetyMetrics evaluate_clean_false_positives(BatchPredictor& predictor, const std::vector<Image>& clean_test,
                                             int batch_size, double decision_threshold = 0.5);

/// Step 3: apply the training-phase sampler to test batches and report
/// per-label binary accuracy of (sigmoid(mean logit) > threshold) against
/// the fired bit, over all units; recall over fired units is kept alongside.
SafetyMetrics evaluate_augmentation_accuracy(BatchPredictor& predictor, const std::vector<Image>& test,
                                             const AugmentationSet& set, const AugSamplerConfig& sampler,
                                             std::uint64_t seed, double decision_threshold = 0.5);

/// Merge the Step-2 and Step-3 halves into one complete metrics record.
SafetyMetrics merge_metrics(const SafetyMetrics& clean, const SafetyMetrics& augmented,
                            const std::vector<std::string>& mapping);

/// Step 4: label i is safe iff clean_fp_rate(i) <= fp_max and
/// aug_accuracy(i) <= acc_max. Pure and deterministic.
SafeSet select_safe_set(const SafetyMetrics& metrics, const Thresholds& thresholds);

/// Manual refinement: drop the named transforms (unknown names warn).
SafeSet refine_safe_set(const SafeSet& safe, const std::vector<std::string>& exclusions);

}  // namespace safeaug
