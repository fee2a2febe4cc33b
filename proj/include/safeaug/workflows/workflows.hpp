#pragma once

#include <map>
#include <string>
#include <vector>

#include "safeaug/analyzer/report.hpp"
#include "safeaug/analyzer/safety.hpp"
#include "safeaug/workflows/config.hpp"
#include "safeaug/workflows/registry.hpp"

namespace safeaug {

struct LearnSafeResult {
    SafeSet safe_set;
    SafetyMetrics metrics;
    ExperimentRecord record;
    std::string report_json_path;
    std::string report_svg_path;
    std::string safe_set_path;
};

/// Steps 1-4 end to end: joint training on random subsets (p=1), clean-set
/// false positives, augmented-set per-label accuracy, thresholded selection.
/// Persists report, safe-set file, checkpoint and record into the registry.
LearnSafeResult learn_safe(ExperimentConfig config, RunRegistry& registry);

/// Task-only training under the configured augmentation mode
/// (none / baseline / all / safe / safe_v2), fixed k-subsets at probability p.
ExperimentRecord train_with_set(ExperimentConfig config, RunRegistry& registry);

/// Continue training from a checkpoint with the configured set; by default
/// the learning rate resumes at the checkpoint's final value. The
/// checkpoint's label mapping must match the current catalog.
ExperimentRecord finetune(const std::string& checkpoint_path, ExperimentConfig config,
                          RunRegistry& registry, const std::string& parent_run = "");

/// Baseline recipe + k-subset of the safe set + Cutout, per batch.
ExperimentRecord train_combined(ExperimentConfig config, RunRegistry& registry);

struct SweepRow {
    int size = 0;
    std::string set_name;  // "all" | "safe"
    double metric = 0.0;
    std::string run_id;
};

/// One training run per (size, set) pair over {All, Safe}; writes a table
/// (JSON + CSV) and an SVG line plot into a sweep run folder.
std::vector<SweepRow> subset_size_sweep(ExperimentConfig config, const std::vector<int>& sizes,
                                        RunRegistry& registry);

/// Test metric of a stored checkpoint on the configured dataset (percent).
double evaluate_checkpoint(const std::string& checkpoint_path, ExperimentConfig config);

/// Figure-2 third series: task accuracy when training with exactly one
/// augmentation, for every catalog transform. Expensive; tiny models only.
std::map<std::string, double> per_augmentation_task_accuracy(ExperimentConfig config,
                                                             RunRegistry& registry);

/// Load the members of a safe-set / catalog-format file.
std::vector<std::string> load_set_names(const std::string& path);

}  // namespace safeaug
