#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace safeaug {

/// Full description of one run. Values of -1 (or empty strings) mean
/// "resolve the task/dataset default"; resolve() pins them so the echoed
/// config in the run folder is complete.
struct ExperimentConfig {
    // data
    std::string dataset = "probe";
    std::string data_root;  // empty: $SAFEAUG_DATA_ROOT or ./data
    int subset_size = 0;    // 0 = full train split
    std::uint64_t seed = 0;

    // model
    std::string model = "tiny";
    int tiny_width = 12;

    // augmentation
    std::string mode = "all";  // none|baseline|safe|safe_v2|all|safe_baseline_cutout
    int k = 3;                 // usage-phase subset size ("subset of size 3")
    double p = 0.5;            // usage-phase per-transform probability
    int max_subset_size = 5;   // learning-phase random-size cap
    std::string safe_set_file; // catalog-format file for the safe modes

    // optimizer (defaults: SGD 0.1/0.9/5e-4 for classification,
    // Adam 1e-4 for segmentation)
    std::string optimizer;  // "sgd" | "adam" | "" = task default
    double lr = -1.0;
    double momentum = 0.9;
    double weight_decay = 5e-4;

    // schedule (defaults: plateau 0.1x/10 + stop 20 for classification,
    // plateau 0.5x/7 + stop 15 for segmentation)
    int epochs = 10;
    double plateau_factor = -1.0;
    int plateau_patience = -1;
    int early_stop_patience = -1;
    int batch_size = 32;

    // safety analysis. The accuracy cut sits between the majority-class
    // floor of an undetectable label (1 - E|a|/15 ~ 0.83 under the step-1
    // sampler) and the ceiling of the weakest genuinely detectable signal
    // (~0.90: co-fired geometric transforms can remap what an earlier one
    // did, so even a perfect detector misses those units).
    double fp_max = 0.05;
    double acc_max = 0.87;
    double decision_threshold = 0.5;
    int eval_batch_size = 16;  // step 2/3 unit size
    int eval_passes = -1;      // step-3 test-set re-samples; -1 targets ~3000 units

    // composition
    int cutout_size = -1;  // -1: dataset default (16, SVHN 20)

    int repeats = 1;
    int workers = 1;

    bool is_segmentation_model() const;

    /// Field-by-field validation; returns human-readable problems.
    std::vector<std::string> validate() const;

    /// Fill every "default" marker with its concrete value.
    void resolve();

    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);

    /// sha256 of the canonical JSON, truncated to 16 hex chars.
    std::string hash() const;
};

/// Resolve the data root: explicit value, else $SAFEAUG_DATA_ROOT, else ./data.
std::string resolve_data_root(const std::string& configured);

}  // namespace safeaug
