#include "safeaug/analyzer/safety.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safeaug {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> mean_logits(const nn::Tensor& logits) {
    if (logits.ndim() != 2 || logits.dim(1) != kCatalogSize) {
        throw std::invalid_argument("BatchPredictor must return (N, 15) logits, got " + logits.shape_str());
    }
    const int n = logits.dim(0);
    std::vector<double> out(kCatalogSize, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kCatalogSize; ++j) out[j] += logits.at2(i, j);
    for (double& v : out) v /= n;
    return out;
}

}  // namespace

bool SafetyMetrics::complete() const {
    return static_cast<int>(mapping.size()) == kCatalogSize &&
           static_cast<int>(clean_fp_rate.size()) == kCatalogSize &&
           static_cast<int>(aug_accuracy.size()) == kCatalogSize && clean_units > 0 && aug_units > 0;
}

bool SafeSet::contains(const std::string& name) const {
    return std::find(members.begin(), members.end(), name) != members.end();
}

SafetyMetrics evaluate_clean_false_positives(BatchPredictor& predictor, const std::vector<Image>& clean_test,
                                             int batch_size, double decision_threshold) {
    if (clean_test.empty()) throw std::invalid_argument("evaluate_clean_false_positives: empty test set");
    if (batch_size < 1) throw std::invalid_argument("evaluate_clean_false_positives: bad batch size");

    SafetyMetrics m;
    m.clean_fp_rate.assign(kCatalogSize, 0.0);
    std::vector<int> positive(kCatalogSize, 0);
    for (std::size_t start = 0; start < clean_test.size(); start += batch_size) {
        EvalUnit unit;
        unit.fired.assign(kCatalogSize, 0);
        const std::size_t end = std::min(clean_test.size(), start + batch_size);
        unit.images.assign(clean_test.begin() + start, clean_test.begin() + end);
        const nn::Tensor logits = predictor.predict(unit);
        UnitTrace trace{unit.fired, mean_logits(logits)};
        for (int j = 0; j < kCatalogSize; ++j) {
            if (sigmoid(trace.mean_logits[j]) > decision_threshold) positive[j]++;
        }
        m.clean_trace.push_back(std::move(trace));
        m.clean_units++;
    }
    for (int j = 0; j < kCatalogSize; ++j) {
        m.clean_fp_rate[j] = static_cast<double>(positive[j]) / m.clean_units;
    }
    return m;
}

SafetyMetrics evaluate_augmentation_accuracy(BatchPredictor& predictor, const std::vector<Image>& test,
                                             const AugmentationSet& set, const AugSamplerConfig& sampler,
                                             std::uint64_t seed, double decision_threshold) {
    if (test.empty()) throw std::invalid_argument("evaluate_augmentation_accuracy: empty test set");
    if (set.size() != kCatalogSize) {
        throw std::invalid_argument("evaluate_augmentation_accuracy: expected the full 15-transform catalog");
    }
    Rng rng(seed);
    SafetyMetrics m;
    std::vector<int> correct(kCatalogSize, 0);
    std::vector<int> fired_correct(kCatalogSize, 0);
    m.aug_fired_units.assign(kCatalogSize, 0);

    for (int pass = 0; pass < std::max(1, sampler.passes); ++pass) {
        for (std::size_t start = 0; start < test.size(); start += sampler.batch_size) {
            const std::size_t end = std::min(test.size(), start + sampler.batch_size);
            std::vector<Image> batch(test.begin() + start, test.begin() + end);
            const SubsetSample subset =
                sample_subset(set, SubsetMode::RandomSize, sampler.max_subset_size, rng);
            BatchPipelineResult piped = apply_pipeline_batch(batch, set, subset, sampler.p, rng);

            EvalUnit unit{std::move(piped.images), piped.labels};
            const nn::Tensor logits = predictor.predict(unit);
            UnitTrace trace{unit.fired, mean_logits(logits)};
            for (int j = 0; j < kCatalogSize; ++j) {
                const bool predicted = sigmoid(trace.mean_logits[j]) > decision_threshold;
                const bool truth = unit.fired[j] != 0;
                if (predicted == truth) correct[j]++;
                if (truth) {
                    m.aug_fired_units[j]++;
                    if (predicted) fired_correct[j]++;
                }
            }
            m.aug_trace.push_back(std::move(trace));
            m.aug_units++;
        }
    }

    m.aug_accuracy.assign(kCatalogSize, 0.0);
    m.aug_recall.assign(kCatalogSize, 0.0);
    for (int j = 0; j < kCatalogSize; ++j) {
        m.aug_accuracy[j] = static_cast<double>(correct[j]) / m.aug_units;
        m.aug_recall[j] = m.aug_fired_units[j] > 0
                              ? static_cast<double>(fired_correct[j]) / m.aug_fired_units[j]
                              : 0.0;
    }
    return m;
}

SafetyMetrics merge_metrics(const SafetyMetrics& clean, const SafetyMetrics& augmented,
                            const std::vector<std::string>& mapping) {
    if (static_cast<int>(mapping.size()) != kCatalogSize) {
        throw std::invalid_argument("merge_metrics: mapping must have 15 names");
    }
    SafetyMetrics m;
    m.mapping = mapping;
    m.clean_fp_rate = clean.clean_fp_rate;
    m.clean_units = clean.clean_units;
    m.clean_trace = clean.clean_trace;
    m.aug_accuracy = augmented.aug_accuracy;
    m.aug_recall = augmented.aug_recall;
    m.aug_fired_units = augmented.aug_fired_units;
    m.aug_units = augmented.aug_units;
    m.aug_trace = augmented.aug_trace;
    if (!m.complete()) throw std::invalid_argument("merge_metrics: metrics incomplete");
    return m;
}

SafeSet select_safe_set(const SafetyMetrics& metrics, const Thresholds& thresholds) {
    if (!metrics.complete()) {
        throw std::invalid_argument("select_safe_set: metrics must cover all 15 labels with support");
    }
    SafeSet safe;
    safe.thresholds = thresholds;
    for (int j = 0; j < kCatalogSize; ++j) {
        if (metrics.clean_fp_rate[j] <= thresholds.fp_max && metrics.aug_accuracy[j] <= thresholds.acc_max) {
            safe.members.push_back(metrics.mapping[j]);
        }
    }
    return safe;
}

SafeSet refine_safe_set(const SafeSet& safe, const std::vector<std::string>& exclusions) {
    SafeSet out;
    out.thresholds = safe.thresholds;
    out.provenance = "manual refinement" + (safe.provenance.empty() ? "" : " of " + safe.provenance);
    const auto& names = catalog_names();
    for (const std::string& ex : exclusions) {
        if (std::find(names.begin(), names.end(), ex) == names.end()) {
            out.warnings.push_back("exclusion '" + ex + "' is not a catalog transform");
        }
    }
    for (const std::string& name : safe.members) {
        if (std::find(exclusions.begin(), exclusions.end(), name) == exclusions.end()) {
            out.members.push_back(name);
        }
    }
    return out;
}

}  // namespace safeaug
