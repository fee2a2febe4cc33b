#pragma once

#include <map>
#include <optional>
#include <string>

#include "safeaug/analyzer/safety.hpp"
#include "safeaug/transforms/catalog.hpp"

namespace safeaug {

/// Everything emit_report writes, in memory; serialized as versioned JSON
/// (per-unit traces included so every rate can be recounted offline) plus an
/// SVG bar chart: clean-set false positives and augmentation-classification
/// accuracy per transform, with a reference line at the no-augmentation task
/// accuracy when one is provided.
struct SafetyReport {
    int schema_version = 1;
    SafetyMetrics metrics;
    SafeSet safe_set;
    /// Task accuracy when training with each single augmentation (optional,
    /// expensive series), keyed by transform name.
    std::map<std::string, double> per_augmentation_task_accuracy;
    std::optional<double> reference_task_accuracy;  // no-augmentation baseline
};

std::string report_to_json(const SafetyReport& report);
SafetyReport report_from_json(const std::string& json_text);

std::string report_to_svg(const SafetyReport& report);

/// Writes <stem>.json and <stem>.svg; returns the two paths.
std::pair<std::string, std::string> emit_report(const SafetyReport& report, const std::string& stem);

/// Safe set as a catalog-format file (members only, full default params)
/// directly loadable where an augmentation set is expected.
std::string safe_set_to_catalog_json(const SafeSet& safe, const AugmentationSet& catalog);

}  // namespace safeaug
