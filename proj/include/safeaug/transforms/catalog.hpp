#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace safeaug {

/// One named transform with its magnitude parameters and application
/// probability. Parameter keys are transform-specific; defaults come from
/// default_catalog() and follow the conventional definitions of the common
/// fast-transform libraries (see transforms.cpp for the exact math).
struct AugmentationSpec {
    std::string name;
    std::map<std::string, double> params;
    double probability = 1.0;

    double param(const std::string& key) const {
        auto it = params.find(key);
        if (it == params.end()) {
            throw std::invalid_argument("AugmentationSpec '" + name + "': missing param '" + key + "'");
        }
        return it->second;
    }

    double param_or(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }

    void set_param(const std::string& key, double value) { params[key] = value; }
};

inline constexpr int kCatalogSize = 15;

/// Canonical catalog order; this order defines the label-index mapping
/// (name -> position 0..14) used by the augmentation-prediction head.
const std::array<std::string, kCatalogSize>& catalog_names();

/// Ordered list of transforms with a stable name -> index mapping.
/// The mapping defines label semantics for the whole run, so it is fixed at
/// construction and serialized into every checkpoint and report.
class AugmentationSet {
public:
    AugmentationSet() = default;
    explicit AugmentationSet(std::vector<AugmentationSpec> specs);

    int size() const { return static_cast<int>(specs_.size()); }
    const AugmentationSpec& at(int index) const { return specs_.at(index); }
    AugmentationSpec& at(int index) { return specs_.at(index); }
    const std::vector<AugmentationSpec>& specs() const { return specs_; }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    int index_of(const std::string& name) const;

    /// name list in index order; persisted so labels stay interpretable.
    std::vector<std::string> mapping() const;

private:
    std::vector<AugmentationSpec> specs_;
    std::map<std::string, int> index_;
};

struct CropConfig {
    int crop_height = 25;
    int crop_width = 25;
    /// RandomSizedCrop samples its source-crop height from this range before
    /// resizing to (crop_height, crop_width).
    int sized_crop_min = 25;
    int sized_crop_max = 32;
};

/// The full 15-transform catalog at default magnitudes, p = 1.
/// Crop targets are dataset-dependent and supplied by the caller
/// (25x25 for the 32x32 datasets, 50x50 for 64x64 inputs, and so on).
AugmentationSet default_catalog(const CropConfig& crops = {});

/// Crop configuration conventional for a given input resolution.
CropConfig crop_config_for_resolution(int height, int width);

/// Structured-text (JSON) round trip for catalog files.
std::string catalog_to_json(const AugmentationSet& set);
AugmentationSet catalog_from_json(const std::string& json_text);

}  // namespace safeaug
