#include "safeaug/transforms/catalog.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace safeaug {

const std::array<std::string, kCatalogSize>& catalog_names() {
    static const std::array<std::string, kCatalogSize> names = {
        "HorizontalFlip",
        "VerticalFlip",
        "RandomRotate90",
        "Transpose",
        "ToGray",
        "ShiftScaleRotate",
        "RandomCrop",
        "CenterCrop",
        "RandomSizedCrop",
        "RandomContrast",
        "RandomBrightness",
        "RandomGamma",
        "CLAHE",
        "Blur",
        "GaussNoise",
    };
    return names;
}

AugmentationSet::AugmentationSet(std::vector<AugmentationSpec> specs) : specs_(std::move(specs)) {
    for (int i = 0; i < static_cast<int>(specs_.size()); ++i) {
        const std::string& name = specs_[i].name;
        if (std::find(catalog_names().begin(), catalog_names().end(), name) == catalog_names().end()) {
            throw std::invalid_argument("AugmentationSet: unknown transform '" + name + "'");
        }
        if (!index_.emplace(name, i).second) {
            throw std::invalid_argument("AugmentationSet: duplicate transform '" + name + "'");
        }
    }
}

int AugmentationSet::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::invalid_argument("AugmentationSet: '" + name + "' not in set");
    }
    return it->second;
}

std::vector<std::string> AugmentationSet::mapping() const {
    std::vector<std::string> names;
    names.reserve(specs_.size());
    for (const auto& s : specs_) names.push_back(s.name);
    return names;
}

AugmentationSet default_catalog(const CropConfig& crops) {
    std::vector<AugmentationSpec> specs;
    specs.reserve(kCatalogSize);
    auto add = [&specs](const std::string& name, std::map<std::string, double> params) {
        specs.push_back(AugmentationSpec{name, std::move(params), 1.0});
    };

    add("HorizontalFlip", {});
    add("VerticalFlip", {});
    // Quarter turns: factor drawn uniformly from {0,1,2,3}.
    add("RandomRotate90", {});
    add("Transpose", {});
    add("ToGray", {});
    // Shift up to 6.25% of each dimension, scale in [0.9, 1.1], rotation up
    // to 45 degrees; bilinear sampling with reflect-101 borders.
    add("ShiftScaleRotate", {{"shift_limit", 0.0625}, {"scale_limit", 0.1}, {"rotate_limit", 45.0}});
    add("RandomCrop", {{"height", double(crops.crop_height)}, {"width", double(crops.crop_width)}});
    add("CenterCrop", {{"height", double(crops.crop_height)}, {"width", double(crops.crop_width)}});
    // Source crop height drawn from [min_height, max_height], width keeps the
    // target aspect ratio, result resized to (height, width).
    add("RandomSizedCrop", {{"min_height", double(crops.sized_crop_min)},
                            {"max_height", double(crops.sized_crop_max)},
                            {"height", double(crops.crop_height)},
                            {"width", double(crops.crop_width)}});
    // Blend toward the mean luminance: out = a*x + (1-a)*mean, a in [0.8, 1.2].
    add("RandomContrast", {{"limit", 0.2}});
    // Multiplicative factor in [0.8, 1.2].
    add("RandomBrightness", {{"limit", 0.2}});
    // Gamma exponent in [0.8, 1.2] applied to unit-interval pixels.
    add("RandomGamma", {{"gamma_lo", 0.8}, {"gamma_hi", 1.2}});
    // Clip limit drawn from [1, 4], 8x8 tile grid, applied on the 8-bit scale.
    add("CLAHE", {{"clip_limit", 4.0}, {"tile_grid", 8.0}});
    // Box blur with odd kernel size in {3, 5, 7}.
    add("Blur", {{"kernel_min", 3.0}, {"kernel_max", 7.0}});
    // Variance drawn from [10, 50] on the 8-bit scale.
    add("GaussNoise", {{"var_min", 10.0}, {"var_max", 50.0}});

    return AugmentationSet(std::move(specs));
}

CropConfig crop_config_for_resolution(int height, int width) {
    CropConfig c;
    const int side = std::min(height, width);
    // 25/32 of the short side, the conventional ratio for the 32x32 datasets.
    c.crop_height = std::max(1, static_cast<int>(std::lround(side * 25.0 / 32.0)));
    c.crop_width = c.crop_height;
    if (side == 64) {
        c.crop_height = c.crop_width = 50;
    }
    c.sized_crop_min = c.crop_height;
    c.sized_crop_max = side;
    return c;
}

std::string catalog_to_json(const AugmentationSet& set) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["transforms"] = nlohmann::json::array();
    for (const auto& spec : set.specs()) {
        nlohmann::json t;
        t["name"] = spec.name;
        t["probability"] = spec.probability;
        t["params"] = nlohmann::json::object();
        for (const auto& [k, v] : spec.params) t["params"][k] = v;
        j["transforms"].push_back(std::move(t));
    }
    return j.dump(2);
}

AugmentationSet catalog_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    if (!j.contains("transforms")) {
        throw std::invalid_argument("catalog_from_json: missing 'transforms'");
    }
    std::vector<AugmentationSpec> specs;
    for (const auto& t : j["transforms"]) {
        AugmentationSpec spec;
        spec.name = t.at("name").get<std::string>();
        spec.probability = t.value("probability", 1.0);
        if (t.contains("params")) {
            for (auto it = t["params"].begin(); it != t["params"].end(); ++it) {
                spec.params[it.key()] = it.value().get<double>();
            }
        }
        specs.push_back(std::move(spec));
    }
    return AugmentationSet(std::move(specs));
}

}  // namespace safeaug
