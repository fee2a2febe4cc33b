#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "safeaug/data/dataset.hpp"

namespace safeaug {

/// Synthetic classification dataset with known safe/unsafe ground truth.
///
/// Asymmetries are distribution features a transform destroys, making it
/// detectable (vertical_gradient: every image is brighter at the top, so a
/// vertical flip is out-of-distribution). Nuisances are jitters baked into
/// the raw data i.i.d., so the matching transform cannot be told apart
/// (brightness: a global factor in [0.8, 1.2] already varies per image).
struct SyntheticProbeSpec {
    int sample_count = 5000;  // train split; val/test are derived fractions
    int image_size = 32;
    int num_classes = 4;  // classes differ by blob count
    std::vector<std::string> asymmetries = {"vertical_gradient"};
    std::vector<std::string> nuisances = {"brightness", "tint"};
    std::uint64_t seed = 0;

    void validate() const;
};

DatasetHandle make_synthetic_probe(const SyntheticProbeSpec& spec);

/// Closed-form detector for vertical flips on probe-style images: mean of
/// the top half minus mean of the bottom half, thresholded at zero.
double vertical_gradient_feature(const Image& img);

/// 3-class toy segmentation set (background / disk / square on a textured
/// background) standing in for the full-scale segmentation path.
DatasetHandle make_synthetic_segmentation(std::uint64_t seed, int sample_count);

/// Serialize a classification dataset as an image directory plus label
/// manifest (one 8-bit binary PGM/PPM-style raw file per image).
void export_probe(const DatasetHandle& ds, const std::string& dir);

}  // namespace safeaug
