#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safeaug/core/image.hpp"
#include "safeaug/core/rng.hpp"
#include "safeaug/nn/tensor.hpp"

namespace safeaug {

enum class LabelKind { ClassIndex, Mask };

/// Per-channel normalization statistics, computed on the train split only.
struct NormStats {
    std::vector<double> mean;  // per channel
    std::vector<double> std;   // per channel

    Image apply(const Image& img) const;
    Image invert(const Image& img) const;
};

struct Split {
    std::vector<Image> images;
    /// ClassIndex: one label per image. Mask: H*W entries per image
    /// (class indices, 255 = ignore).
    std::vector<std::vector<int>> labels;

    std::size_t size() const { return images.size(); }
};

struct DatasetHandle {
    std::string name;
    LabelKind label_kind = LabelKind::ClassIndex;
    int num_classes = 0;
    int input_height = 0;
    int input_width = 0;
    int input_channels = 0;
    NormStats stats;
    Split train;
    Split val;
    Split test;

    int class_of(const Split& split, std::size_t i) const { return split.labels[i][0]; }
};

NormStats compute_norm_stats(const std::vector<Image>& train_images);

/// Deterministic stratified subset: per-class counts within +-1 of n/K.
/// Selection order is seeded and reproducible.
Split stratified_subset(const Split& split, int subset_size, int num_classes, Rng& rng);

/// Carve a validation split off the end of train (deterministic, seeded
/// shuffle first). fraction in (0, 1).
void carve_validation(DatasetHandle& ds, double fraction, Rng& rng);

/// Checksum manifest: { "files": { "<relpath>": {"size": N, "sha256": "..."|null} } }.
/// Size is always verified; sha256 only when present in the manifest.
void verify_against_manifest(const std::string& manifest_path, const std::string& root,
                             const std::vector<std::string>& relpaths);

/// Registry entry point used by workflows and the CLI. Known names:
/// cifar10, cifar100, svhn, tiny-imagenet, cityscapes, probe, synthseg,
/// cifar10-fixture. subset_size 0 keeps the full train split.
DatasetHandle load_dataset(const std::string& name, const std::string& root, int subset_size,
                           std::uint64_t seed);

/// Images of one split packed as an (N, C, H, W) tensor after normalization.
nn::Tensor to_batch_tensor(const std::vector<Image>& images, const NormStats& stats, int height, int width);

}  // namespace safeaug
