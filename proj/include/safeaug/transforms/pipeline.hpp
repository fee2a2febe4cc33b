#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "safeaug/core/image.hpp"
#include "safeaug/core/rng.hpp"
#include "safeaug/transforms/catalog.hpp"
#include "safeaug/transforms/transforms.hpp"

namespace safeaug {

/// Binary 15-vector recording which catalog transforms actually fired on a
/// batch; index semantics come from the AugmentationSet mapping.
using AugmentationLabelVector = std::vector<std::uint8_t>;

/// Indices into an AugmentationSet, in application order.
struct SubsetSample {
    std::vector<int> indices;
    int size() const { return static_cast<int>(indices.size()); }
    bool empty() const { return indices.empty(); }
};

enum class SubsetMode { RandomSize, FixedSize };

/// RandomSize draws |a| uniformly from {0..max_size} then samples that many
/// distinct indices; FixedSize samples exactly k distinct indices. Sampled
/// order is application order.
SubsetSample sample_subset(const AugmentationSet& set, SubsetMode mode, int size_arg, Rng& rng);

struct PipelineResult {
    Image image;
    AugmentationLabelVector labels;
};

/// Apply the subset to one image: each transform independently fires with
/// probability p; labels mark the transforms that actually ran.
PipelineResult apply_pipeline(const Image& image, const AugmentationSet& set, const SubsetSample& subset,
                              double per_transform_probability, Rng& rng);

struct BatchPipelineResult {
    std::vector<Image> images;
    AugmentationLabelVector labels;  // shared by every item in the batch
};

/// Batch variant: fire decisions are made once per batch so all items share
/// one label vector, and crop geometry is drawn once so batch shapes stay
/// rectangular. Photometric magnitudes are redrawn per image.
BatchPipelineResult apply_pipeline_batch(const std::vector<Image>& images, const AugmentationSet& set,
                                         const SubsetSample& subset, double per_transform_probability,
                                         Rng& rng);

struct SegBatchPipelineResult {
    std::vector<Image> images;
    std::vector<Image> masks;  // 1-channel class-id images, 255 = ignore
    AugmentationLabelVector labels;
};

/// Segmentation variant: masks follow every geometric transform of their
/// image (nearest-neighbour) and ignore photometric ones.
SegBatchPipelineResult apply_pipeline_batch_seg(const std::vector<Image>& images,
                                                const std::vector<Image>& masks, const AugmentationSet& set,
                                                const SubsetSample& subset, double per_transform_probability,
                                                Rng& rng);

}  // namespace safeaug
