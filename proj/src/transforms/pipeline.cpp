#include "safeaug/transforms/pipeline.hpp"

#include <stdexcept>
#include <string>

namespace safeaug {

SubsetSample sample_subset(const AugmentationSet& set, SubsetMode mode, int size_arg, Rng& rng) {
    if (size_arg < 0 || size_arg > set.size()) {
        throw std::invalid_argument("sample_subset: size " + std::to_string(size_arg) + " out of range for |set|=" +
                                    std::to_string(set.size()));
    }
    int k = size_arg;
    if (mode == SubsetMode::RandomSize) {
        k = static_cast<int>(rng.uniform_int(0, size_arg));
    }
    SubsetSample sample;
    sample.indices = rng.sample_without_replacement(set.size(), k);
    return sample;
}

PipelineResult apply_pipeline(const Image& image, const AugmentationSet& set, const SubsetSample& subset,
                              double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("apply_pipeline: p must lie in [0,1]");
    PipelineResult result{image, AugmentationLabelVector(set.size(), 0)};
    for (int idx : subset.indices) {
        if (idx < 0 || idx >= set.size()) {
            throw std::invalid_argument("apply_pipeline: subset index out of range");
        }
        if (!rng.bernoulli(p)) continue;
        result.image = apply_transform(result.image, set.at(idx), rng);
        result.labels[idx] = 1;
    }
    return result;
}

BatchPipelineResult apply_pipeline_batch(const std::vector<Image>& images, const AugmentationSet& set,
                                         const SubsetSample& subset, double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("apply_pipeline_batch: p must lie in [0,1]");
    BatchPipelineResult result{images, AugmentationLabelVector(set.size(), 0)};
    for (int idx : subset.indices) {
        if (idx < 0 || idx >= set.size()) {
            throw std::invalid_argument("apply_pipeline_batch: subset index out of range");
        }
        if (!rng.bernoulli(p)) continue;
        const AugmentationSpec& spec = set.at(idx);
        result.labels[idx] = 1;
        if (is_geometric(spec.name)) {
            // One geometry per batch keeps batch shapes rectangular.
            const TransformDraw draw = draw_transform_params(spec, rng);
            for (Image& img : result.images) img = apply_transform(img, spec, draw);
        } else {
            for (Image& img : result.images) img = apply_transform(img, spec, rng);
        }
    }
    return result;
}

SegBatchPipelineResult apply_pipeline_batch_seg(const std::vector<Image>& images,
                                                const std::vector<Image>& masks, const AugmentationSet& set,
                                                const SubsetSample& subset, double p, Rng& rng) {
    if (images.size() != masks.size()) {
        throw std::invalid_argument("apply_pipeline_batch_seg: image/mask count mismatch");
    }
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("apply_pipeline_batch_seg: p must lie in [0,1]");
    SegBatchPipelineResult result{images, masks, AugmentationLabelVector(set.size(), 0)};
    for (int idx : subset.indices) {
        if (idx < 0 || idx >= set.size()) {
            throw std::invalid_argument("apply_pipeline_batch_seg: subset index out of range");
        }
        if (!rng.bernoulli(p)) continue;
        const AugmentationSpec& spec = set.at(idx);
        result.labels[idx] = 1;
        if (is_geometric(spec.name)) {
            const TransformDraw draw = draw_transform_params(spec, rng);
            for (std::size_t i = 0; i < result.images.size(); ++i) {
                result.images[i] = apply_transform(result.images[i], spec, draw);
                result.masks[i] = apply_transform_to_mask(result.masks[i], spec, draw);
            }
        } else {
            for (Image& img : result.images) img = apply_transform(img, spec, rng);
        }
    }
    return result;
}

}  // namespace safeaug
