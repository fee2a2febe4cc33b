#pragma once

#include "safeaug/core/image.hpp"
#include "safeaug/core/rng.hpp"
#include "safeaug/transforms/catalog.hpp"

namespace safeaug {

/// Randomness a transform needs for one application, drawn up front so the
/// same parameters can be reused across a batch (crop geometry is shared
/// batch-wide; photometric magnitudes are redrawn per image).
struct TransformDraw {
    double u0 = 0.0;  // primary uniform draw in [0,1)
    double u1 = 0.0;
    double u2 = 0.0;
    double u3 = 0.0;
    std::uint64_t noise_seed = 0;  // per-pixel noise stream (GaussNoise)
};

TransformDraw draw_transform_params(const AugmentationSpec& spec, Rng& rng);

/// Apply one catalog transform with pre-drawn randomness.
Image apply_transform(const Image& image, const AugmentationSpec& spec, const TransformDraw& draw);

/// Apply one catalog transform, drawing randomness from rng.
Image apply_transform(const Image& image, const AugmentationSpec& spec, Rng& rng);

/// Occlude one size x size square at a uniformly random centre; the square
/// may clip at the borders. fill is the post-occlusion pixel value, zero by
/// default because cutout runs after normalization in the training path.
Image apply_cutout(const Image& image, int size, Rng& rng, float fill = 0.0f);

/// Post-transform shape; crops return their target, Transpose swaps H and W,
/// photometric transforms (including ToGray, which replicates luminance to
/// keep C constant) preserve the input shape.
Shape3 output_shape(const AugmentationSpec& spec, const Shape3& input_shape);

/// Bilinear resize (half-pixel centre convention, clamped edges).
Image resize_bilinear(const Image& image, int out_height, int out_width);

/// Nearest-neighbour resize; used for label masks.
Image resize_nearest(const Image& image, int out_height, int out_width);

/// Segmentation masks follow the geometric transforms of their image with
/// nearest-neighbour sampling; pixels pulled from outside the source become
/// the ignore label (255). Photometric transforms leave the mask untouched.
/// Pass the same TransformDraw that was applied to the image.
Image apply_transform_to_mask(const Image& mask, const AugmentationSpec& spec, const TransformDraw& draw);

/// Plain rotation about the image centre (bilinear, reflect-101 borders);
/// mask variant samples nearest and writes 255 outside the source.
Image rotate_image(const Image& image, double angle_deg);
Image rotate_mask(const Image& mask, double angle_deg);

bool is_geometric(const std::string& name);

}  // namespace safeaug
