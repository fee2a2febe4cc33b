#include <doctest.h>

#include <cmath>

#include "safeaug/transforms/pipeline.hpp"
#include "safeaug/transforms/transforms.hpp"

using namespace safeaug;

namespace {

Image make_image(int h, int w, int c, std::uint64_t seed = 7) {
    Rng rng(seed);
    Image img(h, w, c);
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0.05, 0.95));
    return img;
}

AugmentationSpec spec_of(const AugmentationSet& set, const std::string& name) {
    return set.at(set.index_of(name));
}

}  // namespace

TEST_CASE("horizontal flip mirrors columns") {
    Image img(2, 2, 1, {1, 2, 3, 4});
    Rng rng(0);
    Image out = apply_transform(img, AugmentationSpec{"HorizontalFlip", {}, 1.0}, rng);
    CHECK(out.data() == std::vector<float>{2, 1, 4, 3});
}

TEST_CASE("center crop takes the central block") {
    Image img(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at(y, x, 0) = static_cast<float>(10 * y + x);
    Rng rng(0);
    Image out = apply_transform(img, AugmentationSpec{"CenterCrop", {{"height", 2}, {"width", 2}}, 1.0}, rng);
    CHECK(out.height() == 2);
    CHECK(out.data() == std::vector<float>{11, 12, 21, 22});
}

TEST_CASE("gamma of exactly one is the identity") {
    Image img = make_image(8, 8, 3);
    Rng rng(1);
    Image out =
        apply_transform(img, AugmentationSpec{"RandomGamma", {{"gamma_lo", 1.0}, {"gamma_hi", 1.0}}, 1.0}, rng);
    CHECK(out == img);
}

TEST_CASE("seeded gauss noise keeps the mean within 3 sigma of the constant input") {
    const int h = 24, w = 24, c = 3;
    Image img(h, w, c, 0.5f);
    AugmentationSpec spec{"GaussNoise", {{"var_min", 10}, {"var_max", 50}}, 1.0};
    Rng rng(99);
    const TransformDraw draw = draw_transform_params(spec, rng);
    const double sigma = std::sqrt(10.0 + draw.u0 * 40.0) / 255.0;
    Image out = apply_transform(img, spec, draw);
    const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(h) * w * c);
    CHECK(std::abs(out.mean() - img.mean()) <= bound);
}

TEST_CASE("cutout") {
    Image img = make_image(8, 8, 1);
    Rng rng(3);
    SUBCASE("non-positive size is rejected") {
        CHECK_THROWS_AS(apply_cutout(img, 0, rng), std::invalid_argument);
    }
    SUBCASE("size equal to the image fully fills it") {
        Image out = apply_cutout(img, 8, rng, 0.25f);
        for (float v : out.data()) CHECK(v == 0.25f);
    }
    SUBCASE("shape is unchanged and exactly size*size pixels change at most") {
        Image out = apply_cutout(img, 3, rng);
        CHECK(out.same_shape(img));
        int changed = 0;
        for (std::size_t i = 0; i < img.size(); ++i) changed += out.data()[i] != img.data()[i];
        CHECK(changed == 9);  // fits fully inside by construction
    }
}

TEST_CASE("output_shape contracts") {
    const AugmentationSet catalog = default_catalog();
    CHECK(output_shape(spec_of(catalog, "CenterCrop"), {32, 32, 3}) == Shape3{25, 25, 3});
    CHECK(output_shape(spec_of(catalog, "HorizontalFlip"), {64, 64, 3}) == Shape3{64, 64, 3});
    CHECK(output_shape(spec_of(catalog, "Transpose"), {50, 64, 3}) == Shape3{64, 50, 3});
    CHECK_THROWS_AS(output_shape(spec_of(catalog, "CenterCrop"), {16, 16, 3}), std::invalid_argument);

    SUBCASE("every transform has a shape contract on square inputs") {
        for (const auto& spec : catalog.specs()) {
            const Shape3 out = output_shape(spec, {32, 32, 3});
            CHECK(out.channels == 3);
            if (is_geometric(spec.name)) {
                CHECK(out.height >= 1);
            } else {
                CHECK(out == Shape3{32, 32, 3});
            }
        }
    }
}

TEST_CASE("involutions") {
    Image img = make_image(16, 12, 3);
    Rng rng(11);
    for (const char* name : {"HorizontalFlip", "VerticalFlip", "Transpose"}) {
        Image twice = apply_transform(apply_transform(img, {name, {}, 1.0}, rng), {name, {}, 1.0}, rng);
        CHECK_MESSAGE(twice == img, name);
    }
    // Four identical quarter turns are the identity.
    TransformDraw draw;
    draw.u0 = 0.3;  // maps to k=1
    Image turned = img;
    for (int i = 0; i < 4; ++i) turned = apply_transform(turned, {"RandomRotate90", {}, 1.0}, draw);
    CHECK(turned == img);
}

TEST_CASE("photometric transforms preserve shape; apply_transform never mutates its input") {
    const AugmentationSet catalog = default_catalog();
    const Image img = make_image(32, 32, 3);
    const Image copy = img;
    for (const auto& spec : catalog.specs()) {
        Rng rng(21);
        Image out = apply_transform(img, spec, rng);
        CHECK(img == copy);
        if (!is_geometric(spec.name)) {
            CHECK_MESSAGE(out.same_shape(img), spec.name);
        }
    }
}

TEST_CASE("fixed seed gives bit-identical outputs for every catalog transform") {
    const AugmentationSet catalog = default_catalog();
    const Image img = make_image(32, 32, 3);
    for (const auto& spec : catalog.specs()) {
        Rng a(12345), b(12345);
        Image out_a = apply_transform(img, spec, a);
        Image out_b = apply_transform(img, spec, b);
        CHECK_MESSAGE(out_a == out_b, spec.name);
    }
}

TEST_CASE("unknown transform and bad crops are rejected") {
    Image img = make_image(8, 8, 3);
    Rng rng(0);
    CHECK_THROWS_AS(apply_transform(img, {"Posterize", {}, 1.0}, rng), std::invalid_argument);
    CHECK_THROWS_AS(apply_transform(img, {"RandomCrop", {{"height", 9}, {"width", 3}}, 1.0}, rng),
                    std::invalid_argument);
}

TEST_CASE("pipeline basics") {
    const AugmentationSet catalog = default_catalog();
    const Image img = make_image(32, 32, 3);

    SUBCASE("empty subset is the identity with all-zero labels") {
        Rng rng(5);
        auto res = apply_pipeline(img, catalog, SubsetSample{}, 0.7, rng);
        CHECK(res.image == img);
        CHECK(std::count(res.labels.begin(), res.labels.end(), 0) == kCatalogSize);
    }
    SUBCASE("p=0 is the identity map with all-zero labels") {
        Rng rng(5);
        SubsetSample subset;
        subset.indices = {0, 4, 9};
        auto res = apply_pipeline(img, catalog, subset, 0.0, rng);
        CHECK(res.image == img);
        CHECK(std::count(res.labels.begin(), res.labels.end(), 0) == kCatalogSize);
    }
    SUBCASE("p=1 with a single transform sets exactly that label") {
        Rng rng(5);
        SubsetSample subset;
        subset.indices = {catalog.index_of("HorizontalFlip")};
        auto res = apply_pipeline(img, catalog, subset, 1.0, rng);
        CHECK(res.labels[catalog.index_of("HorizontalFlip")] == 1);
        CHECK(std::count(res.labels.begin(), res.labels.end(), 1) == 1);
    }
    SUBCASE("pipeline determinism under a fixed seed") {
        SubsetSample subset;
        subset.indices = {1, 13, 14, 6};
        Rng a(777), b(777);
        auto ra = apply_pipeline(img, catalog, subset, 0.5, a);
        auto rb = apply_pipeline(img, catalog, subset, 0.5, b);
        CHECK(ra.image == rb.image);
        CHECK(ra.labels == rb.labels);
    }
    SUBCASE("labels mark fired transforms only") {
        SubsetSample subset;
        subset.indices = {0, 1, 2, 3, 4};
        Rng rng(31);
        auto res = apply_pipeline(img, catalog, subset, 0.5, rng);
        for (int i = 5; i < kCatalogSize; ++i) CHECK(res.labels[i] == 0);
    }
}

TEST_CASE("batch pipeline shares labels and crop geometry across the batch") {
    const AugmentationSet catalog = default_catalog();
    std::vector<Image> images = {make_image(32, 32, 3, 1), make_image(32, 32, 3, 2)};
    SubsetSample subset;
    subset.indices = {catalog.index_of("RandomCrop")};
    Rng rng(9);
    auto res = apply_pipeline_batch(images, catalog, subset, 1.0, rng);
    REQUIRE(res.labels[catalog.index_of("RandomCrop")] == 1);
    CHECK(res.images[0].height() == 25);
    CHECK(res.images[1].height() == 25);
    // Same offsets: crop of a shared constant region must agree.
    std::vector<Image> same = {make_image(32, 32, 3, 5), make_image(32, 32, 3, 5)};
    Rng rng2(9);
    auto res2 = apply_pipeline_batch(same, catalog, subset, 1.0, rng2);
    CHECK(res2.images[0] == res2.images[1]);
}

TEST_CASE("mask transforms follow image geometry") {
    const AugmentationSet catalog = default_catalog();
    Image mask(6, 6, 1);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) mask.at(y, x, 0) = static_cast<float>(y);

    TransformDraw draw;
    Image flipped = apply_transform_to_mask(mask, spec_of(catalog, "VerticalFlip"), draw);
    CHECK(flipped.at(0, 0, 0) == 5.0f);
    Image untouched = apply_transform_to_mask(mask, spec_of(catalog, "RandomBrightness"), draw);
    CHECK(untouched == mask);

    // Rotation pulls border labels from outside the source: those become 255.
    Image rotated = rotate_mask(mask, 30.0);
    bool has_ignore = false;
    for (float v : rotated.data()) has_ignore = has_ignore || v == 255.0f;
    CHECK(has_ignore);
}

TEST_CASE("catalog serialization round-trips") {
    const AugmentationSet catalog = default_catalog(crop_config_for_resolution(64, 64));
    const std::string json = catalog_to_json(catalog);
    const AugmentationSet back = catalog_from_json(json);
    REQUIRE(back.size() == kCatalogSize);
    for (int i = 0; i < kCatalogSize; ++i) {
        CHECK(back.at(i).name == catalog.at(i).name);
        CHECK(back.at(i).params == catalog.at(i).params);
    }
    CHECK(back.at(back.index_of("RandomCrop")).param("height") == 50);
}

TEST_CASE("catalog rejects duplicates and unknown names") {
    CHECK_THROWS_AS(AugmentationSet({{"HorizontalFlip", {}, 1.0}, {"HorizontalFlip", {}, 1.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(AugmentationSet({{"NotATransform", {}, 1.0}}), std::invalid_argument);
}
