#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "safeaug/transforms/pipeline.hpp"

using namespace safeaug;

TEST_CASE("random_size(0) always yields the empty subset") {
    const AugmentationSet catalog = default_catalog();
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        CHECK(sample_subset(catalog, SubsetMode::RandomSize, 0, rng).empty());
    }
}

TEST_CASE("fixed_size(15) is a permutation of the catalog") {
    const AugmentationSet catalog = default_catalog();
    Rng rng(2);
    SubsetSample s = sample_subset(catalog, SubsetMode::FixedSize, 15, rng);
    std::vector<int> sorted = s.indices;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 15; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("sizes beyond the set are rejected") {
    const AugmentationSet catalog = default_catalog();
    Rng rng(3);
    CHECK_THROWS_AS(sample_subset(catalog, SubsetMode::FixedSize, 16, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_subset(catalog, SubsetMode::RandomSize, 16, rng), std::invalid_argument);
}

TEST_CASE("random-size subset size is uniform over {0..5} within 0.01 over 1e5 draws") {
    const AugmentationSet catalog = default_catalog();
    Rng rng(42);
    const int draws = 100000;
    std::vector<int> counts(6, 0);
    for (int i = 0; i < draws; ++i) {
        counts[sample_subset(catalog, SubsetMode::RandomSize, 5, rng).size()]++;
    }
    for (int s = 0; s <= 5; ++s) {
        const double freq = static_cast<double>(counts[s]) / draws;
        CHECK(std::abs(freq - 1.0 / 6.0) <= 0.01);
    }
}

TEST_CASE("subset members are distinct and uniformly placed") {
    const AugmentationSet catalog = default_catalog();
    Rng rng(42);
    std::vector<int> hit(15, 0);
    const int draws = 30000;
    for (int i = 0; i < draws; ++i) {
        SubsetSample s = sample_subset(catalog, SubsetMode::FixedSize, 3, rng);
        std::vector<int> sorted = s.indices;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        for (int idx : s.indices) hit[idx]++;
    }
    // Each index appears with probability 3/15 = 0.2.
    for (int i = 0; i < 15; ++i) {
        CHECK(std::abs(static_cast<double>(hit[i]) / draws - 0.2) <= 0.015);
    }
}

TEST_CASE("per-transform fire rate matches p within 0.01 over 1e5 pipeline draws") {
    const AugmentationSet catalog = default_catalog();
    // Cheap photometric-only subset keeps this statistical test fast.
    SubsetSample subset;
    subset.indices = {catalog.index_of("RandomBrightness"), catalog.index_of("RandomGamma"),
                      catalog.index_of("RandomContrast")};
    Image img(4, 4, 1, 0.5f);
    Rng rng(7);
    const int draws = 100000;
    std::vector<int> fired(15, 0);
    for (int i = 0; i < draws; ++i) {
        auto res = apply_pipeline(img, catalog, subset, 0.5, rng);
        for (int j = 0; j < 15; ++j) fired[j] += res.labels[j];
    }
    for (int idx : subset.indices) {
        CHECK(std::abs(static_cast<double>(fired[idx]) / draws - 0.5) <= 0.01);
    }
}

TEST_CASE("rng determinism and child-stream independence") {
    Rng a(9), b(9);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng parent(9);
    Rng c0 = parent.child(0), c1 = parent.child(1);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += c0.next_u64() == c1.next_u64();
    CHECK(same == 0);
}

TEST_CASE("rng uniform_int covers its range uniformly") {
    Rng rng(123);
    std::vector<int> counts(7, 0);
    const int draws = 70000;
    for (int i = 0; i < draws; ++i) counts[rng.uniform_int(0, 6)]++;
    for (int c : counts) CHECK(std::abs(c / static_cast<double>(draws) - 1.0 / 7) < 0.01);
}
