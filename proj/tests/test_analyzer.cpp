#include <doctest.h>

#include <cmath>

#include "safeaug/analyzer/report.hpp"
#include "safeaug/analyzer/safety.hpp"

using namespace safeaug;

namespace {

std::vector<Image> tiny_test_set(int n) {
    std::vector<Image> out;
    Rng rng(404);
    for (int i = 0; i < n; ++i) {
        Image img(8, 8, 3);
        for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0.2, 0.8));
        out.push_back(std::move(img));
    }
    return out;
}

class ConstantPredictor : public BatchPredictor {
public:
    explicit ConstantPredictor(double logit) : logit_(logit) {}
    nn::Tensor predict(const EvalUnit& unit) override {
        nn::Tensor t({static_cast<int>(unit.images.size()), kCatalogSize});
        for (auto& v : t.vec()) v = logit_;
        return t;
    }

private:
    double logit_;
};

// Answers with the unit's own fired bits: the perfect oracle.
class OraclePredictor : public BatchPredictor {
public:
    nn::Tensor predict(const EvalUnit& unit) override {
        nn::Tensor t({static_cast<int>(unit.images.size()), kCatalogSize});
        for (int i = 0; i < t.dim(0); ++i)
            for (int j = 0; j < kCatalogSize; ++j) t.at2(i, j) = unit.fired[j] ? 40.0 : -40.0;
        return t;
    }
};

class CoinFlipPredictor : public BatchPredictor {
public:
    explicit CoinFlipPredictor(std::uint64_t seed) : rng_(seed) {}
    nn::Tensor predict(const EvalUnit& unit) override {
        nn::Tensor t({static_cast<int>(unit.images.size()), kCatalogSize});
        for (int j = 0; j < kCatalogSize; ++j) {
            const double v = rng_.bernoulli(0.5) ? 40.0 : -40.0;  // one flip per unit and label
            for (int i = 0; i < t.dim(0); ++i) t.at2(i, j) = v;
        }
        return t;
    }

private:
    Rng rng_;
};

SafetyMetrics full_metrics(BatchPredictor& pred, const std::vector<Image>& test, int passes = 2,
                           std::uint64_t seed = 7) {
    const AugmentationSet catalog = default_catalog(crop_config_for_resolution(8, 8));
    AugSamplerConfig sampler;
    sampler.batch_size = 4;
    sampler.passes = passes;
    SafetyMetrics clean = evaluate_clean_false_positives(pred, test, 4);
    SafetyMetrics aug = evaluate_augmentation_accuracy(pred, test, catalog, sampler, seed);
    return merge_metrics(clean, aug, catalog.mapping());
}

}  // namespace

TEST_CASE("saturated-negative predictor has zero false positives; saturated-positive has rate one") {
    auto test = tiny_test_set(40);
    ConstantPredictor neg(-40.0), pos(+40.0);
    auto m_neg = evaluate_clean_false_positives(neg, test, 8);
    auto m_pos = evaluate_clean_false_positives(pos, test, 8);
    CHECK(m_neg.clean_units == 5);
    for (int j = 0; j < kCatalogSize; ++j) {
        CHECK(m_neg.clean_fp_rate[j] == 0.0);
        CHECK(m_pos.clean_fp_rate[j] == 1.0);
    }
}

TEST_CASE("false-positive rates match an exact recount of the stored per-unit predictions") {
    // Hand-built stub with a known positive pattern over 100 units.
    class PatternPredictor : public BatchPredictor {
    public:
        nn::Tensor predict(const EvalUnit& unit) override {
            nn::Tensor t({static_cast<int>(unit.images.size()), kCatalogSize});
            for (int i = 0; i < t.dim(0); ++i)
                for (int j = 0; j < kCatalogSize; ++j)
                    t.at2(i, j) = ((calls_ % (j + 2)) == 0) ? 40.0 : -40.0;
            ++calls_;
            return t;
        }
        int calls_ = 0;
    };
    auto test = tiny_test_set(100);
    PatternPredictor pred;
    auto metrics = evaluate_clean_false_positives(pred, test, 1);
    REQUIRE(metrics.clean_units == 100);
    for (int j = 0; j < kCatalogSize; ++j) {
        int count = 0;
        for (const auto& trace : metrics.clean_trace) {
            if (1.0 / (1.0 + std::exp(-trace.mean_logits[j])) > 0.5) ++count;
        }
        CHECK(metrics.clean_fp_rate[j] == doctest::Approx(count / 100.0));
    }
}

TEST_CASE("oracle stub scores accuracy one on every label, whatever the sampler seed") {
    auto test = tiny_test_set(48);
    OraclePredictor oracle;
    for (std::uint64_t seed : {7u, 1234u, 999999u}) {
        auto metrics = full_metrics(oracle, test, 2, seed);
        for (int j = 0; j < kCatalogSize; ++j) {
            CHECK(metrics.aug_accuracy[j] == 1.0);
            if (metrics.aug_fired_units[j] > 0) CHECK(metrics.aug_recall[j] == 1.0);
        }
    }
}

TEST_CASE("constant-negative stub accuracy equals one minus the empirical fire rate") {
    auto test = tiny_test_set(48);
    ConstantPredictor neg(-40.0);
    auto metrics = full_metrics(neg, test, 4);
    for (int j = 0; j < kCatalogSize; ++j) {
        const double fire_rate = static_cast<double>(metrics.aug_fired_units[j]) / metrics.aug_units;
        CHECK(metrics.aug_accuracy[j] == doctest::Approx(1.0 - fire_rate).epsilon(1e-12));
        CHECK(metrics.aug_recall[j] == 0.0);
    }
}

TEST_CASE("coin-flip stub sits near one half over many units") {
    auto test = tiny_test_set(64);
    CoinFlipPredictor coin(99);
    // 64 images / batch 4 = 16 units per pass; 625 passes = 10000 units.
    auto metrics = full_metrics(coin, test, 625);
    REQUIRE(metrics.aug_units == 10000);
    for (int j = 0; j < kCatalogSize; ++j) {
        CHECK(std::abs(metrics.aug_accuracy[j] - 0.5) <= 0.02);
    }
}

TEST_CASE("augmented-set accuracy matches an exact recount of the stored traces") {
    auto test = tiny_test_set(48);
    CoinFlipPredictor coin(5);
    auto metrics = full_metrics(coin, test, 3);
    for (int j = 0; j < kCatalogSize; ++j) {
        int correct = 0;
        for (const auto& trace : metrics.aug_trace) {
            const bool predicted = 1.0 / (1.0 + std::exp(-trace.mean_logits[j])) > 0.5;
            if (predicted == (trace.fired[j] != 0)) ++correct;
        }
        CHECK(metrics.aug_accuracy[j] ==
              doctest::Approx(static_cast<double>(correct) / metrics.aug_units).epsilon(1e-12));
    }
}

TEST_CASE("safe-set selection thresholds") {
    auto test = tiny_test_set(24);
    OraclePredictor oracle;
    auto metrics = full_metrics(oracle, test);

    SUBCASE("zero thresholds with nonzero metrics give the empty set") {
        SafeSet s = select_safe_set(metrics, Thresholds{0.0, 0.0, 0.5});
        CHECK(s.members.empty());
    }
    SUBCASE("unit thresholds admit the full catalog") {
        SafeSet s = select_safe_set(metrics, Thresholds{1.0, 1.0, 0.5});
        CHECK(s.members.size() == kCatalogSize);
    }
    SUBCASE("selection is a pure function of metrics and thresholds") {
        Thresholds t{0.05, 0.87, 0.5};
        CHECK(select_safe_set(metrics, t).members == select_safe_set(metrics, t).members);
    }
    SUBCASE("incomplete metrics are rejected") {
        SafetyMetrics incomplete;
        CHECK_THROWS_AS(select_safe_set(incomplete, Thresholds{}), std::invalid_argument);
    }
}

TEST_CASE("enlarging thresholds never shrinks the safe set") {
    auto test = tiny_test_set(32);
    CoinFlipPredictor coin(31);
    auto metrics = full_metrics(coin, test, 3);
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        Thresholds small{rng.uniform(), rng.uniform(), 0.5};
        Thresholds big{std::min(1.0, small.fp_max + rng.uniform(0, 1 - small.fp_max)),
                       std::min(1.0, small.acc_max + rng.uniform(0, 1 - small.acc_max)), 0.5};
        SafeSet s_small = select_safe_set(metrics, small);
        SafeSet s_big = select_safe_set(metrics, big);
        for (const auto& name : s_small.members) {
            REQUIRE(s_big.contains(name));
        }
    }
}

TEST_CASE("refine_safe_set removes members and warns on unknown names") {
    SafeSet safe;
    safe.members = {"HorizontalFlip", "RandomCrop", "CenterCrop", "RandomGamma"};
    SUBCASE("safe v2 style removal") {
        SafeSet v2 = refine_safe_set(safe, {"RandomCrop", "CenterCrop"});
        CHECK(v2.members == std::vector<std::string>{"HorizontalFlip", "RandomGamma"});
        CHECK(v2.warnings.empty());
    }
    SUBCASE("empty exclusions are the identity") {
        CHECK(refine_safe_set(safe, {}).members == safe.members);
    }
    SUBCASE("excluding everything empties the set") {
        CHECK(refine_safe_set(safe, safe.members).members.empty());
    }
    SUBCASE("unknown exclusion warns but does not throw") {
        SafeSet out = refine_safe_set(safe, {"NotATransform"});
        CHECK(out.members == safe.members);
        REQUIRE(out.warnings.size() == 1);
    }
}

TEST_CASE("report round-trips and covers all 15 labels exactly once") {
    auto test = tiny_test_set(24);
    OraclePredictor oracle;
    SafetyReport report;
    report.metrics = full_metrics(oracle, test);
    report.safe_set = select_safe_set(report.metrics, Thresholds{});
    report.reference_task_accuracy = 49.60;
    report.per_augmentation_task_accuracy["Blur"] = 42.0;

    const std::string json = report_to_json(report);
    SafetyReport back = report_from_json(json);
    CHECK(back.metrics.mapping == report.metrics.mapping);
    CHECK(back.metrics.clean_fp_rate == report.metrics.clean_fp_rate);
    CHECK(back.metrics.aug_accuracy == report.metrics.aug_accuracy);
    CHECK(back.metrics.aug_units == report.metrics.aug_units);
    CHECK(back.safe_set.members == report.safe_set.members);
    CHECK(back.reference_task_accuracy == 49.60);
    CHECK(back.per_augmentation_task_accuracy.at("Blur") == 42.0);

    const auto& names = catalog_names();
    REQUIRE(back.metrics.mapping.size() == names.size());
    for (const auto& n : names) {
        CHECK(std::count(back.metrics.mapping.begin(), back.metrics.mapping.end(), n) == 1);
    }

    const std::string svg = report_to_svg(report);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("HorizontalFlip") != std::string::npos);
    CHECK(svg.find("no-augmentation accuracy") != std::string::npos);
}

TEST_CASE("safe set exports in catalog format consumable as an augmentation set") {
    const AugmentationSet catalog = default_catalog();
    SafeSet safe;
    safe.members = {"HorizontalFlip", "RandomGamma"};
    safe.provenance = "test";
    const std::string json = safe_set_to_catalog_json(safe, catalog);
    const AugmentationSet loaded = catalog_from_json(json);
    CHECK(loaded.mapping() == safe.members);
    CHECK(loaded.at(1).param("gamma_lo") == 0.8);
}
