// Acceptance suite: every release gate in one binary, one line per
// criterion. Run via ctest (test name "acceptance") or directly.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "safeaug/analyzer/report.hpp"
#include "safeaug/analyzer/safety.hpp"
#include "safeaug/data/checkpoint.hpp"
#include "safeaug/data/synthetic.hpp"
#include "safeaug/nn/models.hpp"
#include "safeaug/transforms/pipeline.hpp"
#include "safeaug/workflows/training.hpp"
#include "safeaug/workflows/workflows.hpp"

using namespace safeaug;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool gating;
    std::function<bool(std::ostream&)> run;
};

// ---------------------------------------------------------------- helpers

nn::Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -6, double hi = 6) {
    nn::Tensor t(std::move(shape));
    for (auto& v : t.vec()) v = rng.uniform(lo, hi);
    return t;
}

long double bce_ref(const nn::Tensor& logits, const nn::Tensor& targets) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(logits[i])));
        acc += -(targets[i] * std::log(s) + (1.0L - targets[i]) * std::log(1.0L - s));
    }
    return acc / logits.size();
}

long double ce_ref(const nn::Tensor& logits, const std::vector<int>& labels) {
    long double acc = 0.0L;
    for (int i = 0; i < logits.dim(0); ++i) {
        long double denom = 0.0L;
        for (int j = 0; j < logits.dim(1); ++j) denom += std::exp(static_cast<long double>(logits.at2(i, j)));
        acc += std::log(denom) - static_cast<long double>(logits.at2(i, labels[i]));
    }
    return acc / logits.dim(0);
}

std::string data_root() { return resolve_data_root(""); }

bool real_cifar_present() {
    return fs::exists(fs::path(data_root()) / "cifar-10-batches-bin" / "data_batch_1.bin") &&
           fs::file_size(fs::path(data_root()) / "cifar-10-batches-bin" / "data_batch_1.bin") ==
               10000u * 3073u;
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "safeaug_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

ExperimentConfig cifar_subset_config(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.dataset = real_cifar_present() ? "cifar10" : "cifar10-fixture";
    cfg.data_root = real_cifar_present() ? data_root() : (work_dir() / "fixture_data").string();
    cfg.subset_size = 2000;
    cfg.model = "tiny";
    cfg.batch_size = 32;
    cfg.seed = seed;
    cfg.eval_passes = 1;
    return cfg;
}

std::string cifar_safe_set_file() {
    // The catalog subset reported safe for CIFAR-10 by the joint learning
    // setup; used here as the fine-tuning set configuration.
    static std::string path = [] {
        SafeSet safe;
        safe.members = {"HorizontalFlip",  "RandomRotate90", "RandomCrop", "CenterCrop",
                        "RandomSizedCrop", "RandomBrightness", "RandomGamma"};
        safe.provenance = "acceptance";
        const std::string p = (work_dir() / "cifar_safe.json").string();
        std::ofstream(p) << safe_set_to_catalog_json(safe, default_catalog());
        return p;
    }();
    return path;
}

// ---------------------------------------------------------------- criteria

bool criterion_loss_oracles(std::ostream& log) {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(0, 7));
        nn::Tensor logits = random_tensor({n, 15}, rng, -8, 8);
        nn::Tensor targets({n, 15});
        for (auto& v : targets.vec()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const double got = nn::augmentation_loss(logits, targets, false).value;
        if (std::abs(got - double(bce_ref(logits, targets))) > 1e-6) {
            log << "augmentation_loss off at trial " << trial;
            return false;
        }

        const int k = 2 + static_cast<int>(rng.uniform_int(0, 10));
        nn::Tensor clogits = random_tensor({n, k}, rng);
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.uniform_int(0, k - 1)));
        if (std::abs(nn::classification_loss(clogits, labels, false).value -
                     double(ce_ref(clogits, labels))) > 1e-6) {
            log << "classification_loss off at trial " << trial;
            return false;
        }

        nn::Tensor slogits = random_tensor({1, 3, 2, 2}, rng);
        std::vector<int> mask;
        for (int i = 0; i < 4; ++i) mask.push_back(static_cast<int>(rng.uniform_int(0, 2)));
        long double want = 0.0L;
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                nn::Tensor row({1, 3});
                for (int c = 0; c < 3; ++c) row.at2(0, c) = slogits.at4(0, c, y, x);
                want += ce_ref(row, {mask[static_cast<std::size_t>(y) * 2 + x]});
            }
        if (std::abs(nn::segmentation_loss(slogits, mask, false).value - double(want / 4.0L)) > 1e-6) {
            log << "segmentation_loss off at trial " << trial;
            return false;
        }
    }

    nn::Tensor zero15({3, 15}), t15({3, 15});
    nn::Tensor zero10({3, 10});
    nn::Tensor zero3({1, 3, 2, 2});
    const bool anchors =
        std::abs(nn::augmentation_loss(zero15, t15, false).value - std::log(2.0)) < 1e-12 &&
        std::abs(nn::classification_loss(zero10, {0, 1, 2}, false).value - std::log(10.0)) < 1e-12 &&
        std::abs(nn::segmentation_loss(zero3, {0, 1, 2, 0}, false).value - std::log(3.0)) < 1e-12;
    if (!anchors) {
        log << "uniform-logit analytic anchors failed";
        return false;
    }
    log << "300 random instances within 1e-6; ln2/lnK anchors exact";
    return true;
}

bool criterion_gradient_check(std::ostream& log) {
    nn::ModelDesc desc;
    desc.num_classes = 4;
    desc.tiny_width = 8;
    desc.init_seed = 5;
    nn::Model model(desc, default_catalog().mapping());

    nn::JointBatch batch;
    Rng rng(55);
    batch.images = random_tensor({3, 3, 32, 32}, rng, -1, 1);
    batch.aug_labels.assign(kCatalogSize, 0);
    batch.aug_labels[1] = batch.aug_labels[10] = 1;
    batch.task_labels = {0, 2, 3};

    auto loss_value = [&]() {
        auto heads = model.forward(batch.images, true);
        const nn::Tensor targets = nn::broadcast_aug_targets(batch, 3);
        return nn::total_loss(nn::augmentation_loss(heads.aug_logits, targets, false).value,
                              nn::classification_loss(heads.task_logits, batch.task_labels, false).value);
    };
    {
        auto heads = model.forward(batch.images, true);
        const nn::Tensor targets = nn::broadcast_aug_targets(batch, 3);
        auto la = nn::augmentation_loss(heads.aug_logits, targets, true);
        auto lt = nn::classification_loss(heads.task_logits, batch.task_labels, true);
        model.zero_grad();
        model.backward(la.grad_logits, lt.grad_logits);
    }

    auto params = model.params();
    double worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
        auto* p = params[rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1)];
        const std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, p->value.size() - 1));
        const double eps = 1e-5 * std::max(1.0, std::abs(p->value[i]));
        const double saved = p->value[i];
        p->value[i] = saved + eps;
        const double up = loss_value();
        p->value[i] = saved - eps;
        const double dn = loss_value();
        p->value[i] = saved;
        const double fd = (up - dn) / (2 * eps);
        const double rel =
            std::abs(fd - p->grad[i]) / std::max({std::abs(fd), std::abs(p->grad[i]), 1e-8});
        worst = std::max(worst, rel);
        if (rel > 1e-4) {
            log << "param " << p->name << "[" << i << "] rel err " << rel;
            return false;
        }
    }
    log << "20 probe parameters, worst relative error " << std::scientific << std::setprecision(2) << worst;
    return true;
}

bool criterion_transform_properties(std::ostream& log) {
    const AugmentationSet catalog = default_catalog();
    Rng img_rng(7);
    Image img(32, 32, 3);
    for (auto& v : img.data()) v = static_cast<float>(img_rng.uniform(0.05, 0.95));

    for (const char* name : {"HorizontalFlip", "VerticalFlip", "Transpose"}) {
        Rng rng(1);
        Image twice = apply_transform(apply_transform(img, {name, {}, 1.0}, rng), {name, {}, 1.0}, rng);
        if (!(twice == img)) {
            log << name << " twice is not the identity";
            return false;
        }
    }
    TransformDraw quarter;
    quarter.u0 = 0.3;  // k = 1
    Image turned = img;
    for (int i = 0; i < 4; ++i) turned = apply_transform(turned, {"RandomRotate90", {}, 1.0}, quarter);
    if (!(turned == img)) {
        log << "four identical quarter-turns are not the identity";
        return false;
    }

    for (const auto& spec : catalog.specs()) {
        Rng a(99), b(99);
        Image out_a = apply_transform(img, spec, a);
        Image out_b = apply_transform(img, spec, b);
        if (!(out_a == out_b)) {
            log << spec.name << " is not bit-deterministic under a fixed seed";
            return false;
        }
        const Shape3 predicted = output_shape(spec, {32, 32, 3});
        if (spec.name != "RandomRotate90" &&
            (out_a.height() != predicted.height || out_a.width() != predicted.width ||
             out_a.channels() != predicted.channels)) {
            log << spec.name << " shape contract violated";
            return false;
        }
    }

    Rng rng(3);
    auto res = apply_pipeline(img, catalog, SubsetSample{}, 1.0, rng);
    if (!(res.image == img) ||
        std::count(res.labels.begin(), res.labels.end(), 0) != kCatalogSize) {
        log << "empty pipeline is not the identity";
        return false;
    }
    log << "involutions, shape contracts, determinism, empty-pipeline identity over all 15 transforms";
    return true;
}

bool criterion_sampler_statistics(std::ostream& log) {
    const AugmentationSet catalog = default_catalog();
    Rng rng(42);
    const int draws = 100000;
    std::vector<int> size_counts(6, 0);
    for (int i = 0; i < draws; ++i) {
        size_counts[sample_subset(catalog, SubsetMode::RandomSize, 5, rng).size()]++;
    }
    double worst_size = 0.0;
    for (int s = 0; s <= 5; ++s) {
        worst_size = std::max(worst_size, std::abs(size_counts[s] / double(draws) - 1.0 / 6));
    }
    if (worst_size > 0.01) {
        log << "size distribution off by " << worst_size;
        return false;
    }

    SubsetSample subset;
    subset.indices = {catalog.index_of("RandomBrightness"), catalog.index_of("RandomGamma"),
                      catalog.index_of("RandomContrast")};
    Image img(4, 4, 1, 0.5f);
    std::vector<int> fired(15, 0);
    for (int i = 0; i < draws; ++i) {
        auto res = apply_pipeline(img, catalog, subset, 0.5, rng);
        for (int j = 0; j < 15; ++j) fired[j] += res.labels[j];
    }
    double worst_fire = 0.0;
    for (int idx : subset.indices) {
        worst_fire = std::max(worst_fire, std::abs(fired[idx] / double(draws) - 0.5));
    }
    if (worst_fire > 0.01) {
        log << "fire rate off by " << worst_fire;
        return false;
    }
    log << "size uniformity off by " << std::fixed << std::setprecision(4) << worst_size
        << ", fire rate off by " << worst_fire << " over 1e5 draws";
    return true;
}

bool criterion_analyzer_oracles(std::ostream& log) {
    const AugmentationSet catalog = default_catalog(crop_config_for_resolution(8, 8));
    std::vector<Image> test;
    Rng img_rng(11);
    for (int i = 0; i < 64; ++i) {
        Image img(8, 8, 3);
        for (auto& v : img.data()) v = static_cast<float>(img_rng.uniform(0.2, 0.8));
        test.push_back(std::move(img));
    }

    struct Constant : BatchPredictor {
        double logit;
        explicit Constant(double l) : logit(l) {}
        nn::Tensor predict(const EvalUnit& u) override {
            nn::Tensor t({int(u.images.size()), kCatalogSize});
            for (auto& v : t.vec()) v = logit;
            return t;
        }
    };
    struct Oracle : BatchPredictor {
        nn::Tensor predict(const EvalUnit& u) override {
            nn::Tensor t({int(u.images.size()), kCatalogSize});
            for (int i = 0; i < t.dim(0); ++i)
                for (int j = 0; j < kCatalogSize; ++j) t.at2(i, j) = u.fired[j] ? 40.0 : -40.0;
            return t;
        }
    };
    struct Coin : BatchPredictor {
        Rng rng{77};
        nn::Tensor predict(const EvalUnit& u) override {
            nn::Tensor t({int(u.images.size()), kCatalogSize});
            for (int j = 0; j < kCatalogSize; ++j) {
                const double v = rng.bernoulli(0.5) ? 40.0 : -40.0;
                for (int i = 0; i < t.dim(0); ++i) t.at2(i, j) = v;
            }
            return t;
        }
    };

    Constant neg(-40), pos(+40);
    auto m_neg = evaluate_clean_false_positives(neg, test, 8);
    auto m_pos = evaluate_clean_false_positives(pos, test, 8);
    for (int j = 0; j < kCatalogSize; ++j) {
        if (m_neg.clean_fp_rate[j] != 0.0 || m_pos.clean_fp_rate[j] != 1.0) {
            log << "constant stubs: deterministic fp rates wrong";
            return false;
        }
    }

    AugSamplerConfig sampler;
    sampler.batch_size = 4;
    sampler.passes = 2;
    Oracle oracle;
    auto m_oracle = evaluate_augmentation_accuracy(oracle, test, catalog, sampler, 5);
    Constant neg2(-40);
    auto m_const = evaluate_augmentation_accuracy(neg2, test, catalog, sampler, 5);
    for (int j = 0; j < kCatalogSize; ++j) {
        if (m_oracle.aug_accuracy[j] != 1.0) {
            log << "oracle stub below accuracy 1";
            return false;
        }
        const double expect = 1.0 - double(m_const.aug_fired_units[j]) / m_const.aug_units;
        if (std::abs(m_const.aug_accuracy[j] - expect) > 1e-12) {
            log << "constant-negative accuracy does not match the counting oracle";
            return false;
        }
    }

    // 10^4 units for the coin flip: 16 units/pass * 625 passes.
    sampler.passes = 625;
    Coin coin;
    auto m_coin = evaluate_augmentation_accuracy(coin, test, catalog, sampler, 5);
    if (m_coin.aug_units != 10000) {
        log << "unexpected unit count " << m_coin.aug_units;
        return false;
    }
    for (int j = 0; j < kCatalogSize; ++j) {
        if (std::abs(m_coin.aug_accuracy[j] - 0.5) > 0.02) {
            log << "coin-flip accuracy " << m_coin.aug_accuracy[j] << " off 0.5 by more than 0.02";
            return false;
        }
    }

    auto merged = merge_metrics(m_neg, m_coin, catalog.mapping());
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        Thresholds small{rng.uniform(), rng.uniform(), 0.5};
        Thresholds big{small.fp_max + rng.uniform() * (1 - small.fp_max),
                       small.acc_max + rng.uniform() * (1 - small.acc_max), 0.5};
        SafeSet s = select_safe_set(merged, small);
        SafeSet b = select_safe_set(merged, big);
        for (const auto& name : s.members) {
            if (!b.contains(name)) {
                log << "monotonicity violated for " << name;
                return false;
            }
        }
    }
    log << "stub oracles exact, coin-flip within 0.02 over 1e4 units, monotonic over 500 threshold pairs";
    return true;
}

bool criterion_learn_safe_probe(std::ostream& log) {
    RunRegistry registry((work_dir() / "runs_probe").string());
    for (std::uint64_t seed : {1, 2, 3}) {
        ExperimentConfig cfg;
        cfg.dataset = "probe";
        cfg.subset_size = 5000;
        cfg.model = "tiny";
        cfg.tiny_width = 16;
        cfg.epochs = 10;
        cfg.batch_size = 16;
        cfg.optimizer = "adam";
        cfg.lr = 3e-3;
        cfg.seed = seed;
        // Default thresholds: fp_max 0.05, acc_max 0.87, decision 0.5.
        LearnSafeResult result = learn_safe(cfg, registry);
        const bool vflip_out = !result.safe_set.contains("VerticalFlip");
        const bool brightness_in = result.safe_set.contains("RandomBrightness");
        const int v = 1, b = 10;  // catalog indices
        log << "[seed " << seed << " vflip acc=" << std::fixed << std::setprecision(3)
            << result.metrics.aug_accuracy[v] << " bright acc=" << result.metrics.aug_accuracy[b] << "] ";
        if (!vflip_out || !brightness_in) {
            log << "seed " << seed << ": VerticalFlip " << (vflip_out ? "excluded" : "NOT excluded")
                << ", RandomBrightness " << (brightness_in ? "included" : "NOT included");
            return false;
        }
    }
    log << "3/3 seeds exclude VerticalFlip and include RandomBrightness";
    return true;
}

bool criterion_finetune_protocol(std::ostream& log) {
    RunRegistry registry((work_dir() / "runs_finetune").string());
    ExperimentConfig pre = cifar_subset_config(11);
    pre.mode = "all";
    pre.epochs = 3;
    ExperimentRecord parent = train_with_set(pre, registry);

    ExperimentConfig ft = cifar_subset_config(11);
    ft.mode = "safe";
    ft.safe_set_file = cifar_safe_set_file();
    ft.epochs = 2;
    ExperimentRecord child = finetune(parent.checkpoint_path, ft, registry, parent.run_id);
    if (child.status != "ok" || child.epochs.size() != 2) {
        log << "fine-tune did not complete";
        return false;
    }

    ExperimentConfig noop = ft;
    noop.epochs = 0;
    ExperimentRecord frozen = finetune(parent.checkpoint_path, noop, registry, parent.run_id);
    if (frozen.final_metric != parent.final_metric) {
        log << "0-epoch fine-tune changed the metric: " << frozen.final_metric << " vs "
            << parent.final_metric;
        return false;
    }

    // Checkpoint round trip must be bit-exact: loading and re-saving with the
    // same metadata reproduces the file byte for byte.
    LoadedCheckpoint loaded = load_checkpoint(parent.checkpoint_path);
    const std::string copy = (work_dir() / "roundtrip.ckpt").string();
    auto opt = loaded.make_optimizer();
    save_checkpoint(copy, *loaded.model, opt.get(), loaded.config_hash, loaded.meta);
    std::ifstream f1(parent.checkpoint_path, std::ios::binary), f2(copy, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    if (s1.str() != s2.str()) {
        log << "checkpoint round trip is not bit-exact";
        return false;
    }
    log << "pipeline complete on " << pre.dataset << "; 0-epoch fine-tune exact at "
        << std::fixed << std::setprecision(2) << parent.final_metric
        << "%; checkpoint round trip byte-identical";
    return true;
}

bool criterion_iou(std::ostream& log) {
    IoUAccumulator acc(2);
    const int pred[4] = {0, 0, 1, 1};
    const int truth[4] = {0, 1, 1, 1};
    for (int i = 0; i < 4; ++i) acc.add(pred[i], truth[i]);
    // Exact up to double rounding: (1/2 + 2/3) / 2 = 7/12.
    if (std::abs(acc.mean_iou_percent() - 100.0 * 7.0 / 12.0) > 1e-12) {
        log << "2x2 toy mIoU " << acc.mean_iou_percent() << " != 700/12";
        return false;
    }
    IoUAccumulator perfect(3);
    for (int i = 0; i < 999; ++i) perfect.add(i % 3, i % 3);
    if (perfect.mean_iou_percent() != 100.0) {
        log << "perfect prediction mIoU != 100";
        return false;
    }
    log << "2x2 toy mIoU = 7/12 exactly; perfect prediction = 100%";
    return true;
}

bool criterion_indicative_direction(std::ostream& log) {
    RunRegistry registry((work_dir() / "runs_indicative").string());
    double sum_none = 0.0, sum_safe = 0.0;
    for (std::uint64_t seed : {21, 22, 23}) {
        ExperimentConfig none = cifar_subset_config(seed);
        none.mode = "none";
        none.epochs = 20;
        sum_none += train_with_set(none, registry).final_metric;

        ExperimentConfig pre = cifar_subset_config(seed);
        pre.mode = "all";
        pre.epochs = 14;
        ExperimentRecord parent = train_with_set(pre, registry);
        ExperimentConfig ft = cifar_subset_config(seed);
        ft.mode = "safe";
        ft.safe_set_file = cifar_safe_set_file();
        ft.epochs = 6;
        sum_safe += finetune(parent.checkpoint_path, ft, registry, parent.run_id).final_metric;
    }
    const double mean_none = sum_none / 3.0, mean_safe = sum_safe / 3.0;
    log << "mean over 3 seeds: fine-tuned-on-safe " << std::fixed << std::setprecision(2) << mean_safe
        << "% vs no-augmentation " << mean_none << "% -> direction "
        << (mean_safe >= mean_none ? "consistent" : "NOT consistent (logged, non-gating)");
    return true;  // indicative: logged, never gates
}

}  // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "loss oracles vs extended-precision references", true, criterion_loss_oracles},
        {2, "joint-loss gradients vs central finite differences", true, criterion_gradient_check},
        {3, "transform involutions, shape contracts, determinism", true, criterion_transform_properties},
        {4, "sampler statistics (size uniformity, fire rate)", true, criterion_sampler_statistics},
        {5, "analyzer counting oracles and selection monotonicity", true, criterion_analyzer_oracles},
        {6, "steps 1-4 on the synthetic probe, 3 seeds", true, criterion_learn_safe_probe},
        {7, "fine-tune protocol, 0-epoch no-op, checkpoint round trip", true, criterion_finetune_protocol},
        {8, "mean IoU correctness", true, criterion_iou},
        {9, "indicative: fine-tuned-on-safe vs no-augmentation", false, criterion_indicative_direction},
    };

    int failures = 0;
    for (auto& criterion : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::ostringstream detail;
        bool ok = false;
        try {
            ok = criterion.run(detail);
        } catch (const std::exception& e) {
            detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = ok ? "[PASS]" : (criterion.gating ? "[FAIL]" : "[INFO]");
        std::cout << tag << " criterion " << criterion.id << ": " << criterion.name << " — "
                  << detail.str() << " (" << std::fixed << std::setprecision(1) << secs << "s)"
                  << std::endl;
        if (!ok && criterion.gating) ++failures;
    }
    if (failures > 0) {
        std::cout << failures << " gating criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all gating criteria passed" << std::endl;
    return 0;
}
