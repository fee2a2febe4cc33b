#include "safeaug/workflows/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "safeaug/transforms/transforms.hpp"

namespace safeaug {

namespace {

Image mask_to_image(const std::vector<int>& mask, int h, int w) {
    Image img(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(y, x, 0) = static_cast<float>(mask[static_cast<std::size_t>(y) * w + x]);
    return img;
}

std::vector<int> image_to_mask(const Image& img) {
    std::vector<int> mask(static_cast<std::size_t>(img.height()) * img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            mask[static_cast<std::size_t>(y) * img.width() + x] =
                static_cast<int>(std::lround(img.at(y, x, 0)));
        }
    return mask;
}

Image pad_and_random_crop(const Image& img, int pad, Rng& rng) {
    const int h = img.height(), w = img.width();
    Image padded(h + 2 * pad, w + 2 * pad, img.channels(), 0.0f);  // zero padding
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels(); ++c) padded.at(y + pad, x + pad, c) = img.at(y, x, c);
    const int top = static_cast<int>(rng.uniform_int(0, 2 * pad));
    const int left = static_cast<int>(rng.uniform_int(0, 2 * pad));
    Image out(h, w, img.channels());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = padded.at(top + y, left + x, c);
    return out;
}

Image hflip(const Image& img) {
    Image out(img.height(), img.width(), img.channels());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y, img.width() - 1 - x, c);
    return out;
}

// Conventional ImageNet-style jitter: brightness, contrast and saturation
// factors drawn independently from [0.6, 1.4].
Image color_jitter(const Image& img, Rng& rng) {
    const double fb = rng.uniform(0.6, 1.4);
    const double fc = rng.uniform(0.6, 1.4);
    const double fs = rng.uniform(0.6, 1.4);
    Image out = img;
    double mean = 0.0;
    for (float v : img.data()) mean += v;
    mean /= static_cast<double>(img.size());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double gray = 0.0;
            for (int c = 0; c < img.channels(); ++c) gray += img.at(y, x, c);
            gray /= img.channels();
            for (int c = 0; c < img.channels(); ++c) {
                double v = img.at(y, x, c) * fb;
                v = fc * v + (1.0 - fc) * mean;
                v = fs * v + (1.0 - fs) * gray;
                out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    return out;
}

struct AssembledBatch {
    nn::JointBatch joint;
    AugmentationLabelVector labels;
};

}  // namespace

AugmentationSet catalog_for_dataset(const DatasetHandle& ds) {
    CropConfig crops = crop_config_for_resolution(ds.input_height, ds.input_width);
    if (ds.name == "cityscapes") {
        // The conventional 512x512 crop target cannot exceed the rescaled
        // inputs; cap at the image size and say so once.
        const int capped = std::min({512, ds.input_height, ds.input_width});
        if (capped < 512) {
            std::cerr << "[safeaug] cityscapes: 512x512 crop target capped at " << capped << "x" << capped
                      << " (inputs are " << ds.input_height << "x" << ds.input_width << ")\n";
        }
        crops.crop_height = crops.crop_width = capped;
        crops.sized_crop_min = std::max(1, (capped * 3) / 4);
        crops.sized_crop_max = std::min(ds.input_height, ds.input_width);
    }
    return default_catalog(crops);
}

void apply_baseline_recipe(const DatasetHandle& ds, std::vector<Image>& images, std::vector<Image>* masks,
                           Rng& rng) {
    const std::string& name = ds.name;
    if (name == "cifar10" || name == "cifar100" || name == "cifar10-fixture" || name == "probe") {
        for (auto& img : images) {
            if (rng.bernoulli(0.5)) img = hflip(img);
            img = pad_and_random_crop(img, 4, rng);
        }
    } else if (name == "svhn") {
        for (auto& img : images) img = pad_and_random_crop(img, 4, rng);
    } else if (name == "tiny-imagenet") {
        for (auto& img : images) {
            if (rng.bernoulli(0.5)) img = hflip(img);
            img = color_jitter(img, rng);
        }
    } else if (name == "cityscapes" || name == "synthseg") {
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (rng.bernoulli(0.5)) {
                images[i] = hflip(images[i]);
                if (masks) (*masks)[i] = hflip((*masks)[i]);
            }
            if (name == "cityscapes" && rng.bernoulli(0.5)) {
                const double angle = rng.uniform(0.0, 20.0);
                images[i] = rotate_image(images[i], angle);
                if (masks) (*masks)[i] = rotate_mask((*masks)[i], angle);
            }
        }
    } else {
        // No conventional recipe for this dataset; leave the batch as-is.
    }
}

nn::Tensor images_to_input(const std::vector<Image>& images, const NormStats& stats, int height, int width) {
    return to_batch_tensor(images, stats, height, width);
}

namespace {

AssembledBatch assemble_batch(const DatasetHandle& ds, const ExperimentConfig& cfg, TrainAugMode mode,
                              const AugmentationSet& catalog, const AugmentationSet& active,
                              const std::vector<std::size_t>& indices, Rng& rng, int model_h, int model_w) {
    const bool seg = ds.label_kind == LabelKind::Mask;
    std::vector<Image> images;
    std::vector<Image> masks;
    std::vector<int> class_labels;
    images.reserve(indices.size());
    for (std::size_t i : indices) {
        images.push_back(ds.train.images[i]);
        if (seg) {
            masks.push_back(mask_to_image(ds.train.labels[i], ds.input_height, ds.input_width));
        } else {
            class_labels.push_back(ds.train.labels[i][0]);
        }
    }

    AugmentationLabelVector fired(kCatalogSize, 0);
    bool cutout = false;

    switch (mode) {
        case TrainAugMode::None:
            break;
        case TrainAugMode::Baseline:
            apply_baseline_recipe(ds, images, seg ? &masks : nullptr, rng);
            break;
        case TrainAugMode::CombinedCutout:
            apply_baseline_recipe(ds, images, seg ? &masks : nullptr, rng);
            cutout = cfg.cutout_size != 0;
            [[fallthrough]];
        case TrainAugMode::FixedSubset: {
            // k is clamped to the active set so degenerate sets compose
            // cleanly (an empty safe set leaves the baseline untouched).
            const int k_eff = std::min(cfg.k, active.size());
            const SubsetSample subset = sample_subset(active, SubsetMode::FixedSize, k_eff, rng);
            if (seg) {
                auto piped = apply_pipeline_batch_seg(images, masks, active, subset, cfg.p, rng);
                images = std::move(piped.images);
                masks = std::move(piped.masks);
            } else {
                auto piped = apply_pipeline_batch(images, active, subset, cfg.p, rng);
                images = std::move(piped.images);
            }
            break;
        }
        case TrainAugMode::LearnPhase: {
            const SubsetSample subset =
                sample_subset(catalog, SubsetMode::RandomSize, cfg.max_subset_size, rng);
            if (seg) {
                auto piped = apply_pipeline_batch_seg(images, masks, catalog, subset, 1.0, rng);
                images = std::move(piped.images);
                masks = std::move(piped.masks);
                fired = piped.labels;
            } else {
                auto piped = apply_pipeline_batch(images, catalog, subset, 1.0, rng);
                images = std::move(piped.images);
                fired = piped.labels;
            }
            break;
        }
    }

    AssembledBatch out;
    out.labels = fired;
    out.joint.aug_labels = fired;
    out.joint.images = images_to_input(images, ds.stats, model_h, model_w);
    if (cutout) {
        // Cutout runs after normalization; zero is the dataset mean there.
        const int n = out.joint.images.dim(0);
        const int size = cfg.cutout_size;
        for (int i = 0; i < n; ++i) {
            const int cy = static_cast<int>(rng.uniform_int(0, model_h - 1));
            const int cx = static_cast<int>(rng.uniform_int(0, model_w - 1));
            const int y0 = std::clamp(cy - size / 2, 0, std::max(0, model_h - size));
            const int x0 = std::clamp(cx - size / 2, 0, std::max(0, model_w - size));
            const int y1 = std::min(model_h, y0 + size), x1 = std::min(model_w, x0 + size);
            for (int c = 0; c < out.joint.images.dim(1); ++c)
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) out.joint.images.at4(i, c, y, x) = 0.0;
        }
    }

    if (seg) {
        out.joint.task_labels.reserve(masks.size() * model_h * model_w);
        for (auto& m : masks) {
            const Image resized = (m.height() == model_h && m.width() == model_w)
                                      ? m
                                      : resize_nearest(m, model_h, model_w);
            const auto ints = image_to_mask(resized);
            out.joint.task_labels.insert(out.joint.task_labels.end(), ints.begin(), ints.end());
        }
    } else {
        out.joint.task_labels = std::move(class_labels);
    }
    return out;
}

}  // namespace

void IoUAccumulator::add(int predicted, int truth) {
    if (truth == nn::kIgnoreIndex) return;
    if (predicted == truth) {
        inter_[truth]++;
        uni_[truth]++;
    } else {
        uni_[truth]++;
        uni_[predicted]++;
    }
}

double IoUAccumulator::mean_iou_percent() const {
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < uni_.size(); ++c) {
        if (uni_[c] == 0) continue;
        sum += static_cast<double>(inter_[c]) / static_cast<double>(uni_[c]);
        ++present;
    }
    return present == 0 ? 0.0 : 100.0 * sum / present;
}

double evaluate_top1(nn::Model& model, const Split& split, const NormStats& stats, int batch_size) {
    if (split.size() == 0) throw std::invalid_argument("evaluate_top1: empty split");
    const int h = model.desc().input_height, w = model.desc().input_width;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < split.size(); start += batch_size) {
        const std::size_t end = std::min(split.size(), start + batch_size);
        std::vector<Image> images(split.images.begin() + start, split.images.begin() + end);
        const nn::Tensor input = images_to_input(images, stats, h, w);
        auto heads = model.forward(input, /*training=*/false);
        for (std::size_t i = start; i < end; ++i) {
            const int row = static_cast<int>(i - start);
            int best = 0;
            for (int k = 1; k < heads.task_logits.dim(1); ++k) {
                if (heads.task_logits.at2(row, k) > heads.task_logits.at2(row, best)) best = k;
            }
            if (best == split.labels[i][0]) ++correct;
        }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(split.size());
}

double evaluate_miou(nn::Model& model, const Split& split, const NormStats& stats, int batch_size,
                     int num_classes) {
    if (split.size() == 0) throw std::invalid_argument("evaluate_miou: empty split");
    const int h = model.desc().input_height, w = model.desc().input_width;
    IoUAccumulator acc(num_classes);
    for (std::size_t start = 0; start < split.size(); start += batch_size) {
        const std::size_t end = std::min(split.size(), start + batch_size);
        std::vector<Image> images(split.images.begin() + start, split.images.begin() + end);
        const nn::Tensor input = images_to_input(images, stats, h, w);
        auto heads = model.forward(input, /*training=*/false);
        for (std::size_t i = start; i < end; ++i) {
            const int row = static_cast<int>(i - start);
            const auto& mask = split.labels[i];
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    int best = 0;
                    for (int k = 1; k < heads.task_logits.dim(1); ++k) {
                        if (heads.task_logits.at4(row, k, y, x) > heads.task_logits.at4(row, best, y, x))
                            best = k;
                    }
                    acc.add(best, mask[static_cast<std::size_t>(y) * w + x]);
                }
        }
    }
    return acc.mean_iou_percent();
}

double evaluate_metric(nn::Model& model, const DatasetHandle& ds, const Split& split, int batch_size) {
    return ds.label_kind == LabelKind::Mask
               ? evaluate_miou(model, split, ds.stats, batch_size, ds.num_classes)
               : evaluate_top1(model, split, ds.stats, batch_size);
}

nn::Tensor ModelBatchPredictor::predict(const EvalUnit& unit) {
    const nn::Tensor input =
        images_to_input(unit.images, stats_, model_.desc().input_height, model_.desc().input_width);
    return model_.forward(input, /*training=*/false).aug_logits;
}

TrainOutcome run_training(nn::Model& model, nn::Optimizer& opt, const DatasetHandle& ds,
                          const ExperimentConfig& cfg, TrainAugMode mode,
                          const std::vector<std::string>& active_names, std::uint64_t seed) {
    const AugmentationSet catalog = catalog_for_dataset(ds);
    std::vector<AugmentationSpec> active_specs;
    for (const auto& name : active_names) active_specs.push_back(catalog.at(catalog.index_of(name)));
    const AugmentationSet active(active_specs);
    if ((mode == TrainAugMode::FixedSubset || mode == TrainAugMode::CombinedCutout) &&
        active.size() > 0 && cfg.k > active.size()) {
        std::cerr << "[safeaug] k=" << cfg.k << " exceeds |set|=" << active.size() << "; clamping\n";
    }

    TrainOutcome outcome;
    outcome.final_lr = opt.lr();
    const bool joint = mode == TrainAugMode::LearnPhase;
    const int model_h = model.desc().input_height, model_w = model.desc().input_width;

    double best_metric = -1.0;
    int plateau_wait = 0, stop_wait = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(Rng::splitmix64(seed + 0x9e3779b97f4a7c15ULL * (epoch + 1)));
        std::vector<std::size_t> order(ds.train.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        double sum_augm = 0.0, sum_task = 0.0, sum_total = 0.0;
        int batches = 0;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
                AssembledBatch batch =
                    assemble_batch(ds, cfg, mode, catalog, active, idx, rng, model_h, model_w);
                const nn::LossBreakdown losses = nn::train_step(model, batch.joint, opt, joint);
                sum_augm += losses.l_augm;
                sum_task += losses.l_task;
                sum_total += losses.l_total;
                ++batches;
            }
        } catch (const std::runtime_error& e) {
            outcome.status = std::string("diverged: ") + e.what();
            break;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.l_augm = sum_augm / std::max(1, batches);
        stats.l_task = sum_task / std::max(1, batches);
        stats.l_total = sum_total / std::max(1, batches);
        stats.lr = opt.lr();
        const Split& val = ds.val.size() > 0 ? ds.val : ds.test;
        stats.val_metric = evaluate_metric(model, ds, val, cfg.batch_size);
        outcome.epochs.push_back(stats);
        outcome.epochs_run = epoch + 1;

        if (stats.val_metric > best_metric + 1e-9) {
            best_metric = stats.val_metric;
            plateau_wait = 0;
            stop_wait = 0;
        } else {
            ++plateau_wait;
            ++stop_wait;
            if (plateau_wait >= cfg.plateau_patience) {
                opt.set_lr(opt.lr() * cfg.plateau_factor);
                plateau_wait = 0;
            }
        }
        outcome.final_lr = opt.lr();
        if (stop_wait >= cfg.early_stop_patience) break;
    }
    return outcome;
}

}  // namespace safeaug
