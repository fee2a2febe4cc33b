#include "safeaug/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "safeaug/data/sha256.hpp"
#include "safeaug/transforms/transforms.hpp"

namespace safeaug {

namespace fs = std::filesystem;

Image NormStats::apply(const Image& img) const {
    if (static_cast<int>(mean.size()) != img.channels()) {
        throw std::invalid_argument("NormStats::apply: channel mismatch");
    }
    Image out = img;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c)
                out.at(y, x, c) = static_cast<float>((img.at(y, x, c) - mean[c]) / std[c]);
    return out;
}

Image NormStats::invert(const Image& img) const {
    Image out = img;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c)
                out.at(y, x, c) = static_cast<float>(img.at(y, x, c) * std[c] + mean[c]);
    return out;
}

NormStats compute_norm_stats(const std::vector<Image>& train_images) {
    if (train_images.empty()) throw std::invalid_argument("compute_norm_stats: no images");
    const int channels = train_images[0].channels();
    std::vector<double> sum(channels, 0.0), sum2(channels, 0.0);
    std::size_t count = 0;
    for (const Image& img : train_images) {
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                for (int c = 0; c < channels; ++c) {
                    const double v = img.at(y, x, c);
                    sum[c] += v;
                    sum2[c] += v * v;
                }
        count += static_cast<std::size_t>(img.height()) * img.width();
    }
    NormStats stats;
    stats.mean.resize(channels);
    stats.std.resize(channels);
    for (int c = 0; c < channels; ++c) {
        stats.mean[c] = sum[c] / count;
        const double var = std::max(1e-12, sum2[c] / count - stats.mean[c] * stats.mean[c]);
        stats.std[c] = std::sqrt(var);
    }
    return stats;
}

Split stratified_subset(const Split& split, int subset_size, int num_classes, Rng& rng) {
    if (subset_size <= 0 || subset_size > static_cast<int>(split.size())) {
        throw std::invalid_argument("stratified_subset: bad subset size");
    }
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < split.size(); ++i) {
        const int cls = split.labels[i][0];
        if (cls < 0 || cls >= num_classes) throw std::invalid_argument("stratified_subset: label out of range");
        by_class[cls].push_back(i);
    }
    for (auto& idxs : by_class) rng.shuffle(idxs);

    // Round-robin across classes keeps per-class counts within +-1 of n/K.
    std::vector<std::size_t> chosen;
    chosen.reserve(subset_size);
    std::vector<std::size_t> cursor(num_classes, 0);
    int cls = 0;
    while (static_cast<int>(chosen.size()) < subset_size) {
        bool advanced = false;
        for (int step = 0; step < num_classes && static_cast<int>(chosen.size()) < subset_size; ++step) {
            const int c = (cls + step) % num_classes;
            if (cursor[c] < by_class[c].size()) {
                chosen.push_back(by_class[c][cursor[c]++]);
                advanced = true;
            }
        }
        cls = (cls + 1) % num_classes;
        if (!advanced) throw std::invalid_argument("stratified_subset: not enough samples");
    }
    std::sort(chosen.begin(), chosen.end());

    Split out;
    out.images.reserve(chosen.size());
    out.labels.reserve(chosen.size());
    for (std::size_t i : chosen) {
        out.images.push_back(split.images[i]);
        out.labels.push_back(split.labels[i]);
    }
    return out;
}

void carve_validation(DatasetHandle& ds, double fraction, Rng& rng) {
    if (fraction <= 0.0 || fraction >= 1.0) throw std::invalid_argument("carve_validation: bad fraction");
    const std::size_t n = ds.train.size();
    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(n * fraction));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Split train, val;
    for (std::size_t k = 0; k < n; ++k) {
        Split& dst = k < n_val ? val : train;
        dst.images.push_back(std::move(ds.train.images[order[k]]));
        dst.labels.push_back(std::move(ds.train.labels[order[k]]));
    }
    ds.train = std::move(train);
    ds.val = std::move(val);
}

void verify_against_manifest(const std::string& manifest_path, const std::string& root,
                             const std::vector<std::string>& relpaths) {
    std::ifstream in(manifest_path);
    if (!in) return;  // no manifest, nothing to check against
    nlohmann::json manifest = nlohmann::json::parse(in);
    if (!manifest.contains("files")) return;
    for (const std::string& rel : relpaths) {
        if (!manifest["files"].contains(rel)) continue;
        const auto& entry = manifest["files"][rel];
        const fs::path path = fs::path(root) / rel;
        if (entry.contains("size") && !entry["size"].is_null()) {
            const auto want = entry["size"].get<std::uintmax_t>();
            const auto got = fs::file_size(path);
            if (got != want) {
                throw std::runtime_error("checksum manifest: " + rel + " has size " + std::to_string(got) +
                                         ", expected " + std::to_string(want));
            }
        }
        if (entry.contains("sha256") && !entry["sha256"].is_null()) {
            const std::string want = entry["sha256"].get<std::string>();
            const std::string got = Sha256::of_file(path.string());
            if (got != want) {
                throw std::runtime_error("checksum manifest: " + rel + " sha256 mismatch");
            }
        }
    }
}

nn::Tensor to_batch_tensor(const std::vector<Image>& images, const NormStats& stats, int height, int width) {
    if (images.empty()) throw std::invalid_argument("to_batch_tensor: empty batch");
    const int channels = images[0].channels();
    nn::Tensor t({static_cast<int>(images.size()), channels, height, width});
    for (std::size_t i = 0; i < images.size(); ++i) {
        // Size-changing transforms (crops, transpose of non-square inputs)
        // are mapped back to the model resolution here, bilinearly.
        const Image img = (images[i].height() == height && images[i].width() == width)
                              ? images[i]
                              : resize_bilinear(images[i], height, width);
        if (img.channels() != channels) throw std::invalid_argument("to_batch_tensor: channel mismatch");
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    t.at4(static_cast<int>(i), c, y, x) = (img.at(y, x, c) - stats.mean[c]) / stats.std[c];
    }
    return t;
}

// Defined in the sibling translation units.
DatasetHandle load_cifar(const std::string& name, const std::string& root, std::uint64_t seed);
DatasetHandle load_svhn(const std::string& root, std::uint64_t seed);
DatasetHandle load_packed(const std::string& name, const std::string& root, std::uint64_t seed);
DatasetHandle make_probe_dataset(std::uint64_t seed, int sample_count);
DatasetHandle make_synthetic_segmentation(std::uint64_t seed, int sample_count);
DatasetHandle make_cifar_fixture(const std::string& root, std::uint64_t seed);

DatasetHandle load_dataset(const std::string& name, const std::string& root, int subset_size,
                           std::uint64_t seed) {
    DatasetHandle ds;
    if (name == "cifar10" || name == "cifar100") {
        ds = load_cifar(name, root, seed);
    } else if (name == "svhn") {
        ds = load_svhn(root, seed);
    } else if (name == "tiny-imagenet" || name == "cityscapes") {
        ds = load_packed(name, root, seed);
    } else if (name == "probe") {
        ds = make_probe_dataset(seed, subset_size > 0 ? subset_size : 5000);
        subset_size = 0;  // generator already sized the dataset
    } else if (name == "synthseg") {
        ds = make_synthetic_segmentation(seed, subset_size > 0 ? subset_size : 600);
        subset_size = 0;
    } else if (name == "cifar10-fixture") {
        ds = make_cifar_fixture(root, seed);
    } else {
        throw std::invalid_argument("load_dataset: unknown dataset '" + name + "'");
    }

    if (subset_size > 0 && ds.label_kind == LabelKind::ClassIndex) {
        Rng rng(Rng::splitmix64(seed ^ 0x50b5e7ULL));
        ds.train = stratified_subset(ds.train, subset_size, ds.num_classes, rng);
    } else if (subset_size > 0) {
        // Masks have no single class; take a deterministic seeded sample.
        Rng rng(Rng::splitmix64(seed ^ 0x50b5e7ULL));
        std::vector<std::size_t> order(ds.train.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        order.resize(std::min<std::size_t>(order.size(), subset_size));
        std::sort(order.begin(), order.end());
        Split sub;
        for (std::size_t i : order) {
            sub.images.push_back(ds.train.images[i]);
            sub.labels.push_back(ds.train.labels[i]);
        }
        ds.train = std::move(sub);
    }
    return ds;
}

}  // namespace safeaug
