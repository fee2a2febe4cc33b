#include "safeaug/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace safeaug {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kKnownAsymmetries = {"vertical_gradient"};
const std::vector<std::string> kKnownNuisances = {"brightness", "tint"};

bool has(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

// Blob counts per class; ratios stay separable under the +-20% brightness
// nuisance.
int blobs_for_class(int cls) {
    static const int counts[] = {1, 3, 6, 10};
    return counts[cls % 4];
}

Image make_probe_image(const SyntheticProbeSpec& spec, int cls, Rng& rng) {
    const int n = spec.image_size;
    const bool gradient = has(spec.asymmetries, "vertical_gradient");
    const bool brightness = has(spec.nuisances, "brightness");
    const bool tint = has(spec.nuisances, "tint");

    // Base and slope jitter keep the global brightness factor unidentifiable
    // from any single structural cue. Amplitudes are budgeted so that even
    // the transformed image stays inside [0, 1]:
    // (0.16 + 0.41 + 0.05) * 1.08 * 1.2 * 1.2 < 1, so clipping never fires
    // and cannot give a brightness change away.
    //
    // The slope band is mildly class-dependent: the task then needs the
    // signed vertical gradient in its features, which keeps the planted
    // asymmetry easy for the augmentation head to read out, and makes a
    // vertical flip visibly hurt the task.
    const double base = rng.uniform(0.10, 0.16);
    const double slope = gradient ? rng.uniform(0.22 + 0.05 * cls, 0.26 + 0.05 * cls) : 0.0;

    struct Blob {
        double cy, cx, r;
    };
    std::vector<Blob> blobs;
    const int count = blobs_for_class(cls);
    for (int b = 0; b < count; ++b) {
        blobs.push_back({rng.uniform(2.0, n - 2.0), rng.uniform(2.0, n - 2.0), rng.uniform(1.6, 3.2)});
    }
    // Mirror horizontally with probability 1/2 so horizontal flips are
    // distribution-neutral by construction.
    if (rng.bernoulli(0.5)) {
        for (auto& b : blobs) b.cx = (n - 1) - b.cx;
    }

    const double f = brightness ? rng.uniform(0.8, 1.2) : 1.0;
    double tints[3] = {1.0, 1.0, 1.0};
    if (tint) {
        for (double& t : tints) t = rng.uniform(0.92, 1.08);
    }

    Image img(n, n, 3);
    for (int y = 0; y < n; ++y) {
        // Top rows are brighter: the planted vertical asymmetry.
        const double grad = base + slope * (1.0 - static_cast<double>(y) / (n - 1));
        for (int x = 0; x < n; ++x) {
            double v = grad;
            for (const auto& b : blobs) {
                const double dy = y - b.cy, dx = x - b.cx;
                if (dy * dy + dx * dx <= b.r * b.r) {
                    v = grad + 0.05;  // hard-edged disks carry high frequencies
                    break;
                }
            }
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = static_cast<float>(std::clamp(v * f * tints[c], 0.0, 1.0));
            }
        }
    }
    return img;
}

void fill_split(const SyntheticProbeSpec& spec, int count, Rng& rng, Split& out) {
    for (int i = 0; i < count; ++i) {
        const int cls = static_cast<int>(rng.uniform_int(0, spec.num_classes - 1));
        out.images.push_back(make_probe_image(spec, cls, rng));
        out.labels.push_back({cls});
    }
}

}  // namespace

void SyntheticProbeSpec::validate() const {
    if (sample_count < num_classes) throw std::invalid_argument("probe spec: sample_count too small");
    if (image_size < 8) throw std::invalid_argument("probe spec: image_size must be >= 8");
    if (num_classes < 2 || num_classes > 4) throw std::invalid_argument("probe spec: num_classes in [2,4]");
    for (const auto& a : asymmetries) {
        if (!has(kKnownAsymmetries, a)) throw std::invalid_argument("probe spec: unknown asymmetry '" + a + "'");
    }
    for (const auto& m : nuisances) {
        if (!has(kKnownNuisances, m)) throw std::invalid_argument("probe spec: unknown nuisance '" + m + "'");
        if (has(asymmetries, m)) {
            throw std::invalid_argument("probe spec: '" + m + "' cannot be both nuisance and asymmetry");
        }
    }
}

DatasetHandle make_synthetic_probe(const SyntheticProbeSpec& spec) {
    spec.validate();
    DatasetHandle ds;
    ds.name = "probe";
    ds.label_kind = LabelKind::ClassIndex;
    ds.num_classes = spec.num_classes;
    ds.input_height = ds.input_width = spec.image_size;
    ds.input_channels = 3;

    Rng train_rng(Rng::splitmix64(spec.seed ^ 0x9702e01ULL));
    Rng val_rng(Rng::splitmix64(spec.seed ^ 0x9702e02ULL));
    Rng test_rng(Rng::splitmix64(spec.seed ^ 0x9702e03ULL));
    fill_split(spec, spec.sample_count, train_rng, ds.train);
    fill_split(spec, std::max(200, spec.sample_count / 10), val_rng, ds.val);
    fill_split(spec, std::max(2000, spec.sample_count / 5), test_rng, ds.test);
    ds.stats = compute_norm_stats(ds.train.images);
    return ds;
}

DatasetHandle make_probe_dataset(std::uint64_t seed, int sample_count) {
    SyntheticProbeSpec spec;
    spec.seed = seed;
    spec.sample_count = sample_count;
    return make_synthetic_probe(spec);
}

double vertical_gradient_feature(const Image& img) {
    const int half = img.height() / 2;
    double top = 0.0, bottom = 0.0;
    std::size_t top_n = 0, bottom_n = 0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                if (y < half) {
                    top += img.at(y, x, c);
                    ++top_n;
                } else if (y >= img.height() - half) {
                    bottom += img.at(y, x, c);
                    ++bottom_n;
                }
            }
        }
    }
    return top / top_n - bottom / bottom_n;
}

DatasetHandle make_synthetic_segmentation(std::uint64_t seed, int sample_count) {
    DatasetHandle ds;
    ds.name = "synthseg";
    ds.label_kind = LabelKind::Mask;
    ds.num_classes = 3;  // 0 background, 1 disk, 2 square
    ds.input_height = ds.input_width = 32;
    ds.input_channels = 3;

    auto fill = [&ds](int count, Rng& rng, Split& out) {
        const int n = ds.input_height;
        for (int i = 0; i < count; ++i) {
            Image img(n, n, 3);
            std::vector<int> mask(static_cast<std::size_t>(n) * n, 0);
            const double bg = rng.uniform(0.2, 0.4);
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const double texture = 0.05 * std::sin(0.7 * x + 0.9 * y);
                    for (int c = 0; c < 3; ++c)
                        img.at(y, x, c) = static_cast<float>(
                            std::clamp(bg + texture + rng.uniform(-0.02, 0.02), 0.0, 1.0));
                }
            // One disk and one square per image, possibly overlapping.
            const double dcy = rng.uniform(6.0, n - 6.0), dcx = rng.uniform(6.0, n - 6.0);
            const double dr = rng.uniform(3.0, 5.5);
            const int sy = static_cast<int>(rng.uniform_int(2, n - 10));
            const int sx = static_cast<int>(rng.uniform_int(2, n - 10));
            const int side = static_cast<int>(rng.uniform_int(5, 8));
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const bool in_square = y >= sy && y < sy + side && x >= sx && x < sx + side;
                    const bool in_disk = (y - dcy) * (y - dcy) + (x - dcx) * (x - dcx) <= dr * dr;
                    if (in_square) {
                        mask[static_cast<std::size_t>(y) * n + x] = 2;
                        img.at(y, x, 0) = 0.85f;
                        img.at(y, x, 1) = 0.35f;
                        img.at(y, x, 2) = 0.30f;
                    } else if (in_disk) {
                        mask[static_cast<std::size_t>(y) * n + x] = 1;
                        img.at(y, x, 0) = 0.25f;
                        img.at(y, x, 1) = 0.45f;
                        img.at(y, x, 2) = 0.90f;
                    }
                }
            out.images.push_back(std::move(img));
            out.labels.push_back(std::move(mask));
        }
    };

    Rng train_rng(Rng::splitmix64(seed ^ 0x5e65e61ULL));
    Rng val_rng(Rng::splitmix64(seed ^ 0x5e65e62ULL));
    Rng test_rng(Rng::splitmix64(seed ^ 0x5e65e63ULL));
    fill(sample_count, train_rng, ds.train);
    fill(std::max(50, sample_count / 6), val_rng, ds.val);
    fill(std::max(50, sample_count / 6), test_rng, ds.test);
    ds.stats = compute_norm_stats(ds.train.images);
    return ds;
}

void export_probe(const DatasetHandle& ds, const std::string& dir) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["name"] = ds.name;
    manifest["num_classes"] = ds.num_classes;
    manifest["height"] = ds.input_height;
    manifest["width"] = ds.input_width;
    manifest["channels"] = ds.input_channels;
    nlohmann::json entries = nlohmann::json::array();

    auto dump_split = [&](const Split& split, const std::string& split_name) {
        fs::create_directories(fs::path(dir) / split_name);
        for (std::size_t i = 0; i < split.size(); ++i) {
            const Image& img = split.images[i];
            const std::string rel = split_name + "/" + std::to_string(i) + ".ppm";
            std::ofstream out(fs::path(dir) / rel, std::ios::binary);
            out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x)
                    for (int c = 0; c < 3; ++c) {
                        const float v = img.channels() == 3 ? img.at(y, x, c) : img.at(y, x, 0);
                        out.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
                    }
            entries.push_back({{"file", rel}, {"label", split.labels[i][0]}, {"split", split_name}});
        }
    };
    dump_split(ds.train, "train");
    dump_split(ds.val, "val");
    dump_split(ds.test, "test");
    manifest["samples"] = std::move(entries);
    std::ofstream mout(fs::path(dir) / "labels.json");
    mout << manifest.dump(2);
}

}  // namespace safeaug
