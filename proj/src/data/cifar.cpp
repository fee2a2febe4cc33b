#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "safeaug/data/dataset.hpp"

namespace safeaug {

namespace fs = std::filesystem;

namespace {

// Canonical CIFAR binary record: label byte(s) then 3072 bytes of pixels,
// channel-planar (1024 R, 1024 G, 1024 B), row-major within a channel.
void read_cifar_file(const fs::path& path, int label_bytes, Split& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cifar: cannot open " + path.string());
    const int record = label_bytes + 3072;
    std::vector<char> buf(record);
    while (in.read(buf.data(), record)) {
        // CIFAR-100 records carry (coarse, fine); the fine label is last.
        const int label = static_cast<std::uint8_t>(buf[label_bytes - 1]);
        Image img(32, 32, 3);
        const auto* pix = reinterpret_cast<const std::uint8_t*>(buf.data() + label_bytes);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    img.at(y, x, c) = static_cast<float>(pix[c * 1024 + y * 32 + x]) / 255.0f;
        out.images.push_back(std::move(img));
        out.labels.push_back({label});
    }
    if (in.gcount() != 0) throw std::runtime_error("cifar: truncated record in " + path.string());
}

}  // namespace

DatasetHandle load_cifar(const std::string& name, const std::string& root, std::uint64_t seed) {
    DatasetHandle ds;
    ds.name = name;
    ds.label_kind = LabelKind::ClassIndex;
    ds.input_height = ds.input_width = 32;
    ds.input_channels = 3;

    std::vector<std::string> train_files, test_files;
    std::string subdir;
    int label_bytes;
    if (name == "cifar10") {
        ds.num_classes = 10;
        subdir = "cifar-10-batches-bin";
        label_bytes = 1;
        for (int i = 1; i <= 5; ++i) train_files.push_back("data_batch_" + std::to_string(i) + ".bin");
        test_files.push_back("test_batch.bin");
    } else {
        ds.num_classes = 100;
        subdir = "cifar-100-binary";
        label_bytes = 2;
        train_files.push_back("train.bin");
        test_files.push_back("test.bin");
    }

    const fs::path base = fs::path(root) / subdir;
    if (!fs::exists(base)) {
        throw std::runtime_error("cifar: dataset directory not found: " + base.string() +
                                 " (extract the binary archive there)");
    }
    std::vector<std::string> rels;
    for (const auto& f : train_files) rels.push_back(subdir + "/" + f);
    for (const auto& f : test_files) rels.push_back(subdir + "/" + f);
    verify_against_manifest((fs::path(root) / "checksums.json").string(), root, rels);

    for (const auto& f : train_files) read_cifar_file(base / f, label_bytes, ds.train);
    for (const auto& f : test_files) read_cifar_file(base / f, label_bytes, ds.test);
    if (ds.train.size() == 0 || ds.test.size() == 0) throw std::runtime_error("cifar: empty splits");

    ds.stats = compute_norm_stats(ds.train.images);
    Rng rng(Rng::splitmix64(seed ^ 0xc1fa7ULL));
    carve_validation(ds, 0.1, rng);
    return ds;
}

/// Deterministic CIFAR-shaped stand-in written in the real binary layout and
/// loaded through the real parser; used where the public archive is absent.
DatasetHandle make_cifar_fixture(const std::string& root, std::uint64_t seed) {
    const fs::path base = fs::path(root) / "cifar-10-batches-bin";
    if (!fs::exists(base / "data_batch_1.bin")) {
        fs::create_directories(base);
        Rng rng(Rng::splitmix64(seed ^ 0xf1c7ULL));
        auto write_file = [&rng](const fs::path& path, int records) {
            std::ofstream out(path, std::ios::binary);
            std::vector<std::uint8_t> rec(3073);
            for (int r = 0; r < records; ++r) {
                const int label = static_cast<int>(rng.uniform_int(0, 9));
                rec[0] = static_cast<std::uint8_t>(label);
                // Class-dependent color statistics plus texture, so models
                // have something learnable.
                for (int c = 0; c < 3; ++c) {
                    const double base_v = 40.0 + 18.0 * label + 12.0 * c;
                    for (int i = 0; i < 1024; ++i) {
                        const double noise = rng.normal(0.0, 24.0);
                        const double v = base_v + ((i / 32 + i % 32 + label) % 7) * 6.0 + noise;
                        rec[1 + c * 1024 + i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                    }
                }
                out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
            }
        };
        for (int i = 1; i <= 5; ++i) write_file(base / ("data_batch_" + std::to_string(i) + ".bin"), 600);
        write_file(base / "test_batch.bin", 600);
    }
    DatasetHandle ds = load_cifar("cifar10", root, seed);
    ds.name = "cifar10-fixture";
    return ds;
}

}  // namespace safeaug
