#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <zlib.h>

#include "safeaug/data/checkpoint.hpp"
#include "safeaug/data/dataset.hpp"
#include "safeaug/data/packed.hpp"
#include "safeaug/data/sha256.hpp"
#include "safeaug/data/synthetic.hpp"
#include "safeaug/transforms/transforms.hpp"

using namespace safeaug;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("safeaug_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

}  // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(Sha256::of_string("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::of_string("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::of_string("The quick brown fox jumps over the lazy dog") ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("normalization applied then inverted reproduces the raw image") {
    SyntheticProbeSpec spec;
    spec.sample_count = 20;
    DatasetHandle ds = make_synthetic_probe(spec);
    const Image& raw = ds.train.images[0];
    const Image round = ds.stats.invert(ds.stats.apply(raw));
    REQUIRE(round.same_shape(raw));
    for (std::size_t i = 0; i < raw.size(); ++i) {
        REQUIRE(std::abs(round.data()[i] - raw.data()[i]) <= 1e-6);
    }
}

TEST_CASE("probe oracles") {
    SyntheticProbeSpec spec;
    spec.sample_count = 400;
    spec.seed = 5;
    DatasetHandle ds = make_synthetic_probe(spec);

    SUBCASE("vertical flips are separable by the closed-form gradient feature at 99%+") {
        int correct = 0, total = 0;
        for (const Image& img : ds.train.images) {
            Image flipped(img.height(), img.width(), img.channels());
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x)
                    for (int c = 0; c < img.channels(); ++c)
                        flipped.at(y, x, c) = img.at(img.height() - 1 - y, x, c);
            correct += vertical_gradient_feature(img) > 0.0;
            correct += vertical_gradient_feature(flipped) < 0.0;
            total += 2;
        }
        CHECK(static_cast<double>(correct) / total >= 0.99);
    }

    SUBCASE("brightness is masked: the best mean-intensity threshold stays near chance") {
        // Apply RandomBrightness to half the images; fit the best single
        // threshold on mean intensity on one half of the data and measure
        // its held-out accuracy on the other half.
        const AugmentationSpec bright{"RandomBrightness", {{"limit", 0.2}}, 1.0};
        SyntheticProbeSpec big = spec;
        big.sample_count = 4000;
        DatasetHandle wide = make_synthetic_probe(big);
        Rng rng(77);
        std::vector<std::pair<double, int>> fit, held;
        for (std::size_t i = 0; i < wide.train.images.size(); ++i) {
            const bool transformed = i % 2 == 0;
            const Image img =
                transformed ? apply_transform(wide.train.images[i], bright, rng) : wide.train.images[i];
            (i % 4 < 2 ? fit : held).push_back({img.mean(), transformed ? 1 : 0});
        }
        std::sort(fit.begin(), fit.end());
        const int n = static_cast<int>(fit.size());
        int best = 0, positives_left = 0, total_pos = 0;
        double best_cut = 0.0;
        bool best_right_polarity = true;
        for (const auto& [f, y] : fit) total_pos += y;
        for (int cut = 0; cut <= n; ++cut) {
            if (cut > 0) positives_left += fit[cut - 1].second;
            const double cut_value = cut == n ? fit.back().first + 1 : fit[cut].first;
            const int right_pos = (total_pos - positives_left) + (cut - positives_left);
            const int left_pos = positives_left + ((n - cut) - (total_pos - positives_left));
            if (right_pos > best) best = right_pos, best_cut = cut_value, best_right_polarity = true;
            if (left_pos > best) best = left_pos, best_cut = cut_value, best_right_polarity = false;
        }
        int correct = 0;
        for (const auto& [f, y] : held) {
            const int predicted = best_right_polarity ? (f >= best_cut) : (f < best_cut);
            correct += predicted == y;
        }
        CHECK(static_cast<double>(correct) / held.size() <= 0.55);
    }

    SUBCASE("dataset splits are disjoint by construction and deterministic") {
        DatasetHandle again = make_synthetic_probe(spec);
        CHECK(again.train.images[3] == ds.train.images[3]);
        CHECK(again.test.images[5] == ds.test.images[5]);
    }

    SUBCASE("contradictory spec is rejected") {
        SyntheticProbeSpec bad = spec;
        bad.nuisances.push_back("vertical_gradient");
        bad.asymmetries = {"vertical_gradient"};
        CHECK_THROWS_AS(make_synthetic_probe(bad), std::invalid_argument);
        SyntheticProbeSpec unknown = spec;
        unknown.asymmetries = {"diagonal_stripes"};
        CHECK_THROWS_AS(make_synthetic_probe(unknown), std::invalid_argument);
    }

    SUBCASE("with nothing planted, identity-magnitude photometric transforms are no-ops") {
        SyntheticProbeSpec plain = spec;
        plain.sample_count = 8;
        plain.asymmetries.clear();
        plain.nuisances.clear();
        DatasetHandle flat = make_synthetic_probe(plain);
        Rng rng(1);
        const Image& img = flat.train.images[0];
        Image gamma = apply_transform(img, {"RandomGamma", {{"gamma_lo", 1.0}, {"gamma_hi", 1.0}}, 1.0}, rng);
        CHECK(gamma == img);
        Image contrast = apply_transform(img, {"RandomContrast", {{"limit", 0.0}}, 1.0}, rng);
        for (std::size_t i = 0; i < img.size(); ++i) {
            CHECK(std::abs(contrast.data()[i] - img.data()[i]) <= 1e-6);
        }
    }
}

TEST_CASE("stratified subsets are balanced and deterministic") {
    SyntheticProbeSpec spec;
    spec.sample_count = 600;
    DatasetHandle ds = make_synthetic_probe(spec);
    Rng rng1(12), rng2(12);
    Split a = stratified_subset(ds.train, 200, ds.num_classes, rng1);
    Split b = stratified_subset(ds.train, 200, ds.num_classes, rng2);
    REQUIRE(a.size() == 200);
    std::vector<int> counts(ds.num_classes, 0);
    for (const auto& l : a.labels) counts[l[0]]++;
    for (int c : counts) CHECK(std::abs(c - 200 / ds.num_classes) <= 1);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.images[i] == b.images[i]);
}

TEST_CASE("cifar fixture writes the canonical binary format and loads through the real parser") {
    TempDir dir;
    DatasetHandle ds = load_dataset("cifar10-fixture", dir.path.string(), 0, 3);
    CHECK(ds.num_classes == 10);
    CHECK(ds.train.size() + ds.val.size() == 3000);
    CHECK(ds.test.size() == 600);
    CHECK(ds.input_height == 32);
    CHECK(fs::file_size(dir.path / "cifar-10-batches-bin" / "data_batch_1.bin") == 600 * 3073);

    SUBCASE("subset selection is deterministic") {
        DatasetHandle s1 = load_dataset("cifar10-fixture", dir.path.string(), 500, 3);
        DatasetHandle s2 = load_dataset("cifar10-fixture", dir.path.string(), 500, 3);
        REQUIRE(s1.train.size() == 500);
        CHECK(s1.train.images[17] == s2.train.images[17]);
    }

    SUBCASE("checksum manifest size mismatch is fatal") {
        std::ofstream manifest(dir.path / "checksums.json");
        manifest << R"({"files": {"cifar-10-batches-bin/data_batch_1.bin": {"size": 1}}})";
        manifest.close();
        CHECK_THROWS_AS(load_dataset("cifar10", dir.path.string(), 0, 3), std::runtime_error);
    }
}

TEST_CASE("packed dataset round-trips through the prepared layout") {
    TempDir dir;
    DatasetHandle seg = make_synthetic_segmentation(9, 12);
    seg.name = "cityscapes";  // reuse the pack reader path for segmentation
    write_pack(seg, dir.path.string());
    DatasetHandle back = load_dataset("cityscapes", dir.path.string(), 0, 9);
    CHECK(back.label_kind == LabelKind::Mask);
    CHECK(back.num_classes == 3);
    CHECK(back.train.size() == seg.train.size());
    CHECK(back.train.labels[0] == seg.train.labels[0]);
    // Pixels quantize to 8 bits on the way through the pack.
    for (std::size_t i = 0; i < back.train.images[0].size(); ++i) {
        CHECK(std::abs(back.train.images[0].data()[i] - seg.train.images[0].data()[i]) <= 0.5f / 255.0f + 1e-6f);
    }
    CHECK_THROWS_AS(load_dataset("tiny-imagenet", dir.path.string(), 0, 9), std::runtime_error);
}

TEST_CASE("probe export writes an image directory with a label manifest") {
    TempDir dir;
    SyntheticProbeSpec spec;
    spec.sample_count = 6;
    DatasetHandle ds = make_synthetic_probe(spec);
    export_probe(ds, (dir.path / "probe").string());
    CHECK(fs::exists(dir.path / "probe" / "labels.json"));
    CHECK(fs::exists(dir.path / "probe" / "train" / "0.ppm"));
    std::ifstream ppm(dir.path / "probe" / "train" / "0.ppm", std::ios::binary);
    std::string magic;
    ppm >> magic;
    CHECK(magic == "P6");
}

TEST_CASE("checkpoints round-trip bit-for-bit and catch tampering") {
    TempDir dir;
    const std::string path = (dir.path / "model.ckpt").string();
    nn::ModelDesc desc;
    desc.num_classes = 4;
    desc.init_seed = 11;
    nn::Model model(desc, default_catalog().mapping());
    nn::Optimizer opt(nn::OptimizerSpec{});

    // One real update so optimizer state is nontrivial.
    nn::JointBatch batch;
    batch.images = nn::Tensor({2, 3, 32, 32});
    Rng rng(2);
    for (auto& v : batch.images.vec()) v = rng.uniform(-1, 1);
    batch.aug_labels.assign(kCatalogSize, 0);
    batch.task_labels = {0, 3};
    nn::train_step(model, batch, opt);

    save_checkpoint(path, model, &opt, "cfghash123", {{"note", "unit-test"}});
    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.config_hash == "cfghash123");
    CHECK(loaded.meta.at("note") == "unit-test");
    CHECK(loaded.model->desc().backbone == "tiny");

    // Bit-exact forward reproduction on a probe batch.
    auto a = model.forward(batch.images, false);
    auto b = loaded.model->forward(batch.images, false);
    CHECK(a.aug_logits.vec() == b.aug_logits.vec());
    CHECK(a.task_logits.vec() == b.task_logits.vec());

    // Optimizer state continues identically: one more step on both.
    auto opt2 = loaded.make_optimizer();
    nn::train_step(model, batch, opt);
    nn::train_step(*loaded.model, batch, *opt2);
    auto pa = model.params();
    auto pb = loaded.model->params();
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i]->value.vec() == pb[i]->value.vec());

    SUBCASE("tampered files are rejected with an integrity error") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(200);
        f.put('\x7f');
        f.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("integrity"), std::runtime_error);
    }

    SUBCASE("catalog mapping mismatch refuses to load") {
        std::vector<std::string> other = default_catalog().mapping();
        std::swap(other[0], other[1]);
        LoadedCheckpoint again = load_checkpoint(path);
        CHECK_THROWS_WITH_AS(require_mapping_match(again, other), doctest::Contains("mapping"),
                             std::runtime_error);
    }
}

TEST_CASE("synthetic segmentation set has exact masks and all three classes") {
    DatasetHandle ds = make_synthetic_segmentation(3, 30);
    CHECK(ds.label_kind == LabelKind::Mask);
    std::vector<int> seen(3, 0);
    for (int v : ds.train.labels[0]) {
        REQUIRE(v >= 0);
        REQUIRE(v < 3);
        seen[v]++;
    }
    CHECK(seen[0] > 0);
    CHECK(seen[1] + seen[2] > 0);
}

TEST_CASE("unknown dataset names are rejected") {
    CHECK_THROWS_AS(load_dataset("imagenet-22k", "/tmp", 0, 0), std::invalid_argument);
}

namespace {

// Minimal MAT 5 writer covering exactly what the SVHN files contain.
struct Mat5Writer {
    std::string buf;

    Mat5Writer() {
        std::string header(116, ' ');
        const std::string text = "MATLAB 5.0 MAT-file, synthetic test fixture";
        header.replace(0, text.size(), text);
        buf += header;
        buf += std::string(8, '\0');                  // subsystem offset
        buf.push_back(0x00);                          // version 0x0100 LE
        buf.push_back(0x01);
        buf += "IM";                                  // little-endian marker
    }

    void u32(std::uint32_t v) { buf.append(reinterpret_cast<const char*>(&v), 4); }
    void pad8() { while (buf.size() % 8) buf.push_back('\0'); }

    std::string matrix(const std::string& name, const std::vector<int>& dims,
                       const std::vector<std::uint8_t>& data) {
        std::string m;
        auto mu32 = [&m](std::uint32_t v) { m.append(reinterpret_cast<const char*>(&v), 4); };
        mu32(6);  // miUINT32 array flags
        mu32(8);
        mu32(9);  // mxUINT8_CLASS
        mu32(0);
        mu32(5);  // miINT32 dims
        mu32(static_cast<std::uint32_t>(dims.size()) * 4);
        for (int d : dims) mu32(static_cast<std::uint32_t>(d));
        while (m.size() % 8) m.push_back('\0');
        mu32(1);  // miINT8 name
        mu32(static_cast<std::uint32_t>(name.size()));
        m += name;
        while (m.size() % 8) m.push_back('\0');
        mu32(2);  // miUINT8 payload
        mu32(static_cast<std::uint32_t>(data.size()));
        m.append(reinterpret_cast<const char*>(data.data()), data.size());
        while (m.size() % 8) m.push_back('\0');
        return m;
    }

    void add_matrix(const std::string& m, bool compressed) {
        if (!compressed) {
            u32(14);
            u32(static_cast<std::uint32_t>(m.size()));
            buf += m;
            pad8();
            return;
        }
        // The real files store every variable as a miCOMPRESSED element.
        std::string inner;
        {
            std::uint32_t t = 14, len = static_cast<std::uint32_t>(m.size());
            inner.append(reinterpret_cast<const char*>(&t), 4);
            inner.append(reinterpret_cast<const char*>(&len), 4);
            inner += m;
        }
        uLongf bound = compressBound(inner.size());
        std::vector<Bytef> z(bound);
        REQUIRE(compress(z.data(), &bound, reinterpret_cast<const Bytef*>(inner.data()), inner.size()) ==
                Z_OK);
        u32(15);
        u32(static_cast<std::uint32_t>(bound));
        buf.append(reinterpret_cast<const char*>(z.data()), bound);
        pad8();
    }
};

void write_svhn_fixture(const fs::path& path, bool compressed) {
    Mat5Writer w;
    // Two 32x32x3 images, column-major: index = row + 32*(col + 32*(ch + 3*i)).
    std::vector<std::uint8_t> x(32 * 32 * 3 * 2, 0);
    x[5 + 32 * (7 + 32 * (2 + 3 * 1))] = 255;  // image 1, row 5, col 7, chan 2
    std::vector<std::uint8_t> y = {5, 10};     // class 10 is the digit zero
    w.add_matrix(w.matrix("X", {32, 32, 3, 2}, x), compressed);
    w.add_matrix(w.matrix("y", {2, 1}, y), compressed);
    std::ofstream out(path, std::ios::binary);
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
}

}  // namespace

TEST_CASE("svhn loader parses both plain and compressed MAT 5 fixtures") {
    for (bool compressed : {false, true}) {
        CAPTURE(compressed);
        TempDir dir;
        write_svhn_fixture(dir.path / "train_32x32.mat", compressed);
        write_svhn_fixture(dir.path / "test_32x32.mat", compressed);
        DatasetHandle ds = load_dataset("svhn", dir.path.string(), 0, 1);
        CHECK(ds.num_classes == 10);
        CHECK(ds.train.size() + ds.val.size() == 2);
        CHECK(ds.test.size() == 2);
        // Label 10 remaps to digit zero.
        std::vector<int> labels = {ds.test.labels[0][0], ds.test.labels[1][0]};
        std::sort(labels.begin(), labels.end());
        CHECK(labels == std::vector<int>{0, 5});
        // Column-major unpacking puts the marked pixel at (row 5, col 7, ch 2).
        CHECK(ds.test.images[1].at(5, 7, 2) == 1.0f);
        CHECK(ds.test.images[1].at(7, 5, 2) == 0.0f);
    }
}

TEST_CASE("svhn loader reports missing files") {
    TempDir dir;
    CHECK_THROWS_WITH_AS(load_dataset("svhn", dir.path.string(), 0, 1), doctest::Contains("train_32x32"),
                         std::runtime_error);
}
