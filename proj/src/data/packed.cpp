// Loader for the prepared raw-tensor layout used by the datasets whose
// public archives are image-codec trees (Tiny ImageNet JPEGs, Cityscapes
// PNGs). This library links no image codec, so those archives are converted
// once into this layout (see README for the conversion recipe):
//
//   <root>/<name>-pack/meta.json
//   <root>/<name>-pack/<split>_images.u8   N * H * W * C bytes, HWC order
//   <root>/<name>-pack/<split>_labels.bin  int32 LE per image, or
//                                          N * H * W mask bytes (255=ignore)

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "safeaug/data/dataset.hpp"
#include "safeaug/data/packed.hpp"

namespace safeaug {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("packed: cannot open " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void load_split(const fs::path& dir, const std::string& split, int count, const DatasetHandle& ds,
                bool masks, Split& out) {
    if (count == 0) return;
    const auto images = read_all(dir / (split + "_images.u8"));
    const auto labels = read_all(dir / (split + "_labels.bin"));
    const std::size_t img_bytes =
        static_cast<std::size_t>(ds.input_height) * ds.input_width * ds.input_channels;
    if (images.size() != img_bytes * count) {
        throw std::runtime_error("packed: " + split + "_images.u8 has wrong size");
    }
    const std::size_t mask_bytes = static_cast<std::size_t>(ds.input_height) * ds.input_width;
    if (masks ? labels.size() != mask_bytes * count : labels.size() != 4u * count) {
        throw std::runtime_error("packed: " + split + "_labels.bin has wrong size");
    }
    for (int i = 0; i < count; ++i) {
        out.images.push_back(Image::from_u8(ds.input_height, ds.input_width, ds.input_channels,
                                            images.data() + img_bytes * i));
        if (masks) {
            std::vector<int> mask(mask_bytes);
            for (std::size_t j = 0; j < mask_bytes; ++j) mask[j] = labels[mask_bytes * i + j];
            out.labels.push_back(std::move(mask));
        } else {
            std::int32_t v;
            std::memcpy(&v, labels.data() + 4u * i, 4);
            out.labels.push_back({static_cast<int>(v)});
        }
    }
}

}  // namespace

DatasetHandle load_packed(const std::string& name, const std::string& root, std::uint64_t seed) {
    const fs::path dir = fs::path(root) / (name + "-pack");
    const fs::path meta_path = dir / "meta.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) {
        throw std::runtime_error("packed: " + meta_path.string() +
                                 " not found; prepare the dataset pack first (see README)");
    }
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    if (meta.value("format", "") != "safeaug-pack" || meta.value("version", 0) != 1) {
        throw std::runtime_error("packed: unsupported pack format in " + meta_path.string());
    }

    DatasetHandle ds;
    ds.name = name;
    ds.label_kind = meta.at("task").get<std::string>() == "segmentation" ? LabelKind::Mask
                                                                         : LabelKind::ClassIndex;
    ds.num_classes = meta.at("num_classes").get<int>();
    ds.input_height = meta.at("height").get<int>();
    ds.input_width = meta.at("width").get<int>();
    ds.input_channels = meta.at("channels").get<int>();

    const bool masks = ds.label_kind == LabelKind::Mask;
    const auto& splits = meta.at("splits");
    load_split(dir, "train", splits.value("train", 0), ds, masks, ds.train);
    load_split(dir, "val", splits.value("val", 0), ds, masks, ds.val);
    load_split(dir, "test", splits.value("test", 0), ds, masks, ds.test);
    if (ds.train.size() == 0) throw std::runtime_error("packed: empty train split");

    ds.stats = compute_norm_stats(ds.train.images);
    if (ds.val.size() == 0) {
        Rng rng(Rng::splitmix64(seed ^ 0x9ac4edULL));
        carve_validation(ds, 0.1, rng);
    }
    // Conventional substitution when no held-out labels ship with the data:
    // validation doubles as test.
    if (ds.test.size() == 0) ds.test = ds.val;
    return ds;
}

void write_pack(const DatasetHandle& ds, const std::string& root) {
    const fs::path dir = fs::path(root) / (ds.name + "-pack");
    fs::create_directories(dir);
    const bool masks = ds.label_kind == LabelKind::Mask;

    auto dump_split = [&](const Split& split, const std::string& name) {
        std::ofstream imgs(dir / (name + "_images.u8"), std::ios::binary);
        std::ofstream labs(dir / (name + "_labels.bin"), std::ios::binary);
        for (std::size_t i = 0; i < split.size(); ++i) {
            for (float v : split.images[i].data()) {
                imgs.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
            }
            if (masks) {
                for (int m : split.labels[i]) labs.put(static_cast<char>(m));
            } else {
                const std::int32_t v = split.labels[i][0];
                labs.write(reinterpret_cast<const char*>(&v), 4);
            }
        }
    };
    dump_split(ds.train, "train");
    dump_split(ds.val, "val");
    dump_split(ds.test, "test");

    nlohmann::json meta;
    meta["format"] = "safeaug-pack";
    meta["version"] = 1;
    meta["name"] = ds.name;
    meta["task"] = masks ? "segmentation" : "classification";
    meta["num_classes"] = ds.num_classes;
    meta["height"] = ds.input_height;
    meta["width"] = ds.input_width;
    meta["channels"] = ds.input_channels;
    meta["splits"] = {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2);
}

}  // namespace safeaug
