#include "safeaug/data/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "safeaug/data/sha256.hpp"

namespace safeaug {

namespace {

constexpr char kMagic[] = "SAFEAUGCKPT1";

void put_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>(v >> (8 * i));
    out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& s, std::size_t& off) {
    if (off + 8 > s.size()) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    off += 8;
    return v;
}

void put_doubles(std::string& out, const double* data, std::size_t n) {
    put_u64(out, n);
    out.append(reinterpret_cast<const char*>(data), n * sizeof(double));
}

std::vector<double> get_doubles(const std::string& s, std::size_t& off) {
    const std::uint64_t n = get_u64(s, off);
    if (off + n * sizeof(double) > s.size()) throw std::runtime_error("checkpoint: truncated payload");
    std::vector<double> out(n);
    std::memcpy(out.data(), s.data() + off, n * sizeof(double));
    off += n * sizeof(double);
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, nn::Model& model, const nn::Optimizer* optimizer,
                     const std::string& config_hash, const std::map<std::string, std::string>& meta) {
    nlohmann::json header;
    const nn::ModelDesc& d = model.desc();
    header["backbone"] = d.backbone;
    header["task"] = nn::to_string(d.task);
    header["num_classes"] = d.num_classes;
    header["input_height"] = d.input_height;
    header["input_width"] = d.input_width;
    header["input_channels"] = d.input_channels;
    header["tiny_width"] = d.tiny_width;
    header["init_seed"] = d.init_seed;
    header["catalog_mapping"] = model.catalog_mapping();
    header["config_hash"] = config_hash;
    header["meta"] = meta;
    if (optimizer) {
        const auto& spec = optimizer->spec();
        header["optimizer"] = {{"kind", spec.kind},         {"lr", spec.lr},
                               {"momentum", spec.momentum}, {"weight_decay", spec.weight_decay},
                               {"beta1", spec.beta1},       {"beta2", spec.beta2},
                               {"eps", spec.eps}};
    }
    const std::string header_json = header.dump();

    std::string blob;
    blob.append(kMagic, sizeof(kMagic) - 1);
    put_u64(blob, header_json.size());
    blob.append(header_json);

    const auto params = model.params();
    put_u64(blob, params.size());
    for (const nn::Param* p : params) put_doubles(blob, p->value.data(), p->value.size());

    const auto state = model.net().persistent_state();
    put_u64(blob, state.size());
    for (const nn::Tensor* t : state) put_doubles(blob, t->data(), t->size());

    if (optimizer) {
        const auto opt_blob = optimizer->state_blob();
        put_doubles(blob, opt_blob.data(), opt_blob.size());
    } else {
        put_u64(blob, 0);
    }

    const std::string digest = Sha256::of_bytes(blob.data(), blob.size());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.write(digest.data(), 64);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string all = ss.str();
    if (all.size() < sizeof(kMagic) - 1 + 64) throw std::runtime_error("load_checkpoint: file too small");

    const std::string digest = all.substr(all.size() - 64);
    all.resize(all.size() - 64);
    if (Sha256::of_bytes(all.data(), all.size()) != digest) {
        throw std::runtime_error("load_checkpoint: integrity check failed for " + path);
    }
    if (all.compare(0, sizeof(kMagic) - 1, kMagic) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic (not a checkpoint or wrong version)");
    }

    std::size_t off = sizeof(kMagic) - 1;
    const std::uint64_t header_len = get_u64(all, off);
    if (off + header_len > all.size()) throw std::runtime_error("load_checkpoint: truncated header");
    nlohmann::json header = nlohmann::json::parse(all.substr(off, header_len));
    off += header_len;

    nn::ModelDesc desc;
    desc.backbone = header.at("backbone").get<std::string>();
    desc.task = nn::task_kind_from_string(header.at("task").get<std::string>());
    desc.num_classes = header.at("num_classes").get<int>();
    desc.input_height = header.at("input_height").get<int>();
    desc.input_width = header.at("input_width").get<int>();
    desc.input_channels = header.at("input_channels").get<int>();
    desc.tiny_width = header.at("tiny_width").get<int>();
    desc.init_seed = header.at("init_seed").get<std::uint64_t>();

    LoadedCheckpoint ckpt;
    ckpt.config_hash = header.at("config_hash").get<std::string>();
    ckpt.meta = header.value("meta", std::map<std::string, std::string>{});
    ckpt.model = std::make_unique<nn::Model>(desc, header.at("catalog_mapping").get<std::vector<std::string>>());

    const std::uint64_t n_params = get_u64(all, off);
    auto params = ckpt.model->params();
    if (n_params != params.size()) throw std::runtime_error("load_checkpoint: parameter count mismatch");
    for (nn::Param* p : params) {
        auto values = get_doubles(all, off);
        if (values.size() != p->value.size()) {
            throw std::runtime_error("load_checkpoint: shape mismatch for " + p->name);
        }
        std::copy(values.begin(), values.end(), p->value.vec().begin());
    }

    const std::uint64_t n_state = get_u64(all, off);
    auto state = ckpt.model->net().persistent_state();
    if (n_state != state.size()) throw std::runtime_error("load_checkpoint: persistent state mismatch");
    for (nn::Tensor* t : state) {
        auto values = get_doubles(all, off);
        if (values.size() != t->size()) throw std::runtime_error("load_checkpoint: state size mismatch");
        std::copy(values.begin(), values.end(), t->vec().begin());
    }

    ckpt.optimizer_blob = get_doubles(all, off);
    if (header.contains("optimizer")) {
        const auto& o = header["optimizer"];
        ckpt.optimizer_spec.kind = o.at("kind").get<std::string>();
        ckpt.optimizer_spec.lr = o.at("lr").get<double>();
        ckpt.optimizer_spec.momentum = o.at("momentum").get<double>();
        ckpt.optimizer_spec.weight_decay = o.at("weight_decay").get<double>();
        ckpt.optimizer_spec.beta1 = o.at("beta1").get<double>();
        ckpt.optimizer_spec.beta2 = o.at("beta2").get<double>();
        ckpt.optimizer_spec.eps = o.at("eps").get<double>();
    }
    return ckpt;
}

std::unique_ptr<nn::Optimizer> LoadedCheckpoint::make_optimizer() const {
    auto opt = std::make_unique<nn::Optimizer>(optimizer_spec);
    if (!optimizer_blob.empty()) {
        opt->allocate(model->params());
        opt->restore_state(optimizer_blob);
    }
    return opt;
}

void require_mapping_match(const LoadedCheckpoint& ckpt, const std::vector<std::string>& current_mapping) {
    if (ckpt.model->catalog_mapping() != current_mapping) {
        throw std::runtime_error(
            "checkpoint catalog mapping does not match the current catalog; refusing to load "
            "(label semantics would change)");
    }
}

}  // namespace safeaug
