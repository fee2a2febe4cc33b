#include "safeaug/workflows/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "safeaug/data/sha256.hpp"

namespace safeaug {

namespace {

const std::set<std::string> kModes = {"none", "baseline", "safe", "safe_v2", "all", "safe_baseline_cutout"};
const std::set<std::string> kModels = {"tiny", "tiny-seg", "densenet-121", "densenet-169", "fpn-densenet-121"};
const std::set<std::string> kDatasets = {"cifar10", "cifar100",  "svhn",           "tiny-imagenet",
                                         "cityscapes", "probe", "synthseg", "cifar10-fixture"};

}  // namespace

bool ExperimentConfig::is_segmentation_model() const {
    return model == "tiny-seg" || model == "fpn-densenet-121";
}

std::vector<std::string> ExperimentConfig::validate() const {
    std::vector<std::string> problems;
    if (!kDatasets.count(dataset)) problems.push_back("dataset: unknown '" + dataset + "'");
    if (!kModels.count(model)) problems.push_back("model: unknown '" + model + "'");
    if (!kModes.count(mode)) problems.push_back("mode: unknown '" + mode + "'");
    if (p < 0.0 || p > 1.0) problems.push_back("p: must lie in [0,1], got " + std::to_string(p));
    if (k < 0 || k > 15) problems.push_back("k: must lie in [0,15], got " + std::to_string(k));
    if (max_subset_size < 0 || max_subset_size > 15) problems.push_back("max_subset_size: must lie in [0,15]");
    if (epochs < 0) problems.push_back("epochs: must be >= 0");
    if (batch_size < 1) problems.push_back("batch_size: must be >= 1");
    if (subset_size < 0) problems.push_back("subset_size: must be >= 0");
    if (tiny_width < 1) problems.push_back("tiny_width: must be >= 1");
    if (fp_max < 0.0 || fp_max > 1.0) problems.push_back("fp_max: must lie in [0,1]");
    if (acc_max < 0.0 || acc_max > 1.0) problems.push_back("acc_max: must lie in [0,1]");
    if (decision_threshold < 0.0 || decision_threshold > 1.0) {
        problems.push_back("decision_threshold: must lie in [0,1]");
    }
    if (!optimizer.empty() && optimizer != "sgd" && optimizer != "adam") {
        problems.push_back("optimizer: must be sgd, adam, or empty for the task default");
    }
    if (lr != -1.0 && lr <= 0.0) problems.push_back("lr: must be positive (or -1 for the default)");
    if (repeats < 1) problems.push_back("repeats: must be >= 1");
    if (workers < 1) problems.push_back("workers: must be >= 1");
    if (cutout_size < -1) problems.push_back("cutout_size: must be -1 (default), 0 (off) or positive");
    if (eval_batch_size < 1) problems.push_back("eval_batch_size: must be >= 1");
    if (eval_passes != -1 && eval_passes < 1) problems.push_back("eval_passes: must be >= 1 (or -1 for auto)");
    if (mode == "safe_baseline_cutout" && is_segmentation_model()) problems.push_back("mode: safe_baseline_cutout is a classification recipe");
    if ((mode == "safe" || mode == "safe_v2") && safe_set_file.empty()) {
        problems.push_back("safe_set_file: required for mode '" + mode + "'");
    }
    const bool seg_dataset = dataset == "cityscapes" || dataset == "synthseg";
    if (seg_dataset != is_segmentation_model()) {
        problems.push_back("model: '" + model + "' does not match the task of dataset '" + dataset + "'");
    }
    return problems;
}

void ExperimentConfig::resolve() {
    const bool seg = is_segmentation_model();
    if (optimizer.empty()) optimizer = seg ? "adam" : "sgd";
    if (lr < 0.0) lr = optimizer == "adam" ? 1e-4 : 0.1;
    if (plateau_factor < 0.0) plateau_factor = seg ? 0.5 : 0.1;
    if (plateau_patience < 0) plateau_patience = seg ? 7 : 10;
    if (early_stop_patience < 0) early_stop_patience = seg ? 15 : 20;
    if (cutout_size == -1) cutout_size = dataset == "svhn" ? 20 : 16;
    data_root = resolve_data_root(data_root);
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["dataset"] = dataset;
    j["data_root"] = data_root;
    j["subset_size"] = subset_size;
    j["seed"] = seed;
    j["model"] = model;
    j["tiny_width"] = tiny_width;
    j["mode"] = mode;
    j["k"] = k;
    j["p"] = p;
    j["max_subset_size"] = max_subset_size;
    j["safe_set_file"] = safe_set_file;
    j["optimizer"] = optimizer;
    j["lr"] = lr;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["epochs"] = epochs;
    j["plateau_factor"] = plateau_factor;
    j["plateau_patience"] = plateau_patience;
    j["early_stop_patience"] = early_stop_patience;
    j["batch_size"] = batch_size;
    j["fp_max"] = fp_max;
    j["acc_max"] = acc_max;
    j["decision_threshold"] = decision_threshold;
    j["eval_batch_size"] = eval_batch_size;
    j["eval_passes"] = eval_passes;
    j["cutout_size"] = cutout_size;
    j["repeats"] = repeats;
    j["workers"] = workers;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const int version = j.value("schema_version", 1);
    if (version != 1) {
        throw std::invalid_argument("config: unsupported schema_version " + std::to_string(version));
    }
    static const std::set<std::string> known = {
        "schema_version", "dataset", "data_root", "subset_size", "seed", "model", "tiny_width", "mode",
        "k", "p", "max_subset_size", "safe_set_file", "optimizer", "lr", "momentum", "weight_decay",
        "epochs", "plateau_factor", "plateau_patience", "early_stop_patience", "batch_size", "fp_max",
        "acc_max", "decision_threshold", "eval_batch_size", "eval_passes", "cutout_size", "repeats", "workers"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw std::invalid_argument("config: unknown field '" + it.key() + "'");
    }
    ExperimentConfig c;
    c.dataset = j.value("dataset", c.dataset);
    c.data_root = j.value("data_root", c.data_root);
    c.subset_size = j.value("subset_size", c.subset_size);
    c.seed = j.value("seed", c.seed);
    c.model = j.value("model", c.model);
    c.tiny_width = j.value("tiny_width", c.tiny_width);
    c.mode = j.value("mode", c.mode);
    c.k = j.value("k", c.k);
    c.p = j.value("p", c.p);
    c.max_subset_size = j.value("max_subset_size", c.max_subset_size);
    c.safe_set_file = j.value("safe_set_file", c.safe_set_file);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.fp_max = j.value("fp_max", c.fp_max);
    c.acc_max = j.value("acc_max", c.acc_max);
    c.decision_threshold = j.value("decision_threshold", c.decision_threshold);
    c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
    c.eval_passes = j.value("eval_passes", c.eval_passes);
    c.cutout_size = j.value("cutout_size", c.cutout_size);
    c.repeats = j.value("repeats", c.repeats);
    c.workers = j.value("workers", c.workers);
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string ExperimentConfig::hash() const {
    return Sha256::of_string(to_json()).substr(0, 16);
}

std::string resolve_data_root(const std::string& configured) {
    if (!configured.empty()) return configured;
    if (const char* env = std::getenv("SAFEAUG_DATA_ROOT"); env && *env) return env;
    return "./data";
}

}  // namespace safeaug
