#include "safeaug/workflows/registry.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace safeaug {

namespace fs = std::filesystem;

std::string ExperimentRecord::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["run_id"] = run_id;
    j["kind"] = kind;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["metric_name"] = metric_name;
    j["final_metric"] = final_metric;
    j["safe_set_used"] = safe_set_used;
    j["catalog_mapping"] = catalog_mapping;
    j["checkpoint_path"] = checkpoint_path;
    j["parent_run"] = parent_run;
    j["wall_time_sec"] = wall_time_sec;
    j["status"] = status;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs) {
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"l_augm", e.l_augm},
                               {"l_task", e.l_task},
                               {"l_total", e.l_total},
                               {"val_metric", e.val_metric},
                               {"lr", e.lr}});
    }
    return j.dump(2);
}

ExperimentRecord ExperimentRecord::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ExperimentRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.metric_name = j.at("metric_name").get<std::string>();
    r.final_metric = j.at("final_metric").get<double>();
    r.safe_set_used = j.at("safe_set_used").get<std::vector<std::string>>();
    r.catalog_mapping = j.at("catalog_mapping").get<std::vector<std::string>>();
    r.checkpoint_path = j.at("checkpoint_path").get<std::string>();
    r.parent_run = j.at("parent_run").get<std::string>();
    r.wall_time_sec = j.at("wall_time_sec").get<double>();
    r.status = j.at("status").get<std::string>();
    for (const auto& e : j.at("epochs")) {
        EpochStats s;
        s.epoch = e.at("epoch").get<int>();
        s.l_augm = e.at("l_augm").get<double>();
        s.l_task = e.at("l_task").get<double>();
        s.l_total = e.at("l_total").get<double>();
        s.val_metric = e.at("val_metric").get<double>();
        s.lr = e.at("lr").get<double>();
        r.epochs.push_back(s);
    }
    return r;
}

RunRegistry::RunRegistry(std::string root) : root_(std::move(root)) {
    fs::create_directories(root_);
}

std::string RunRegistry::create_run(const std::string& kind, const ExperimentConfig& config) {
    int next = 0;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        const auto dash = name.find('-');
        if (dash == std::string::npos) continue;
        try {
            next = std::max(next, std::stoi(name.substr(0, dash)) + 1);
        } catch (const std::exception&) {
            continue;
        }
    }
    std::ostringstream id;
    id << std::setw(6) << std::setfill('0') << next << "-" << kind;
    const fs::path dir = fs::path(root_) / id.str();
    fs::create_directories(dir);
    std::ofstream cfg(dir / "config.json");
    if (!cfg) throw std::runtime_error("registry: cannot write config for " + id.str());
    cfg << config.to_json();
    return id.str();
}

std::string RunRegistry::run_dir(const std::string& run_id) const {
    return (fs::path(root_) / run_id).string();
}

bool RunRegistry::exists(const std::string& run_id) const {
    return fs::exists(fs::path(root_) / run_id / "config.json");
}

void RunRegistry::write_record(const std::string& run_id, const ExperimentRecord& record) {
    std::ofstream out(fs::path(root_) / run_id / "record.json");
    if (!out) throw std::runtime_error("registry: cannot write record for " + run_id);
    out << record.to_json();
}

ExperimentRecord RunRegistry::read_record(const std::string& run_id) const {
    std::ifstream in(fs::path(root_) / run_id / "record.json");
    if (!in) throw std::runtime_error("registry: no record for run " + run_id);
    std::stringstream ss;
    ss << in.rdbuf();
    return ExperimentRecord::from_json(ss.str());
}

ExperimentConfig RunRegistry::read_config(const std::string& run_id) const {
    std::ifstream in(fs::path(root_) / run_id / "config.json");
    if (!in) throw std::runtime_error("registry: no config for run " + run_id);
    std::stringstream ss;
    ss << in.rdbuf();
    return ExperimentConfig::from_json(ss.str());
}

std::vector<std::string> RunRegistry::list_runs() const {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.is_directory() && fs::exists(entry.path() / "config.json")) {
            out.push_back(entry.path().filename().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace safeaug
