#pragma once

#include <string>
#include <vector>

#include "safeaug/workflows/config.hpp"

namespace safeaug {

struct EpochStats {
    int epoch = 0;
    double l_augm = 0.0;
    double l_task = 0.0;
    double l_total = 0.0;
    double val_metric = 0.0;  // percent
    double lr = 0.0;
};

/// Persisted result of one run; carries enough provenance (config hash,
/// seed, catalog mapping, parent run) to re-run it from the registry alone.
struct ExperimentRecord {
    std::string run_id;
    std::string kind;  // learn-safe | train | finetune | sweep | eval
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<EpochStats> epochs;
    std::string metric_name;      // "top1" | "miou"
    double final_metric = -1.0;   // percent, in [0, 100]
    std::vector<std::string> safe_set_used;
    std::vector<std::string> catalog_mapping;
    std::string checkpoint_path;
    std::string parent_run;
    double wall_time_sec = 0.0;
    std::string status = "ok";  // or "diverged: ..."

    std::string to_json() const;
    static ExperimentRecord from_json(const std::string& text);
};

/// Append-only directory of run folders. One folder per run:
/// config.json, record.json plus any artifacts (checkpoint, reports).
class RunRegistry {
public:
    explicit RunRegistry(std::string root);

    const std::string& root() const { return root_; }

    /// Create the next run folder (id = zero-padded counter + kind) and echo
    /// the resolved config into it.
    std::string create_run(const std::string& kind, const ExperimentConfig& config);

    std::string run_dir(const std::string& run_id) const;
    void write_record(const std::string& run_id, const ExperimentRecord& record);
    ExperimentRecord read_record(const std::string& run_id) const;
    ExperimentConfig read_config(const std::string& run_id) const;
    std::vector<std::string> list_runs() const;
    bool exists(const std::string& run_id) const;

private:
    std::string root_;
};

}  // namespace safeaug
