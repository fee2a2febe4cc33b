#include "safeaug/workflows/workflows.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "safeaug/data/checkpoint.hpp"
#include "safeaug/workflows/training.hpp"

namespace safeaug {

namespace fs = std::filesystem;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void require_valid(ExperimentConfig& config) {
    const auto problems = config.validate();
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw std::invalid_argument(msg);
    }
    config.resolve();
}

nn::ModelDesc model_desc_for(const ExperimentConfig& config, const DatasetHandle& ds) {
    nn::ModelDesc desc;
    desc.backbone = config.model;
    desc.task = ds.label_kind == LabelKind::Mask ? nn::TaskKind::Segmentation : nn::TaskKind::Classification;
    desc.num_classes = ds.num_classes;
    desc.input_height = ds.input_height;
    desc.input_width = ds.input_width;
    desc.input_channels = ds.input_channels;
    desc.tiny_width = config.tiny_width;
    desc.init_seed = config.seed;
    return desc;
}

nn::OptimizerSpec optimizer_spec_for(const ExperimentConfig& config) {
    nn::OptimizerSpec spec;
    spec.kind = config.optimizer;
    spec.lr = config.lr;
    spec.momentum = config.momentum;
    spec.weight_decay = config.optimizer == "adam" ? 0.0 : config.weight_decay;
    return spec;
}

std::vector<std::string> active_names_for_mode(const ExperimentConfig& config) {
    if (config.mode == "all") {
        const auto& names = catalog_names();
        return {names.begin(), names.end()};
    }
    if (config.mode == "safe" || config.mode == "safe_v2" || config.mode == "safe_baseline_cutout") {
        std::vector<std::string> names = load_set_names(config.safe_set_file);
        if (config.mode == "safe_v2") {
            // Safe v2 drops the two mutually conflicting crops.
            std::erase(names, std::string("RandomCrop"));
            std::erase(names, std::string("CenterCrop"));
        }
        return names;
    }
    return {};
}

TrainAugMode aug_mode_for(const std::string& mode) {
    if (mode == "none") return TrainAugMode::None;
    if (mode == "baseline") return TrainAugMode::Baseline;
    if (mode == "safe_baseline_cutout") return TrainAugMode::CombinedCutout;
    return TrainAugMode::FixedSubset;
}

ExperimentRecord execute_into_run(const ExperimentConfig& config, RunRegistry& registry,
                                  const std::string& run_id, const std::string& kind, nn::Model& model,
                                  nn::Optimizer& opt, const DatasetHandle& ds, TrainAugMode mode,
                                  const std::vector<std::string>& active, const std::string& parent_run) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainOutcome outcome = run_training(model, opt, ds, config, mode, active, config.seed);

    ExperimentRecord record;
    record.run_id = run_id;
    record.kind = kind;
    record.config_hash = config.hash();
    record.seed = config.seed;
    record.epochs = outcome.epochs;
    record.metric_name = ds.label_kind == LabelKind::Mask ? "miou" : "top1";
    record.safe_set_used = active;
    {
        const auto& names = catalog_names();
        record.catalog_mapping.assign(names.begin(), names.end());
    }
    record.parent_run = parent_run;
    record.status = outcome.status;

    if (outcome.status == "ok") {
        record.final_metric = evaluate_metric(model, ds, ds.test, config.batch_size);
        const std::string ckpt = registry.run_dir(run_id) + "/checkpoint.ckpt";
        save_checkpoint(ckpt, model, &opt, config.hash(),
                        {{"kind", kind},
                         {"final_metric", std::to_string(record.final_metric)},
                         {"parent_run", parent_run}});
        record.checkpoint_path = ckpt;
    }
    record.wall_time_sec = seconds_since(t0);
    registry.write_record(run_id, record);
    if (record.status != "ok") {
        throw std::runtime_error(kind + " run " + run_id + " aborted (" + record.status +
                                 "); diagnostic record written");
    }
    return record;
}

ExperimentRecord run_one_training(const ExperimentConfig& config, RunRegistry& registry,
                                  const std::string& kind, nn::Model& model, nn::Optimizer& opt,
                                  const DatasetHandle& ds, TrainAugMode mode,
                                  const std::vector<std::string>& active, const std::string& parent_run) {
    const std::string run_id = registry.create_run(kind, config);
    return execute_into_run(config, registry, run_id, kind, model, opt, ds, mode, active, parent_run);
}

}  // namespace

std::vector<std::string> load_set_names(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open set file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const AugmentationSet set = catalog_from_json(ss.str());
    return set.mapping();
}

LearnSafeResult learn_safe(ExperimentConfig config, RunRegistry& registry) {
    require_valid(config);
    const auto t0 = std::chrono::steady_clock::now();
    DatasetHandle ds = load_dataset(config.dataset, config.data_root, config.subset_size, config.seed);
    const AugmentationSet catalog = catalog_for_dataset(ds);

    nn::Model model(model_desc_for(config, ds), catalog.mapping());
    nn::Optimizer opt(optimizer_spec_for(config));
    const std::string run_id = registry.create_run("learn-safe", config);

    TrainOutcome outcome =
        run_training(model, opt, ds, config, TrainAugMode::LearnPhase, catalog.mapping(), config.seed);

    ExperimentRecord record;
    record.run_id = run_id;
    record.kind = "learn-safe";
    record.config_hash = config.hash();
    record.seed = config.seed;
    record.epochs = outcome.epochs;
    record.metric_name = ds.label_kind == LabelKind::Mask ? "miou" : "top1";
    record.catalog_mapping = catalog.mapping();
    record.status = outcome.status;
    if (outcome.status != "ok") {
        record.wall_time_sec = seconds_since(t0);
        registry.write_record(run_id, record);
        throw std::runtime_error("learn_safe run " + run_id + " aborted (" + record.status +
                                 "); diagnostic record written");
    }

    // Step 2: clean-set false positives on untouched test data.
    ModelBatchPredictor predictor(model, ds.stats);
    SafetyMetrics clean = evaluate_clean_false_positives(predictor, ds.test.images, config.eval_batch_size,
                                                         config.decision_threshold);
    // Step 3: per-label accuracy under the training-phase sampler.
    AugSamplerConfig sampler;
    sampler.max_subset_size = config.max_subset_size;
    sampler.p = 1.0;
    sampler.batch_size = config.eval_batch_size;
    const int units_per_pass =
        std::max<int>(1, static_cast<int>((ds.test.size() + config.eval_batch_size - 1) / config.eval_batch_size));
    sampler.passes = config.eval_passes > 0 ? config.eval_passes
                                            : std::max(1, (3000 + units_per_pass - 1) / units_per_pass);
    SafetyMetrics augmented = evaluate_augmentation_accuracy(
        predictor, ds.test.images, catalog, sampler, Rng::splitmix64(config.seed ^ 0x57e93ULL),
        config.decision_threshold);
    SafetyMetrics metrics = merge_metrics(clean, augmented, catalog.mapping());

    // Step 4: thresholded selection.
    Thresholds thresholds{config.fp_max, config.acc_max, config.decision_threshold};
    SafeSet safe = select_safe_set(metrics, thresholds);
    safe.provenance = run_id;

    record.final_metric = evaluate_metric(model, ds, ds.test, config.batch_size);
    record.safe_set_used = safe.members;

    const std::string dir = registry.run_dir(run_id);
    const std::string ckpt = dir + "/checkpoint.ckpt";
    save_checkpoint(ckpt, model, &opt, config.hash(), {{"kind", "learn-safe"}});
    record.checkpoint_path = ckpt;

    LearnSafeResult result;
    SafetyReport report;
    report.metrics = metrics;
    report.safe_set = safe;
    std::tie(result.report_json_path, result.report_svg_path) = emit_report(report, dir + "/report");
    result.safe_set_path = dir + "/safe_set.json";
    {
        std::ofstream out(result.safe_set_path);
        out << safe_set_to_catalog_json(safe, catalog);
    }

    record.wall_time_sec = seconds_since(t0);
    registry.write_record(run_id, record);
    result.safe_set = std::move(safe);
    result.metrics = std::move(metrics);
    result.record = std::move(record);
    return result;
}

ExperimentRecord train_with_set(ExperimentConfig config, RunRegistry& registry) {
    require_valid(config);
    DatasetHandle ds = load_dataset(config.dataset, config.data_root, config.subset_size, config.seed);
    nn::Model model(model_desc_for(config, ds), catalog_for_dataset(ds).mapping());
    nn::Optimizer opt(optimizer_spec_for(config));
    return run_one_training(config, registry, "train", model, opt, ds, aug_mode_for(config.mode),
                            active_names_for_mode(config), "");
}

ExperimentRecord finetune(const std::string& checkpoint_path, ExperimentConfig config,
                          RunRegistry& registry, const std::string& parent_run) {
    const bool explicit_lr = config.lr > 0.0;
    require_valid(config);
    DatasetHandle ds = load_dataset(config.dataset, config.data_root, config.subset_size, config.seed);
    const AugmentationSet catalog = catalog_for_dataset(ds);

    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    require_mapping_match(ckpt, catalog.mapping());
    auto opt = ckpt.make_optimizer();
    // The LR schedule restarts from the pretraining's final LR unless the
    // config pins one explicitly.
    if (explicit_lr) opt->set_lr(config.lr);

    return run_one_training(config, registry, "finetune", *ckpt.model, *opt, ds,
                            aug_mode_for(config.mode), active_names_for_mode(config), parent_run);
}

ExperimentRecord train_combined(ExperimentConfig config, RunRegistry& registry) {
    config.mode = "safe_baseline_cutout";
    require_valid(config);
    DatasetHandle ds = load_dataset(config.dataset, config.data_root, config.subset_size, config.seed);
    nn::Model model(model_desc_for(config, ds), catalog_for_dataset(ds).mapping());
    nn::Optimizer opt(optimizer_spec_for(config));
    return run_one_training(config, registry, "train", model, opt, ds, TrainAugMode::CombinedCutout,
                            active_names_for_mode(config), "");
}

std::vector<SweepRow> subset_size_sweep(ExperimentConfig config, const std::vector<int>& sizes,
                                        RunRegistry& registry) {
    for (int s : sizes) {
        if (s < 0 || s > kCatalogSize) throw std::invalid_argument("sweep: size out of [0,15]");
    }
    require_valid(config);
    const std::string sweep_id = registry.create_run("sweep", config);

    // The parent allocates every run folder up front (the registry is
    // single-writer for ids), then a bounded pool of worker processes fills
    // them. Run outputs are identical whatever the worker count.
    struct PlannedRun {
        ExperimentConfig cfg;
        std::string run_id;
        int size;
        std::string set_name;
    };
    std::vector<PlannedRun> plan;
    for (const std::string set_name : {"all", "safe"}) {
        for (int size : sizes) {
            ExperimentConfig c = config;
            c.mode = set_name;
            c.k = size;
            require_valid(c);
            plan.push_back(PlannedRun{c, registry.create_run("train", c), size, set_name});
        }
    }

    auto execute_planned = [&registry](const PlannedRun& run) {
        DatasetHandle ds = load_dataset(run.cfg.dataset, run.cfg.data_root, run.cfg.subset_size,
                                        run.cfg.seed);
        nn::Model model(model_desc_for(run.cfg, ds), catalog_for_dataset(ds).mapping());
        nn::Optimizer opt(optimizer_spec_for(run.cfg));
        execute_into_run(run.cfg, registry, run.run_id, "train", model, opt, ds,
                         aug_mode_for(run.cfg.mode), active_names_for_mode(run.cfg), "");
    };

    const int workers = std::max(1, config.workers);
    if (workers == 1) {
        for (const auto& run : plan) execute_planned(run);
    } else {
        std::vector<pid_t> active_children;
        auto reap_one = [&active_children]() {
            int status = 0;
            const pid_t done = waitpid(-1, &status, 0);
            std::erase(active_children, done);
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
                throw std::runtime_error("sweep: worker process failed");
            }
        };
        for (const auto& run : plan) {
            while (static_cast<int>(active_children.size()) >= workers) reap_one();
            const pid_t pid = fork();
            if (pid < 0) throw std::runtime_error("sweep: fork failed");
            if (pid == 0) {
                try {
                    execute_planned(run);
                } catch (const std::exception&) {
                    _exit(1);
                }
                _exit(0);
            }
            active_children.push_back(pid);
        }
        while (!active_children.empty()) reap_one();
    }

    std::vector<SweepRow> rows;
    for (const auto& run : plan) {
        rows.push_back(SweepRow{run.size, run.set_name, registry.read_record(run.run_id).final_metric,
                                run.run_id});
    }

    // Table (JSON + CSV) and a Figure-3-style line plot.
    const std::string dir = registry.run_dir(sweep_id);
    nlohmann::json j = nlohmann::json::array();
    std::ofstream csv(dir + "/sweep.csv");
    csv << "size,set,metric,run_id\n";
    for (const auto& r : rows) {
        j.push_back({{"size", r.size}, {"set", r.set_name}, {"metric", r.metric}, {"run_id", r.run_id}});
        csv << r.size << "," << r.set_name << "," << r.metric << "," << r.run_id << "\n";
    }
    std::ofstream(dir + "/sweep.json") << j.dump(2);

    std::ostringstream svg;
    const double left = 60, top = 30, w = 640, h = 360;
    double lo = 100.0, hi = 0.0;
    for (const auto& r : rows) {
        lo = std::min(lo, r.metric);
        hi = std::max(hi, r.metric);
    }
    if (hi <= lo) hi = lo + 1.0;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + w + 40 << "\" height=\""
        << top + h + 60 << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << left << "\" y=\"18\">Accuracy vs subset size</text>\n";
    for (const std::string set_name : {"all", "safe"}) {
        const char* color = set_name == "all" ? "#4878cf" : "#ee854a";
        std::ostringstream points;
        for (const auto& r : rows) {
            if (r.set_name != set_name) continue;
            const double x = left + (sizes.size() < 2 ? 0.5 : double(std::find(sizes.begin(), sizes.end(), r.size) - sizes.begin()) / (sizes.size() - 1)) * w;
            const double y = top + h * (1.0 - (r.metric - lo) / (hi - lo));
            points << x << "," << y << " ";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
            << points.str() << "\"/>\n";
    }
    svg << "</svg>\n";
    std::ofstream(dir + "/sweep.svg") << svg.str();

    ExperimentRecord summary;
    summary.run_id = sweep_id;
    summary.kind = "sweep";
    summary.config_hash = config.hash();
    summary.seed = config.seed;
    summary.metric_name = "top1";
    {
        const auto& names = catalog_names();
        summary.catalog_mapping.assign(names.begin(), names.end());
    }
    double best = -1.0;
    for (const auto& r : rows) best = std::max(best, r.metric);
    summary.final_metric = best;
    registry.write_record(sweep_id, summary);
    return rows;
}

double evaluate_checkpoint(const std::string& checkpoint_path, ExperimentConfig config) {
    require_valid(config);
    DatasetHandle ds = load_dataset(config.dataset, config.data_root, config.subset_size, config.seed);
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    const bool seg_model = ckpt.model->desc().task == nn::TaskKind::Segmentation;
    if (seg_model != (ds.label_kind == LabelKind::Mask)) {
        throw std::runtime_error("evaluate: checkpoint task does not match dataset task");
    }
    return evaluate_metric(*ckpt.model, ds, ds.test, config.batch_size);
}

std::map<std::string, double> per_augmentation_task_accuracy(ExperimentConfig config,
                                                             RunRegistry& registry) {
    std::map<std::string, double> out;
    for (const std::string& name : catalog_names()) {
        ExperimentConfig c = config;
        c.mode = "all";  // validated as a fixed-subset mode; the single-member
        c.k = 1;         // set is passed to the trainer directly below
        require_valid(c);
        DatasetHandle ds = load_dataset(c.dataset, c.data_root, c.subset_size, c.seed);
        nn::Model model(model_desc_for(c, ds), catalog_for_dataset(ds).mapping());
        nn::Optimizer opt(optimizer_spec_for(c));
        ExperimentRecord rec = run_one_training(c, registry, "train", model, opt, ds,
                                                TrainAugMode::FixedSubset, {name}, "");
        out[name] = rec.final_metric;
    }
    return out;
}

}  // namespace safeaug
