#include "safeaug/cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "safeaug/analyzer/report.hpp"
#include "safeaug/data/synthetic.hpp"
#include "safeaug/workflows/training.hpp"
#include "safeaug/workflows/workflows.hpp"

namespace safeaug::cli {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
    std::string config_file;
    ExperimentConfig cfg;
    std::string out_root = "./runs";

    // CLI11 keeps parse counts, so only flags the user actually passed
    // override the config file.
    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "config file (JSON, schema v1)");
        app->add_option("--dataset", cfg.dataset, "dataset name");
        app->add_option("--data-root", cfg.data_root, "dataset root (default $SAFEAUG_DATA_ROOT or ./data)");
        app->add_option("--subset-size", cfg.subset_size, "stratified train subset size (0 = full)");
        app->add_option("--model", cfg.model, "tiny | tiny-seg | densenet-121 | densenet-169 | fpn-densenet-121");
        app->add_option("--mode", cfg.mode, "none|baseline|safe|safe_v2|all|safe_baseline_cutout");
        app->add_option("--k", cfg.k, "subset size per batch");
        app->add_option("--p", cfg.p, "per-transform probability");
        app->add_option("--epochs", cfg.epochs, "training epochs");
        app->add_option("--seed", cfg.seed, "run seed");
        app->add_option("--fp-max", cfg.fp_max, "safe-set false-positive threshold");
        app->add_option("--acc-max", cfg.acc_max, "safe-set accuracy threshold");
        app->add_option("--repeats", cfg.repeats, "independent repeats (averaged)");
        app->add_option("--workers", cfg.workers, "worker processes for sweeps");
        app->add_option("--batch-size", cfg.batch_size, "batch size");
        app->add_option("--tiny-width", cfg.tiny_width, "base width of the tiny backbones");
        app->add_option("--lr", cfg.lr, "initial learning rate");
        app->add_option("--safe-set", cfg.safe_set_file, "safe-set file (catalog format)");
        app->add_option("--out", out_root, "run registry root");
    }

    ExperimentConfig resolve(CLI::App* app) const {
        ExperimentConfig base;
        if (!config_file.empty()) base = ExperimentConfig::from_file(config_file);
        ExperimentConfig merged = base;
        auto take = [&](const char* flag, auto member_ptr) {
            if (app->count(flag) > 0) merged.*member_ptr = cfg.*member_ptr;
        };
        take("--dataset", &ExperimentConfig::dataset);
        take("--data-root", &ExperimentConfig::data_root);
        take("--subset-size", &ExperimentConfig::subset_size);
        take("--model", &ExperimentConfig::model);
        take("--mode", &ExperimentConfig::mode);
        take("--k", &ExperimentConfig::k);
        take("--p", &ExperimentConfig::p);
        take("--epochs", &ExperimentConfig::epochs);
        take("--seed", &ExperimentConfig::seed);
        take("--fp-max", &ExperimentConfig::fp_max);
        take("--acc-max", &ExperimentConfig::acc_max);
        take("--repeats", &ExperimentConfig::repeats);
        take("--workers", &ExperimentConfig::workers);
        take("--batch-size", &ExperimentConfig::batch_size);
        take("--tiny-width", &ExperimentConfig::tiny_width);
        take("--lr", &ExperimentConfig::lr);
        take("--safe-set", &ExperimentConfig::safe_set_file);
        return merged;
    }
};

void print_record(const ExperimentRecord& rec, std::ostream& out) {
    out << "run " << rec.run_id << " [" << rec.kind << "] " << rec.metric_name << " = " << std::fixed
        << std::setprecision(2) << rec.final_metric << "%  (epochs: " << rec.epochs.size()
        << ", wall: " << std::setprecision(1) << rec.wall_time_sec << "s, seed " << rec.seed << ")\n";
}

int cmd_list_transforms(std::ostream& out) {
    const AugmentationSet catalog = default_catalog();
    out << "index  name              p     params\n";
    for (int i = 0; i < catalog.size(); ++i) {
        const auto& spec = catalog.at(i);
        out << std::left << std::setw(7) << i << std::setw(18) << spec.name << std::setw(6)
            << spec.probability;
        bool first = true;
        for (const auto& [k, v] : spec.params) {
            out << (first ? "" : ", ") << k << "=" << v;
            first = false;
        }
        out << "\n";
    }
    return 0;
}

int cmd_probe(int n, std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
    SyntheticProbeSpec spec;
    spec.sample_count = n;
    spec.seed = seed;
    DatasetHandle ds = make_synthetic_probe(spec);
    if (!out_dir.empty()) {
        export_probe(ds, out_dir);
        out << "probe dataset written to " << out_dir << "\n";
    }
    // Closed-form sanity numbers for the planted structure.
    int flipped_detected = 0;
    const int checks = static_cast<int>(std::min<std::size_t>(ds.test.size(), 500));
    for (int i = 0; i < checks; ++i) {
        Image flipped(ds.test.images[i].height(), ds.test.images[i].width(), ds.test.images[i].channels());
        const Image& src = ds.test.images[i];
        for (int y = 0; y < src.height(); ++y)
            for (int x = 0; x < src.width(); ++x)
                for (int c = 0; c < src.channels(); ++c)
                    flipped.at(y, x, c) = src.at(src.height() - 1 - y, x, c);
        if (vertical_gradient_feature(src) > 0 && vertical_gradient_feature(flipped) < 0) ++flipped_detected;
    }
    out << "probe: " << ds.train.size() << " train / " << ds.val.size() << " val / " << ds.test.size()
        << " test images, " << ds.num_classes << " classes\n";
    out << "vertical-gradient separation: " << flipped_detected << "/" << checks
        << " flipped images detectable by the closed-form feature\n";
    return 0;
}

int run_impl(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"safeaug: learn which augmentations are safe, then train with them"};
    app.require_subcommand(1);

    // learn-safe ------------------------------------------------------------
    auto* learn = app.add_subcommand("learn-safe", "joint training + safety analysis (steps 1-4)");
    CommonFlags learn_flags;
    learn_flags.attach(learn);

    // train -----------------------------------------------------------------
    auto* train = app.add_subcommand("train", "train the task under an augmentation mode");
    CommonFlags train_flags;
    train_flags.attach(train);

    // finetune --------------------------------------------------------------
    auto* ft = app.add_subcommand("finetune", "continue a checkpointed run with a new set");
    CommonFlags ft_flags;
    ft_flags.attach(ft);
    std::string ft_checkpoint, ft_run;
    ft->add_option("--checkpoint", ft_checkpoint, "checkpoint file to start from");
    ft->add_option("--run", ft_run, "run id whose checkpoint to start from");

    // sweep -----------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "subset-size sweep over {all, safe}");
    CommonFlags sweep_flags;
    sweep_flags.attach(sweep);
    std::string sizes_arg = "0,1,2,3,4,5";
    sweep->add_option("--sizes", sizes_arg, "comma-separated subset sizes");

    // report ----------------------------------------------------------------
    auto* report = app.add_subcommand("report", "re-emit the safety report of a learn-safe run");
    CommonFlags report_flags;
    report_flags.attach(report);
    std::string report_run, report_out;
    double reference = -1.0;
    bool with_per_aug = false;
    report->add_option("--run", report_run, "learn-safe run id")->required();
    report->add_option("--out-stem", report_out, "output stem (default: the run folder)");
    report->add_option("--reference", reference, "no-augmentation task accuracy for the reference line");
    report->add_flag("--per-aug-accuracy", with_per_aug,
                     "train one tiny model per augmentation for the third series (expensive)");

    // list-transforms / probe -------------------------------------------------
    app.add_subcommand("list-transforms", "print the 15-transform catalog with default magnitudes");
    auto* probe = app.add_subcommand("probe", "generate and sanity-check the synthetic probe dataset");
    int probe_n = 5000;
    std::uint64_t probe_seed = 0;
    std::string probe_out;
    probe->add_option("--n", probe_n, "train sample count");
    probe->add_option("--seed", probe_seed, "generator seed");
    probe->add_option("--out", probe_out, "export directory (image files + label manifest)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 2;
    }

    if (app.got_subcommand("list-transforms")) return cmd_list_transforms(out);
    if (app.got_subcommand(probe)) return cmd_probe(probe_n, probe_seed, probe_out, out);

    if (app.got_subcommand(learn)) {
        ExperimentConfig cfg = learn_flags.resolve(learn);
        RunRegistry registry(learn_flags.out_root);
        LearnSafeResult result = learn_safe(cfg, registry);
        print_record(result.record, out);
        out << "safe set (" << result.safe_set.members.size() << "):";
        for (const auto& name : result.safe_set.members) out << " " << name;
        out << "\nreport: " << result.report_json_path << " / " << result.report_svg_path << "\n";
        out << "safe-set file: " << result.safe_set_path << "\n";
        return 0;
    }

    if (app.got_subcommand(train)) {
        ExperimentConfig cfg = train_flags.resolve(train);
        RunRegistry registry(train_flags.out_root);
        double sum = 0.0;
        for (int r = 0; r < cfg.repeats; ++r) {
            ExperimentConfig one = cfg;
            one.seed = cfg.seed + static_cast<std::uint64_t>(r);
            one.repeats = 1;
            ExperimentRecord rec = one.mode == "safe_baseline_cutout" ? train_combined(one, registry)
                                                                      : train_with_set(one, registry);
            print_record(rec, out);
            sum += rec.final_metric;
        }
        if (cfg.repeats > 1) {
            out << "mean over " << cfg.repeats << " runs: " << std::fixed << std::setprecision(2)
                << sum / cfg.repeats << "%\n";
        }
        return 0;
    }

    if (app.got_subcommand(ft)) {
        ExperimentConfig cfg = ft_flags.resolve(ft);
        RunRegistry registry(ft_flags.out_root);
        std::string parent;
        if (ft_checkpoint.empty()) {
            if (ft_run.empty()) {
                err << "error: finetune needs --checkpoint or --run\n";
                return 2;
            }
            ft_checkpoint = registry.read_record(ft_run).checkpoint_path;
            parent = ft_run;
        }
        ExperimentRecord rec = finetune(ft_checkpoint, cfg, registry, parent);
        print_record(rec, out);
        return 0;
    }

    if (app.got_subcommand(sweep)) {
        ExperimentConfig cfg = sweep_flags.resolve(sweep);
        RunRegistry registry(sweep_flags.out_root);
        std::vector<int> sizes;
        std::stringstream ss(sizes_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
        auto rows = subset_size_sweep(cfg, sizes, registry);
        out << "size  set   metric\n";
        for (const auto& r : rows) {
            out << std::left << std::setw(6) << r.size << std::setw(6) << r.set_name << std::fixed
                << std::setprecision(2) << r.metric << "%  (" << r.run_id << ")\n";
        }
        return 0;
    }

    if (app.got_subcommand(report)) {
        ExperimentConfig cfg = report_flags.resolve(report);
        RunRegistry registry(report_flags.out_root);
        const std::string dir = registry.run_dir(report_run);
        std::ifstream in(dir + "/report.json");
        if (!in) {
            err << "error: no report.json in " << dir << " (is this a finished learn-safe run?)\n";
            return 1;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        SafetyReport rep = report_from_json(ss.str());
        if (reference >= 0.0) rep.reference_task_accuracy = reference;
        if (with_per_aug) {
            rep.per_augmentation_task_accuracy = per_augmentation_task_accuracy(cfg, registry);
        }
        const std::string stem = report_out.empty() ? dir + "/report" : report_out;
        auto [json_path, svg_path] = emit_report(rep, stem);
        out << "label              fp_rate  aug_acc  recall  safe\n";
        for (int i = 0; i < kCatalogSize; ++i) {
            out << std::left << std::setw(19) << rep.metrics.mapping[i] << std::fixed << std::setw(9)
                << std::setprecision(3) << rep.metrics.clean_fp_rate[i] << std::setw(9)
                << rep.metrics.aug_accuracy[i] << std::setw(8) << rep.metrics.aug_recall[i]
                << (rep.safe_set.contains(rep.metrics.mapping[i]) ? "yes" : "-") << "\n";
        }
        out << "written: " << json_path << " / " << svg_path << "\n";
        return 0;
    }

    err << "error: no subcommand\n";
    return 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return run_impl(args, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace safeaug::cli
