#include "safeaug/analyzer/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace safeaug {

namespace {

using nlohmann::json;

json trace_to_json(const std::vector<UnitTrace>& traces) {
    json arr = json::array();
    for (const auto& t : traces) {
        json u;
        u["fired"] = json::array();
        for (auto b : t.fired) u["fired"].push_back(static_cast<int>(b));
        u["mean_logits"] = t.mean_logits;
        arr.push_back(std::move(u));
    }
    return arr;
}

std::vector<UnitTrace> trace_from_json(const json& arr) {
    std::vector<UnitTrace> out;
    for (const auto& u : arr) {
        UnitTrace t;
        for (const auto& b : u.at("fired")) t.fired.push_back(static_cast<std::uint8_t>(b.get<int>()));
        t.mean_logits = u.at("mean_logits").get<std::vector<double>>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

std::string report_to_json(const SafetyReport& report) {
    json j;
    j["schema_version"] = report.schema_version;
    j["mapping"] = report.metrics.mapping;
    j["clean_fp_rate"] = report.metrics.clean_fp_rate;
    j["aug_accuracy"] = report.metrics.aug_accuracy;
    j["aug_recall"] = report.metrics.aug_recall;
    j["aug_fired_units"] = report.metrics.aug_fired_units;
    j["clean_units"] = report.metrics.clean_units;
    j["aug_units"] = report.metrics.aug_units;
    j["clean_trace"] = trace_to_json(report.metrics.clean_trace);
    j["aug_trace"] = trace_to_json(report.metrics.aug_trace);
    j["thresholds"] = {{"fp_max", report.safe_set.thresholds.fp_max},
                       {"acc_max", report.safe_set.thresholds.acc_max},
                       {"decision_threshold", report.safe_set.thresholds.decision_threshold}};
    j["safe_set"] = report.safe_set.members;
    j["safe_set_provenance"] = report.safe_set.provenance;
    if (!report.per_augmentation_task_accuracy.empty()) {
        j["per_augmentation_task_accuracy"] = report.per_augmentation_task_accuracy;
    }
    if (report.reference_task_accuracy) {
        j["reference_task_accuracy"] = *report.reference_task_accuracy;
    }
    return j.dump(2);
}

SafetyReport report_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    SafetyReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != 1) {
        throw std::invalid_argument("report_from_json: unsupported schema version " +
                                    std::to_string(r.schema_version));
    }
    r.metrics.mapping = j.at("mapping").get<std::vector<std::string>>();
    r.metrics.clean_fp_rate = j.at("clean_fp_rate").get<std::vector<double>>();
    r.metrics.aug_accuracy = j.at("aug_accuracy").get<std::vector<double>>();
    r.metrics.aug_recall = j.at("aug_recall").get<std::vector<double>>();
    r.metrics.aug_fired_units = j.at("aug_fired_units").get<std::vector<int>>();
    r.metrics.clean_units = j.at("clean_units").get<int>();
    r.metrics.aug_units = j.at("aug_units").get<int>();
    r.metrics.clean_trace = trace_from_json(j.at("clean_trace"));
    r.metrics.aug_trace = trace_from_json(j.at("aug_trace"));
    r.safe_set.thresholds.fp_max = j.at("thresholds").at("fp_max").get<double>();
    r.safe_set.thresholds.acc_max = j.at("thresholds").at("acc_max").get<double>();
    r.safe_set.thresholds.decision_threshold = j.at("thresholds").at("decision_threshold").get<double>();
    r.safe_set.members = j.at("safe_set").get<std::vector<std::string>>();
    r.safe_set.provenance = j.value("safe_set_provenance", std::string());
    if (j.contains("per_augmentation_task_accuracy")) {
        r.per_augmentation_task_accuracy =
            j["per_augmentation_task_accuracy"].get<std::map<std::string, double>>();
    }
    if (j.contains("reference_task_accuracy")) {
        r.reference_task_accuracy = j["reference_task_accuracy"].get<double>();
    }
    return r;
}

std::string report_to_svg(const SafetyReport& report) {
    // Grouped bar chart, one group per transform: clean false-positive rate,
    // augmentation-classification accuracy, and (when present) the task
    // accuracy trained with that single augmentation. Horizontal reference
    // line marks the no-augmentation task accuracy.
    const auto& m = report.metrics;
    const int n = kCatalogSize;
    const double left = 70, top = 40, plot_w = 1040, plot_h = 360;
    const double width = left + plot_w + 30, height = top + plot_h + 140;
    const double group_w = plot_w / n;
    const bool has_task = !report.per_augmentation_task_accuracy.empty();
    const int bars = has_task ? 3 : 2;
    const double bar_w = group_w * 0.8 / bars;

    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << left << "\" y=\"22\" font-size=\"16\">Augmentation false positives (step 2) and "
           "augmentation classification (step 3)</text>\n";

    // Axes and gridlines at 0, 0.25, 0.5, 0.75, 1.
    for (int g = 0; g <= 4; ++g) {
        const double v = g / 4.0;
        const double y = top + plot_h * (1.0 - v);
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\"" << y
            << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    }

    auto bar = [&](int i, int slot, double value, const char* color) {
        const double x = left + i * group_w + group_w * 0.1 + slot * bar_w;
        const double h = plot_h * std::clamp(value, 0.0, 1.0);
        svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w * 0.92
            << "\" height=\"" << h << "\" fill=\"" << color << "\"/>\n";
    };

    for (int i = 0; i < n; ++i) {
        bar(i, 0, m.clean_fp_rate[i], "#4878cf");
        bar(i, 1, m.aug_accuracy[i], "#ee854a");
        if (has_task) {
            auto it = report.per_augmentation_task_accuracy.find(m.mapping[i]);
            if (it != report.per_augmentation_task_accuracy.end()) bar(i, 2, it->second / 100.0, "#6acc65");
        }
        const double cx = left + i * group_w + group_w / 2;
        svg << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 12
            << "\" text-anchor=\"end\" transform=\"rotate(-45 " << cx << " " << top + plot_h + 12 << ")\">"
            << m.mapping[i] << "</text>\n";
        if (report.safe_set.contains(m.mapping[i])) {
            svg << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 110
                << "\" text-anchor=\"middle\" fill=\"#2a7e2a\" font-size=\"14\">safe</text>\n";
        }
    }

    if (report.reference_task_accuracy) {
        const double y = top + plot_h * (1.0 - std::clamp(*report.reference_task_accuracy / 100.0, 0.0, 1.0));
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\"" << y
            << "\" stroke=\"red\" stroke-width=\"1.5\" stroke-dasharray=\"6,3\"/>\n";
        svg << "<text x=\"" << left + plot_w - 4 << "\" y=\"" << y - 5
            << "\" text-anchor=\"end\" fill=\"red\">no-augmentation accuracy</text>\n";
    }

    const double ly = height - 16;
    svg << "<rect x=\"" << left << "\" y=\"" << ly - 10 << "\" width=\"12\" height=\"12\" fill=\"#4878cf\"/>"
        << "<text x=\"" << left + 18 << "\" y=\"" << ly << "\">clean false-positive rate</text>\n";
    svg << "<rect x=\"" << left + 220 << "\" y=\"" << ly - 10
        << "\" width=\"12\" height=\"12\" fill=\"#ee854a\"/>"
        << "<text x=\"" << left + 238 << "\" y=\"" << ly << "\">augmentation classification accuracy</text>\n";
    if (has_task) {
        svg << "<rect x=\"" << left + 520 << "\" y=\"" << ly - 10
            << "\" width=\"12\" height=\"12\" fill=\"#6acc65\"/>"
            << "<text x=\"" << left + 538 << "\" y=\"" << ly << "\">task accuracy with this augmentation</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::pair<std::string, std::string> emit_report(const SafetyReport& report, const std::string& stem) {
    if (!report.metrics.complete()) {
        throw std::invalid_argument("emit_report: metrics incomplete");
    }
    const std::string json_path = stem + ".json";
    const std::string svg_path = stem + ".svg";
    {
        std::ofstream out(json_path);
        if (!out) throw std::runtime_error("emit_report: cannot write " + json_path);
        out << report_to_json(report);
    }
    {
        std::ofstream out(svg_path);
        if (!out) throw std::runtime_error("emit_report: cannot write " + svg_path);
        out << report_to_svg(report);
    }
    return {json_path, svg_path};
}

std::string safe_set_to_catalog_json(const SafeSet& safe, const AugmentationSet& catalog) {
    std::vector<AugmentationSpec> specs;
    for (const std::string& name : safe.members) {
        specs.push_back(catalog.at(catalog.index_of(name)));
    }
    nlohmann::json j = nlohmann::json::parse(catalog_to_json(AugmentationSet(std::move(specs))));
    j["provenance"] = safe.provenance;
    j["thresholds"] = {{"fp_max", safe.thresholds.fp_max},
                       {"acc_max", safe.thresholds.acc_max},
                       {"decision_threshold", safe.thresholds.decision_threshold}};
    return j.dump(2);
}

}  // namespace safeaug
