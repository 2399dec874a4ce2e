#pragma once

#include "action.hpp"
#include "error.hpp"
#include "image.hpp"
#include "screen.hpp"
#include "util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace flowcritic {

enum class Category { Weasis, Slicer3D, Orthanc, OpenEMR, OpenHospital, Synthetic };
enum class Split { Train, Test, Ood };

inline constexpr std::array<Category, 6> kAllCategories = {
    Category::Weasis, Category::Slicer3D, Category::Orthanc,
    Category::OpenEMR, Category::OpenHospital, Category::Synthetic,
};

inline std::string_view to_string(Category c) {
    switch (c) {
    case Category::Weasis: return "Weasis";
    case Category::Slicer3D: return "3D Slicer";
    case Category::Orthanc: return "Orthanc";
    case Category::OpenEMR: return "OpenEMR";
    case Category::OpenHospital: return "OpenHospital";
    case Category::Synthetic: return "synthetic";
    }
    return "?";
}

inline Category parse_category(std::string_view s) {
    for (auto c : kAllCategories) {
        if (s == to_string(c)) return c;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown category '" + std::string(s) + "'");
}

inline std::string_view to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Ood: return "ood";
    }
    return "?";
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    if (s == "ood") return Split::Ood;
    throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(s) + "'");
}

struct Step {
    int index = 0;             // 1-based
    fs::path screenshot;       // empty for in-memory synthetic steps
    Action label;
    std::string raw_label;
    /// Non-empty when the stored label could not be parsed; `label` is then
    /// a COMPLETE placeholder and validation reports the step.
    std::string label_error;
    std::optional<SyntheticScreen> synthetic;
};

struct Task {
    std::string id;
    std::string goal;
    Category category = Category::Synthetic;
    Split split = Split::Train;
    std::vector<Step> steps;

    int length() const { return static_cast<int>(steps.size()); }
};

struct LengthBounds {
    int low = 8;
    int high = 24;
};

struct Violation {
    std::string code;
    std::string message;
    std::optional<int> step;
};

struct ValidationReport {
    std::string task_id;
    bool passed = true;
    std::vector<Violation> violations;

    void add(std::string code, std::string message, std::optional<int> step = {}) {
        violations.push_back({std::move(code), std::move(message), step});
        passed = false;
    }

    bool has(std::string_view code) const {
        return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
    }
};

/// True when the step's screenshot can be produced: an existing file, or an
/// in-memory synthetic screen when no file is referenced.
inline bool image_resolves(const Step& step) {
    if (!step.screenshot.empty()) return fs::is_regular_file(step.screenshot);
    return step.synthetic.has_value();
}

inline Image load_step_image(const Step& step) {
    if (!step.screenshot.empty()) {
        if (!fs::is_regular_file(step.screenshot)) {
            throw Error(ErrorCode::UnresolvableImage,
                        "step " + std::to_string(step.index) + " image " + step.screenshot.string() + " not found");
        }
        return load_png(step.screenshot);
    }
    if (step.synthetic) return render_screen(*step.synthetic);
    throw Error(ErrorCode::UnresolvableImage, "step " + std::to_string(step.index) + " has no image");
}

/// Checks index order, length bounds, COMPLETE placement, and label parsing.
/// Violations are data; this never throws.
inline ValidationReport validate_trajectory(const Task& task, LengthBounds bounds = {}) {
    ValidationReport report{task.id};
    const int n = task.length();

    for (int i = 0; i < n; ++i) {
        if (task.steps[static_cast<std::size_t>(i)].index != i + 1) {
            report.add("index-not-monotone",
                       "step at position " + std::to_string(i + 1) + " has index " +
                           std::to_string(task.steps[static_cast<std::size_t>(i)].index),
                       i + 1);
        }
    }
    if (n < bounds.low) {
        report.add("length-below-min", "T=" + std::to_string(n) + " < " + std::to_string(bounds.low));
    }
    if (n > bounds.high) {
        report.add("length-above-max", "T=" + std::to_string(n) + " > " + std::to_string(bounds.high));
    }

    for (const auto& step : task.steps) {
        if (!step.label_error.empty()) {
            report.add("label-unparseable", step.label_error, step.index);
            continue;
        }
        if (!step.raw_label.empty()) {
            try {
                if (!(parse_action(step.raw_label) == step.label)) {
                    report.add("label-mismatch", "raw label disagrees with structured action", step.index);
                }
            } catch (const Error& e) {
                report.add("label-unparseable", e.what(), step.index);
            }
        }
    }

    for (int i = 0; i < n; ++i) {
        const auto& step = task.steps[static_cast<std::size_t>(i)];
        if (step.label_error.empty() && step.label.kind == ActionKind::Complete && i + 1 < n) {
            report.add("premature-complete", "COMPLETE before the final step", step.index);
        }
    }
    if (n > 0) {
        const auto& last = task.steps.back();
        if (!last.label_error.empty() || last.label.kind != ActionKind::Complete) {
            report.add("missing-final-complete", "final step is not COMPLETE", last.index);
        }
    } else {
        report.add("empty-trajectory", "task has no steps");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Task bundles: <dir>/task.json (+ optional screens.json) and PNG images.

inline constexpr const char* kTaskManifest = "task.json";
inline constexpr const char* kScreensFile = "screens.json";

inline Task load_task_bundle(const fs::path& dir) {
    auto manifest_path = dir / kTaskManifest;
    if (!fs::is_regular_file(manifest_path)) {
        throw Error(ErrorCode::MissingManifest, "no " + std::string(kTaskManifest) + " in " + dir.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedJson, manifest_path.string() + ": " + e.what());
    }

    std::vector<nlohmann::json> screens;
    if (fs::is_regular_file(dir / kScreensFile)) {
        screens = nlohmann::json::parse(read_file(dir / kScreensFile)).get<std::vector<nlohmann::json>>();
    }

    Task task;
    try {
        task.id = doc.at("id").get<std::string>();
        task.goal = doc.at("goal").get<std::string>();
        task.category = parse_category(doc.at("category").get<std::string>());
        task.split = parse_split(doc.at("split").get<std::string>());
        for (const auto& s : doc.at("steps")) {
            Step step;
            step.index = s.at("t").get<int>();
            step.screenshot = dir / s.at("image").get<std::string>();
            step.raw_label = s.value("raw", std::string{});
            try {
                step.label = s.at("action").get<Action>();
            } catch (const Error& e) {
                step.label = Action::complete();
                step.label_error = e.what();
            }
            task.steps.push_back(std::move(step));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedJson, manifest_path.string() + ": " + e.what());
    }

    std::sort(task.steps.begin(), task.steps.end(), [](const Step& a, const Step& b) { return a.index < b.index; });
    for (std::size_t i = 0; i < task.steps.size(); ++i) {
        int expected = static_cast<int>(i) + 1;
        int got = task.steps[i].index;
        if (got != expected) {
            std::string what = (i > 0 && task.steps[i - 1].index == got) ? "duplicate step index " : "index gap at step ";
            throw Error(ErrorCode::IndexGap, what + std::to_string(got == expected - 1 ? got : expected) + " in " + task.id);
        }
    }
    for (auto& step : task.steps) {
        if (!fs::is_regular_file(step.screenshot)) {
            throw Error(ErrorCode::UnresolvableImage, "step " + std::to_string(step.index) + " image " +
                                                          step.screenshot.filename().string() + " not found in " +
                                                          task.id);
        }
        auto pos = static_cast<std::size_t>(step.index - 1);
        if (pos < screens.size() && !screens[pos].is_null()) step.synthetic = screens[pos].get<SyntheticScreen>();
    }
    return task;
}

inline std::string image_name(int index) {
    std::string n = std::to_string(index);
    return "images/step_" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n + ".png";
}

/// Writes task.json, screens.json (when synthetic screens exist), and PNGs.
/// Steps without a file on disk are rendered from their synthetic screen.
inline void write_task_bundle(const Task& task, const fs::path& dir) {
    nlohmann::json doc = {
        {"id", task.id},
        {"goal", task.goal},
        {"category", std::string(to_string(task.category))},
        {"split", std::string(to_string(task.split))},
    };
    auto steps = nlohmann::json::array();
    auto screens = nlohmann::json::array();
    bool any_screen = false;
    for (const auto& step : task.steps) {
        auto name = image_name(step.index);
        steps.push_back({{"t", step.index},
                         {"image", name},
                         {"action", step.label},
                         {"raw", step.raw_label.empty() ? render_action(step.label) : step.raw_label}});
        if (step.synthetic) {
            screens.push_back(*step.synthetic);
            any_screen = true;
        } else {
            screens.push_back(nullptr);
        }
        if (!step.screenshot.empty() && fs::is_regular_file(step.screenshot)) {
            fs::create_directories((dir / name).parent_path());
            fs::copy_file(step.screenshot, dir / name, fs::copy_options::overwrite_existing);
        } else {
            save_png(load_step_image(step), dir / name);
        }
    }
    doc["steps"] = std::move(steps);
    write_file(dir / kTaskManifest, doc.dump(2) + "\n");
    if (any_screen) write_file(dir / kScreensFile, screens.dump(2) + "\n");
}

/// One suite member: either a loaded task or the reason it failed to load.
struct SuiteEntry {
    std::string id;
    std::optional<Task> task;
    std::string load_error;
};

/// A suite is a directory of bundles, or a single bundle directory.
inline std::vector<SuiteEntry> load_suite(const fs::path& dir) {
    std::vector<SuiteEntry> entries;
    if (fs::is_regular_file(dir / kTaskManifest)) {
        entries.push_back({dir.filename().string(), load_task_bundle(dir), {}});
        return entries;
    }
    if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingManifest, "suite directory " + dir.string() + " not found");
    std::vector<fs::path> bundles;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) bundles.push_back(e.path());
    }
    std::sort(bundles.begin(), bundles.end());
    for (const auto& b : bundles) {
        SuiteEntry entry{b.filename().string(), std::nullopt, {}};
        try {
            entry.task = load_task_bundle(b);
            entry.id = entry.task->id;
        } catch (const Error& e) {
            entry.load_error = e.what();
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

} // namespace flowcritic
