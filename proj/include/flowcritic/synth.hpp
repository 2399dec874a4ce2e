#pragma once

#include "action.hpp"
#include "screen.hpp"
#include "task.hpp"
#include "util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace flowcritic {

struct SynthOptions {
    std::uint64_t seed = 0;
    int count = 1;
    int min_length = 8;
    int max_length = 24;
    /// Target mean length; defaults to the midpoint of the range.
    std::optional<double> target_mean;
};

/// Template ids the mock template matcher knows about.
inline const std::vector<std::string>& known_templates() {
    static const std::vector<std::string> ids = {"save", "measure", "send_to_pacs", "zoom_in", "segment_brush", "export"};
    return ids;
}

namespace detail {

struct CategoryVocabulary {
    Category category;
    std::vector<std::string> buttons;
    std::vector<std::string> subtasks;
    std::string input_field;
    std::string list_panel;
    std::string viewer;
};

inline const std::vector<CategoryVocabulary>& vocabularies() {
    static const std::vector<CategoryVocabulary> v = {
        {Category::Weasis,
         {"Open", "Import DICOM", "Zoom", "Pan", "Measure", "Annotate", "Window Level", "Export", "Layout", "Reset"},
         {"Open study", "Select series", "Adjust window level", "Measure lesion", "Annotate image", "Export images"},
         "Search field", "Series list", "Image viewer"},
        {Category::Slicer3D,
         {"Load Data button", "DATA", "Segment Editor", "Volumes", "Markups", "Save", "Threshold", "Paint", "Models",
          "Welcome"},
         {"Load MRI data", "Navigate to module", "Create segmentation", "Adjust threshold", "Review volume",
          "Export results"},
         "Volume name field", "Data tree", "Slice viewer"},
        {Category::Orthanc,
         {"Upload", "Patients", "Studies", "Send to PACS", "Query/Retrieve", "Download", "Delete", "Lookup", "Modify",
          "Series"},
         {"Upload study", "Find patient", "Open study", "Inspect series", "Send to PACS", "Download archive"},
         "Patient ID field", "Study list", "Preview pane"},
        {Category::OpenEMR,
         {"Patient Finder", "New Encounter", "Orders", "Vitals", "Prescriptions", "Save", "Billing", "Calendar",
          "Messages", "Documents"},
         {"Find patient", "Open encounter", "Record vitals", "Place order", "Add prescription", "Save encounter"},
         "Patient name field", "Encounter list", "Chart viewer"},
        {Category::OpenHospital,
         {"Laboratory", "New Exam", "Patients", "Admission", "Pharmacy", "Save", "Results", "Print", "Search",
          "Wards"},
         {"Open laboratory", "Select patient", "Create exam", "Enter results", "Save exam", "Print report"},
         "Exam code field", "Exam list", "Report viewer"},
    };
    return v;
}

inline std::string padded(int value, int width) {
    auto s = std::to_string(value);
    return std::string(s.size() < static_cast<std::size_t>(width) ? static_cast<std::size_t>(width) - s.size() : 0, '0') + s;
}

inline SyntheticScreen build_screen(const CategoryVocabulary& vocab, Rng& rng, const std::string& must_have_button) {
    constexpr int kWidth = 320;
    constexpr int kHeight = 240;
    SyntheticScreen screen{kWidth, kHeight};
    screen.magnification = rng.pick(std::vector<double>{1.0, 1.0, 1.5, 2.0});

    // five distinct toolbar buttons, one of which is the labelled target
    std::vector<std::string> pool = vocab.buttons;
    std::vector<std::string> chosen;
    if (!must_have_button.empty()) {
        chosen.push_back(must_have_button);
        pool.erase(std::remove(pool.begin(), pool.end(), must_have_button), pool.end());
    }
    while (chosen.size() < 5 && !pool.empty()) {
        auto idx = static_cast<std::size_t>(rng.range(0, static_cast<int>(pool.size()) - 1));
        chosen.push_back(pool[idx]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    // shuffle toolbar order (Fisher-Yates, portable draws)
    for (std::size_t i = chosen.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(rng.range(0, static_cast<int>(i) - 1));
        std::swap(chosen[i - 1], chosen[j]);
    }
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        BoundingBox box{4 + 62 * static_cast<int>(i), 4, 58, 20};
        screen.widgets.push_back({chosen[i], box, WidgetClass::Button, std::nullopt});
        screen.texts.push_back({chosen[i], BoundingBox{box.x + 2, box.y + 4, box.w - 4, 12}});
    }

    screen.widgets.push_back({vocab.input_field, BoundingBox{4, 30, 150, 18}, WidgetClass::Input, std::nullopt});
    screen.widgets.push_back({vocab.list_panel, BoundingBox{4, 54, 100, 150}, WidgetClass::List, std::nullopt});
    screen.widgets.push_back({vocab.viewer, BoundingBox{110, 54, 206, 150}, WidgetClass::Viewer, std::nullopt});

    const auto& templates = known_templates();
    auto first = static_cast<std::size_t>(rng.range(0, static_cast<int>(templates.size()) - 1));
    auto second = (first + 1 + static_cast<std::size_t>(rng.range(0, static_cast<int>(templates.size()) - 2))) % templates.size();
    screen.widgets.push_back({templates[first] + " icon", BoundingBox{262, 30, 18, 18}, WidgetClass::Icon, templates[first]});
    screen.widgets.push_back({templates[second] + " icon", BoundingBox{284, 30, 18, 18}, WidgetClass::Icon, templates[second]});

    screen.texts.push_back({std::string(to_string(vocab.category)), BoundingBox{160, 32, 90, 14}});
    screen.texts.push_back({"Study " + std::to_string(rng.range(1000, 9999)), BoundingBox{4, 210, 120, 14}});
    screen.texts.push_back({"Zoom " + format_fixed(screen.magnification * 100.0, 0) + "%", BoundingBox{240, 210, 76, 14}});
    return screen;
}

} // namespace detail

/// Deterministic synthetic suite. Every task's labels are realizable on its
/// own screens: CLICK targets are toolbar buttons on that step's screen, TEXT
/// goes to the input field, SCROLL to the list panel, ZOOM/SEGMENT to the
/// viewer. Tasks with T >= 6 use all six kinds; the last label is COMPLETE.
inline std::vector<Task> generate_synthetic_suite(const SynthOptions& opt) {
    if (opt.count < 1) throw Error(ErrorCode::InvalidRange, "count must be >= 1");
    if (opt.min_length < 2 || opt.min_length > opt.max_length) {
        throw Error(ErrorCode::InvalidRange, "length range must satisfy 2 <= min <= max");
    }
    double p = 0.5;
    if (opt.target_mean && opt.max_length > opt.min_length) {
        p = (*opt.target_mean - opt.min_length) / static_cast<double>(opt.max_length - opt.min_length);
        if (p < 0.0 || p > 1.0) throw Error(ErrorCode::InvalidRange, "target mean outside length range");
    }

    const auto& vocabs = detail::vocabularies();
    std::vector<Task> suite;
    suite.reserve(static_cast<std::size_t>(opt.count));

    for (int i = 0; i < opt.count; ++i) {
        auto rng = Rng::derive(opt.seed, "task", i);
        const auto& vocab = vocabs[static_cast<std::size_t>(i) % vocabs.size()];

        int length = opt.min_length;
        for (int k = 0; k < opt.max_length - opt.min_length; ++k) length += rng.bernoulli(p) ? 1 : 0;

        Task task;
        task.id = "syn" + detail::padded(i + 1, 4);
        task.category = vocab.category;
        task.split = vocab.category == Category::OpenHospital ? Split::Ood
                     : rng.bernoulli(0.7)                     ? Split::Train
                                                              : Split::Test;

        // goal: category prefix + ordered subtasks
        int n_sub = std::clamp((length - 1) / 3, 1, static_cast<int>(vocab.subtasks.size()));
        std::string goal = std::string(to_string(vocab.category)) + ": ";
        for (int s = 0; s < n_sub; ++s) goal += (s ? "; " : "") + vocab.subtasks[static_cast<std::size_t>(s)];
        task.goal = goal;

        // kinds for the non-final steps; cover all five non-final kinds when room allows
        const std::vector<ActionKind> body_kinds = {ActionKind::Click, ActionKind::Scroll, ActionKind::Zoom,
                                                    ActionKind::Text, ActionKind::Segment};
        const std::vector<ActionKind> weighted = {ActionKind::Click, ActionKind::Click, ActionKind::Click,
                                                  ActionKind::Scroll, ActionKind::Zoom, ActionKind::Text,
                                                  ActionKind::Segment};
        std::vector<ActionKind> kinds(static_cast<std::size_t>(length - 1));
        for (auto& k : kinds) k = rng.pick(weighted);
        if (kinds.size() >= body_kinds.size()) {
            std::vector<std::size_t> slots(kinds.size());
            for (std::size_t s = 0; s < slots.size(); ++s) slots[s] = s;
            for (std::size_t s = slots.size(); s > 1; --s) {
                std::swap(slots[s - 1], slots[static_cast<std::size_t>(rng.range(0, static_cast<int>(s) - 1))]);
            }
            for (std::size_t b = 0; b < body_kinds.size(); ++b) kinds[slots[b]] = body_kinds[b];
        }

        for (int t = 1; t <= length; ++t) {
            Action label{ActionKind::Complete};
            std::string button;
            if (t < length) {
                label.kind = kinds[static_cast<std::size_t>(t - 1)];
                if (label.kind == ActionKind::Click) button = rng.pick(vocab.buttons);
            }
            Step step;
            step.index = t;
            step.synthetic = detail::build_screen(vocab, rng, button);
            const auto& screen = *step.synthetic;
            const auto* viewer = screen.find_widget(vocab.viewer);

            switch (label.kind) {
            case ActionKind::Click: label.target = button; break;
            case ActionKind::Text:
                label.target = vocab.input_field;
                label.text = "ID-" + std::to_string(rng.range(10000, 99999));
                break;
            case ActionKind::Scroll: {
                int units = rng.range(1, 5);
                label.scroll_units = rng.bernoulli(0.5) ? units : -units;
                label.target = vocab.list_panel;
                break;
            }
            case ActionKind::Zoom: label.target = vocab.viewer; break;
            case ActionKind::Segment: {
                label.target = vocab.viewer;
                int w = rng.range(16, 60);
                int h = rng.range(16, 60);
                label.region = BoundingBox{viewer->box.x + rng.range(0, viewer->box.w - w),
                                           viewer->box.y + rng.range(0, viewer->box.h - h), w, h};
                break;
            }
            case ActionKind::Complete: break;
            }
            step.label = label;
            step.raw_label = render_action(label);
            task.steps.push_back(std::move(step));
        }
        suite.push_back(std::move(task));
    }
    return suite;
}

} // namespace flowcritic
