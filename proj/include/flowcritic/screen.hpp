#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "image.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace flowcritic {

enum class WidgetClass { Button, Icon, Input, List, Viewer, Menu };

inline std::string_view to_string(WidgetClass c) {
    switch (c) {
    case WidgetClass::Button: return "button";
    case WidgetClass::Icon: return "icon";
    case WidgetClass::Input: return "input";
    case WidgetClass::List: return "list";
    case WidgetClass::Viewer: return "viewer";
    case WidgetClass::Menu: return "menu";
    }
    return "?";
}

inline WidgetClass parse_widget_class(std::string_view s) {
    for (auto c : {WidgetClass::Button, WidgetClass::Icon, WidgetClass::Input, WidgetClass::List,
                   WidgetClass::Viewer, WidgetClass::Menu}) {
        if (s == to_string(c)) return c;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown widget class '" + std::string(s) + "'");
}

struct Widget {
    std::string label;
    BoundingBox box;
    WidgetClass kind = WidgetClass::Button;
    /// Template id of the icon drawn on this widget, if any.
    std::optional<std::string> icon;

    friend bool operator==(const Widget&, const Widget&) = default;
};

struct ScreenText {
    std::string content;
    BoundingBox box;

    friend bool operator==(const ScreenText&, const ScreenText&) = default;
};

/// Structured description of a screen; the mock perception backend reads
/// this directly instead of pixels.
struct SyntheticScreen {
    int width = 0;
    int height = 0;
    std::vector<Widget> widgets;
    std::vector<ScreenText> texts;
    double magnification = 1.0;

    friend bool operator==(const SyntheticScreen&, const SyntheticScreen&) = default;

    const Widget* find_widget(std::string_view label) const {
        for (const auto& w : widgets) {
            if (w.label == label) return &w;
        }
        return nullptr;
    }
};

/// Returns a list of invariant violations (empty when the screen is sound).
inline std::vector<std::string> check_screen(const SyntheticScreen& s) {
    std::vector<std::string> problems;
    if (s.width <= 0 || s.height <= 0) problems.push_back("screen has no extent");
    if (!(s.magnification > 0.0)) problems.push_back("magnification must be positive");
    std::set<std::string> labels;
    for (const auto& w : s.widgets) {
        if (!w.box.within(s.width, s.height)) problems.push_back("widget '" + w.label + "' out of bounds");
        if (!labels.insert(w.label).second) problems.push_back("duplicate widget label '" + w.label + "'");
    }
    for (const auto& t : s.texts) {
        if (!t.box.within(s.width, s.height)) problems.push_back("text '" + t.content + "' out of bounds");
        if (t.content.empty()) problems.push_back("empty text item");
    }
    return problems;
}

/// Short content-free description (counts only) used for observations.
inline std::string summarize_screen(const SyntheticScreen& s) {
    return std::to_string(s.widgets.size()) + " widgets, " + std::to_string(s.texts.size()) + " text items, zoom " +
           format_fixed(s.magnification, 2);
}

/// Deterministic rasterization: flat widget fills, dark bars where text sits.
inline Image render_screen(const SyntheticScreen& s) {
    Image img(s.width, s.height, Rgb{236, 236, 236});
    for (const auto& w : s.widgets) {
        Rgb fill{};
        switch (w.kind) {
        case WidgetClass::Button: fill = {70, 110, 180}; break;
        case WidgetClass::Icon: fill = {200, 140, 40}; break;
        case WidgetClass::Input: fill = {255, 255, 255}; break;
        case WidgetClass::List: fill = {210, 220, 230}; break;
        case WidgetClass::Viewer: fill = {20, 20, 20}; break;
        case WidgetClass::Menu: fill = {160, 160, 170}; break;
        }
        // label hash tints the fill so distinct widgets never look identical
        auto h = fnv1a(w.label);
        fill.r = static_cast<std::uint8_t>((fill.r + (h & 0x0f)) & 0xff);
        fill.g = static_cast<std::uint8_t>((fill.g + ((h >> 4) & 0x0f)) & 0xff);
        img.fill_rect(w.box, fill);
    }
    for (const auto& t : s.texts) {
        BoundingBox bar{t.box.x, t.box.y + t.box.h / 3, t.box.w, std::max(1, t.box.h / 3)};
        img.fill_rect(bar, Rgb{30, 30, 30});
    }
    return img;
}

inline void to_json(nlohmann::json& j, const Widget& w) {
    j = {{"label", w.label}, {"box", w.box}, {"kind", std::string(to_string(w.kind))}};
    if (w.icon) j["icon"] = *w.icon;
}

inline void from_json(const nlohmann::json& j, Widget& w) {
    w.label = j.at("label").get<std::string>();
    w.box = j.at("box").get<BoundingBox>();
    w.kind = parse_widget_class(j.at("kind").get<std::string>());
    w.icon = j.contains("icon") ? std::optional<std::string>(j["icon"].get<std::string>()) : std::nullopt;
}

inline void to_json(nlohmann::json& j, const ScreenText& t) { j = {{"content", t.content}, {"box", t.box}}; }

inline void from_json(const nlohmann::json& j, ScreenText& t) {
    t.content = j.at("content").get<std::string>();
    t.box = j.at("box").get<BoundingBox>();
}

inline void to_json(nlohmann::json& j, const SyntheticScreen& s) {
    j = {{"width", s.width},     {"height", s.height},           {"widgets", s.widgets},
         {"texts", s.texts},     {"magnification", s.magnification}};
}

inline void from_json(const nlohmann::json& j, SyntheticScreen& s) {
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.widgets = j.at("widgets").get<std::vector<Widget>>();
    s.texts = j.at("texts").get<std::vector<ScreenText>>();
    s.magnification = j.value("magnification", 1.0);
}

} // namespace flowcritic
