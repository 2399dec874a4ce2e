#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "util.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowcritic {

/// The closed semantic action vocabulary.
enum class ActionKind { Click, Scroll, Zoom, Text, Segment, Complete };

inline constexpr std::array<ActionKind, 6> kAllActionKinds = {
    ActionKind::Click, ActionKind::Scroll, ActionKind::Zoom,
    ActionKind::Text,  ActionKind::Segment, ActionKind::Complete,
};

inline std::string_view to_string(ActionKind kind) {
    switch (kind) {
    case ActionKind::Click: return "CLICK";
    case ActionKind::Scroll: return "SCROLL";
    case ActionKind::Zoom: return "ZOOM";
    case ActionKind::Text: return "TEXT";
    case ActionKind::Segment: return "SEGMENT";
    case ActionKind::Complete: return "COMPLETE";
    }
    return "?";
}

inline std::optional<ActionKind> try_parse_action_kind(std::string_view token) {
    auto upper = to_upper(trim(token));
    for (auto kind : kAllActionKinds) {
        if (upper == to_string(kind)) return kind;
    }
    return std::nullopt;
}

inline ActionKind parse_action_kind(std::string_view token) {
    if (auto kind = try_parse_action_kind(token)) return *kind;
    throw Error(ErrorCode::UnknownActionKind, "unknown action kind '" + trim(token) + "'");
}

/// A semantic action with its optional arguments.
///
/// Which arguments a kind accepts:
///   CLICK    target, coords
///   SCROLL   scroll_units (required), target, coords
///   ZOOM     target, coords, region
///   TEXT     text (required), target, coords
///   SEGMENT  target, coords, region
///   COMPLETE nothing
struct Action {
    ActionKind kind = ActionKind::Click;
    std::optional<std::string> target;
    std::optional<Point> coords;
    std::optional<int> scroll_units;
    std::optional<std::string> text;
    std::optional<BoundingBox> region;

    friend bool operator==(const Action&, const Action&) = default;

    static Action complete() { return Action{ActionKind::Complete}; }

    static Action click(std::string target) {
        Action a{ActionKind::Click};
        a.target = std::move(target);
        return a;
    }

    static Action scroll(int units, std::optional<std::string> target = {}) {
        Action a{ActionKind::Scroll};
        a.scroll_units = units;
        a.target = std::move(target);
        return a;
    }

    static Action type_text(std::string text, std::optional<std::string> target = {}) {
        Action a{ActionKind::Text};
        a.text = std::move(text);
        a.target = std::move(target);
        return a;
    }
};

namespace detail {

struct KindArguments {
    bool target = false;
    bool coords = false;
    bool scroll_units = false;
    bool text = false;
    bool region = false;
};

inline KindArguments allowed_arguments(ActionKind kind) {
    switch (kind) {
    case ActionKind::Click: return {true, true, false, false, false};
    case ActionKind::Scroll: return {true, true, true, false, false};
    case ActionKind::Zoom: return {true, true, false, false, true};
    case ActionKind::Text: return {true, true, false, true, false};
    case ActionKind::Segment: return {true, true, false, false, true};
    case ActionKind::Complete: return {};
    }
    return {};
}

} // namespace detail

/// Throws MissingArgument / InvalidArgument when the action breaks its kind's rules.
inline void validate_action(const Action& a) {
    auto allowed = detail::allowed_arguments(a.kind);
    auto kind = std::string(to_string(a.kind));
    auto reject = [&](const char* name) {
        throw Error(ErrorCode::InvalidArgument, std::string("argument '") + name + "' not applicable to " + kind);
    };
    if (a.target && !allowed.target) reject("target");
    if (a.coords && !allowed.coords) reject("coords");
    if (a.scroll_units && !allowed.scroll_units) reject("scroll_units");
    if (a.text && !allowed.text) reject("text");
    if (a.region && !allowed.region) reject("region");

    if (a.kind == ActionKind::Text && !a.text) {
        throw Error(ErrorCode::MissingArgument, "TEXT requires 'text'");
    }
    if (a.kind == ActionKind::Scroll && !a.scroll_units) {
        throw Error(ErrorCode::MissingArgument, "SCROLL requires 'scroll_units'");
    }
    if (a.target && trim(*a.target).empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty target");
    }
    if (a.region && (a.region->w <= 0 || a.region->h <= 0)) {
        throw Error(ErrorCode::InvalidArgument, "region must have positive extent");
    }
}

namespace detail {

inline std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace detail

/// Canonical label form: KIND or KIND(key=value, ...) with keys in the fixed
/// order target, coords, scroll_units, text, region and strings quoted.
inline std::string render_action(const Action& a) {
    std::vector<std::string> args;
    if (a.target) args.push_back("target=" + detail::quote(*a.target));
    if (a.coords) args.push_back("coords=[" + std::to_string(a.coords->x) + "," + std::to_string(a.coords->y) + "]");
    if (a.scroll_units) args.push_back("scroll_units=" + std::to_string(*a.scroll_units));
    if (a.text) args.push_back("text=" + detail::quote(*a.text));
    if (a.region) {
        const auto& r = *a.region;
        args.push_back("region=[" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                       std::to_string(r.w) + "," + std::to_string(r.h) + "]");
    }
    std::string out(to_string(a.kind));
    if (args.empty()) return out;
    out += "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += args[i];
    }
    out += ")";
    return out;
}

inline std::ostream& operator<<(std::ostream& os, const Action& a) { return os << render_action(a); }

namespace detail {

class ActionLexer {
public:
    explicit ActionLexer(std::string_view src) : src_(src) {}

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool done() const { return pos_ >= src_.size(); }
    char peek() const { return done() ? '\0' : src_[pos_]; }

    bool consume(char c) {
        skip_ws();
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string identifier() {
        skip_ws();
        auto start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        return std::string(src_.substr(start, pos_ - start));
    }

    std::string quoted() {
        // opening quote already peeked
        ++pos_;
        std::string out;
        while (pos_ < src_.size()) {
            char c = src_[pos_++];
            if (c == '\\' && pos_ < src_.size()) {
                out.push_back(src_[pos_++]);
            } else if (c == '"') {
                return out;
            } else {
                out.push_back(c);
            }
        }
        fail("unterminated string");
    }

    std::vector<int> int_list() {
        // opening bracket already peeked
        ++pos_;
        std::vector<int> values;
        while (true) {
            skip_ws();
            if (peek() == ']') {
                ++pos_;
                return values;
            }
            if (!values.empty() && !consume(',')) fail("expected ',' in list");
            values.push_back(integer());
        }
    }

    int integer() {
        skip_ws();
        auto start = pos_;
        if (peek() == '-' || peek() == '+') ++pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        auto token = src_.substr(start, pos_ - start);
        if (!token.empty() && token.front() == '+') token.remove_prefix(1);
        int value = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
            fail("expected integer");
        }
        return value;
    }

    /// Bare value: everything up to the next ',' or ')' at nesting depth 0.
    std::string bare() {
        skip_ws();
        auto start = pos_;
        while (pos_ < src_.size() && src_[pos_] != ',' && src_[pos_] != ')') ++pos_;
        return trim(src_.substr(start, pos_ - start));
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::MalformedAction, what + " at offset " + std::to_string(pos_));
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

inline std::string canonical_key(std::string key) {
    key = to_lower(key);
    if (key == "n" || key == "units" || key == "scroll") return "scroll_units";
    if (key == "s" || key == "text_to_type" || key == "value") return "text";
    if (key == "coord" || key == "xy") return "coords";
    if (key == "roi") return "region";
    return key;
}

} // namespace detail

/// Parses KIND or KIND(key=value, ...). Kinds are case-insensitive; string
/// values may be quoted ("...") or bare; coords and region take [..] lists.
inline Action parse_action(std::string_view raw) {
    auto text = trim(raw);
    if (text.empty()) throw Error(ErrorCode::MalformedAction, "empty action");

    detail::ActionLexer lex(text);
    auto kind_token = lex.identifier();
    if (kind_token.empty()) lex.fail("expected action kind");
    Action action{parse_action_kind(kind_token)};

    if (lex.consume('(')) {
        std::vector<std::string> seen;
        lex.skip_ws();
        if (!lex.consume(')')) {
            while (true) {
                auto key = detail::canonical_key(lex.identifier());
                if (key.empty()) lex.fail("expected argument name");
                if (std::find(seen.begin(), seen.end(), key) != seen.end()) lex.fail("duplicate argument '" + key + "'");
                seen.push_back(key);
                if (!lex.consume('=')) lex.fail("expected '=' after " + key);
                lex.skip_ws();

                if (key == "target" || key == "text") {
                    std::string value = lex.peek() == '"' ? lex.quoted() : lex.bare();
                    if (value.empty()) {
                        throw Error(ErrorCode::MissingArgument, "empty value for '" + key + "'");
                    }
                    (key == "target" ? action.target : action.text) = std::move(value);
                } else if (key == "scroll_units") {
                    action.scroll_units = lex.integer();
                } else if (key == "coords") {
                    if (lex.peek() != '[') lex.fail("coords must be [x, y]");
                    auto v = lex.int_list();
                    if (v.size() != 2) lex.fail("coords must have 2 values");
                    action.coords = Point{v[0], v[1]};
                } else if (key == "region") {
                    if (lex.peek() != '[') lex.fail("region must be [x, y, w, h]");
                    auto v = lex.int_list();
                    if (v.size() != 4) lex.fail("region must have 4 values");
                    action.region = BoundingBox{v[0], v[1], v[2], v[3]};
                } else {
                    throw Error(ErrorCode::InvalidArgument, "unknown argument '" + key + "'");
                }

                if (lex.consume(')')) break;
                if (!lex.consume(',')) lex.fail("expected ',' or ')'");
            }
        }
    }
    lex.skip_ws();
    if (!lex.done()) lex.fail("trailing characters");

    validate_action(action);
    return action;
}

// ---------------------------------------------------------------------------
// JSON form used by task.json and run records:
//   {kind, target?, coords?, scroll_units?, text?, region?}

inline void to_json(nlohmann::json& j, const Action& a) {
    j = nlohmann::json::object();
    j["kind"] = std::string(to_string(a.kind));
    if (a.target) j["target"] = *a.target;
    if (a.coords) j["coords"] = *a.coords;
    if (a.scroll_units) j["scroll_units"] = *a.scroll_units;
    if (a.text) j["text"] = *a.text;
    if (a.region) j["region"] = *a.region;
}

inline void from_json(const nlohmann::json& j, Action& a) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedAction, "action must be an object");
    for (const auto& [key, _] : j.items()) {
        if (key != "kind" && key != "target" && key != "coords" && key != "scroll_units" &&
            key != "text" && key != "region") {
            throw Error(ErrorCode::InvalidArgument, "unknown action field '" + key + "'");
        }
    }
    if (!j.contains("kind") || !j["kind"].is_string()) {
        throw Error(ErrorCode::MalformedAction, "action.kind missing");
    }
    Action out{parse_action_kind(j["kind"].get<std::string>())};
    try {
        if (j.contains("target")) out.target = j["target"].get<std::string>();
        if (j.contains("coords")) out.coords = j["coords"].get<Point>();
        if (j.contains("scroll_units")) out.scroll_units = j["scroll_units"].get<int>();
        if (j.contains("text")) out.text = j["text"].get<std::string>();
        if (j.contains("region")) out.region = j["region"].get<BoundingBox>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedAction, e.what());
    }
    validate_action(out);
    a = std::move(out);
}

} // namespace flowcritic
