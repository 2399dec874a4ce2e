#pragma once

// Shared helpers for the actor and critic JSON protocols: strict typed
// access with stable error codes, and the text-level repair used as the
// first rung of the repair ladder.

#include "error.hpp"
#include "util.hpp"

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace flowcritic::protocol {

using nlohmann::json;

inline json parse_strict(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProtocolError(ErrorCode::MalformedJson, e.what());
    }
}

inline std::string join_path(std::string_view path, std::string_view key) {
    return path.empty() ? std::string(key) : std::string(path) + "." + std::string(key);
}

inline const json& require(const json& obj, std::string_view key, std::string_view path) {
    auto it = obj.find(std::string(key));
    if (it == obj.end()) {
        auto full = join_path(path, key);
        throw ProtocolError(ErrorCode::MissingKey, "missing required key '" + full + "'", full);
    }
    return *it;
}

inline const json& require_object(const json& obj, std::string_view key, std::string_view path) {
    const auto& v = require(obj, key, path);
    if (!v.is_object()) {
        auto full = join_path(path, key);
        throw ProtocolError(ErrorCode::TypeMismatch, "'" + full + "' must be an object", full);
    }
    return v;
}

inline std::string require_string(const json& obj, std::string_view key, std::string_view path) {
    const auto& v = require(obj, key, path);
    if (!v.is_string()) {
        auto full = join_path(path, key);
        throw ProtocolError(ErrorCode::TypeMismatch, "'" + full + "' must be a string", full);
    }
    return v.get<std::string>();
}

inline std::vector<std::string> as_string_array(const json& v, const std::string& full) {
    if (!v.is_array()) {
        throw ProtocolError(ErrorCode::TypeMismatch, "'" + full + "' must be a JSON array of strings", full);
    }
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) {
            throw ProtocolError(ErrorCode::TypeMismatch, "'" + full + "' must contain only strings", full);
        }
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline std::vector<std::string> require_string_array(const json& obj, std::string_view key, std::string_view path) {
    return as_string_array(require(obj, key, path), join_path(path, key));
}

inline bool require_bool(const json& obj, std::string_view key, std::string_view path) {
    const auto& v = require(obj, key, path);
    if (!v.is_boolean()) {
        auto full = join_path(path, key);
        throw ProtocolError(ErrorCode::TypeMismatch, "'" + full + "' must be a boolean", full);
    }
    return v.get<bool>();
}

/// Rejects keys outside `allowed`.
inline void only_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view path) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) {
            auto full = join_path(path, key);
            throw ProtocolError(ErrorCode::UnknownKey, "unexpected key '" + full + "'", full);
        }
    }
}

/// First repair rung: drop markdown fences and surrounding prose, keeping
/// the outermost JSON value. Also rewrites the `[ "Step N" : {...} ]` form
/// (a list used as a keyed record) into a JSON object.
inline std::string strip_to_json(std::string_view text) {
    std::string s(text);

    // remove ``` markers together with any language tag
    std::string unfenced;
    for (std::size_t pos = 0; pos < s.size();) {
        if (s.compare(pos, 3, "```") == 0) {
            pos += 3;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_' || s[pos] == '-')) {
                ++pos;
            }
            continue;
        }
        unfenced.push_back(s[pos++]);
    }
    s = unfenced;

    auto first = s.find_first_of("{[");
    auto last = s.find_last_of("}]");
    if (first == std::string::npos || last == std::string::npos || last < first) return trim(s);
    s = s.substr(first, last - first + 1);

    if (s.front() == '[' && s.back() == ']') {
        // `[ "Step N" : {...} ]` -> `{ "Step N" : {...} }`
        auto inner = trim(std::string_view(s).substr(1, s.size() - 2));
        if (!inner.empty() && inner.front() == '"') {
            auto close_quote = inner.find('"', 1);
            if (close_quote != std::string::npos) {
                auto after = trim(std::string_view(inner).substr(close_quote + 1));
                if (!after.empty() && after.front() == ':') s = "{" + inner + "}";
            }
        }
    }
    return s;
}

} // namespace flowcritic::protocol
