#pragma once

#include "action.hpp"
#include "util.hpp"

#include <optional>
#include <string>

namespace flowcritic {

enum class MatchMode { KindOnly, CanonicalFull };

inline std::string_view to_string(MatchMode m) { return m == MatchMode::KindOnly ? "kind_only" : "canonical_full"; }

inline MatchMode parse_match_mode(std::string_view s) {
    if (s == "kind_only") return MatchMode::KindOnly;
    if (s == "canonical_full") return MatchMode::CanonicalFull;
    throw Error(ErrorCode::Usage, "match mode must be kind_only or canonical_full, got '" + std::string(s) + "'");
}

/// Semantic projection compared under canonical_full: kind, case-folded and
/// whitespace-collapsed target and text, and scroll units. Pixel arguments
/// (coords, region) are interface-specific and not compared.
struct NormalizedAction {
    ActionKind kind;
    std::optional<std::string> target;
    std::optional<std::string> text;
    std::optional<int> scroll_units;

    friend bool operator==(const NormalizedAction&, const NormalizedAction&) = default;
};

inline NormalizedAction normalize(const Action& a) {
    NormalizedAction n{a.kind, std::nullopt, std::nullopt, a.scroll_units};
    if (a.target) n.target = normalize_text(*a.target);
    if (a.text) n.text = normalize_text(*a.text);
    return n;
}

inline bool step_correct(const Action& predicted, const Action& label, MatchMode mode) {
    if (mode == MatchMode::KindOnly) return predicted.kind == label.kind;
    return normalize(predicted) == normalize(label);
}

} // namespace flowcritic
