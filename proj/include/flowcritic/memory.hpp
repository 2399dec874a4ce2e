#pragma once

#include "action.hpp"
#include "error.hpp"
#include "grounding.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace flowcritic {

inline constexpr const char* kNone = "NONE";

/// Projection of the immediately previous step only.
struct ShortTermMemory {
    std::string last_action = kNone;
    std::string last_observation = kNone;
    std::string last_lesson = kNone;
    std::optional<double> last_feedback;

    friend bool operator==(const ShortTermMemory&, const ShortTermMemory&) = default;
};

struct KeyState {
    int step = 0;
    std::string summary;

    friend bool operator==(const KeyState&, const KeyState&) = default;
};

struct LongTermMemory {
    std::string overall_progress;
    std::vector<std::string> completed_subtasks;
    std::vector<std::string> remaining_subtasks;
    std::vector<std::string> known_pitfalls;
    std::vector<KeyState> key_states;

    friend bool operator==(const LongTermMemory&, const LongTermMemory&) = default;
};

struct MemoryCapacity {
    std::size_t key_states = 16;
    std::size_t known_pitfalls = 8;
};

/// Critic feedback on the previous step: the scalar score and its text.
struct Feedback {
    double score = 0.0;
    std::string critique;
};

// ---------------------------------------------------------------------------
// Set-like helpers that keep completed and remaining disjoint.

inline bool contains(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

inline void mark_completed(LongTermMemory& ltm, const std::string& subtask) {
    std::erase(ltm.remaining_subtasks, subtask);
    if (!contains(ltm.completed_subtasks, subtask)) ltm.completed_subtasks.push_back(subtask);
}

inline void mark_remaining(LongTermMemory& ltm, const std::string& subtask) {
    if (contains(ltm.completed_subtasks, subtask) || contains(ltm.remaining_subtasks, subtask)) return;
    ltm.remaining_subtasks.push_back(subtask);
}

/// Most-recent-last; re-adding an existing pitfall moves it to the end.
inline void add_pitfall(LongTermMemory& ltm, const std::string& pitfall, const MemoryCapacity& cap = {}) {
    std::erase(ltm.known_pitfalls, pitfall);
    ltm.known_pitfalls.push_back(pitfall);
    while (ltm.known_pitfalls.size() > cap.known_pitfalls) ltm.known_pitfalls.erase(ltm.known_pitfalls.begin());
}

// ---------------------------------------------------------------------------

/// Short-term update from the previous step's screenshot summary, action and
/// feedback. All three are absent on step 1; mixing presence is an error.
inline ShortTermMemory stm_update(const std::optional<std::string>& prev_screenshot,
                                  const std::optional<Action>& prev_action,
                                  const std::optional<Feedback>& prev_feedback) {
    int present = int(prev_screenshot.has_value()) + int(prev_action.has_value()) + int(prev_feedback.has_value());
    if (present == 0) return ShortTermMemory{};
    if (present != 3) {
        throw Error(ErrorCode::InvalidArgument, "previous screenshot, action and feedback must be given together");
    }
    ShortTermMemory stm;
    stm.last_action = render_action(*prev_action);
    stm.last_observation = prev_screenshot->empty() ? std::string(kNone) : *prev_screenshot;
    stm.last_lesson = prev_feedback->critique.empty() ? std::string(kNone) : prev_feedback->critique;
    stm.last_feedback = prev_feedback->score;
    return stm;
}

/// Long-term update for step `step`: records a key state for step-1 from the
/// short-term memory and feature counts. Subtask sets pass through untouched.
inline LongTermMemory ltm_update(const LongTermMemory& prev, const ShortTermMemory& stm,
                                 const GroundingFeatures& features, int step, const MemoryCapacity& cap = {}) {
    LongTermMemory next = prev;
    if (stm.last_action == kNone) return next;
    int recorded = step - 1;
    if (!next.key_states.empty() && next.key_states.back().step >= recorded) return next;
    std::string summary = stm.last_action;
    if (stm.last_feedback) summary += " (feedback " + format_fixed(*stm.last_feedback, 2) + ")";
    summary += "; grounding: " + summarize_features(features);
    next.key_states.push_back({recorded, std::move(summary)});
    while (next.key_states.size() > cap.key_states) next.key_states.erase(next.key_states.begin());
    return next;
}

// ---------------------------------------------------------------------------
// Reflection deltas. The variant alternative fixes the level, and the level
// fixes which memory a delta may touch.

enum class ReflectionLevel { Action, Trajectory, Global };

inline std::string_view to_string(ReflectionLevel l) {
    switch (l) {
    case ReflectionLevel::Action: return "action";
    case ReflectionLevel::Trajectory: return "trajectory";
    case ReflectionLevel::Global: return "global";
    }
    return "?";
}

struct ActionReflection {
    std::string lesson;
    std::optional<std::string> observation;

    friend bool operator==(const ActionReflection&, const ActionReflection&) = default;
};

struct TrajectoryReflection {
    std::vector<std::string> completed;
    std::vector<std::string> remaining;
    std::vector<std::string> pitfalls;

    friend bool operator==(const TrajectoryReflection&, const TrajectoryReflection&) = default;
};

enum class GoalStatus { Complete, Incomplete };

inline std::string_view to_string(GoalStatus s) { return s == GoalStatus::Complete ? "complete" : "incomplete"; }

inline GoalStatus parse_goal_status(std::string_view s) {
    if (s == "complete") return GoalStatus::Complete;
    if (s == "incomplete") return GoalStatus::Incomplete;
    throw ProtocolError(ErrorCode::SchemaViolation, "status must be \"complete\" or \"incomplete\"", "status");
}

struct GlobalReflection {
    GoalStatus status = GoalStatus::Incomplete;
    std::vector<std::string> missing_steps;
    std::string note;

    friend bool operator==(const GlobalReflection&, const GlobalReflection&) = default;
};

using ReflectionDelta = std::variant<ActionReflection, TrajectoryReflection, GlobalReflection>;

inline ReflectionLevel level_of(const ReflectionDelta& d) { return static_cast<ReflectionLevel>(d.index()); }

inline void check_delta(const ReflectionDelta& delta) {
    auto non_empty = [](const std::vector<std::string>& v, const char* what) {
        for (const auto& s : v) {
            if (trim(s).empty()) throw Error(ErrorCode::SchemaViolation, std::string("empty entry in ") + what);
        }
    };
    if (const auto* t = std::get_if<TrajectoryReflection>(&delta)) {
        non_empty(t->completed, "completed");
        non_empty(t->remaining, "remaining");
        non_empty(t->pitfalls, "pitfalls");
        for (const auto& c : t->completed) {
            if (contains(t->remaining, c)) {
                throw Error(ErrorCode::SchemaViolation, "subtask '" + c + "' both completed and remaining");
            }
        }
    } else if (const auto* g = std::get_if<GlobalReflection>(&delta)) {
        non_empty(g->missing_steps, "missing_steps");
        if (g->status == GoalStatus::Complete && !g->missing_steps.empty()) {
            throw Error(ErrorCode::SchemaViolation, "status complete with missing steps");
        }
    }
}

/// Applies one delta. Action deltas rewrite the short-term lesson and
/// observation; trajectory and global deltas edit long-term memory only.
inline std::pair<ShortTermMemory, LongTermMemory> apply_reflection(const ShortTermMemory& stm,
                                                                   const LongTermMemory& ltm,
                                                                   const ReflectionDelta& delta,
                                                                   const MemoryCapacity& cap = {}) {
    check_delta(delta);
    auto next_stm = stm;
    auto next_ltm = ltm;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, ActionReflection>) {
                if (!trim(d.lesson).empty()) next_stm.last_lesson = d.lesson;
                if (d.observation && !trim(*d.observation).empty()) next_stm.last_observation = *d.observation;
            } else if constexpr (std::is_same_v<T, TrajectoryReflection>) {
                for (const auto& c : d.completed) mark_completed(next_ltm, c);
                for (const auto& r : d.remaining) mark_remaining(next_ltm, r);
                for (const auto& p : d.pitfalls) add_pitfall(next_ltm, p, cap);
            } else {
                std::string progress = "status: " + std::string(to_string(d.status));
                if (!d.missing_steps.empty()) {
                    progress += "; missing: ";
                    for (std::size_t i = 0; i < d.missing_steps.size(); ++i) {
                        progress += (i ? ", " : "") + d.missing_steps[i];
                    }
                }
                if (!d.note.empty()) progress += "; " + d.note;
                next_ltm.overall_progress = std::move(progress);
            }
        },
        delta);
    return {std::move(next_stm), std::move(next_ltm)};
}

// ---------------------------------------------------------------------------
// Serialization. Key order is fixed (ordered_json) so prompts are stable.

inline nlohmann::ordered_json stm_json(const ShortTermMemory& m) {
    nlohmann::ordered_json j;
    j["last_action"] = m.last_action;
    j["last_observation"] = m.last_observation;
    j["last_lesson"] = m.last_lesson;
    j["last_feedback"] = m.last_feedback ? nlohmann::ordered_json(*m.last_feedback) : nlohmann::ordered_json(nullptr);
    return j;
}

inline nlohmann::ordered_json ltm_json(const LongTermMemory& m) {
    nlohmann::ordered_json j;
    j["overall_progress"] = m.overall_progress;
    j["completed_subtasks"] = m.completed_subtasks;
    j["remaining_subtasks"] = m.remaining_subtasks;
    j["known_pitfalls"] = m.known_pitfalls;
    auto ks = nlohmann::ordered_json::array();
    for (const auto& k : m.key_states) ks.push_back({{"step", k.step}, {"summary", k.summary}});
    j["key_states"] = std::move(ks);
    return j;
}

template <typename Json>
ShortTermMemory stm_from_json(const Json& j) {
    ShortTermMemory m;
    m.last_action = j.at("last_action").template get<std::string>();
    m.last_observation = j.at("last_observation").template get<std::string>();
    m.last_lesson = j.at("last_lesson").template get<std::string>();
    if (j.contains("last_feedback") && !j["last_feedback"].is_null()) {
        m.last_feedback = j["last_feedback"].template get<double>();
    }
    return m;
}

template <typename Json>
LongTermMemory ltm_from_json(const Json& j) {
    LongTermMemory m;
    m.overall_progress = j.at("overall_progress").template get<std::string>();
    m.completed_subtasks = j.at("completed_subtasks").template get<std::vector<std::string>>();
    m.remaining_subtasks = j.at("remaining_subtasks").template get<std::vector<std::string>>();
    m.known_pitfalls = j.at("known_pitfalls").template get<std::vector<std::string>>();
    if (j.contains("key_states")) {
        for (const auto& k : j["key_states"]) {
            m.key_states.push_back({k.at("step").template get<int>(), k.at("summary").template get<std::string>()});
        }
    }
    return m;
}

inline void to_json(nlohmann::json& j, const ShortTermMemory& m) { j = nlohmann::json::parse(stm_json(m).dump()); }
inline void from_json(const nlohmann::json& j, ShortTermMemory& m) { m = stm_from_json(j); }
inline void to_json(nlohmann::json& j, const LongTermMemory& m) { j = nlohmann::json::parse(ltm_json(m).dump()); }
inline void from_json(const nlohmann::json& j, LongTermMemory& m) { m = ltm_from_json(j); }

inline void to_json(nlohmann::json& j, const ReflectionDelta& d) {
    j = {{"level", std::string(to_string(level_of(d)))}};
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, ActionReflection>) {
                j["lesson"] = x.lesson;
                if (x.observation) j["observation"] = *x.observation;
            } else if constexpr (std::is_same_v<T, TrajectoryReflection>) {
                j["completed"] = x.completed;
                j["remaining"] = x.remaining;
                j["pitfalls"] = x.pitfalls;
            } else {
                j["status"] = std::string(to_string(x.status));
                j["missing_steps"] = x.missing_steps;
                j["note"] = x.note;
            }
        },
        d);
}

inline void from_json(const nlohmann::json& j, ReflectionDelta& d) {
    auto level = j.at("level").get<std::string>();
    if (level == "action") {
        ActionReflection a{j.at("lesson").get<std::string>(), std::nullopt};
        if (j.contains("observation")) a.observation = j["observation"].get<std::string>();
        d = a;
    } else if (level == "trajectory") {
        d = TrajectoryReflection{j.at("completed").get<std::vector<std::string>>(),
                                 j.at("remaining").get<std::vector<std::string>>(),
                                 j.at("pitfalls").get<std::vector<std::string>>()};
    } else if (level == "global") {
        d = GlobalReflection{parse_goal_status(j.at("status").get<std::string>()),
                             j.at("missing_steps").get<std::vector<std::string>>(), j.value("note", std::string{})};
    } else {
        throw Error(ErrorCode::SchemaViolation, "unknown reflection level '" + level + "'");
    }
}

// ---------------------------------------------------------------------------
// Prompt fragment.

inline constexpr const char* kStmHeading = "SHORT_TERM_MEMORY (what happened in the previous step):";
inline constexpr const char* kLtmHeading = "LONG_TERM_MEMORY (cumulative knowledge and progress):";

inline std::string render_memory_context(const ShortTermMemory& stm, const LongTermMemory& ltm) {
    return std::string(kStmHeading) + "\n" + stm_json(stm).dump(2) + "\n\n" + kLtmHeading + "\n" +
           ltm_json(ltm).dump(2) + "\n";
}

/// Inverse of render_memory_context. JSON dumps escape newlines inside
/// strings, so a heading on its own line cannot occur inside a record.
inline std::pair<ShortTermMemory, LongTermMemory> parse_memory_context(std::string_view text) {
    const std::string stm_marker = std::string(kStmHeading) + "\n";
    const std::string ltm_marker = std::string("\n") + kLtmHeading + "\n";
    auto s = text.find(stm_marker);
    auto l = text.find(ltm_marker);
    if (s == std::string_view::npos || l == std::string_view::npos || l < s) {
        throw Error(ErrorCode::SchemaViolation, "memory headings not found");
    }
    auto stm_text = text.substr(s + stm_marker.size(), l - s - stm_marker.size());
    auto ltm_text = text.substr(l + ltm_marker.size());
    // the LTM record ends at the matching closing brace
    auto end = ltm_text.find("\n}");
    if (end != std::string_view::npos) ltm_text = ltm_text.substr(0, end + 2);
    try {
        return {stm_from_json(nlohmann::json::parse(stm_text)), ltm_from_json(nlohmann::json::parse(ltm_text))};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedJson, std::string("memory fragment: ") + e.what());
    }
}

} // namespace flowcritic
