#pragma once

#include "action.hpp"
#include "actor.hpp"
#include "error.hpp"
#include "grounding.hpp"
#include "memory.hpp"
#include "policy.hpp"
#include "prompts.hpp"
#include "protocol.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowcritic {

struct ToolEvaluation {
    std::vector<std::string> tools_used;
    std::map<std::string, bool> tool_success;
    std::vector<std::string> tool_lessons;
};

struct CriticVerdict {
    bool action_correct = false;
    /// r̂ in [0,1]; the boolean mapping unless the backend reported a score.
    double score = 0.0;
    bool score_reported = false;
    std::string why_if_wrong;
    std::string hint_if_wrong;
    std::string action_reflection;
    std::vector<std::string> completed_subtasks;
    std::vector<std::string> remaining_subtasks;
    GoalStatus status = GoalStatus::Incomplete;
    std::vector<std::string> missing_steps;
    ToolEvaluation tool_evaluation;
};

inline void check_verdict(const CriticVerdict& v) {
    if (!(v.score >= 0.0 && v.score <= 1.0)) {
        throw ProtocolError(ErrorCode::SchemaViolation, "score must lie in [0,1]", "score");
    }
    if (v.status == GoalStatus::Complete && (!v.remaining_subtasks.empty() || !v.missing_steps.empty())) {
        throw ProtocolError(ErrorCode::SchemaViolation,
                            "status \"complete\" with remaining_subtasks or missing_steps", "reflection.global.status");
    }
    if (!v.action_correct && trim(v.hint_if_wrong).empty()) {
        throw ProtocolError(ErrorCode::SchemaViolation, "action_correct=false requires hint_if_wrong", "hint_if_wrong");
    }
    for (const auto& c : v.completed_subtasks) {
        if (contains(v.remaining_subtasks, c)) {
            throw ProtocolError(ErrorCode::SchemaViolation, "subtask '" + c + "' both completed and remaining",
                                "reflection.trajectory");
        }
    }
}

inline nlohmann::ordered_json verdict_json(const CriticVerdict& v) {
    using oj = nlohmann::ordered_json;
    oj j;
    j["action_correct"] = v.action_correct;
    if (v.score_reported) j["score"] = v.score;
    j["why_if_wrong"] = v.why_if_wrong;
    j["hint_if_wrong"] = v.hint_if_wrong;
    j["reflection"] = oj{{"action", v.action_reflection},
                         {"trajectory",
                          oj{{"completed_subtasks", v.completed_subtasks}, {"remaining_subtasks", v.remaining_subtasks}}},
                         {"global", oj{{"status", to_string(v.status)}, {"missing_steps", v.missing_steps}}}};
    oj success = oj::object();
    for (const auto& [k, ok] : v.tool_evaluation.tool_success) success[k] = ok;
    j["tool_evaluation"] = oj{{"tools_used", v.tool_evaluation.tools_used},
                              {"tool_success", success},
                              {"tool_lessons", v.tool_evaluation.tool_lessons}};
    return j;
}

/// Record form used in run artifacts: the wire object plus the effective score.
inline nlohmann::ordered_json verdict_record_json(const CriticVerdict& v) {
    auto j = verdict_json(v);
    j["effective_score"] = v.score;
    return j;
}

/// Strict parse of one critic object. Prose in place of an array is a hard
/// error, never coerced.
inline CriticVerdict parse_critic_output(std::string_view text) {
    using namespace protocol;
    auto doc = parse_strict(text);
    if (!doc.is_object()) throw ProtocolError(ErrorCode::SchemaViolation, "critic output must be one JSON object");
    only_keys(doc,
              {"action_correct", "score", "why_if_wrong", "hint_if_wrong", "reflection", "tool_evaluation"}, "");

    CriticVerdict v;
    v.action_correct = require_bool(doc, "action_correct", "");
    v.score = v.action_correct ? 1.0 : 0.0;
    if (doc.contains("score") && !doc["score"].is_null()) {
        if (!doc["score"].is_number()) throw ProtocolError(ErrorCode::TypeMismatch, "'score' must be a number", "score");
        v.score = doc["score"].get<double>();
        v.score_reported = true;
    }
    v.why_if_wrong = require_string(doc, "why_if_wrong", "");
    v.hint_if_wrong = require_string(doc, "hint_if_wrong", "");

    const auto& r = require_object(doc, "reflection", "");
    only_keys(r, {"action", "trajectory", "global"}, "reflection");
    v.action_reflection = require_string(r, "action", "reflection");
    const auto& t = require_object(r, "trajectory", "reflection");
    only_keys(t, {"completed_subtasks", "remaining_subtasks", "known_pitfalls"}, "reflection.trajectory");
    v.completed_subtasks = require_string_array(t, "completed_subtasks", "reflection.trajectory");
    v.remaining_subtasks = require_string_array(t, "remaining_subtasks", "reflection.trajectory");
    const auto& g = require_object(r, "global", "reflection");
    only_keys(g, {"status", "missing_steps"}, "reflection.global");
    auto status = require_string(g, "status", "reflection.global");
    try {
        v.status = parse_goal_status(status);
    } catch (const Error& e) {
        throw ProtocolError(ErrorCode::InvalidArgument, e.detail(), "reflection.global.status");
    }
    v.missing_steps = require_string_array(g, "missing_steps", "reflection.global");

    const auto& te = require_object(doc, "tool_evaluation", "");
    only_keys(te, {"tools_used", "tool_success", "tool_lessons"}, "tool_evaluation");
    v.tool_evaluation.tools_used = require_string_array(te, "tools_used", "tool_evaluation");
    const auto& ts = require_object(te, "tool_success", "tool_evaluation");
    for (const auto& [k, ok] : ts.items()) {
        if (!ok.is_boolean()) {
            throw ProtocolError(ErrorCode::TypeMismatch, "'tool_evaluation.tool_success." + k + "' must be a boolean",
                                "tool_evaluation.tool_success." + k);
        }
        v.tool_evaluation.tool_success[k] = ok.get<bool>();
    }
    v.tool_evaluation.tool_lessons = require_string_array(te, "tool_lessons", "tool_evaluation");

    check_verdict(v);
    return v;
}

// ---------------------------------------------------------------------------
// Prompt

inline constexpr const char* kNotAvailable = "NOT AVAILABLE";

struct CriticPromptInputs {
    std::string goal;
    int step = 1;
    std::string target_output_json;
    bool include_tools = true;
    GroundingFeatures features;
    ShortTermMemory stm;
    LongTermMemory ltm;
    std::string ground_truth_after_action = kNotAvailable;
    std::string full_trajectory_so_far = kNone;
};

inline std::string build_critic_prompt(const CriticPromptInputs& in) {
    auto user = fill_template(prompts::kCriticUser,
                              {{"user_goal", in.goal},
                               {"step_num", std::to_string(in.step)},
                               {"target_output_json", in.target_output_json},
                               {"tool_context", in.include_tools ? render_tool_context(in.features) : std::string{}},
                               {"memory_context", render_memory_context(in.stm, in.ltm)},
                               {"ground_truth_after_action", in.ground_truth_after_action},
                               {"full_trajectory_so_far", in.full_trajectory_so_far}});
    return std::string(prompts::kCriticSystem) + "\n\n" + user;
}

// ---------------------------------------------------------------------------
// Scoring and acceptance

inline bool is_premature_complete(const Action& proposal, int step, int total_steps) {
    return proposal.kind == ActionKind::Complete && step < total_steps;
}

inline std::string premature_complete_hint(int total_steps) {
    return "COMPLETE is only valid on the final step (step " + std::to_string(total_steps) +
           "); continue with the remaining subtasks";
}

/// Runtime guard applied after any critic backend: COMPLETE before the final
/// step is rejected whatever the backend said.
inline CriticVerdict guard_premature_complete(CriticVerdict v, const Action& proposal, int step, int total_steps) {
    if (!is_premature_complete(proposal, step, total_steps)) return v;
    v.action_correct = false;
    v.score = 0.0;
    v.why_if_wrong = "COMPLETE proposed at step " + std::to_string(step) + " of " + std::to_string(total_steps);
    v.hint_if_wrong = premature_complete_hint(total_steps);
    v.status = GoalStatus::Incomplete;
    if (v.missing_steps.empty()) v.missing_steps = v.remaining_subtasks;
    if (v.missing_steps.empty()) v.missing_steps.push_back("steps " + std::to_string(step + 1) + "-" +
                                                          std::to_string(total_steps));
    return v;
}

/// Q_phi: asks the critic backend and applies the premature-COMPLETE guard.
/// `request.sim.proposal`, `step` and `total_steps` must be set.
inline CriticVerdict score_action(const PolicyBackend& backend, PolicyRequest request, const Action& proposal,
                                  int max_repairs = kDefaultRepairAttempts) {
    request.sim.format = OutputFormat::CriticJson;
    request.sim.proposal = proposal;
    auto [verdict, meta] = with_repair(backend, request, max_repairs, parse_critic_output, protocol::strip_to_json);
    (void)meta;
    return guard_premature_complete(std::move(verdict), proposal, request.sim.step, request.sim.total_steps);
}

/// Strict: a score equal to the threshold is rejected.
inline bool accept(const CriticVerdict& v, double accept_threshold) {
    if (!(accept_threshold >= 0.0 && accept_threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "accept_threshold must lie in [0,1]");
    }
    return v.score > accept_threshold;
}

// ---------------------------------------------------------------------------
// Subtasks from the goal text: "Category: first; second; third".

inline std::vector<std::string> derive_subtasks(std::string_view goal) {
    auto colon = goal.find(": ");
    auto body = colon == std::string_view::npos ? goal : goal.substr(colon + 2);
    std::vector<std::string> out;
    for (auto& part : split(body, ";")) {
        auto p = trim(part);
        if (!p.empty() && !contains(out, p)) out.push_back(p);
    }
    return out;
}

/// Subtasks counted as done after `done_steps` of `total_steps`:
/// floor(n * done / T) of them, in goal order.
inline std::pair<std::vector<std::string>, std::vector<std::string>> progress_split(std::string_view goal,
                                                                                     int done_steps, int total_steps) {
    auto subs = derive_subtasks(goal);
    std::size_t c = 0;
    if (total_steps > 0 && done_steps > 0) {
        c = static_cast<std::size_t>(subs.size()) * static_cast<std::size_t>(std::min(done_steps, total_steps)) /
            static_cast<std::size_t>(total_steps);
    }
    std::vector<std::string> done(subs.begin(), subs.begin() + static_cast<std::ptrdiff_t>(c));
    std::vector<std::string> rest(subs.begin() + static_cast<std::ptrdiff_t>(c), subs.end());
    return {done, rest};
}

// ---------------------------------------------------------------------------
// Reflectors. Return types fix the level: the action reflector can only
// produce STM deltas, the other two only LTM deltas.

inline constexpr const char* kNoEffect = "no effect";
inline constexpr const char* kModeConfusion = "mode confusion";

inline ActionReflection reflect_action(const std::string& state_t, const std::optional<std::string>& state_t1,
                                       const Action& proposal, const CriticVerdict& verdict,
                                       const std::optional<Action>& reference = std::nullopt) {
    std::string lesson = !trim(verdict.hint_if_wrong).empty() ? verdict.hint_if_wrong : verdict.why_if_wrong;
    if (reference && reference->kind != proposal.kind && !contains_icase(lesson, kModeConfusion)) {
        auto tag = std::string(kModeConfusion) + ": issued " + std::string(to_string(proposal.kind)) + " instead of " +
                   std::string(to_string(reference->kind));
        lesson = lesson.empty() ? tag : tag + "; " + lesson;
    }
    if (state_t1 && *state_t1 == state_t) {
        auto tag = std::string(kNoEffect) + ": " + render_action(proposal) + " left the screen unchanged";
        lesson = lesson.empty() ? tag : tag + "; " + lesson;
    }
    if (trim(lesson).empty()) lesson = render_action(proposal) + " was rejected";
    return ActionReflection{lesson, state_t1};
}

/// One step of trajectory history as seen by the trajectory and global reflectors.
struct WindowEntry {
    int step = 0;
    std::optional<Action> accepted;
    std::vector<std::string> completed;
    std::vector<std::string> remaining;
};

inline std::string stall_pitfall(const Action& a, int run) {
    return "stall: " + render_action(a) + " repeated " + std::to_string(run) + " times";
}

/// Looks at the last `k` entries: flags runs of >= `stall` identical accepted
/// actions and moves freshly completed subtasks out of the remaining set.
inline TrajectoryReflection reflect_trajectory(const std::vector<WindowEntry>& history, const LongTermMemory& ltm,
                                               int k, int stall) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "trajectory window must be >= 1");
    if (stall < 1) throw Error(ErrorCode::InvalidArgument, "stall length must be >= 1");
    auto begin = history.size() > static_cast<std::size_t>(k) ? history.end() - k : history.begin();
    std::vector<WindowEntry> window(begin, history.end());

    TrajectoryReflection d;
    int run = 0;
    const Action* prev = nullptr;
    for (const auto& e : window) {
        if (e.accepted && prev && *e.accepted == *prev) {
            ++run;
        } else {
            run = e.accepted ? 1 : 0;
        }
        prev = e.accepted ? &*e.accepted : nullptr;
        if (run >= stall && prev) {
            auto p = stall_pitfall(*prev, run);
            // a longer run supersedes the shorter flag for the same action
            if (run > stall) {
                auto shorter = stall_pitfall(*prev, run - 1);
                d.pitfalls.erase(std::remove(d.pitfalls.begin(), d.pitfalls.end(), shorter), d.pitfalls.end());
            }
            d.pitfalls.push_back(p);
        }
    }

    for (const auto& e : window) {
        for (const auto& c : e.completed) {
            if (!contains(ltm.completed_subtasks, c) && !contains(d.completed, c)) d.completed.push_back(c);
        }
    }
    if (!window.empty()) {
        for (const auto& r : window.back().remaining) {
            if (!contains(d.completed, r) && !contains(ltm.completed_subtasks, r) && !contains(d.remaining, r)) {
                d.remaining.push_back(r);
            }
        }
    }
    return d;
}

/// Whole-history goal check. Complete only on the last step, with COMPLETE
/// accepted there and nothing remaining.
inline GlobalReflection reflect_global(const std::vector<WindowEntry>& history, const std::string& goal,
                                       bool is_last_step, const LongTermMemory& ltm = {}) {
    std::vector<std::string> completed = ltm.completed_subtasks;
    for (const auto& e : history) {
        for (const auto& c : e.completed) {
            if (!contains(completed, c)) completed.push_back(c);
        }
    }
    std::vector<std::string> remaining;
    const auto& source = !history.empty() ? history.back().remaining : ltm.remaining_subtasks;
    for (const auto& r : source) {
        if (!contains(completed, r) && !contains(remaining, r)) remaining.push_back(r);
    }
    if (history.empty() && ltm.remaining_subtasks.empty() && completed.empty()) remaining = derive_subtasks(goal);

    int accepted = 0;
    for (const auto& e : history) accepted += e.accepted ? 1 : 0;
    bool complete_accepted = !history.empty() && history.back().accepted &&
                             history.back().accepted->kind == ActionKind::Complete;

    GlobalReflection g;
    g.status = is_last_step && complete_accepted && remaining.empty() ? GoalStatus::Complete : GoalStatus::Incomplete;
    if (g.status == GoalStatus::Incomplete) g.missing_steps = remaining;
    g.note = std::to_string(accepted) + " of " + std::to_string(history.size()) + " steps accepted";
    return g;
}

} // namespace flowcritic
