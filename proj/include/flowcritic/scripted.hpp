#pragma once

// Scripted policy backends: deterministic stand-ins for the actor and
// critic models. They read the out-of-band SimulationContext, never the
// prompt's task content, so their behavior is a pure function of
// (seed, task id, step, attempt).

#include "actor.hpp"
#include "critic.hpp"
#include "matching.hpp"
#include "policy.hpp"

#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace flowcritic {

enum class ScriptedActorKind { Oracle, Noisy, Random, AlwaysWrong, Faulty, Prose };

inline std::string_view to_string(ScriptedActorKind k) {
    switch (k) {
    case ScriptedActorKind::Oracle: return "oracle";
    case ScriptedActorKind::Noisy: return "noisy";
    case ScriptedActorKind::Random: return "random";
    case ScriptedActorKind::AlwaysWrong: return "always_wrong";
    case ScriptedActorKind::Faulty: return "faulty";
    case ScriptedActorKind::Prose: return "prose";
    }
    return "?";
}

/// A representative action of `kind` for steps whose label has another kind.
inline Action placeholder_action(ActionKind kind) {
    switch (kind) {
    case ActionKind::Click: return Action::click("Menu");
    case ActionKind::Scroll: return Action::scroll(3, std::string("List"));
    case ActionKind::Zoom: {
        Action a{ActionKind::Zoom};
        a.target = "Viewer";
        return a;
    }
    case ActionKind::Text: return Action::type_text("text", std::string("Input"));
    case ActionKind::Segment: {
        Action a{ActionKind::Segment};
        a.target = "Viewer";
        return a;
    }
    case ActionKind::Complete: return Action::complete();
    }
    return Action::complete();
}

/// A wrong action: one of the other five kinds, uniformly.
inline Action wrong_action(const Action& reference, Rng& rng) {
    std::vector<ActionKind> others;
    for (auto k : kAllActionKinds) {
        if (k != reference.kind) others.push_back(k);
    }
    return placeholder_action(rng.pick(others));
}

struct FaultSite {
    std::string task_id;
    int step = 0;

    friend auto operator<=>(const FaultSite&, const FaultSite&) = default;
};

struct ScriptedActorOptions {
    ScriptedActorKind kind = ScriptedActorKind::Oracle;
    double flip_rate = 0.3;
    std::set<FaultSite> faults;
    /// Faulty sites are wrong on the first `fault_attempts` attempts; negative means every attempt.
    int fault_attempts = -1;
};

class ScriptedActor final : public PolicyBackend {
public:
    explicit ScriptedActor(ScriptedActorOptions options = {}) : opt_(std::move(options)) {}

    std::string identity() const override {
        std::string id = "scripted-actor:" + std::string(to_string(opt_.kind));
        if (opt_.kind == ScriptedActorKind::Noisy) id += "(flip_rate=" + format_fixed(opt_.flip_rate, 3) + ")";
        if (opt_.kind == ScriptedActorKind::Faulty) id += "(sites=" + std::to_string(opt_.faults.size()) + ")";
        return id;
    }

    /// The action this backend proposes for a given simulation context.
    Action choose(const SimulationContext& sim) const {
        if (!sim.reference) {
            throw Error(ErrorCode::BackendUnavailable, "scripted actor needs the step reference in simulation context");
        }
        const Action& ref = *sim.reference;
        auto rng = Rng::derive(sim.seed, "actor", sim.task_id, sim.step, sim.attempt);
        switch (opt_.kind) {
        case ScriptedActorKind::Oracle: return ref;
        case ScriptedActorKind::Noisy: return rng.bernoulli(opt_.flip_rate) ? wrong_action(ref, rng) : ref;
        case ScriptedActorKind::Random: {
            auto kind = rng.pick(std::vector<ActionKind>(kAllActionKinds.begin(), kAllActionKinds.end()));
            return kind == ref.kind ? ref : placeholder_action(kind);
        }
        case ScriptedActorKind::AlwaysWrong: return wrong_action(ref, rng);
        case ScriptedActorKind::Faulty: {
            bool site = opt_.faults.count(FaultSite{sim.task_id, sim.step}) > 0;
            bool active = opt_.fault_attempts < 0 || sim.attempt < opt_.fault_attempts;
            return site && active ? wrong_action(ref, rng) : ref;
        }
        case ScriptedActorKind::Prose: return ref;
        }
        return ref;
    }

    std::string complete(const PolicyRequest& request) const override {
        const auto& sim = request.sim;
        if (opt_.kind == ScriptedActorKind::Prose) {
            return "Looking at the screen, I would go ahead with the next button in the toolbar.";
        }
        auto action = choose(sim);
        if (sim.format == OutputFormat::ActionType) return std::string(to_string(action.kind));

        ActorStepOutput out;
        out.step = sim.step;
        // echo the memories the prompt carried, when they can be recovered
        try {
            auto [stm, ltm] = parse_memory_context(request.prompt);
            out.stm_echo = stm;
            out.ltm_echo = ltm;
        } catch (const Error&) {
        }
        out.grounding.current_screen_state = "screen for step " + std::to_string(sim.step);
        if (action.target) out.grounding.key_ui_elements.push_back(*action.target);
        out.grounding.relevant_affordances.push_back(std::string(to_string(action.kind)));
        if (action.target) out.reasoning.tool_calls.push_back({kVisualGrounding, {{"query", *action.target}}});
        out.reasoning.why_correct_and_safe = "the action matches the visible affordance";
        out.reasoning.why_aligns_with_goal = "it advances the next remaining subtask";
        out.reasoning.why_alternatives_wrong = "other actions do not advance the workflow";
        out.predicted = prediction_from_action(action);
        out.action = action;
        return actor_output_json(out).dump(2);
    }

private:
    ScriptedActorOptions opt_;
};

/// Scripted critic. With the reference available it judges by the match
/// mode; without it, it approves everything except premature COMPLETE.
class ScriptedCritic final : public PolicyBackend {
public:
    explicit ScriptedCritic(MatchMode mode = MatchMode::CanonicalFull) : mode_(mode) {}

    std::string identity() const override { return "scripted-critic:oracle(" + std::string(to_string(mode_)) + ")"; }

    CriticVerdict judge(const SimulationContext& sim) const {
        if (!sim.proposal) throw Error(ErrorCode::BackendUnavailable, "scripted critic needs the proposal");
        const Action& p = *sim.proposal;
        CriticVerdict v;
        bool premature = is_premature_complete(p, sim.step, sim.total_steps);
        bool correct = !premature && (!sim.reference || step_correct(p, *sim.reference, mode_));
        v.action_correct = correct;
        v.score = correct ? 1.0 : 0.0;

        if (!correct) {
            if (premature) {
                v.why_if_wrong = "COMPLETE proposed at step " + std::to_string(sim.step) + " of " +
                                 std::to_string(sim.total_steps);
                v.hint_if_wrong = premature_complete_hint(sim.total_steps);
            } else if (sim.reference->kind != p.kind) {
                auto want = std::string(to_string(sim.reference->kind));
                v.why_if_wrong = "expected a " + want + " action, got " + std::string(to_string(p.kind));
                v.hint_if_wrong = std::string(kModeConfusion) + ": use " + want + " instead of " +
                                  std::string(to_string(p.kind));
            } else {
                v.why_if_wrong = "action type is right but its arguments differ from the expected effect";
                v.hint_if_wrong = "keep " + std::string(to_string(p.kind)) + " but re-check its target and values";
            }
            v.action_reflection = v.hint_if_wrong;
        } else {
            v.action_reflection = render_action(p) + " is consistent with the observed effect";
        }

        auto [done, rest] = progress_split(sim.goal, correct ? sim.step : sim.step - 1, sim.total_steps);
        v.completed_subtasks = done;
        v.remaining_subtasks = rest;
        bool finished = correct && sim.step == sim.total_steps && rest.empty();
        v.status = finished ? GoalStatus::Complete : GoalStatus::Incomplete;
        if (!finished) {
            v.missing_steps = rest;
            if (v.missing_steps.empty()) v.missing_steps.push_back("step " + std::to_string(sim.step));
        }
        v.tool_evaluation.tools_used = sim.tools_used;
        for (const auto& t : sim.tools_used) v.tool_evaluation.tool_success[t] = true;
        return v;
    }

    std::string complete(const PolicyRequest& request) const override {
        return verdict_json(judge(request.sim)).dump(2);
    }

private:
    MatchMode mode_;
};

/// Returns canned responses in order, repeating the last one. Used to feed
/// malformed payloads through the repair ladder.
class ReplayBackend final : public PolicyBackend {
public:
    explicit ReplayBackend(std::vector<std::string> responses, std::string name = "replay")
        : responses_(std::move(responses)), name_(std::move(name)) {
        if (responses_.empty()) throw Error(ErrorCode::InvalidArgument, "replay backend needs at least one response");
    }

    std::string identity() const override { return name_; }
    PolicyCapabilities capabilities() const override { return {false, false}; }

    std::string complete(const PolicyRequest&) const override {
        std::lock_guard lock(mutex_);
        auto i = std::min(calls_, responses_.size() - 1);
        ++calls_;
        return responses_[i];
    }

    std::size_t calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

private:
    std::vector<std::string> responses_;
    std::string name_;
    mutable std::mutex mutex_;
    mutable std::size_t calls_ = 0;
};

} // namespace flowcritic
