#pragma once

#include "actor.hpp"
#include "config.hpp"
#include "critic.hpp"
#include "grounding.hpp"
#include "matching.hpp"
#include "memory.hpp"
#include "policy.hpp"
#include "task.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace flowcritic {

inline constexpr int kRunFormatVersion = 1;

struct Backends {
    const PolicyBackend& actor;
    const PolicyBackend* critic = nullptr;
    const ToolBackend& tools;
};

struct ProposalRecord {
    int attempt = 0;
    std::string prompt_sha256;
    int repairs_used = 0;
    nlohmann::ordered_json output;
    Action action;
    nlohmann::json tool_results = nlohmann::json::object();
    std::optional<CriticVerdict> verdict;
    bool accepted = false;
    /// Reflections applied to the working memories after this proposal was rejected.
    std::vector<ReflectionDelta> deltas;
};

struct StepRecord {
    int t = 0;
    Action label;
    GroundingFeatures features;
    ShortTermMemory stm_before;
    LongTermMemory ltm_before;
    ShortTermMemory stm_after;
    LongTermMemory ltm_after;
    std::vector<ProposalRecord> proposals;
    std::optional<Action> accepted;
    int revisions = 0;
    /// r_t: score of the final verdict; 1/0 for accepted/not when no critic ran.
    double feedback = 0.0;
    std::string critique = kNone;
    bool failed = false;
    std::string error;
};

enum class TaskStatus { Completed, Terminated, Failed };

inline std::string_view to_string(TaskStatus s) {
    switch (s) {
    case TaskStatus::Completed: return "completed";
    case TaskStatus::Terminated: return "terminated";
    case TaskStatus::Failed: return "failed";
    }
    return "?";
}

inline TaskStatus parse_task_status(std::string_view s) {
    if (s == "completed") return TaskStatus::Completed;
    if (s == "terminated") return TaskStatus::Terminated;
    if (s == "failed") return TaskStatus::Failed;
    throw Error(ErrorCode::SchemaViolation, "unknown task status '" + std::string(s) + "'");
}

struct TrajectoryRecord {
    std::string task_id;
    std::string goal;
    Category category = Category::Synthetic;
    std::string config_hash;
    RunMode mode = RunMode::TeacherForced;
    MatchMode match_mode = MatchMode::CanonicalFull;
    int total_steps = 0;
    std::vector<StepRecord> steps;
    TaskStatus status = TaskStatus::Completed;
    int verifier = 0;
};

/// V: every step executed, accepted, and matching its label.
inline int verify_steps(const std::vector<StepRecord>& steps, int total_steps, MatchMode mode) {
    if (static_cast<int>(steps.size()) != total_steps) return 0;
    for (const auto& s : steps) {
        if (!s.accepted || !step_correct(*s.accepted, s.label, mode)) return 0;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// Helpers shared with export (prompt reconstruction must match byte for byte).

inline std::string screen_ref(const Task& task, int t) {
    return task.id + "/" + image_name(t);
}

inline std::string observation_of(const Task& task, int t) {
    const auto& step = task.steps[static_cast<std::size_t>(t - 1)];
    std::string s = "step " + std::to_string(t) + " screen";
    if (step.synthetic) s += ": " + summarize_screen(*step.synthetic);
    return s;
}

inline ShortTermMemory prompt_stm(const ShortTermMemory& stm, const RunConfig& cfg) {
    return cfg.use_stm ? stm : ShortTermMemory{};
}

inline LongTermMemory prompt_ltm(const LongTermMemory& ltm, const RunConfig& cfg) {
    return cfg.use_ltm ? ltm : LongTermMemory{};
}

/// Actor prompt from the memories as the actor sees them (already masked).
inline std::string actor_prompt_for(const std::string& goal, int total_steps, int t, const RunConfig& cfg,
                                    const GroundingFeatures& features, const ShortTermMemory& stm,
                                    const LongTermMemory& ltm) {
    ActorPromptInputs in;
    in.goal = goal;
    in.step = t;
    if (cfg.expose_total_steps) in.total_steps = total_steps;
    in.include_tools = cfg.use_tools;
    if (cfg.use_tools) in.features = features;
    in.stm = stm;
    in.ltm = ltm;
    return build_actor_prompt(in);
}

inline std::string baseline_prompt_for(const Task& task, int t, const RunConfig& cfg, const GroundingFeatures& features) {
    BaselinePromptInputs in;
    in.goal = task.goal;
    in.step = t;
    in.total_steps = task.length();
    in.grounding_context = cfg.use_tools ? baseline_grounding_context(features) : std::string(kNone);
    for (int i = 1; i < t; ++i) in.history.push_back(task.steps[static_cast<std::size_t>(i - 1)].label.kind);
    return build_baseline_prompt(in);
}

/// Teacher-forced memories for step t: a pure function of labels and
/// screens before t.
inline std::pair<ShortTermMemory, LongTermMemory> teacher_forced_memories(const Task& task, int t,
                                                                          const LongTermMemory& prev_ltm,
                                                                          const GroundingFeatures& prev_features,
                                                                          const MemoryCapacity& cap) {
    if (t == 1) return {ShortTermMemory{}, LongTermMemory{}};
    const auto& prev = task.steps[static_cast<std::size_t>(t - 2)];
    auto stm = stm_update(observation_of(task, t - 1), prev.label, Feedback{1.0, kNone});
    auto ltm = ltm_update(prev_ltm, stm, prev_features, t, cap);
    auto [done, rest] = progress_split(task.goal, t - 1, task.length());
    ltm.completed_subtasks = done;
    ltm.remaining_subtasks = rest;
    ltm.overall_progress = "steps completed: " + std::to_string(t - 1);
    return {stm, ltm};
}

// ---------------------------------------------------------------------------
// One step.

struct StepInputs {
    const Task& task;
    int t;
    ShortTermMemory stm;
    LongTermMemory ltm;
    /// Prior steps for the trajectory and global reflectors.
    std::vector<WindowEntry> history;
    /// Prior actions shown to the critic as the trajectory so far.
    std::vector<Action> prior_actions;
};

inline std::string trajectory_text(const std::vector<Action>& prior, const Action& proposal, int t) {
    std::string s;
    for (std::size_t i = 0; i < prior.size(); ++i) s += "Step " + std::to_string(i + 1) + ": " + render_action(prior[i]) + "\n";
    s += "Step " + std::to_string(t) + " (proposed): " + render_action(proposal);
    return s;
}

inline std::string ground_truth_text(const Task& task, int t) {
    const auto& step = task.steps[static_cast<std::size_t>(t - 1)];
    std::string s = "reference action: " + render_action(step.label) + "\n";
    s += t < task.length() ? "next screen: " + observation_of(task, t + 1) : std::string("next screen: end of workflow");
    return s;
}

inline StepRecord run_step(const StepInputs& in, const RunConfig& cfg, const Backends& b) {
    const Task& task = in.task;
    const int t = in.t;
    const int total = task.length();
    const auto& step = task.steps[static_cast<std::size_t>(t - 1)];
    const bool baseline = cfg.mode == RunMode::ZeroShotBaseline;
    const bool critic_on = cfg.critic_enabled && !baseline && b.critic;
    const auto screen = ScreenInput::from_step(step, screen_ref(task, t));

    StepRecord rec;
    rec.t = t;
    rec.label = step.label;

    std::vector<ToolOutput> base_outputs;
    if (cfg.use_tools) {
        auto calls = base_grounding_calls();
        for (std::size_t i = 0; i < calls.size(); ++i) {
            base_outputs.push_back({calls[i], static_cast<int>(i), b.tools.call(calls[i], screen)});
        }
    }
    rec.features = aggregate_grounding(base_outputs);

    auto stm = prompt_stm(in.stm, cfg);
    auto ltm = prompt_ltm(in.ltm, cfg);
    rec.stm_before = stm;
    rec.ltm_before = ltm;

    const int max_attempts = critic_on ? cfg.max_revisions + 1 : 1;
    std::string last_hint;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        PolicyRequest req;
        req.prompt = baseline ? baseline_prompt_for(task, t, cfg, rec.features)
                              : actor_prompt_for(task.goal, total, t, cfg, rec.features, stm, ltm);
        if (b.actor.capabilities().accepts_images) req.images.push_back(screen);
        req.params.seed = cfg.seed;
        req.sim = SimulationContext{cfg.seed, task.id, t, total, attempt, task.goal,
                                    baseline ? OutputFormat::ActionType : OutputFormat::ActorJson, step.label,
                                    std::nullopt, {}};

        ProposalRecord prop;
        prop.attempt = attempt;
        prop.prompt_sha256 = sha256_hex(req.prompt);

        Proposal proposal;
        try {
            proposal = propose_action(b.actor, req, cfg.repair_attempts);
        } catch (const Error& e) {
            rec.failed = true;
            rec.error = std::string("actor: ") + e.what();
            break;
        }
        prop.repairs_used = proposal.repairs_used;
        prop.action = proposal.output.action;

        GroundingFeatures step_features = rec.features;
        std::vector<std::string> tools_used;
        if (cfg.use_tools && !baseline) {
            auto exec = execute_tool_calls(proposal.output.reasoning.tool_calls, screen, b.tools,
                                           static_cast<int>(base_outputs.size()));
            prop.tool_results = exec.results;
            if (!exec.outputs.empty()) proposal.output.tool_results = exec.results;
            auto all = base_outputs;
            all.insert(all.end(), exec.outputs.begin(), exec.outputs.end());
            step_features = aggregate_grounding(std::move(all));
            for (const auto& c : proposal.output.reasoning.tool_calls) tools_used.push_back(c.tool);
        }
        prop.output = baseline ? nlohmann::ordered_json{{"action_type", to_string(prop.action.kind)}}
                               : actor_output_json(proposal.output);

        if (critic_on) {
            CriticPromptInputs ci;
            ci.goal = task.goal;
            ci.step = t;
            ci.target_output_json = prop.output.dump(2);
            ci.include_tools = cfg.use_tools;
            if (cfg.use_tools) ci.features = step_features;
            ci.stm = stm;
            ci.ltm = ltm;
            if (cfg.critic_sees_ground_truth) ci.ground_truth_after_action = ground_truth_text(task, t);
            ci.full_trajectory_so_far = trajectory_text(in.prior_actions, prop.action, t);

            PolicyRequest creq;
            creq.prompt = build_critic_prompt(ci);
            if (b.critic->capabilities().accepts_images) creq.images.push_back(screen);
            creq.params.seed = cfg.seed;
            creq.sim = SimulationContext{cfg.seed, task.id, t, total, attempt, task.goal, OutputFormat::CriticJson,
                                         std::nullopt, prop.action, tools_used};
            if (cfg.critic_sees_ground_truth) creq.sim.reference = step.label;
            try {
                prop.verdict = score_action(*b.critic, creq, prop.action, cfg.repair_attempts);
            } catch (const Error& e) {
                rec.failed = true;
                rec.error = std::string("critic: ") + e.what();
                rec.proposals.push_back(std::move(prop));
                break;
            }
            prop.accepted = accept(*prop.verdict, cfg.accept_threshold);
        } else {
            prop.accepted = true;
        }

        if (prop.accepted) {
            rec.accepted = prop.action;
            rec.proposals.push_back(std::move(prop));
            break;
        }

        last_hint = prop.verdict->hint_if_wrong;
        if (attempt + 1 < max_attempts) {
            // reflections update the working memories for the re-ask
            const auto& v = *prop.verdict;
            std::optional<Action> reference;
            if (cfg.critic_sees_ground_truth) reference = step.label;
            ReflectionDelta a = reflect_action(observation_of(task, t), std::nullopt, prop.action, v, reference);
            auto window = in.history;
            window.push_back({t, std::nullopt, v.completed_subtasks, v.remaining_subtasks});
            ReflectionDelta tr = reflect_trajectory(window, ltm, cfg.window, cfg.stall);
            std::tie(stm, ltm) = apply_reflection(stm, ltm, a, cfg.capacity);
            std::tie(stm, ltm) = apply_reflection(stm, ltm, tr, cfg.capacity);
            ReflectionDelta gl = reflect_global(window, task.goal, t == total, ltm);
            std::tie(stm, ltm) = apply_reflection(stm, ltm, gl, cfg.capacity);
            stm = prompt_stm(stm, cfg);
            ltm = prompt_ltm(ltm, cfg);
            prop.deltas = {a, tr, gl};
        }
        rec.proposals.push_back(std::move(prop));
    }

    rec.revisions = rec.proposals.empty() ? 0 : static_cast<int>(rec.proposals.size()) - 1;
    if (!rec.proposals.empty() && rec.proposals.back().verdict) {
        rec.feedback = rec.proposals.back().verdict->score;
    } else {
        rec.feedback = rec.accepted ? 1.0 : 0.0;
    }
    rec.critique = last_hint.empty() ? std::string(kNone) : last_hint;
    rec.stm_after = stm;
    rec.ltm_after = ltm;
    return rec;
}

// ---------------------------------------------------------------------------
// One task.

inline TrajectoryRecord run_task(const Task& task, const RunConfig& cfg, const Backends& b) {
    TrajectoryRecord tr;
    tr.task_id = task.id;
    tr.goal = task.goal;
    tr.category = task.category;
    tr.config_hash = config_hash(cfg);
    tr.mode = cfg.mode;
    tr.match_mode = cfg.match_mode;
    tr.total_steps = task.length();
    const int total = task.length();
    const bool free_running = cfg.mode == RunMode::FreeRunning;

    ShortTermMemory stm;
    LongTermMemory ltm;
    LongTermMemory gt_ltm;
    GroundingFeatures prev_features;
    std::vector<WindowEntry> history;
    std::vector<Action> prior;

    for (int t = 1; t <= total; ++t) {
        if (!free_running) {
            std::tie(stm, ltm) = teacher_forced_memories(task, t, gt_ltm, prev_features, cfg.capacity);
            gt_ltm = ltm;
            history.clear();
            prior.clear();
            for (int i = 1; i < t; ++i) {
                const auto& label = task.steps[static_cast<std::size_t>(i - 1)].label;
                auto [done, rest] = progress_split(task.goal, i, total);
                history.push_back({i, label, done, rest});
                prior.push_back(label);
            }
        }

        StepInputs in{task, t, stm, ltm, history, prior};
        auto rec = run_step(in, cfg, b);
        prev_features = rec.features;
        const bool failed = rec.failed;
        const bool accepted = rec.accepted.has_value();
        const bool correct = accepted && step_correct(*rec.accepted, rec.label, cfg.match_mode);

        if (free_running) {
            std::vector<std::string> done, rest;
            if (!rec.proposals.empty() && rec.proposals.back().verdict) {
                done = rec.proposals.back().verdict->completed_subtasks;
                rest = rec.proposals.back().verdict->remaining_subtasks;
            }
            if (accepted) {
                history.push_back({t, rec.accepted, done, rest});
                prior.push_back(*rec.accepted);
                // next-step memories from this step's outcome; in-step reflections carry over
                auto next_stm = stm_update(observation_of(task, t), *rec.accepted, Feedback{rec.feedback, rec.critique});
                auto next_ltm = ltm_update(rec.ltm_after, next_stm, rec.features, t + 1, cfg.capacity);
                if (!done.empty() || !rest.empty()) {
                    std::tie(std::ignore, next_ltm) =
                        apply_reflection(next_stm, next_ltm, TrajectoryReflection{done, rest, {}}, cfg.capacity);
                }
                stm = next_stm;
                ltm = next_ltm;
            }
        }
        tr.steps.push_back(std::move(rec));

        if (free_running && (failed || !accepted || !correct)) {
            tr.status = failed ? TaskStatus::Failed : TaskStatus::Terminated;
            break;
        }
    }
    tr.verifier = verify_steps(tr.steps, total, cfg.match_mode);
    return tr;
}

// ---------------------------------------------------------------------------
// Serialization.

inline nlohmann::ordered_json to_ordered(const nlohmann::json& j) { return nlohmann::ordered_json::parse(j.dump()); }

inline nlohmann::ordered_json action_json(const Action& a) { return to_ordered(nlohmann::json(a)); }

inline nlohmann::ordered_json step_record_json(const StepRecord& s) {
    using oj = nlohmann::ordered_json;
    oj j;
    j["t"] = s.t;
    j["label"] = action_json(s.label);
    j["features"] = to_ordered(nlohmann::json(s.features));
    j["memory_before"] = oj{{"short_term", stm_json(s.stm_before)}, {"long_term", ltm_json(s.ltm_before)}};
    auto props = oj::array();
    for (const auto& p : s.proposals) {
        oj pj;
        pj["attempt"] = p.attempt;
        pj["prompt_sha256"] = p.prompt_sha256;
        pj["repairs_used"] = p.repairs_used;
        pj["output"] = p.output;
        pj["action"] = action_json(p.action);
        pj["tool_results"] = to_ordered(p.tool_results);
        pj["verdict"] = p.verdict ? verdict_record_json(*p.verdict) : oj(nullptr);
        pj["accepted"] = p.accepted;
        auto deltas = oj::array();
        for (const auto& d : p.deltas) deltas.push_back(to_ordered(nlohmann::json(d)));
        pj["deltas"] = deltas;
        props.push_back(pj);
    }
    j["proposals"] = props;
    j["accepted"] = s.accepted ? action_json(*s.accepted) : oj(nullptr);
    j["revisions"] = s.revisions;
    j["feedback"] = s.feedback;
    j["critique"] = s.critique;
    j["memory_after"] = oj{{"short_term", stm_json(s.stm_after)}, {"long_term", ltm_json(s.ltm_after)}};
    j["failed"] = s.failed;
    if (s.failed) j["error"] = s.error;
    return j;
}

inline nlohmann::ordered_json trajectory_json(const TrajectoryRecord& r) {
    nlohmann::ordered_json j;
    j["format_version"] = kRunFormatVersion;
    j["task_id"] = r.task_id;
    j["goal"] = r.goal;
    j["category"] = to_string(r.category);
    j["config_hash"] = r.config_hash;
    j["mode"] = to_string(r.mode);
    j["match_mode"] = to_string(r.match_mode);
    j["total_steps"] = r.total_steps;
    j["executed_steps"] = r.steps.size();
    j["status"] = to_string(r.status);
    j["verifier"] = r.verifier;
    auto steps = nlohmann::ordered_json::array();
    for (const auto& s : r.steps) steps.push_back(step_record_json(s));
    j["steps"] = steps;
    return j;
}

inline CriticVerdict verdict_from_record(const nlohmann::json& j) {
    auto wire = j;
    double effective = wire.value("effective_score", -1.0);
    wire.erase("effective_score");
    auto v = parse_critic_output(wire.dump());
    if (effective >= 0.0) v.score = effective;
    return v;
}

/// Proposed actions; zero-shot proposals carry only a kind, so a bare
/// {kind} is read without the argument rules.
inline Action recorded_action(const nlohmann::json& j) {
    if (j.is_object() && j.size() == 1 && j.contains("kind") && j["kind"].is_string()) {
        return Action{parse_action_kind(j["kind"].get<std::string>())};
    }
    return j.get<Action>();
}

/// Stored proposal output in its emitted key order (plain json sorts keys).
inline nlohmann::ordered_json canonical_output(const nlohmann::json& j) {
    if (j.is_object() && j.size() == 1) {
        const auto& key = j.begin().key();
        if (key.rfind("Step ", 0) == 0) {
            try {
                return actor_output_json(parse_actor_output(j.dump(), std::stoi(key.substr(5))));
            } catch (const std::exception&) {
            }
        }
    }
    return nlohmann::ordered_json::parse(j.dump());
}

inline StepRecord step_record_from_json(const nlohmann::json& j) {
    StepRecord s;
    s.t = j.at("t").get<int>();
    s.label = j.at("label").get<Action>();
    s.features = j.at("features").get<GroundingFeatures>();
    s.stm_before = j.at("memory_before").at("short_term").get<ShortTermMemory>();
    s.ltm_before = j.at("memory_before").at("long_term").get<LongTermMemory>();
    s.stm_after = j.at("memory_after").at("short_term").get<ShortTermMemory>();
    s.ltm_after = j.at("memory_after").at("long_term").get<LongTermMemory>();
    for (const auto& pj : j.at("proposals")) {
        ProposalRecord p;
        p.attempt = pj.at("attempt").get<int>();
        p.prompt_sha256 = pj.at("prompt_sha256").get<std::string>();
        p.repairs_used = pj.at("repairs_used").get<int>();
        p.output = canonical_output(pj.at("output"));
        p.action = recorded_action(pj.at("action"));
        p.tool_results = pj.at("tool_results");
        if (!pj.at("verdict").is_null()) p.verdict = verdict_from_record(pj.at("verdict"));
        p.accepted = pj.at("accepted").get<bool>();
        for (const auto& d : pj.at("deltas")) p.deltas.push_back(d.get<ReflectionDelta>());
        s.proposals.push_back(std::move(p));
    }
    if (!j.at("accepted").is_null()) s.accepted = recorded_action(j.at("accepted"));
    s.revisions = j.at("revisions").get<int>();
    s.feedback = j.at("feedback").get<double>();
    s.critique = j.at("critique").get<std::string>();
    s.failed = j.at("failed").get<bool>();
    s.error = j.value("error", std::string{});
    return s;
}

inline TrajectoryRecord trajectory_from_json(const nlohmann::json& j) {
    try {
        TrajectoryRecord r;
        if (j.at("format_version").get<int>() != kRunFormatVersion) {
            throw Error(ErrorCode::SchemaViolation, "unsupported record format_version");
        }
        r.task_id = j.at("task_id").get<std::string>();
        r.goal = j.at("goal").get<std::string>();
        r.category = parse_category(j.at("category").get<std::string>());
        r.config_hash = j.at("config_hash").get<std::string>();
        r.mode = parse_run_mode(j.at("mode").get<std::string>());
        r.match_mode = parse_match_mode(j.at("match_mode").get<std::string>());
        r.total_steps = j.at("total_steps").get<int>();
        r.status = parse_task_status(j.at("status").get<std::string>());
        r.verifier = j.at("verifier").get<int>();
        for (const auto& s : j.at("steps")) r.steps.push_back(step_record_from_json(s));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("trajectory record: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Suite driver and run directory.

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRecordsDir = "records";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kFailuresFile = "failures.json";

struct TaskFailure {
    std::string task_id;
    std::string reason;
};

struct SuiteResult {
    std::vector<TrajectoryRecord> records;  // sorted by task id
    std::vector<TaskFailure> failures;      // sorted by task id
};

/// Runs every loadable, valid task with at most cfg.workers threads. A
/// non-reentrant backend forces a single worker. Records depend only on
/// (task, config), never on scheduling.
inline SuiteResult run_suite(const std::vector<SuiteEntry>& suite, const RunConfig& cfg, const Backends& b,
                             LengthBounds bounds = {}) {
    cfg.check();
    if (suite.empty()) throw Error(ErrorCode::InvalidArgument, "suite is empty");

    bool reentrant = b.actor.capabilities().reentrant && (!b.critic || b.critic->capabilities().reentrant);
    int workers = reentrant ? cfg.workers : 1;

    struct Slot {
        std::optional<TrajectoryRecord> record;
        std::optional<TaskFailure> failure;
    };
    std::vector<Slot> slots(suite.size());
    std::atomic<std::size_t> next{0};

    auto work = [&]() {
        for (std::size_t i = next++; i < suite.size(); i = next++) {
            const auto& entry = suite[i];
            if (!entry.task) {
                slots[i].failure = TaskFailure{entry.id, entry.load_error};
                continue;
            }
            auto report = validate_trajectory(*entry.task, bounds);
            if (!report.passed) {
                std::string reason = "validation:";
                for (const auto& v : report.violations) reason += " " + v.code;
                slots[i].failure = TaskFailure{entry.id, reason};
                continue;
            }
            try {
                slots[i].record = run_task(*entry.task, cfg, b);
            } catch (const std::exception& e) {
                slots[i].failure = TaskFailure{entry.id, e.what()};
            }
        }
    };

    std::vector<std::thread> pool;
    int n = std::min<int>(workers, static_cast<int>(suite.size()));
    for (int w = 1; w < n; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    SuiteResult out;
    for (auto& s : slots) {
        if (s.record) out.records.push_back(std::move(*s.record));
        if (s.failure) out.failures.push_back(std::move(*s.failure));
    }
    std::sort(out.records.begin(), out.records.end(),
              [](const auto& a, const auto& b2) { return a.task_id < b2.task_id; });
    std::sort(out.failures.begin(), out.failures.end(),
              [](const auto& a, const auto& b2) { return a.task_id < b2.task_id; });
    return out;
}

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct RunInfo {
    std::string suite_path;
    std::string started_at;
    std::string finished_at;
};

inline nlohmann::ordered_json failures_json(const std::vector<TaskFailure>& failures) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& f : failures) arr.push_back({{"task_id", f.task_id}, {"reason", f.reason}});
    return arr;
}

/// Writes manifest.json, records/<id>.json and failures.json.
inline void write_run_directory(const fs::path& dir, const SuiteResult& result, const RunConfig& cfg,
                                const Backends& b, const RunInfo& info) {
    fs::create_directories(dir / kRecordsDir);
    for (const auto& r : result.records) {
        write_file(dir / kRecordsDir / (r.task_id + ".json"), trajectory_json(r).dump(2) + "\n");
    }
    write_file(dir / kFailuresFile, failures_json(result.failures).dump(2) + "\n");

    nlohmann::ordered_json m;
    m["format_version"] = kRunFormatVersion;
    m["config"] = config_json(cfg);
    m["config_hash"] = config_hash(cfg);
    m["seed"] = cfg.seed;
    m["backends"] = {{"actor", b.actor.identity()},
                     {"critic", b.critic && cfg.critic_enabled ? nlohmann::ordered_json(b.critic->identity())
                                                               : nlohmann::ordered_json(nullptr)},
                     {"tools", b.tools.identity()}};
    m["critic_sees_ground_truth"] = cfg.critic_sees_ground_truth;
    m["suite"] = info.suite_path;
    m["started_at"] = info.started_at;
    m["finished_at"] = info.finished_at;
    int succeeded = 0;
    auto ids = nlohmann::ordered_json::array();
    for (const auto& r : result.records) {
        succeeded += r.verifier;
        ids.push_back(r.task_id);
    }
    m["counts"] = {{"tasks", result.records.size() + result.failures.size()},
                   {"records", result.records.size()},
                   {"succeeded", succeeded},
                   {"failed", result.failures.size()}};
    m["tasks"] = ids;
    write_file(dir / kManifestFile, m.dump(2) + "\n");
}

struct LoadedRun {
    nlohmann::json manifest;
    RunConfig config;
    std::vector<TrajectoryRecord> records;
    std::vector<std::string> missing;  // listed in the manifest, no record file
};

inline LoadedRun load_run_directory(const fs::path& dir) {
    auto mpath = dir / kManifestFile;
    if (!fs::is_regular_file(mpath)) throw Error(ErrorCode::MissingManifest, "no manifest.json in " + dir.string());
    LoadedRun run;
    try {
        run.manifest = nlohmann::json::parse(read_file(mpath));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedJson, mpath.string() + ": " + e.what());
    }
    run.config = config_from_json(run.manifest.at("config"));
    for (const auto& id : run.manifest.at("tasks")) {
        auto p = dir / kRecordsDir / (id.get<std::string>() + ".json");
        if (!fs::is_regular_file(p)) {
            run.missing.push_back(id.get<std::string>());
            continue;
        }
        try {
            run.records.push_back(trajectory_from_json(nlohmann::json::parse(read_file(p))));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::MalformedJson, p.string() + ": " + e.what());
        }
    }
    return run;
}

} // namespace flowcritic
