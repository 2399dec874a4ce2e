#pragma once

#include "action.hpp"
#include "error.hpp"
#include "grounding.hpp"
#include "memory.hpp"
#include "policy.hpp"
#include "prompts.hpp"
#include "protocol.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowcritic {

struct ScreenGrounding {
    std::string current_screen_state;
    std::vector<std::string> key_ui_elements;
    std::vector<std::string> relevant_affordances;
};

struct ActorReasoning {
    std::vector<ToolCall> tool_calls;
    std::string why_correct_and_safe;
    std::string why_aligns_with_goal;
    std::string why_alternatives_wrong;
};

/// predicted_next_action as it appears on the wire.
struct PredictedAction {
    std::string tool_call;
    std::string target;
    std::optional<std::string> target_id;
    nlohmann::json arguments = nlohmann::json::object();
};

struct ActorStepOutput {
    int step = 1;
    ScreenGrounding grounding;
    ShortTermMemory stm_echo;
    LongTermMemory ltm_echo;
    ActorReasoning reasoning;
    std::optional<nlohmann::json> tool_results;
    bool has_image = true;
    std::optional<std::string> image_data_uri;
    PredictedAction predicted;
    /// Validated semantic action derived from `predicted`.
    Action action;
};

// ---------------------------------------------------------------------------
// predicted_next_action <-> Action

/// Empty strings and nulls count as absent; anything else must be
/// applicable to the kind (validate_action).
inline Action action_from_prediction(const PredictedAction& p) {
    auto kind = try_parse_action_kind(p.tool_call);
    if (!kind) {
        throw ProtocolError(ErrorCode::UnknownActionKind,
                            "predicted_next_action.tool_call '" + p.tool_call + "' is not an available action",
                            "predicted_next_action.tool_call");
    }
    Action a{*kind};
    if (!trim(p.target).empty()) {
        a.target = p.target;
    } else if (p.target_id && !trim(*p.target_id).empty()) {
        a.target = *p.target_id;
    }
    const auto& args = p.arguments;
    try {
        if (args.contains("text_to_type") && !args["text_to_type"].is_null() &&
            !(args["text_to_type"].is_string() && args["text_to_type"].get<std::string>().empty())) {
            a.text = args["text_to_type"].get<std::string>();
        }
        if (args.contains("scroll_units") && !args["scroll_units"].is_null()) {
            a.scroll_units = args["scroll_units"].get<int>();
        }
        if (args.contains("coords") && !args["coords"].is_null()) a.coords = args["coords"].get<Point>();
        if (args.contains("region") && !args["region"].is_null()) a.region = args["region"].get<BoundingBox>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(ErrorCode::TypeMismatch, std::string("predicted_next_action.arguments: ") + e.what(),
                            "predicted_next_action.arguments");
    }
    try {
        validate_action(a);
    } catch (const Error& e) {
        throw ProtocolError(e.code(), e.detail(), "predicted_next_action");
    }
    return a;
}

inline PredictedAction prediction_from_action(const Action& a) {
    PredictedAction p;
    p.tool_call = std::string(to_string(a.kind));
    p.target = a.target.value_or("");
    nlohmann::json args = nlohmann::json::object();
    if (a.text) args["text_to_type"] = *a.text;
    if (a.scroll_units) args["scroll_units"] = *a.scroll_units;
    if (a.coords) args["coords"] = *a.coords;
    if (a.region) args["region"] = *a.region;
    p.arguments = std::move(args);
    return p;
}

// ---------------------------------------------------------------------------
// Wire form: {"Step N": {...}}

inline std::string step_key(int step) { return "Step " + std::to_string(step); }

inline nlohmann::ordered_json actor_output_json(const ActorStepOutput& out) {
    using oj = nlohmann::ordered_json;
    oj body;
    body["grounding"] = oj{{"current_screen_state", out.grounding.current_screen_state},
                           {"key_ui_elements", out.grounding.key_ui_elements},
                           {"relevant_affordances", out.grounding.relevant_affordances}};
    body["short_term_memory"] = oj{{"last_action", out.stm_echo.last_action},
                                   {"last_observation", out.stm_echo.last_observation},
                                   {"last_lesson", out.stm_echo.last_lesson}};
    body["long_term_memory"] = oj{{"overall_progress", out.ltm_echo.overall_progress},
                                  {"completed_subtasks", out.ltm_echo.completed_subtasks},
                                  {"remaining_subtasks", out.ltm_echo.remaining_subtasks},
                                  {"known_pitfalls", out.ltm_echo.known_pitfalls}};
    auto calls = oj::array();
    for (const auto& c : out.reasoning.tool_calls) {
        calls.push_back(oj{{"tool", c.tool}, {"args", oj::parse(c.args.dump())}});
    }
    body["reasoning"] = oj{{"tool_calls", calls},
                           {"why_next_action_is_correct_and_safe", out.reasoning.why_correct_and_safe},
                           {"why_it_aligns_with_user_goal", out.reasoning.why_aligns_with_goal},
                           {"why_alternatives_are_wrong_or_risky", out.reasoning.why_alternatives_wrong}};
    if (out.tool_results) body["tool_results"] = oj::parse(out.tool_results->dump());
    oj info{{"step_num", out.step}, {"has_image", out.has_image}};
    if (out.image_data_uri) info["image_data_uri"] = *out.image_data_uri;
    body["image_info"] = info;
    oj pred{{"tool_call", out.predicted.tool_call}, {"target", out.predicted.target}};
    if (out.predicted.target_id) pred["target_id"] = *out.predicted.target_id;
    pred["arguments"] = oj::parse(out.predicted.arguments.dump());
    body["predicted_next_action"] = pred;

    oj doc;
    doc[step_key(out.step)] = body;
    return doc;
}

/// Strict parse with no repair. Accepts {"Step N": body} or a one-element
/// list holding that object; rejects unknown keys anywhere in the record.
inline ActorStepOutput parse_actor_output(std::string_view text, int expected_step) {
    using namespace protocol;
    auto doc = parse_strict(text);
    if (doc.is_array()) {
        if (doc.size() != 1) {
            throw ProtocolError(ErrorCode::SchemaViolation, "expected exactly one step record, got " +
                                                                std::to_string(doc.size()));
        }
        doc = doc[0];
    }
    if (!doc.is_object() || doc.size() != 1) {
        throw ProtocolError(ErrorCode::SchemaViolation, "expected one object keyed by \"Step N\"");
    }
    const auto& [key, body] = *doc.items().begin();
    const std::string expected_key = step_key(expected_step);
    if (key.rfind("Step ", 0) != 0) {
        throw ProtocolError(ErrorCode::SchemaViolation, "top-level key must be \"Step N\", got '" + key + "'", key);
    }
    if (trim(key) != expected_key) {
        throw ProtocolError(ErrorCode::StepMismatch, "record is for '" + key + "', expected '" + expected_key + "'",
                            key);
    }
    if (!body.is_object()) throw ProtocolError(ErrorCode::TypeMismatch, "step record must be an object", key);

    only_keys(body,
              {"grounding", "short_term_memory", "long_term_memory", "reasoning", "tool_results", "image_info",
               "predicted_next_action"},
              "");

    ActorStepOutput out;
    out.step = expected_step;

    // predicted_next_action first so its absence is the reported error
    const auto& pred = require_object(body, "predicted_next_action", "");
    only_keys(pred, {"tool_call", "target", "target_id", "arguments"}, "predicted_next_action");
    out.predicted.tool_call = require_string(pred, "tool_call", "predicted_next_action");
    if (pred.contains("target")) {
        if (pred["target"].is_string()) {
            out.predicted.target = pred["target"].get<std::string>();
        } else if (!pred["target"].is_null()) {
            throw ProtocolError(ErrorCode::TypeMismatch, "'predicted_next_action.target' must be a string",
                                "predicted_next_action.target");
        }
    }
    if (pred.contains("target_id") && !pred["target_id"].is_null()) {
        if (!pred["target_id"].is_string()) {
            throw ProtocolError(ErrorCode::TypeMismatch, "'predicted_next_action.target_id' must be a string",
                                "predicted_next_action.target_id");
        }
        out.predicted.target_id = pred["target_id"].get<std::string>();
    }
    if (pred.contains("arguments")) {
        const auto& args = pred["arguments"];
        if (!args.is_object()) {
            throw ProtocolError(ErrorCode::TypeMismatch, "'predicted_next_action.arguments' must be an object",
                                "predicted_next_action.arguments");
        }
        only_keys(args, {"text_to_type", "scroll_units", "coords", "region", "extra"},
                  "predicted_next_action.arguments");
        out.predicted.arguments = args;
    }
    out.action = action_from_prediction(out.predicted);

    const auto& g = require_object(body, "grounding", "");
    only_keys(g, {"current_screen_state", "key_ui_elements", "relevant_affordances"}, "grounding");
    out.grounding.current_screen_state = require_string(g, "current_screen_state", "grounding");
    out.grounding.key_ui_elements = require_string_array(g, "key_ui_elements", "grounding");
    out.grounding.relevant_affordances = require_string_array(g, "relevant_affordances", "grounding");

    const auto& stm = require_object(body, "short_term_memory", "");
    only_keys(stm, {"last_action", "last_observation", "last_lesson", "last_feedback"}, "short_term_memory");
    out.stm_echo.last_action = require_string(stm, "last_action", "short_term_memory");
    out.stm_echo.last_observation = require_string(stm, "last_observation", "short_term_memory");
    out.stm_echo.last_lesson = require_string(stm, "last_lesson", "short_term_memory");

    const auto& ltm = require_object(body, "long_term_memory", "");
    only_keys(ltm, {"overall_progress", "completed_subtasks", "remaining_subtasks", "known_pitfalls", "key_states"},
              "long_term_memory");
    out.ltm_echo.overall_progress = require_string(ltm, "overall_progress", "long_term_memory");
    out.ltm_echo.completed_subtasks = require_string_array(ltm, "completed_subtasks", "long_term_memory");
    out.ltm_echo.remaining_subtasks = require_string_array(ltm, "remaining_subtasks", "long_term_memory");
    out.ltm_echo.known_pitfalls = require_string_array(ltm, "known_pitfalls", "long_term_memory");

    const auto& r = require_object(body, "reasoning", "");
    only_keys(r,
              {"tool_calls", "why_next_action_is_correct_and_safe", "why_it_aligns_with_user_goal",
               "why_alternatives_are_wrong_or_risky"},
              "reasoning");
    const auto& calls = require(r, "tool_calls", "reasoning");
    if (!calls.is_array()) {
        throw ProtocolError(ErrorCode::TypeMismatch, "'reasoning.tool_calls' must be an array", "reasoning.tool_calls");
    }
    for (const auto& c : calls) {
        if (!c.is_object()) {
            throw ProtocolError(ErrorCode::TypeMismatch, "tool call must be an object", "reasoning.tool_calls");
        }
        only_keys(c, {"tool", "args"}, "reasoning.tool_calls[]");
        ToolCall call{require_string(c, "tool", "reasoning.tool_calls[]"), nlohmann::json::object()};
        if (c.contains("args")) {
            if (!c["args"].is_object()) {
                throw ProtocolError(ErrorCode::TypeMismatch, "tool call args must be an object",
                                    "reasoning.tool_calls[].args");
            }
            call.args = c["args"];
        }
        out.reasoning.tool_calls.push_back(std::move(call));
    }
    out.reasoning.why_correct_and_safe = require_string(r, "why_next_action_is_correct_and_safe", "reasoning");
    out.reasoning.why_aligns_with_goal = require_string(r, "why_it_aligns_with_user_goal", "reasoning");
    out.reasoning.why_alternatives_wrong = require_string(r, "why_alternatives_are_wrong_or_risky", "reasoning");

    if (body.contains("tool_results") && !body["tool_results"].is_null()) out.tool_results = body["tool_results"];

    const auto& info = require_object(body, "image_info", "");
    only_keys(info, {"step_num", "has_image", "image_data_uri"}, "image_info");
    const auto& step_num = require(info, "step_num", "image_info");
    if (!step_num.is_number_integer()) {
        throw ProtocolError(ErrorCode::TypeMismatch, "'image_info.step_num' must be an integer", "image_info.step_num");
    }
    if (step_num.get<int>() != expected_step) {
        throw ProtocolError(ErrorCode::StepMismatch,
                            "image_info.step_num " + std::to_string(step_num.get<int>()) + " != " +
                                std::to_string(expected_step),
                            "image_info.step_num");
    }
    out.has_image = require_bool(info, "has_image", "image_info");
    if (info.contains("image_data_uri") && info["image_data_uri"].is_string()) {
        out.image_data_uri = info["image_data_uri"].get<std::string>();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompts

inline std::string format_available(const std::vector<ActionKind>& kinds) {
    std::string s;
    for (std::size_t i = 0; i < kinds.size(); ++i) s += (i ? ", " : "") + std::string(to_string(kinds[i]));
    return s;
}

inline std::vector<ActionKind> all_kinds() { return {kAllActionKinds.begin(), kAllActionKinds.end()}; }

struct ActorPromptInputs {
    std::string goal;
    int step = 1;
    std::optional<int> total_steps;
    bool include_tools = true;
    GroundingFeatures features;
    ShortTermMemory stm;
    LongTermMemory ltm;
    std::vector<ActionKind> available = all_kinds();
};

inline constexpr const char* kToolContextHeading = "TOOL_CONTEXT (grounding for the current screen):";
inline constexpr const char* kToolHintsHeading = "TOOL_EFFECTIVENESS_HINTS:";

inline std::string render_tool_context(const GroundingFeatures& f) {
    if (f.empty()) return {};
    nlohmann::json j = f;
    return std::string(kToolContextHeading) + "\n" + j.dump(2) + "\n\n";
}

inline std::string render_tool_hints(const GroundingFeatures& f) {
    if (f.failures.empty()) return {};
    std::string s = std::string(kToolHintsHeading) + "\n";
    for (const auto& e : f.failures) s += "- " + e.source.tool + ": " + e.error + "\n";
    return s + "\n";
}

/// Deterministic: identical inputs yield identical bytes.
inline std::string build_actor_prompt(const ActorPromptInputs& in) {
    if (in.step < 1) throw Error(ErrorCode::InvalidArgument, "step_num must be >= 1");
    std::map<std::string, std::string> user_values = {
        {"user_goal", in.goal},
        {"formatted_tools", format_available(in.available)},
        {"memory_context", render_memory_context(in.stm, in.ltm) + "\n"},
        {"tool_context", in.include_tools ? render_tool_context(in.features) : std::string{}},
        {"tool_effectiveness_hints", in.include_tools ? render_tool_hints(in.features) : std::string{}},
        {"step_budget", in.total_steps ? "STEP_BUDGET: this workflow has " + std::to_string(*in.total_steps) +
                                             " steps.\n"
                                       : std::string{}},
        {"step_num", std::to_string(in.step)},
    };
    auto system = fill_template(prompts::kActorSystem, {{"step_num", std::to_string(in.step)}});
    return system + "\n\n" + fill_template(prompts::kActorUser, user_values);
}

struct BaselinePromptInputs {
    std::string goal;
    int step = 1;
    int total_steps = 1;
    std::string grounding_context = kNone;
    std::vector<ActionKind> history;
    std::vector<ActionKind> available = all_kinds();
};

/// Compact grounding line for the zero-shot prompt: labels and OCR words only.
inline std::string baseline_grounding_context(const GroundingFeatures& f) {
    if (f.empty()) return kNone;
    std::string s;
    for (const auto& d : f.detections) s += (s.empty() ? "" : "; ") + std::string("element '") + d.detection.label + "'";
    for (const auto& t : f.tokens) s += (s.empty() ? "" : "; ") + std::string("text '") + t.token.word + "'";
    return s.empty() ? std::string(kNone) : s;
}

inline std::string build_baseline_prompt(const BaselinePromptInputs& in) {
    std::string history;
    for (std::size_t i = 0; i < in.history.size(); ++i) {
        history += (i ? ", " : "") + std::string(to_string(in.history[i]));
    }
    return fill_template(prompts::kBaseline,
                         {{"available_action_description", format_available(in.available)},
                          {"total_steps", std::to_string(in.total_steps)},
                          {"current_step", std::to_string(in.step)},
                          {"grounding_context", in.grounding_context},
                          {"history", history.empty() ? std::string(kNone) : history},
                          {"user_goal", in.goal}});
}

/// Zero-shot output is a bare action type. Strict form: the trimmed text is
/// exactly one kind token.
inline ActionKind parse_baseline_output(std::string_view text) {
    auto kind = try_parse_action_kind(text);
    if (!kind) {
        throw ProtocolError(ErrorCode::UnknownActionKind, "expected a bare action type, got '" + trim(text) + "'");
    }
    return *kind;
}

/// Lenient rung for the baseline: the first word that names a kind.
inline std::string extract_kind_token(std::string_view text) {
    std::string word;
    auto flush = [&]() -> std::optional<std::string> {
        if (!word.empty() && try_parse_action_kind(word)) return word;
        word.clear();
        return std::nullopt;
    };
    for (char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word.push_back(c);
        } else if (auto hit = flush()) {
            return *hit;
        }
    }
    if (auto hit = flush()) return *hit;
    return std::string(text);
}

// ---------------------------------------------------------------------------
// Proposal with the bounded repair ladder.

inline constexpr int kDefaultRepairAttempts = 2;

struct Proposal {
    ActorStepOutput output;
    std::string raw_text;
    int repairs_used = 0;
    std::vector<std::string> repair_errors;
};

/// Ladder: strict parse; (1) parse `relax(raw)` (fences and prose dropped);
/// (2) one re-ask with the error appended. `max_repairs` caps the rungs used
/// after the strict parse.
template <typename Parse, typename Relax>
auto with_repair(const PolicyBackend& backend, PolicyRequest request, int max_repairs, Parse parse, Relax relax)
    -> std::pair<decltype(parse(std::string_view{})), Proposal> {
    Proposal meta;
    meta.raw_text = backend.complete(request);
    try {
        return {parse(meta.raw_text), meta};
    } catch (const ProtocolError& e) {
        meta.repair_errors.push_back(e.what());
    }
    if (max_repairs >= 1) {
        meta.repairs_used = 1;
        try {
            return {parse(relax(meta.raw_text)), meta};
        } catch (const ProtocolError& e) {
            meta.repair_errors.push_back(e.what());
        }
    }
    if (max_repairs >= 2) {
        meta.repairs_used = 2;
        request.prompt += fill_template(prompts::kRepairSuffix, {{"error", meta.repair_errors.back()}});
        request.sim.attempt += 1000;  // re-asks draw from a separate stream
        meta.raw_text = backend.complete(request);
        try {
            return {parse(relax(meta.raw_text)), meta};
        } catch (const ProtocolError& e) {
            meta.repair_errors.push_back(e.what());
        }
    }
    throw ProtocolError(ErrorCode::Unrepairable, "output unusable after " + std::to_string(meta.repairs_used) +
                                                     " repair attempt(s): " + meta.repair_errors.back());
}

inline Proposal propose_action(const PolicyBackend& backend, const PolicyRequest& request,
                               int max_repairs = kDefaultRepairAttempts) {
    const int step = request.sim.step;
    if (request.sim.format == OutputFormat::ActionType) {
        auto [kind, meta] = with_repair(backend, request, max_repairs, parse_baseline_output, extract_kind_token);
        meta.output.step = step;
        meta.output.action = Action{kind};
        meta.output.predicted.tool_call = std::string(to_string(kind));
        return meta;
    }
    auto [output, meta] = with_repair(
        backend, request, max_repairs, [step](std::string_view text) { return parse_actor_output(text, step); },
        protocol::strip_to_json);
    meta.output = std::move(output);
    return meta;
}

// ---------------------------------------------------------------------------
// Tool execution for calls the actor requested.

struct ToolExecution {
    nlohmann::json results = nlohmann::json::object();
    std::vector<ToolOutput> outputs;
};

/// Runs every requested call; unsupported tools become {ok:false,
/// error:"unsupported"} entries without reaching the backend. Results are
/// keyed by tool name, with "#n" suffixes for repeated tools.
inline ToolExecution execute_tool_calls(const std::vector<ToolCall>& calls, const ScreenInput& screen,
                                        const ToolBackend& tools, int first_call_index = 0) {
    ToolExecution exec;
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        const auto& call = calls[i];
        ToolResponse response = is_supported_tool(call.tool) ? tools.call(call, screen)
                                                             : ToolResponse::failure("unsupported");
        auto n = ++seen[call.tool];
        auto key = n == 1 ? call.tool : call.tool + "#" + std::to_string(n);
        auto wire = response.to_wire();
        // crops travel as references in results; pixels stay out of prompts
        if (wire["result"].contains("image")) wire["result"].erase("image");
        exec.results[key] = wire;
        exec.outputs.push_back({call, first_call_index + static_cast<int>(i), std::move(response)});
    }
    return exec;
}

} // namespace flowcritic
