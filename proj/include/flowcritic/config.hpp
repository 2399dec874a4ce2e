#pragma once

#include "error.hpp"
#include "matching.hpp"
#include "memory.hpp"
#include "util.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace flowcritic {

enum class RunMode { TeacherForced, FreeRunning, ZeroShotBaseline };

inline std::string_view to_string(RunMode m) {
    switch (m) {
    case RunMode::TeacherForced: return "teacher_forced";
    case RunMode::FreeRunning: return "free_running";
    case RunMode::ZeroShotBaseline: return "zero_shot_baseline";
    }
    return "?";
}

inline RunMode parse_run_mode(std::string_view s) {
    if (s == "teacher_forced") return RunMode::TeacherForced;
    if (s == "free_running") return RunMode::FreeRunning;
    if (s == "zero_shot_baseline") return RunMode::ZeroShotBaseline;
    throw Error(ErrorCode::Usage, "unknown mode '" + std::string(s) + "'");
}

struct RunConfig {
    RunMode mode = RunMode::TeacherForced;
    double accept_threshold = 0.5;
    int window = 5;
    int stall = 3;
    int max_revisions = 3;
    int repair_attempts = 2;
    std::uint64_t seed = 0;
    /// Backend descriptors, e.g. {"type":"oracle"}, {"type":"noisy","flip_rate":0.3},
    /// {"type":"remote"}; resolved by make_*_backend in backends.hpp.
    nlohmann::json actor = {{"type", "oracle"}};
    nlohmann::json critic = {{"type", "oracle"}};
    nlohmann::json tools = {{"type", "mock"}};
    bool use_tools = true;
    bool use_stm = true;
    bool use_ltm = true;
    bool critic_enabled = true;
    /// Defaults to true only for the zero-shot baseline, whose prompt states it.
    bool expose_total_steps = false;
    bool critic_sees_ground_truth = true;
    MatchMode match_mode = MatchMode::CanonicalFull;
    MemoryCapacity capacity;
    int workers = 1;

    static RunConfig for_mode(RunMode mode) {
        RunConfig c;
        c.mode = mode;
        if (mode == RunMode::ZeroShotBaseline) {
            c.critic_enabled = false;
            c.expose_total_steps = true;
            c.match_mode = MatchMode::KindOnly;
        }
        return c;
    }

    void check() const {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::Usage, m); };
        if (max_revisions < 0) fail("max_revisions must be >= 0");
        if (repair_attempts < 0 || repair_attempts > 2) fail("repair_attempts must be in [0,2]");
        if (!(accept_threshold >= 0.0 && accept_threshold <= 1.0)) fail("accept_threshold must be in [0,1]");
        if (window < 1) fail("window must be >= 1");
        if (stall < 1) fail("stall must be >= 1");
        if (workers < 1) fail("workers must be >= 1");
        if (mode == RunMode::ZeroShotBaseline && critic_enabled) fail("zero_shot_baseline requires critic_enabled=false");
        for (const auto* d : {&actor, &critic, &tools}) {
            if (!d->is_object() || !d->contains("type") || !(*d)["type"].is_string()) {
                fail("backend descriptors must be objects with a string 'type'");
            }
        }
    }
};

/// Everything that can change results. Worker count is deliberately left
/// out: it never affects artifacts.
inline nlohmann::ordered_json config_json(const RunConfig& c, bool include_workers = true) {
    nlohmann::ordered_json j;
    j["mode"] = to_string(c.mode);
    j["accept_threshold"] = c.accept_threshold;
    j["window"] = c.window;
    j["stall"] = c.stall;
    j["max_revisions"] = c.max_revisions;
    j["repair_attempts"] = c.repair_attempts;
    j["seed"] = c.seed;
    j["actor"] = nlohmann::ordered_json::parse(c.actor.dump());
    j["critic"] = nlohmann::ordered_json::parse(c.critic.dump());
    j["tools"] = nlohmann::ordered_json::parse(c.tools.dump());
    j["use_tools"] = c.use_tools;
    j["use_stm"] = c.use_stm;
    j["use_ltm"] = c.use_ltm;
    j["critic_enabled"] = c.critic_enabled;
    j["expose_total_steps"] = c.expose_total_steps;
    j["critic_sees_ground_truth"] = c.critic_sees_ground_truth;
    j["match_mode"] = to_string(c.match_mode);
    j["capacity"] = {{"key_states", c.capacity.key_states}, {"known_pitfalls", c.capacity.known_pitfalls}};
    if (include_workers) j["workers"] = c.workers;
    return j;
}

/// Reads a config document. Missing fields keep their defaults (the mode's
/// defaults when "mode" is given); unknown fields are rejected.
inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Usage, "config must be a JSON object");
    static const std::vector<std::string> known = {
        "mode",        "accept_threshold", "window",          "stall",          "max_revisions",
        "repair_attempts", "seed",         "actor",           "critic",         "tools",
        "use_tools",   "use_stm",          "use_ltm",         "critic_enabled", "expose_total_steps",
        "critic_sees_ground_truth", "match_mode", "capacity", "workers"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw Error(ErrorCode::Usage, "unknown config field '" + key + "'");
        }
    }
    try {
        RunConfig c = RunConfig::for_mode(j.contains("mode") ? parse_run_mode(j["mode"].get<std::string>())
                                                             : RunMode::TeacherForced);
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
        };
        get("accept_threshold", c.accept_threshold);
        get("window", c.window);
        get("stall", c.stall);
        get("max_revisions", c.max_revisions);
        get("repair_attempts", c.repair_attempts);
        get("seed", c.seed);
        get("actor", c.actor);
        get("critic", c.critic);
        get("tools", c.tools);
        get("use_tools", c.use_tools);
        get("use_stm", c.use_stm);
        get("use_ltm", c.use_ltm);
        get("critic_enabled", c.critic_enabled);
        get("expose_total_steps", c.expose_total_steps);
        get("critic_sees_ground_truth", c.critic_sees_ground_truth);
        get("workers", c.workers);
        if (j.contains("match_mode")) c.match_mode = parse_match_mode(j["match_mode"].get<std::string>());
        if (j.contains("capacity")) {
            c.capacity.key_states = j["capacity"].value("key_states", c.capacity.key_states);
            c.capacity.known_pitfalls = j["capacity"].value("known_pitfalls", c.capacity.known_pitfalls);
        }
        c.check();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Usage, std::string("config: ") + e.what());
    }
}

/// sha256 over the canonical config without the worker count.
inline std::string config_hash(const RunConfig& c) { return sha256_hex(config_json(c, false).dump()); }

} // namespace flowcritic
