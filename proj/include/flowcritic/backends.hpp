#pragma once

// Backend descriptors from run configs, e.g.
//   {"type": "noisy", "flip_rate": 0.3}
//   {"type": "faulty", "faults": [{"task": "syn0003", "step": 4}], "attempts": 1}
//   {"type": "remote"}                       (MODEL_ENDPOINT / MODEL_API_KEY)
//   {"type": "remote", "endpoint": "http://127.0.0.1:8800/tools"}

#include "grounding.hpp"
#include "matching.hpp"
#include "policy.hpp"
#include "remote.hpp"
#include "scripted.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>

namespace flowcritic {

inline std::string descriptor_type(const nlohmann::json& d) {
    if (!d.is_object() || !d.contains("type") || !d["type"].is_string()) {
        throw Error(ErrorCode::Usage, "backend descriptor needs a string 'type': " + d.dump());
    }
    return d["type"].get<std::string>();
}

inline std::unique_ptr<PolicyBackend> make_remote_policy(const nlohmann::json& d) {
    if (d.contains("endpoint")) {
        return std::make_unique<HttpPolicyBackend>(d["endpoint"].get<std::string>(), env_value(kModelApiKeyEnv));
    }
    return HttpPolicyBackend::from_environment();
}

inline std::unique_ptr<PolicyBackend> make_actor_backend(const nlohmann::json& d) {
    auto type = descriptor_type(d);
    if (type == "remote") return make_remote_policy(d);
    ScriptedActorOptions opt;
    try {
        if (type == "oracle") {
            opt.kind = ScriptedActorKind::Oracle;
        } else if (type == "noisy") {
            opt.kind = ScriptedActorKind::Noisy;
            opt.flip_rate = d.value("flip_rate", 0.3);
            if (!(opt.flip_rate >= 0.0 && opt.flip_rate <= 1.0)) throw Error(ErrorCode::Usage, "flip_rate must be in [0,1]");
        } else if (type == "random") {
            opt.kind = ScriptedActorKind::Random;
        } else if (type == "always_wrong") {
            opt.kind = ScriptedActorKind::AlwaysWrong;
        } else if (type == "faulty") {
            opt.kind = ScriptedActorKind::Faulty;
            for (const auto& f : d.at("faults")) opt.faults.insert({f.at("task").get<std::string>(), f.at("step").get<int>()});
            opt.fault_attempts = d.value("attempts", -1);
        } else if (type == "prose") {
            opt.kind = ScriptedActorKind::Prose;
        } else {
            throw Error(ErrorCode::Usage, "unknown actor backend type '" + type + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Usage, std::string("actor descriptor: ") + e.what());
    }
    return std::make_unique<ScriptedActor>(opt);
}

inline std::unique_ptr<PolicyBackend> make_critic_backend(const nlohmann::json& d, MatchMode mode) {
    auto type = descriptor_type(d);
    if (type == "oracle") return std::make_unique<ScriptedCritic>(mode);
    if (type == "remote") return make_remote_policy(d);
    throw Error(ErrorCode::Usage, "unknown critic backend type '" + type + "'");
}

inline std::unique_ptr<ToolBackend> make_tool_backend(const nlohmann::json& d) {
    auto type = descriptor_type(d);
    if (type == "mock") return std::make_unique<MockToolBackend>(d.value("template_floor", kDefaultTemplateFloor));
    if (type == "remote") {
        if (d.contains("endpoint")) return std::make_unique<HttpToolBackend>(d["endpoint"].get<std::string>());
        return HttpToolBackend::from_environment();
    }
    throw Error(ErrorCode::Usage, "unknown tool backend type '" + type + "'");
}

} // namespace flowcritic
