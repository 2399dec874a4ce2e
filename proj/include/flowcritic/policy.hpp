#pragma once

#include "action.hpp"
#include "grounding.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowcritic {

/// What the runtime expects back, so scripted backends can answer in kind.
enum class OutputFormat { ActorJson, ActionType, CriticJson };

/// Out-of-band simulation facts. Remote backends never see these; scripted
/// backends use them in place of a model. Nothing here is rendered into a
/// prompt.
struct SimulationContext {
    std::uint64_t seed = 0;
    std::string task_id;
    int step = 1;
    int total_steps = 1;
    int attempt = 0;
    std::string goal;
    OutputFormat format = OutputFormat::ActorJson;
    /// Ground-truth label for this step (present only when the active mode grants it).
    std::optional<Action> reference;
    /// The proposal under review (critic requests only).
    std::optional<Action> proposal;
    /// Requested tools the actor attempted (critic requests only).
    std::vector<std::string> tools_used;
};

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 2048;
    std::optional<std::uint64_t> seed;
};

struct PolicyRequest {
    std::string prompt;
    std::vector<ScreenInput> images;
    GenerationParams params;
    SimulationContext sim;
};

struct PolicyCapabilities {
    bool accepts_images = false;
    bool reentrant = true;
};

/// Text-in, text-out model contract shared by actor and critic roles.
class PolicyBackend {
public:
    virtual ~PolicyBackend() = default;
    virtual std::string identity() const = 0;
    virtual PolicyCapabilities capabilities() const { return {}; }
    /// Throws Error(Transport) when the backend cannot be reached.
    virtual std::string complete(const PolicyRequest& request) const = 0;
};

/// Single-pass {placeholder} substitution; unknown braces are left alone and
/// substituted values are never rescanned.
inline std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto key = std::string(tmpl.substr(i + 1, close - i - 1));
                auto it = values.find(key);
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

} // namespace flowcritic
