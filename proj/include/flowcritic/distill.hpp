#pragma once

#include "action.hpp"
#include "config.hpp"
#include "rollout.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace flowcritic {

struct SFTSample {
    std::string task_id;
    int step = 0;
    std::string prompt;
    std::vector<std::string> images;
    std::string target;
    nlohmann::ordered_json metadata;
};

/// True when the record is a verified success whose every step carries an
/// accepting verdict (possibly after revision).
inline bool is_successful(const TrajectoryRecord& r) {
    if (r.verifier != 1 || static_cast<int>(r.steps.size()) != r.total_steps) return false;
    for (const auto& s : r.steps) {
        if (!s.accepted || s.proposals.empty()) return false;
        const auto& last = s.proposals.back();
        if (!last.accepted || !last.verdict) return false;
    }
    return true;
}

inline std::vector<TrajectoryRecord> filter_successful(const std::vector<TrajectoryRecord>& records) {
    std::vector<TrajectoryRecord> kept;
    for (const auto& r : records) {
        if (r.mode != RunMode::TeacherForced) {
            throw Error(ErrorCode::WrongMode, "record " + r.task_id + " comes from a " + std::string(to_string(r.mode)) +
                                                  " run; export needs teacher_forced records");
        }
        if (is_successful(r)) kept.push_back(r);
    }
    return kept;
}

struct ExportOptions {
    /// Emit the accepted proposal's full JSON instead of the canonical action.
    bool structured_targets = false;
};

/// One sample per step, with the actor prompt rebuilt from the persisted
/// snapshots and checked against the digest of the prompt actually sent.
inline std::vector<SFTSample> emit_sft_samples(const TrajectoryRecord& r, const RunConfig& cfg,
                                               const ExportOptions& opt = {}) {
    if (static_cast<int>(r.steps.size()) != r.total_steps) {
        throw Error(ErrorCode::SnapshotGap, r.task_id + ": " + std::to_string(r.steps.size()) + " of " +
                                                std::to_string(r.total_steps) + " steps recorded");
    }
    std::vector<SFTSample> out;
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        const auto& s = r.steps[i];
        if (s.t != static_cast<int>(i) + 1 || s.proposals.empty() || !s.accepted) {
            throw Error(ErrorCode::SnapshotGap, r.task_id + ": step " + std::to_string(i + 1) + " is incomplete");
        }
        auto prompt = actor_prompt_for(r.goal, r.total_steps, s.t, cfg, s.features, s.stm_before, s.ltm_before);
        if (sha256_hex(prompt) != s.proposals.front().prompt_sha256) {
            throw Error(ErrorCode::SnapshotGap,
                        r.task_id + ": step " + std::to_string(s.t) + " prompt does not reproduce from snapshots");
        }
        const auto& final_proposal = s.proposals.back();

        SFTSample sample;
        sample.task_id = r.task_id;
        sample.step = s.t;
        sample.prompt = std::move(prompt);
        sample.images = {r.task_id + "/" + image_name(s.t)};
        sample.target = opt.structured_targets ? final_proposal.output.dump() : render_action(*s.accepted);

        nlohmann::ordered_json meta;
        meta["task_id"] = r.task_id;
        meta["step"] = s.t;
        meta["total_steps"] = r.total_steps;
        meta["memory"] = {{"short_term", stm_json(s.stm_before)}, {"long_term", ltm_json(s.ltm_before)}};
        meta["tool_results"] = to_ordered(final_proposal.tool_results);
        meta["feedback"] = s.stm_before.last_feedback ? nlohmann::ordered_json(*s.stm_before.last_feedback)
                                                      : nlohmann::ordered_json(nullptr);
        meta["config_hash"] = r.config_hash;
        meta["revisions_used"] = s.revisions;
        sample.metadata = std::move(meta);
        out.push_back(std::move(sample));
    }
    return out;
}

inline nlohmann::ordered_json sample_json(const SFTSample& s) {
    nlohmann::ordered_json j;
    j["prompt"] = s.prompt;
    j["images"] = s.images;
    j["target"] = s.target;
    j["metadata"] = s.metadata;
    return j;
}

inline void sort_samples(std::vector<SFTSample>& samples) {
    std::sort(samples.begin(), samples.end(), [](const SFTSample& a, const SFTSample& b) {
        return a.task_id != b.task_id ? a.task_id < b.task_id : a.step < b.step;
    });
}

/// JSONL, one sample per line, sorted by (task id, step).
inline void write_dataset(std::vector<SFTSample> samples, const fs::path& destination) {
    if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no samples to write");
    sort_samples(samples);
    std::string body;
    for (const auto& s : samples) body += sample_json(s).dump() + "\n";
    write_file(destination, body);
}

struct ExportSummary {
    std::size_t records_in = 0;
    std::size_t records_kept = 0;
    std::size_t samples = 0;
};

inline constexpr const char* kDatasetFile = "sft.jsonl";
inline constexpr const char* kDatasetCard = "dataset_card.json";

/// Filters a loaded run and writes sft.jsonl plus dataset_card.json into `out_dir`.
inline ExportSummary export_run(const LoadedRun& run, const fs::path& source, const fs::path& out_dir,
                                const ExportOptions& opt = {}) {
    if (run.config.mode != RunMode::TeacherForced) {
        throw Error(ErrorCode::WrongMode, "export needs a teacher_forced run, got " +
                                              std::string(to_string(run.config.mode)));
    }
    auto kept = filter_successful(run.records);
    std::vector<SFTSample> samples;
    for (const auto& r : kept) {
        auto s = emit_sft_samples(r, run.config, opt);
        samples.insert(samples.end(), s.begin(), s.end());
    }
    ExportSummary summary{run.records.size(), kept.size(), samples.size()};
    if (!samples.empty()) {
        write_dataset(samples, out_dir / kDatasetFile);
    } else {
        write_file(out_dir / kDatasetFile, "");
    }

    nlohmann::ordered_json card;
    card["format_version"] = kRunFormatVersion;
    card["source_run"] = source.lexically_normal().string();
    card["source_config_hash"] = config_hash(run.config);
    card["filters"] = {{"mode", "teacher_forced"}, {"verifier", 1}, {"every_step_critic_accepted", true}};
    card["counts"] = {{"records_in", summary.records_in},
                      {"records_kept", summary.records_kept},
                      {"samples", summary.samples}};
    card["target_format"] = opt.structured_targets ? "actor_step_output_json" : "canonical_action";
    card["fields"] = {"prompt", "images", "target", "metadata"};
    card["objective"] = "negative log-likelihood of target given prompt and images, averaged over samples";
    write_file(out_dir / kDatasetCard, card.dump(2) + "\n");
    return summary;
}

} // namespace flowcritic
