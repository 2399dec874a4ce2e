#pragma once

#include "matching.hpp"
#include "rollout.hpp"
#include "task.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace flowcritic {

/// What the evaluator needs to know about a task besides its record.
struct TaskInfo {
    std::string id;
    Category category = Category::Synthetic;
    int total_steps = 0;

    static TaskInfo of(const Task& t) { return {t.id, t.category, t.length()}; }
    static TaskInfo of(const TrajectoryRecord& r) { return {r.task_id, r.category, r.total_steps}; }
};

inline std::vector<TaskInfo> task_infos(const std::vector<Task>& tasks) {
    std::vector<TaskInfo> out;
    for (const auto& t : tasks) out.push_back(TaskInfo::of(t));
    return out;
}

inline std::vector<TaskInfo> task_infos(const std::vector<TrajectoryRecord>& records) {
    std::vector<TaskInfo> out;
    for (const auto& r : records) out.push_back(TaskInfo::of(r));
    return out;
}

/// Per-step correctness over the task's full length; steps never executed
/// count as wrong.
inline std::vector<bool> step_outcomes(const TrajectoryRecord& r, int total_steps, MatchMode mode) {
    std::vector<bool> out(static_cast<std::size_t>(total_steps), false);
    for (const auto& s : r.steps) {
        if (s.t < 1 || s.t > total_steps) continue;
        out[static_cast<std::size_t>(s.t - 1)] = s.accepted && step_correct(*s.accepted, s.label, mode);
    }
    return out;
}

inline int verify_task(const TrajectoryRecord& r, const TaskInfo& task, MatchMode mode) {
    if (r.task_id != task.id) {
        throw Error(ErrorCode::MismatchedIds, "record " + r.task_id + " does not belong to task " + task.id);
    }
    return verify_steps(r.steps, task.total_steps, mode);
}

inline int verify_task(const TrajectoryRecord& r, const Task& task, MatchMode mode) {
    return verify_task(r, TaskInfo::of(task), mode);
}

// ---------------------------------------------------------------------------

inline constexpr std::array<const char*, 4> kLengthBuckets = {"<10", "10-15", "16-20", ">20"};

/// Inclusive upper edges: <=9, 10-15, 16-20, >=21.
inline std::string length_bucket(int total_steps) {
    if (total_steps <= 9) return kLengthBuckets[0];
    if (total_steps <= 15) return kLengthBuckets[1];
    if (total_steps <= 20) return kLengthBuckets[2];
    return kLengthBuckets[3];
}

struct Counts {
    long steps_total = 0;
    long steps_correct = 0;
    long tasks_total = 0;
    long tasks_correct = 0;

    void add(const std::vector<bool>& outcomes) {
        long correct = 0;
        for (bool b : outcomes) correct += b ? 1 : 0;
        steps_total += static_cast<long>(outcomes.size());
        steps_correct += correct;
        tasks_total += 1;
        tasks_correct += correct == static_cast<long>(outcomes.size()) ? 1 : 0;
    }

    std::optional<double> swa() const {
        if (steps_total == 0) return std::nullopt;
        return 100.0 * static_cast<double>(steps_correct) / static_cast<double>(steps_total);
    }

    std::optional<double> ta() const {
        if (tasks_total == 0) return std::nullopt;
        return 100.0 * static_cast<double>(tasks_correct) / static_cast<double>(tasks_total);
    }
};

struct MetricsReport {
    MatchMode match_mode = MatchMode::CanonicalFull;
    std::string config_hash;
    Counts overall;
    std::map<std::string, Counts> per_category;
    std::map<std::string, Counts> per_length_bucket;

    double swa() const { return overall.swa().value_or(0.0); }
    double ta() const { return overall.ta().value_or(0.0); }
};

/// Streaming accumulator: one task at a time, no retained records.
class MetricsAccumulator {
public:
    explicit MetricsAccumulator(MatchMode mode, std::string config_hash = {}) {
        report_.match_mode = mode;
        report_.config_hash = std::move(config_hash);
        for (const auto* b : kLengthBuckets) report_.per_length_bucket[b];
    }

    void add(const TrajectoryRecord& r, const TaskInfo& task) {
        if (r.task_id != task.id) {
            throw Error(ErrorCode::MismatchedIds, "record " + r.task_id + " paired with task " + task.id);
        }
        auto outcomes = step_outcomes(r, task.total_steps, report_.match_mode);
        report_.overall.add(outcomes);
        report_.per_category[std::string(to_string(task.category))].add(outcomes);
        report_.per_length_bucket[length_bucket(task.total_steps)].add(outcomes);
    }

    const MetricsReport& report() const { return report_; }

private:
    MetricsReport report_;
};

/// Pairs records with tasks by id; both sides must list the same ids once.
inline MetricsReport compute_metrics(const std::vector<TrajectoryRecord>& records, const std::vector<TaskInfo>& tasks,
                                     MatchMode mode, std::string config_hash = {}) {
    std::map<std::string, const TaskInfo*> by_id;
    for (const auto& t : tasks) {
        if (!by_id.emplace(t.id, &t).second) throw Error(ErrorCode::MismatchedIds, "duplicate task id " + t.id);
    }
    if (records.size() != tasks.size()) {
        throw Error(ErrorCode::MismatchedIds, std::to_string(records.size()) + " records for " +
                                                  std::to_string(tasks.size()) + " tasks");
    }
    std::set<std::string> seen;
    MetricsAccumulator acc(mode, std::move(config_hash));
    for (const auto& r : records) {
        auto it = by_id.find(r.task_id);
        if (it == by_id.end()) throw Error(ErrorCode::MismatchedIds, "record " + r.task_id + " has no task");
        if (!seen.insert(r.task_id).second) throw Error(ErrorCode::MismatchedIds, "duplicate record " + r.task_id);
        acc.add(r, *it->second);
    }
    return acc.report();
}

inline double compute_swa(const std::vector<TrajectoryRecord>& records, const std::vector<TaskInfo>& tasks,
                          MatchMode mode) {
    return compute_metrics(records, tasks, mode).swa();
}

inline double compute_ta(const std::vector<TrajectoryRecord>& records, const std::vector<TaskInfo>& tasks,
                         MatchMode mode) {
    return compute_metrics(records, tasks, mode).ta();
}

inline std::map<std::string, Counts> bucket_by_length(const std::vector<TrajectoryRecord>& records,
                                                      const std::vector<TaskInfo>& tasks, MatchMode mode) {
    return compute_metrics(records, tasks, mode).per_length_bucket;
}

// ---------------------------------------------------------------------------
// Emission

inline nlohmann::ordered_json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(std::stod(format_fixed(*v, 2))) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json counts_json(const Counts& c) {
    return {{"swa", optional_number(c.swa())},
            {"ta", optional_number(c.ta())},
            {"steps_total", c.steps_total},
            {"steps_correct", c.steps_correct},
            {"tasks_total", c.tasks_total},
            {"tasks_correct", c.tasks_correct}};
}

inline nlohmann::ordered_json report_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["match_mode"] = to_string(r.match_mode);
    j["config_hash"] = r.config_hash;
    j["overall"] = counts_json(r.overall);
    nlohmann::ordered_json cats = nlohmann::ordered_json::object();
    for (const auto& [k, c] : r.per_category) cats[k] = counts_json(c);
    j["per_category"] = cats;
    nlohmann::ordered_json buckets = nlohmann::ordered_json::object();
    for (const auto* b : kLengthBuckets) buckets[b] = counts_json(r.per_length_bucket.at(b));
    j["per_length_bucket"] = buckets;
    return j;
}

/// Both match modes side by side; `primary` is the run's configured mode.
inline nlohmann::ordered_json metrics_json(const std::vector<TrajectoryRecord>& records,
                                           const std::vector<TaskInfo>& tasks, MatchMode primary,
                                           const std::string& config_hash) {
    nlohmann::ordered_json j;
    j["format_version"] = kRunFormatVersion;
    j["config_hash"] = config_hash;
    j["primary_match_mode"] = to_string(primary);
    j["modes"] = {{"kind_only", report_json(compute_metrics(records, tasks, MatchMode::KindOnly, config_hash))},
                  {"canonical_full",
                   report_json(compute_metrics(records, tasks, MatchMode::CanonicalFull, config_hash))}};
    return j;
}

inline std::string csv_number(const std::optional<double>& v) { return v ? format_fixed(*v, 2) : std::string{}; }

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

/// Rows: overall, one per category (sorted), then the four length buckets.
inline std::string report_csv(const MetricsReport& r) {
    std::string out = "scope,swa,ta,n\n";
    auto row = [&](const std::string& scope, const Counts& c) {
        out += csv_field(scope) + "," + csv_number(c.swa()) + "," + csv_number(c.ta()) + "," +
               std::to_string(c.tasks_total) + "\n";
    };
    row("overall", r.overall);
    for (const auto& [k, c] : r.per_category) row("category:" + k, c);
    for (const auto* b : kLengthBuckets) row(std::string("length:") + b, r.per_length_bucket.at(b));
    return out;
}

inline void emit_report(const MetricsReport& r, const fs::path& csv_path, const std::optional<fs::path>& json_path = {}) {
    try {
        write_file(csv_path, report_csv(r));
        if (json_path) write_file(*json_path, report_json(r).dump(2) + "\n");
    } catch (const std::exception& e) {
        throw Error(ErrorCode::Io, e.what());
    }
}

} // namespace flowcritic
