// flowcritic command-line entry point.
//
// Exit status: 0 success, 1 data violations (invalid tasks, missing records,
// failed tasks), 2 usage errors.

#include <flowcritic/backends.hpp>
#include <flowcritic/flowcritic.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace fc = flowcritic;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

/// Human lines on stdout, or one JSON object per event on stderr.
class Log {
public:
    bool json = false;

    void event(const std::string& name, nlohmann::ordered_json fields, const std::string& human) const {
        if (json) {
            nlohmann::ordered_json j;
            j["event"] = name;
            for (auto& [k, v] : fields.items()) j[k] = v;
            std::cerr << j.dump() << "\n";
        } else {
            std::cout << human << "\n";
        }
    }
};

int cmd_validate(const Log& log, const fc::fs::path& suite_dir, fc::LengthBounds bounds) {
    auto suite = fc::load_suite(suite_dir);
    int bad = 0;
    for (const auto& entry : suite) {
        if (!entry.task) {
            ++bad;
            log.event("task_invalid", {{"task_id", entry.id}, {"error", entry.load_error}},
                      "FAIL " + entry.id + ": " + entry.load_error);
            continue;
        }
        auto report = fc::validate_trajectory(*entry.task, bounds);
        if (report.passed) {
            log.event("task_valid", {{"task_id", entry.id}, {"steps", entry.task->length()}},
                      "ok   " + entry.id + " (" + std::to_string(entry.task->length()) + " steps)");
            continue;
        }
        ++bad;
        for (const auto& v : report.violations) {
            nlohmann::ordered_json f{{"task_id", entry.id}, {"code", v.code}, {"message", v.message}};
            if (v.step) f["step"] = *v.step;
            log.event("violation", f, "FAIL " + entry.id + ": " + v.code + ": " + v.message);
        }
    }
    log.event("validate_done", {{"tasks", suite.size()}, {"invalid", bad}},
              std::to_string(suite.size() - static_cast<std::size_t>(bad)) + "/" + std::to_string(suite.size()) +
                  " tasks valid");
    return bad == 0 ? kExitOk : kExitData;
}

int cmd_synth(const Log& log, const fc::SynthOptions& opt, const fc::fs::path& out) {
    auto suite = fc::generate_synthetic_suite(opt);
    for (const auto& task : suite) fc::write_task_bundle(task, out / task.id);
    log.event("synth_done", {{"tasks", suite.size()}, {"out", out.string()}},
              "wrote " + std::to_string(suite.size()) + " tasks to " + out.string());
    return kExitOk;
}

int cmd_run(const Log& log, const fc::fs::path& suite_dir, const std::optional<fc::fs::path>& config_path,
            const fc::fs::path& out, std::optional<int> workers) {
    fc::RunConfig cfg;
    if (config_path) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(fc::read_file(*config_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw fc::Error(fc::ErrorCode::Usage, config_path->string() + ": " + e.what());
        }
        cfg = fc::config_from_json(doc);
    }
    if (workers) cfg.workers = *workers;
    cfg.check();

    auto actor = fc::make_actor_backend(cfg.actor);
    auto critic = cfg.critic_enabled ? fc::make_critic_backend(cfg.critic, cfg.match_mode) : nullptr;
    auto tools = fc::make_tool_backend(cfg.tools);
    fc::Backends backends{*actor, critic.get(), *tools};

    auto suite = fc::load_suite(suite_dir);
    fc::RunInfo info{suite_dir.string(), fc::utc_timestamp(), {}};
    auto result = fc::run_suite(suite, cfg, backends);
    info.finished_at = fc::utc_timestamp();
    fc::write_run_directory(out, result, cfg, backends, info);
    auto hash = fc::config_hash(cfg);
    fc::write_file(out / fc::kMetricsFile,
                   fc::metrics_json(result.records, fc::task_infos(result.records), cfg.match_mode, hash).dump(2) + "\n");

    for (const auto& f : result.failures) {
        log.event("task_failed", {{"task_id", f.task_id}, {"reason", f.reason}}, "FAIL " + f.task_id + ": " + f.reason);
    }
    auto report = fc::compute_metrics(result.records, fc::task_infos(result.records), cfg.match_mode);
    log.event("run_done",
              {{"records", result.records.size()},
               {"failures", result.failures.size()},
               {"match_mode", fc::to_string(cfg.match_mode)},
               {"swa", report.swa()},
               {"ta", report.ta()}},
              "records " + std::to_string(result.records.size()) + ", failures " +
                  std::to_string(result.failures.size()) + ", SWA " + fc::format_fixed(report.swa()) + ", TA " +
                  fc::format_fixed(report.ta()) + " (" + std::string(fc::to_string(cfg.match_mode)) + ")");
    return result.failures.empty() ? kExitOk : kExitData;
}

/// Loads a run and reports integrity problems; returns nullopt when the run is unusable.
std::optional<fc::LoadedRun> load_checked(const Log& log, const fc::fs::path& run_dir) {
    auto run = fc::load_run_directory(run_dir);
    bool ok = true;
    for (const auto& id : run.missing) {
        log.event("missing_record", {{"task_id", id}}, "missing record: " + id);
        ok = false;
    }
    auto stored = run.manifest.value("config_hash", std::string{});
    if (stored != fc::config_hash(run.config)) {
        log.event("hash_mismatch", {{"stored", stored}, {"recomputed", fc::config_hash(run.config)}},
                  "manifest config_hash does not match its config");
        ok = false;
    }
    if (!ok) return std::nullopt;
    return run;
}

int cmd_score(const Log& log, const fc::fs::path& run_dir, const std::optional<std::string>& mode_name) {
    auto run = load_checked(log, run_dir);
    if (!run) return kExitData;
    auto mode = mode_name ? fc::parse_match_mode(*mode_name) : run->config.match_mode;
    auto report = fc::compute_metrics(run->records, fc::task_infos(run->records), mode, fc::config_hash(run->config));
    log.event("score",
              {{"match_mode", fc::to_string(mode)},
               {"swa", report.swa()},
               {"ta", report.ta()},
               {"steps_total", report.overall.steps_total},
               {"tasks_total", report.overall.tasks_total}},
              "SWA " + fc::format_fixed(report.swa()) + "  TA " + fc::format_fixed(report.ta()) + "  (" +
                  std::string(fc::to_string(mode)) + ", " + std::to_string(report.overall.tasks_total) + " tasks, " +
                  std::to_string(report.overall.steps_total) + " steps)");
    return kExitOk;
}

int cmd_export(const Log& log, const fc::fs::path& run_dir, const fc::fs::path& out, bool structured) {
    auto run = load_checked(log, run_dir);
    if (!run) return kExitData;
    auto summary = fc::export_run(*run, run_dir, out, fc::ExportOptions{structured});
    log.event("export_done",
              {{"records_in", summary.records_in}, {"records_kept", summary.records_kept}, {"samples", summary.samples}},
              "kept " + std::to_string(summary.records_kept) + "/" + std::to_string(summary.records_in) +
                  " records, wrote " + std::to_string(summary.samples) + " samples to " + out.string());
    return kExitOk;
}

int cmd_report(const Log& log, const fc::fs::path& run_dir, const fc::fs::path& csv,
               const std::optional<fc::fs::path>& json, const std::optional<std::string>& mode_name) {
    auto run = load_checked(log, run_dir);
    if (!run) return kExitData;
    auto mode = mode_name ? fc::parse_match_mode(*mode_name) : run->config.match_mode;
    auto report = fc::compute_metrics(run->records, fc::task_infos(run->records), mode, fc::config_hash(run->config));
    fc::emit_report(report, csv, json);
    log.event("report_done", {{"csv", csv.string()}, {"match_mode", fc::to_string(mode)}}, fc::report_csv(report));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowcritic: actor-critic rollouts, evaluation and export over GUI screenshot trajectories"};
    app.require_subcommand(1);
    Log log;
    app.add_flag("--log-json", log.json, "Structured JSON event lines on stderr");

    auto* validate = app.add_subcommand("validate", "Check a suite of task bundles");
    std::string validate_suite;
    fc::LengthBounds bounds;
    validate->add_option("suite", validate_suite, "Suite directory or single bundle")->required();
    validate->add_option("--min", bounds.low, "Minimum trajectory length");
    validate->add_option("--max", bounds.high, "Maximum trajectory length");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic suite");
    fc::SynthOptions synth_opt;
    double mean = 0.0;
    std::string synth_out;
    synth->add_option("--seed", synth_opt.seed, "Seed")->required();
    synth->add_option("--count", synth_opt.count, "Number of tasks")->required();
    synth->add_option("--min", synth_opt.min_length, "Minimum length")->required();
    synth->add_option("--max", synth_opt.max_length, "Maximum length")->required();
    auto* mean_opt = synth->add_option("--mean", mean, "Target mean length");
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* run = app.add_subcommand("run", "Run a suite and write a run directory");
    std::string run_suite, run_out, run_config;
    int workers = 1;
    run->add_option("--suite", run_suite, "Suite directory")->required();
    auto* config_opt = run->add_option("--config", run_config, "Run config (JSON)");
    run->add_option("--out", run_out, "Run directory")->required();
    auto* workers_opt = run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    const std::vector<std::string> modes = {"kind_only", "canonical_full"};
    auto* score = app.add_subcommand("score", "Recompute metrics from a run directory");
    std::string score_run, score_mode;
    score->add_option("--run", score_run, "Run directory")->required();
    auto* score_mode_opt = score->add_option("--mode", score_mode, "Match mode")->check(CLI::IsMember(modes));

    auto* exp = app.add_subcommand("export", "Write SFT samples from a teacher-forced run");
    std::string export_run, export_out;
    bool structured = false;
    exp->add_option("--run", export_run, "Run directory")->required();
    exp->add_option("--out", export_out, "Output directory")->required();
    exp->add_flag("--structured-targets", structured, "Use the full actor JSON as the target");

    auto* report = app.add_subcommand("report", "Emit CSV (and JSON) reports for a run");
    std::string report_run, report_csv, report_json, report_mode;
    report->add_option("--run", report_run, "Run directory")->required();
    report->add_option("--csv", report_csv, "CSV destination")->required();
    auto* report_json_opt = report->add_option("--json", report_json, "JSON destination");
    auto* report_mode_opt = report->add_option("--mode", report_mode, "Match mode")->check(CLI::IsMember(modes));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    auto opt_str = [](CLI::Option* o, const std::string& v) -> std::optional<std::string> {
        return o->count() ? std::optional<std::string>(v) : std::nullopt;
    };

    try {
        if (*validate) return cmd_validate(log, validate_suite, bounds);
        if (*synth) {
            if (mean_opt->count()) synth_opt.target_mean = mean;
            return cmd_synth(log, synth_opt, synth_out);
        }
        if (*run) {
            std::optional<fc::fs::path> cfg;
            if (config_opt->count()) cfg = run_config;
            return cmd_run(log, run_suite, cfg, run_out,
                           workers_opt->count() ? std::optional<int>(workers) : std::nullopt);
        }
        if (*score) return cmd_score(log, score_run, opt_str(score_mode_opt, score_mode));
        if (*exp) return cmd_export(log, export_run, export_out, structured);
        if (*report) {
            std::optional<fc::fs::path> json;
            if (report_json_opt->count()) json = report_json;
            return cmd_report(log, report_run, report_csv, json, opt_str(report_mode_opt, report_mode));
        }
    } catch (const fc::Error& e) {
        log.event("error", {{"code", fc::to_string(e.code())}, {"message", e.what()}}, std::string("error: ") + e.what());
        return e.code() == fc::ErrorCode::Usage || e.code() == fc::ErrorCode::InvalidRange ? kExitUsage : kExitData;
    }
    return kExitUsage;
}
