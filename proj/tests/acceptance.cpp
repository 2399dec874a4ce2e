// Property-based acceptance checks. One PASS/FAIL line per criterion; the
// exit status is nonzero when any criterion fails.

#include <flowcritic/flowcritic.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <unistd.h>

namespace fc = flowcritic;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = fc::fs::temp_directory_path() / ("flowcritic_accept_" + tag + "_" + std::to_string(::getpid()));
        fc::fs::remove_all(path_);
        fc::fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fc::fs::remove_all(path_, ec);
    }
    fc::fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fc::fs::path path_;
};

class RecordingBackend final : public fc::PolicyBackend {
public:
    explicit RecordingBackend(const fc::PolicyBackend& inner) : inner_(inner) {}
    std::string identity() const override { return inner_.identity(); }
    fc::PolicyCapabilities capabilities() const override { return inner_.capabilities(); }
    std::string complete(const fc::PolicyRequest& request) const override {
        {
            std::lock_guard lock(mutex_);
            prompts_.push_back(request.prompt);
        }
        return inner_.complete(request);
    }
    std::vector<std::string> prompts() const {
        std::lock_guard lock(mutex_);
        return prompts_;
    }

private:
    const fc::PolicyBackend& inner_;
    mutable std::mutex mutex_;
    mutable std::vector<std::string> prompts_;
};

std::vector<fc::Task> synth(std::uint64_t seed, int count, int min_len, int max_len) {
    fc::SynthOptions o;
    o.seed = seed;
    o.count = count;
    o.min_length = min_len;
    o.max_length = max_len;
    return fc::generate_synthetic_suite(o);
}

std::vector<fc::SuiteEntry> as_suite(const std::vector<fc::Task>& tasks) {
    std::vector<fc::SuiteEntry> out;
    for (const auto& t : tasks) out.push_back({t.id, t, {}});
    return out;
}

fc::RunConfig base_config(fc::RunMode mode = fc::RunMode::TeacherForced) {
    auto c = fc::RunConfig::for_mode(mode);
    c.seed = 2024;
    return c;
}

fc::ScriptedActorOptions actor_kind(fc::ScriptedActorKind k) {
    fc::ScriptedActorOptions o;
    o.kind = k;
    return o;
}

std::string pct(double v) { return fc::format_fixed(v, 2); }

/// Independent per-step correctness: looks each step up by index.
bool brute_step_ok(const fc::TrajectoryRecord& r, const fc::Task& task, int t, fc::MatchMode mode) {
    for (const auto& s : r.steps) {
        if (s.t != t) continue;
        if (!s.accepted) return false;
        const auto& ref = task.steps[static_cast<std::size_t>(t - 1)].label;
        if (s.accepted->kind != ref.kind) return false;
        if (mode == fc::MatchMode::KindOnly) return true;
        return fc::normalize(*s.accepted) == fc::normalize(ref);
    }
    return false;
}

// ---------------------------------------------------------------------------

Outcome oracle_closure() {
    auto start = std::chrono::steady_clock::now();
    auto tasks = synth(101, 50, 8, 24);
    fc::ScriptedActor actor;
    fc::ScriptedCritic critic;
    fc::MockToolBackend tools;
    auto cfg = base_config();
    auto res = fc::run_suite(as_suite(tasks), cfg, {actor, &critic, tools});
    auto m = fc::compute_metrics(res.records, fc::task_infos(tasks), cfg.match_mode);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    int lo = 99, hi = 0;
    for (const auto& t : tasks) {
        lo = std::min(lo, t.length());
        hi = std::max(hi, t.length());
    }
    bool ok = res.records.size() == 50 && res.failures.empty() && m.overall.steps_correct == m.overall.steps_total &&
              m.overall.tasks_correct == 50 && lo >= 8 && hi <= 24 && secs < 60.0;
    return {ok, "SWA " + pct(m.swa()) + ", TA " + pct(m.ta()) + ", lengths " + std::to_string(lo) + "-" +
                    std::to_string(hi) + ", " + fc::format_fixed(secs, 1) + " s"};
}

Outcome single_fault() {
    std::string detail;
    bool ok = true;
    for (int k : {9, 13, 24}) {
        auto task = synth(200 + k, 1, k, k)[0];
        fc::ScriptedActorOptions o = actor_kind(fc::ScriptedActorKind::Faulty);
        int site = k / 2 + 1;
        o.faults.insert({task.id, site});
        fc::ScriptedActor actor(o);
        fc::MockToolBackend tools;
        auto cfg = base_config();
        cfg.critic_enabled = false;
        auto r = fc::run_task(task, cfg, {actor, nullptr, tools});
        auto m = fc::compute_metrics({r}, {fc::TaskInfo::of(task)}, cfg.match_mode);
        bool exact = m.overall.steps_correct == k - 1 && m.overall.steps_total == k;
        bool this_ok = r.verifier == 0 && exact && m.swa() == 100.0 * (k - 1) / k;
        ok = ok && this_ok;
        detail += (detail.empty() ? "" : "; ") + std::string("k=") + std::to_string(k) + " V=" +
                  std::to_string(r.verifier) + " acc=" + std::to_string(m.overall.steps_correct) + "/" +
                  std::to_string(k);
    }
    return {ok, detail};
}

Outcome random_calibration() {
    fc::ScriptedActor actor(actor_kind(fc::ScriptedActorKind::Random));
    fc::MockToolBackend tools;
    auto cfg = base_config();
    cfg.critic_enabled = false;
    cfg.match_mode = fc::MatchMode::KindOnly;
    cfg.use_tools = false;

    auto long_tasks = synth(301, 400, 8, 24);
    auto a = fc::run_suite(as_suite(long_tasks), cfg, {actor, nullptr, tools});
    auto ma = fc::compute_metrics(a.records, fc::task_infos(long_tasks), cfg.match_mode);
    const double p = 1.0 / 6.0;
    double n = static_cast<double>(ma.overall.steps_total);
    double sigma = 100.0 * std::sqrt(p * (1 - p) / n);
    bool swa_ok = n >= 5000 && std::abs(ma.swa() - 100.0 * p) <= 3 * sigma;

    auto short_tasks = synth(302, 20000, 3, 3);
    auto b = fc::run_suite(as_suite(short_tasks), cfg, {actor, nullptr, tools}, fc::LengthBounds{3, 3});
    auto mb = fc::compute_metrics(b.records, fc::task_infos(short_tasks), cfg.match_mode);
    const double q = p * p * p;
    double nt = static_cast<double>(mb.overall.tasks_total);
    double sigma_t = 100.0 * std::sqrt(q * (1 - q) / nt);
    bool ta_ok = b.failures.empty() && std::abs(mb.ta() - 100.0 * q) <= 3 * sigma_t;

    return {swa_ok && ta_ok, "SWA " + fc::format_fixed(ma.swa(), 3) + " over " + std::to_string(ma.overall.steps_total) +
                                 " steps (3σ " + fc::format_fixed(3 * sigma, 3) + "); TA(n=3) " +
                                 fc::format_fixed(mb.ta(), 3) + " over " + std::to_string(mb.overall.tasks_total) +
                                 " tasks (target 0.463, 3σ " + fc::format_fixed(3 * sigma_t, 3) + ")"};
}

Outcome critic_monotonicity() {
    auto tasks = synth(401, 40, 8, 24);
    fc::ScriptedActorOptions o = actor_kind(fc::ScriptedActorKind::Noisy);
    o.flip_rate = 0.3;
    fc::ScriptedActor actor(o);
    fc::ScriptedCritic critic;
    fc::MockToolBackend tools;
    auto infos = fc::task_infos(tasks);

    std::vector<double> ta;
    std::vector<fc::SuiteResult> runs;
    for (int r = 0; r <= 3; ++r) {
        auto cfg = base_config();
        cfg.max_revisions = r;
        runs.push_back(fc::run_suite(as_suite(tasks), cfg, {actor, &critic, tools}));
        ta.push_back(fc::compute_metrics(runs.back().records, infos, cfg.match_mode).ta());
    }
    bool monotone = true;
    for (std::size_t i = 1; i < ta.size(); ++i) monotone = monotone && ta[i] >= ta[i - 1];

    auto off = base_config();
    off.critic_enabled = false;
    auto without = fc::run_suite(as_suite(tasks), off, {actor, nullptr, tools});
    // same proposals, same per-step outcome, same metrics
    bool identical = without.records.size() == runs[0].records.size();
    for (std::size_t i = 0; identical && i < without.records.size(); ++i) {
        const auto& a = without.records[i];
        const auto& b = runs[0].records[i];
        for (std::size_t s = 0; identical && s < a.steps.size(); ++s) {
            identical = a.steps[s].proposals.size() == 1 && b.steps[s].proposals.size() == 1 &&
                        a.steps[s].proposals[0].action == b.steps[s].proposals[0].action &&
                        brute_step_ok(a, tasks[i], a.steps[s].t, fc::MatchMode::CanonicalFull) ==
                            brute_step_ok(b, tasks[i], b.steps[s].t, fc::MatchMode::CanonicalFull);
        }
    }
    auto m_off = fc::compute_metrics(without.records, infos, off.match_mode);
    auto m_zero = fc::compute_metrics(runs[0].records, infos, off.match_mode);
    identical = identical && m_off.overall.steps_correct == m_zero.overall.steps_correct &&
                m_off.overall.tasks_correct == m_zero.overall.tasks_correct;

    std::string d = "TA by max_revisions:";
    for (double v : ta) d += " " + pct(v);
    d += "; critic-off TA " + pct(m_off.ta()) + (identical ? " matches" : " differs from") + " max_revisions=0";
    return {monotone && identical && ta.back() > ta.front(), d};
}

Outcome ablation_fidelity() {
    const std::string text_sentinel = "ZQXSENTINELTEXT";
    const std::string widget_sentinel = "ZQXSENTINELWIDGET";
    auto tasks = synth(501, 20, 8, 12);
    for (auto& t : tasks) {
        for (auto& s : t.steps) {
            s.synthetic->texts.push_back({text_sentinel, {4, 226, 90, 10}});
            s.synthetic->widgets.push_back({widget_sentinel, {220, 226, 90, 10}, fc::WidgetClass::Button, {}});
        }
    }
    fc::ScriptedActor oracle;
    fc::ScriptedCritic critic;
    fc::MockToolBackend tools;

    auto prompts_for = [&](bool use_tools, bool use_ltm) {
        RecordingBackend actor(oracle);
        RecordingBackend crit(critic);
        auto cfg = base_config();
        cfg.use_tools = use_tools;
        cfg.use_ltm = use_ltm;
        auto res = fc::run_suite(as_suite(tasks), cfg, {actor, &crit, tools});
        auto a = actor.prompts();
        auto c = crit.prompts();
        return std::make_tuple(a, c, res.records.size());
    };

    auto has_grounding = [&](const std::string& p) {
        return p.find(text_sentinel) != std::string::npos || p.find(widget_sentinel) != std::string::npos ||
               p.find(fc::kToolContextHeading) != std::string::npos || p.find(fc::kToolHintsHeading) != std::string::npos;
    };

    auto [a_off, c_off, n_off] = prompts_for(false, true);
    std::size_t leaks = 0;
    for (const auto& p : a_off) leaks += has_grounding(p);
    for (const auto& p : c_off) leaks += has_grounding(p);

    auto [a_on, c_on, n_on] = prompts_for(true, true);
    std::size_t control = 0;
    for (const auto& p : a_on) control += p.find(text_sentinel) != std::string::npos;

    auto [a_ltm, c_ltm, n_ltm] = prompts_for(true, false);
    std::size_t non_empty = 0;
    for (const auto* list : {&a_ltm, &c_ltm}) {
        for (const auto& p : *list) {
            if (p.find(fc::kLtmHeading) == std::string::npos) {
                ++non_empty;
                continue;
            }
            non_empty += !(fc::parse_memory_context(p).second == fc::LongTermMemory{});
        }
    }
    std::size_t ltm_control = 0;
    for (const auto& p : a_on) ltm_control += !(fc::parse_memory_context(p).second == fc::LongTermMemory{});

    bool ok = n_off == 20 && n_on == 20 && n_ltm == 20 && leaks == 0 && control > 0 && non_empty == 0 &&
              ltm_control > 0;
    return {ok, std::to_string(a_off.size() + c_off.size()) + " prompts without tools, " + std::to_string(leaks) +
                    " with grounding; " + std::to_string(a_ltm.size() + c_ltm.size()) + " prompts without LTM, " +
                    std::to_string(non_empty) + " non-empty; controls " + std::to_string(control) + "/" +
                    std::to_string(ltm_control)};
}

std::string fuzz_text(fc::Rng& rng) {
    static const std::vector<std::string> words = {"Load", "MRI", "data", "segment", "tumor", "export", "\"q\"", " ", "",
                                                   "NONE", "a\nb"};
    std::string s = rng.bernoulli(0.9) ? "w" : "";
    for (int i = rng.range(0, 3); i > 0; --i) s += rng.pick(words);
    return s;
}

std::vector<std::string> fuzz_list(fc::Rng& rng) {
    std::vector<std::string> v;
    for (int i = rng.range(0, 3); i > 0; --i) v.push_back(fuzz_text(rng));
    return v;
}

Outcome reflection_routing() {
    fc::Rng rng = fc::Rng::derive(601, "routing");
    int applied = 0, rejected = 0, violations = 0;
    for (int i = 0; i < 1000; ++i) {
        fc::ShortTermMemory stm;
        stm.last_action = fuzz_text(rng);
        stm.last_observation = fuzz_text(rng);
        stm.last_lesson = fuzz_text(rng);
        if (rng.bernoulli(0.5)) stm.last_feedback = rng.uniform();
        fc::LongTermMemory ltm;
        ltm.overall_progress = fuzz_text(rng);
        ltm.completed_subtasks = fuzz_list(rng);
        ltm.remaining_subtasks = fuzz_list(rng);
        ltm.known_pitfalls = fuzz_list(rng);
        for (int k = rng.range(0, 2); k > 0; --k) ltm.key_states.push_back({k, fuzz_text(rng)});

        fc::ReflectionDelta d;
        switch (rng.range(0, 2)) {
        case 0: d = fc::ActionReflection{fuzz_text(rng), rng.bernoulli(0.5) ? std::optional(fuzz_text(rng)) : std::nullopt}; break;
        case 1: d = fc::TrajectoryReflection{fuzz_list(rng), fuzz_list(rng), fuzz_list(rng)}; break;
        default:
            d = fc::GlobalReflection{rng.bernoulli(0.5) ? fc::GoalStatus::Complete : fc::GoalStatus::Incomplete,
                                     fuzz_list(rng), fuzz_text(rng)};
        }
        // the JSON form must route identically
        d = nlohmann::json(d).get<fc::ReflectionDelta>();
        try {
            auto [s2, l2] = fc::apply_reflection(stm, ltm, d);
            ++applied;
            if (fc::level_of(d) == fc::ReflectionLevel::Action) {
                violations += !(l2 == ltm);
            } else {
                violations += !(s2 == stm);
            }
        } catch (const fc::Error& e) {
            ++rejected;
            violations += e.code() != fc::ErrorCode::SchemaViolation;
        }
    }

    int cases = 0, guarded = 0;
    fc::ScriptedCritic critic;
    for (int i = 0; i < 200; ++i) {
        int total = rng.range(2, 24);
        int step = rng.range(1, total - 1);
        fc::CriticVerdict lenient;
        lenient.action_correct = true;
        lenient.score = 0.5 + 0.5 * rng.uniform() + 1e-9;
        lenient.score = std::min(lenient.score, 1.0);
        fc::ReplayBackend replay({fc::verdict_json(lenient).dump()});
        fc::PolicyRequest req;
        req.sim.step = step;
        req.sim.total_steps = total;
        auto v1 = fc::score_action(replay, req, fc::Action::complete());
        fc::SimulationContext sim;
        sim.step = step;
        sim.total_steps = total;
        sim.goal = "Weasis: a; b";
        sim.proposal = fc::Action::complete();
        auto v2 = critic.judge(sim);
        cases += 2;
        guarded += !fc::accept(v1, 0.0) && !v1.action_correct;
        guarded += !fc::accept(v2, 0.0) && !v2.action_correct;
    }
    bool ok = violations == 0 && applied > 0 && guarded == cases;
    return {ok, std::to_string(applied) + " deltas applied, " + std::to_string(rejected) + " rejected as malformed, " +
                    std::to_string(violations) + " routing violations; premature COMPLETE rejected " +
                    std::to_string(guarded) + "/" + std::to_string(cases)};
}

Outcome metric_equivalence() {
    int mismatches = 0;
    long steps = 0;
    for (int suite = 0; suite < 100; ++suite) {
        auto rng = fc::Rng::derive(701, "suite", suite);
        auto tasks = synth(7000 + suite, rng.range(1, 12), 8, 24);
        std::vector<fc::TrajectoryRecord> records;
        for (const auto& t : tasks) {
            fc::TrajectoryRecord r;
            r.task_id = t.id;
            r.category = t.category;
            r.total_steps = t.length();
            int executed = rng.bernoulli(0.2) ? rng.range(1, t.length()) : t.length();
            for (int i = 1; i <= executed; ++i) {
                fc::StepRecord s;
                s.t = i;
                s.label = t.steps[static_cast<std::size_t>(i - 1)].label;
                double u = rng.uniform();
                if (u < 0.8) {
                    s.accepted = s.label;
                } else if (u < 0.9) {
                    s.accepted = fc::placeholder_action(s.label.kind == fc::ActionKind::Click ? fc::ActionKind::Text
                                                                                               : fc::ActionKind::Click);
                } else if (u < 0.95 && s.label.target) {
                    auto a = s.label;
                    a.target = *a.target + " other";
                    s.accepted = a;
                }
                r.steps.push_back(s);
            }
            records.push_back(std::move(r));
        }
        for (auto mode : {fc::MatchMode::KindOnly, fc::MatchMode::CanonicalFull}) {
            fc::MetricsAccumulator acc(mode);
            for (std::size_t i = 0; i < tasks.size(); ++i) acc.add(records[i], fc::TaskInfo::of(tasks[i]));
            const auto& c = acc.report().overall;
            long st = 0, sc = 0, tt = 0, tc = 0;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                int ok = 0;
                for (int t = 1; t <= tasks[i].length(); ++t) ok += brute_step_ok(records[i], tasks[i], t, mode);
                st += tasks[i].length();
                sc += ok;
                tt += 1;
                tc += ok == tasks[i].length();
            }
            double swa = 100.0 * static_cast<double>(sc) / static_cast<double>(st);
            double ta = 100.0 * static_cast<double>(tc) / static_cast<double>(tt);
            mismatches += c.steps_total != st || c.steps_correct != sc || c.tasks_total != tt ||
                          c.tasks_correct != tc || acc.report().swa() != swa || acc.report().ta() != ta;
            steps += st;
        }
    }
    return {mismatches == 0, "100 suites x 2 match modes, " + std::to_string(steps) + " steps, " +
                                 std::to_string(mismatches) + " mismatches"};
}

std::vector<std::pair<std::string, std::string>> artifacts(const fc::fs::path& run, const fc::fs::path& sft) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : fc::fs::recursive_directory_iterator(run / fc::kRecordsDir)) {
        out.emplace_back("records/" + e.path().filename().string(), fc::read_file(e.path()));
    }
    out.emplace_back(fc::kMetricsFile, fc::read_file(run / fc::kMetricsFile));
    out.emplace_back(fc::kFailuresFile, fc::read_file(run / fc::kFailuresFile));
    for (const auto& e : fc::fs::directory_iterator(sft)) {
        out.emplace_back("export/" + e.path().filename().string(), fc::read_file(e.path()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

void full_run(const std::vector<fc::Task>& tasks, fc::RunConfig cfg, int workers, const fc::PolicyBackend& actor,
              const fc::fs::path& dir) {
    fc::ScriptedCritic critic(cfg.match_mode);
    fc::MockToolBackend tools;
    cfg.workers = workers;
    fc::Backends b{actor, &critic, tools};
    auto res = fc::run_suite(as_suite(tasks), cfg, b);
    fc::write_run_directory(dir / "run", res, cfg, b, {"suite", "", ""});
    fc::write_file(dir / "run" / fc::kMetricsFile,
                   fc::metrics_json(res.records, fc::task_infos(tasks), cfg.match_mode, fc::config_hash(cfg)).dump(2) +
                       "\n");
    auto loaded = fc::load_run_directory(dir / "run");
    fc::fs::create_directories(dir / "sft");
    fc::export_run(loaded, dir / "run", dir / "sft");
}

Outcome determinism() {
    TempDir dir("det");
    auto tasks = synth(801, 16, 8, 24);
    fc::ScriptedActorOptions o = actor_kind(fc::ScriptedActorKind::Noisy);
    fc::ScriptedActor actor(o);
    auto cfg = base_config();
    // same location both times: the dataset card records the source path
    full_run(tasks, cfg, 1, actor, dir / "x");
    auto a = artifacts(dir / "x" / "run", dir / "x" / "sft");
    fc::fs::remove_all(dir / "x");
    full_run(tasks, cfg, 8, actor, dir / "x");
    auto b = artifacts(dir / "x" / "run", dir / "x" / "sft");
    std::size_t differ = a.size() == b.size() ? 0 : std::max(a.size(), b.size());
    for (std::size_t i = 0; differ == 0 && i < a.size(); ++i) differ += a[i] != b[i];
    return {differ == 0 && a.size() == tasks.size() + 4,
            std::to_string(a.size()) + " files compared, " + std::to_string(differ) + " differ"};
}

Outcome export_integrity() {
    TempDir dir("export");
    auto tasks = synth(901, 8, 8, 16);
    fc::ScriptedActorOptions o = actor_kind(fc::ScriptedActorKind::Faulty);
    for (int i : {1, 4, 6}) o.faults.insert({tasks[static_cast<std::size_t>(i)].id, 3});
    fc::ScriptedActor actor(o);
    full_run(tasks, base_config(), 1, actor, dir / "x");

    std::set<std::string> failing = {tasks[1].id, tasks[4].id, tasks[6].id};
    long expected = 0;
    std::map<std::string, const fc::Task*> by_id;
    for (const auto& t : tasks) {
        by_id[t.id] = &t;
        if (!failing.count(t.id)) expected += t.length();
    }
    auto loaded = fc::load_run_directory(dir / "x" / "run");
    int succeeded = 0;
    for (const auto& r : loaded.records) succeeded += fc::is_successful(r);

    std::istringstream in(fc::read_file(dir / "x" / "sft" / fc::kDatasetFile));
    long lines = 0, bad_feedback = 0, bad_target = 0, foreign = 0;
    for (std::string line; std::getline(in, line);) {
        ++lines;
        auto j = nlohmann::json::parse(line);
        auto id = j["metadata"]["task_id"].get<std::string>();
        int step = j["metadata"]["step"].get<int>();
        if (failing.count(id)) ++foreign;
        const auto& fb = j["metadata"]["feedback"];
        // step 1 has no previous step to carry feedback from
        if (step == 1 ? !fb.is_null() : !(fb.is_number() && fb.get<double>() > 0.0)) ++bad_feedback;
        try {
            if (!(fc::parse_action(j["target"].get<std::string>()) == by_id.at(id)->steps[step - 1].label)) ++bad_target;
        } catch (const fc::Error&) {
            ++bad_target;
        }
    }
    for (const auto& r : loaded.records) {
        if (!fc::is_successful(r)) continue;
        for (const auto& s : r.steps) bad_feedback += !(s.feedback > 0.0);
    }
    bool ok = succeeded == 5 && lines == expected && bad_feedback == 0 && bad_target == 0 && foreign == 0;
    return {ok, std::to_string(succeeded) + "/8 tasks successful, " + std::to_string(lines) + " samples (expected " +
                    std::to_string(expected) + "), " + std::to_string(bad_feedback) + " bad feedback, " +
                    std::to_string(bad_target) + " bad targets"};
}

struct Payload {
    std::string name;
    bool critic;
    std::string text;
    std::optional<fc::ErrorCode> strict;  // nullopt: strict parse succeeds
    bool repairable;
};

std::string actor_record(int step) {
    fc::ActorStepOutput out;
    out.step = step;
    out.predicted = fc::prediction_from_action(fc::Action::click("Load Data"));
    return fc::actor_output_json(out).dump(2);
}

std::string critic_record() {
    fc::CriticVerdict v;
    v.action_correct = false;
    v.score = 0.0;
    v.score_reported = true;
    v.why_if_wrong = "wrong button";
    v.hint_if_wrong = "use SEGMENT";
    v.action_reflection = "no effect";
    v.remaining_subtasks = {"segment"};
    v.missing_steps = {"segment"};
    return fc::verdict_json(v).dump(2);
}

std::string edit(const std::string& text, const std::function<void(nlohmann::ordered_json&)>& f) {
    auto j = nlohmann::ordered_json::parse(text);
    f(j);
    return j.dump(2);
}

std::vector<Payload> malformed_corpus() {
    using E = fc::ErrorCode;
    const auto a = actor_record(1);
    const auto c = critic_record();
    auto body = [](nlohmann::ordered_json& j) -> nlohmann::ordered_json& { return j["Step 1"]; };
    std::vector<Payload> p = {
        {"actor fenced json", false, "```json\n" + a + "\n```", E::MalformedJson, true},
        {"actor fenced bare", false, "```\n" + a + "\n```", E::MalformedJson, true},
        {"actor prose before", false, "Here is the next action:\n" + a, E::MalformedJson, true},
        {"actor prose around", false, "Sure.\n" + a + "\nLet me know if you need more.", E::MalformedJson, true},
        {"actor list keyed form", false, "[" + a.substr(1, a.size() - 2) + "]", E::MalformedJson, true},
        {"actor pure prose", false, "I think we should click on the Load Data button next.", E::MalformedJson, false},
        {"actor empty", false, "", E::MalformedJson, false},
        {"actor truncated", false, a.substr(0, a.size() / 2), E::MalformedJson, false},
        {"actor missing prediction", false, edit(a, [&](auto& j) { body(j).erase("predicted_next_action"); }), E::MissingKey, false},
        {"actor missing grounding", false, edit(a, [&](auto& j) { body(j).erase("grounding"); }), E::MissingKey, false},
        {"actor missing image_info", false, edit(a, [&](auto& j) { body(j).erase("image_info"); }), E::MissingKey, false},
        {"actor elements as sentence", false,
         edit(a, [&](auto& j) { body(j)["grounding"]["key_ui_elements"] = "the toolbar and viewer"; }), E::TypeMismatch, false},
        {"actor tool_calls as object", false,
         edit(a, [&](auto& j) { body(j)["reasoning"]["tool_calls"] = nlohmann::ordered_json::object(); }), E::TypeMismatch, false},
        {"actor step_num as string", false, edit(a, [&](auto& j) { body(j)["image_info"]["step_num"] = "1"; }), E::TypeMismatch, false},
        {"actor unknown kind", false, edit(a, [&](auto& j) { body(j)["predicted_next_action"]["tool_call"] = "DRAG"; }), E::UnknownActionKind, false},
        {"actor wrong step key", false, actor_record(2), E::StepMismatch, false},
        {"actor bare object", false, edit(a, [&](auto& j) { j = body(j); }), E::SchemaViolation, false},
        {"actor extra key", false, edit(a, [&](auto& j) { body(j)["confidence"] = 0.9; }), E::UnknownKey, false},
        {"actor valid", false, a, std::nullopt, true},
        {"critic fenced", true, "```json\n" + c + "\n```", E::MalformedJson, true},
        {"critic prose around", true, "My verdict:\n" + c + "\nThanks.", E::MalformedJson, true},
        {"critic pure prose", true, "The action looks correct to me.", E::MalformedJson, false},
        {"critic missing tool_evaluation", true, edit(c, [](auto& j) { j.erase("tool_evaluation"); }), E::MissingKey, false},
        {"critic missing reflection", true, edit(c, [](auto& j) { j.erase("reflection"); }), E::MissingKey, false},
        {"critic subtasks as sentence", true,
         edit(c, [](auto& j) { j["reflection"]["trajectory"]["completed_subtasks"] = "loaded the study"; }), E::TypeMismatch, false},
        {"critic correct as string", true, edit(c, [](auto& j) { j["action_correct"] = "false"; }), E::TypeMismatch, false},
        {"critic score out of range", true, edit(c, [](auto& j) { j["score"] = 7; }), E::SchemaViolation, false},
        {"critic wrong without hint", true, edit(c, [](auto& j) { j["hint_if_wrong"] = ""; }), E::SchemaViolation, false},
        {"critic tool_success not bool", true,
         edit(c, [](auto& j) { j["tool_evaluation"]["tool_success"]["ocr"] = "yes"; }), E::TypeMismatch, false},
        {"critic array top level", true, "[" + c + "]", E::SchemaViolation, false},
    };
    return p;
}

Outcome protocol_robustness() {
    auto corpus = malformed_corpus();
    int repaired = 0, rejected = 0, wrong = 0, crashes = 0;
    std::string first_wrong;
    for (const auto& item : corpus) {
        try {
            std::optional<fc::ErrorCode> strict;
            try {
                if (item.critic) {
                    fc::parse_critic_output(item.text);
                } else {
                    fc::parse_actor_output(item.text, 1);
                }
            } catch (const fc::ProtocolError& e) {
                strict = e.code();
            }
            fc::ReplayBackend replay({item.text});
            fc::PolicyRequest req;
            req.sim.step = 1;
            req.sim.total_steps = 10;
            bool ok = true;
            try {
                if (item.critic) {
                    fc::score_action(replay, req, fc::Action::click("Load Data"));
                } else {
                    fc::propose_action(replay, req);
                }
            } catch (const fc::ProtocolError& e) {
                ok = false;
                if (e.code() != fc::ErrorCode::Unrepairable) strict = std::nullopt;
            }
            bool expected = strict == item.strict && ok == item.repairable && replay.calls() <= 2;
            if (!expected) {
                ++wrong;
                if (first_wrong.empty()) first_wrong = item.name;
            }
            (ok ? repaired : rejected) += 1;
        } catch (...) {
            ++crashes;
            if (first_wrong.empty()) first_wrong = item.name + " (crash)";
        }
    }
    bool ok = corpus.size() == 30 && wrong == 0 && crashes == 0;
    std::string d = std::to_string(corpus.size()) + " payloads: " + std::to_string(repaired) + " accepted or repaired, " +
                    std::to_string(rejected) + " rejected, " + std::to_string(wrong) + " unexpected, " +
                    std::to_string(crashes) + " crashes";
    if (!first_wrong.empty()) d += " (first: " + first_wrong + ")";
    return {ok, d};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"oracle closure", oracle_closure},
        {"single-fault sensitivity", single_fault},
        {"random-policy calibration", random_calibration},
        {"critic-benefit monotonicity", critic_monotonicity},
        {"ablation-flag fidelity", ablation_fidelity},
        {"reflection routing", reflection_routing},
        {"metric oracle equivalence", metric_equivalence},
        {"determinism", determinism},
        {"export integrity", export_integrity},
        {"protocol robustness", protocol_robustness},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
