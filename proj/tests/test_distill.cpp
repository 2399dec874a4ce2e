#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace testing_support;

namespace {

struct RunFixture {
    TempDir dir{"distill"};
    std::vector<fc::Task> tasks;
    fc::RunConfig cfg = config();

    /// Runs `tasks` with the given actor and writes the run directory.
    fc::LoadedRun run(const fc::ScriptedActorOptions& opt, int workers = 1) {
        Harness h(opt);
        cfg.workers = workers;
        auto res = fc::run_suite(as_suite(tasks), cfg, h.backends());
        fc::write_run_directory(dir / "run", res, cfg, h.backends(), {"suite", "", ""});
        return fc::load_run_directory(dir / "run");
    }
};

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

} // namespace

TEST(Filter, KeepsOnlyVerifiedCriticAcceptedRecords) {
    RunFixture f;
    f.tasks = synth(31, 4, 8, 10);
    fc::ScriptedActorOptions o;
    o.kind = fc::ScriptedActorKind::Faulty;
    o.faults = {{f.tasks[1].id, 3}};
    auto run = f.run(o);
    auto kept = fc::filter_successful(run.records);
    ASSERT_EQ(kept.size(), 3u);
    for (const auto& r : kept) EXPECT_NE(r.task_id, f.tasks[1].id);
    auto again = fc::filter_successful(kept);
    ASSERT_EQ(again.size(), kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        EXPECT_EQ(fc::trajectory_json(again[i]).dump(), fc::trajectory_json(kept[i]).dump());
    }
}

TEST(Filter, CriticDisabledRecordsAreNotExported) {
    auto tasks = synth(31, 2, 8, 10);
    Harness h;
    auto cfg = config();
    cfg.critic_enabled = false;
    auto res = fc::run_suite(as_suite(tasks), cfg, h.backends());
    EXPECT_EQ(res.records[0].verifier, 1);
    EXPECT_TRUE(fc::filter_successful(res.records).empty());
}

TEST(Filter, FreeRunningRecordsAreTheWrongMode) {
    auto tasks = synth(31, 1, 8, 10);
    Harness h;
    auto res = fc::run_suite(as_suite(tasks), config(fc::RunMode::FreeRunning), h.backends());
    try {
        fc::filter_successful(res.records);
        FAIL() << "expected Error";
    } catch (const fc::Error& e) {
        EXPECT_EQ(e.code(), fc::ErrorCode::WrongMode);
    }
}

TEST(Samples, OnePerStep) {
    auto task = synth(32, 1, 10, 10)[0];
    Harness h;
    auto cfg = config();
    auto r = fc::run_task(task, cfg, h.backends());
    auto samples = fc::emit_sft_samples(r, cfg);
    ASSERT_EQ(samples.size(), 10u);
    EXPECT_TRUE(samples[0].metadata["feedback"].is_null());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_EQ(samples[i].step, static_cast<int>(i) + 1);
        EXPECT_EQ(fc::parse_action(samples[i].target), task.steps[i].label);
        if (i > 0) EXPECT_GT(samples[i].metadata["feedback"].get<double>(), 0.0);
        EXPECT_EQ(samples[i].images[0], task.id + "/" + fc::image_name(static_cast<int>(i) + 1));
    }
}

TEST(Samples, PromptsCarryNoFutureLabels) {
    auto task = synth(33, 1, 16, 16)[0];
    Harness h;
    auto cfg = config();
    auto samples = fc::emit_sft_samples(fc::run_task(task, cfg, h.backends()), cfg);
    for (const auto& s : samples) {
        std::set<std::string> seen;
        for (int i = 1; i < s.step; ++i) seen.insert(fc::render_action(task.steps[i - 1].label));
        for (int i = s.step; i <= task.length(); ++i) {
            auto future = fc::render_action(task.steps[i - 1].label);
            // bare kinds appear in the action list of every prompt
            if (seen.count(future) || future.find('(') == std::string::npos) continue;
            EXPECT_EQ(s.prompt.find(future), std::string::npos) << "step " << s.step << " shows " << future;
        }
    }
}

TEST(Samples, TamperedSnapshotIsDetected) {
    auto task = synth(32, 1, 10, 10)[0];
    Harness h;
    auto cfg = config();
    auto r = fc::run_task(task, cfg, h.backends());
    r.steps[4].ltm_before.overall_progress = "tampered";
    try {
        fc::emit_sft_samples(r, cfg);
        FAIL() << "expected Error";
    } catch (const fc::Error& e) {
        EXPECT_EQ(e.code(), fc::ErrorCode::SnapshotGap);
    }
    r.steps.pop_back();
    EXPECT_THROW(fc::emit_sft_samples(r, cfg), fc::Error);
}

TEST(Export, FiveTasksOfTenSteps) {
    RunFixture f;
    f.tasks = synth(34, 5, 10, 10);
    auto run = f.run({});
    auto sum = fc::export_run(run, f.dir / "run", f.dir / "out");
    EXPECT_EQ(sum.records_kept, 5u);
    EXPECT_EQ(sum.samples, 50u);
    auto lines = lines_of(fc::read_file(f.dir / "out" / fc::kDatasetFile));
    ASSERT_EQ(lines.size(), 50u);
    std::string prev_key;
    for (const auto& l : lines) {
        auto j = nlohmann::json::parse(l);
        EXPECT_NO_THROW(fc::parse_action(j["target"].get<std::string>()));
        char key[64];
        std::snprintf(key, sizeof key, "%s/%04d", j["metadata"]["task_id"].get<std::string>().c_str(),
                      j["metadata"]["step"].get<int>());
        EXPECT_LT(prev_key, key);
        prev_key = key;
    }
    auto card = nlohmann::json::parse(fc::read_file(f.dir / "out" / fc::kDatasetCard));
    EXPECT_EQ(card["counts"]["samples"], 50);
}

TEST(Export, RerunIsByteIdentical) {
    RunFixture f;
    f.tasks = synth(35, 4, 8, 12);
    fc::ScriptedActorOptions o;
    o.kind = fc::ScriptedActorKind::Noisy;
    auto run = f.run(o);
    fc::export_run(run, f.dir / "run", f.dir / "a");
    fc::export_run(run, f.dir / "run", f.dir / "b");
    EXPECT_EQ(snapshot(f.dir / "a"), snapshot(f.dir / "b"));
}

TEST(Export, StructuredTargetsParseAsActorOutput) {
    RunFixture f;
    f.tasks = synth(36, 1, 8, 8);
    auto run = f.run({});
    fc::ExportOptions opt;
    opt.structured_targets = true;
    fc::export_run(run, f.dir / "run", f.dir / "out", opt);
    for (const auto& l : lines_of(fc::read_file(f.dir / "out" / fc::kDatasetFile))) {
        auto j = nlohmann::json::parse(l);
        int step = j["metadata"]["step"];
        auto out = fc::parse_actor_output(j["target"].get<std::string>(), step);
        EXPECT_EQ(out.action, f.tasks[0].steps[step - 1].label);
    }
}
