#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace testing_support;

namespace {

/// A record whose steps are correct except at `wrong` (1-based).
fc::TrajectoryRecord record_for(const fc::Task& task, const std::set<int>& wrong) {
    fc::TrajectoryRecord r;
    r.task_id = task.id;
    r.goal = task.goal;
    r.category = task.category;
    r.total_steps = task.length();
    for (const auto& s : task.steps) {
        fc::StepRecord st;
        st.t = s.index;
        st.label = s.label;
        if (!wrong.count(s.index)) st.accepted = s.label;
        r.steps.push_back(st);
    }
    r.verifier = fc::verify_steps(r.steps, r.total_steps, fc::MatchMode::CanonicalFull);
    return r;
}

fc::Task task_of(std::uint64_t seed, int len, const std::string& id) {
    auto t = synth(seed, 1, len, len)[0];
    t.id = id;
    return t;
}

/// Independent brute-force metric computation.
std::pair<double, double> brute(const std::vector<fc::TrajectoryRecord>& records, const std::vector<fc::Task>& tasks) {
    long steps = 0, ok = 0, tasks_ok = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& rec = records[i];
        int correct = 0;
        for (int t = 1; t <= tasks[i].length(); ++t) {
            for (const auto& s : rec.steps) {
                if (s.t == t && s.accepted && fc::step_correct(*s.accepted, tasks[i].steps[t - 1].label, fc::MatchMode::CanonicalFull)) {
                    ++correct;
                }
            }
        }
        steps += tasks[i].length();
        ok += correct;
        tasks_ok += correct == tasks[i].length();
    }
    return {100.0 * ok / steps, 100.0 * tasks_ok / tasks.size()};
}

} // namespace

TEST(Metrics, SixStepExample) {
    auto a = task_of(1, 6, "a");
    auto b = task_of(2, 6, "b");
    std::vector<fc::TrajectoryRecord> recs = {record_for(a, {}), record_for(b, {2, 5})};
    auto r = fc::compute_metrics(recs, fc::task_infos(std::vector<fc::Task>{a, b}), fc::MatchMode::CanonicalFull);
    EXPECT_EQ(fc::format_fixed(r.swa(), 2), "83.33");
    EXPECT_EQ(fc::format_fixed(r.ta(), 2), "50.00");
}

TEST(Metrics, OneWrongStepFailsTheTask) {
    auto t = task_of(3, 13, "x");
    auto rec = record_for(t, {7});
    auto r = fc::compute_metrics({rec}, fc::task_infos(std::vector<fc::Task>{t}), fc::MatchMode::CanonicalFull);
    EXPECT_NEAR(r.swa(), 100.0 * 12 / 13, 1e-9);
    EXPECT_EQ(r.ta(), 0.0);
    EXPECT_EQ(fc::verify_task(rec, t, fc::MatchMode::CanonicalFull), 0);
}

TEST(Metrics, UnexecutedStepsCountAsWrong) {
    auto t = task_of(3, 10, "x");
    auto rec = record_for(t, {});
    rec.steps.resize(4);
    auto r = fc::compute_metrics({rec}, fc::task_infos(std::vector<fc::Task>{t}), fc::MatchMode::CanonicalFull);
    EXPECT_NEAR(r.swa(), 40.0, 1e-9);
    EXPECT_EQ(r.ta(), 0.0);
}

TEST(Metrics, VerifierMatchesTaskAccuracy) {
    fc::Rng rng(17);
    std::vector<fc::Task> tasks;
    std::vector<fc::TrajectoryRecord> recs;
    for (int i = 0; i < 30; ++i) {
        auto t = task_of(100 + i, rng.range(8, 24), "t" + std::to_string(100 + i));
        std::set<int> wrong;
        if (rng.bernoulli(0.5)) wrong.insert(rng.range(1, t.length()));
        recs.push_back(record_for(t, wrong));
        tasks.push_back(t);
    }
    auto r = fc::compute_metrics(recs, fc::task_infos(tasks), fc::MatchMode::CanonicalFull);
    int v = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) v += fc::verify_task(recs[i], tasks[i], fc::MatchMode::CanonicalFull);
    EXPECT_EQ(r.overall.tasks_correct, v);
    auto [swa, ta] = brute(recs, tasks);
    EXPECT_DOUBLE_EQ(r.swa(), swa);
    EXPECT_DOUBLE_EQ(r.ta(), ta);
}

TEST(Metrics, LengthBuckets) {
    EXPECT_EQ(fc::length_bucket(9), "<10");
    EXPECT_EQ(fc::length_bucket(10), "10-15");
    EXPECT_EQ(fc::length_bucket(15), "10-15");
    EXPECT_EQ(fc::length_bucket(16), "16-20");
    EXPECT_EQ(fc::length_bucket(20), "16-20");
    EXPECT_EQ(fc::length_bucket(21), ">20");
    std::vector<fc::Task> tasks;
    std::vector<fc::TrajectoryRecord> recs;
    int i = 0;
    for (int len : {8, 9, 12, 15, 18, 22, 24}) {
        tasks.push_back(task_of(200 + len, len, "b" + std::to_string(i++)));
        recs.push_back(record_for(tasks.back(), {}));
    }
    auto r = fc::compute_metrics(recs, fc::task_infos(tasks), fc::MatchMode::CanonicalFull);
    long sum = 0;
    for (const auto& [k, c] : r.per_length_bucket) sum += c.tasks_total;
    EXPECT_EQ(sum, 7);
    EXPECT_EQ(r.per_length_bucket.at("<10").tasks_total, 2);
    EXPECT_EQ(r.per_length_bucket.at(">20").tasks_total, 2);
}

TEST(Metrics, MismatchedIdsRejected) {
    auto a = task_of(1, 8, "a");
    auto b = task_of(2, 8, "b");
    try {
        fc::compute_metrics({record_for(a, {})}, fc::task_infos(std::vector<fc::Task>{b}), fc::MatchMode::CanonicalFull);
        FAIL() << "expected Error";
    } catch (const fc::Error& e) {
        EXPECT_EQ(e.code(), fc::ErrorCode::MismatchedIds);
    }
}

TEST(Metrics, KindOnlyIsMoreLenient) {
    auto t = task_of(4, 8, "k");
    auto rec = record_for(t, {});
    for (auto& s : rec.steps) {
        if (s.label.kind == fc::ActionKind::Click) s.accepted = fc::Action::click("Elsewhere");
    }
    auto infos = fc::task_infos(std::vector<fc::Task>{t});
    auto kind = fc::compute_metrics({rec}, infos, fc::MatchMode::KindOnly);
    auto full = fc::compute_metrics({rec}, infos, fc::MatchMode::CanonicalFull);
    EXPECT_EQ(kind.swa(), 100.0);
    EXPECT_LE(full.swa(), kind.swa());
}

TEST(Report, CsvShapeAndDeterminism) {
    std::vector<fc::Task> tasks = {task_of(1, 9, "a"), task_of(2, 12, "b"), task_of(3, 21, "c")};
    tasks[1].category = fc::Category::Orthanc;
    std::vector<fc::TrajectoryRecord> recs;
    for (const auto& t : tasks) recs.push_back(record_for(t, {}));
    recs[1].category = tasks[1].category;
    auto r = fc::compute_metrics(recs, fc::task_infos(tasks), fc::MatchMode::CanonicalFull, "h");
    auto csv = fc::report_csv(r);
    std::istringstream in(csv);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) rows.push_back(fc::split(line, ","));
    ASSERT_EQ(rows.size(), 1 + 1 + r.per_category.size() + 4);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"scope", "swa", "ta", "n"}));
    EXPECT_EQ(rows[1][0], "overall");
    EXPECT_EQ(rows[1][3], "3");
    EXPECT_EQ(std::stod(rows[1][1]), 100.0);

    TempDir dir("report");
    fc::emit_report(r, dir / "a.csv", dir / "a.json");
    fc::emit_report(r, dir / "b.csv", dir / "b.json");
    EXPECT_EQ(fc::read_file(dir / "a.csv"), fc::read_file(dir / "b.csv"));
    EXPECT_EQ(fc::read_file(dir / "a.json"), fc::read_file(dir / "b.json"));
    EXPECT_EQ(fc::read_file(dir / "a.csv"), csv);
}

TEST(Report, EmptyBucketsAreNull) {
    auto t = task_of(1, 9, "a");
    auto r = fc::compute_metrics({record_for(t, {})}, fc::task_infos(std::vector<fc::Task>{t}), fc::MatchMode::CanonicalFull);
    auto j = fc::report_json(r);
    EXPECT_TRUE(j["per_length_bucket"][">20"]["swa"].is_null());
    EXPECT_EQ(j["per_length_bucket"]["<10"]["swa"], 100.0);
}

TEST(Report, StreamingMatchesBatch) {
    auto tasks = synth(5, 8, 8, 20);
    std::vector<fc::TrajectoryRecord> recs;
    fc::Rng rng(3);
    for (const auto& t : tasks) recs.push_back(record_for(t, {rng.range(0, t.length())}));
    fc::MetricsAccumulator acc(fc::MatchMode::CanonicalFull);
    for (std::size_t i = 0; i < tasks.size(); ++i) acc.add(recs[i], fc::TaskInfo::of(tasks[i]));
    auto batch = fc::compute_metrics(recs, fc::task_infos(tasks), fc::MatchMode::CanonicalFull);
    EXPECT_EQ(fc::report_json(acc.report()).dump(), fc::report_json(batch).dump());
}
