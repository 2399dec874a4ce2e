#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace testing_support;

namespace {

fc::Task task_with_labels(const std::vector<fc::Action>& labels) {
    auto base = synth(5, 1, static_cast<int>(labels.size()), static_cast<int>(labels.size())).front();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        base.steps[i].label = labels[i];
        base.steps[i].raw_label = fc::render_action(labels[i]);
    }
    return base;
}

std::vector<fc::Action> clicks_then_complete(int n) {
    std::vector<fc::Action> v(static_cast<std::size_t>(n - 1), fc::Action::click("Open"));
    v.push_back(fc::Action::complete());
    return v;
}

void rewrite_manifest(const fc::fs::path& dir, const std::function<void(nlohmann::json&)>& edit) {
    auto doc = nlohmann::json::parse(fc::read_file(dir / fc::kTaskManifest));
    edit(doc);
    fc::write_file(dir / fc::kTaskManifest, doc.dump(2));
}

} // namespace

TEST(TaskBundle, RoundTripsTwelveSteps) {
    TempDir tmp("bundle");
    auto task = synth(1, 1, 12, 12).front();
    fc::write_task_bundle(task, tmp.path());
    auto loaded = fc::load_task_bundle(tmp.path());
    EXPECT_EQ(loaded.length(), 12);
    EXPECT_EQ(loaded.id, task.id);
    EXPECT_EQ(loaded.goal, task.goal);
    EXPECT_EQ(loaded.category, task.category);
    for (int i = 0; i < 12; ++i) {
        EXPECT_EQ(loaded.steps[i].label, task.steps[i].label);
        EXPECT_EQ(loaded.steps[i].synthetic, task.steps[i].synthetic);
        EXPECT_EQ(loaded.steps[i].index, i + 1);
    }
    EXPECT_EQ(loaded.steps.back().label.kind, fc::ActionKind::Complete);
    // pixels survive the PNG round trip
    EXPECT_EQ(fc::load_step_image(loaded.steps[0]), fc::render_screen(*task.steps[0].synthetic));
}

TEST(TaskBundle, IndexGapIsReported) {
    TempDir tmp("gap");
    fc::write_task_bundle(synth(1, 1, 4, 4).front(), tmp.path());
    rewrite_manifest(tmp.path(), [](nlohmann::json& doc) { doc["steps"].erase(2); });  // steps 1,2,4
    try {
        fc::load_task_bundle(tmp.path());
        FAIL() << "expected index gap";
    } catch (const fc::Error& e) {
        EXPECT_EQ(e.code(), fc::ErrorCode::IndexGap);
        EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    }
}

TEST(TaskBundle, DuplicateIndexIsReported) {
    TempDir tmp("dup");
    fc::write_task_bundle(synth(1, 1, 4, 4).front(), tmp.path());
    rewrite_manifest(tmp.path(), [](nlohmann::json& doc) { doc["steps"][2]["t"] = 2; });
    EXPECT_THROW(fc::load_task_bundle(tmp.path()), fc::Error);
}

TEST(TaskBundle, MissingImageNamesTheStep) {
    TempDir tmp("img");
    fc::write_task_bundle(synth(1, 1, 6, 6).front(), tmp.path());
    fc::fs::remove(tmp.path() / fc::image_name(3));
    try {
        fc::load_task_bundle(tmp.path());
        FAIL() << "expected unresolvable image";
    } catch (const fc::Error& e) {
        EXPECT_EQ(e.code(), fc::ErrorCode::UnresolvableImage);
        EXPECT_NE(std::string(e.what()).find("step 3"), std::string::npos);
    }
}

TEST(TaskBundle, MissingManifest) {
    TempDir tmp("nomanifest");
    try {
        fc::load_task_bundle(tmp.path());
        FAIL();
    } catch (const fc::Error& e) {
        EXPECT_EQ(e.code(), fc::ErrorCode::MissingManifest);
    }
}

TEST(TaskBundle, UnparseableLabelBecomesViolation) {
    TempDir tmp("badlabel");
    fc::write_task_bundle(synth(1, 1, 8, 8).front(), tmp.path());
    rewrite_manifest(tmp.path(), [](nlohmann::json& doc) {
        doc["steps"][1]["action"] = {{"kind", "FLY"}};
        doc["steps"][1]["raw"] = "FLY";
    });
    auto task = fc::load_task_bundle(tmp.path());
    auto report = fc::validate_trajectory(task);
    EXPECT_FALSE(report.passed);
    EXPECT_TRUE(report.has("label-unparseable"));
}

TEST(Validate, WellFormedTwelveStepTaskPasses) {
    auto report = fc::validate_trajectory(task_with_labels(clicks_then_complete(12)), {8, 24});
    EXPECT_TRUE(report.passed);
    EXPECT_TRUE(report.violations.empty());
}

TEST(Validate, SevenStepsIsBelowMinimum) {
    auto report = fc::validate_trajectory(task_with_labels(clicks_then_complete(7)), {8, 24});
    EXPECT_FALSE(report.passed);
    EXPECT_TRUE(report.has("length-below-min"));
}

TEST(Validate, LongTaskIsAboveMaximum) {
    auto report = fc::validate_trajectory(task_with_labels(clicks_then_complete(25)), {8, 24});
    EXPECT_TRUE(report.has("length-above-max"));
}

TEST(Validate, EarlyCompleteIsPremature) {
    auto labels = clicks_then_complete(12);
    labels[4] = fc::Action::complete();
    auto report = fc::validate_trajectory(task_with_labels(labels), {8, 24});
    EXPECT_FALSE(report.passed);
    ASSERT_TRUE(report.has("premature-complete"));
    for (const auto& v : report.violations) {
        if (v.code == "premature-complete") EXPECT_EQ(v.step, 5);
    }
}

TEST(Validate, MissingFinalCompleteAndLabelMismatch) {
    auto labels = clicks_then_complete(10);
    labels.back() = fc::Action::click("Open");
    auto task = task_with_labels(labels);
    task.steps[2].raw_label = "CLICK(target=Other)";
    auto report = fc::validate_trajectory(task);
    EXPECT_TRUE(report.has("missing-final-complete"));
    EXPECT_TRUE(report.has("label-mismatch"));
}

TEST(Synth, FixedLengthSuiteIsDeterministic) {
    auto a = synth(7, 5, 10, 10);
    ASSERT_EQ(a.size(), 5u);
    for (const auto& t : a) EXPECT_EQ(t.length(), 10);

    TempDir d1("s1"), d2("s2");
    for (const auto& t : a) fc::write_task_bundle(t, d1.path() / t.id);
    for (const auto& t : synth(7, 5, 10, 10)) fc::write_task_bundle(t, d2.path() / t.id);
    EXPECT_EQ(snapshot(d1.path()), snapshot(d2.path()));

    TempDir d3("s3");
    for (const auto& t : synth(8, 5, 10, 10)) fc::write_task_bundle(t, d3.path() / t.id);
    EXPECT_NE(snapshot(d1.path()), snapshot(d3.path()));
}

TEST(Synth, TargetMeanIsHonoured) {
    fc::SynthOptions o;
    o.seed = 1;
    o.count = 735;
    o.min_length = 7;
    o.max_length = 22;
    o.target_mean = 12.7;
    auto suite = fc::generate_synthetic_suite(o);
    ASSERT_EQ(suite.size(), 735u);
    double sum = 0;
    int lo = 1000, hi = 0;
    for (const auto& t : suite) {
        sum += t.length();
        lo = std::min(lo, t.length());
        hi = std::max(hi, t.length());
    }
    // binomial lengths: sd of the mean is about 0.07
    EXPECT_NEAR(sum / 735.0, 12.7, 0.3);
    EXPECT_GE(lo, 7);
    EXPECT_LE(hi, 22);
}

TEST(Synth, EveryGeneratedTaskValidates) {
    for (const auto& t : synth(42, 60, 8, 24)) {
        auto report = fc::validate_trajectory(t, {8, 24});
        EXPECT_TRUE(report.passed) << t.id << ": " << (report.violations.empty() ? "" : report.violations[0].code);
    }
}

TEST(Synth, LabelsAreRealizableOnTheirScreens) {
    for (const auto& t : synth(9, 40, 8, 24)) {
        std::set<fc::ActionKind> kinds;
        for (const auto& s : t.steps) {
            ASSERT_TRUE(s.synthetic);
            EXPECT_TRUE(fc::check_screen(*s.synthetic).empty());
            kinds.insert(s.label.kind);
            if (s.label.target) {
                const auto* w = s.synthetic->find_widget(*s.label.target);
                ASSERT_NE(w, nullptr) << t.id << " step " << s.index << " target " << *s.label.target;
                if (s.label.region) {
                    EXPECT_TRUE(fc::intersect(*s.label.region, w->box) == s.label.region);
                }
            }
        }
        EXPECT_EQ(kinds.size(), 6u) << t.id;
    }
}

TEST(Synth, RejectsBadRanges) {
    EXPECT_THROW(synth(1, 0, 8, 10), fc::Error);
    EXPECT_THROW(synth(1, 1, 10, 8), fc::Error);
    fc::SynthOptions o;
    o.target_mean = 40;
    EXPECT_THROW(fc::generate_synthetic_suite(o), fc::Error);
}

TEST(Suite, BrokenBundleBecomesEntryError) {
    TempDir tmp("suite");
    auto tasks = synth(2, 3, 8, 8);
    for (const auto& t : tasks) fc::write_task_bundle(t, tmp.path() / t.id);
    fc::fs::remove(tmp.path() / tasks[1].id / fc::image_name(2));
    auto suite = fc::load_suite(tmp.path());
    ASSERT_EQ(suite.size(), 3u);
    EXPECT_TRUE(suite[0].task);
    EXPECT_FALSE(suite[1].task);
    EXPECT_NE(suite[1].load_error.find("step 2"), std::string::npos);
    EXPECT_TRUE(suite[2].task);
}
