#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace testing_support;

TEST(Config, JsonRoundTrip) {
    auto c = config(fc::RunMode::FreeRunning);
    c.accept_threshold = 0.7;
    c.max_revisions = 1;
    c.actor = {{"type", "noisy"}, {"flip_rate", 0.2}};
    c.use_ltm = false;
    c.capacity.known_pitfalls = 4;
    c.workers = 3;
    auto back = fc::config_from_json(nlohmann::json::parse(fc::config_json(c).dump()));
    EXPECT_EQ(fc::config_json(back).dump(), fc::config_json(c).dump());
    EXPECT_EQ(back.workers, 3);
}

TEST(Config, UnknownFieldIsAUsageError) {
    try {
        fc::config_from_json({{"mode", "teacher_forced"}, {"temprature", 0.2}});
        FAIL() << "expected Error";
    } catch (const fc::Error& e) {
        EXPECT_EQ(e.code(), fc::ErrorCode::Usage);
        EXPECT_NE(e.detail().find("temprature"), std::string::npos);
    }
}

TEST(Config, BadValuesAreUsageErrors) {
    EXPECT_THROW(fc::config_from_json({{"max_revisions", -1}}), fc::Error);
    EXPECT_THROW(fc::config_from_json({{"accept_threshold", 2.0}}), fc::Error);
    EXPECT_THROW(fc::config_from_json({{"window", "five"}}), fc::Error);
    EXPECT_THROW(fc::config_from_json({{"mode", "zero_shot_baseline"}, {"critic_enabled", true}}), fc::Error);
    EXPECT_THROW(fc::config_from_json(nlohmann::json::array()), fc::Error);
}

TEST(Config, ModeDefaults) {
    auto base = fc::config_from_json({{"mode", "zero_shot_baseline"}});
    EXPECT_FALSE(base.critic_enabled);
    EXPECT_TRUE(base.expose_total_steps);
    EXPECT_EQ(base.match_mode, fc::MatchMode::KindOnly);
    auto tf = fc::config_from_json(nlohmann::json::object());
    EXPECT_EQ(tf.mode, fc::RunMode::TeacherForced);
    EXPECT_TRUE(tf.critic_enabled);
    EXPECT_FALSE(tf.expose_total_steps);
    EXPECT_EQ(tf.max_revisions, 3);
    EXPECT_EQ(tf.accept_threshold, 0.5);
}

TEST(Config, HashIgnoresWorkersOnly) {
    auto a = config();
    auto b = a;
    b.workers = 8;
    EXPECT_EQ(fc::config_hash(a), fc::config_hash(b));
    b.seed = 8;
    EXPECT_NE(fc::config_hash(a), fc::config_hash(b));
    EXPECT_EQ(fc::config_hash(a).size(), 64u);
}

TEST(Config, ExampleConfigsLoad) {
    auto dir = fc::fs::path(FLOWCRITIC_SOURCE_DIR) / "examples";
    int n = 0;
    for (const auto& e : fc::fs::directory_iterator(dir)) {
        auto name = e.path().filename().string();
        if (name.rfind("config", 0) != 0 || e.path().extension() != ".json") continue;
        EXPECT_NO_THROW(fc::config_from_json(nlohmann::json::parse(fc::read_file(e.path())))) << name;
        ++n;
    }
    EXPECT_GE(n, 1);
}

TEST(Backends, DescriptorsResolve) {
    EXPECT_EQ(fc::make_actor_backend({{"type", "oracle"}})->identity(), "scripted-actor:oracle");
    EXPECT_NE(fc::make_actor_backend({{"type", "noisy"}, {"flip_rate", 0.25}})->identity().find("0.250"),
              std::string::npos);
    auto faulty = fc::make_actor_backend({{"type", "faulty"}, {"faults", {{{"task", "a"}, {"step", 3}}}}});
    EXPECT_NE(faulty->identity().find("sites=1"), std::string::npos);
    EXPECT_EQ(fc::make_tool_backend({{"type", "mock"}})->identity(), "mock");
    EXPECT_THROW(fc::make_actor_backend({{"type", "gpt"}}), fc::Error);
    EXPECT_THROW(fc::make_actor_backend({{"type", "noisy"}, {"flip_rate", 3}}), fc::Error);
    EXPECT_THROW(fc::make_critic_backend({{"kind", "oracle"}}, fc::MatchMode::KindOnly), fc::Error);
}
