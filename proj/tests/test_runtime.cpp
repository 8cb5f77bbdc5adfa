#include "realdrl/runtime.hpp"

#include <gtest/gtest.h>

using namespace realdrl;

namespace {

LearnerConfig small_learner() {
    LearnerConfig c;
    c.hidden = {16, 16};
    c.batch = 16;
    return c;
}

std::unique_ptr<World> make_world(uint64_t seed, CartPoleParams plant = {}) {
    return std::make_unique<World>(plant, cartpole_safety_spec(), TeacherConfig::operational(), small_learner(),
                                   DisturbanceConfig{}, seed);
}

}  // namespace

TEST(World, RejectsInvalidTeacherConfig) {
    TeacherConfig bad;
    bad.kappa = 1.0;
    EXPECT_THROW(World(CartPoleParams{}, cartpole_safety_spec(), bad, small_learner(), {}, 1), InvalidConfig);
}

TEST(World, ResetRequiresAStateInsideL) {
    auto w = make_world(1);
    EXPECT_THROW(w->reset(vec({0.8, 0, 0, 0})), std::invalid_argument);
    EXPECT_THROW(w->run_episode(Vector::Zero(4), 0), std::invalid_argument);
}

TEST(World, CountersAddUpAndEachStepHasOneController) {
    auto w = make_world(3);
    w->keep_records = true;
    const EpisodeMetrics m = w->run_episode(vec({0.1, 0, 0.05, 0}), 1000);
    EXPECT_EQ(m.student_active_steps + m.teacher_active_steps, m.steps);
    EXPECT_EQ(static_cast<int>(m.records.size()), m.steps);
    EXPECT_GE(m.activation_ratio(), 0.0);
    EXPECT_LE(m.activation_ratio(), 1.0);
    int teacher = 0;
    for (const auto& r : m.records) teacher += r.source == Source::Teacher;
    EXPECT_EQ(teacher, m.teacher_active_steps);
}

TEST(World, HandoffFollowsTheTrigger) {
    auto w = make_world(4);
    w->keep_records = true;
    const SafetySpec& spec = w->spec();
    int triggers = 0;
    w->on_patch = [&](const PatchEvent&) { ++triggers; };
    for (int ep = 0; ep < 5; ++ep) {
        const EpisodeMetrics m = w->run_episode(vec({0.1 * ep - 0.2, 0, 0.1, 0}), 300);
        if (m.infeasible_patches > 0) continue;
        for (size_t k = 0; k + 1 < m.records.size(); ++k) {
            const auto& r = m.records[k];
            const Vector& s_next = m.records[k + 1].s;
            if (r.source == Source::Student) {
                // teacher authority begins only after an exit from L
                const bool exits = check_trigger(spec, r.s, s_next);
                EXPECT_EQ(r.authority == Source::Teacher, exits);
            } else {
                // teacher hands back at the first state inside L
                EXPECT_EQ(r.authority == Source::Student, in_learning_space(spec, s_next));
            }
            EXPECT_EQ(m.records[k + 1].source, r.authority);
        }
    }
    EXPECT_GT(triggers, 0);
}

TEST(World, BuffersMatchTheActingController) {
    auto w = make_world(5);
    w->keep_records = true;
    int student = 0, teacher = 0;
    for (int ep = 0; ep < 4; ++ep) {
        const EpisodeMetrics m = w->run_episode(vec({0.0, 0, 0.15, 0}), 200);
        student += m.student_active_steps;
        teacher += m.teacher_active_steps;
    }
    const auto& l = w->learner();
    EXPECT_EQ(l.self_buffer().size(), static_cast<size_t>(student));
    EXPECT_EQ(l.teacher_buffer().size(), static_cast<size_t>(teacher));
    for (size_t i = 0; i < l.teacher_buffer().size(); ++i) EXPECT_EQ(l.teacher_buffer().at(i).source, Source::Teacher);
    for (size_t i = 0; i < l.self_buffer().size(); ++i) EXPECT_EQ(l.self_buffer().at(i).source, Source::Student);
}

TEST(World, NoTriggerMeansZeroActivation) {
    auto w = make_world(6);
    w->teacher_enabled = false;
    const EpisodeMetrics m = w->run_episode(vec({0.1, 0, 0.1, 0}), 500);
    EXPECT_EQ(m.triggers, 0);
    EXPECT_EQ(m.activation_ratio(), 0.0);
}

TEST(World, FallenPoleEndsTheEpisode) {
    auto w = make_world(7);
    w->teacher_enabled = false;
    w->learning_enabled = false;
    const EpisodeMetrics m = w->run_episode(vec({0, 0, 0.6, 1.0}), 1000);
    EXPECT_TRUE(m.terminated);
    EXPECT_EQ(m.termination, "pole fell");
    EXPECT_GT(m.safety_violations, 0);
    EXPECT_TRUE(pole_fell(w->state()));
}

TEST(World, ViolationsAreCountedWithoutStoppingTheEpisode) {
    auto w = make_world(8);
    w->keep_records = true;
    w->teacher_enabled = false;
    w->learning_enabled = false;
    const EpisodeMetrics m = w->run_episode(vec({0.0, 0, 0.6, 1.0}), 1000);
    int flagged = 0;
    for (const auto& r : m.records) flagged += r.violation;
    EXPECT_EQ(flagged, m.safety_violations);
    EXPECT_GT(flagged, 1);
}

TEST(World, NonFinitePlantAbortsTheEpisode) {
    CartPoleParams bad;
    bad.l = 0.0;
    auto w = make_world(9, bad);
    EXPECT_THROW(w->run_episode(vec({0, 0, 0.1, 0}), 10), EpisodeAborted);
}

TEST(World, SeededEpisodesAreReproducible) {
    auto a = make_world(10), b = make_world(10);
    for (int ep = 0; ep < 3; ++ep) {
        const EpisodeMetrics ma = a->run_episode(vec({0.05, 0, 0.1, 0}), 300);
        const EpisodeMetrics mb = b->run_episode(vec({0.05, 0, 0.1, 0}), 300);
        EXPECT_EQ(ma.ret, mb.ret);
        EXPECT_EQ(ma.steps, mb.steps);
        EXPECT_EQ((a->state() - b->state()).norm(), 0.0);
    }
}

TEST(World, EpisodeAverageRewardUsesStudentSteps) {
    EpisodeMetrics m;
    m.ret = -12.0;
    m.student_active_steps = 4;
    m.teacher_active_steps = 6;
    m.steps = 10;
    EXPECT_DOUBLE_EQ(m.episode_average_reward(), -3.0);
    EXPECT_DOUBLE_EQ(m.activation_ratio(), 0.6);
    EXPECT_EQ(EpisodeMetrics{}.episode_average_reward(), 0.0);
}
