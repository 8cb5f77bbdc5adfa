#pragma once

#include "realdrl/cartpole.hpp"
#include "realdrl/safety.hpp"
#include "realdrl/student.hpp"
#include "realdrl/teacher.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace realdrl {

struct EpisodeAborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// beyond the model's envelope; the episode ends here
inline bool pole_fell(const Vector& s) { return std::abs(s[2]) >= std::numbers::pi / 2; }

inline bool check_trigger(const SafetySpec& spec, const Vector& s_prev, const Vector& s_curr) {
    return in_learning_space(spec, s_prev) && !in_learning_space(spec, s_curr);
}

struct DisturbanceConfig {
    bool enabled = true;
    BetaUnknown action{-2.5, 2.5};   // added to student actions
    BetaUnknown friction{0.0, 0.5};  // opposing cart force, always on when enabled
};

struct StepRecord {
    int t = 0;
    Vector s;
    Vector a;
    Source source = Source::Student;
    double V = 0.0;
    double reward = 0.0;
    Source authority = Source::Student;  // holder after the handoff check
    bool violation = false;
};

struct EpisodeMetrics {
    double ret = 0.0;  // rewards accrued while the student acts
    int student_active_steps = 0;
    int teacher_active_steps = 0;
    int safety_violations = 0;
    int triggers = 0;
    int infeasible_patches = 0;
    int steps = 0;
    bool terminated = false;
    std::string termination;
    std::vector<StepRecord> records;

    double episode_average_reward() const {
        return student_active_steps > 0 ? ret / student_active_steps : 0.0;
    }
    double activation_ratio() const { return steps > 0 ? static_cast<double>(teacher_active_steps) / steps : 0.0; }
};

struct PatchEvent {
    int t = 0;
    Vector trigger_state;
    std::vector<double> slack;
    double solve_seconds = 0.0;
    bool feasible = true;
    bool reused = false;
};

// Plant, learner and controller authority for one seeded run.
class World {
public:
    World(CartPoleParams plant, SafetySpec spec, TeacherConfig teacher, LearnerConfig learner,
          DisturbanceConfig dist, uint64_t seed)
        : plant_(plant), spec_(std::move(spec)), tcfg_(teacher), dist_(dist), rng_(seed ^ 0x9e3779b97f4a7c15ULL),
          learner_(spec_.state_dim(), spec_.action_dim(), learner, seed) {
        compute_indicator_matrix(spec_);
        if (auto chk = validate_parameters(tcfg_, spec_.eta); !chk) throw InvalidConfig(chk.violation);
    }

    World(const World&) = delete;
    World& operator=(const World&) = delete;

    void reset(const Vector& s0) {
        if (!in_learning_space(spec_, s0)) throw std::invalid_argument("reset: initial state must lie in L");
        s_ = s0;
        t_ = 0;
        authority_ = Source::Student;
        teacher_.reset();
    }

    // options that change per episode
    bool teacher_enabled = true;
    bool learning_enabled = true;
    double noise_scale = 1.0;
    bool keep_records = false;
    std::function<void(const PatchEvent&)> on_patch;

    StepRecord step(EpisodeMetrics& m) {
        const Vector s = s_;
        StepRecord rec;
        rec.t = t_;
        rec.source = authority_;
        Disturbance d;
        Vector a;
        if (authority_ == Source::Teacher) {
            a = teacher_->step(s).action;
            ++m.teacher_active_steps;
        } else {
            a = learner_.act(s, noise_scale, rng_);
            if (dist_.enabled) d.action = sample_unknown(dist_.action, rng_);
            ++m.student_active_steps;
        }
        if (dist_.enabled) d.friction = sample_unknown(dist_.friction, rng_);

        Vector s_next;
        try {
            s_next = step_plant(s, a[0], d, plant_);
        } catch (const PlantDiverged& e) {
            throw EpisodeAborted(e.what());
        }
        const double r = clf_reward(learner_.config().reward_P, s, s_next, a / learner_.config().action_bound,
                                    learner_.config().gamma1, learner_.config().gamma2);
        if (authority_ == Source::Student) m.ret += r;
        const bool fell = pole_fell(s_next);
        if (learning_enabled) {
            learner_.store({s, a, s_next, r, authority_, fell});
            learner_.learn(safety_indicator(spec_, s_next));
        }

        rec.s = s;
        rec.a = a;
        rec.reward = r;
        rec.V = safety_indicator(spec_, s);
        rec.violation = !in_safety_set(spec_, s_next);
        if (rec.violation) ++m.safety_violations;

        if (authority_ == Source::Student) {
            if (teacher_enabled && check_trigger(spec_, s, s_next)) {
                ++m.triggers;
                activate_teacher(s_next, m);
            }
        } else if (in_learning_space(spec_, s_next)) {
            authority_ = Source::Student;
            teacher_.reset();
        }
        rec.authority = authority_;
        s_ = s_next;
        ++t_;
        ++m.steps;
        return rec;
    }

    EpisodeMetrics run_episode(const Vector& s0, int length) {
        if (length < 1) throw std::invalid_argument("run_episode: length must be >= 1");
        reset(s0);
        EpisodeMetrics m;
        for (int k = 0; k < length && !m.terminated; ++k) {
            StepRecord rec = step(m);
            if (keep_records) m.records.push_back(std::move(rec));
            if (!m.terminated && pole_fell(s_)) {
                m.terminated = true;
                m.termination = "pole fell";
            }
        }
        return m;
    }

    const Vector& state() const { return s_; }
    Source authority() const { return authority_; }
    const SafetySpec& spec() const { return spec_; }
    const TeacherConfig& teacher_config() const { return tcfg_; }
    const CartPoleParams& plant() const { return plant_; }
    Learner<float>& learner() { return learner_; }
    const Learner<float>& learner() const { return learner_; }
    std::mt19937_64& rng() { return rng_; }
    const std::optional<Patch>& last_patch() const { return last_patch_; }

private:
    void activate_teacher(const Vector& s_trigger, EpisodeMetrics& m) {
        PatchEvent ev;
        ev.t = t_ + 1;
        ev.trigger_state = s_trigger;
        auto [A, B] = discrete_model(s_trigger, plant_);
        try {
            Patch p = compute_patch(s_trigger, A, B, spec_, tcfg_);
            p.trigger_time = t_ + 1;
            ev.slack = p.slack;
            ev.solve_seconds = p.solve_seconds;
            last_patch_ = p;
            teacher_.emplace(std::move(p), spec_, tcfg_);
            authority_ = Source::Teacher;
        } catch (const PatchInfeasible&) {
            ++m.infeasible_patches;
            ev.feasible = false;
            if (last_patch_) {
                ev.reused = true;
                Patch p = *last_patch_;
                p.activation_steps = 0;
                teacher_.emplace(std::move(p), spec_, tcfg_);
                authority_ = Source::Teacher;
            } else {
                ++m.safety_violations;
                m.terminated = true;
                m.termination = "no feasible patch";
            }
        }
        if (on_patch) on_patch(ev);
    }

    CartPoleParams plant_;
    SafetySpec spec_;
    TeacherConfig tcfg_;
    DisturbanceConfig dist_;
    std::mt19937_64 rng_;
    Learner<float> learner_;
    Vector s_;
    int t_ = 0;
    Source authority_ = Source::Student;
    std::optional<TeacherController> teacher_;
    std::optional<Patch> last_patch_;
};

}  // namespace realdrl
