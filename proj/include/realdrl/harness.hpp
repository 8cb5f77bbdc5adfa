#pragma once

#include "realdrl/lmi_json.hpp"
#include "realdrl/runtime.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace realdrl {

inline constexpr const char* kVersion = "0.3.0";

namespace fs = std::filesystem;

struct Ablation {
    bool teaching_to_learn = true;
    bool safety_informed_sampling = true;
    std::vector<int> teacher_disabled_episodes;  // 1-based
};

// Initial-state distribution. With corner_fraction > 0 a seeded share of
// episodes starts in the corner region near the boundary of L.
struct ResetConfig {
    Vector half_width = vec({0.2, 0.2, 0.2, 0.2});
    std::optional<Vector> initial_state;
    double corner_fraction = 0.0;
    double corner_x_lo = 0.5, corner_x_hi = 0.65;
    double corner_theta_lo = -0.4, corner_theta_hi = -0.25;
    double corner_velocity = 0.05;
};

struct RunConfig {
    CartPoleParams plant;
    double eta = 0.7;
    double x_limit = 1.0;
    double theta_limit = 1.0;
    double action_limit = 50.0;
    std::string teacher_preset = "operational";
    TeacherConfig teacher = TeacherConfig::operational();
    LearnerConfig learner;
    DisturbanceConfig disturbance;
    ResetConfig reset;
    Ablation ablation;
    int episodes = 100;
    int episode_length = 1000;
    uint64_t seed = 1;
    bool teacher_enabled = true;
    bool log_steps = true;
    int checkpoint_every = 10;
    std::string out;

    SafetySpec safety_spec() const {
        SafetySpec s = cartpole_safety_spec(eta);
        s.c = vec({x_limit, theta_limit});
        s.d = vec({action_limit});
        s.validate();
        return s;
    }

    LearnerConfig effective_learner() const {
        LearnerConfig l = learner;
        l.action_bound = action_limit;
        if (!ablation.teaching_to_learn)
            l.buffer_mode = BufferMode::SingleStudent;
        else if (!ablation.safety_informed_sampling)
            l.buffer_mode = BufferMode::SingleShared;
        else
            l.buffer_mode = BufferMode::Dual;
        return l;
    }

    bool teacher_on_in(int episode) const {
        const auto& off = ablation.teacher_disabled_episodes;
        return teacher_enabled && std::find(off.begin(), off.end(), episode) == off.end();
    }
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Containment parse_containment(const std::string& s) {
    if (s == "diagonal") return Containment::Diagonal;
    if (s == "error-ellipsoid") return Containment::ErrorEllipsoid;
    throw ConfigError("teacher.containment must be diagonal or error-ellipsoid");
}

inline std::pair<double, double> pair_of(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(what) + " must be [lo, hi]");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
void read(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace detail

inline TeacherConfig teacher_preset(const std::string& name) {
    if (name == "nominal") return TeacherConfig::nominal();
    if (name == "operational") return TeacherConfig::operational();
    throw ConfigError("unknown teacher preset " + name);
}

inline json config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["episodes"] = c.episodes;
    j["episode_length"] = c.episode_length;
    j["plant"] = {{"m_c", c.plant.m_c}, {"m_p", c.plant.m_p}, {"g", c.plant.g}, {"l", c.plant.l}, {"dt", c.plant.dt}};
    j["safety"] = {{"eta", c.eta},
                   {"x_limit", c.x_limit},
                   {"theta_limit", c.theta_limit},
                   {"action_limit", c.action_limit}};
    const TeacherConfig& t = c.teacher;
    j["teacher"] = {{"enabled", c.teacher_enabled},
                    {"preset", c.teacher_preset},
                    {"chi", t.chi},
                    {"theta", t.theta_patch},
                    {"alpha", t.alpha},
                    {"phi", t.phi},
                    {"kappa", t.kappa},
                    {"lambda", t.lambda_ridge},
                    {"containment", t.containment == Containment::Diagonal ? "diagonal" : "error-ellipsoid"}};
    const LearnerConfig& l = c.learner;
    j["learner"] = {{"gamma", l.gamma},
                    {"lr_actor", l.lr_actor},
                    {"lr_critic", l.lr_critic},
                    {"batch", l.batch},
                    {"rho1", l.rho1},
                    {"rho2", l.rho2},
                    {"gamma1", l.gamma1},
                    {"gamma2", l.gamma2},
                    {"tau", l.tau},
                    {"noise_sigma", l.noise_sigma},
                    {"hidden", l.hidden},
                    {"buffer_capacity", l.buffer_capacity},
                    {"warmup", l.warmup},
                    {"reward_P", matrix_to_json(l.reward_P.dense())}};
    const DisturbanceConfig& d = c.disturbance;
    j["disturbance"] = {{"enabled", d.enabled},
                        {"action", {d.action.lo, d.action.hi}},
                        {"friction", {d.friction.lo, d.friction.hi}},
                        {"shape", {d.action.shape_lo, d.action.shape_hi}}};
    const ResetConfig& r = c.reset;
    j["reset"] = {{"half_width", detail::to_std(r.half_width)},
                  {"corner_fraction", r.corner_fraction},
                  {"corner_x", {r.corner_x_lo, r.corner_x_hi}},
                  {"corner_theta", {r.corner_theta_lo, r.corner_theta_hi}},
                  {"corner_velocity", r.corner_velocity}};
    if (r.initial_state) j["reset"]["initial_state"] = detail::to_std(*r.initial_state);
    j["ablation"] = {{"teaching_to_learn", c.ablation.teaching_to_learn},
                     {"safety_informed_sampling", c.ablation.safety_informed_sampling},
                     {"teacher_disabled_episodes", c.ablation.teacher_disabled_episodes}};
    j["logging"] = {{"steps", c.log_steps}, {"checkpoint_every", c.checkpoint_every}};
    return j;
}

// Every key is optional; missing keys keep their defaults.
inline RunConfig config_from_json(const json& j) {
    using detail::read;
    RunConfig c;
    try {
        read(j, "seed", c.seed);
        read(j, "episodes", c.episodes);
        read(j, "episode_length", c.episode_length);
        read(j, "out", c.out);
        if (j.contains("plant")) {
            const json& p = j["plant"];
            read(p, "m_c", c.plant.m_c);
            read(p, "m_p", c.plant.m_p);
            read(p, "g", c.plant.g);
            read(p, "l", c.plant.l);
            read(p, "dt", c.plant.dt);
        }
        if (j.contains("safety")) {
            const json& s = j["safety"];
            read(s, "eta", c.eta);
            read(s, "x_limit", c.x_limit);
            read(s, "theta_limit", c.theta_limit);
            read(s, "action_limit", c.action_limit);
        }
        if (j.contains("teacher")) {
            const json& t = j["teacher"];
            read(t, "enabled", c.teacher_enabled);
            if (t.contains("preset")) {
                c.teacher_preset = t["preset"].get<std::string>();
                c.teacher = teacher_preset(c.teacher_preset);
            }
            read(t, "chi", c.teacher.chi);
            read(t, "theta", c.teacher.theta_patch);
            read(t, "alpha", c.teacher.alpha);
            read(t, "phi", c.teacher.phi);
            read(t, "kappa", c.teacher.kappa);
            read(t, "lambda", c.teacher.lambda_ridge);
            if (t.contains("containment")) c.teacher.containment = detail::parse_containment(t["containment"]);
        }
        if (j.contains("learner")) {
            const json& l = j["learner"];
            LearnerConfig& L = c.learner;
            read(l, "gamma", L.gamma);
            read(l, "lr_actor", L.lr_actor);
            read(l, "lr_critic", L.lr_critic);
            read(l, "batch", L.batch);
            read(l, "rho1", L.rho1);
            read(l, "rho2", L.rho2);
            read(l, "gamma1", L.gamma1);
            read(l, "gamma2", L.gamma2);
            read(l, "tau", L.tau);
            read(l, "noise_sigma", L.noise_sigma);
            read(l, "hidden", L.hidden);
            read(l, "buffer_capacity", L.buffer_capacity);
            read(l, "warmup", L.warmup);
            if (l.contains("reward_P")) L.reward_P = SymMatrix(matrix_from_json(l["reward_P"]));
        }
        if (j.contains("disturbance")) {
            const json& d = j["disturbance"];
            DisturbanceConfig& D = c.disturbance;
            read(d, "enabled", D.enabled);
            if (d.contains("action")) std::tie(D.action.lo, D.action.hi) = detail::pair_of(d["action"], "action");
            if (d.contains("friction"))
                std::tie(D.friction.lo, D.friction.hi) = detail::pair_of(d["friction"], "friction");
            if (d.contains("shape")) {
                const auto [lo, hi] = detail::pair_of(d["shape"], "shape");
                D.action.shape_lo = D.friction.shape_lo = lo;
                D.action.shape_hi = D.friction.shape_hi = hi;
            }
        }
        if (j.contains("reset")) {
            const json& r = j["reset"];
            ResetConfig& R = c.reset;
            if (r.contains("half_width")) R.half_width = detail::from_std(r["half_width"].get<std::vector<double>>());
            if (r.contains("initial_state") && !r["initial_state"].is_null())
                R.initial_state = detail::from_std(r["initial_state"].get<std::vector<double>>());
            read(r, "corner_fraction", R.corner_fraction);
            if (r.contains("corner_x")) std::tie(R.corner_x_lo, R.corner_x_hi) = detail::pair_of(r["corner_x"], "corner_x");
            if (r.contains("corner_theta"))
                std::tie(R.corner_theta_lo, R.corner_theta_hi) = detail::pair_of(r["corner_theta"], "corner_theta");
            read(r, "corner_velocity", R.corner_velocity);
        }
        if (j.contains("ablation")) {
            const json& a = j["ablation"];
            read(a, "teaching_to_learn", c.ablation.teaching_to_learn);
            read(a, "safety_informed_sampling", c.ablation.safety_informed_sampling);
            read(a, "teacher_disabled_episodes", c.ablation.teacher_disabled_episodes);
        }
        if (j.contains("logging")) {
            read(j["logging"], "steps", c.log_steps);
            read(j["logging"], "checkpoint_every", c.checkpoint_every);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

// Names accepted by --ablation: no-sbs, no-ttl, teacher-off=5,50
inline void apply_ablation(RunConfig& c, const std::string& spec) {
    if (spec == "no-sbs") {
        c.ablation.safety_informed_sampling = false;
    } else if (spec == "no-ttl") {
        c.ablation.teaching_to_learn = false;
    } else if (spec.rfind("teacher-off=", 0) == 0) {
        std::stringstream ss(spec.substr(12));
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                c.ablation.teacher_disabled_episodes.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw ConfigError("bad episode number in " + spec);
            }
        }
    } else {
        throw ConfigError("unknown ablation " + spec);
    }
}

inline std::vector<std::string> validate_config(const RunConfig& c) {
    std::vector<std::string> errs;
    if (c.episodes < 1) errs.push_back("episodes must be >= 1");
    if (c.episode_length < 1) errs.push_back("episode_length must be >= 1");
    if (!(c.eta > 0.0 && c.eta < 1.0)) errs.push_back("safety.eta must lie in (0, 1)");
    if (!(c.x_limit > 0 && c.theta_limit > 0 && c.action_limit > 0)) errs.push_back("safety limits must be positive");
    if (!(c.plant.m_c > 0 && c.plant.m_p > 0 && c.plant.g > 0 && c.plant.l > 0 && c.plant.dt > 0))
        errs.push_back("plant parameters must be positive");
    if (c.teacher_enabled)
        if (auto chk = validate_parameters(c.teacher, c.eta); !chk) errs.push_back("teacher: " + chk.violation);
    if (c.learner.batch < 1) errs.push_back("learner.batch must be >= 1");
    if (c.learner.hidden.empty()) errs.push_back("learner.hidden must list at least one layer");
    if (c.learner.buffer_capacity == 0) errs.push_back("learner.buffer_capacity must be positive");
    if (c.learner.reward_P.order() != 4) errs.push_back("learner.reward_P must be 4x4");
    if (c.reset.half_width.size() != 4 || (c.reset.half_width.array() < 0).any())
        errs.push_back("reset.half_width must be four nonnegative numbers");
    if (c.reset.initial_state && c.reset.initial_state->size() != 4) errs.push_back("reset.initial_state needs 4 entries");
    if (!(c.reset.corner_fraction >= 0.0 && c.reset.corner_fraction <= 1.0))
        errs.push_back("reset.corner_fraction must lie in [0, 1]");
    for (const BetaUnknown* b : {&c.disturbance.action, &c.disturbance.friction}) {
        try {
            b->validate();
        } catch (const std::exception& e) {
            errs.push_back(std::string("disturbance: ") + e.what());
        }
    }
    if (errs.empty() && c.reset.initial_state) {
        try {
            if (!in_learning_space(c.safety_spec(), *c.reset.initial_state))
                errs.push_back("reset.initial_state must lie in L");
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
    }
    return errs;
}

// 64-bit FNV-1a
inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a(config_to_json(c).dump())); }

struct EpisodeSummary {
    int episode = 0;
    double ret = 0.0;
    double avg_reward = 0.0;
    double activation_ratio = 0.0;
    int violations = 0;
    int steps = 0;
    int teacher_steps = 0;
    int triggers = 0;
    int infeasible_patches = 0;
    bool start_corner = false;
    bool teacher_on = true;
    std::string termination;  // empty when the episode ran its full length

    bool ended_early() const { return !termination.empty(); }
};

struct RunResult {
    RunConfig config;
    std::vector<EpisodeSummary> episodes;
    std::string status = "complete";
    std::string error;
    double seconds = 0.0;
};

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string csv_header() { return "episode,return,avg_reward,activation_ratio,violations"; }

inline std::string csv_row(const EpisodeSummary& e) {
    return std::to_string(e.episode) + ',' + format_number(e.ret) + ',' + format_number(e.avg_reward) + ',' +
           format_number(e.activation_ratio) + ',' + std::to_string(e.violations);
}

inline json step_json(int episode, const StepRecord& r) {
    return {{"episode", episode},
            {"t", r.t},
            {"s", detail::to_std(r.s)},
            {"a", detail::to_std(r.a)},
            {"source", to_string(r.source)},
            {"V", r.V},
            {"reward", r.reward},
            {"authority", to_string(r.authority)},
            {"violation", r.violation}};
}

// Initial states come from their own stream so ablation variants share them.
class ResetSampler {
public:
    ResetSampler(const ResetConfig& cfg, uint64_t seed) : cfg_(cfg), rng_(seed * 2654435761ULL + 17) {}

    std::pair<Vector, bool> next() {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const bool corner = u01(rng_) < cfg_.corner_fraction;
        if (cfg_.initial_state) return {*cfg_.initial_state, corner};
        return {corner ? corner_state() : box_state(), corner};
    }

    Vector corner_state() {
        std::uniform_real_distribution<double> ux(cfg_.corner_x_lo, cfg_.corner_x_hi);
        std::uniform_real_distribution<double> ut(cfg_.corner_theta_lo, cfg_.corner_theta_hi);
        std::uniform_real_distribution<double> uv(-cfg_.corner_velocity, cfg_.corner_velocity);
        const double x = ux(rng_), v = uv(rng_), th = ut(rng_), w = uv(rng_);
        return vec({x, v, th, w});
    }

    Vector box_state() {
        Vector s(4);
        for (int i = 0; i < 4; ++i) {
            std::uniform_real_distribution<double> u(-cfg_.half_width[i], cfg_.half_width[i]);
            s[i] = u(rng_);
        }
        return s;
    }

private:
    ResetConfig cfg_;
    std::mt19937_64 rng_;
};

inline void write_manifest(const RunResult& r, const std::string& dir) {
    const RunConfig& c = r.config;
    const LearnerConfig l = c.effective_learner();
    json m;
    m["version"] = kVersion;
    m["seed"] = c.seed;
    m["config_hash"] = config_hash(c);
    m["config"] = config_to_json(c);
    m["status"] = r.status;
    if (!r.error.empty()) m["error"] = r.error;
    m["episodes_completed"] = r.episodes.size();
    m["buffer_mode"] = l.buffer_mode == BufferMode::Dual            ? "dual"
                       : l.buffer_mode == BufferMode::SingleShared ? "single-shared"
                                                                   : "single-student";
    if (l.buffer_mode == BufferMode::Dual)
        m["buffer_capacity"] = {{"self_learning", l.buffer_capacity}, {"teaching_to_learn", l.buffer_capacity}};
    else
        m["buffer_capacity"] = {{"single", l.single_capacity()}};
    std::ofstream(fs::path(dir) / "manifest.json") << m.dump(2) << '\n';
}

struct RunHooks {
    std::function<void(const EpisodeSummary&)> on_episode;
    std::function<void(World&)> on_finish;  // trained world, before it is destroyed
};

// Trains one seeded world for cfg.episodes episodes; writes artifacts when cfg.out is set.
inline RunResult run_experiment(const RunConfig& cfg, const RunHooks& hooks = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    res.config = cfg;
    if (auto errs = validate_config(cfg); !errs.empty()) throw ConfigError(errs.front());

    const bool write = !cfg.out.empty();
    std::ofstream csv, steps;
    if (write) {
        fs::create_directories(fs::path(cfg.out) / "checkpoints");
        csv.open(fs::path(cfg.out) / "episodes.csv");
        csv << csv_header() << '\n';
        if (cfg.log_steps) steps.open(fs::path(cfg.out) / "steps.jsonl");
    }

    World world(cfg.plant, cfg.safety_spec(), cfg.teacher, cfg.effective_learner(), cfg.disturbance, cfg.seed);
    world.keep_records = write && cfg.log_steps;
    ResetSampler sampler(cfg.reset, cfg.seed);
    for (int ep = 1; ep <= cfg.episodes; ++ep) {
        const auto [s0, corner] = sampler.next();
        world.teacher_enabled = cfg.teacher_on_in(ep);
        world.noise_scale = 1.0 - static_cast<double>(ep - 1) / cfg.episodes;
        EpisodeSummary e;
        e.episode = ep;
        e.start_corner = corner;
        e.teacher_on = world.teacher_enabled;
        EpisodeMetrics m;
        try {
            m = world.run_episode(s0, cfg.episode_length);
        } catch (const std::exception& ex) {
            res.status = "diverged";
            res.error = "episode " + std::to_string(ep) + ": " + ex.what();
            break;
        }
        e.ret = m.ret;
        e.avg_reward = m.episode_average_reward();
        e.activation_ratio = m.activation_ratio();
        e.violations = m.safety_violations;
        e.steps = m.steps;
        e.teacher_steps = m.teacher_active_steps;
        e.triggers = m.triggers;
        e.infeasible_patches = m.infeasible_patches;
        e.termination = m.termination;
        res.episodes.push_back(e);
        if (hooks.on_episode) hooks.on_episode(e);
        if (write) {
            csv << csv_row(e) << '\n';
            for (const auto& r : m.records) steps << step_json(ep, r).dump() << '\n';
            if (cfg.checkpoint_every > 0 && ep % cfg.checkpoint_every == 0) {
                char name[32];
                std::snprintf(name, sizeof name, "ep%04d.txt", ep);
                save_checkpoint((fs::path(cfg.out) / "checkpoints" / name).string(), world.learner());
            }
        }
    }
    if (hooks.on_finish) hooks.on_finish(world);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (write) write_manifest(res, cfg.out);
    return res;
}

inline int worker_count() {
    if (const char* env = std::getenv("REALDRL_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Independent runs on a pool of threads; results keep the input order.
inline std::vector<RunResult> run_many(const std::vector<RunConfig>& cfgs, int workers = worker_count(),
                                       const std::vector<RunHooks>& hooks = {}) {
    std::vector<RunResult> out(cfgs.size());
    std::vector<std::string> errors(cfgs.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next++; i < cfgs.size(); i = next++) {
            try {
                out[i] = run_experiment(cfgs[i], i < hooks.size() ? hooks[i] : RunHooks{});
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(cfgs.size())));
    for (int k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (size_t i = 0; i < cfgs.size(); ++i)
        if (!errors[i].empty()) {
            out[i].config = cfgs[i];
            out[i].status = "failed";
            out[i].error = errors[i];
        }
    return out;
}

// Noiseless student-only episodes from the corner region; counts episodes that leave S.
inline int corner_test_violations(World& world, int episodes, int length, uint64_t seed) {
    ResetConfig rc;
    rc.corner_fraction = 1.0;
    ResetSampler sampler(rc, seed);
    const bool teacher = world.teacher_enabled, learning = world.learning_enabled;
    const double noise = world.noise_scale;
    world.teacher_enabled = false;
    world.learning_enabled = false;
    world.noise_scale = 0.0;
    int failed = 0;
    for (int k = 0; k < episodes; ++k) {
        const EpisodeMetrics m = world.run_episode(sampler.corner_state(), length);
        failed += m.safety_violations > 0;
    }
    world.teacher_enabled = teacher;
    world.learning_enabled = learning;
    world.noise_scale = noise;
    return failed;
}

// ---- report ----

struct ReportSummary {
    int episodes = 0;
    int steps_logged = 0;
    int total_violations = 0;
    double mean_avg_reward = 0.0;
    double mean_activation_ratio = 0.0;
};

struct CsvEpisode {
    int episode;
    double ret, avg_reward, activation_ratio;
    int violations;
};

inline std::vector<CsvEpisode> read_episode_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing " + path);
    std::string line;
    std::getline(in, line);
    if (line != csv_header()) throw std::runtime_error("unexpected header in " + path);
    std::vector<CsvEpisode> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CsvEpisode r{};
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%d", &r.episode, &r.ret, &r.avg_reward, &r.activation_ratio,
                        &r.violations) != 5)
            throw std::runtime_error("malformed row in " + path + ": " + line);
        rows.push_back(r);
    }
    return rows;
}

// Writes series files into dir/report and returns the summary table values.
inline ReportSummary report(const std::string& dir) {
    const fs::path root(dir);
    const auto rows = read_episode_csv((root / "episodes.csv").string());
    const fs::path out = root / "report";
    fs::create_directories(out);
    ReportSummary s;
    s.episodes = static_cast<int>(rows.size());
    {
        std::ofstream ar(out / "avg_reward.csv"), ratio(out / "activation_ratio.csv"), viol(out / "violations.csv");
        ar << "episode,avg_reward\n";
        ratio << "episode,activation_ratio\n";
        viol << "episode,violations\n";
        for (const auto& r : rows) {
            ar << r.episode << ',' << format_number(r.avg_reward) << '\n';
            ratio << r.episode << ',' << format_number(r.activation_ratio) << '\n';
            viol << r.episode << ',' << r.violations << '\n';
            s.total_violations += r.violations;
            s.mean_avg_reward += r.avg_reward;
            s.mean_activation_ratio += r.activation_ratio;
        }
    }
    if (s.episodes > 0) {
        s.mean_avg_reward /= s.episodes;
        s.mean_activation_ratio /= s.episodes;
    }
    std::ofstream th(out / "phase_theta.csv"), xv(out / "phase_x.csv");
    th << "episode,t,theta,theta_dot\n";
    xv << "episode,t,x,x_dot\n";
    std::ifstream steps(root / "steps.jsonl");
    std::string line;
    while (steps && std::getline(steps, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        const auto st = j.at("s").get<std::vector<double>>();
        const std::string key = std::to_string(j.at("episode").get<int>()) + ',' + std::to_string(j.at("t").get<int>());
        th << key << ',' << format_number(st.at(2)) << ',' << format_number(st.at(3)) << '\n';
        xv << key << ',' << format_number(st.at(0)) << ',' << format_number(st.at(1)) << '\n';
        ++s.steps_logged;
    }
    return s;
}

// ---- lmi-check ----

struct GoldenResult {
    std::string file;
    std::string name;
    std::string expect;
    std::string outcome;  // solved, infeasible, max-iterations, certify-failed, error
    double ms = 0.0;
    double min_eig = 0.0;
    bool pass = false;
};

inline GoldenResult check_golden(const GoldenProblem& g) {
    GoldenResult r;
    r.name = g.name;
    r.expect = g.expect;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        SolverOptions opt;
        opt.tol = g.tol;
        const Assignment a = solve(g.problem, opt);
        r.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const CertifyReport c = certify(g.problem, a, g.tol);
        r.min_eig = c.min_eig.empty() ? 0.0 : *std::min_element(c.min_eig.begin(), c.min_eig.end());
        r.outcome = c.pass ? "solved" : "certify-failed";
    } catch (const LmiSolveError& e) {
        r.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        r.outcome = to_string(e.status);
        r.min_eig = e.best_slack;
    }
    r.pass = r.outcome == g.expect && (g.expect != "solved" || r.ms <= g.budget_ms);
    return r;
}

inline std::vector<GoldenResult> lmi_check(const std::string& corpus_dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(corpus_dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    if (files.empty()) throw std::runtime_error("no .json problems in " + corpus_dir);
    std::sort(files.begin(), files.end());
    std::vector<GoldenResult> out;
    for (const auto& f : files) {
        GoldenResult r;
        try {
            r = check_golden(load_golden(f.string()));
        } catch (const std::exception& e) {
            r.outcome = std::string("error: ") + e.what();
        }
        r.file = f.filename().string();
        out.push_back(r);
    }
    return out;
}

// Golden problems the corpus is built from.
inline std::vector<GoldenProblem> golden_corpus() {
    std::vector<GoldenProblem> out;
    {
        GoldenProblem g{"trivial-scalar", {}, "solved", 1e-8, 150.0};
        g.problem.add_symmetric("x", 1);
        const AffineExpr x = g.problem.var("x");
        g.problem.add_constraint({"pos", {{x}}});
        g.problem.add_constraint({"below-one", {{AffineExpr::constant_of(RectMatrix::Ones(1, 1)) - x}}});
        out.push_back(std::move(g));
    }
    {
        GoldenProblem g{"box-logdet", {}, "solved", 1e-8, 150.0};
        const SafetySpec spec = cartpole_safety_spec();
        const RectMatrix Cb = spec.c_indicator.cwiseInverse().asDiagonal() * spec.C_indicator;
        g.problem.add_symmetric("Q", 4);
        const AffineExpr Q = g.problem.var("Q");
        g.problem.add_constraint({"Q", {{Q}}});
        g.problem.add_constraint(
            {"box", {{AffineExpr::constant_of(RectMatrix::Identity(4, 4)) - Cb * Q * RectMatrix(Cb.transpose())}}});
        g.problem.maximize_logdet("Q");
        out.push_back(std::move(g));
    }
    {
        const SafetySpec spec = cartpole_safety_spec();
        const Vector s = vec({0.7, 0, 0, 0});
        const auto [A, B] = discrete_model(s, CartPoleParams{});
        out.push_back({"cartpole-patch-x-face", patch_problem(s, A, B, spec, TeacherConfig::operational()), "solved",
                       1e-8, 150.0});
    }
    {
        GoldenProblem g{"contradiction", {}, "infeasible", 1e-8, 150.0};
        g.problem.add_symmetric("Q", 2);
        const AffineExpr Q = g.problem.var("Q");
        g.problem.add_constraint({"Q", {{Q}}});
        g.problem.add_constraint({"minus-Q", {{-Q}}});
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace realdrl
