#include "realdrl/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace realdrl;

namespace {

RunConfig build_config(const std::string& path, const std::vector<std::string>& ablations) {
    RunConfig c = path.empty() ? RunConfig{} : load_config(path);
    for (const auto& a : ablations) apply_ablation(c, a);
    return c;
}

int cmd_run(RunConfig c, int seeds) {
    if (auto errs = validate_config(c); !errs.empty()) {
        for (const auto& e : errs) std::cerr << "invalid config: " << e << '\n';
        return 2;
    }
    std::vector<RunConfig> cfgs;
    for (int k = 0; k < seeds; ++k) {
        RunConfig r = c;
        r.seed = c.seed + static_cast<uint64_t>(k);
        if (seeds > 1) r.out = (fs::path(c.out) / ("seed_" + std::to_string(r.seed))).string();
        cfgs.push_back(r);
    }
    int rc = 0;
    for (const auto& r : run_many(cfgs)) {
        const double viol = [&] {
            double v = 0;
            for (const auto& e : r.episodes) v += e.violations;
            return v;
        }();
        std::printf("seed %llu: %s, %zu episodes, %.0f violations, %.1f s -> %s\n",
                    static_cast<unsigned long long>(r.config.seed), r.status.c_str(), r.episodes.size(), viol,
                    r.seconds, r.config.out.c_str());
        if (!r.error.empty()) std::fprintf(stderr, "  %s\n", r.error.c_str());
        if (r.status != "complete") rc = 1;
    }
    return rc;
}

int cmd_report(const std::string& dir) {
    const ReportSummary s = report(dir);
    std::printf("%-24s %d\n", "episodes", s.episodes);
    std::printf("%-24s %d\n", "steps logged", s.steps_logged);
    std::printf("%-24s %d\n", "safety violations", s.total_violations);
    std::printf("%-24s %.6g\n", "mean avg reward", s.mean_avg_reward);
    std::printf("%-24s %.6g\n", "mean activation ratio", s.mean_activation_ratio);
    std::printf("series written to %s\n", (fs::path(dir) / "report").string().c_str());
    return 0;
}

int cmd_lmi_check(const std::string& dir) {
    int failed = 0;
    for (const auto& r : lmi_check(dir)) {
        std::printf("%-4s %-28s expect %-10s got %-14s %8.2f ms  min eig %.3e\n", r.pass ? "PASS" : "FAIL",
                    r.name.empty() ? r.file.c_str() : r.name.c_str(), r.expect.c_str(), r.outcome.c_str(), r.ms,
                    r.min_eig);
        failed += !r.pass;
    }
    return failed == 0 ? 0 : 1;
}

int cmd_lmi_export(const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& g : golden_corpus()) {
        const fs::path p = fs::path(dir) / (g.name + ".json");
        std::ofstream(p) << golden_to_json(g).dump(1) << '\n';
        std::printf("wrote %s\n", p.string().c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Runtime-learning safe control experiments on the cart-pole"};
    app.require_subcommand(1);

    std::string config_path, out = "runs/latest";
    uint64_t seed = 0;
    int episodes = 0, seeds = 1;
    std::vector<std::string> ablations;

    auto* run = app.add_subcommand("run", "train one or more seeded worlds and write artifacts");
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--seed", seed, "seed (overrides the config)");
    run->add_option("--out", out, "output directory");
    run->add_option("--episodes", episodes, "episode count (overrides the config)");
    run->add_option("--ablation", ablations, "no-sbs, no-ttl or teacher-off=5,50 (repeatable)");
    run->add_option("--seeds", seeds, "consecutive seeds to run on the worker pool (REALDRL_WORKERS)")
        ->check(CLI::PositiveNumber);

    std::string run_dir;
    auto* rep = app.add_subcommand("report", "summarize a run directory into plot-ready series");
    rep->add_option("run_dir", run_dir, "directory written by run")->required();

    std::string corpus;
    auto* chk = app.add_subcommand("lmi-check", "solve and certify every golden LMI problem in a directory");
    chk->add_option("corpus_dir", corpus, "directory of .json problems")->required();

    auto* val = app.add_subcommand("validate-config", "check a config file without running it");
    val->add_option("--config", config_path, "JSON config file");
    val->add_option("--ablation", ablations, "ablations to apply before checking");

    std::string export_dir;
    auto* exp = app.add_subcommand("lmi-export", "write the built-in golden problems as JSON");
    exp->add_option("dir", export_dir, "destination directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            RunConfig c = build_config(config_path, ablations);
            if (run->count("--seed")) c.seed = seed;
            if (run->count("--episodes")) c.episodes = episodes;
            if (run->count("--out") || c.out.empty()) c.out = out;
            return cmd_run(c, seeds);
        }
        if (*rep) return cmd_report(run_dir);
        if (*chk) return cmd_lmi_check(corpus);
        if (*exp) return cmd_lmi_export(export_dir);
        if (*val) {
            const RunConfig c = build_config(config_path, ablations);
            const auto errs = validate_config(c);
            for (const auto& e : errs) std::cerr << "invalid config: " << e << '\n';
            if (errs.empty()) std::printf("config ok (hash %s)\n", config_hash(c).c_str());
            return errs.empty() ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
