// aet: train, evaluate, ablate and replay for the 1-vs-4 arena.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aet/experiment.hpp"

namespace {

int cmd_train(const std::string& config_path, uint64_t* seed, int* workers, uint64_t* iterations,
              std::string* out_dir) {
    aet::ExperimentConfig cfg = aet::load_experiment_config(config_path);
    aet::apply_env_overrides(cfg);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (iterations) cfg.total_iterations = *iterations;
    if (out_dir) cfg.out_dir = *out_dir;
    cfg.resolved().validate();

    auto out = aet::run_train(cfg);
    std::cout << "run complete: " << out.artifacts.episodes << " episodes, "
              << out.artifacts.iterations_cat + out.artifacts.iterations_mouse << " trainer iterations\n"
              << "  w_cat=" << out.artifacts.final_wc << " w_mouse=" << out.artifacts.final_wm
              << " ratio_mouse=" << out.artifacts.final_ratio << "\n"
              << "  metrics: " << out.artifacts.metrics_path << "\n"
              << "  manifest: " << out.manifest_path << "\n"
              << "  checkpoints: " << out.artifacts.checkpoint_cat << ", " << out.artifacts.checkpoint_mouse
              << "\n";
    return 0;
}

int cmd_eval(const std::string& ref_a, const std::string& ref_b, int n_games, uint64_t seed,
             const std::string& mode, const std::string& out_path) {
    auto a = aet::load_eval_player(ref_a);
    auto b = aet::load_eval_player(ref_b);
    const auto sample_mode = mode == "argmax" ? aet::SampleMode::Argmax : aet::SampleMode::Stochastic;
    auto rep = aet::run_eval(a, b, n_games, seed, sample_mode);
    const auto j = rep.to_json();
    std::cout << j.dump(2) << "\n";
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw aet::IoError("cannot write report: " + out_path);
        f << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& preset, std::vector<uint64_t> seeds,
               int eval_games, std::string* out_dir) {
    aet::ExperimentConfig cfg = aet::load_experiment_config(config_path);
    aet::apply_env_overrides(cfg);
    if (out_dir) cfg.out_dir = *out_dir;
    if (seeds.empty()) seeds = {1, 2, 3};
    auto report = aet::run_ablate(cfg, preset, seeds, eval_games);
    std::cout << "ablation '" << preset << "' complete, " << report.results.size() << " arm-seed runs\n";
    for (const auto& r : report.results)
        std::cout << "  " << r.arm << " seed=" << r.seed << " mouse_mu=" << r.mouse_mu
                  << " sigma=" << r.mouse_sigma << " gap=" << r.final_gap << "\n";
    std::cout << "csv: " << report.csv_path << "\n";
    return 0;
}

int cmd_replay(const std::string& log_path, bool render) {
    std::ifstream f(log_path);
    if (!f) throw aet::IoError("replay log not found: " + log_path);
    auto check = aet::verify_replay(f, render ? &std::cout : nullptr);
    if (check.ok) {
        std::cout << "verified: " << check.steps << " steps\n";
        return 0;
    }
    if (check.divergence_step >= 0)
        std::cout << "divergence at step " << check.divergence_step << ": " << check.error << "\n";
    else
        std::cout << "replay error: " << check.error << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asymmetric-evolution training for the 1-vs-4 grid arena"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mode = "stochastic", out_path, log_path;
    std::string ref_a, ref_b, preset;
    uint64_t seed = 0, iterations = 0;
    int workers = 0, n_games = 50, eval_games = 16;
    std::vector<uint64_t> seeds;
    bool render = false;
    bool seed_set = false, workers_set = false, iterations_set = false, out_set = false;

    auto* train = app.add_subcommand("train", "run an experiment from a config file");
    train->add_option("--config", config_path, "experiment config (JSON)")->required();
    train->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
    train->add_option("--workers", workers)->each([&](const std::string&) { workers_set = true; });
    train->add_option("--iterations", iterations)->each([&](const std::string&) { iterations_set = true; });
    train->add_option("--out-dir", out_dir)->each([&](const std::string&) { out_set = true; });

    auto* eval = app.add_subcommand("eval", "play two snapshots (or scripted:<name>) against each other");
    eval->add_option("snapshot_a", ref_a)->required();
    eval->add_option("snapshot_b", ref_b)->required();
    eval->add_option("--n-games", n_games);
    eval->add_option("--seed", seed);
    eval->add_option("--mode", mode)->check(CLI::IsMember({"stochastic", "argmax"}));
    eval->add_option("--out", out_path, "also write the JSON report here");

    auto* ablate = app.add_subcommand("ablate", "run an ablation preset across seeds");
    ablate->add_option("--config", config_path)->required();
    ablate->add_option("--preset", preset)->required()->check(
        CLI::IsMember({"ada", "er", "hist", "memory", "invisible", "gamma"}));
    ablate->add_option("--seeds", seeds, "seeds (default 1 2 3)");
    ablate->add_option("--eval-games", eval_games, "round-robin games per pair");
    ablate->add_option("--out-dir", out_dir)->each([&](const std::string&) { out_set = true; });

    auto* replay = app.add_subcommand("replay", "verify an episode log and optionally render it");
    replay->add_option("log", log_path)->required();
    replay->add_flag("--render", render, "print a text frame per step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, seed_set ? &seed : nullptr, workers_set ? &workers : nullptr,
                             iterations_set ? &iterations : nullptr, out_set ? &out_dir : nullptr);
        if (eval->parsed()) return cmd_eval(ref_a, ref_b, n_games, seed, mode, out_path);
        if (ablate->parsed())
            return cmd_ablate(config_path, preset, seeds, eval_games, out_set ? &out_dir : nullptr);
        if (replay->parsed()) return cmd_replay(log_path, render);
    } catch (const aet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const aet::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const aet::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
