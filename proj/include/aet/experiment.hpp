#pragma once

// User-facing experiment plumbing: ExperimentConfig JSON, run manifests, and
// the train / eval / ablate / replay commands the CLI wraps. Everything here
// is also callable from tests.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aet/config_json.hpp"
#include "aet/match.hpp"
#include "aet/orchestrator.hpp"
#include "aet/scripted.hpp"

namespace aet {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdaConfig, enabled, alpha, beta, initial_ratio, fixed_ratio,
                                                update_interval, window_episodes)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ErConfig, enabled, trigger_gap, trigger_windows, deactivate_gap,
                                                p_levelup, p_hardcase, p_timedbuff, p_none, buff_window)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AblationConfig, ada_enabled, fixed_ratio, er_enabled,
                                                historical_ratio, memory_info, invisible_info, gamma_override)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, arena, enc, net, ppo, adam, ada, er, league,
                                                trueskill, ablation, workers, seed, total_iterations, batch_size,
                                                publish_interval, admit_interval, metrics_interval,
                                                buffer_capacity_segments, guidance_decay_horizon,
                                                per_worker_historical, out_dir)

inline uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string s = nlohmann::json(cfg).dump();
    return fnv1a64(s.data(), s.size());
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config file not found: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error in ") + path + ": " + e.what());
    }
    try {
        return j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error in ") + path + ": " + e.what());
    }
}

inline void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write config: " + path);
    f << nlohmann::json(cfg).dump(2) << "\n";
}

// Environment overrides: AET_OUT_DIR, AET_WORKERS.
inline void apply_env_overrides(ExperimentConfig& cfg) {
    if (const char* v = std::getenv("AET_OUT_DIR")) cfg.out_dir = v;
    if (const char* v = std::getenv("AET_WORKERS")) cfg.workers = std::atoi(v);
}

// --- train ---

struct TrainOutcome {
    RunArtifacts artifacts;
    std::string manifest_path;
};

inline TrainOutcome run_train(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    cfg.resolved().validate();
    Orchestrator orch(cfg);
    TrainOutcome out;
    out.artifacts = orch.run();

    nlohmann::json manifest = {{"config", cfg},
                               {"config_hash", config_hash(cfg)},
                               {"code_version", kVersion},
                               {"seed", cfg.seed},
                               {"iterations_cat", out.artifacts.iterations_cat},
                               {"iterations_mouse", out.artifacts.iterations_mouse},
                               {"episodes", out.artifacts.episodes},
                               {"final_w_cat", out.artifacts.final_wc},
                               {"final_w_mouse", out.artifacts.final_wm},
                               {"final_ratio_mouse", out.artifacts.final_ratio},
                               {"checkpoint_cat", out.artifacts.checkpoint_cat},
                               {"checkpoint_mouse", out.artifacts.checkpoint_mouse}};
    out.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
    std::ofstream f(out.manifest_path);
    if (!f) throw IoError("cannot write manifest: " + out.manifest_path);
    f << manifest.dump(2) << "\n";
    return out;
}

// --- eval ---

struct EvalPlayerRef {
    std::shared_ptr<const NetworkParams> net;
    std::unique_ptr<ScriptedPolicy> scripted;
    std::string label;
    Side side = Side::Mouse;
};

// "path/to/snapshot.aetsnap" or "scripted:<name>"; scripted players adopt the
// side the name implies.
inline EvalPlayerRef load_eval_player(const std::string& ref) {
    EvalPlayerRef out;
    out.label = ref;
    if (ref.rfind("scripted:", 0) == 0) {
        const std::string name = ref.substr(9);
        out.scripted = make_scripted(name);
        out.side = name.rfind("cat", 0) == 0 ? Side::Cat : Side::Mouse;
        if (name == "random" || name == "idle")
            throw InputError("eval: side-ambiguous scripted player '" + name + "'; use cat_*/mouse_* names");
        return out;
    }
    out.net = std::make_shared<const NetworkParams>(load_snapshot(ref));
    out.side = out.net->side;
    return out;
}

struct EvalReport {
    int games = 0;
    double w_cat = 0.0, w_mouse = 0.0;
    double mean_steps = 0.0;
    // mean per-episode reward per Table-category, cat and (summed) mice
    std::map<std::string, double> cat_categories;
    std::map<std::string, double> mouse_categories;
    double mean_cat_return = 0.0;
    double mean_mouse_return = 0.0;  // summed over the four mice

    nlohmann::json to_json() const {
        return {{"games", games},
                {"w_cat", w_cat},
                {"w_mouse", w_mouse},
                {"mean_steps", mean_steps},
                {"mean_cat_return", mean_cat_return},
                {"mean_mouse_return", mean_mouse_return},
                {"cat_categories", cat_categories},
                {"mouse_categories", mouse_categories}};
    }
};

inline EvalReport run_eval(const EvalPlayerRef& a, const EvalPlayerRef& b, int n_games, uint64_t seed,
                           SampleMode mode, const ArenaConfig* arena_override = nullptr) {
    if (a.side == b.side) throw InputError("eval: both snapshots play the same side");
    const EvalPlayerRef& cat = a.side == Side::Cat ? a : b;
    const EvalPlayerRef& mouse = a.side == Side::Cat ? b : a;

    ArenaConfig arena;
    ObsEncConfig enc;
    if (arena_override) {
        arena = *arena_override;
    } else if (cat.net) {
        arena = cat.net->arena;
        enc = cat.net->enc;
    } else if (mouse.net) {
        arena = mouse.net->arena;
        enc = mouse.net->enc;
    }
    if (cat.net && mouse.net && cat.net->arena_hash != mouse.net->arena_hash)
        throw InputError("eval: snapshots were trained on different arenas");
    if (mouse.net) enc = mouse.net->enc;

    EvalReport rep;
    rep.games = n_games;
    if (n_games <= 0) return rep;

    PlayerSpec pc, pm;
    pc.net = cat.net;
    pc.scripted = cat.scripted.get();
    pc.mode = mode;
    pm.net = mouse.net;
    pm.scripted = mouse.scripted.get();
    pm.mode = mode;

    std::array<double, kNumRewardKinds> cat_sums{}, mouse_sums{};
    double cat_ret = 0.0, mouse_ret = 0.0;
    int cat_wins = 0;
    long total_steps = 0;
    for (int g = 0; g < n_games; ++g) {
        EpisodeSpec spec;
        spec.arena = arena;
        spec.arena.rng_seed = derive_seed(seed, 0xE7A1, g);
        spec.enc = enc;
        spec.episode_seed = derive_seed(seed, 0xE7A2, g);
        spec.decay_progress = 1.0;  // evaluation: guidance fully annealed
        EpisodeResult res = play_episode(pc, pm, spec);
        if (res.winner == Winner::Cat) ++cat_wins;
        total_steps += res.steps;
        for (int k = 0; k < kNumRewardKinds; ++k) {
            cat_sums[k] += res.by_kind[kCatId][k];
            for (int m = 1; m < kNumAgents; ++m) mouse_sums[k] += res.by_kind[m][k];
        }
        cat_ret += res.returns[kCatId];
        for (int m = 1; m < kNumAgents; ++m) mouse_ret += res.returns[m];
    }
    rep.w_cat = static_cast<double>(cat_wins) / n_games;
    rep.w_mouse = 1.0 - rep.w_cat;
    rep.mean_steps = static_cast<double>(total_steps) / n_games;
    rep.mean_cat_return = cat_ret / n_games;
    rep.mean_mouse_return = mouse_ret / n_games;
    for (int k = 0; k < kNumRewardKinds; ++k) {
        if (cat_sums[k] != 0.0) rep.cat_categories[reward_kind_name(static_cast<RewardKind>(k))] = cat_sums[k] / n_games;
        if (mouse_sums[k] != 0.0)
            rep.mouse_categories[reward_kind_name(static_cast<RewardKind>(k))] = mouse_sums[k] / n_games;
    }
    return rep;
}

// --- ablate ---

struct AblationArm {
    std::string name;
    AblationConfig ablation;
};

inline std::vector<AblationArm> ablation_preset(const std::string& preset, const AblationConfig& base) {
    std::vector<AblationArm> arms;
    auto arm = [&](const std::string& name, auto&& mutate) {
        AblationArm a{name, base};
        mutate(a.ablation);
        arms.push_back(std::move(a));
    };
    if (preset == "ada") {
        arm("ada", [](AblationConfig& c) { c.ada_enabled = true; });
        arm("fixed_1_1", [](AblationConfig& c) {
            c.ada_enabled = false;
            c.fixed_ratio = 0.5;
        });
        arm("fixed_1_4", [](AblationConfig& c) {
            c.ada_enabled = false;
            c.fixed_ratio = 0.8;
        });
    } else if (preset == "er") {
        arm("er_on", [](AblationConfig& c) { c.er_enabled = true; });
        arm("er_off", [](AblationConfig& c) { c.er_enabled = false; });
    } else if (preset == "hist") {
        arm("hist_00", [](AblationConfig& c) { c.historical_ratio = 0.0; });
        arm("hist_02", [](AblationConfig& c) { c.historical_ratio = 0.2; });
        arm("hist_05", [](AblationConfig& c) { c.historical_ratio = 0.5; });
    } else if (preset == "memory") {
        arm("memory_on", [](AblationConfig& c) { c.memory_info = true; });
        arm("memory_off", [](AblationConfig& c) { c.memory_info = false; });
    } else if (preset == "invisible") {
        arm("invisible_on", [](AblationConfig& c) { c.invisible_info = true; });
        arm("invisible_off", [](AblationConfig& c) { c.invisible_info = false; });
    } else if (preset == "gamma") {
        arm("gamma_090", [](AblationConfig& c) { c.gamma_override = 0.90; });
        arm("gamma_097", [](AblationConfig& c) { c.gamma_override = 0.97; });
        arm("gamma_099", [](AblationConfig& c) { c.gamma_override = 0.99; });
    } else {
        throw InputError("unknown ablation preset: " + preset);
    }
    return arms;
}

struct ArmSeedResult {
    std::string arm;
    uint64_t seed = 0;
    double mouse_mu = 0.0, mouse_sigma = 0.0;
    int eval_games = 0;
    double final_gap = 0.0;
    double final_ratio = 0.0;
    std::string checkpoint_cat, checkpoint_mouse;
};

struct AblationReport {
    std::string preset;
    std::vector<ArmSeedResult> results;
    std::string csv_path;
};

// Round-robin TrueSkill evaluation of one seed's final snapshots: every arm
// mouse vs every arm cat plus a frozen scripted anchor pair held at mu0.
// Ratings of the anchors never move, which pins the scale across arms.
inline void rate_round_robin(std::vector<ArmSeedResult>& seed_results,
                             const std::vector<std::shared_ptr<const NetworkParams>>& mice,
                             const std::vector<std::shared_ptr<const NetworkParams>>& cats, int games_per_pair,
                             uint64_t seed, const TrueSkillConfig& ts) {
    ScriptedCat anchor_cat(CatSkill::Hunter);
    ScriptedMouse anchor_mouse(MouseSkill::Worker);
    const Rating anchor{ts.mu0, ts.sigma0, 0};

    std::vector<Rating> mouse_ratings(mice.size(), initial_rating(ts));
    std::vector<Rating> cat_ratings(cats.size(), initial_rating(ts));

    ArenaConfig arena = mice.empty() ? ArenaConfig{} : mice[0]->arena;
    ObsEncConfig enc = mice.empty() ? ObsEncConfig{} : mice[0]->enc;

    auto play = [&](const std::shared_ptr<const NetworkParams>& cat_net, ScriptedPolicy* cat_bot,
                    const std::shared_ptr<const NetworkParams>& mouse_net, ScriptedPolicy* mouse_bot,
                    uint64_t game_seed) {
        PlayerSpec pc, pm;
        pc.net = cat_net;
        pc.scripted = cat_bot;
        pm.net = mouse_net;
        pm.scripted = mouse_bot;
        EpisodeSpec spec;
        spec.arena = arena;
        spec.arena.rng_seed = derive_seed(game_seed, 0xAB1);
        spec.enc = enc;
        spec.episode_seed = derive_seed(game_seed, 0xAB2);
        spec.decay_progress = 1.0;
        return play_episode(pc, pm, spec).winner;
    };

    uint64_t game = 0;
    for (size_t mi = 0; mi < mice.size(); ++mi) {
        // vs every arm cat
        for (size_t ci = 0; ci < cats.size(); ++ci)
            for (int g = 0; g < games_per_pair; ++g) {
                const Winner w = play(cats[ci], nullptr, mice[mi], nullptr, derive_seed(seed, ++game, g));
                if (w == Winner::Mice)
                    std::tie(mouse_ratings[mi], cat_ratings[ci]) =
                        trueskill_update(mouse_ratings[mi], cat_ratings[ci], ts);
                else
                    std::tie(cat_ratings[ci], mouse_ratings[mi]) =
                        trueskill_update(cat_ratings[ci], mouse_ratings[mi], ts);
            }
        // vs the anchor cat: only the mouse rating moves
        for (int g = 0; g < games_per_pair; ++g) {
            const Winner w = play(nullptr, &anchor_cat, mice[mi], nullptr, derive_seed(seed, ++game, g));
            if (w == Winner::Mice)
                mouse_ratings[mi] = trueskill_update(mouse_ratings[mi], anchor, ts).first;
            else
                mouse_ratings[mi] = trueskill_update(anchor, mouse_ratings[mi], ts).second;
        }
    }
    // anchor mouse vs arm cats keeps cat ratings grounded too
    for (size_t ci = 0; ci < cats.size(); ++ci)
        for (int g = 0; g < games_per_pair; ++g) {
            const Winner w = play(cats[ci], nullptr, nullptr, &anchor_mouse, derive_seed(seed, ++game, g));
            if (w == Winner::Cat)
                cat_ratings[ci] = trueskill_update(cat_ratings[ci], anchor, ts).first;
            else
                cat_ratings[ci] = trueskill_update(anchor, cat_ratings[ci], ts).second;
        }

    for (size_t mi = 0; mi < mice.size(); ++mi) {
        seed_results[mi].mouse_mu = mouse_ratings[mi].mu;
        seed_results[mi].mouse_sigma = mouse_ratings[mi].sigma;
        seed_results[mi].eval_games = mouse_ratings[mi].games;
    }
}

inline AblationReport run_ablate(const ExperimentConfig& base, const std::string& preset,
                                 const std::vector<uint64_t>& seeds, int eval_games_per_pair = 16) {
    namespace fs = std::filesystem;
    AblationReport report;
    report.preset = preset;
    const auto arms = ablation_preset(preset, base.ablation);
    fs::create_directories(base.out_dir);

    nlohmann::json diffs = nlohmann::json::array();
    for (const auto& arm : arms)
        diffs.push_back({{"arm", arm.name}, {"ablation", arm.ablation}});
    {
        std::ofstream f(fs::path(base.out_dir) / ("ablation_" + preset + "_arms.json"));
        f << diffs.dump(2) << "\n";
    }

    for (uint64_t seed : seeds) {
        std::vector<ArmSeedResult> seed_results;
        std::vector<std::shared_ptr<const NetworkParams>> mice, cats;
        for (const auto& arm : arms) {
            ExperimentConfig cfg = base;
            cfg.ablation = arm.ablation;
            cfg.seed = seed;
            cfg.out_dir = (fs::path(base.out_dir) / (preset + "_" + arm.name + "_s" + std::to_string(seed))).string();
            TrainOutcome out = run_train(cfg);
            ArmSeedResult r;
            r.arm = arm.name;
            r.seed = seed;
            r.final_gap = std::abs(out.artifacts.final_wc - out.artifacts.final_wm);
            r.final_ratio = out.artifacts.final_ratio;
            r.checkpoint_cat = out.artifacts.checkpoint_cat;
            r.checkpoint_mouse = out.artifacts.checkpoint_mouse;
            seed_results.push_back(std::move(r));
            mice.push_back(std::make_shared<const NetworkParams>(load_snapshot(out.artifacts.checkpoint_mouse)));
            cats.push_back(std::make_shared<const NetworkParams>(load_snapshot(out.artifacts.checkpoint_cat)));
        }
        rate_round_robin(seed_results, mice, cats, eval_games_per_pair, derive_seed(base.seed, 0xEE, seed),
                         base.trueskill);
        for (auto& r : seed_results) report.results.push_back(std::move(r));
    }

    report.csv_path = (fs::path(base.out_dir) / ("ablation_" + preset + ".csv")).string();
    std::ofstream csv(report.csv_path);
    if (!csv) throw IoError("cannot write ablation csv");
    csv << "preset,arm,seed,mouse_trueskill_mu,mouse_trueskill_sigma,eval_games,final_gap,final_ratio\n";
    for (const auto& r : report.results)
        csv << preset << "," << r.arm << "," << r.seed << "," << r.mouse_mu << "," << r.mouse_sigma << ","
            << r.eval_games << "," << r.final_gap << "," << r.final_ratio << "\n";
    return report;
}

}  // namespace aet
