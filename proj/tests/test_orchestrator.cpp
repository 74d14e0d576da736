#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aet/experiment.hpp"
#include "aet/orchestrator.hpp"
#include "test_helpers.hpp"

using namespace aet;
using namespace aet_test;

namespace {

ExperimentConfig smoke_config(uint64_t seed, const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.arena = tiny_arena(seed);
    cfg.enc = tiny_enc();
    cfg.net = tiny_net();
    cfg.ppo.trajectory_length = 32;
    cfg.workers = 1;
    cfg.seed = seed;
    cfg.total_iterations = 6;
    cfg.batch_size = 64;
    cfg.publish_interval = 2;
    cfg.admit_interval = 3;
    cfg.metrics_interval = 1;
    cfg.buffer_capacity_segments = 64;
    cfg.league.eval_games_per_pair = 1;
    cfg.ada.window_episodes = 20;
    cfg.ada.update_interval = 2;
    cfg.out_dir = out_dir;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("ada: hand-evaluated update cases") {
    CHECK(ada_update(0.6, 0.8, 0.2, 0.8, 0.5) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(ada_update(0.7, 0.2, 0.8, 0.8, 0.5) == doctest::Approx(0.5).epsilon(1e-12));   // lower clamp
    CHECK(ada_update(0.65, 0.5, 0.5, 0.8, 0.5) == doctest::Approx(0.65).epsilon(1e-12));  // no change
    CHECK(ada_update(0.8, 1.0, 0.0, 0.8, 0.5) == doctest::Approx(0.8).epsilon(1e-12));   // upper clamp
    CHECK_THROWS_AS(ada_update(0.6, 1.2, 0.0, 0.8, 0.5), InputError);
}

TEST_CASE("ada: ratio never leaves [beta, alpha] under random win-rate streams") {
    Rng rng(41);
    double r = 0.65;
    for (int i = 0; i < 5000; ++i) {
        const double wc = rng.uniform();
        r = ada_update(r, wc, 1.0 - wc, 0.8, 0.5);
        REQUIRE(r >= 0.5);
        REQUIRE(r <= 0.8);
    }
}

TEST_CASE("allocate_workers: rounding and floor protection") {
    CHECK(allocate_workers(10, 0.7) == std::pair<int, int>{7, 3});
    CHECK(allocate_workers(2, 0.8) == std::pair<int, int>{1, 1});
    CHECK(allocate_workers(2, 0.1) == std::pair<int, int>{1, 1});
    CHECK(allocate_workers(5, 0.5) == std::pair<int, int>{3, 2});
    CHECK_THROWS_AS(allocate_workers(1, 0.5), InputError);
}

TEST_CASE("scheduler: long-run mouse fraction tracks the ratio") {
    for (double ratio : {0.5, 0.65, 0.8}) {
        EpisodeSideScheduler sched;
        uint64_t mouse = 0;
        for (int i = 0; i < 10000; ++i)
            if (sched.next(ratio) == Side::Mouse) ++mouse;
        CHECK(std::abs(mouse / 10000.0 - ratio) < 0.02);
    }
}

TEST_CASE("er schedule: trigger, frequencies, deactivation") {
    ErConfig cfg;
    ERSchedule er(cfg);
    Rng rng(42);

    // inactive: the draw is always None
    for (int i = 0; i < 1000; ++i) CHECK(er.draw(Side::Mouse, rng).kind == ERKind::None);

    // needs two consecutive windows above the gap
    er.observe_gap(0.5);
    CHECK(!er.active());
    er.observe_gap(0.2);  // interrupted
    er.observe_gap(0.5);
    CHECK(!er.active());
    er.observe_gap(0.4);
    CHECK(er.active());

    // active: intervention frequencies match (0.45, 0.35, 0.15, 0.05) within 3 sigma
    const int draws = 100000;
    std::array<int, 4> counts{};
    for (int i = 0; i < draws; ++i) counts[static_cast<int>(er.draw(Side::Mouse, rng).kind)]++;
    const double expected[4] = {0.05, 0.45, 0.35, 0.15};  // enum order: none, levelup, hardcase, timedbuff
    for (int k = 0; k < 4; ++k) {
        const double sigma = std::sqrt(expected[k] * (1 - expected[k]) * draws);
        CHECK(std::abs(counts[static_cast<size_t>(k)] - expected[k] * draws) <= 3 * sigma);
    }

    // stays active until the gap closes below the deactivation threshold
    er.observe_gap(0.2);
    CHECK(er.active());
    er.observe_gap(0.05);
    CHECK(!er.active());

    ErConfig bad;
    bad.p_none = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("replay buffer: reuse cap, side purity, fifo eviction") {
    Rng rng(43);
    auto seg = [&](int n, Side side = Side::Mouse) {
        Segment s;
        s.side = side;
        s.nominal_length = n;
        s.steps.resize(static_cast<size_t>(n));
        for (auto& t : s.steps) t.weight = 1.0f;
        return s;
    };

    SUBCASE("cap 1.0 refuses reused data") {
        ReplayBuffer buf(Side::Mouse, 16, 1.0);
        buf.push(seg(8));
        CHECK(buf.pop_batch(8, rng).size() == 8);
        CHECK(buf.pop_batch(8, rng).empty());  // nothing left to reuse
    }
    SUBCASE("cap 2.0 reuses each segment exactly once more") {
        ReplayBuffer buf(Side::Mouse, 16, 2.0);
        buf.push(seg(8));
        CHECK(buf.pop_batch(8, rng).size() == 8);
        CHECK(buf.pop_batch(8, rng).size() == 8);
        CHECK(buf.pop_batch(8, rng).empty());
    }
    SUBCASE("wrong side rejected") {
        ReplayBuffer buf(Side::Cat, 16, 1.0);
        CHECK_THROWS_AS(buf.push(seg(4, Side::Mouse)), InputError);
    }
    SUBCASE("fifo eviction under pressure") {
        ReplayBuffer buf(Side::Mouse, 2, 1.0);
        for (int i = 0; i < 5; ++i) buf.push(seg(4));
        CHECK(buf.segments() == 2);
        CHECK(buf.available_transitions() == 8);
    }
    SUBCASE("insufficient data never returns a partial batch") {
        ReplayBuffer buf(Side::Mouse, 16, 1.0);
        buf.push(seg(4));
        CHECK(buf.pop_batch(8, rng).empty());
        CHECK(buf.available_transitions() == 4);
    }
}

TEST_CASE("segment_trajectory: fixed-length slices with inert padding") {
    std::vector<Transition> steps(400);
    for (auto& t : steps) t.weight = 1.0f;
    auto segs = segment_trajectory(Side::Mouse, 2, std::move(steps), 128);
    CHECK(segs.size() == 4);  // ceil(400/128)
    for (const auto& s : segs) {
        CHECK(s.steps.size() == 128);
        CHECK(s.agent_id == 2);
    }
    CHECK(segs[3].real_transitions() == 400 - 3 * 128);
    for (size_t i = static_cast<size_t>(segs[3].real_transitions()); i < 128; ++i) {
        CHECK(segs[3].steps[i].weight == 0.0f);
        CHECK(segs[3].steps[i].done);
    }
}

TEST_CASE("play_episode: trajectory structure, logp replay, side purity, accounting") {
    auto mouse_net = std::make_shared<const NetworkParams>(
        init_params(Side::Mouse, tiny_arena(3), tiny_enc(), tiny_net(), 50));
    ScriptedCat cat_bot(CatSkill::Wander);

    PlayerSpec cat_player, mouse_player;
    cat_player.scripted = &cat_bot;
    mouse_player.net = mouse_net;

    for (uint64_t seed = 0; seed < 8; ++seed) {
        EpisodeSpec spec;
        spec.arena = tiny_arena(3);
        spec.arena.rng_seed = derive_seed(seed, 1);
        spec.enc = tiny_enc();
        spec.ppo = PPOConfig{};
        spec.episode_seed = derive_seed(seed, 2);
        spec.collect_side = 1;  // mice
        EpisodeResult res = play_episode(cat_player, mouse_player, spec);

        REQUIRE(res.winner != Winner::None);
        CHECK(res.trajectories.size() == kNumMice);  // one per controlled mouse
        for (const auto& traj : res.trajectories) {
            CHECK(traj.agent_id >= 1);  // never the opponent side
            REQUIRE(!traj.steps.empty());
            CHECK(traj.steps.back().done);

            // behavior log-prob replay: re-forward on stored observations
            for (size_t i = 0; i < traj.steps.size(); i += 7) {
                const auto& t = traj.steps[i];
                const auto fwd = forward_single(*mouse_net, t.obs);
                double lp = fwd.act_logp[static_cast<size_t>(t.action)];
                if (action_uses_direction(static_cast<Action>(t.action)))
                    lp += fwd.dir_logp[static_cast<size_t>(t.direction)];
                REQUIRE(std::abs(lp - t.behavior_logp) < 1e-6);
                REQUIRE(std::abs(fwd.value - t.behavior_value) < 1e-6);
            }

            // accounting identity: trajectory rewards match emitted events
            double traj_sum = 0;
            for (const auto& t : traj.steps) traj_sum += t.reward;
            REQUIRE(traj_sum == doctest::Approx(res.returns[traj.agent_id]).epsilon(1e-4));

            // G = V + A on every transition
            for (const auto& t : traj.steps) REQUIRE(t.ret == t.behavior_value + t.advantage);
        }
    }
}

TEST_CASE("trainer: loss falls when overfitting a frozen batch distribution") {
    const ArenaConfig arena = tiny_arena(7);
    auto net = init_params(Side::Mouse, arena, tiny_enc(), tiny_net(), 51);
    ScriptedCat cat_bot(CatSkill::Passive);
    PlayerSpec cat_player, mouse_player;
    cat_player.scripted = &cat_bot;
    auto behavior = std::make_shared<const NetworkParams>(net.clone());
    mouse_player.net = behavior;

    // a frozen pool of trajectories from the initial policy
    std::vector<Transition> pool;
    for (uint64_t e = 0; e < 3; ++e) {
        EpisodeSpec spec;
        spec.arena = arena;
        spec.arena.rng_seed = derive_seed(60, e);
        spec.enc = tiny_enc();
        spec.ppo = PPOConfig{};
        spec.episode_seed = derive_seed(61, e);
        spec.collect_side = 1;
        auto res = play_episode(cat_player, mouse_player, spec);
        for (auto& traj : res.trajectories)
            for (auto& t : traj.steps) pool.push_back(std::move(t));
    }
    REQUIRE(pool.size() > 100);

    PPOConfig ppo;
    AdamConfig adam_cfg;
    adam_cfg.lr = 3e-4;
    AdamState adam = AdamState::init(net, adam_cfg);
    double first = 0, last = 0;
    for (int iter = 0; iter < 50; ++iter) {
        auto [loss, parts] = total_loss(net, pool, ppo);
        if (iter == 0) first = parts.total;
        last = parts.total;
        net.zero_grad();
        loss.backward();
        adam_step(net, adam);
    }
    CHECK(last < first);
}

TEST_CASE("run_aet: single-worker smoke run writes checkpoints and coherent metrics") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "aet_orch_smoke";
    fs::remove_all(dir);
    ExperimentConfig cfg = smoke_config(5, dir.string());

    Orchestrator orch(cfg);
    RunArtifacts art = orch.run();
    CHECK(art.iterations_cat + art.iterations_mouse == cfg.total_iterations);
    CHECK(art.episodes > 0);
    CHECK(fs::exists(art.checkpoint_cat));
    CHECK(fs::exists(art.checkpoint_mouse));
    CHECK(fs::exists(fs::path(dir) / "league" / "manifest.json"));

    // at least one periodic checkpoint per side beyond the finals
    int periodic = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(dir) / "checkpoints"))
        if (entry.path().string().find("final") == std::string::npos) ++periodic;
    CHECK(periodic >= 2);

    // metrics: every record parses; ratio stays within [beta, alpha]
    std::ifstream metrics(art.metrics_path);
    REQUIRE(metrics);
    std::string line;
    int records = 0;
    while (std::getline(metrics, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        ++records;
        const double r = j.at("ratio_mouse");
        REQUIRE(r >= cfg.ada.beta);
        REQUIRE(r <= cfg.ada.alpha);
        REQUIRE(j.contains("loss"));
        REQUIRE(j.contains("w_cat"));
        REQUIRE(j.contains("trueskill_mu"));
        REQUIRE(j.contains("interventions"));
    }
    CHECK(records >= static_cast<int>(cfg.total_iterations));

    // published snapshot versions strictly increase per side
    std::map<std::string, std::vector<uint64_t>> steps;
    for (const auto& entry : fs::directory_iterator(fs::path(dir) / "checkpoints")) {
        const auto name = entry.path().filename().string();
        if (name.find("final") != std::string::npos) continue;
        const auto side = name.substr(0, name.find('_'));
        steps[side].push_back(load_snapshot(entry.path().string()).train_step);
    }
    for (auto& [side, v] : steps) {
        std::sort(v.begin(), v.end());
        for (size_t i = 1; i < v.size(); ++i) REQUIRE(v[i] > v[i - 1]);
    }
    fs::remove_all(dir);
}

TEST_CASE("run_aet: identical config and seed reproduce the metrics byte for byte") {
    namespace fs = std::filesystem;
    const auto dir_a = fs::temp_directory_path() / "aet_repro_a";
    const auto dir_b = fs::temp_directory_path() / "aet_repro_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    ExperimentConfig cfg = smoke_config(9, dir_a.string());
    RunArtifacts a = Orchestrator(cfg).run();
    cfg.out_dir = dir_b.string();
    RunArtifacts b = Orchestrator(cfg).run();

    CHECK(slurp(a.metrics_path) == slurp(b.metrics_path));
    CHECK(slurp(a.checkpoint_mouse) == slurp(b.checkpoint_mouse));
    CHECK(slurp(a.checkpoint_cat) == slurp(b.checkpoint_cat));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("run_aet: multi-worker mode completes and respects worker floors") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "aet_orch_threads";
    fs::remove_all(dir);
    ExperimentConfig cfg = smoke_config(11, dir.string());
    cfg.workers = 3;
    cfg.total_iterations = 4;
    RunArtifacts art = Orchestrator(cfg).run();
    CHECK(art.iterations_cat + art.iterations_mouse == 4);
    CHECK(fs::exists(art.checkpoint_cat));
    fs::remove_all(dir);
}

TEST_CASE("experiment config: json round trip is stable and ablations fold in") {
    ExperimentConfig cfg = smoke_config(3, "some_dir");
    cfg.ablation.er_enabled = false;
    cfg.ablation.historical_ratio = 0.5;
    cfg.ablation.gamma_override = 0.97;

    const nlohmann::json j = cfg;
    const ExperimentConfig parsed = j.get<ExperimentConfig>();
    CHECK(nlohmann::json(parsed) == j);
    CHECK(config_hash(parsed) == config_hash(cfg));

    const ExperimentConfig resolved = parsed.resolved();
    CHECK(!resolved.er.enabled);
    CHECK(resolved.league.historical_ratio == 0.5);
    CHECK(resolved.ppo.gamma == 0.97);

    // defaults fill missing keys; unknown values fail validation with a message
    const auto partial = nlohmann::json::parse(R"({"workers": 4})").get<ExperimentConfig>();
    CHECK(partial.workers == 4);
    CHECK(partial.arena.width == 16);
}
