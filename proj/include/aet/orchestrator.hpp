#pragma once

// The asymmetric-evolution training loop: two trainers (cat, mouse) fed by a
// sampler pool whose episode allocation follows ADA, with environment
// randomization against the stronger side, pFSP opponent draws from the
// historical model pool, and a JSON-lines metrics stream.
//
// Concurrency: N workers each own an arena and read-only snapshot copies;
// trajectories flow through mutex-guarded per-side buffers to the single
// trainer thread (the orchestrator's main thread trains both sides, one
// iteration at a time). League, allocation state and scheduling randomness
// are serialized behind one scheduler mutex. workers == 1 selects a fully
// sequential, bit-reproducible path.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aet/league.hpp"
#include "aet/match.hpp"
#include "aet/replay_buffer.hpp"

namespace aet {

// --- ADA (Eqs. 5-6) ---

struct AdaConfig {
    bool enabled = true;
    double alpha = 0.8;          // upper ratio bound
    double beta = 0.5;           // lower ratio bound
    double initial_ratio = 0.65;
    double fixed_ratio = 0.5;    // used when ADA is disabled (ablation arm)
    int update_interval = 20;    // trainer iterations between adjustments
    int window_episodes = 200;   // sliding window for w_c / w_m

    void validate() const {
        if (!(alpha > beta)) throw ConfigError("ada: alpha must exceed beta");
        if (alpha > 1.0 || beta < 0.0) throw ConfigError("ada: bounds must lie in [0,1]");
        if (initial_ratio < beta || initial_ratio > alpha)
            throw ConfigError("ada: initial_ratio must lie in [beta, alpha]");
        if (update_interval < 1 || window_episodes < 1) throw ConfigError("ada: intervals must be >= 1");
    }
    bool operator==(const AdaConfig&) const = default;
};

// dif = 0.25(w_c - w_m) if w_c >= w_m else (w_c - w_m);
// r = min(alpha, max(beta, r_old + dif)).
inline double ada_update(double r_old, double w_cat, double w_mouse, double alpha, double beta) {
    if (w_cat < 0.0 || w_cat > 1.0 || w_mouse < 0.0 || w_mouse > 1.0)
        throw InputError("ada_update: win rates must lie in [0,1]");
    const double dif = w_cat >= w_mouse ? 0.25 * (w_cat - w_mouse) : (w_cat - w_mouse);
    return std::min(alpha, std::max(beta, r_old + dif));
}

// (mouse workers, cat workers); each side keeps at least one.
inline std::pair<int, int> allocate_workers(int total, double mouse_ratio) {
    if (total < 2) throw InputError("allocate_workers: need at least 2 workers");
    int mouse = static_cast<int>(std::lround(total * mouse_ratio));
    mouse = std::max(1, std::min(total - 1, mouse));
    return {mouse, total - mouse};
}

// Deterministic largest-remainder side scheduler (single-worker mode): the
// long-run mouse fraction tracks the target ratio exactly.
class EpisodeSideScheduler {
  public:
    Side next(double mouse_ratio) {
        const Side s =
            static_cast<double>(mouse_count_) < mouse_ratio * static_cast<double>(total_ + 1) ? Side::Mouse
                                                                                              : Side::Cat;
        if (s == Side::Mouse) ++mouse_count_;
        ++total_;
        return s;
    }
    uint64_t total() const { return total_; }
    uint64_t mouse_count() const { return mouse_count_; }

  private:
    uint64_t mouse_count_ = 0;
    uint64_t total_ = 0;
};

// --- ER schedule ---

struct ErConfig {
    bool enabled = true;
    double trigger_gap = 0.3;
    int trigger_windows = 2;      // consecutive observations above the gap
    double deactivate_gap = 0.1;  // active until the gap falls below this
    double p_levelup = 0.45;
    double p_hardcase = 0.35;
    double p_timedbuff = 0.15;
    double p_none = 0.05;
    int buff_window = 40;

    void validate() const {
        const double sum = p_levelup + p_hardcase + p_timedbuff + p_none;
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("er: intervention probabilities must sum to 1");
        if (trigger_gap < deactivate_gap) throw ConfigError("er: trigger_gap must be >= deactivate_gap");
        if (trigger_windows < 1) throw ConfigError("er: trigger_windows must be >= 1");
        if (buff_window < 1) throw ConfigError("er: buff_window must be >= 1");
    }
    bool operator==(const ErConfig&) const = default;
};

class ERSchedule {
  public:
    explicit ERSchedule(ErConfig cfg) : cfg_(cfg) { cfg.validate(); }

    // Called at the ADA cadence with the current windowed gap.
    void observe_gap(double gap) {
        if (!cfg_.enabled) return;
        if (active_) {
            if (gap < cfg_.deactivate_gap) {
                active_ = false;
                consecutive_ = 0;
            }
            return;
        }
        if (gap > cfg_.trigger_gap) {
            if (++consecutive_ >= cfg_.trigger_windows) active_ = true;
        } else {
            consecutive_ = 0;
        }
    }

    bool active() const { return cfg_.enabled && active_; }
    const ErConfig& config() const { return cfg_; }

    // Intervention draw for one episode; `weaker` is the side with the lower
    // windowed win rate. Inactive schedules always return None.
    ERIntervention draw(Side weaker, Rng& rng) const {
        ERIntervention iv;
        iv.weaker = weaker;
        iv.buff_window = cfg_.buff_window;
        iv.seed = rng.next_u64();
        if (!active()) return iv;
        const double u = rng.uniform();
        if (u < cfg_.p_levelup)
            iv.kind = ERKind::LevelUp;
        else if (u < cfg_.p_levelup + cfg_.p_hardcase)
            iv.kind = ERKind::HardCase;
        else if (u < cfg_.p_levelup + cfg_.p_hardcase + cfg_.p_timedbuff)
            iv.kind = ERKind::TimedBuff;
        else
            iv.kind = ERKind::None;
        return iv;
    }

  private:
    ErConfig cfg_;
    bool active_ = false;
    int consecutive_ = 0;
};

// --- Experiment configuration ---

struct AblationConfig {
    bool ada_enabled = true;
    double fixed_ratio = 0.5;  // when ADA is off
    bool er_enabled = true;
    double historical_ratio = 0.2;
    bool memory_info = true;
    bool invisible_info = true;
    double gamma_override = 0.0;  // 0 = keep ppo.gamma
    bool operator==(const AblationConfig&) const = default;
};

struct ExperimentConfig {
    ArenaConfig arena;
    ObsEncConfig enc;
    NetConfig net;
    PPOConfig ppo;
    AdamConfig adam;
    AdaConfig ada;
    ErConfig er;
    LeagueConfig league;
    TrueSkillConfig trueskill;
    AblationConfig ablation;

    int workers = 2;
    uint64_t seed = 0;
    uint64_t total_iterations = 200;  // trainer iterations, both sides combined
    int batch_size = 4096;
    int publish_interval = 5;    // iterations between snapshot publications, per side
    int admit_interval = 50;     // iterations between HMP admissions, per side
    int metrics_interval = 10;   // iterations between metric records, per side
    int buffer_capacity_segments = 64;
    double guidance_decay_horizon = 2e6;  // env steps until guidance coefficients anneal out
    bool per_worker_historical = false;   // dedicate workers to HMP opponents instead of per-episode draws
    std::string out_dir = "aet_run";

    // Ablation switches folded into the sub-configs.
    ExperimentConfig resolved() const {
        ExperimentConfig c = *this;
        c.ada.enabled = ablation.ada_enabled;
        c.ada.fixed_ratio = ablation.fixed_ratio;
        c.er.enabled = ablation.er_enabled;
        c.league.historical_ratio = ablation.historical_ratio;
        c.enc.memory_info = ablation.memory_info;
        c.enc.invisible_info = ablation.invisible_info;
        if (ablation.gamma_override > 0.0) c.ppo.gamma = ablation.gamma_override;
        return c;
    }

    void validate() const {
        arena.validate();
        enc.validate();
        net.validate();
        ppo.validate();
        ada.validate();
        er.validate();
        league.validate();
        if (workers < 1) throw ConfigError("experiment: workers must be >= 1");
        if (total_iterations < 1) throw ConfigError("experiment: total_iterations must be >= 1");
        if (batch_size < 1) throw ConfigError("experiment: batch_size must be >= 1");
        if (publish_interval < 1 || admit_interval < 1 || metrics_interval < 1)
            throw ConfigError("experiment: intervals must be >= 1");
        if (buffer_capacity_segments < 1) throw ConfigError("experiment: buffer capacity must be >= 1");
        if (guidance_decay_horizon <= 0.0) throw ConfigError("experiment: decay horizon must be > 0");
        if (out_dir.empty()) throw ConfigError("experiment: out_dir must be set");
    }
};

// --- Run artifacts ---

struct RunArtifacts {
    std::string out_dir;
    std::string metrics_path;
    std::string checkpoint_cat;
    std::string checkpoint_mouse;
    double final_wc = 0.0, final_wm = 0.0, final_ratio = 0.0;
    uint64_t iterations_cat = 0, iterations_mouse = 0;
    uint64_t episodes = 0;
    uint64_t discarded_episodes = 0;
    std::array<uint64_t, 4> intervention_counts{};  // none, levelup, hardcase, timedbuff
};

// --- Orchestrator ---

class Orchestrator {
  public:
    explicit Orchestrator(const ExperimentConfig& raw)
        : cfg_(raw.resolved()),
          sched_rng_(derive_seed(cfg_.seed, 0x53434845)),  // "SCHE"
          window_capacity_(cfg_.ada.window_episodes),
          er_(cfg_.er) {
        cfg_.validate();
        arena_hash_ = cfg_.arena.hash();
        ratio_ = cfg_.ada.enabled ? cfg_.ada.initial_ratio : cfg_.ada.fixed_ratio;

        for (Side side : {Side::Cat, Side::Mouse}) {
            auto& t = trainer(side);
            t.side = side;
            t.params = init_params(side, cfg_.arena, cfg_.enc, cfg_.net, derive_seed(cfg_.seed, 0x1217, (int)side));
            t.adam = AdamState::init(t.params, cfg_.adam);
            t.published = std::make_shared<const NetworkParams>(t.params.clone());
            t.buffer = std::make_unique<ReplayBuffer>(side, cfg_.buffer_capacity_segments, cfg_.ppo.sample_reuse_cap);
            t.rng = Rng(derive_seed(cfg_.seed, 0x7261, (int)side));
        }

        league_ = std::make_unique<League>(
            cfg_.league, cfg_.trueskill,
            [this](const NetworkParams& cat, const NetworkParams& mouse, uint64_t seed) {
                return run_eval_game(cat, mouse, seed);
            },
            arena_hash_, derive_seed(cfg_.seed, 0x4C47));
    }

    const ExperimentConfig& config() const { return cfg_; }

    RunArtifacts run() {
        namespace fs = std::filesystem;
        fs::create_directories(cfg_.out_dir);
        fs::create_directories(fs::path(cfg_.out_dir) / "checkpoints");
        metrics_.open(fs::path(cfg_.out_dir) / "metrics.jsonl", std::ios::trunc);
        if (!metrics_) throw IoError("cannot open metrics stream in " + cfg_.out_dir);

        if (cfg_.workers == 1)
            run_single();
        else
            run_threaded();

        RunArtifacts art;
        art.out_dir = cfg_.out_dir;
        art.metrics_path = (fs::path(cfg_.out_dir) / "metrics.jsonl").string();
        for (Side side : {Side::Cat, Side::Mouse}) {
            auto& t = trainer(side);
            t.params.train_step = t.iterations;
            const std::string path =
                (fs::path(cfg_.out_dir) / "checkpoints" / (std::string(side_name(side)) + "_final.aetsnap")).string();
            save_snapshot(t.params, path);
            (side == Side::Cat ? art.checkpoint_cat : art.checkpoint_mouse) = path;
        }
        league_->save((fs::path(cfg_.out_dir) / "league").string());
        auto [wc, wm] = window_rates();
        art.final_wc = wc;
        art.final_wm = wm;
        art.final_ratio = ratio_;
        art.iterations_cat = trainer(Side::Cat).iterations;
        art.iterations_mouse = trainer(Side::Mouse).iterations;
        art.episodes = episodes_;
        art.discarded_episodes = discarded_;
        art.intervention_counts = intervention_counts_;
        metrics_.close();
        return art;
    }

    // exposed for tests
    std::pair<double, double> window_rates() const {
        if (window_.empty()) return {0.0, 0.0};
        double cat = 0;
        for (Winner w : window_)
            if (w == Winner::Cat) cat += 1.0;
        const double wc = cat / static_cast<double>(window_.size());
        return {wc, 1.0 - wc};
    }
    double ratio() const { return ratio_; }
    const ERSchedule& er_schedule() const { return er_; }
    League& league() { return *league_; }

  private:
    struct TrainerState {
        Side side = Side::Cat;
        NetworkParams params;
        AdamState adam;
        std::shared_ptr<const NetworkParams> published;
        std::unique_ptr<ReplayBuffer> buffer;
        Rng rng;
        uint64_t iterations = 0;
        uint64_t skipped_nonfinite = 0;
        LossParts last_loss;
    };

    TrainerState& trainer(Side s) { return s == Side::Cat ? cat_ : mouse_; }

    struct ScheduledEpisode {
        Side learner = Side::Mouse;
        std::shared_ptr<const NetworkParams> learner_net;
        std::shared_ptr<const NetworkParams> opponent_net;
        EpisodeSpec spec;
    };

    std::shared_ptr<const NetworkParams> published(Side s) {
        std::lock_guard lk(publish_mu_);
        return trainer(s).published;
    }

    void publish(Side s) {
        auto& t = trainer(s);
        t.params.train_step = t.iterations;
        auto snap = std::make_shared<const NetworkParams>(t.params.clone());
        std::lock_guard lk(publish_mu_);
        t.published = std::move(snap);
    }

    ScheduledEpisode schedule_episode(Side side, int worker_idx) {
        std::lock_guard lk(sched_mu_);
        ScheduledEpisode ep;
        ep.learner = side;
        ep.learner_net = published(side);

        auto latest = published(other_side(side));
        if (cfg_.per_worker_historical) {
            // dedicated-worker reading of the 80/20 split: the low-index
            // fraction of each side's workers always loads HMP models
            const auto& opp_pool = league_->pool(other_side(side));
            const bool dedicated =
                worker_idx >= 0 &&
                worker_idx < static_cast<int>(std::lround(cfg_.league.historical_ratio * cfg_.workers));
            if (dedicated && !opp_pool.empty()) {
                const auto weights = pfsp_weights(league_->own_winrates_vs(side), cfg_.league.pfsp_power);
                ep.opponent_net = opp_pool[sched_rng_.weighted(weights)].params;
            } else {
                ep.opponent_net = latest;
            }
        } else {
            ep.opponent_net = league_->select_opponent(side, latest, sched_rng_);
        }

        ep.spec.arena = cfg_.arena;
        ep.spec.arena.rng_seed = sched_rng_.next_u64();
        ep.spec.enc = cfg_.enc;
        ep.spec.ppo = cfg_.ppo;
        ep.spec.episode_seed = sched_rng_.next_u64();
        ep.spec.collect_side = side == Side::Cat ? 0 : 1;
        ep.spec.decay_progress =
            std::min(1.0, static_cast<double>(env_steps_.load()) / cfg_.guidance_decay_horizon);
        Side weaker;
        {
            std::lock_guard wlk(buffer_mu_);
            double cat = 0;
            for (Winner w : window_)
                if (w == Winner::Cat) cat += 1.0;
            const double wc = window_.empty() ? 0.5 : cat / static_cast<double>(window_.size());
            weaker = wc >= 0.5 ? Side::Mouse : Side::Cat;
        }
        ep.spec.intervention = er_.draw(weaker, sched_rng_);
        intervention_counts_[static_cast<int>(ep.spec.intervention.kind)] += 1;
        return ep;
    }

    void record_episode(EpisodeResult res, Side learner) {
        std::vector<Segment> segs;
        for (auto& traj : res.trajectories)
            for (auto& seg :
                 segment_trajectory(learner, traj.agent_id, std::move(traj.steps), cfg_.ppo.trajectory_length))
                segs.push_back(std::move(seg));
        {
            std::lock_guard lk(buffer_mu_);
            auto& buf = *trainer(learner).buffer;
            for (auto& seg : segs) buf.push(std::move(seg));
            window_.push_back(res.winner);
            while (static_cast<int>(window_.size()) > window_capacity_) window_.pop_front();
        }
        env_steps_ += static_cast<uint64_t>(res.steps);
        episodes_ += 1;
        buffer_cv_.notify_all();
    }

    EpisodeResult play_scheduled(const ScheduledEpisode& ep) {
        PlayerSpec cat_player, mouse_player;
        auto& learner_player = ep.learner == Side::Cat ? cat_player : mouse_player;
        auto& opponent_player = ep.learner == Side::Cat ? mouse_player : cat_player;
        learner_player.net = ep.learner_net;
        opponent_player.net = ep.opponent_net;
        return play_episode(cat_player, mouse_player, ep.spec);
    }

    // One clean evaluation game for the league (ER off, stochastic play).
    Winner run_eval_game(const NetworkParams& cat, const NetworkParams& mouse, uint64_t seed) {
        PlayerSpec pc, pm;
        auto cat_ref = std::shared_ptr<const NetworkParams>(&cat, [](const NetworkParams*) {});
        auto mouse_ref = std::shared_ptr<const NetworkParams>(&mouse, [](const NetworkParams*) {});
        pc.net = cat_ref;
        pm.net = mouse_ref;
        EpisodeSpec spec;
        spec.arena = cfg_.arena;
        spec.arena.rng_seed = derive_seed(seed, 0xA0);
        spec.enc = cfg_.enc;
        spec.ppo = cfg_.ppo;
        spec.episode_seed = derive_seed(seed, 0xA1);
        spec.collect_side = -1;
        spec.decay_progress = 1.0;
        return play_episode(pc, pm, spec).winner;
    }

    // One trainer iteration for `side` if its buffer holds a batch. Returns
    // true when an update (or an explicitly skipped non-finite update) ran.
    bool trainer_iteration(Side side) {
        auto& t = trainer(side);
        std::vector<Transition> batch;
        {
            std::lock_guard lk(buffer_mu_);
            batch = t.buffer->pop_batch(cfg_.batch_size, t.rng);
        }
        if (batch.empty()) return false;

        auto [loss, parts] = total_loss(t.params, batch, cfg_.ppo);
        t.last_loss = parts;
        if (!std::isfinite(parts.total)) {
            t.skipped_nonfinite += 1;
            t.iterations += 1;
            return true;
        }
        t.params.zero_grad();
        loss.backward();
        adam_step(t.params, t.adam);
        t.iterations += 1;

        if (t.iterations % static_cast<uint64_t>(cfg_.publish_interval) == 0) publish(side);
        if (t.iterations % static_cast<uint64_t>(cfg_.admit_interval) == 0) {
            publish(side);
            admit_and_checkpoint(side);
        }
        if (t.iterations % static_cast<uint64_t>(cfg_.metrics_interval) == 0) write_metrics(side);
        return true;
    }

    void admit_and_checkpoint(Side side) {
        namespace fs = std::filesystem;
        auto snap = published(side);
        {
            std::lock_guard lk(sched_mu_);
            league_->admit_model(snap);
        }
        const std::string path = (fs::path(cfg_.out_dir) / "checkpoints" /
                                  (std::string(side_name(side)) + "_" + std::to_string(snap->train_step) +
                                   ".aetsnap"))
                                     .string();
        save_snapshot(*snap, path);
    }

    void maybe_ada_update() {
        const uint64_t total = cat_.iterations + mouse_.iterations;
        if (total < next_ada_at_) return;
        next_ada_at_ = total + static_cast<uint64_t>(cfg_.ada.update_interval);
        double wc, wm;
        {
            std::lock_guard lk(buffer_mu_);
            if (window_.empty()) return;
            std::tie(wc, wm) = window_rates_locked();
        }
        {
            std::lock_guard lk(sched_mu_);
            if (cfg_.ada.enabled) ratio_ = ada_update(ratio_, wc, wm, cfg_.ada.alpha, cfg_.ada.beta);
            er_.observe_gap(std::abs(wc - wm));
        }
        reassign_workers();
    }

    std::pair<double, double> window_rates_locked() const {
        double cat = 0;
        for (Winner w : window_)
            if (w == Winner::Cat) cat += 1.0;
        const double wc = cat / static_cast<double>(window_.size());
        return {wc, 1.0 - wc};
    }

    void reassign_workers() {
        if (cfg_.workers < 2) return;
        const auto [mouse_n, cat_n] = allocate_workers(cfg_.workers, ratio_);
        std::lock_guard lk(assign_mu_);
        assignments_.assign(static_cast<size_t>(cfg_.workers), Side::Cat);
        for (int i = 0; i < mouse_n; ++i) assignments_[i] = Side::Mouse;
    }

    Side worker_side(int idx) {
        std::lock_guard lk(assign_mu_);
        return assignments_[static_cast<size_t>(idx)];
    }

    void write_metrics(Side side) {
        auto& t = trainer(side);
        double wc = 0.0, wm = 0.0;
        {
            std::lock_guard lk(buffer_mu_);
            if (!window_.empty()) std::tie(wc, wm) = window_rates_locked();
        }
        Rating rating;
        double ratio_now;
        bool er_active;
        std::array<uint64_t, 4> iv_counts;
        {
            std::lock_guard lk(sched_mu_);
            const auto& pool = league_->pool(side);
            if (!pool.empty()) rating = pool.back().rating;
            ratio_now = ratio_;
            er_active = er_.active();
            iv_counts = intervention_counts_;
        }
        nlohmann::json rec = {{"iteration", t.iterations},
                              {"side", side_name(side)},
                              {"loss", t.last_loss.total},
                              {"policy_loss", t.last_loss.policy},
                              {"value_loss", t.last_loss.value},
                              {"entropy", t.last_loss.entropy},
                              {"mean_ratio", t.last_loss.mean_ratio},
                              {"w_cat", wc},
                              {"w_mouse", wm},
                              {"ratio_mouse", ratio_now},
                              {"trueskill_mu", rating.mu},
                              {"trueskill_sigma", rating.sigma},
                              {"er_active", er_active},
                              {"interventions",
                               {{"none", iv_counts[0]},
                                {"levelup", iv_counts[1]},
                                {"hardcase", iv_counts[2]},
                                {"timedbuff", iv_counts[3]}}},
                              {"episodes", episodes_.load()},
                              {"skipped_nonfinite", t.skipped_nonfinite},
                              {"env_steps", env_steps_.load()}};
        std::lock_guard lk(metrics_mu_);
        metrics_ << rec.dump() << "\n";
        metrics_.flush();
    }

    // Sequential, bit-reproducible path.
    void run_single() {
        EpisodeSideScheduler side_sched;
        uint64_t total = 0;
        while (total < cfg_.total_iterations) {
            const Side side = side_sched.next(ratio_);
            auto ep = schedule_episode(side, /*worker_idx=*/-1);
            record_episode(play_scheduled(ep), side);
            for (Side s : {Side::Mouse, Side::Cat}) {
                while (total < cfg_.total_iterations && trainer_iteration(s)) {
                    ++total;
                    maybe_ada_update();
                }
            }
        }
    }

    void run_threaded() {
        reassign_workers();
        stop_.store(false);
        std::vector<std::thread> workers;
        workers.reserve(static_cast<size_t>(cfg_.workers));
        for (int i = 0; i < cfg_.workers; ++i) {
            workers.emplace_back([this, i] {
                while (!stop_.load(std::memory_order_relaxed)) {
                    try {
                        const Side side = worker_side(i);
                        auto ep = schedule_episode(side, i);
                        auto res = play_scheduled(ep);
                        if (stop_.load(std::memory_order_relaxed)) break;
                        record_episode(res, side);
                    } catch (const std::exception&) {
                        discarded_ += 1;  // episode discarded, worker lives on
                    }
                }
            });
        }

        uint64_t total = 0;
        try {
            while (total < cfg_.total_iterations) {
                bool progressed = false;
                for (Side s : {Side::Mouse, Side::Cat}) {
                    if (total >= cfg_.total_iterations) break;
                    if (trainer_iteration(s)) {
                        ++total;
                        progressed = true;
                        maybe_ada_update();
                    }
                }
                if (!progressed) {
                    if (discarded_.load() > 50 && episodes_.load() == 0)
                        throw StateError("every sampler episode is failing; aborting the run");
                    std::unique_lock lk(buffer_mu_);
                    buffer_cv_.wait_for(lk, std::chrono::milliseconds(20));
                }
            }
        } catch (...) {
            stop_.store(true);
            buffer_cv_.notify_all();
            for (auto& w : workers) w.join();
            throw;  // final checkpoints are written by run()'s caller path on rethrow
        }
        stop_.store(true);
        buffer_cv_.notify_all();
        for (auto& w : workers) w.join();
    }

    ExperimentConfig cfg_;
    uint64_t arena_hash_ = 0;

    TrainerState cat_, mouse_;
    std::mutex publish_mu_;

    std::unique_ptr<League> league_;
    std::mutex sched_mu_;
    Rng sched_rng_;
    double ratio_ = 0.65;

    std::mutex buffer_mu_;
    std::condition_variable buffer_cv_;
    std::deque<Winner> window_;
    int window_capacity_;

    std::mutex assign_mu_;
    std::vector<Side> assignments_;

    ERSchedule er_;
    uint64_t next_ada_at_ = 0;

    std::atomic<uint64_t> env_steps_{0};
    std::atomic<uint64_t> episodes_{0};
    std::atomic<uint64_t> discarded_{0};
    std::array<uint64_t, 4> intervention_counts_{};

    std::ofstream metrics_;
    std::mutex metrics_mu_;

    std::atomic<bool> stop_{false};
};

}  // namespace aet
