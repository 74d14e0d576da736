#pragma once

// Historical model pool (HMP) with pFSP opponent sampling, round-robin
// admission evaluation, a cat-vs-mouse win-rate matrix, and TrueSkill
// ratings. Single-writer: all mutations go through one owner.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aet/common.hpp"
#include "aet/network.hpp"
#include "aet/rng.hpp"
#include "aet/trueskill.hpp"

namespace aet {

struct LeagueConfig {
    int capacity = 32;              // per side (paper-scale: 500)
    int eval_games_per_pair = 8;    // n games on admission, per opponent
    double historical_ratio = 0.2;  // probability of drawing from the HMP
    double pfsp_power = 1.0;        // p in (1-d)^p
    bool reevaluate_existing_pairs = false;

    void validate() const {
        if (capacity < 1) throw ConfigError("league: capacity must be >= 1");
        if (eval_games_per_pair < 0) throw ConfigError("league: eval_games_per_pair must be >= 0");
        if (historical_ratio < 0.0 || historical_ratio > 1.0)
            throw ConfigError("league: historical_ratio must be in [0,1]");
        if (pfsp_power <= 0.0) throw ConfigError("league: pfsp_power must be > 0");
    }
    bool operator==(const LeagueConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LeagueConfig, capacity, eval_games_per_pair, historical_ratio,
                                                pfsp_power, reevaluate_existing_pairs)

// P_b = (1-d_b)^p / sum_c (1-d_c)^p. Degenerate all-zero weights (the model
// beats everyone) fall back to uniform.
inline std::vector<double> pfsp_weights(const std::vector<double>& win_rates, double p = 1.0) {
    if (win_rates.empty()) throw InputError("pfsp_weights: empty pool");
    std::vector<double> w(win_rates.size());
    double total = 0.0;
    for (size_t i = 0; i < win_rates.size(); ++i) {
        if (win_rates[i] < 0.0 || win_rates[i] > 1.0) throw InputError("pfsp_weights: win rate outside [0,1]");
        w[i] = std::pow(1.0 - win_rates[i], p);
        total += w[i];
    }
    if (total <= 0.0) {
        const double u = 1.0 / static_cast<double>(w.size());
        for (auto& x : w) x = u;
        return w;
    }
    for (auto& x : w) x /= total;
    return w;
}

struct PoolEntry {
    uint64_t id = 0;
    Side side = Side::Mouse;
    uint64_t train_step = 0;
    std::shared_ptr<const NetworkParams> params;
    Rating rating;
    int games = 0;
};

// Match outcome provider: plays one evaluation game (ER off) and returns the
// winner. Injected so tests can script outcomes.
using MatchFn = std::function<Winner(const NetworkParams& cat, const NetworkParams& mouse, uint64_t seed)>;

class League {
  public:
    League(LeagueConfig cfg, TrueSkillConfig ts, MatchFn runner, uint64_t arena_hash, uint64_t seed)
        : cfg_(cfg), ts_(ts), runner_(std::move(runner)), arena_hash_(arena_hash),
          rng_(derive_seed(seed, 0x4C454147)) {  // "LEAG"
        cfg.validate();
    }

    const LeagueConfig& config() const { return cfg_; }

    const std::vector<PoolEntry>& pool(Side side) const { return side == Side::Cat ? cats_ : mice_; }

    std::optional<double> winrate(uint64_t cat_id, uint64_t mouse_id) const {
        auto it = matrix_.find({cat_id, mouse_id});
        if (it == matrix_.end() || it->second.second == 0) return std::nullopt;
        return static_cast<double>(it->second.first) / it->second.second;
    }

    // Win rates of the newest own-side pool model against each opponent-pool
    // entry; 0.5 for pairs never evaluated.
    std::vector<double> own_winrates_vs(Side own_side) const {
        const auto& own = pool(own_side);
        const auto& opp = pool(other_side(own_side));
        std::vector<double> d(opp.size(), 0.5);
        if (own.empty()) return d;
        const uint64_t own_id = own.back().id;
        for (size_t i = 0; i < opp.size(); ++i) {
            const auto wr = own_side == Side::Cat ? winrate(own_id, opp[i].id) : winrate(opp[i].id, own_id);
            if (wr) d[i] = own_side == Side::Cat ? *wr : 1.0 - *wr;
        }
        return d;
    }

    // 80/20-style draw for the side that is about to train: latest opponent
    // with probability 1 - historical_ratio, otherwise pFSP over the
    // opponent-side HMP. An empty pool always yields the latest model.
    std::shared_ptr<const NetworkParams> select_opponent(Side own_side,
                                                         std::shared_ptr<const NetworkParams> latest_opponent,
                                                         Rng& rng, bool* from_pool = nullptr) const {
        if (from_pool) *from_pool = false;
        const auto& opp = pool(other_side(own_side));
        if (opp.empty() || !rng.chance(cfg_.historical_ratio)) return latest_opponent;
        const auto weights = pfsp_weights(own_winrates_vs(own_side), cfg_.pfsp_power);
        const int pick = rng.weighted(weights);
        if (from_pool) *from_pool = true;
        return opp[pick].params;
    }

    // Admission: the snapshot plays eval_games_per_pair seeded games against
    // every opponent-pool model, fills its matrix row, then enters its pool
    // (FIFO eviction; evicted models' matrix entries pruned).
    uint64_t admit_model(std::shared_ptr<const NetworkParams> snapshot) {
        if (snapshot->arena_hash != arena_hash_)
            throw InputError("admit_model: snapshot arena hash does not match league");
        const Side side = snapshot->side;
        PoolEntry e;
        e.id = next_id_++;
        e.side = side;
        e.train_step = snapshot->train_step;
        e.params = std::move(snapshot);
        e.rating = initial_rating(ts_);

        auto& opponents = side == Side::Cat ? mice_ : cats_;
        for (auto& opp : opponents) {
            int wins = 0;  // wins of the admitted model
            for (int g = 0; g < cfg_.eval_games_per_pair; ++g) {
                const uint64_t seed = derive_seed(rng_.next_u64(), e.id, g);
                const Winner w = side == Side::Cat ? runner_(*e.params, *opp.params, seed)
                                                   : runner_(*opp.params, *e.params, seed);
                const bool new_won = (w == Winner::Cat) == (side == Side::Cat);
                if (new_won) {
                    ++wins;
                    std::tie(e.rating, opp.rating) = trueskill_update(e.rating, opp.rating, ts_);
                } else {
                    std::tie(opp.rating, e.rating) = trueskill_update(opp.rating, e.rating, ts_);
                }
                ++e.games;
                ++opp.games;
            }
            const uint64_t cat_id = side == Side::Cat ? e.id : opp.id;
            const uint64_t mouse_id = side == Side::Cat ? opp.id : e.id;
            const int cat_wins = side == Side::Cat ? wins : cfg_.eval_games_per_pair - wins;
            matrix_[{cat_id, mouse_id}] = {cat_wins, cfg_.eval_games_per_pair};
        }

        auto& own = side == Side::Cat ? cats_ : mice_;
        own.push_back(std::move(e));
        while (static_cast<int>(own.size()) > cfg_.capacity) {
            const uint64_t gone = own.front().id;
            own.erase(own.begin());
            for (auto it = matrix_.begin(); it != matrix_.end();) {
                if ((side == Side::Cat ? it->first.first : it->first.second) == gone)
                    it = matrix_.erase(it);
                else
                    ++it;
            }
        }
        return own.back().id;
    }

    // n seeded clean games (ER off) between two snapshots. No draws: timeouts
    // go to the cat, so w_cat + w_mouse = 1.
    std::pair<double, double> evaluate_winrates(const NetworkParams& cat, const NetworkParams& mouse, int n,
                                                uint64_t seed) const {
        if (n <= 0) return {0.0, 0.0};
        int cat_wins = 0;
        for (int g = 0; g < n; ++g)
            if (runner_(cat, mouse, derive_seed(seed, 0xEA11, g)) == Winner::Cat) ++cat_wins;
        const double wc = static_cast<double>(cat_wins) / n;
        return {wc, 1.0 - wc};
    }

    // --- Persistence: manifest.json + one snapshot file per model ---

    void save(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        nlohmann::json models = nlohmann::json::array();
        for (const auto* poolp : {&cats_, &mice_})
            for (const auto& e : *poolp) {
                const std::string file = std::string(side_name(e.side)) + "_" + std::to_string(e.id) + ".aetsnap";
                save_snapshot(*e.params, (fs::path(dir) / file).string());
                models.push_back({{"id", e.id},
                                  {"side", side_name(e.side)},
                                  {"train_step", e.train_step},
                                  {"file", file},
                                  {"mu", e.rating.mu},
                                  {"sigma", e.rating.sigma},
                                  {"rated_games", e.rating.games},
                                  {"games", e.games}});
            }
        nlohmann::json matrix = nlohmann::json::array();
        for (const auto& [key, val] : matrix_)
            matrix.push_back({{"cat", key.first}, {"mouse", key.second}, {"cat_wins", val.first}, {"games", val.second}});
        nlohmann::json manifest = {{"arena_hash", arena_hash_},
                                   {"next_id", next_id_},
                                   {"config", cfg_},
                                   {"models", models},
                                   {"matrix", matrix}};
        std::ofstream f(fs::path(dir) / "manifest.json");
        if (!f) throw IoError("cannot write league manifest");
        f << manifest.dump(2) << "\n";
    }

    static League load(const std::string& dir, TrueSkillConfig ts, MatchFn runner, uint64_t seed) {
        namespace fs = std::filesystem;
        std::ifstream f(fs::path(dir) / "manifest.json");
        if (!f) throw IoError("cannot read league manifest in " + dir);
        nlohmann::json manifest = nlohmann::json::parse(f);
        League lg(manifest.at("config").get<LeagueConfig>(), ts, std::move(runner),
                  manifest.at("arena_hash").get<uint64_t>(), seed);
        lg.next_id_ = manifest.at("next_id");
        for (const auto& jm : manifest.at("models")) {
            PoolEntry e;
            e.id = jm.at("id");
            e.side = jm.at("side") == "cat" ? Side::Cat : Side::Mouse;
            e.train_step = jm.at("train_step");
            e.rating = {jm.at("mu"), jm.at("sigma"), jm.at("rated_games")};
            e.games = jm.at("games");
            e.params = std::make_shared<NetworkParams>(
                load_snapshot((fs::path(dir) / jm.at("file").get<std::string>()).string(), lg.arena_hash_));
            (e.side == Side::Cat ? lg.cats_ : lg.mice_).push_back(std::move(e));
        }
        for (const auto& jm : manifest.at("matrix"))
            lg.matrix_[{jm.at("cat"), jm.at("mouse")}] = {jm.at("cat_wins"), jm.at("games")};
        return lg;
    }

  private:
    LeagueConfig cfg_;
    TrueSkillConfig ts_;
    MatchFn runner_;
    uint64_t arena_hash_;
    Rng rng_;
    uint64_t next_id_ = 1;
    std::vector<PoolEntry> cats_, mice_;
    std::map<std::pair<uint64_t, uint64_t>, std::pair<int, int>> matrix_;  // (cat,mouse) -> (cat wins, games)
};

}  // namespace aet
