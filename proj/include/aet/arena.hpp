#pragma once

// Seeded, deterministic, partially observable 1-vs-4 grid arena.
//
// One cat hunts four mice. The mice cooperate to carry every cheese to a
// hole, push it in, then break a wall crack and escape; the cat catches
// mice, carries them to rocket tiles and ties them there. Elimination of
// three mice (or the step limit) is a cat win, two escapes a mouse win.
// All dynamics resolve in a fixed order so that identical (seed, command
// sequence, intervention) produce bit-identical traces.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "aet/common.hpp"
#include "aet/rng.hpp"
#include "aet/serde.hpp"

namespace aet {

// --- Actions ---

enum class Action : uint8_t { Idle = 0, Move, Pickup, Drop, Push, Attack, Rescue, Interact };
inline constexpr int kNumActions = 8;

enum class Dir : uint8_t { N = 0, NE, E, SE, S, SW, W, NW };
inline constexpr int kNumDirs = 8;

inline constexpr int kDirDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
inline constexpr int kDirDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

struct ActionCommand {
    Action action = Action::Idle;
    Dir direction = Dir::N;  // consumed only by Move and Attack
    bool operator==(const ActionCommand&) const = default;
};

inline bool action_uses_direction(Action a) { return a == Action::Move || a == Action::Attack; }

inline const char* action_name(Action a) {
    static const char* names[] = {"IDLE", "MOVE", "PICKUP", "DROP", "PUSH", "ATTACK", "RESCUE", "INTERACT"};
    return names[static_cast<int>(a)];
}

// --- Configuration ---

struct ArenaConfig {
    int width = 16;
    int height = 12;
    int n_cheese = 3;  // n_holes always equals n_cheese
    int n_rockets = 2;
    int max_steps = 400;
    int vision_radius = 5;  // Chebyshev
    int mouse_hp = 100;
    int cat_hp = 100;
    int cat_attack_damage = 50;
    int crack_attack_damage = 25;
    int rocket_countdown = 50;
    int push_progress_per_step = 25;  // percent added per pushing mouse per step
    int crack_hp = 100;
    int wall_density_pct = 12;  // interior wall target during generation
    uint64_t rng_seed = 0;

    int n_holes() const { return n_cheese; }

    void validate() const {
        if (width < 5 || height < 5) throw ConfigError("arena: width/height must be >= 5");
        if (n_cheese < 1) throw ConfigError("arena: n_cheese must be >= 1");
        if (n_rockets < 1) throw ConfigError("arena: n_rockets must be >= 1");
        if (max_steps <= 0) throw ConfigError("arena: max_steps must be > 0");
        if (width * height <= 4 * (n_cheese + n_holes() + 5))
            throw ConfigError("arena: grid too small for entity counts");
        if (vision_radius < 1) throw ConfigError("arena: vision_radius must be >= 1");
        if (mouse_hp <= 0 || cat_hp <= 0) throw ConfigError("arena: hp must be > 0");
        if (cat_attack_damage <= 0 || crack_attack_damage <= 0) throw ConfigError("arena: damage must be > 0");
        if (rocket_countdown <= 0) throw ConfigError("arena: rocket_countdown must be > 0");
        if (push_progress_per_step <= 0 || push_progress_per_step > 100)
            throw ConfigError("arena: push_progress_per_step must be in (0,100]");
        if (crack_hp <= 0) throw ConfigError("arena: crack_hp must be > 0");
        if (wall_density_pct < 0 || wall_density_pct > 60)
            throw ConfigError("arena: wall_density_pct must be in [0,60]");
    }

    uint64_t hash() const {
        BinWriter w;
        w.u32(static_cast<uint32_t>(width));
        w.u32(static_cast<uint32_t>(height));
        w.u32(static_cast<uint32_t>(n_cheese));
        w.u32(static_cast<uint32_t>(n_rockets));
        w.u32(static_cast<uint32_t>(max_steps));
        w.u32(static_cast<uint32_t>(vision_radius));
        w.u32(static_cast<uint32_t>(mouse_hp));
        w.u32(static_cast<uint32_t>(cat_hp));
        w.u32(static_cast<uint32_t>(cat_attack_damage));
        w.u32(static_cast<uint32_t>(crack_attack_damage));
        w.u32(static_cast<uint32_t>(rocket_countdown));
        w.u32(static_cast<uint32_t>(push_progress_per_step));
        w.u32(static_cast<uint32_t>(crack_hp));
        w.u32(static_cast<uint32_t>(wall_density_pct));
        return fnv1a64(w.bytes().data(), w.bytes().size());
    }

    bool operator==(const ArenaConfig&) const = default;
};

// --- State ---

enum class MouseStatus : uint8_t { Free = 0, Caught, Tied, Eliminated, Escaped };
enum class CheeseState : uint8_t { Loose = 0, Carried, AtHole, InHole };
enum class Phase : uint8_t { Pushing = 0, Escaping, Terminal };
enum class Winner : uint8_t { None = 0, Cat, Mice };

inline constexpr int kCatId = 0;
inline constexpr int kNumMice = 4;
inline constexpr int kNumAgents = 5;  // [0] cat, [1..4] mice

struct AgentState {
    int x = 0, y = 0;
    int hp = 0;
    int max_hp = 0;
    MouseStatus status = MouseStatus::Free;  // cat stays Free
    int carrying = -1;   // mouse: cheese index; cat: mouse agent id
    int countdown = 0;   // remaining steps while Tied
    int rocket = -1;     // rocket index while Tied
    bool carried_by_cat = false;
    int speed = 1;
    int attack = 0;
    bool operator==(const AgentState&) const = default;
};

struct Cheese {
    int x = 0, y = 0;
    CheeseState state = CheeseState::Loose;
    int carrier = -1;   // agent id while Carried
    int hole = -1;      // hole index while AtHole / InHole
    int progress = 0;   // [0,100] while AtHole
    bool operator==(const Cheese&) const = default;
};

struct Hole {
    int x = 0, y = 0;
    bool filled = false;
    bool operator==(const Hole&) const = default;
};

struct Rocket {
    int x = 0, y = 0;
    int occupant = -1;  // mouse id tied here
    bool operator==(const Rocket&) const = default;
};

struct Crack {
    bool active = false;  // spawned (revealed) once all cheeses are in
    int x = 0, y = 0;     // position fixed at generation, hidden until active
    int hp = 0;
    bool open() const { return active && hp <= 0; }
    bool operator==(const Crack&) const = default;
};

struct TimedBuff {
    bool active = false;
    Side side = Side::Mouse;
    int expires_at_step = 0;  // reverts when state.step reaches this value
    int speed_delta = 0;
    bool operator==(const TimedBuff&) const = default;
};

// Per-step facts that cannot be recovered from a (prev, next) state diff
// alone: who pushed, who hit the crack, who rescued whom. Filled by step(),
// cleared at the start of the next step, so emit_rewards stays a pure
// function of the state pair.
struct StepFacts {
    std::vector<std::pair<int, int>> pushers;      // (mouse id, cheese index)
    std::vector<std::pair<int, int>> crack_hits;   // (mouse id, damage dealt)
    std::vector<std::pair<int, int>> rescues;      // (rescuer id, target id)
    bool operator==(const StepFacts&) const = default;
};

struct ArenaState {
    ArenaConfig config;
    std::vector<uint8_t> walls;  // width*height, 1 = wall
    std::array<AgentState, kNumAgents> agents;
    std::vector<Cheese> cheeses;
    std::vector<Hole> holes;
    std::vector<Rocket> rockets;
    Crack crack;
    int step = 0;
    Phase phase = Phase::Pushing;
    Winner winner = Winner::None;

    // first-time-only guidance bookkeeping
    bool cat_found_rocket = false;
    bool cat_damaged_mouse = false;

    TimedBuff timed_buff;
    StepFacts facts;

    bool operator==(const ArenaState&) const = default;

    bool wall(int x, int y) const { return walls[static_cast<size_t>(y) * config.width + x] != 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < config.width && y >= 0 && y < config.height; }
    bool floor_at(int x, int y) const { return in_bounds(x, y) && !wall(x, y); }

    bool mouse_alive(int id) const {
        const auto& m = agents[id];
        return m.status != MouseStatus::Eliminated && m.status != MouseStatus::Escaped;
    }

    bool agent_active(int id) const { return id == kCatId ? phase != Phase::Terminal : mouse_alive(id); }

    int count_mice(MouseStatus s) const {
        int n = 0;
        for (int i = 1; i < kNumAgents; ++i)
            if (agents[i].status == s) ++n;
        return n;
    }

    int cheese_count(CheeseState s) const {
        int n = 0;
        for (const auto& c : cheeses)
            if (c.state == s) ++n;
        return n;
    }

    uint64_t state_hash() const;
};

inline int chebyshev(int x0, int y0, int x1, int y1) {
    return std::max(std::abs(x0 - x1), std::abs(y0 - y1));
}

inline bool adjacent(int x0, int y0, int x1, int y1) { return chebyshev(x0, y0, x1, y1) <= 1; }

inline uint64_t ArenaState::state_hash() const {
    BinWriter w;
    w.u64(config.hash());
    w.raw(walls.data(), walls.size());
    for (const auto& a : agents) {
        w.u32(static_cast<uint32_t>(a.x));
        w.u32(static_cast<uint32_t>(a.y));
        w.u32(static_cast<uint32_t>(a.hp));
        w.u32(static_cast<uint32_t>(a.max_hp));
        w.u8(static_cast<uint8_t>(a.status));
        w.u32(static_cast<uint32_t>(a.carrying + 1));
        w.u32(static_cast<uint32_t>(a.countdown));
        w.u32(static_cast<uint32_t>(a.rocket + 1));
        w.u8(a.carried_by_cat ? 1 : 0);
        w.u32(static_cast<uint32_t>(a.speed));
        w.u32(static_cast<uint32_t>(a.attack));
    }
    for (const auto& c : cheeses) {
        w.u32(static_cast<uint32_t>(c.x));
        w.u32(static_cast<uint32_t>(c.y));
        w.u8(static_cast<uint8_t>(c.state));
        w.u32(static_cast<uint32_t>(c.carrier + 1));
        w.u32(static_cast<uint32_t>(c.hole + 1));
        w.u32(static_cast<uint32_t>(c.progress));
    }
    for (const auto& h : holes) {
        w.u32(static_cast<uint32_t>(h.x));
        w.u32(static_cast<uint32_t>(h.y));
        w.u8(h.filled ? 1 : 0);
    }
    for (const auto& r : rockets) {
        w.u32(static_cast<uint32_t>(r.x));
        w.u32(static_cast<uint32_t>(r.y));
        w.u32(static_cast<uint32_t>(r.occupant + 1));
    }
    w.u8(crack.active ? 1 : 0);
    w.u32(static_cast<uint32_t>(crack.x));
    w.u32(static_cast<uint32_t>(crack.y));
    w.u32(static_cast<uint32_t>(crack.hp));
    w.u32(static_cast<uint32_t>(step));
    w.u8(static_cast<uint8_t>(phase));
    w.u8(static_cast<uint8_t>(winner));
    w.u8(cat_found_rocket ? 1 : 0);
    w.u8(cat_damaged_mouse ? 1 : 0);
    w.u8(timed_buff.active ? 1 : 0);
    w.u32(static_cast<uint32_t>(timed_buff.expires_at_step));
    w.u32(static_cast<uint32_t>(timed_buff.speed_delta));
    return fnv1a64(w.bytes().data(), w.bytes().size());
}

// --- Rewards ---

enum class RewardKind : uint8_t {
    // cat, ordinary
    CatCatch = 0,
    CatTie,
    CatEliminate,
    CatCheeseIn,
    CatCrackHp,
    CatWin,
    CatLose,
    // cat, first-time-only guidance
    CatFindRocket,
    CatFirstDamage,
    // mouse, ordinary
    MouseHpChange,
    MouseCaught,
    MouseEliminated,
    MouseRescue,
    MousePush,
    MouseCrackDamage,
    // mouse, team
    MouseCheeseIn,
    MouseCrackOpen,
    MouseWin,
    MouseLose,
    // mouse, decaying guidance
    MouseDistCheese,
    MouseDistHole,
    MouseDistTied,
    MouseDistCrack,
    MousePickup,
};

inline const char* reward_kind_name(RewardKind k) {
    static const char* names[] = {
        "cat_catch",       "cat_tie",        "cat_eliminate",   "cat_cheese_in",  "cat_crack_hp",
        "cat_win",         "cat_lose",       "cat_find_rocket", "cat_first_damage",
        "mouse_hp_change", "mouse_caught",   "mouse_eliminated", "mouse_rescue",  "mouse_push",
        "mouse_crack_damage", "mouse_cheese_in", "mouse_crack_open", "mouse_win", "mouse_lose",
        "mouse_dist_cheese", "mouse_dist_hole", "mouse_dist_tied", "mouse_dist_crack", "mouse_pickup"};
    return names[static_cast<int>(k)];
}
inline constexpr int kNumRewardKinds = 24;

struct RewardEvent {
    int recipient = 0;  // agent id
    RewardKind kind;
    double value = 0.0;
    bool is_guidance = false;
    bool is_team = false;
};

// Decay coefficients for the guidance rewards (anneal over training).
inline double guidance_dc5(double decay_progress) { return 5.0 - 4.0 * decay_progress; }
inline double guidance_dc3(double decay_progress) { return 3.0 - 2.0 * decay_progress; }
inline double guidance_pickup_coef(double decay_progress) { return 1.0 - decay_progress; }

namespace detail {

inline int nearest_dist(const ArenaState& s, int x, int y, auto&& pred_pos) {
    int best = -1;
    pred_pos([&](int tx, int ty) {
        int d = chebyshev(x, y, tx, ty);
        if (best < 0 || d < best) best = d;
    });
    return best;
}

// Distance to nearest cheese a free mouse should seek: loose or at-hole unfinished.
inline int dist_to_seek_cheese(const ArenaState& s, int x, int y) {
    return nearest_dist(s, x, y, [&](auto&& visit) {
        for (const auto& c : s.cheeses)
            if (c.state == CheeseState::Loose || (c.state == CheeseState::AtHole && c.progress < 100))
                visit(c.x, c.y);
    });
}

inline int dist_to_open_hole(const ArenaState& s, int x, int y) {
    return nearest_dist(s, x, y, [&](auto&& visit) {
        for (size_t i = 0; i < s.holes.size(); ++i) {
            if (s.holes[i].filled) continue;
            bool occupied = false;
            for (const auto& c : s.cheeses)
                if (c.state == CheeseState::AtHole && c.hole == static_cast<int>(i)) occupied = true;
            if (!occupied) visit(s.holes[i].x, s.holes[i].y);
        }
    });
}

inline int dist_to_tied(const ArenaState& s, int x, int y, int self) {
    return nearest_dist(s, x, y, [&](auto&& visit) {
        for (int i = 1; i < kNumAgents; ++i)
            if (i != self && s.agents[i].status == MouseStatus::Tied) visit(s.agents[i].x, s.agents[i].y);
    });
}

}  // namespace detail

// Rewards implied by the prev -> next transition. Pure in the pair: per-step
// actor facts are carried inside next.facts.
inline std::vector<RewardEvent> emit_rewards(const ArenaState& prev, const ArenaState& next,
                                             double decay_progress) {
    std::vector<RewardEvent> ev;
    const auto& cfg = prev.config;
    const double dc5 = guidance_dc5(decay_progress);
    const double dc3 = guidance_dc3(decay_progress);
    const double pickup_coef = guidance_pickup_coef(decay_progress);

    auto add = [&](int who, RewardKind k, double v, bool guidance = false, bool team = false) {
        if (v == 0.0) return;
        ev.push_back({who, k, v, guidance, team});
    };
    auto add_team = [&](RewardKind k, double v) {
        // team rewards fan out to every non-eliminated mouse
        for (int i = 1; i < kNumAgents; ++i)
            if (next.agents[i].status != MouseStatus::Eliminated) ev.push_back({i, k, v, false, true});
    };

    // cat: transitions of mouse statuses
    int newly_caught = 0, newly_tied = 0, newly_eliminated = 0;
    for (int i = 1; i < kNumAgents; ++i) {
        const auto ps = prev.agents[i].status;
        const auto ns = next.agents[i].status;
        if (ns == MouseStatus::Caught && ps == MouseStatus::Free) ++newly_caught;
        if (ns == MouseStatus::Tied && ps != MouseStatus::Tied) ++newly_tied;
        if (ns == MouseStatus::Eliminated && ps != MouseStatus::Eliminated) ++newly_eliminated;
    }
    if (newly_caught) add(kCatId, RewardKind::CatCatch, 0.1 * newly_caught);
    if (newly_tied) add(kCatId, RewardKind::CatTie, 0.1 * newly_tied);
    if (newly_eliminated) add(kCatId, RewardKind::CatEliminate, 2.0 * newly_eliminated);

    const int cheese_in_delta = next.cheese_count(CheeseState::InHole) - prev.cheese_count(CheeseState::InHole);
    if (cheese_in_delta > 0) {
        add(kCatId, RewardKind::CatCheeseIn, -0.25 * cheese_in_delta);
        for (int k = 0; k < cheese_in_delta; ++k) add_team(RewardKind::MouseCheeseIn, 0.5);
    }

    if (prev.crack.active && next.crack.active && next.crack.hp != prev.crack.hp)
        add(kCatId, RewardKind::CatCrackHp, 0.01 * (next.crack.hp - prev.crack.hp));

    if (next.crack.open() && !prev.crack.open()) add_team(RewardKind::MouseCrackOpen, 1.0);

    // first-time-only cat guidance
    if (next.cat_found_rocket && !prev.cat_found_rocket)
        add(kCatId, RewardKind::CatFindRocket, 0.05, /*guidance=*/true);
    if (next.cat_damaged_mouse && !prev.cat_damaged_mouse)
        add(kCatId, RewardKind::CatFirstDamage, 0.15, /*guidance=*/true);

    // per-mouse ordinary rewards
    for (int i = 1; i < kNumAgents; ++i) {
        const auto& pm = prev.agents[i];
        const auto& nm = next.agents[i];
        if (pm.status == MouseStatus::Eliminated || pm.status == MouseStatus::Escaped) continue;

        if (nm.hp != pm.hp && nm.status != MouseStatus::Eliminated)
            add(i, RewardKind::MouseHpChange, 0.003 * (nm.hp - pm.hp));
        if (nm.status == MouseStatus::Caught && pm.status == MouseStatus::Free)
            add(i, RewardKind::MouseCaught, -0.2);
        if (nm.status == MouseStatus::Eliminated) add(i, RewardKind::MouseEliminated, -2.0);

        // decaying pickup guidance
        if (pm.carrying < 0 && nm.carrying >= 0 && pm.status == MouseStatus::Free)
            add(i, RewardKind::MousePickup, 0.05 * pickup_coef, /*guidance=*/true);
    }

    for (const auto& [rescuer, target] : next.facts.rescues)
        add(rescuer, RewardKind::MouseRescue, 0.5);

    // pushing: each pusher receives the step's progress fraction / NMPC
    {
        std::vector<int> pushers_per_cheese(next.cheeses.size(), 0);
        for (const auto& [mouse, cheese] : next.facts.pushers) pushers_per_cheese[cheese]++;
        for (const auto& [mouse, cheese] : next.facts.pushers) {
            const int before = prev.cheeses[cheese].state == CheeseState::AtHole ? prev.cheeses[cheese].progress : 0;
            const int after = next.cheeses[cheese].state == CheeseState::InHole
                                  ? 100
                                  : next.cheeses[cheese].progress;
            const double frac = (after - before) / 100.0;
            if (frac > 0.0)
                add(mouse, RewardKind::MousePush, frac / pushers_per_cheese[cheese]);
        }
    }

    for (const auto& [mouse, damage] : next.facts.crack_hits)
        add(mouse, RewardKind::MouseCrackDamage, 2.0 * damage / cfg.crack_hp);

    // decaying distance guidance (potential-style: reward the decrease)
    for (int i = 1; i < kNumAgents; ++i) {
        const auto& pm = prev.agents[i];
        const auto& nm = next.agents[i];
        if (pm.status != MouseStatus::Free || nm.status != MouseStatus::Free) continue;

        if (pm.carrying >= 0 && nm.carrying >= 0) {
            const int d0 = detail::dist_to_open_hole(prev, pm.x, pm.y);
            const int d1 = detail::dist_to_open_hole(next, nm.x, nm.y);
            if (d0 >= 0 && d1 >= 0 && d0 != d1)
                add(i, RewardKind::MouseDistHole, 0.001 * (d0 - d1) * dc5, /*guidance=*/true);
        } else if (pm.carrying < 0 && nm.carrying < 0 && prev.phase == Phase::Pushing) {
            const int d0 = detail::dist_to_seek_cheese(prev, pm.x, pm.y);
            const int d1 = detail::dist_to_seek_cheese(next, nm.x, nm.y);
            if (d0 >= 0 && d1 >= 0 && d0 != d1)
                add(i, RewardKind::MouseDistCheese, 0.001 * (d0 - d1) * dc5, /*guidance=*/true);
        }

        {
            const int d0 = detail::dist_to_tied(prev, pm.x, pm.y, i);
            const int d1 = detail::dist_to_tied(next, nm.x, nm.y, i);
            if (d0 >= 0 && d1 >= 0 && d0 != d1)
                add(i, RewardKind::MouseDistTied, 0.01 * (d0 - d1) * dc3, /*guidance=*/true);
        }
        if (prev.crack.active && next.crack.active && !prev.crack.open()) {
            const int d0 = chebyshev(pm.x, pm.y, prev.crack.x, prev.crack.y);
            const int d1 = chebyshev(nm.x, nm.y, next.crack.x, next.crack.y);
            if (d0 != d1) add(i, RewardKind::MouseDistCrack, 0.001 * (d0 - d1) * dc5, /*guidance=*/true);
        }
    }

    // terminal: win/lose
    if (next.phase == Phase::Terminal && prev.phase != Phase::Terminal) {
        if (next.winner == Winner::Cat) {
            add(kCatId, RewardKind::CatWin, 5.0);
            add_team(RewardKind::MouseLose, -5.0);
        } else {
            add(kCatId, RewardKind::CatLose, -5.0);
            add_team(RewardKind::MouseWin, 5.0);
        }
    }

    return ev;
}

// --- Generation ---

namespace detail {

inline std::vector<int> reachable_from(const std::vector<uint8_t>& walls, int w, int h, int start) {
    std::vector<int> dist(static_cast<size_t>(w) * h, -1);
    std::deque<int> q;
    dist[start] = 0;
    q.push_back(start);
    while (!q.empty()) {
        int cur = q.front();
        q.pop_front();
        int cx = cur % w, cy = cur / w;
        for (int d = 0; d < 8; ++d) {
            int nx = cx + kDirDx[d], ny = cy + kDirDy[d];
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            int ni = ny * w + nx;
            if (walls[ni] || dist[ni] >= 0) continue;
            dist[ni] = dist[cur] + 1;
            q.push_back(ni);
        }
    }
    return dist;
}

}  // namespace detail

inline ArenaState generate(const ArenaConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.rng_seed, /*stream=*/0x41524E41));  // "ARNA"

    const int w = config.width, h = config.height;
    ArenaState s;
    s.config = config;
    s.walls.assign(static_cast<size_t>(w) * h, 0);

    // border walls
    for (int x = 0; x < w; ++x) s.walls[x] = s.walls[static_cast<size_t>(h - 1) * w + x] = 1;
    for (int y = 0; y < h; ++y) s.walls[static_cast<size_t>(y) * w] = s.walls[static_cast<size_t>(y) * w + w - 1] = 1;

    // random interior walls, added only while the floor stays one connected
    // component (8-neighborhood)
    const int interior = (w - 2) * (h - 2);
    const int wall_target = interior * config.wall_density_pct / 100;
    std::vector<int> interior_cells;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) interior_cells.push_back(y * w + x);
    rng.shuffle(interior_cells);
    int placed = 0;
    for (int cell : interior_cells) {
        if (placed >= wall_target) break;
        s.walls[cell] = 1;
        int start = -1, floor_count = 0;
        for (int i = 0; i < w * h; ++i)
            if (!s.walls[i]) {
                if (start < 0) start = i;
                ++floor_count;
            }
        auto dist = detail::reachable_from(s.walls, w, h, start);
        int reached = 0;
        for (int i = 0; i < w * h; ++i)
            if (!s.walls[i] && dist[i] >= 0) ++reached;
        if (reached != floor_count) {
            s.walls[cell] = 0;  // would disconnect, revert
        } else {
            ++placed;
        }
    }

    // entity cells: distinct floor cells
    std::vector<int> floor_cells;
    for (int i = 0; i < w * h; ++i)
        if (!s.walls[i]) floor_cells.push_back(i);
    const int needed = config.n_cheese + config.n_holes() + config.n_rockets + kNumAgents;
    if (static_cast<int>(floor_cells.size()) < needed)
        throw ConfigError("arena: not enough floor cells for entities");
    rng.shuffle(floor_cells);
    size_t cursor = 0;
    auto take = [&]() {
        int cell = floor_cells[cursor++];
        return std::pair<int, int>{cell % w, cell / w};
    };

    s.cheeses.resize(config.n_cheese);
    for (auto& c : s.cheeses) std::tie(c.x, c.y) = take();
    s.holes.resize(config.n_holes());
    for (auto& hole : s.holes) std::tie(hole.x, hole.y) = take();
    s.rockets.resize(config.n_rockets);
    for (auto& r : s.rockets) std::tie(r.x, r.y) = take();

    for (int i = 0; i < kNumAgents; ++i) {
        auto& a = s.agents[i];
        std::tie(a.x, a.y) = take();
        a.max_hp = a.hp = (i == kCatId) ? config.cat_hp : config.mouse_hp;
        a.attack = (i == kCatId) ? config.cat_attack_damage : config.crack_attack_damage;
        a.speed = 1;
    }

    // crack position fixed now, revealed when the last cheese goes in:
    // a border wall cell with at least one floor neighbor
    std::vector<int> crack_candidates;
    for (int i = 0; i < w * h; ++i) {
        if (!s.walls[i]) continue;
        int cx = i % w, cy = i / w;
        bool border = cx == 0 || cy == 0 || cx == w - 1 || cy == h - 1;
        if (!border) continue;
        for (int d = 0; d < 8; ++d) {
            int nx = cx + kDirDx[d], ny = cy + kDirDy[d];
            if (nx >= 0 && nx < w && ny >= 0 && ny < h && !s.walls[static_cast<size_t>(ny) * w + nx]) {
                crack_candidates.push_back(i);
                break;
            }
        }
    }
    if (crack_candidates.empty()) throw ConfigError("arena: no viable crack position");
    int crack_cell = crack_candidates[rng.index(crack_candidates.size())];
    s.crack.x = crack_cell % w;
    s.crack.y = crack_cell / w;
    s.crack.hp = config.crack_hp;
    s.crack.active = false;

    return s;
}

// --- Environment randomization interventions ---

enum class ERKind : uint8_t { None = 0, LevelUp, HardCase, TimedBuff };

struct ERIntervention {
    ERKind kind = ERKind::None;
    Side weaker = Side::Mouse;  // intervention favors this side
    uint64_t seed = 0;          // any internal sampling draws from here
    int buff_window = 40;       // TimedBuff duration in steps
    bool operator==(const ERIntervention&) const = default;
};

inline const char* er_kind_name(ERKind k) {
    static const char* names[] = {"none", "levelup", "hardcase", "timedbuff"};
    return names[static_cast<int>(k)];
}

// Applied at episode start only. LevelUp permanently boosts the weaker side
// (hp or speed, sampled). HardCase handicaps the stronger side: one mouse
// pre-eliminated when mice are strong, the cat respawned at the cell farthest
// from all cheeses when the cat is strong. TimedBuff raises the weaker side's
// speed for a step window, then reverts.
inline ArenaState apply_er_intervention(const ArenaState& state, const ERIntervention& iv) {
    if (state.step != 0) throw StateError("ER intervention is only valid at episode start");
    if (iv.kind == ERKind::None) return state;

    ArenaState s = state;
    Rng rng(derive_seed(iv.seed, 0x4552u));  // "ER"

    auto boost_side = [&](Side side, bool hp_boost, int speed_delta) {
        for (int i = 0; i < kNumAgents; ++i) {
            const bool is_cat = i == kCatId;
            if ((side == Side::Cat) != is_cat) continue;
            if (hp_boost) {
                s.agents[i].max_hp += s.agents[i].max_hp / 2;
                s.agents[i].hp = s.agents[i].max_hp;
            }
            s.agents[i].speed += speed_delta;
        }
    };

    switch (iv.kind) {
        case ERKind::LevelUp: {
            // uniformly one of: +50% hp, +1 speed
            if (rng.chance(0.5))
                boost_side(iv.weaker, true, 0);
            else
                boost_side(iv.weaker, false, 1);
            break;
        }
        case ERKind::HardCase: {
            const Side strong = other_side(iv.weaker);
            if (strong == Side::Mouse) {
                // one mouse starts eliminated
                int victim = 1 + rng.index(kNumMice);
                s.agents[victim].status = MouseStatus::Eliminated;
                s.agents[victim].hp = 0;
            } else {
                // cat spawns at the floor cell maximizing min distance to cheeses
                int best_cell = -1, best_d = -1;
                for (int y = 0; y < s.config.height; ++y)
                    for (int x = 0; x < s.config.width; ++x) {
                        if (!s.floor_at(x, y)) continue;
                        bool taken = false;
                        for (int i = 1; i < kNumAgents; ++i)
                            if (s.agents[i].x == x && s.agents[i].y == y) taken = true;
                        if (taken) continue;
                        int dmin = -1;
                        for (const auto& c : s.cheeses) {
                            int d = chebyshev(x, y, c.x, c.y);
                            if (dmin < 0 || d < dmin) dmin = d;
                        }
                        if (dmin > best_d) {
                            best_d = dmin;
                            best_cell = y * s.config.width + x;
                        }
                    }
                if (best_cell >= 0) {
                    s.agents[kCatId].x = best_cell % s.config.width;
                    s.agents[kCatId].y = best_cell / s.config.width;
                }
            }
            break;
        }
        case ERKind::TimedBuff: {
            boost_side(iv.weaker, false, 1);
            s.timed_buff = {true, iv.weaker, iv.buff_window, 1};
            break;
        }
        case ERKind::None:
            break;
    }
    return s;
}

// --- Step ---

struct StepResult {
    ArenaState state;
    std::vector<RewardEvent> events;
    bool terminal = false;
};

namespace detail {

inline bool blocking_agent_at(const ArenaState& s, int x, int y, int ignore = -1) {
    for (int i = 0; i < kNumAgents; ++i) {
        if (i == ignore) continue;
        const auto& a = s.agents[i];
        if (i != kCatId) {
            if (a.status != MouseStatus::Free) continue;  // caught/tied/eliminated/escaped don't block
            if (a.carried_by_cat) continue;
        }
        if (a.x == x && a.y == y) return true;
    }
    return false;
}

inline int adjacent_loose_cheese(const ArenaState& s, int x, int y) {
    for (size_t i = 0; i < s.cheeses.size(); ++i)
        if (s.cheeses[i].state == CheeseState::Loose && adjacent(x, y, s.cheeses[i].x, s.cheeses[i].y))
            return static_cast<int>(i);
    return -1;
}

inline int adjacent_athole_cheese(const ArenaState& s, int x, int y) {
    for (size_t i = 0; i < s.cheeses.size(); ++i)
        if (s.cheeses[i].state == CheeseState::AtHole && s.cheeses[i].progress < 100 &&
            adjacent(x, y, s.cheeses[i].x, s.cheeses[i].y))
            return static_cast<int>(i);
    return -1;
}

inline int adjacent_catchable_mouse(const ArenaState& s, int x, int y) {
    for (int i = 1; i < kNumAgents; ++i) {
        const auto& m = s.agents[i];
        if (m.status == MouseStatus::Caught && !m.carried_by_cat && adjacent(x, y, m.x, m.y)) return i;
    }
    return -1;
}

inline int adjacent_rescuable_mouse(const ArenaState& s, int x, int y, int self) {
    for (int i = 1; i < kNumAgents; ++i) {
        if (i == self) continue;
        const auto& m = s.agents[i];
        if ((m.status == MouseStatus::Caught || m.status == MouseStatus::Tied) && adjacent(x, y, m.x, m.y))
            return i;
    }
    return -1;
}

inline int adjacent_free_rocket(const ArenaState& s, int x, int y) {
    for (size_t i = 0; i < s.rockets.size(); ++i)
        if (s.rockets[i].occupant < 0 && adjacent(x, y, s.rockets[i].x, s.rockets[i].y))
            return static_cast<int>(i);
    return -1;
}

inline int adjacent_open_hole(const ArenaState& s, int x, int y) {
    for (size_t i = 0; i < s.holes.size(); ++i) {
        if (s.holes[i].filled) continue;
        bool occupied = false;
        for (const auto& c : s.cheeses)
            if (c.state == CheeseState::AtHole && c.hole == static_cast<int>(i)) occupied = true;
        if (!occupied && adjacent(x, y, s.holes[i].x, s.holes[i].y)) return static_cast<int>(i);
    }
    return -1;
}

// Can this command have an effect, judged against the current state with all
// other agents held still? legal_mask must agree with this exactly.
inline bool command_applicable(const ArenaState& s, int id, const ActionCommand& cmd) {
    const auto& a = s.agents[id];
    const bool is_cat = id == kCatId;
    if (!is_cat && (a.status == MouseStatus::Caught || a.status == MouseStatus::Tied))
        return cmd.action == Action::Idle;

    switch (cmd.action) {
        case Action::Idle:
            return true;
        case Action::Move: {
            const int nx = a.x + kDirDx[static_cast<int>(cmd.direction)];
            const int ny = a.y + kDirDy[static_cast<int>(cmd.direction)];
            return s.floor_at(nx, ny) && !blocking_agent_at(s, nx, ny, id);
        }
        case Action::Pickup:
            if (is_cat) return a.carrying < 0 && adjacent_catchable_mouse(s, a.x, a.y) >= 0;
            return a.carrying < 0 && adjacent_loose_cheese(s, a.x, a.y) >= 0;
        case Action::Drop:
            return a.carrying >= 0;
        case Action::Push:
            return !is_cat && adjacent_athole_cheese(s, a.x, a.y) >= 0;
        case Action::Attack: {
            const int tx = a.x + kDirDx[static_cast<int>(cmd.direction)];
            const int ty = a.y + kDirDy[static_cast<int>(cmd.direction)];
            if (is_cat) {
                for (int i = 1; i < kNumAgents; ++i) {
                    const auto& m = s.agents[i];
                    if (m.status == MouseStatus::Free && !m.carried_by_cat && m.x == tx && m.y == ty) return true;
                }
                return false;
            }
            return s.crack.active && !s.crack.open() && s.crack.x == tx && s.crack.y == ty;
        }
        case Action::Rescue:
            return !is_cat && adjacent_rescuable_mouse(s, a.x, a.y, id) >= 0;
        case Action::Interact:
            if (is_cat) return a.carrying >= 0 && adjacent_free_rocket(s, a.x, a.y) >= 0;
            return s.crack.open() && adjacent(a.x, a.y, s.crack.x, s.crack.y);
    }
    return false;
}

}  // namespace detail

// Advances the arena one step. Commands are indexed by agent id; eliminated
// and escaped agents must be given Idle. Resolution order is fixed: moves,
// then interactions, then timers, all in agent-id order.
inline StepResult step(const ArenaState& state, const std::array<ActionCommand, kNumAgents>& commands,
                       double decay_progress = 0.0) {
    if (state.phase == Phase::Terminal) throw StateError("step on terminal state");
    for (int i = 1; i < kNumAgents; ++i)
        if (!state.mouse_alive(i) && commands[i].action != Action::Idle)
            throw InputError(std::string("command for inactive agent ") + std::to_string(i));

    ArenaState s = state;
    s.facts = {};
    const auto& cfg = s.config;

    // 1. moves (agent-id order; earlier movers vacate cells for later ones)
    for (int id = 0; id < kNumAgents; ++id) {
        const auto& cmd = commands[id];
        auto& a = s.agents[id];
        if (cmd.action != Action::Move) continue;
        if (id != kCatId && a.status != MouseStatus::Free) continue;
        if (a.carried_by_cat) continue;
        for (int stride = 0; stride < a.speed; ++stride) {
            const int nx = a.x + kDirDx[static_cast<int>(cmd.direction)];
            const int ny = a.y + kDirDy[static_cast<int>(cmd.direction)];
            if (!s.floor_at(nx, ny) || detail::blocking_agent_at(s, nx, ny, id)) break;
            a.x = nx;
            a.y = ny;
        }
        if (a.carrying >= 0) {
            if (id == kCatId) {
                s.agents[a.carrying].x = a.x;
                s.agents[a.carrying].y = a.y;
            } else {
                s.cheeses[a.carrying].x = a.x;
                s.cheeses[a.carrying].y = a.y;
            }
        }
    }

    // 2. interactions (agent-id order)
    for (int id = 0; id < kNumAgents; ++id) {
        const auto& cmd = commands[id];
        auto& a = s.agents[id];
        const bool is_cat = id == kCatId;
        if (!is_cat && a.status != MouseStatus::Free) continue;

        switch (cmd.action) {
            case Action::Pickup: {
                if (a.carrying >= 0) break;
                if (is_cat) {
                    int m = detail::adjacent_catchable_mouse(s, a.x, a.y);
                    if (m >= 0) {
                        a.carrying = m;
                        s.agents[m].carried_by_cat = true;
                        s.agents[m].x = a.x;
                        s.agents[m].y = a.y;
                    }
                } else {
                    int c = detail::adjacent_loose_cheese(s, a.x, a.y);
                    if (c >= 0) {
                        s.cheeses[c].state = CheeseState::Carried;
                        s.cheeses[c].carrier = id;
                        s.cheeses[c].x = a.x;
                        s.cheeses[c].y = a.y;
                        a.carrying = c;
                    }
                }
                break;
            }
            case Action::Drop: {
                if (a.carrying < 0) break;
                if (is_cat) {
                    s.agents[a.carrying].carried_by_cat = false;
                    a.carrying = -1;
                } else {
                    auto& c = s.cheeses[a.carrying];
                    int hole = detail::adjacent_open_hole(s, a.x, a.y);
                    if (hole >= 0) {
                        c.state = CheeseState::AtHole;
                        c.hole = hole;
                        c.progress = 0;
                        c.x = s.holes[hole].x;
                        c.y = s.holes[hole].y;
                    } else {
                        c.state = CheeseState::Loose;
                        c.x = a.x;
                        c.y = a.y;
                    }
                    c.carrier = -1;
                    a.carrying = -1;
                }
                break;
            }
            case Action::Push: {
                if (is_cat) break;
                int c = detail::adjacent_athole_cheese(s, a.x, a.y);
                if (c >= 0) {
                    s.cheeses[c].progress = std::min(100, s.cheeses[c].progress + cfg.push_progress_per_step);
                    s.facts.pushers.emplace_back(id, c);
                }
                break;
            }
            case Action::Attack: {
                const int tx = a.x + kDirDx[static_cast<int>(cmd.direction)];
                const int ty = a.y + kDirDy[static_cast<int>(cmd.direction)];
                if (is_cat) {
                    for (int m = 1; m < kNumAgents; ++m) {
                        auto& target = s.agents[m];
                        if (target.status != MouseStatus::Free || target.carried_by_cat) continue;
                        if (target.x != tx || target.y != ty) continue;
                        target.hp = std::max(0, target.hp - a.attack);
                        s.cat_damaged_mouse = true;
                        if (target.hp == 0) {
                            target.status = MouseStatus::Caught;
                            if (target.carrying >= 0) {  // drops the cheese where it stands
                                auto& c = s.cheeses[target.carrying];
                                c.state = CheeseState::Loose;
                                c.carrier = -1;
                                target.carrying = -1;
                            }
                        }
                        break;
                    }
                } else if (s.crack.active && !s.crack.open() && s.crack.x == tx && s.crack.y == ty) {
                    const int dmg = std::min(s.crack.hp, a.attack);
                    s.crack.hp -= dmg;
                    if (dmg > 0) s.facts.crack_hits.emplace_back(id, dmg);
                }
                break;
            }
            case Action::Rescue: {
                if (is_cat) break;
                int m = detail::adjacent_rescuable_mouse(s, a.x, a.y, id);
                if (m >= 0) {
                    auto& t = s.agents[m];
                    if (t.status == MouseStatus::Tied && t.rocket >= 0) s.rockets[t.rocket].occupant = -1;
                    if (t.carried_by_cat) {
                        t.carried_by_cat = false;
                        if (s.agents[kCatId].carrying == m) s.agents[kCatId].carrying = -1;
                    }
                    t.status = MouseStatus::Free;
                    t.hp = t.max_hp;
                    t.countdown = 0;
                    t.rocket = -1;
                    s.facts.rescues.emplace_back(id, m);
                }
                break;
            }
            case Action::Interact: {
                if (is_cat) {
                    if (a.carrying < 0) break;
                    int r = detail::adjacent_free_rocket(s, a.x, a.y);
                    if (r >= 0) {
                        auto& m = s.agents[a.carrying];
                        m.status = MouseStatus::Tied;
                        m.carried_by_cat = false;
                        m.x = s.rockets[r].x;
                        m.y = s.rockets[r].y;
                        m.countdown = cfg.rocket_countdown;
                        m.rocket = r;
                        s.rockets[r].occupant = a.carrying;
                        a.carrying = -1;
                    }
                } else if (s.crack.open() && adjacent(a.x, a.y, s.crack.x, s.crack.y)) {
                    a.status = MouseStatus::Escaped;
                    if (a.carrying >= 0) {  // cannot happen in pushing-complete phase, but be safe
                        s.cheeses[a.carrying].state = CheeseState::Loose;
                        s.cheeses[a.carrying].carrier = -1;
                        a.carrying = -1;
                    }
                }
                break;
            }
            case Action::Idle:
            case Action::Move:
                break;
        }
    }

    // cheese completion
    for (size_t ci = 0; ci < s.cheeses.size(); ++ci) {
        auto& c = s.cheeses[ci];
        if (c.state == CheeseState::AtHole && c.progress >= 100) {
            c.state = CheeseState::InHole;
            c.progress = 100;
            s.holes[c.hole].filled = true;
        }
    }

    // 3. timers
    for (int i = 1; i < kNumAgents; ++i) {
        auto& m = s.agents[i];
        if (m.status == MouseStatus::Tied) {
            m.countdown -= 1;
            if (m.countdown <= 0) {
                m.status = MouseStatus::Eliminated;
                if (m.rocket >= 0) s.rockets[m.rocket].occupant = -1;
                m.rocket = -1;
            }
        }
    }
    if (s.timed_buff.active && s.step + 1 >= s.timed_buff.expires_at_step) {
        for (int i = 0; i < kNumAgents; ++i) {
            const bool is_cat = i == kCatId;
            if ((s.timed_buff.side == Side::Cat) == is_cat)
                s.agents[i].speed = std::max(1, s.agents[i].speed - s.timed_buff.speed_delta);
        }
        s.timed_buff.active = false;
    }

    // crack spawns once every cheese is in
    if (s.phase == Phase::Pushing && s.cheese_count(CheeseState::InHole) == cfg.n_cheese) {
        s.crack.active = true;
        s.phase = Phase::Escaping;
    }

    // cat guidance: first rocket sighting
    if (!s.cat_found_rocket) {
        for (const auto& r : s.rockets)
            if (chebyshev(s.agents[kCatId].x, s.agents[kCatId].y, r.x, r.y) <= cfg.vision_radius) {
                s.cat_found_rocket = true;
                break;
            }
    }

    s.step += 1;

    // terminal conditions (mouse-win and cat-win by events are mutually
    // exclusive: 2 escapes + 3 eliminations would need 5 mice)
    if (s.count_mice(MouseStatus::Escaped) >= 2) {
        s.phase = Phase::Terminal;
        s.winner = Winner::Mice;
    } else if (s.count_mice(MouseStatus::Eliminated) >= 3) {
        s.phase = Phase::Terminal;
        s.winner = Winner::Cat;
    } else if (s.step >= cfg.max_steps) {
        s.phase = Phase::Terminal;
        s.winner = Winner::Cat;  // timeout always goes to the cat
    }

    StepResult out;
    out.events = emit_rewards(state, s, decay_progress);
    out.terminal = s.phase == Phase::Terminal;
    out.state = std::move(s);
    return out;
}

// Probe used by mask-soundness checks: would this command do anything, with
// every other agent held still?
inline bool command_applicable(const ArenaState& s, int agent, const ActionCommand& cmd) {
    if (s.phase == Phase::Terminal) return false;
    if (agent != kCatId && !s.mouse_alive(agent)) return false;
    return detail::command_applicable(s, agent, cmd);
}

// --- Text rendering (debug / replay) ---

inline std::string render(const ArenaState& s) {
    std::string out;
    std::vector<char> cells(static_cast<size_t>(s.config.width) * s.config.height);
    for (int y = 0; y < s.config.height; ++y)
        for (int x = 0; x < s.config.width; ++x)
            cells[static_cast<size_t>(y) * s.config.width + x] = s.wall(x, y) ? '#' : '.';
    auto put = [&](int x, int y, char c) { cells[static_cast<size_t>(y) * s.config.width + x] = c; };
    for (const auto& hole : s.holes) put(hole.x, hole.y, hole.filled ? 'H' : 'h');
    for (const auto& r : s.rockets) put(r.x, r.y, r.occupant >= 0 ? 'R' : 'r');
    for (const auto& c : s.cheeses)
        if (c.state != CheeseState::InHole) put(c.x, c.y, c.state == CheeseState::AtHole ? 'o' : 'c');
    if (s.crack.active) put(s.crack.x, s.crack.y, s.crack.open() ? 'X' : 'x');
    for (int i = 1; i < kNumAgents; ++i) {
        const auto& m = s.agents[i];
        if (m.status == MouseStatus::Eliminated || m.status == MouseStatus::Escaped) continue;
        put(m.x, m.y, static_cast<char>('0' + i));
    }
    put(s.agents[kCatId].x, s.agents[kCatId].y, 'C');
    for (int y = 0; y < s.config.height; ++y) {
        out.append(cells.begin() + static_cast<long>(y) * s.config.width,
                   cells.begin() + static_cast<long>(y + 1) * s.config.width);
        out.push_back('\n');
    }
    return out;
}

}  // namespace aet
