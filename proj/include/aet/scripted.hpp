#pragma once

// Deterministic heuristic players. They read the full arena state (they are
// oracles and anchors, not learners) and draw any randomness from the rng
// they are handed.

#include <memory>
#include <optional>
#include <vector>

#include "aet/arena.hpp"
#include "aet/obsenc.hpp"
#include "aet/rng.hpp"

namespace aet {

struct ScriptedPolicy {
    virtual ~ScriptedPolicy() = default;
    virtual ActionCommand act(const ArenaState& state, int agent_id, Rng& rng) = 0;
    virtual const char* name() const = 0;
};

namespace detail {

// Multi-source BFS over floor cells, 8-neighborhood.
inline std::vector<int> bfs_dists(const ArenaState& s, const std::vector<std::pair<int, int>>& targets) {
    const int w = s.config.width, h = s.config.height;
    std::vector<int> dist(static_cast<size_t>(w) * h, -1);
    std::deque<int> q;
    for (auto [x, y] : targets) {
        if (!s.in_bounds(x, y)) continue;
        const int i = y * w + x;
        if (dist[i] < 0) {
            dist[i] = 0;
            q.push_back(i);
        }
    }
    while (!q.empty()) {
        const int cur = q.front();
        q.pop_front();
        const int cx = cur % w, cy = cur / w;
        for (int d = 0; d < kNumDirs; ++d) {
            const int nx = cx + kDirDx[d], ny = cy + kDirDy[d];
            if (!s.floor_at(nx, ny)) continue;
            const int ni = ny * w + nx;
            if (dist[ni] >= 0) continue;
            dist[ni] = dist[cur] + 1;
            q.push_back(ni);
        }
    }
    return dist;
}

// Legal move lowering the BFS distance, lowest direction index wins ties.
// When another agent blocks every improving cell, sidesteps to an
// equal-distance cell instead of freezing.
inline std::optional<Dir> step_toward(const ArenaState& s, int agent_id, const std::vector<int>& dist) {
    const auto& a = s.agents[agent_id];
    const int w = s.config.width;
    const int here = dist[a.y * w + a.x];
    const int start = here < 0 ? INT32_MAX : here;
    int best_d = -1, best_val = start;
    int equal_d = -1;
    for (int d = 0; d < kNumDirs; ++d) {
        const int nx = a.x + kDirDx[d], ny = a.y + kDirDy[d];
        if (!s.floor_at(nx, ny) || blocking_agent_at(s, nx, ny, agent_id)) continue;
        const int nd = dist[ny * w + nx];
        if (nd < 0) continue;
        if (nd < best_val) {
            best_val = nd;
            best_d = d;
        } else if (nd == start && equal_d < 0) {
            equal_d = d;
        }
    }
    if (best_d >= 0) return static_cast<Dir>(best_d);
    if (equal_d >= 0) return static_cast<Dir>(equal_d);
    return std::nullopt;
}

inline ActionCommand random_legal(const ArenaState& s, int agent_id, Rng& rng) {
    const ActionMask mask = legal_mask(s, agent_id);
    std::vector<int> legal;
    for (int a = 0; a < kNumActions; ++a)
        if (mask.actions[a]) legal.push_back(a);
    const int action = legal[rng.index(legal.size())];
    std::vector<int> dirs;
    for (int d = 0; d < kNumDirs; ++d)
        if (mask.directions[d]) dirs.push_back(d);
    const int dir = dirs[rng.index(dirs.size())];
    return {static_cast<Action>(action), static_cast<Dir>(dir)};
}

inline std::optional<Dir> dir_to_adjacent(const ArenaState& s, int agent_id, auto&& is_target) {
    const auto& a = s.agents[agent_id];
    for (int d = 0; d < kNumDirs; ++d) {
        const int nx = a.x + kDirDx[d], ny = a.y + kDirDy[d];
        if (is_target(nx, ny)) return static_cast<Dir>(d);
    }
    return std::nullopt;
}

}  // namespace detail

// Uniform over the legality mask.
struct RandomPolicy final : ScriptedPolicy {
    ActionCommand act(const ArenaState& s, int agent_id, Rng& rng) override {
        return detail::random_legal(s, agent_id, rng);
    }
    const char* name() const override { return "random"; }
};

struct IdlePolicy final : ScriptedPolicy {
    ActionCommand act(const ArenaState&, int, Rng&) override { return {Action::Idle, Dir::N}; }
    const char* name() const override { return "idle"; }
};

enum class CatSkill : uint8_t { Passive = 0, Wander, Hunter };

// Cat bot. Reflexes (attack / pickup / tie) are shared; locomotion differs:
// Passive never moves, Wander moves randomly, Hunter paths to the nearest
// free mouse using full state knowledge.
struct ScriptedCat final : ScriptedPolicy {
    explicit ScriptedCat(CatSkill skill = CatSkill::Hunter) : skill_(skill) {}

    ActionCommand act(const ArenaState& s, int agent_id, Rng& rng) override {
        const auto& cat = s.agents[agent_id];

        if (cat.carrying >= 0) {
            if (detail::adjacent_free_rocket(s, cat.x, cat.y) >= 0) return {Action::Interact, Dir::N};
            std::vector<std::pair<int, int>> rockets;
            for (const auto& r : s.rockets)
                if (r.occupant < 0) rockets.emplace_back(r.x, r.y);
            if (!rockets.empty() && skill_ != CatSkill::Passive) {
                auto dists = detail::bfs_dists(s, rockets);
                if (auto d = detail::step_toward(s, agent_id, dists)) return {Action::Move, *d};
            }
            return {Action::Drop, Dir::N};  // no reachable rocket: release and keep hunting
        }

        if (detail::adjacent_catchable_mouse(s, cat.x, cat.y) >= 0) return {Action::Pickup, Dir::N};

        if (auto d = detail::dir_to_adjacent(s, agent_id, [&](int x, int y) {
                for (int i = 1; i < kNumAgents; ++i) {
                    const auto& m = s.agents[i];
                    if (m.status == MouseStatus::Free && !m.carried_by_cat && m.x == x && m.y == y) return true;
                }
                return false;
            }))
            return {Action::Attack, *d};

        switch (skill_) {
            case CatSkill::Passive:
                return {Action::Idle, Dir::N};
            case CatSkill::Wander: {
                const ActionMask mask = legal_mask(s, agent_id);
                std::vector<int> dirs;
                for (int d = 0; d < kNumDirs; ++d)
                    if (mask.directions[d]) dirs.push_back(d);
                if (!mask.actions[static_cast<int>(Action::Move)] || dirs.empty()) return {Action::Idle, Dir::N};
                return {Action::Move, static_cast<Dir>(dirs[rng.index(dirs.size())])};
            }
            case CatSkill::Hunter: {
                std::vector<std::pair<int, int>> prey;
                for (int i = 1; i < kNumAgents; ++i)
                    if (s.agents[i].status == MouseStatus::Free) prey.emplace_back(s.agents[i].x, s.agents[i].y);
                if (!prey.empty()) {
                    auto dists = detail::bfs_dists(s, prey);
                    if (auto d = detail::step_toward(s, agent_id, dists)) return {Action::Move, *d};
                }
                return detail::random_legal(s, agent_id, rng);
            }
        }
        return {Action::Idle, Dir::N};
    }

    const char* name() const override {
        switch (skill_) {
            case CatSkill::Passive: return "cat_passive";
            case CatSkill::Wander: return "cat_wander";
            default: return "cat_hunter";
        }
    }

  private:
    CatSkill skill_;
};

enum class MouseSkill : uint8_t { Scatter = 0, Worker };

// Mouse bot. Worker runs the full task pipeline: rescue, escape-phase work,
// carry/drop, push, pickup, seek. Scatter just moves randomly (an anchor-level
// weak bot).
struct ScriptedMouse final : ScriptedPolicy {
    explicit ScriptedMouse(MouseSkill skill = MouseSkill::Worker) : skill_(skill) {}

    ActionCommand act(const ArenaState& s, int agent_id, Rng& rng) override {
        const auto& me = s.agents[agent_id];
        if (me.status != MouseStatus::Free) return {Action::Idle, Dir::N};
        if (skill_ == MouseSkill::Scatter) return detail::random_legal(s, agent_id, rng);

        if (detail::adjacent_rescuable_mouse(s, me.x, me.y, agent_id) >= 0) return {Action::Rescue, Dir::N};

        if (s.phase == Phase::Escaping) {
            if (s.crack.open() && adjacent(me.x, me.y, s.crack.x, s.crack.y)) return {Action::Interact, Dir::N};
            if (auto d = detail::dir_to_adjacent(s, agent_id, [&](int x, int y) {
                    return s.crack.active && !s.crack.open() && s.crack.x == x && s.crack.y == y;
                }))
                return {Action::Attack, *d};
            auto dists = detail::bfs_dists(s, {{s.crack.x, s.crack.y}});
            if (auto d = detail::step_toward(s, agent_id, dists)) return {Action::Move, *d};
            return {Action::Idle, Dir::N};
        }

        if (me.carrying >= 0) {
            if (detail::adjacent_open_hole(s, me.x, me.y) >= 0) return {Action::Drop, Dir::N};
            std::vector<std::pair<int, int>> targets;
            for (size_t i = 0; i < s.holes.size(); ++i) {
                if (s.holes[i].filled) continue;
                bool occupied = false;
                for (const auto& c : s.cheeses)
                    if (c.state == CheeseState::AtHole && c.hole == static_cast<int>(i)) occupied = true;
                if (!occupied) targets.emplace_back(s.holes[i].x, s.holes[i].y);
            }
            if (!targets.empty()) {
                auto dists = detail::bfs_dists(s, targets);
                if (auto d = detail::step_toward(s, agent_id, dists)) return {Action::Move, *d};
            }
            return {Action::Idle, Dir::N};
        }

        if (detail::adjacent_athole_cheese(s, me.x, me.y) >= 0) return {Action::Push, Dir::N};
        if (detail::adjacent_loose_cheese(s, me.x, me.y) >= 0) return {Action::Pickup, Dir::N};

        std::vector<std::pair<int, int>> targets;
        for (const auto& c : s.cheeses)
            if (c.state == CheeseState::Loose || (c.state == CheeseState::AtHole && c.progress < 100))
                targets.emplace_back(c.x, c.y);
        // nobody free-riding: also converge on tied teammates to rescue
        for (int i = 1; i < kNumAgents; ++i)
            if (i != agent_id &&
                (s.agents[i].status == MouseStatus::Tied || s.agents[i].status == MouseStatus::Caught))
                targets.emplace_back(s.agents[i].x, s.agents[i].y);
        if (!targets.empty()) {
            auto dists = detail::bfs_dists(s, targets);
            if (auto d = detail::step_toward(s, agent_id, dists)) return {Action::Move, *d};
        }
        return detail::random_legal(s, agent_id, rng);
    }

    const char* name() const override { return skill_ == MouseSkill::Worker ? "mouse_worker" : "mouse_scatter"; }

  private:
    MouseSkill skill_;
};

inline std::unique_ptr<ScriptedPolicy> make_scripted(const std::string& name) {
    if (name == "random") return std::make_unique<RandomPolicy>();
    if (name == "idle") return std::make_unique<IdlePolicy>();
    if (name == "cat_passive") return std::make_unique<ScriptedCat>(CatSkill::Passive);
    if (name == "cat_wander") return std::make_unique<ScriptedCat>(CatSkill::Wander);
    if (name == "cat_hunter") return std::make_unique<ScriptedCat>(CatSkill::Hunter);
    if (name == "mouse_scatter") return std::make_unique<ScriptedMouse>(MouseSkill::Scatter);
    if (name == "mouse_worker") return std::make_unique<ScriptedMouse>(MouseSkill::Worker);
    throw InputError("unknown scripted policy: " + name);
}

}  // namespace aet
