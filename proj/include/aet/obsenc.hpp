#pragma once

// Observation encoding: arena state -> network inputs. Produces the
// mini-image channels, the per-side vector block, a variable-length entity
// slot list (max-pooled downstream), the memory block, the action mask, and
// the invisible block used only by value-net input assembly.

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "aet/arena.hpp"
#include "aet/common.hpp"

namespace aet {

struct ObsEncConfig {
    int memory_capacity = 16;  // M: own-action ring length
    int entity_slots = 8;      // cap for the variable-length entity list
    int max_age = 100;         // age counters saturate here
    bool memory_info = true;   // ablation: zero the memory block when off
    bool invisible_info = true;  // ablation: zero the invisible block when off

    void validate() const {
        if (memory_capacity < 1) throw ConfigError("obsenc: memory_capacity must be >= 1");
        if (entity_slots < 1) throw ConfigError("obsenc: entity_slots must be >= 1");
        if (max_age < 1) throw ConfigError("obsenc: max_age must be >= 1");
    }
    bool operator==(const ObsEncConfig&) const = default;
};

inline constexpr int kImageChannels = 8;
inline constexpr int kEntityFeat = 12;  // present + type(6) + x + y + aux1 + aux2

// Constant, config-determined shapes for one side's observations.
struct ObsLayout {
    int width = 0, height = 0;
    int vec_dim = 0;
    int entity_slots = 0;
    int memory_dim = 0;
    int invisible_dim = 0;
    Side side = Side::Mouse;

    int image_size() const { return kImageChannels * width * height; }
    bool operator==(const ObsLayout&) const = default;
};

namespace detail {

inline int mouse_vec_dim(const ArenaConfig& c) {
    // self(9) + teammates(3x9) + cat last-seen(5) + global(5)
    // + cheeses(n x 8) + holes(n x 4) + rockets(nr x 4) + crack(5)
    return 9 + 27 + 5 + 5 + c.n_cheese * 8 + c.n_holes() * 4 + c.n_rockets * 4 + 5;
}

inline int cat_vec_dim(const ArenaConfig& c) {
    // self(5) + mice last-seen(4x5) + global(5) + fixed entities as above
    return 5 + 20 + 5 + c.n_cheese * 8 + c.n_holes() * 4 + c.n_rockets * 4 + 5;
}

inline int memory_dim(const ArenaConfig& c, const ObsEncConfig& e, Side side) {
    const int opponents = side == Side::Mouse ? 1 : kNumMice;
    return e.memory_capacity * (kNumActions + kNumDirs) + opponents * 4 + c.n_cheese * 4 + 4;
}

inline int invisible_dim(const ArenaConfig& c) {
    // agents(5x10) + cheeses(n x 7) + holes(n x 3) + rockets(nr x 3) + crack(5)
    return kNumAgents * 10 + c.n_cheese * 7 + c.n_holes() * 3 + c.n_rockets * 3 + 5;
}

}  // namespace detail

inline ObsLayout obs_layout(const ArenaConfig& c, const ObsEncConfig& e, Side side) {
    ObsLayout l;
    l.width = c.width;
    l.height = c.height;
    l.side = side;
    l.vec_dim = side == Side::Mouse ? detail::mouse_vec_dim(c) : detail::cat_vec_dim(c);
    l.entity_slots = e.entity_slots;
    l.memory_dim = detail::memory_dim(c, e, side);
    l.invisible_dim = detail::invisible_dim(c);
    return l;
}

struct ActionMask {
    std::array<uint8_t, kNumActions> actions{};
    std::array<uint8_t, kNumDirs> directions{};
    bool operator==(const ActionMask&) const = default;
};

struct Observation {
    std::vector<float> image;     // CHW, kImageChannels x H x W
    std::vector<float> vec;       // side-specific fixed block
    std::vector<float> entities;  // entity_slots x kEntityFeat
    std::vector<float> memory;    // flattened MemoryBlock
    std::vector<float> invisible;  // empty for policy observations
    ActionMask mask;
    Side side = Side::Mouse;
};

// --- Memory block ---

// Fixed-capacity record of what this agent has done and seen. Content is a
// pure function of the observation history; ages saturate at max_age.
struct MemoryBlock {
    struct Sighting {
        bool seen = false;
        int x = 0, y = 0;
        int age = 0;
    };
    // newest action at the back; bounded by memory_capacity
    std::vector<ActionCommand> recent_actions;
    std::vector<Sighting> opponents;  // 1 entry (cat) for mice, 4 for the cat
    std::vector<Sighting> cheeses;
    Sighting crack;

    static MemoryBlock initial(const ArenaConfig& cfg, Side side) {
        MemoryBlock m;
        m.opponents.resize(side == Side::Mouse ? 1 : kNumMice);
        m.cheeses.resize(cfg.n_cheese);
        return m;
    }
};

namespace detail {

inline bool visible_from(const ArenaState& s, int ox, int oy, int tx, int ty) {
    return chebyshev(ox, oy, tx, ty) <= s.config.vision_radius;
}

inline void age_up(MemoryBlock::Sighting& rec, int max_age) {
    if (rec.seen && rec.age < max_age) ++rec.age;
}

inline void note(MemoryBlock::Sighting& rec, int x, int y) {
    rec = {true, x, y, 0};
}

}  // namespace detail

// Advance the memory one step: ages grow, newly visible facts reset to age 0,
// the own-action ring records `taken` (oldest entry evicted at capacity).
inline MemoryBlock update_memory(const MemoryBlock& memory, const ArenaState& state, int agent_id,
                                 const ActionCommand& taken, const ObsEncConfig& enc) {
    MemoryBlock m = memory;
    const auto& self = state.agents[agent_id];

    m.recent_actions.push_back(taken);
    while (static_cast<int>(m.recent_actions.size()) > enc.memory_capacity)
        m.recent_actions.erase(m.recent_actions.begin());

    for (auto& rec : m.opponents) detail::age_up(rec, enc.max_age);
    for (auto& rec : m.cheeses) detail::age_up(rec, enc.max_age);
    detail::age_up(m.crack, enc.max_age);

    if (agent_id == kCatId) {
        for (int i = 1; i < kNumAgents; ++i) {
            const auto& t = state.agents[i];
            if (!state.mouse_alive(i)) continue;
            if (detail::visible_from(state, self.x, self.y, t.x, t.y)) detail::note(m.opponents[i - 1], t.x, t.y);
        }
    } else {
        const auto& cat = state.agents[kCatId];
        if (detail::visible_from(state, self.x, self.y, cat.x, cat.y)) detail::note(m.opponents[0], cat.x, cat.y);
    }
    for (size_t c = 0; c < state.cheeses.size(); ++c) {
        const auto& ch = state.cheeses[c];
        if (ch.state == CheeseState::InHole) continue;
        if (detail::visible_from(state, self.x, self.y, ch.x, ch.y)) detail::note(m.cheeses[c], ch.x, ch.y);
    }
    if (state.crack.active && detail::visible_from(state, self.x, self.y, state.crack.x, state.crack.y))
        detail::note(m.crack, state.crack.x, state.crack.y);

    return m;
}

// --- Action mask ---

inline ActionMask legal_mask(const ArenaState& state, int agent_id) {
    if (agent_id != kCatId && !state.mouse_alive(agent_id))
        throw InputError("legal_mask for inactive agent");

    ActionMask mask;
    const auto& a = state.agents[agent_id];
    const bool is_cat = agent_id == kCatId;
    mask.actions[static_cast<int>(Action::Idle)] = 1;  // always legal

    const bool incapacitated =
        !is_cat && (a.status == MouseStatus::Caught || a.status == MouseStatus::Tied);
    if (!incapacitated) {
        std::array<uint8_t, kNumDirs> move_dirs{}, attack_dirs{};
        for (int d = 0; d < kNumDirs; ++d) {
            const int nx = a.x + kDirDx[d], ny = a.y + kDirDy[d];
            if (state.floor_at(nx, ny) && !detail::blocking_agent_at(state, nx, ny, agent_id)) move_dirs[d] = 1;
            if (is_cat) {
                for (int m = 1; m < kNumAgents; ++m) {
                    const auto& t = state.agents[m];
                    if (t.status == MouseStatus::Free && !t.carried_by_cat && t.x == nx && t.y == ny)
                        attack_dirs[d] = 1;
                }
            } else if (state.crack.active && !state.crack.open() && state.crack.x == nx && state.crack.y == ny) {
                attack_dirs[d] = 1;
            }
        }
        const bool any_move = std::any_of(move_dirs.begin(), move_dirs.end(), [](uint8_t v) { return v != 0; });
        const bool any_attack = std::any_of(attack_dirs.begin(), attack_dirs.end(), [](uint8_t v) { return v != 0; });
        if (any_move) mask.actions[static_cast<int>(Action::Move)] = 1;
        if (any_attack) mask.actions[static_cast<int>(Action::Attack)] = 1;

        if (is_cat) {
            if (a.carrying < 0 && detail::adjacent_catchable_mouse(state, a.x, a.y) >= 0)
                mask.actions[static_cast<int>(Action::Pickup)] = 1;
            if (a.carrying >= 0) {
                mask.actions[static_cast<int>(Action::Drop)] = 1;
                if (detail::adjacent_free_rocket(state, a.x, a.y) >= 0)
                    mask.actions[static_cast<int>(Action::Interact)] = 1;
            }
        } else {
            if (a.carrying < 0 && detail::adjacent_loose_cheese(state, a.x, a.y) >= 0)
                mask.actions[static_cast<int>(Action::Pickup)] = 1;
            if (a.carrying >= 0) mask.actions[static_cast<int>(Action::Drop)] = 1;
            if (detail::adjacent_athole_cheese(state, a.x, a.y) >= 0)
                mask.actions[static_cast<int>(Action::Push)] = 1;
            if (detail::adjacent_rescuable_mouse(state, a.x, a.y, agent_id) >= 0)
                mask.actions[static_cast<int>(Action::Rescue)] = 1;
            if (state.crack.open() && adjacent(a.x, a.y, state.crack.x, state.crack.y))
                mask.actions[static_cast<int>(Action::Interact)] = 1;
        }

        // direction head: union over direction-consuming actions
        for (int d = 0; d < kNumDirs; ++d) mask.directions[d] = move_dirs[d] | attack_dirs[d];
    }
    if (std::none_of(mask.directions.begin(), mask.directions.end(), [](uint8_t v) { return v != 0; }))
        mask.directions.fill(1);  // direction irrelevant; keep the head well-defined
    return mask;
}

// --- Encoders ---

namespace detail {

struct VecWriter {
    std::vector<float>& out;
    const ArenaConfig& cfg;

    void raw(float v) { out.push_back(v); }
    void flag(bool b) { out.push_back(b ? 1.0f : 0.0f); }
    void pos(int x, int y) {
        out.push_back(cfg.width > 1 ? 2.0f * x / (cfg.width - 1) - 1.0f : 0.0f);
        out.push_back(cfg.height > 1 ? 2.0f * y / (cfg.height - 1) - 1.0f : 0.0f);
    }
    void frac(double num, double den) { out.push_back(den > 0 ? static_cast<float>(num / den) : 0.0f); }
    void onehot(int v, int n) {
        for (int i = 0; i < n; ++i) out.push_back(i == v ? 1.0f : 0.0f);
    }
    void zeros(int n) { out.insert(out.end(), n, 0.0f); }
};

inline int mouse_status_slot(MouseStatus s) {
    switch (s) {
        case MouseStatus::Free: return 0;
        case MouseStatus::Caught: return 1;
        case MouseStatus::Tied: return 2;
        default: return -1;
    }
}

// Fixed entity slots, shared between the cat and mouse vector layouts.
inline void write_fixed_entities(VecWriter& w, const ArenaState& s, int ox, int oy, int radius) {
    auto vis = [&](int x, int y) { return chebyshev(ox, oy, x, y) <= radius; };

    for (const auto& c : s.cheeses) {
        if (vis(c.x, c.y)) {
            w.flag(true);
            w.pos(c.x, c.y);
            w.onehot(static_cast<int>(c.state), 4);
            w.frac(c.progress, 100.0);
        } else {
            w.zeros(8);
        }
    }
    for (const auto& hole : s.holes) {
        if (vis(hole.x, hole.y)) {
            w.flag(true);
            w.pos(hole.x, hole.y);
            w.flag(hole.filled);
        } else {
            w.zeros(4);
        }
    }
    for (const auto& r : s.rockets) {
        if (vis(r.x, r.y)) {
            w.flag(true);
            w.pos(r.x, r.y);
            w.flag(r.occupant >= 0);
        } else {
            w.zeros(4);
        }
    }
    if (s.crack.active && vis(s.crack.x, s.crack.y)) {
        w.flag(true);
        w.pos(s.crack.x, s.crack.y);
        w.frac(s.crack.hp, s.config.crack_hp);
        w.flag(s.crack.open());
    } else {
        w.zeros(5);
    }
}

inline void write_global(VecWriter& w, const ArenaState& s) {
    w.onehot(s.phase == Phase::Escaping ? 1 : 0, 2);
    w.frac(s.config.max_steps - s.step, s.config.max_steps);
    w.frac(s.cheese_count(CheeseState::InHole), s.config.n_cheese);
    int total_progress = 0;
    for (const auto& c : s.cheeses)
        total_progress += c.state == CheeseState::InHole ? 100 : (c.state == CheeseState::AtHole ? c.progress : 0);
    w.frac(total_progress, 100.0 * s.config.n_cheese);
}

inline void write_last_seen(VecWriter& w, const MemoryBlock::Sighting& rec, bool visible_now, int max_age) {
    w.flag(rec.seen);
    w.flag(visible_now);
    if (rec.seen)
        w.pos(rec.x, rec.y);
    else
        w.zeros(2);
    w.frac(rec.seen ? rec.age : 0, max_age);
}

}  // namespace detail

inline Observation encode_policy_obs(const ArenaState& state, int agent_id, const MemoryBlock& memory,
                                     const ObsEncConfig& enc) {
    if (agent_id != kCatId && !state.mouse_alive(agent_id))
        throw InputError("encode for inactive agent");
    const auto& cfg = state.config;
    const auto& self = state.agents[agent_id];
    const bool is_cat = agent_id == kCatId;
    const int radius = cfg.vision_radius;
    auto vis = [&](int x, int y) { return chebyshev(self.x, self.y, x, y) <= radius; };

    Observation obs;
    obs.side = is_cat ? Side::Cat : Side::Mouse;

    // image channels: 0 walls (full), 1 cheeses, 2 holes, 3 crack, 4 rockets,
    // 5 carried-cheese overlay, 6 cat, 7 mice; channels 1..7 visibility-masked
    const int W = cfg.width, H = cfg.height;
    obs.image.assign(static_cast<size_t>(kImageChannels) * W * H, 0.0f);
    auto paint = [&](int ch, int x, int y, float v) {
        obs.image[(static_cast<size_t>(ch) * H + y) * W + x] = v;
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (state.wall(x, y)) paint(0, x, y, 1.0f);
    for (const auto& c : state.cheeses) {
        if (c.state == CheeseState::InHole || !vis(c.x, c.y)) continue;
        paint(1, c.x, c.y, c.state == CheeseState::AtHole ? 0.5f : 1.0f);
        if (c.state == CheeseState::Carried) paint(5, c.x, c.y, 1.0f);
    }
    for (const auto& hole : state.holes)
        if (vis(hole.x, hole.y)) paint(2, hole.x, hole.y, hole.filled ? 0.5f : 1.0f);
    if (state.crack.active && vis(state.crack.x, state.crack.y))
        paint(3, state.crack.x, state.crack.y, state.crack.open() ? 1.0f : 0.5f);
    for (const auto& r : state.rockets)
        if (vis(r.x, r.y)) paint(4, r.x, r.y, r.occupant >= 0 ? 1.0f : 0.5f);
    {
        const auto& cat = state.agents[kCatId];
        if (vis(cat.x, cat.y)) paint(6, cat.x, cat.y, 1.0f);
    }
    for (int i = 1; i < kNumAgents; ++i) {
        const auto& m = state.agents[i];
        if (!state.mouse_alive(i)) continue;
        if (i == agent_id || vis(m.x, m.y)) paint(7, m.x, m.y, 1.0f);
    }

    // vector block
    detail::VecWriter w{obs.vec, cfg};
    if (is_cat) {
        w.pos(self.x, self.y);
        w.frac(self.hp, self.max_hp);
        w.flag(self.carrying >= 0);
        w.frac(self.speed - 1, 2.0);
        for (int i = 1; i < kNumAgents; ++i) {
            const auto& m = state.agents[i];
            const bool visible_now = state.mouse_alive(i) && vis(m.x, m.y);
            detail::write_last_seen(w, memory.opponents[i - 1], visible_now, enc.max_age);
        }
    } else {
        w.pos(self.x, self.y);
        w.frac(self.hp, self.max_hp);
        w.onehot(detail::mouse_status_slot(self.status), 3);
        w.flag(self.carrying >= 0);
        w.frac(self.countdown, cfg.rocket_countdown);
        w.frac(self.speed - 1, 2.0);
        // teammates share their state regardless of vision (team channel)
        for (int i = 1; i < kNumAgents; ++i) {
            if (i == agent_id) continue;
            const auto& m = state.agents[i];
            if (state.mouse_alive(i)) {
                w.flag(true);
                w.flag(vis(m.x, m.y));
                w.pos(m.x, m.y);
                w.frac(m.hp, m.max_hp);
                w.onehot(detail::mouse_status_slot(m.status), 3);
                w.flag(m.carrying >= 0);
            } else {
                w.zeros(9);
            }
        }
        const auto& cat = state.agents[kCatId];
        detail::write_last_seen(w, memory.opponents[0], vis(cat.x, cat.y), enc.max_age);
    }
    detail::write_global(w, state);
    detail::write_fixed_entities(w, state, self.x, self.y, radius);
    const int expect_vec = is_cat ? detail::cat_vec_dim(cfg) : detail::mouse_vec_dim(cfg);
    if (static_cast<int>(obs.vec.size()) != expect_vec)
        throw StructuralError("vector block size mismatch");

    // variable-length entity list: visible interactive entities, nearest
    // first, capped at entity_slots; consumed order-free by max-pooling
    struct Ent {
        int dist, type, idx;
        float x, y, aux1, aux2;
    };
    std::vector<Ent> ents;
    auto norm_x = [&](int x) { return W > 1 ? 2.0f * x / (W - 1) - 1.0f : 0.0f; };
    auto norm_y = [&](int y) { return H > 1 ? 2.0f * y / (H - 1) - 1.0f : 0.0f; };
    auto consider = [&](int type, int idx, int x, int y, float aux1, float aux2) {
        if (!vis(x, y)) return;
        ents.push_back({chebyshev(self.x, self.y, x, y), type, idx, norm_x(x), norm_y(y), aux1, aux2});
    };
    for (size_t i = 0; i < state.cheeses.size(); ++i) {
        const auto& c = state.cheeses[i];
        if (c.state != CheeseState::InHole)
            consider(0, static_cast<int>(i), c.x, c.y, c.progress / 100.0f,
                     c.state == CheeseState::Carried ? 1.0f : 0.0f);
    }
    for (size_t i = 0; i < state.holes.size(); ++i)
        consider(1, static_cast<int>(i), state.holes[i].x, state.holes[i].y,
                 state.holes[i].filled ? 1.0f : 0.0f, 0.0f);
    for (size_t i = 0; i < state.rockets.size(); ++i)
        consider(2, static_cast<int>(i), state.rockets[i].x, state.rockets[i].y,
                 state.rockets[i].occupant >= 0 ? 1.0f : 0.0f, 0.0f);
    if (state.crack.active)
        consider(3, 0, state.crack.x, state.crack.y,
                 static_cast<float>(state.crack.hp) / cfg.crack_hp, state.crack.open() ? 1.0f : 0.0f);
    if (!is_cat) {
        const auto& cat = state.agents[kCatId];
        consider(4, 0, cat.x, cat.y, static_cast<float>(cat.hp) / cat.max_hp, 0.0f);
    }
    for (int i = 1; i < kNumAgents; ++i) {
        if (i == agent_id || !state.mouse_alive(i)) continue;
        const auto& m = state.agents[i];
        consider(5, i, m.x, m.y, static_cast<float>(m.hp) / m.max_hp,
                 m.status == MouseStatus::Free ? 0.0f : 1.0f);
    }
    std::sort(ents.begin(), ents.end(), [](const Ent& a, const Ent& b) {
        return std::tie(a.dist, a.type, a.idx) < std::tie(b.dist, b.type, b.idx);
    });
    obs.entities.assign(static_cast<size_t>(enc.entity_slots) * kEntityFeat, 0.0f);
    const int n_slots = std::min<int>(enc.entity_slots, static_cast<int>(ents.size()));
    for (int sIdx = 0; sIdx < n_slots; ++sIdx) {
        float* slot = obs.entities.data() + static_cast<size_t>(sIdx) * kEntityFeat;
        slot[0] = 1.0f;
        slot[1 + ents[sIdx].type] = 1.0f;
        slot[7] = ents[sIdx].x;
        slot[8] = ents[sIdx].y;
        slot[9] = static_cast<float>(ents[sIdx].dist) / std::max(W, H);
        slot[10] = ents[sIdx].aux1;
        slot[11] = ents[sIdx].aux2;
    }

    // memory block
    obs.memory.assign(detail::memory_dim(cfg, enc, obs.side), 0.0f);
    if (enc.memory_info) {
        size_t k = 0;
        const int M = enc.memory_capacity;
        const int n_actions = static_cast<int>(memory.recent_actions.size());
        for (int slot = 0; slot < M; ++slot) {
            // newest action in slot 0
            const int rec = n_actions - 1 - slot;
            if (rec >= 0) {
                const auto& ac = memory.recent_actions[rec];
                obs.memory[k + static_cast<int>(ac.action)] = 1.0f;
                if (action_uses_direction(ac.action))
                    obs.memory[k + kNumActions + static_cast<int>(ac.direction)] = 1.0f;
            }
            k += kNumActions + kNumDirs;
        }
        auto put_sighting = [&](const MemoryBlock::Sighting& rec) {
            obs.memory[k++] = rec.seen ? 1.0f : 0.0f;
            obs.memory[k++] = rec.seen ? norm_x(rec.x) : 0.0f;
            obs.memory[k++] = rec.seen ? norm_y(rec.y) : 0.0f;
            obs.memory[k++] = rec.seen ? static_cast<float>(rec.age) / enc.max_age : 0.0f;
        };
        for (const auto& rec : memory.opponents) put_sighting(rec);
        for (const auto& rec : memory.cheeses) put_sighting(rec);
        put_sighting(memory.crack);
        if (k != obs.memory.size()) throw StructuralError("memory block size mismatch");
    }

    obs.mask = legal_mask(state, agent_id);
    return obs;
}

// Policy observation plus the appended invisible block: ground truth for all
// agents and entities regardless of vision. Never fed to the policy head.
inline Observation encode_value_obs(const ArenaState& state, int agent_id, const MemoryBlock& memory,
                                    const ObsEncConfig& enc) {
    Observation obs = encode_policy_obs(state, agent_id, memory, enc);
    const auto& cfg = state.config;
    obs.invisible.reserve(detail::invisible_dim(cfg));
    detail::VecWriter w{obs.invisible, cfg};
    if (enc.invisible_info) {
        for (int i = 0; i < kNumAgents; ++i) {
            const auto& a = state.agents[i];
            w.pos(a.x, a.y);
            w.frac(a.hp, a.max_hp);
            w.onehot(i == kCatId ? 0 : static_cast<int>(a.status), 5);
            w.flag(a.carrying >= 0);
            w.frac(a.countdown, cfg.rocket_countdown);
        }
        for (const auto& c : state.cheeses) {
            w.pos(c.x, c.y);
            w.onehot(static_cast<int>(c.state), 4);
            w.frac(c.progress, 100.0);
        }
        for (const auto& hole : state.holes) {
            w.pos(hole.x, hole.y);
            w.flag(hole.filled);
        }
        for (const auto& r : state.rockets) {
            w.pos(r.x, r.y);
            w.flag(r.occupant >= 0);
        }
        w.flag(state.crack.active);
        if (state.crack.active)
            w.pos(state.crack.x, state.crack.y);
        else
            w.zeros(2);
        w.frac(state.crack.active ? state.crack.hp : 0, cfg.crack_hp);
        w.flag(state.crack.open());
    } else {
        w.zeros(detail::invisible_dim(cfg));
    }
    if (static_cast<int>(obs.invisible.size()) != detail::invisible_dim(cfg))
        throw StructuralError("invisible block size mismatch");
    return obs;
}

}  // namespace aet
