#include <doctest.h>

#include <set>

#include "aet/obsenc.hpp"
#include "aet/scripted.hpp"

using namespace aet;

namespace {

ArenaConfig tiny_config(uint64_t seed = 1) {
    ArenaConfig cfg;
    cfg.width = 9;
    cfg.height = 7;
    cfg.n_cheese = 1;
    cfg.n_rockets = 1;
    cfg.max_steps = 80;
    cfg.vision_radius = 3;
    cfg.wall_density_pct = 0;
    cfg.rng_seed = seed;
    return cfg;
}

float image_at(const Observation& obs, const ArenaConfig& cfg, int ch, int x, int y) {
    return obs.image[(static_cast<size_t>(ch) * cfg.height + y) * cfg.width + x];
}

bool channel_all_zero(const Observation& obs, const ArenaConfig& cfg, int ch) {
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x)
            if (image_at(obs, cfg, ch, x, y) != 0.0f) return false;
    return true;
}

// Hand-built 5x5 arena: border walls, everything packed into the 3x3 interior.
ArenaState dense_5x5() {
    ArenaConfig cfg;
    cfg.width = 5;
    cfg.height = 5;
    cfg.n_cheese = 1;
    cfg.n_rockets = 1;
    cfg.max_steps = 50;
    cfg.vision_radius = 4;
    cfg.rng_seed = 0;

    ArenaState s;
    s.config = cfg;
    s.walls.assign(25, 0);
    for (int x = 0; x < 5; ++x) s.walls[x] = s.walls[20 + x] = 1;
    for (int y = 0; y < 5; ++y) s.walls[static_cast<size_t>(y) * 5] = s.walls[static_cast<size_t>(y) * 5 + 4] = 1;
    s.cheeses = {{1, 1, CheeseState::Loose, -1, -1, 0}};
    s.holes = {{3, 1, false}};
    s.rockets = {{1, 3, -1}};
    s.crack = {false, 2, 0, 30};
    auto place = [&](int id, int x, int y, int hp) {
        s.agents[id] = {};
        s.agents[id].x = x;
        s.agents[id].y = y;
        s.agents[id].hp = hp;
        s.agents[id].max_hp = hp;
        s.agents[id].attack = id == kCatId ? cfg.cat_attack_damage : cfg.crack_attack_damage;
        s.agents[id].speed = 1;
    };
    place(kCatId, 2, 2, cfg.cat_hp);
    place(1, 2, 1, cfg.mouse_hp);
    place(2, 3, 2, cfg.mouse_hp);
    place(3, 2, 3, cfg.mouse_hp);
    place(4, 3, 3, cfg.mouse_hp);
    return s;
}

}  // namespace

TEST_CASE("obsenc: mouse sees itself on channel 8, hidden cat zeroes channel 7") {
    ArenaConfig cfg = tiny_config(5);
    ArenaState s = generate(cfg);
    // place mouse 1 and the cat at opposite corners, beyond radius 3
    s.agents[1].x = 1;
    s.agents[1].y = 1;
    s.agents[kCatId].x = cfg.width - 2;
    s.agents[kCatId].y = cfg.height - 2;

    MemoryBlock mem = MemoryBlock::initial(cfg, Side::Mouse);
    ObsEncConfig enc;
    Observation obs = encode_policy_obs(s, 1, mem, enc);
    CHECK(image_at(obs, cfg, 7, 1, 1) == 1.0f);  // own cell on the mice channel
    CHECK(channel_all_zero(obs, cfg, 6));        // cat channel empty
    CHECK(!channel_all_zero(obs, cfg, 0));       // walls always painted

    // stale sighting: cat was seen once, then moved out of view
    ArenaState seen = s;
    seen.agents[kCatId].x = 2;
    seen.agents[kCatId].y = 2;
    mem = update_memory(mem, seen, 1, {Action::Idle, Dir::N}, enc);
    CHECK(mem.opponents[0].seen);
    CHECK(mem.opponents[0].age == 0);
    mem = update_memory(mem, s, 1, {Action::Idle, Dir::N}, enc);  // cat far away again
    CHECK(mem.opponents[0].age == 1);
    Observation obs2 = encode_policy_obs(s, 1, mem, enc);
    CHECK(channel_all_zero(obs2, cfg, 6));
    // last-seen block: ever_seen flag set, visible_now clear, age > 0
    // (mouse vec layout: self block is 9 wide, then 3 teammates x 9, then cat last-seen)
    const int cat_block = 9 + 27;
    CHECK(obs2.vec[cat_block + 0] == 1.0f);
    CHECK(obs2.vec[cat_block + 1] == 0.0f);
    CHECK(obs2.vec[cat_block + 4] > 0.0f);
}

TEST_CASE("obsenc: encode for dead agent is rejected") {
    ArenaState s = generate(tiny_config(2));
    s.agents[2].status = MouseStatus::Eliminated;
    MemoryBlock mem = MemoryBlock::initial(s.config, Side::Mouse);
    ObsEncConfig enc;
    CHECK_THROWS_AS(encode_policy_obs(s, 2, mem, enc), InputError);
    CHECK_THROWS_AS(legal_mask(s, 2), InputError);
}

TEST_CASE("obsenc: masked encode equals unmasked oracle when everything is in view") {
    ArenaConfig cfg = tiny_config(3);
    cfg.vision_radius = 2;
    ArenaState s = generate(cfg);
    // cluster everyone within radius 2 of the observer at (4,3)
    s.agents[1].x = 4;
    s.agents[1].y = 3;
    s.agents[2].x = 3;
    s.agents[2].y = 2;
    s.agents[3].x = 5;
    s.agents[3].y = 4;
    s.agents[4].x = 4;
    s.agents[4].y = 2;
    s.agents[kCatId].x = 5;
    s.agents[kCatId].y = 3;
    s.cheeses[0].x = 3;
    s.cheeses[0].y = 3;
    s.holes[0].x = 5;
    s.holes[0].y = 2;
    s.rockets[0].x = 3;
    s.rockets[0].y = 4;

    ArenaState oracle_state = s;
    oracle_state.config.vision_radius = 100;  // unmasked oracle encoder

    ObsEncConfig enc;
    MemoryBlock mem = MemoryBlock::initial(cfg, Side::Mouse);
    mem = update_memory(mem, s, 1, {Action::Idle, Dir::N}, enc);
    const Observation masked = encode_policy_obs(s, 1, mem, enc);
    const Observation oracle = encode_policy_obs(oracle_state, 1, mem, enc);
    CHECK(masked.image == oracle.image);
    CHECK(masked.vec == oracle.vec);
    CHECK(masked.entities == oracle.entities);
}

TEST_CASE("obsenc: policy obs ignores out-of-vision changes (no leakage)") {
    ArenaConfig cfg = tiny_config(4);
    ArenaState s = generate(cfg);
    s.agents[1].x = 1;
    s.agents[1].y = 1;
    s.agents[kCatId].x = 7;
    s.agents[kCatId].y = 5;
    s.cheeses[0].x = 7;
    s.cheeses[0].y = 4;  // outside radius 3 of (1,1)

    ObsEncConfig enc;
    MemoryBlock mem = MemoryBlock::initial(cfg, Side::Mouse);
    const Observation before = encode_policy_obs(s, 1, mem, enc);

    ArenaState moved = s;
    moved.agents[kCatId].x = 6;  // still hidden
    moved.cheeses[0].x = 6;
    moved.cheeses[0].y = 5;
    const Observation after = encode_policy_obs(moved, 1, mem, enc);
    CHECK(before.image == after.image);
    CHECK(before.vec == after.vec);
    CHECK(before.entities == after.entities);
    CHECK(before.memory == after.memory);

    // the value observation does see the difference
    const Observation vb = encode_value_obs(s, 1, mem, enc);
    const Observation va = encode_value_obs(moved, 1, mem, enc);
    CHECK(vb.invisible != va.invisible);
}

TEST_CASE("obsenc: value obs is the policy obs plus the invisible block") {
    RandomPolicy rp;
    ObsEncConfig enc;
    for (uint64_t seed = 0; seed < 25; ++seed) {
        ArenaState s = generate(tiny_config(seed));
        Rng rng(seed);
        MemoryBlock mem = MemoryBlock::initial(s.config, Side::Mouse);
        for (int t = 0; t < 40 && s.phase != Phase::Terminal; ++t) {
            if (s.mouse_alive(1)) {
                const Observation p = encode_policy_obs(s, 1, mem, enc);
                const Observation v = encode_value_obs(s, 1, mem, enc);
                REQUIRE(p.image == v.image);
                REQUIRE(p.vec == v.vec);
                REQUIRE(p.entities == v.entities);
                REQUIRE(p.memory == v.memory);
                REQUIRE(p.mask == v.mask);
                REQUIRE(p.invisible.empty());
                REQUIRE(v.invisible.size() ==
                        static_cast<size_t>(obs_layout(s.config, enc, Side::Mouse).invisible_dim));
            }
            std::array<ActionCommand, kNumAgents> cmds{};
            for (int id = 0; id < kNumAgents; ++id)
                if (id == kCatId || s.mouse_alive(id)) cmds[id] = rp.act(s, id, rng);
            s = step(s, cmds).state;
            if (s.mouse_alive(1)) mem = update_memory(mem, s, 1, cmds[1], enc);
        }
    }
}

TEST_CASE("obsenc: hidden cat position appears in the invisible block only") {
    ArenaConfig cfg = tiny_config(6);
    ArenaState s = generate(cfg);
    s.agents[1].x = 1;
    s.agents[1].y = 1;
    s.agents[kCatId].x = 7;
    s.agents[kCatId].y = 5;

    ObsEncConfig enc;
    MemoryBlock mem = MemoryBlock::initial(cfg, Side::Mouse);
    const Observation v = encode_value_obs(s, 1, mem, enc);
    CHECK(channel_all_zero(v, cfg, 6));
    // invisible block leads with the cat's true normalized position
    const float nx = 2.0f * s.agents[kCatId].x / (cfg.width - 1) - 1.0f;
    const float ny = 2.0f * s.agents[kCatId].y / (cfg.height - 1) - 1.0f;
    CHECK(v.invisible[0] == doctest::Approx(nx));
    CHECK(v.invisible[1] == doctest::Approx(ny));
}

TEST_CASE("obsenc: memory ages, inserts, and evicts at capacity") {
    ArenaConfig cfg = tiny_config(8);
    ArenaState s = generate(cfg);
    s.agents[1].x = 1;
    s.agents[1].y = 1;
    s.agents[kCatId].x = 7;
    s.agents[kCatId].y = 5;
    ObsEncConfig enc;
    enc.memory_capacity = 4;

    MemoryBlock mem = MemoryBlock::initial(cfg, Side::Mouse);
    CHECK(mem.recent_actions.empty());
    CHECK(!mem.opponents[0].seen);

    // scripted 20-step action sequence; the ring keeps only the last 4
    for (int t = 0; t < 20; ++t) {
        const ActionCommand ac{static_cast<Action>(t % kNumActions), static_cast<Dir>(t % kNumDirs)};
        mem = update_memory(mem, s, 1, ac, enc);
        CHECK(static_cast<int>(mem.recent_actions.size()) <= 4);
    }
    REQUIRE(mem.recent_actions.size() == 4);
    for (int k = 0; k < 4; ++k)
        CHECK(mem.recent_actions[static_cast<size_t>(k)].action == static_cast<Action>((16 + k) % kNumActions));

    // sighting inserts at age 0; ages then grow monotonically and cap
    ArenaState near = s;
    near.agents[kCatId].x = s.agents[1].x + 1;
    near.agents[kCatId].y = s.agents[1].y;
    mem = update_memory(mem, near, 1, {Action::Idle, Dir::N}, enc);
    CHECK(mem.opponents[0].seen);
    CHECK(mem.opponents[0].age == 0);
    for (int k = 1; k <= enc.max_age + 10; ++k) {
        mem = update_memory(mem, s, 1, {Action::Idle, Dir::N}, enc);
        CHECK(mem.opponents[0].age == std::min(k, enc.max_age));
    }
}

TEST_CASE("obsenc: memory_info=off zeroes the block but keeps the shape") {
    ArenaConfig cfg = tiny_config(9);
    ArenaState s = generate(cfg);
    ObsEncConfig on, off;
    off.memory_info = false;
    MemoryBlock mem = MemoryBlock::initial(cfg, Side::Mouse);
    mem = update_memory(mem, s, 1, {Action::Move, Dir::E}, on);
    const Observation o_on = encode_policy_obs(s, 1, mem, on);
    const Observation o_off = encode_policy_obs(s, 1, mem, off);
    CHECK(o_on.memory.size() == o_off.memory.size());
    CHECK(std::any_of(o_on.memory.begin(), o_on.memory.end(), [](float v) { return v != 0.0f; }));
    CHECK(std::all_of(o_off.memory.begin(), o_off.memory.end(), [](float v) { return v == 0.0f; }));

    ObsEncConfig no_inv;
    no_inv.invisible_info = false;
    const Observation v = encode_value_obs(s, 1, mem, no_inv);
    CHECK(std::all_of(v.invisible.begin(), v.invisible.end(), [](float x) { return x == 0.0f; }));
    CHECK(v.invisible.size() == static_cast<size_t>(obs_layout(cfg, no_inv, Side::Mouse).invisible_dim));
}

TEST_CASE("obsenc: shapes are constant across an episode") {
    ArenaConfig cfg = tiny_config(10);
    ObsEncConfig enc;
    const ObsLayout mouse_layout = obs_layout(cfg, enc, Side::Mouse);
    const ObsLayout cat_layout = obs_layout(cfg, enc, Side::Cat);
    ArenaState s = generate(cfg);
    RandomPolicy rp;
    Rng rng(4);
    std::array<MemoryBlock, kNumAgents> mems;
    for (int i = 0; i < kNumAgents; ++i)
        mems[i] = MemoryBlock::initial(cfg, i == kCatId ? Side::Cat : Side::Mouse);
    for (int t = 0; t < 60 && s.phase != Phase::Terminal; ++t) {
        for (int id = 0; id < kNumAgents; ++id) {
            if (id != kCatId && !s.mouse_alive(id)) continue;
            const auto& layout = id == kCatId ? cat_layout : mouse_layout;
            const Observation v = encode_value_obs(s, id, mems[id], enc);
            REQUIRE(v.image.size() == static_cast<size_t>(layout.image_size()));
            REQUIRE(v.vec.size() == static_cast<size_t>(layout.vec_dim));
            REQUIRE(v.entities.size() == static_cast<size_t>(layout.entity_slots * kEntityFeat));
            REQUIRE(v.memory.size() == static_cast<size_t>(layout.memory_dim));
            REQUIRE(v.invisible.size() == static_cast<size_t>(layout.invisible_dim));
        }
        std::array<ActionCommand, kNumAgents> cmds{};
        for (int id = 0; id < kNumAgents; ++id)
            if (id == kCatId || s.mouse_alive(id)) cmds[id] = rp.act(s, id, rng);
        auto r = step(s, cmds);
        s = r.state;
        for (int id = 0; id < kNumAgents; ++id)
            if (id == kCatId || s.mouse_alive(id)) mems[id] = update_memory(mems[id], s, id, cmds[id], enc);
    }
}

TEST_CASE("obsenc: rule-table mask basics") {
    // a mouse adjacent to nothing interactive: only idle and movement
    {
        ArenaConfig cfg = tiny_config(12);
        ArenaState s = generate(cfg);
        s.agents[2].x = 4;
        s.agents[2].y = 3;
        s.agents[1].x = 1;
        s.agents[1].y = 1;
        s.agents[3].x = 1;
        s.agents[3].y = 5;
        s.agents[4].x = 7;
        s.agents[4].y = 5;
        s.agents[kCatId].x = 7;
        s.agents[kCatId].y = 1;
        s.cheeses[0].x = 1;
        s.cheeses[0].y = 3;
        s.holes[0].x = 7;
        s.holes[0].y = 3;
        s.rockets[0].x = 4;
        s.rockets[0].y = 1;  // 2 away from (4,3)
        ActionMask m = legal_mask(s, 2);
        CHECK(m.actions[static_cast<int>(Action::Idle)]);
        CHECK(m.actions[static_cast<int>(Action::Move)]);
        for (Action a : {Action::Pickup, Action::Drop, Action::Push, Action::Attack, Action::Rescue,
                         Action::Interact})
            CHECK(!m.actions[static_cast<int>(a)]);
    }

    ArenaState s = dense_5x5();
    // mouse 4 at (3,3) is boxed in by walls and teammates: not even MOVE
    ActionMask boxed = legal_mask(s, 4);
    CHECK(boxed.actions[static_cast<int>(Action::Idle)]);
    CHECK(!boxed.actions[static_cast<int>(Action::Move)]);

    // cat adjacent to free mice can attack but never push or rescue
    ActionMask cm = legal_mask(s, kCatId);
    CHECK(cm.actions[static_cast<int>(Action::Attack)]);
    CHECK(!cm.actions[static_cast<int>(Action::Push)]);
    CHECK(!cm.actions[static_cast<int>(Action::Rescue)]);

    // mouse 1 at (2,1) is adjacent to the loose cheese at (1,1)
    ActionMask pm = legal_mask(s, 1);
    CHECK(pm.actions[static_cast<int>(Action::Pickup)]);

    // caught mice can only idle
    s.agents[1].status = MouseStatus::Caught;
    ActionMask caught = legal_mask(s, 1);
    for (int a = 0; a < kNumActions; ++a)
        CHECK(static_cast<bool>(caught.actions[a]) == (a == static_cast<int>(Action::Idle)));
}

TEST_CASE("obsenc: mask soundness vs solo-step effect oracle (5x5 brute force)") {
    // Enumerate states reachable from the dense 5x5 start via random legal
    // play; for each (state, agent, action, direction) the factored mask must
    // agree with "does the solo command change anything beyond timers".
    RandomPolicy rp;
    std::vector<ArenaState> states;
    std::set<uint64_t> seen;
    for (uint64_t rollout = 0; rollout < 30; ++rollout) {
        ArenaState s = dense_5x5();
        Rng rng(rollout);
        for (int t = 0; t < 40 && s.phase != Phase::Terminal; ++t) {
            if (seen.insert(s.state_hash()).second) states.push_back(s);
            std::array<ActionCommand, kNumAgents> cmds{};
            for (int id = 0; id < kNumAgents; ++id)
                if (id == kCatId || s.mouse_alive(id)) cmds[id] = rp.act(s, id, rng);
            s = step(s, cmds).state;
        }
    }
    REQUIRE(states.size() > 100);

    long checked = 0;
    for (const auto& s : states) {
        const ArenaState idle_next = step(s, {}).state;
        for (int id = 0; id < kNumAgents; ++id) {
            if (id != kCatId && !s.mouse_alive(id)) continue;
            const ActionMask mask = legal_mask(s, id);

            auto solo_effect = [&](Action a, Dir d) {
                std::array<ActionCommand, kNumAgents> cmds{};
                cmds[id] = {a, d};
                return !(step(s, cmds).state == idle_next);
            };

            for (int a = 0; a < kNumActions; ++a) {
                const Action act = static_cast<Action>(a);
                if (act == Action::Idle) continue;
                bool oracle_legal = false;
                if (action_uses_direction(act)) {
                    std::array<bool, kNumDirs> dir_effect{};
                    for (int d = 0; d < kNumDirs; ++d) dir_effect[d] = solo_effect(act, static_cast<Dir>(d));
                    oracle_legal =
                        std::any_of(dir_effect.begin(), dir_effect.end(), [](bool b) { return b; });
                    if (mask.actions[a])
                        for (int d = 0; d < kNumDirs; ++d)
                            if (dir_effect[d]) REQUIRE(mask.directions[d]);
                } else {
                    oracle_legal = solo_effect(act, Dir::N);
                }
                ++checked;
                REQUIRE(static_cast<bool>(mask.actions[a]) == oracle_legal);
            }
            // command_applicable agrees with the action-head mask
            for (int a = 0; a < kNumActions; ++a) {
                const Action act = static_cast<Action>(a);
                if (!action_uses_direction(act)) {
                    REQUIRE(command_applicable(s, id, {act, Dir::N}) == static_cast<bool>(mask.actions[a]));
                } else {
                    bool any = false;
                    for (int d = 0; d < kNumDirs; ++d)
                        any = any || command_applicable(s, id, {act, static_cast<Dir>(d)});
                    REQUIRE(any == static_cast<bool>(mask.actions[a]));
                }
            }
        }
    }
    CHECK(checked > 3000);
}
