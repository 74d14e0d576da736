#pragma once

// Plays one full episode between two players (neural snapshot or scripted
// bot), optionally collecting PPO trajectories for one side and optionally
// writing a JSON-lines replay log with per-step state hashes.

#include <array>
#include <memory>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "aet/arena.hpp"
#include "aet/config_json.hpp"
#include "aet/network.hpp"
#include "aet/obsenc.hpp"
#include "aet/ppo.hpp"
#include "aet/scripted.hpp"

namespace aet {

struct PlayerSpec {
    std::shared_ptr<const NetworkParams> net;  // neural when set, otherwise scripted
    ScriptedPolicy* scripted = nullptr;
    SampleMode mode = SampleMode::Stochastic;

    bool neural() const { return net != nullptr; }
};

struct EpisodeSpec {
    ArenaConfig arena;  // arena.rng_seed drives generation
    ObsEncConfig enc;
    ERIntervention intervention;   // ERKind::None for a plain episode
    double decay_progress = 0.0;
    uint64_t episode_seed = 0;     // action sampling stream
    int collect_side = -1;         // 0 = cat, 1 = mouse, -1 = none
    PPOConfig ppo;                 // gamma/lambda for advantage computation
    std::ostream* replay = nullptr;
};

struct AgentTrajectory {
    int agent_id = 0;
    std::vector<Transition> steps;
};

struct EpisodeResult {
    Winner winner = Winner::None;
    int steps = 0;
    std::array<double, kNumAgents> returns{};  // sum of emitted event values per agent
    std::array<std::array<double, kNumRewardKinds>, kNumAgents> by_kind{};
    std::vector<AgentTrajectory> trajectories;
    uint64_t final_hash = 0;
};

namespace detail {

inline nlohmann::json intervention_json(const ERIntervention& iv) {
    return {{"kind", er_kind_name(iv.kind)},
            {"weaker", side_name(iv.weaker)},
            {"seed", iv.seed},
            {"buff_window", iv.buff_window}};
}

inline ERIntervention intervention_from_json(const nlohmann::json& j) {
    ERIntervention iv;
    const std::string kind = j.at("kind");
    for (int k = 0; k < 4; ++k)
        if (kind == er_kind_name(static_cast<ERKind>(k))) iv.kind = static_cast<ERKind>(k);
    iv.weaker = j.at("weaker") == "cat" ? Side::Cat : Side::Mouse;
    iv.seed = j.at("seed");
    iv.buff_window = j.at("buff_window");
    return iv;
}

}  // namespace detail

inline EpisodeResult play_episode(const PlayerSpec& cat, const PlayerSpec& mouse, const EpisodeSpec& spec) {
    ArenaState state = generate(spec.arena);
    if (spec.intervention.kind != ERKind::None) state = apply_er_intervention(state, spec.intervention);

    Rng rng(derive_seed(spec.episode_seed, 0x45505349));  // "EPSI"

    const auto player_for = [&](int id) -> const PlayerSpec& { return id == kCatId ? cat : mouse; };
    std::array<MemoryBlock, kNumAgents> memories;
    for (int i = 0; i < kNumAgents; ++i)
        memories[i] = MemoryBlock::initial(spec.arena, i == kCatId ? Side::Cat : Side::Mouse);

    EpisodeResult res;
    std::array<AgentTrajectory, kNumAgents> trajs;
    for (int i = 0; i < kNumAgents; ++i) trajs[i].agent_id = i;
    const bool collect_cat = spec.collect_side == 0;
    const bool collect_mice = spec.collect_side == 1;

    if (spec.replay) {
        nlohmann::json header = {{"type", "header"},
                                 {"arena", spec.arena},
                                 {"enc", spec.enc},
                                 {"intervention", detail::intervention_json(spec.intervention)},
                                 {"decay_progress", spec.decay_progress},
                                 {"initial_hash", state.state_hash()}};
        (*spec.replay) << header.dump() << "\n";
    }

    while (state.phase != Phase::Terminal) {
        std::array<ActionCommand, kNumAgents> commands{};
        std::array<bool, kNumAgents> acted{};

        for (int id = 0; id < kNumAgents; ++id) {
            if (id != kCatId && !state.mouse_alive(id)) continue;
            const PlayerSpec& player = player_for(id);
            acted[id] = true;
            if (player.neural()) {
                Observation obs = encode_value_obs(state, id, memories[id], spec.enc);
                SingleForward fwd = forward_single(*player.net, obs);
                SampledAction sa = sample_action(fwd.act_logp, fwd.dir_logp, player.mode, rng);
                commands[id] = {static_cast<Action>(sa.action), static_cast<Dir>(sa.direction)};
                const bool collecting = (id == kCatId) ? collect_cat : (id != kCatId && collect_mice);
                if (collecting) {
                    Transition tr;
                    tr.obs = std::move(obs);
                    tr.action = sa.action;
                    tr.direction = sa.direction;
                    tr.behavior_logp = sa.joint_logp;
                    tr.behavior_value = fwd.value;
                    trajs[id].steps.push_back(std::move(tr));
                }
            } else {
                commands[id] = player.scripted->act(state, id, rng);
            }
        }

        StepResult sr = step(state, commands, spec.decay_progress);

        for (const auto& ev : sr.events) {
            res.returns[ev.recipient] += ev.value;
            res.by_kind[ev.recipient][static_cast<int>(ev.kind)] += ev.value;
            const bool collecting = (ev.recipient == kCatId) ? collect_cat : collect_mice;
            if (collecting && !trajs[ev.recipient].steps.empty())
                trajs[ev.recipient].steps.back().reward += static_cast<float>(ev.value);
        }

        for (int id = 0; id < kNumAgents; ++id) {
            if (!acted[id] || !player_for(id).neural()) continue;
            const bool still_in = id == kCatId || sr.state.mouse_alive(id);
            if (still_in) memories[id] = update_memory(memories[id], sr.state, id, commands[id], spec.enc);
            const bool collecting = (id == kCatId) ? collect_cat : (id != kCatId && collect_mice);
            if (collecting && !trajs[id].steps.empty() && (!still_in || sr.terminal))
                trajs[id].steps.back().done = true;
        }

        if (spec.replay) {
            nlohmann::json jcommands = nlohmann::json::array();
            for (const auto& c : commands)
                jcommands.push_back({static_cast<int>(c.action), static_cast<int>(c.direction)});
            nlohmann::json jevents = nlohmann::json::array();
            for (const auto& ev : sr.events)
                jevents.push_back({ev.recipient, static_cast<int>(ev.kind), ev.value});
            nlohmann::json line = {{"type", "step"},
                                   {"step", state.step},
                                   {"commands", jcommands},
                                   {"events", jevents},
                                   {"hash", sr.state.state_hash()}};
            (*spec.replay) << line.dump() << "\n";
        }

        state = std::move(sr.state);
    }

    res.winner = state.winner;
    res.steps = state.step;
    res.final_hash = state.state_hash();

    // advantages over each collected trajectory; episodes always end terminal
    // for the agent, so the bootstrap is zero
    for (int id = 0; id < kNumAgents; ++id) {
        auto& steps = trajs[id].steps;
        const size_t n = steps.size();
        if (n == 0) continue;
        std::vector<double> rewards(n), values(n);
        std::vector<uint8_t> dones(n);
        for (size_t i = 0; i < n; ++i) {
            rewards[i] = steps[i].reward;
            values[i] = steps[i].behavior_value;
            dones[i] = steps[i].done ? 1 : 0;
        }
        dones[n - 1] = 1;
        steps[n - 1].done = true;
        auto adv = compute_gae(rewards, values, dones, 0.0, spec.ppo.gamma, spec.ppo.gae_lambda);
        for (size_t i = 0; i < steps.size(); ++i) {
            steps[i].advantage = static_cast<float>(adv[i]);
            steps[i].ret = steps[i].behavior_value + steps[i].advantage;
        }
        res.trajectories.push_back(std::move(trajs[id]));
    }
    return res;
}

// --- Replay verification ---

struct ReplayCheck {
    bool ok = false;
    int divergence_step = -1;  // first step whose hash mismatched
    int steps = 0;
    std::string error;
};

// Re-simulates a replay log from its header and verifies every state hash.
// `render_to`, when set, receives a text frame per step.
inline ReplayCheck verify_replay(std::istream& log, std::ostream* render_to = nullptr) {
    ReplayCheck out;
    std::string line;
    if (!std::getline(log, line)) {
        out.error = "empty replay log";
        return out;
    }
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("type", "") != "header") {
        out.error = "first record is not a header";
        return out;
    }
    ArenaConfig cfg = header.at("arena").get<ArenaConfig>();
    const double decay = header.at("decay_progress");
    ERIntervention iv = detail::intervention_from_json(header.at("intervention"));

    ArenaState state = generate(cfg);
    if (iv.kind != ERKind::None) state = apply_er_intervention(state, iv);
    if (state.state_hash() != header.at("initial_hash").get<uint64_t>()) {
        out.divergence_step = 0;
        out.error = "initial state hash mismatch";
        return out;
    }
    if (render_to) (*render_to) << "step 0\n" << render(state);

    while (std::getline(log, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        if (rec.value("type", "") != "step") continue;
        std::array<ActionCommand, kNumAgents> commands{};
        const auto& jc = rec.at("commands");
        for (int i = 0; i < kNumAgents; ++i)
            commands[i] = {static_cast<Action>(jc[i][0].get<int>()), static_cast<Dir>(jc[i][1].get<int>())};
        StepResult sr = step(state, commands, decay);
        ++out.steps;
        if (sr.state.state_hash() != rec.at("hash").get<uint64_t>()) {
            out.divergence_step = rec.at("step").get<int>();
            out.error = "state hash diverged";
            return out;
        }
        state = std::move(sr.state);
        if (render_to) (*render_to) << "step " << state.step << "\n" << render(state);
    }
    out.ok = true;
    return out;
}

}  // namespace aet
