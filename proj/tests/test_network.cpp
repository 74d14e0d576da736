#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "aet/network.hpp"
#include "test_helpers.hpp"

using namespace aet;
using namespace aet_test;

namespace {

NetworkParams make_net(Side side, uint64_t seed = 1) {
    return init_params(side, tiny_arena(), tiny_enc(), tiny_net(), seed);
}

void zero_all(NetworkParams& p) {
    for (auto& [name, t] : p.blocks) std::fill(t.value().begin(), t.value().end(), 0.0f);
}

}  // namespace

TEST_CASE("network: zero weights give uniform policy over legal actions and value 0") {
    NetworkParams p = make_net(Side::Mouse);
    zero_all(p);
    auto obs = sample_observations(tiny_arena(), tiny_enc(), Side::Mouse, 5, 3);
    for (const auto& o : obs) {
        auto [act_lp, dir_lp] = forward_policy(p, o);
        int legal = 0;
        for (int a = 0; a < kNumActions; ++a) legal += o.mask.actions[a];
        for (int a = 0; a < kNumActions; ++a) {
            const double prob = std::exp(static_cast<double>(act_lp[static_cast<size_t>(a)]));
            if (o.mask.actions[a])
                CHECK(prob == doctest::Approx(1.0 / legal).epsilon(1e-5));
            else
                CHECK(prob == 0.0);
        }
        CHECK(forward_value(p, o) == 0.0f);
    }
}

TEST_CASE("network: single legal action gets probability 1") {
    NetworkParams p = make_net(Side::Mouse, 2);
    auto obs = sample_observations(tiny_arena(), tiny_enc(), Side::Mouse, 1, 4);
    Observation o = obs[0];
    o.mask.actions.fill(0);
    o.mask.actions[static_cast<int>(Action::Idle)] = 1;
    auto [act_lp, dir_lp] = forward_policy(p, o);
    CHECK(std::exp(static_cast<double>(act_lp[0])) == doctest::Approx(1.0));

    Rng rng(1);
    auto sa = sample_action(act_lp, dir_lp, SampleMode::Stochastic, rng);
    CHECK(sa.action == 0);
    CHECK(act_lp[0] == doctest::Approx(0.0f));
}

TEST_CASE("network: probabilities sum to one over random nets and observations") {
    auto obs = sample_observations(tiny_arena(), tiny_enc(), Side::Mouse, 40, 5);
    for (uint64_t net_seed = 0; net_seed < 5; ++net_seed) {
        NetworkParams p = make_net(Side::Mouse, net_seed);
        for (const auto& o : obs) {
            auto [act_lp, dir_lp] = forward_policy(p, o);
            double sum_a = 0, sum_d = 0;
            for (float v : act_lp) sum_a += std::exp(static_cast<double>(v));
            for (float v : dir_lp) sum_d += std::exp(static_cast<double>(v));
            REQUIRE(sum_a == doctest::Approx(1.0).epsilon(1e-6));
            REQUIRE(sum_d == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("network: forward passes are deterministic") {
    NetworkParams p = make_net(Side::Cat, 7);
    auto obs = sample_observations(tiny_arena(), tiny_enc(), Side::Cat, 3, 6);
    for (const auto& o : obs) {
        auto a = forward_single(p, o);
        auto b = forward_single(p, o);
        CHECK(a.act_logp == b.act_logp);
        CHECK(a.dir_logp == b.dir_logp);
        CHECK(a.value == b.value);
    }
}

TEST_CASE("network: shape guards reject mismatched inputs") {
    NetworkParams p = make_net(Side::Mouse, 8);
    auto obs = sample_observations(tiny_arena(), tiny_enc(), Side::Mouse, 2, 7);

    // policy obs (no invisible block) fed to the value net
    Observation policy_only = obs[0];
    policy_only.invisible.clear();
    CHECK_THROWS_AS(forward_value(p, policy_only), StructuralError);

    // wrong side
    NetworkParams cat_net = make_net(Side::Cat, 8);
    CHECK_THROWS_AS(forward_value(cat_net, obs[0]), StructuralError);

    // corrupted block width
    Observation bad = obs[1];
    bad.vec.push_back(0.0f);
    CHECK_THROWS_AS(forward_value(p, bad), StructuralError);
}

TEST_CASE("network: entity slot permutation leaves outputs unchanged") {
    NetworkParams p = make_net(Side::Mouse, 9);
    auto obs = sample_observations(tiny_arena(), tiny_enc(), Side::Mouse, 10, 8);
    for (auto& o : obs) {
        const auto base = forward_single(p, o);
        // rotate all slots by one
        const int S = tiny_enc().entity_slots;
        std::vector<float> rotated(o.entities.size());
        for (int s = 0; s < S; ++s)
            std::copy_n(o.entities.data() + static_cast<size_t>(s) * kEntityFeat, kEntityFeat,
                        rotated.data() + (static_cast<size_t>((s + 1) % S)) * kEntityFeat);
        Observation perm = o;
        perm.entities = rotated;
        const auto out = forward_single(p, perm);
        for (size_t i = 0; i < base.act_logp.size(); ++i)
            CHECK(out.act_logp[i] == doctest::Approx(base.act_logp[i]).epsilon(1e-6));
        CHECK(out.value == doctest::Approx(base.value).epsilon(1e-6));
    }
}

TEST_CASE("network: desk-size default stays within the parameter budget") {
    ArenaConfig arena;  // 16x12 defaults
    arena.rng_seed = 1;
    ObsEncConfig enc;
    NetConfig net;
    NetworkParams mouse = init_params(Side::Mouse, arena, enc, net, 1);
    NetworkParams cat = init_params(Side::Cat, arena, enc, net, 1);
    CHECK(mouse.param_count() <= 100000);
    CHECK(cat.param_count() <= 100000);
    CHECK(mouse.param_count() > 10000);
    // asymmetric nets: different input widths
    CHECK(mouse.layout.vec_dim != cat.layout.vec_dim);
}

TEST_CASE("network: sampling modes") {
    Rng rng(3);
    // act: legal {0:0.5, 2:0.25, 5:0.25}; dir uniform over 2
    std::vector<float> act_lp(kNumActions, -1e9f);
    act_lp[0] = std::log(0.5f);
    act_lp[2] = std::log(0.25f);
    act_lp[5] = std::log(0.25f);
    std::vector<float> dir_lp(kNumDirs, -1e9f);
    dir_lp[1] = std::log(0.5f);
    dir_lp[4] = std::log(0.5f);

    std::array<int, kNumActions> counts{};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        auto sa = sample_action(act_lp, dir_lp, SampleMode::Stochastic, rng);
        counts[static_cast<size_t>(sa.action)]++;
        CHECK((sa.direction == 1 || sa.direction == 4));
    }
    CHECK(counts[1] == 0);
    for (auto [idx, prob] : std::vector<std::pair<int, double>>{{0, 0.5}, {2, 0.25}, {5, 0.25}}) {
        const double sigma = std::sqrt(prob * (1 - prob) * draws);
        CHECK(std::abs(counts[static_cast<size_t>(idx)] - prob * draws) < 3 * sigma);
    }

    // argmax ties break to the lowest index
    std::vector<float> tied(kNumActions, 0.0f);
    auto sa = sample_action(tied, tied, SampleMode::Argmax, rng);
    CHECK(sa.action == 0);
    CHECK(sa.direction == 0);

    // non-directional action: joint log-prob is the action head only
    auto pick = sample_action(act_lp, dir_lp, SampleMode::Argmax, rng);
    CHECK(pick.action == 0);  // Idle, non-directional
    CHECK(pick.joint_logp == doctest::Approx(std::log(0.5f)));
}

TEST_CASE("network: adam basics and hand-simulated trajectory") {
    NetworkParams p = make_net(Side::Mouse, 10);
    AdamConfig cfg;
    AdamState st = AdamState::init(p, cfg);

    // zero gradients leave parameters unchanged
    for (auto& [name, t] : p.blocks) t.zero_grad();
    const auto before = p.blocks[0].second.value();
    adam_step(p, st);
    CHECK(st.step_count == 1);
    CHECK(p.blocks[0].second.value() == before);

    // constant positive gradient moves the parameter down
    NetworkParams q = make_net(Side::Mouse, 11);
    AdamState st2 = AdamState::init(q, cfg);
    const float start = q.blocks[0].second.value()[0];
    for (int i = 0; i < 50; ++i) {
        for (auto& [name, t] : q.blocks) {
            t.zero_grad();
            std::fill(t.grad().begin(), t.grad().end(), 1.0f);
        }
        adam_step(q, st2);
    }
    CHECK(q.blocks[0].second.value()[0] < start);

    // single scalar parameter, 3 steps vs a double-precision recurrence
    {
        NetworkParams scalar;
        scalar.blocks.emplace_back("w", Tensor::param({1}, {0.25f}));
        AdamState s3 = AdamState::init(scalar, cfg);
        const double grads[3] = {0.5, -1.25, 2.0};
        double m = 0, v = 0, x = 0.25;
        for (int t = 0; t < 3; ++t) {
            auto& tensor = scalar.blocks[0].second;
            tensor.zero_grad();
            tensor.grad()[0] = static_cast<float>(grads[t]);
            adam_step(scalar, s3);
            m = cfg.beta1 * m + (1 - cfg.beta1) * grads[t];
            v = cfg.beta2 * v + (1 - cfg.beta2) * grads[t] * grads[t];
            const double mhat = m / (1 - std::pow(cfg.beta1, t + 1));
            const double vhat = v / (1 - std::pow(cfg.beta2, t + 1));
            x -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            CHECK(std::abs(tensor.value()[0] - x) < 1e-7);
        }
    }

    // non-finite gradient: update skipped and flagged
    NetworkParams r = make_net(Side::Mouse, 12);
    AdamState st4 = AdamState::init(r, cfg);
    const auto keep = r.blocks[2].second.value();
    for (auto& [name, t] : r.blocks) {
        t.zero_grad();
        std::fill(t.grad().begin(), t.grad().end(), 0.5f);
    }
    r.blocks[1].second.grad()[0] = std::numeric_limits<float>::quiet_NaN();
    adam_step(r, st4);
    CHECK(st4.skipped_updates == 1);
    CHECK(r.blocks[2].second.value() == keep);
}

TEST_CASE("network: snapshot round trip is bit-exact and guards the header") {
    NetworkParams p = make_net(Side::Cat, 13);
    p.train_step = 1000;
    const auto bytes = serialize(p);

    NetworkParams q = deserialize(bytes);
    CHECK(serialize(q) == bytes);
    CHECK(q.side == Side::Cat);
    CHECK(q.train_step == 1000);
    CHECK(q.arena_hash == p.arena_hash);

    // reloaded net computes identical outputs on 100 random observations
    auto obs = sample_observations(tiny_arena(), tiny_enc(), Side::Cat, 100, 14);
    for (const auto& o : obs) {
        const auto a = forward_single(p, o);
        const auto b = forward_single(q, o);
        REQUIRE(a.act_logp == b.act_logp);
        REQUIRE(a.dir_logp == b.dir_logp);
        REQUIRE(a.value == b.value);
    }

    // tampered header -> refused
    auto bad = bytes;
    bad[2] ^= 0xFF;
    CHECK_THROWS_AS(deserialize(bad), IoError);

    // arena hash mismatch -> refused
    CHECK_THROWS_AS(deserialize(bytes, p.arena_hash + 1), InputError);

    // truncated stream -> refused
    auto cut = bytes;
    cut.resize(cut.size() - 10);
    CHECK_THROWS_AS(deserialize(cut), IoError);

    // file round trip
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "aet_test_snapshot.aetsnap";
    save_snapshot(p, path.string());
    NetworkParams loaded = load_snapshot(path.string(), p.arena_hash);
    CHECK(serialize(loaded) == bytes);
    fs::remove(path);
}
