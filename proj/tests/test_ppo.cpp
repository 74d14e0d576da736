#include <doctest.h>

#include <cmath>

#include "aet/ppo.hpp"
#include "test_helpers.hpp"

using namespace aet;
using namespace aet_test;

namespace {

// Brute-force GAE: A_t = sum_k (gamma*lambda)^k delta_{t+k}, cut at dones.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<uint8_t>& dones, double bootstrap, double gamma,
                               double lambda) {
    const size_t n = r.size();
    std::vector<double> delta(n);
    for (size_t t = 0; t < n; ++t) {
        const double next_v = (t + 1 < n) ? v[t + 1] : bootstrap;
        delta[t] = r[t] + gamma * (dones[t] ? 0.0 : 1.0) * next_v - v[t];
    }
    std::vector<double> adv(n, 0.0);
    for (size_t t = 0; t < n; ++t) {
        double coef = 1.0;
        for (size_t k = t; k < n; ++k) {
            adv[t] += coef * delta[k];
            if (dones[k]) break;
            coef *= gamma * lambda;
        }
    }
    return adv;
}

// Transition batch over real observations with mask-legal random actions and
// freshly computed behavior log-probs/values.
std::vector<Transition> make_batch(const NetworkParams& net, int size, uint64_t seed) {
    auto obs = sample_observations(net.arena, net.enc, net.side, size, seed);
    Rng rng(derive_seed(seed, 0xBA7C));
    std::vector<Transition> batch;
    for (auto& o : obs) {
        const auto fwd = forward_single(net, o);
        const auto sa = sample_action(fwd.act_logp, fwd.dir_logp, SampleMode::Stochastic, rng);
        Transition t;
        t.obs = std::move(o);
        t.action = sa.action;
        t.direction = sa.direction;
        t.behavior_logp = sa.joint_logp;
        t.behavior_value = fwd.value;
        t.reward = static_cast<float>(rng.uniform_range(-1.0, 1.0));
        t.advantage = static_cast<float>(rng.uniform_range(-2.0, 2.0));
        t.ret = t.behavior_value + t.advantage;
        batch.push_back(std::move(t));
    }
    return batch;
}

}  // namespace

TEST_CASE("ppo: GAE hand case and collapse at lambda=0") {
    auto adv = compute_gae({1.0, 1.0}, {0.0, 0.0}, {0, 0}, 0.0, 0.5, 0.5);
    CHECK(adv[0] == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(adv[1] == doctest::Approx(1.0).epsilon(1e-12));

    // lambda = 0: one-step TD residuals exactly
    const std::vector<double> r{0.5, -1.0, 2.0}, v{0.3, 0.1, -0.2};
    const std::vector<uint8_t> d{0, 0, 1};
    auto adv0 = compute_gae(r, v, d, 0.7, 0.9, 0.0);
    for (size_t t = 0; t < r.size(); ++t) {
        const double next_v = t + 1 < r.size() ? v[t + 1] : 0.7;
        const double delta = r[t] + 0.9 * (d[t] ? 0.0 : 1.0) * next_v - v[t];
        CHECK(adv0[t] == doctest::Approx(delta).epsilon(1e-12));
    }

    CHECK_THROWS_AS(compute_gae({1.0}, {}, {0}, 0.0, 0.9, 0.9), InputError);
}

TEST_CASE("ppo: GAE matches the direct-sum oracle on random trajectories") {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 10;
        std::vector<double> r(n), v(n);
        std::vector<uint8_t> d(n, 0);
        for (size_t i = 0; i < n; ++i) {
            r[i] = rng.uniform_range(-2.0, 2.0);
            v[i] = rng.uniform_range(-2.0, 2.0);
            if (rng.chance(0.15)) d[i] = 1;
        }
        const double bootstrap = rng.uniform_range(-1.0, 1.0);
        const double gamma = rng.uniform_range(0.5, 1.0);
        const double lambda = rng.uniform_range(0.0, 1.0);
        const auto fast = compute_gae(r, v, d, bootstrap, gamma, lambda);
        const auto slow = gae_oracle(r, v, d, bootstrap, gamma, lambda);
        for (size_t t = 0; t < n; ++t) REQUIRE(fast[t] == doctest::Approx(slow[t]).epsilon(1e-6));
    }
}

TEST_CASE("ppo: GAE telescoping identity at gamma=lambda=1") {
    Rng rng(22);
    const size_t n = 12;
    std::vector<double> r(n), v(n);
    std::vector<uint8_t> d(n, 0);
    for (size_t i = 0; i < n; ++i) {
        r[i] = rng.uniform_range(-1.0, 1.0);
        v[i] = rng.uniform_range(-1.0, 1.0);
    }
    const double bootstrap = 0.4;
    const auto adv = compute_gae(r, v, d, bootstrap, 1.0, 1.0);
    for (size_t t = 0; t < n; ++t) {
        double ret = bootstrap;
        for (size_t k = t; k < n; ++k) ret += r[k];
        CHECK(adv[t] + v[t] == doctest::Approx(ret).epsilon(1e-9));
    }
}

TEST_CASE("ppo: importance ratio") {
    CHECK(ratio(-1.5, -1.5) == doctest::Approx(1.0));
    CHECK(ratio(-1.0 + std::log(2.0), -1.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(ratio(std::nan(""), 0.0), InputError);

    Rng rng(23);
    for (int i = 0; i < 1000; ++i) {
        const double p_new = rng.uniform_range(0.01, 1.0);
        const double p_old = rng.uniform_range(0.01, 1.0);
        CHECK(ratio(std::log(p_new), std::log(p_old)) == doctest::Approx(p_new / p_old).epsilon(1e-6));
    }
}

TEST_CASE("ppo: dual-clip loss hand cases") {
    // eta-floor branch: r=10, A=-1 -> term -3, loss +3
    CHECK(dual_clip_policy_loss({10.0}, {-1.0}, 0.2, 3.0) == doctest::Approx(3.0).epsilon(1e-6));
    // on-policy positive advantage: term 1, loss -1
    CHECK(dual_clip_policy_loss({1.0}, {1.0}, 0.2, 3.0) == doctest::Approx(-1.0).epsilon(1e-6));
    // upper clip binds: r=2, A=1 -> term 1.2
    CHECK(dual_clip_policy_loss({2.0}, {1.0}, 0.2, 3.0) == doctest::Approx(-1.2).epsilon(1e-6));
    // huge eta reduces to standard PPO on the negative branch
    const double standard = std::min(10.0 * -1.0, 1.2 * -1.0);
    CHECK(dual_clip_policy_loss({10.0}, {-1.0}, 0.2, 1e9) == doctest::Approx(-standard).epsilon(1e-6));

    CHECK_THROWS_AS(dual_clip_policy_loss({1.0}, {1.0, 2.0}, 0.2, 3.0), InputError);
    CHECK_THROWS_AS(dual_clip_policy_loss({1.0}, {1.0}, 0.2, 0.5), ConfigError);
}

TEST_CASE("ppo: dual-clip properties") {
    Rng rng(24);
    const double eps = 0.2, eta = 3.0;
    for (int i = 0; i < 2000; ++i) {
        const double r = rng.uniform_range(0.0, 5.0);
        const double a = rng.uniform_range(-3.0, 3.0);
        const double loss = dual_clip_policy_loss({r}, {a}, eps, eta);
        const double term = -loss;
        if (a < 0.0) CHECK(term >= eta * a - 1e-12);  // floored surrogate
        if (r >= 1.0 - eps && r <= 1.0 + eps)
            CHECK(term == doctest::Approx(r * a).epsilon(1e-9));  // trust region is identity
    }
}

TEST_CASE("ppo: value loss") {
    CHECK(value_loss({1.0, 2.0}, {1.0, 2.0}) == doctest::Approx(0.0));
    CHECK(value_loss({0.0, 0.0}, {1.0, 3.0}) == doctest::Approx(5.0).epsilon(1e-12));
    // quadratic scaling
    CHECK(value_loss({0.0, 0.0}, {3.0, 9.0}) == doctest::Approx(9.0 * 5.0).epsilon(1e-12));
    CHECK_THROWS_AS(value_loss({}, {}), InputError);
}

TEST_CASE("ppo: advantage normalization is order-preserving and centered") {
    Rng rng(25);
    std::vector<float> adv(64), wts(64, 1.0f);
    for (auto& a : adv) a = static_cast<float>(rng.uniform_range(-5.0, 5.0));
    auto sorted_order = [](const std::vector<float>& v) {
        std::vector<int> idx(v.size());
        for (size_t i = 0; i < v.size(); ++i) idx[i] = static_cast<int>(i);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[static_cast<size_t>(a)] < v[static_cast<size_t>(b)]; });
        return idx;
    };
    const auto before = sorted_order(adv);
    auto normalized = adv;
    normalize_advantages_inplace(normalized, wts);
    CHECK(sorted_order(normalized) == before);
    double mean = 0, var = 0;
    for (float a : normalized) mean += a;
    mean /= 64;
    for (float a : normalized) var += (a - mean) * (a - mean);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var / 64 == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("ppo: total loss composes the three terms") {
    NetworkParams net = init_params(Side::Mouse, tiny_arena(), tiny_enc(), tiny_net(), 31);
    PPOConfig cfg;
    cfg.normalize_advantages = false;

    auto batch = make_batch(net, 24, 32);
    auto [loss, parts] = total_loss(net, batch, cfg);

    CHECK(parts.total ==
          doctest::Approx(parts.policy + cfg.value_loss_weight * parts.value - cfg.entropy_coef * parts.entropy)
              .epsilon(1e-5));

    // independent recomputation of the policy term from fresh forwards
    std::vector<double> ratios, advs;
    std::vector<double> values, rets;
    for (const auto& t : batch) {
        const auto fwd = forward_single(net, t.obs);
        double lp = fwd.act_logp[static_cast<size_t>(t.action)];
        if (action_uses_direction(static_cast<Action>(t.action)))
            lp += fwd.dir_logp[static_cast<size_t>(t.direction)];
        ratios.push_back(std::exp(lp - t.behavior_logp));
        advs.push_back(t.advantage);
        values.push_back(fwd.value);
        rets.push_back(t.ret);
    }
    CHECK(parts.policy ==
          doctest::Approx(dual_clip_policy_loss(ratios, advs, cfg.clip_epsilon, cfg.dual_clip_eta)).epsilon(2e-4));
    CHECK(parts.value == doctest::Approx(value_loss(values, rets)).epsilon(2e-4));

    // fresh behavior policy: ratio stays 1
    CHECK(parts.mean_ratio == doctest::Approx(1.0).epsilon(1e-4));

    CHECK_THROWS_AS(total_loss(net, {}, cfg), InputError);
}

TEST_CASE("ppo: zero advantages and V=G leave only the entropy term") {
    NetworkParams net = init_params(Side::Mouse, tiny_arena(), tiny_enc(), tiny_net(), 33);
    PPOConfig cfg;
    auto batch = make_batch(net, 16, 34);
    for (auto& t : batch) {
        t.advantage = 0.0f;
        const auto fwd = forward_single(net, t.obs);
        t.ret = fwd.value;  // V == G under the current parameters
    }
    auto [loss, parts] = total_loss(net, batch, cfg);
    CHECK(parts.policy == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(parts.value == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(parts.total == doctest::Approx(-cfg.entropy_coef * parts.entropy).epsilon(1e-6));
    CHECK(parts.entropy > 0.0);
}

TEST_CASE("ppo: single-legal-action states carry zero entropy") {
    NetworkParams net = init_params(Side::Mouse, tiny_arena(), tiny_enc(), tiny_net(), 35);
    PPOConfig cfg;
    auto batch = make_batch(net, 4, 36);
    for (auto& t : batch) {
        t.obs.mask.actions.fill(0);
        t.obs.mask.actions[static_cast<int>(Action::Idle)] = 1;  // caught-mouse style mask
        t.obs.mask.directions.fill(1);
        const auto fwd = forward_single(net, t.obs);
        t.action = static_cast<int>(Action::Idle);
        t.direction = 0;
        t.behavior_logp = 0.0f;
        t.behavior_value = fwd.value;
        t.advantage = 0.0f;
        t.ret = fwd.value;
    }
    auto [loss, parts] = total_loss(net, batch, cfg);
    CHECK(parts.entropy == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("ppo: a positive-advantage update raises the chosen action's probability") {
    NetworkParams net = init_params(Side::Mouse, tiny_arena(), tiny_enc(), tiny_net(), 37);
    PPOConfig cfg;
    cfg.normalize_advantages = false;  // a single sample would normalize to zero
    cfg.entropy_coef = 0.0;
    cfg.value_loss_weight = 0.0;  // isolate the policy term from trunk-shared value gradients

    auto batch = make_batch(net, 1, 38);
    batch[0].advantage = 1.0f;
    batch[0].ret = batch[0].behavior_value + 1.0f;
    const auto& probe = batch[0];
    const auto before = forward_single(net, probe.obs);
    const double p_before = std::exp(static_cast<double>(before.act_logp[static_cast<size_t>(probe.action)]));

    AdamConfig adam_cfg;
    adam_cfg.lr = 1e-3;
    AdamState adam = AdamState::init(net, adam_cfg);
    auto [loss, parts] = total_loss(net, batch, cfg);
    net.zero_grad();
    loss.backward();
    adam_step(net, adam);

    const auto after = forward_single(net, probe.obs);
    const double p_after = std::exp(static_cast<double>(after.act_logp[static_cast<size_t>(probe.action)]));
    CHECK(p_after > p_before);
}

TEST_CASE("ppo: config validation") {
    PPOConfig cfg;
    cfg.clip_epsilon = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.dual_clip_eta = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.gamma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.clip_epsilon == 0.2);
    CHECK(cfg.dual_clip_eta == 3.0);
    CHECK(cfg.gae_lambda == 0.95);
    CHECK(cfg.value_loss_weight == 0.5);
    CHECK(cfg.entropy_coef == 0.01);
    CHECK(cfg.trajectory_length == 128);
}
