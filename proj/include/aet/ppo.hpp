#pragma once

// PPO learning math: GAE, importance ratios, the dual-clip policy surrogate,
// value loss, entropy bonus, and assembly of the differentiable total loss
// over a transition batch.

#include <cmath>
#include <cstdint>
#include <vector>

#include "aet/common.hpp"
#include "aet/network.hpp"
#include "aet/obsenc.hpp"
#include "aet/tensor.hpp"

namespace aet {

struct PPOConfig {
    double clip_epsilon = 0.2;
    double dual_clip_eta = 3.0;
    double gamma = 0.99;  // desk-scale default for ~400-step episodes
    double gae_lambda = 0.95;
    double value_loss_weight = 0.5;
    double entropy_coef = 0.01;
    int trajectory_length = 128;
    double sample_reuse_cap = 1.2;
    bool normalize_advantages = true;

    void validate() const {
        if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("ppo: clip epsilon must be in (0,1)");
        if (!(dual_clip_eta > 1.0)) throw ConfigError("ppo: dual-clip eta must be > 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma must be in (0,1]");
        if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo: lambda must be in [0,1]");
        if (trajectory_length < 1) throw ConfigError("ppo: trajectory_length must be >= 1");
        if (!(sample_reuse_cap >= 1.0)) throw ConfigError("ppo: sample_reuse_cap must be >= 1");
    }
    bool operator==(const PPOConfig&) const = default;
};

// One behavior-policy step. `ret` is defined as value + advantage.
struct Transition {
    Observation obs;  // value observation; the policy input is its visible prefix
    int action = 0;
    int direction = 0;
    float behavior_logp = 0.0f;
    float behavior_value = 0.0f;
    float reward = 0.0f;
    bool done = false;
    float advantage = 0.0f;
    float ret = 0.0f;
    float weight = 1.0f;  // 0 for padding
};

// A_t = delta_t + gamma*lambda*(1-done_t)*A_{t+1},
// delta_t = r_t + gamma*(1-done_t)*V_{t+1} - V_t; V_{T} is the bootstrap.
inline std::vector<double> compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                                       const std::vector<uint8_t>& dones, double bootstrap_value, double gamma,
                                       double lambda) {
    if (rewards.size() != values.size() || rewards.size() != dones.size())
        throw InputError("compute_gae: length mismatch");
    const size_t n = rewards.size();
    std::vector<double> adv(n, 0.0);
    double next_adv = 0.0;
    for (size_t i = n; i-- > 0;) {
        const double not_done = dones[i] ? 0.0 : 1.0;
        const double next_value = (i + 1 < n) ? values[i + 1] : bootstrap_value;
        const double delta = rewards[i] + gamma * not_done * next_value - values[i];
        next_adv = delta + gamma * lambda * not_done * next_adv;
        adv[i] = next_adv;
    }
    return adv;
}

inline double ratio(double new_logp, double old_logp) {
    if (!std::isfinite(new_logp) || !std::isfinite(old_logp)) throw InputError("ratio: non-finite log-prob");
    return std::exp(new_logp - old_logp);
}

// Per-sample surrogate:
//   A >= 0:  min(r*A, clip(r, 1-eps, 1+eps)*A)
//   A <  0:  max(min(r*A, clip(r, 1-eps, 1+eps)*A), eta*A)
// Loss is the negated mean.
inline double dual_clip_policy_loss(const std::vector<double>& ratios, const std::vector<double>& advantages,
                                    double epsilon, double eta) {
    if (ratios.size() != advantages.size()) throw InputError("dual_clip_policy_loss: length mismatch");
    if (ratios.empty()) throw InputError("dual_clip_policy_loss: empty batch");
    if (!(eta > 1.0)) throw ConfigError("dual_clip_policy_loss: eta must be > 1");
    double acc = 0.0;
    for (size_t i = 0; i < ratios.size(); ++i) {
        const double r = ratios[i], a = advantages[i];
        const double clipped = std::min(1.0 + epsilon, std::max(1.0 - epsilon, r));
        double term = std::min(r * a, clipped * a);
        if (a < 0.0) term = std::max(term, eta * a);
        acc += term;
    }
    return -acc / static_cast<double>(ratios.size());
}

inline double value_loss(const std::vector<double>& values, const std::vector<double>& returns) {
    if (values.size() != returns.size()) throw InputError("value_loss: length mismatch");
    if (values.empty()) throw InputError("value_loss: empty batch");
    double acc = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - returns[i];
        acc += d * d;
    }
    return acc / static_cast<double>(values.size());
}

// Zero-mean, unit-variance normalization over the weighted batch. Positive
// affine, so the per-batch ordering of advantages is preserved.
inline void normalize_advantages_inplace(std::vector<float>& adv, const std::vector<float>& wts) {
    if (adv.size() != wts.size()) throw InputError("normalize_advantages: length mismatch");
    double wsum = 0.0, mean = 0.0;
    for (size_t i = 0; i < adv.size(); ++i) {
        wsum += wts[i];
        mean += wts[i] * adv[i];
    }
    if (wsum <= 0.0) throw InputError("normalize_advantages: all-zero weights");
    mean /= wsum;
    double var = 0.0;
    for (size_t i = 0; i < adv.size(); ++i) var += wts[i] * (adv[i] - mean) * (adv[i] - mean);
    const double stdev = std::sqrt(var / wsum) + 1e-8;
    for (size_t i = 0; i < adv.size(); ++i)
        adv[i] = wts[i] > 0.0f ? static_cast<float>((adv[i] - mean) / stdev) : 0.0f;
}

// --- Differentiable total loss over a batch ---

struct LossParts {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double mean_ratio = 0.0;
};

// L = L_policy + value_loss_weight * L_value - entropy_coef * mean entropy.
// Advantages and behavior log-probs are constants; gradients flow through the
// fresh forward passes only.
inline std::pair<Tensor, LossParts> total_loss(const NetworkParams& params, const std::vector<Transition>& batch,
                                               const PPOConfig& cfg) {
    using namespace tensor_ops;
    if (batch.empty()) throw InputError("total_loss: empty batch");
    cfg.validate();
    const int B = static_cast<int>(batch.size());

    std::vector<const Observation*> obs(batch.size());
    std::vector<int> act_idx(batch.size()), dir_idx(batch.size());
    std::vector<float> old_logp(batch.size()), adv(batch.size()), ret(batch.size()), wts(batch.size());
    std::vector<float> dir_used(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        obs[i] = &batch[i].obs;
        act_idx[i] = batch[i].action;
        dir_idx[i] = batch[i].direction;
        old_logp[i] = batch[i].behavior_logp;
        adv[i] = batch[i].advantage;
        ret[i] = batch[i].ret;
        wts[i] = batch[i].weight;
        dir_used[i] = action_uses_direction(static_cast<Action>(batch[i].action)) ? 1.0f : 0.0f;
    }

    if (cfg.normalize_advantages) normalize_advantages_inplace(adv, wts);

    ObsBatch in = make_obs_batch(obs, params.layout, /*with_invisible=*/true);
    Tensor mid = detail::trunk(params, in);
    PolicyOut pol = forward_policy_from_trunk(params, mid, in);
    Tensor values = forward_value_from_trunk(params, mid, in);

    // joint log-prob: action head + direction head where consumed
    Tensor new_logp = add(gather(pol.act_logp, act_idx),
                          mul(gather(pol.dir_logp, dir_idx), Tensor::constant({B}, dir_used)));
    Tensor ratios = exp_op(sub(new_logp, Tensor::constant({B}, old_logp)));

    Tensor adv_t = Tensor::constant({B}, adv);
    std::vector<float> eta_adv(adv.size()), neg_mask(adv.size()), pos_mask(adv.size());
    for (size_t i = 0; i < adv.size(); ++i) {
        eta_adv[i] = static_cast<float>(cfg.dual_clip_eta) * adv[i];
        neg_mask[i] = adv[i] < 0.0f ? 1.0f : 0.0f;
        pos_mask[i] = 1.0f - neg_mask[i];
    }
    Tensor r_adv = mul(ratios, adv_t);
    Tensor c_adv = mul(clamp_scalar(ratios, static_cast<float>(1.0 - cfg.clip_epsilon),
                                    static_cast<float>(1.0 + cfg.clip_epsilon)),
                       adv_t);
    Tensor unclipped_min = min_elt(r_adv, c_adv);
    Tensor floored = max_elt(unclipped_min, Tensor::constant({B}, eta_adv));
    Tensor term = add(mul(floored, Tensor::constant({B}, neg_mask)),
                      mul(unclipped_min, Tensor::constant({B}, pos_mask)));
    Tensor policy_loss = mul_scalar(weighted_mean(term, wts), -1.0f);

    Tensor v_loss = weighted_mean(square(sub(values, Tensor::constant({B}, ret))), wts);

    // entropy of the masked policy distributions; the direction head counts
    // only where some direction-consuming action is legal
    std::vector<float> dir_relevant(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const auto& m = batch[i].obs.mask.actions;
        dir_relevant[i] =
            (m[static_cast<int>(Action::Move)] || m[static_cast<int>(Action::Attack)]) ? 1.0f : 0.0f;
    }
    auto head_entropy = [&](const Tensor& logp, const Tensor& mask) {
        Tensor plogp = mul(mul(exp_op(logp), logp), mask);
        return mul_scalar(sum_last(plogp), -1.0f);
    };
    Tensor ent_rows = add(head_entropy(pol.act_logp, in.act_mask),
                          mul(head_entropy(pol.dir_logp, in.dir_mask), Tensor::constant({B}, dir_relevant)));
    Tensor entropy = weighted_mean(ent_rows, wts);

    Tensor loss = add(policy_loss, add(mul_scalar(v_loss, static_cast<float>(cfg.value_loss_weight)),
                                       mul_scalar(entropy, static_cast<float>(-cfg.entropy_coef))));

    LossParts parts;
    parts.total = loss.item();
    parts.policy = policy_loss.item();
    parts.value = v_loss.item();
    parts.entropy = entropy.item();
    double rsum = 0.0, wsum = 0.0;
    for (int i = 0; i < B; ++i) {
        rsum += static_cast<double>(ratios.value()[i]) * wts[i];
        wsum += wts[i];
    }
    parts.mean_ratio = wsum > 0 ? rsum / wsum : 0.0;
    return {loss, parts};
}

}  // namespace aet
