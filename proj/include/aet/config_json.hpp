#pragma once

// JSON bindings for the config structs. Missing keys fall back to defaults;
// validate() still runs after parsing, so malformed values fail with a
// field-level message.

#include <json.hpp>

#include "aet/arena.hpp"
#include "aet/network.hpp"
#include "aet/obsenc.hpp"
#include "aet/ppo.hpp"
#include "aet/trueskill.hpp"

namespace aet {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ArenaConfig, width, height, n_cheese, n_rockets, max_steps,
                                                vision_radius, mouse_hp, cat_hp, cat_attack_damage,
                                                crack_attack_damage, rocket_countdown, push_progress_per_step,
                                                crack_hp, wall_density_pct, rng_seed)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ObsEncConfig, memory_capacity, entity_slots, max_age,
                                                memory_info, invisible_info)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetConfig, conv_channels1, conv_channels2, image_embed,
                                                vec_hidden1, vec_hidden2, entity_hidden, memory_embed,
                                                invisible_embed, mid, head_hidden)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PPOConfig, clip_epsilon, dual_clip_eta, gamma, gae_lambda,
                                                value_loss_weight, entropy_coef, trajectory_length,
                                                sample_reuse_cap, normalize_advantages)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdamConfig, lr, beta1, beta2, eps)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrueSkillConfig, mu0, sigma0, beta, tau, sigma_min)

}  // namespace aet
