#pragma once

// The per-side policy/value network: conv-residual image encoder, vector MLP,
// shared per-slot entity MLP with max-pooling, memory embedding, mid MLP
// bottleneck, two policy heads (action, direction) behind a legality mask,
// and a value head that additionally sees the invisible block. Cat and mouse
// use structurally identical but separately sized and separately trained
// parameter sets.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "aet/common.hpp"
#include "aet/obsenc.hpp"
#include "aet/rng.hpp"
#include "aet/serde.hpp"
#include "aet/tensor.hpp"

namespace aet {

struct NetConfig {
    int conv_channels1 = 12;
    int conv_channels2 = 16;  // encoder widens 8 -> conv_channels2 over two residual blocks
    int image_embed = 48;
    int vec_hidden1 = 96;
    int vec_hidden2 = 64;
    int entity_hidden = 32;
    int memory_embed = 32;
    int invisible_embed = 32;
    int mid = 128;
    int head_hidden = 64;

    void validate() const {
        for (int v : {conv_channels1, conv_channels2, image_embed, vec_hidden1, vec_hidden2, entity_hidden,
                      memory_embed, invisible_embed, mid, head_hidden})
            if (v < 1) throw ConfigError("net: all layer widths must be >= 1");
    }
    bool operator==(const NetConfig&) const = default;
};

inline int conv_out(int extent) { return (extent - 1) / 2 + 1; }  // 3x3, pad 1, stride 2

struct NetworkParams {
    Side side = Side::Mouse;
    uint64_t arena_hash = 0;  // always arena.hash()
    uint64_t train_step = 0;
    ArenaConfig arena;
    ObsEncConfig enc;
    ObsLayout layout;
    NetConfig net;
    std::vector<std::pair<std::string, Tensor>> blocks;

    Tensor& block(const std::string& name) {
        for (auto& [n, t] : blocks)
            if (n == name) return t;
        throw StructuralError("unknown param block: " + name);
    }
    const Tensor& block(const std::string& name) const {
        return const_cast<NetworkParams*>(this)->block(name);
    }

    size_t param_count() const {
        size_t n = 0;
        for (const auto& [name, t] : blocks) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [name, t] : blocks) t.zero_grad();
    }

    bool finite() const {
        for (const auto& [name, t] : blocks)
            for (float v : t.value())
                if (!std::isfinite(v)) return false;
        return true;
    }

    NetworkParams clone() const {
        NetworkParams c;
        c.side = side;
        c.arena_hash = arena_hash;
        c.train_step = train_step;
        c.arena = arena;
        c.enc = enc;
        c.layout = layout;
        c.net = net;
        for (const auto& [name, t] : blocks) c.blocks.emplace_back(name, Tensor::param(t.shape(), t.value()));
        return c;
    }
};

namespace detail {

inline void add_block(NetworkParams& p, Rng& rng, const std::string& name, std::vector<int> shape,
                      int fan_in, float scale = 1.0f) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    std::vector<float> v(n);
    const float limit = scale * std::sqrt(6.0f / static_cast<float>(fan_in));
    for (auto& x : v) x = static_cast<float>(rng.uniform_range(-limit, limit));
    p.blocks.emplace_back(name, Tensor::param(std::move(shape), std::move(v)));
}

inline void add_zeros(NetworkParams& p, const std::string& name, std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    p.blocks.emplace_back(name, Tensor::param(std::move(shape), std::vector<float>(n, 0.0f)));
}

}  // namespace detail

inline NetworkParams init_params(Side side, const ArenaConfig& arena, const ObsEncConfig& enc,
                                 const NetConfig& net, uint64_t seed) {
    arena.validate();
    enc.validate();
    net.validate();
    NetworkParams p;
    p.side = side;
    p.arena = arena;
    p.enc = enc;
    p.arena_hash = arena.hash();
    p.layout = obs_layout(arena, enc, side);
    p.net = net;
    const ObsLayout& layout = p.layout;
    Rng rng(derive_seed(seed, side == Side::Cat ? 0xCA7 : 0xA10));

    const int c1 = net.conv_channels1, c2 = net.conv_channels2;
    detail::add_block(p, rng, "conv_in.w", {c1, kImageChannels, 3, 3}, kImageChannels * 9);
    detail::add_zeros(p, "conv_in.b", {c1});
    detail::add_block(p, rng, "res1.conv1.w", {c1, c1, 3, 3}, c1 * 9);
    detail::add_zeros(p, "res1.conv1.b", {c1});
    detail::add_block(p, rng, "res1.conv2.w", {c1, c1, 3, 3}, c1 * 9);
    detail::add_zeros(p, "res1.conv2.b", {c1});
    detail::add_block(p, rng, "conv_mid.w", {c2, c1, 3, 3}, c1 * 9);
    detail::add_zeros(p, "conv_mid.b", {c2});
    detail::add_block(p, rng, "res2.conv1.w", {c2, c2, 3, 3}, c2 * 9);
    detail::add_zeros(p, "res2.conv1.b", {c2});
    detail::add_block(p, rng, "res2.conv2.w", {c2, c2, 3, 3}, c2 * 9);
    detail::add_zeros(p, "res2.conv2.b", {c2});

    const int h2 = conv_out(conv_out(layout.height));
    const int w2 = conv_out(conv_out(layout.width));
    const int img_flat = c2 * h2 * w2;
    detail::add_block(p, rng, "img_fc.w", {img_flat, net.image_embed}, img_flat);
    detail::add_zeros(p, "img_fc.b", {net.image_embed});

    detail::add_block(p, rng, "vec_fc1.w", {layout.vec_dim, net.vec_hidden1}, layout.vec_dim);
    detail::add_zeros(p, "vec_fc1.b", {net.vec_hidden1});
    detail::add_block(p, rng, "vec_fc2.w", {net.vec_hidden1, net.vec_hidden2}, net.vec_hidden1);
    detail::add_zeros(p, "vec_fc2.b", {net.vec_hidden2});

    detail::add_block(p, rng, "ent_fc1.w", {kEntityFeat, net.entity_hidden}, kEntityFeat);
    detail::add_zeros(p, "ent_fc1.b", {net.entity_hidden});
    detail::add_block(p, rng, "ent_fc2.w", {net.entity_hidden, net.entity_hidden}, net.entity_hidden);
    detail::add_zeros(p, "ent_fc2.b", {net.entity_hidden});

    detail::add_block(p, rng, "mem_fc.w", {layout.memory_dim, net.memory_embed}, layout.memory_dim);
    detail::add_zeros(p, "mem_fc.b", {net.memory_embed});

    const int concat_dim = net.image_embed + net.vec_hidden2 + net.entity_hidden + net.memory_embed;
    detail::add_block(p, rng, "mid_fc.w", {concat_dim, net.mid}, concat_dim);
    detail::add_zeros(p, "mid_fc.b", {net.mid});

    detail::add_block(p, rng, "pol_fc.w", {net.mid, net.head_hidden}, net.mid);
    detail::add_zeros(p, "pol_fc.b", {net.head_hidden});
    detail::add_block(p, rng, "pol_act.w", {net.head_hidden, kNumActions}, net.head_hidden, 0.01f);
    detail::add_zeros(p, "pol_act.b", {kNumActions});
    detail::add_block(p, rng, "pol_dir.w", {net.head_hidden, kNumDirs}, net.head_hidden, 0.01f);
    detail::add_zeros(p, "pol_dir.b", {kNumDirs});

    detail::add_block(p, rng, "inv_fc.w", {layout.invisible_dim, net.invisible_embed}, layout.invisible_dim);
    detail::add_zeros(p, "inv_fc.b", {net.invisible_embed});
    detail::add_block(p, rng, "val_fc.w", {net.mid + net.invisible_embed, net.head_hidden},
                      net.mid + net.invisible_embed);
    detail::add_zeros(p, "val_fc.b", {net.head_hidden});
    detail::add_block(p, rng, "val_out.w", {net.head_hidden, 1}, net.head_hidden);
    detail::add_zeros(p, "val_out.b", {1});

    return p;
}

// --- Batched observation input ---

struct ObsBatch {
    int size = 0;
    Tensor image;      // [B, 8, H, W]
    Tensor vec;        // [B, V]
    Tensor entities;   // [B, S, F]
    Tensor presence;   // [B, S]
    Tensor memory;     // [B, M]
    Tensor invisible;  // [B, I]; undefined for policy-only batches
    Tensor act_mask;   // [B, A]
    Tensor dir_mask;   // [B, D]
};

inline ObsBatch make_obs_batch(const std::vector<const Observation*>& obs, const ObsLayout& layout,
                               bool with_invisible) {
    if (obs.empty()) throw InputError("empty observation batch");
    const int B = static_cast<int>(obs.size());
    const int img = layout.image_size();
    const int S = layout.entity_slots, F = kEntityFeat;
    std::vector<float> image(static_cast<size_t>(B) * img);
    std::vector<float> vec(static_cast<size_t>(B) * layout.vec_dim);
    std::vector<float> ents(static_cast<size_t>(B) * S * F);
    std::vector<float> presence(static_cast<size_t>(B) * S);
    std::vector<float> mem(static_cast<size_t>(B) * layout.memory_dim);
    std::vector<float> inv(with_invisible ? static_cast<size_t>(B) * layout.invisible_dim : 0);
    std::vector<float> amask(static_cast<size_t>(B) * kNumActions);
    std::vector<float> dmask(static_cast<size_t>(B) * kNumDirs);

    for (int b = 0; b < B; ++b) {
        const Observation& o = *obs[b];
        if (o.side != layout.side) throw StructuralError("observation side does not match network side");
        if (static_cast<int>(o.image.size()) != img || static_cast<int>(o.vec.size()) != layout.vec_dim ||
            static_cast<int>(o.entities.size()) != S * F ||
            static_cast<int>(o.memory.size()) != layout.memory_dim)
            throw StructuralError("observation blocks do not match network layout");
        if (with_invisible && static_cast<int>(o.invisible.size()) != layout.invisible_dim)
            throw StructuralError("value input requires the invisible block");
        std::copy(o.image.begin(), o.image.end(), image.begin() + static_cast<size_t>(b) * img);
        std::copy(o.vec.begin(), o.vec.end(), vec.begin() + static_cast<size_t>(b) * layout.vec_dim);
        std::copy(o.entities.begin(), o.entities.end(), ents.begin() + static_cast<size_t>(b) * S * F);
        for (int s = 0; s < S; ++s) presence[static_cast<size_t>(b) * S + s] = o.entities[static_cast<size_t>(s) * F];
        std::copy(o.memory.begin(), o.memory.end(), mem.begin() + static_cast<size_t>(b) * layout.memory_dim);
        if (with_invisible)
            std::copy(o.invisible.begin(), o.invisible.end(), inv.begin() + static_cast<size_t>(b) * layout.invisible_dim);
        for (int a = 0; a < kNumActions; ++a) amask[static_cast<size_t>(b) * kNumActions + a] = o.mask.actions[a];
        for (int d = 0; d < kNumDirs; ++d) dmask[static_cast<size_t>(b) * kNumDirs + d] = o.mask.directions[d];
    }

    ObsBatch batch;
    batch.size = B;
    batch.image = Tensor::constant({B, kImageChannels, layout.height, layout.width}, std::move(image));
    batch.vec = Tensor::constant({B, layout.vec_dim}, std::move(vec));
    batch.entities = Tensor::constant({B, S, F}, std::move(ents));
    batch.presence = Tensor::constant({B, S}, std::move(presence));
    batch.memory = Tensor::constant({B, layout.memory_dim}, std::move(mem));
    if (with_invisible) batch.invisible = Tensor::constant({B, layout.invisible_dim}, std::move(inv));
    batch.act_mask = Tensor::constant({B, kNumActions}, std::move(amask));
    batch.dir_mask = Tensor::constant({B, kNumDirs}, std::move(dmask));
    return batch;
}

// --- Forward passes ---

struct PolicyOut {
    Tensor act_logp;  // [B, A]; masked entries carry the -1e9 sentinel
    Tensor dir_logp;  // [B, D]
};

namespace detail {

inline Tensor dense(const NetworkParams& p, const std::string& prefix, const Tensor& x, bool relu_after = true) {
    Tensor h = tensor_ops::add_bias(tensor_ops::matmul(x, p.block(prefix + ".w")), p.block(prefix + ".b"));
    return relu_after ? tensor_ops::relu(h) : h;
}

inline Tensor res_block(const NetworkParams& p, const std::string& prefix, const Tensor& x) {
    using namespace tensor_ops;
    Tensor h = relu(conv2d(x, p.block(prefix + ".conv1.w"), p.block(prefix + ".conv1.b"), 1));
    h = conv2d(h, p.block(prefix + ".conv2.w"), p.block(prefix + ".conv2.b"), 1);
    return relu(add(h, x));
}

// image/vec/entity/memory encoders -> mid bottleneck, shared by both heads
inline Tensor trunk(const NetworkParams& p, const ObsBatch& in) {
    using namespace tensor_ops;
    Tensor img = relu(conv2d(in.image, p.block("conv_in.w"), p.block("conv_in.b"), 2));
    img = res_block(p, "res1", img);
    img = relu(conv2d(img, p.block("conv_mid.w"), p.block("conv_mid.b"), 2));
    img = res_block(p, "res2", img);
    Tensor img_emb = dense(p, "img_fc", flatten(img));

    Tensor vec_emb = dense(p, "vec_fc2", dense(p, "vec_fc1", in.vec));

    Tensor ent = slot_dense(in.entities, p.block("ent_fc1.w"), p.block("ent_fc1.b"));
    {
        const auto& s = ent.shape();
        ent = reshape(relu(reshape(ent, {s[0] * s[1], s[2]})), s);
    }
    ent = slot_dense(ent, p.block("ent_fc2.w"), p.block("ent_fc2.b"));
    Tensor ent_emb = masked_max_pool(ent, in.presence);

    Tensor mem_emb = dense(p, "mem_fc", in.memory);

    return dense(p, "mid_fc", concat({img_emb, vec_emb, ent_emb, mem_emb}));
}

}  // namespace detail

inline PolicyOut forward_policy_from_trunk(const NetworkParams& p, const Tensor& mid, const ObsBatch& in) {
    using namespace tensor_ops;
    Tensor h = detail::dense(p, "pol_fc", mid);
    PolicyOut out;
    out.act_logp = masked_log_softmax(detail::dense(p, "pol_act", h, false), in.act_mask);
    out.dir_logp = masked_log_softmax(detail::dense(p, "pol_dir", h, false), in.dir_mask);
    return out;
}

inline Tensor forward_value_from_trunk(const NetworkParams& p, const Tensor& mid, const ObsBatch& in) {
    using namespace tensor_ops;
    if (!in.invisible.defined()) throw StructuralError("value forward requires the invisible block");
    Tensor inv_emb = detail::dense(p, "inv_fc", in.invisible);
    Tensor h = detail::dense(p, "val_fc", concat({mid, inv_emb}));
    Tensor v = detail::dense(p, "val_out", h, false);
    return tensor_ops::reshape(v, {in.size});
}

inline PolicyOut forward_policy(const NetworkParams& p, const ObsBatch& in) {
    return forward_policy_from_trunk(p, detail::trunk(p, in), in);
}

inline Tensor forward_value(const NetworkParams& p, const ObsBatch& in) {
    return forward_value_from_trunk(p, detail::trunk(p, in), in);
}

// Single-observation conveniences (sampling path).

struct SingleForward {
    std::vector<float> act_logp;
    std::vector<float> dir_logp;
    float value = 0.0f;
};

inline SingleForward forward_single(const NetworkParams& p, const Observation& value_obs) {
    ObsBatch in = make_obs_batch({&value_obs}, p.layout, /*with_invisible=*/true);
    Tensor mid = detail::trunk(p, in);
    PolicyOut pol = forward_policy_from_trunk(p, mid, in);
    Tensor v = forward_value_from_trunk(p, mid, in);
    return {pol.act_logp.value(), pol.dir_logp.value(), v.value()[0]};
}

inline std::pair<std::vector<float>, std::vector<float>> forward_policy(const NetworkParams& p,
                                                                        const Observation& obs) {
    ObsBatch in = make_obs_batch({&obs}, p.layout, /*with_invisible=*/false);
    PolicyOut out = forward_policy(p, in);
    return {out.act_logp.value(), out.dir_logp.value()};
}

inline float forward_value(const NetworkParams& p, const Observation& value_obs) {
    ObsBatch in = make_obs_batch({&value_obs}, p.layout, /*with_invisible=*/true);
    return forward_value(p, in).value()[0];
}

// --- Action sampling ---

enum class SampleMode : uint8_t { Stochastic = 0, Argmax };

struct SampledAction {
    int action = 0;
    int direction = 0;
    float joint_logp = 0.0f;  // direction term included only when consumed
};

namespace detail {

inline int sample_head(std::span<const float> logp, SampleMode mode, Rng& rng) {
    if (mode == SampleMode::Argmax) {
        int best = 0;
        for (size_t i = 1; i < logp.size(); ++i)
            if (logp[i] > logp[best]) best = static_cast<int>(i);  // ties keep the lowest index
        return best;
    }
    const double u = rng.uniform();
    double acc = 0.0;
    int last_legal = -1;
    for (size_t i = 0; i < logp.size(); ++i) {
        const double pi = std::exp(static_cast<double>(logp[i]));
        if (pi > 0.0) last_legal = static_cast<int>(i);
        acc += pi;
        if (u < acc && pi > 0.0) return static_cast<int>(i);
    }
    return last_legal;  // numerical shortfall: fall back to the last legal entry
}

}  // namespace detail

inline SampledAction sample_action(std::span<const float> act_logp, std::span<const float> dir_logp,
                                   SampleMode mode, Rng& rng) {
    SampledAction s;
    s.action = detail::sample_head(act_logp, mode, rng);
    s.direction = detail::sample_head(dir_logp, mode, rng);
    s.joint_logp = act_logp[s.action];
    if (action_uses_direction(static_cast<Action>(s.action))) s.joint_logp += dir_logp[s.direction];
    return s;
}

// --- Adam ---

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.99;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
    AdamConfig config;
    uint64_t step_count = 0;
    uint64_t skipped_updates = 0;  // non-finite gradients seen
    std::vector<std::vector<float>> m, v;

    static AdamState init(const NetworkParams& p, const AdamConfig& cfg) {
        AdamState s;
        s.config = cfg;
        for (const auto& [name, t] : p.blocks) {
            s.m.emplace_back(t.numel(), 0.0f);
            s.v.emplace_back(t.numel(), 0.0f);
        }
        return s;
    }
};

// Bias-corrected Adam over every block. A non-finite gradient anywhere skips
// the whole update (flagged in skipped_updates); step_count still advances.
inline void adam_step(NetworkParams& params, AdamState& state) {
    if (state.m.size() != params.blocks.size()) throw StructuralError("adam state does not match params");
    bool finite = true;
    for (auto& [name, t] : params.blocks) {
        if (t.grad().size() != t.numel()) throw StateError("adam_step before backward: missing gradients");
        for (float g : t.grad())
            if (!std::isfinite(g)) {
                finite = false;
                break;
            }
        if (!finite) break;
    }
    state.step_count += 1;
    if (!finite) {
        state.skipped_updates += 1;
        return;
    }
    const double b1 = state.config.beta1, b2 = state.config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (size_t bi = 0; bi < params.blocks.size(); ++bi) {
        auto& t = params.blocks[bi].second;
        auto& m = state.m[bi];
        auto& v = state.v[bi];
        const auto& g = t.grad();
        auto& val = t.value();
        for (size_t i = 0; i < val.size(); ++i) {
            m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g[i]);
            v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * static_cast<double>(g[i]) * g[i]);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            val[i] -= static_cast<float>(state.config.lr * mhat / (std::sqrt(vhat) + state.config.eps));
        }
    }
}

// --- Snapshot format ---
//
// Little-endian binary:
//   magic "AETSNAP1" (8 bytes), version u32
//   side u8, arena_hash u64, train_step u64
//   arena config: 14 x u32 (width, height, n_cheese, n_rockets, max_steps,
//     vision_radius, mouse_hp, cat_hp, cat_attack_damage, crack_attack_damage,
//     rocket_countdown, push_progress_per_step, crack_hp, wall_density_pct)
//   encoder config: 3 x u32 (memory_capacity, entity_slots, max_age)
//                   + 2 x u8 (memory_info, invisible_info)
//   net config: 10 x u32 (conv1, conv2, image_embed, vec_h1, vec_h2,
//               entity_hidden, memory_embed, invisible_embed, mid, head_hidden)
//   n_blocks u32, then per block: name (u32 len + bytes), n_dims u32,
//   dims (i64 each), data (f32 each, row-major)

inline constexpr char kSnapshotMagic[8] = {'A', 'E', 'T', 'S', 'N', 'A', 'P', '1'};
inline constexpr uint32_t kSnapshotVersion = 1;

inline std::vector<uint8_t> serialize(const NetworkParams& p) {
    BinWriter w;
    w.raw(kSnapshotMagic, 8);
    w.u32(kSnapshotVersion);
    w.u8(static_cast<uint8_t>(p.side));
    w.u64(p.arena_hash);
    w.u64(p.train_step);
    for (int v : {p.arena.width, p.arena.height, p.arena.n_cheese, p.arena.n_rockets, p.arena.max_steps,
                  p.arena.vision_radius, p.arena.mouse_hp, p.arena.cat_hp, p.arena.cat_attack_damage,
                  p.arena.crack_attack_damage, p.arena.rocket_countdown, p.arena.push_progress_per_step,
                  p.arena.crack_hp, p.arena.wall_density_pct})
        w.u32(static_cast<uint32_t>(v));
    for (int v : {p.enc.memory_capacity, p.enc.entity_slots, p.enc.max_age}) w.u32(static_cast<uint32_t>(v));
    w.u8(p.enc.memory_info ? 1 : 0);
    w.u8(p.enc.invisible_info ? 1 : 0);
    for (int v : {p.net.conv_channels1, p.net.conv_channels2, p.net.image_embed, p.net.vec_hidden1,
                  p.net.vec_hidden2, p.net.entity_hidden, p.net.memory_embed, p.net.invisible_embed, p.net.mid,
                  p.net.head_hidden})
        w.u32(static_cast<uint32_t>(v));
    w.u32(static_cast<uint32_t>(p.blocks.size()));
    for (const auto& [name, t] : p.blocks) {
        w.str(name);
        w.u32(static_cast<uint32_t>(t.shape().size()));
        for (int d : t.shape()) w.i64(d);
        w.f32s(t.value());
    }
    return w.bytes();
}

// expected_arena_hash = 0 skips the compatibility check.
inline NetworkParams deserialize(const std::vector<uint8_t>& bytes, uint64_t expected_arena_hash = 0) {
    BinReader r(bytes);
    char magic[8];
    for (auto& c : magic) c = static_cast<char>(r.u8());
    if (std::memcmp(magic, kSnapshotMagic, 8) != 0) throw IoError("snapshot: bad magic");
    if (r.u32() != kSnapshotVersion) throw IoError("snapshot: unsupported version");
    NetworkParams p;
    p.side = static_cast<Side>(r.u8());
    p.arena_hash = r.u64();
    p.train_step = r.u64();
    if (expected_arena_hash != 0 && p.arena_hash != expected_arena_hash)
        throw InputError("snapshot: arena config hash mismatch");
    int* arena_fields[] = {&p.arena.width,          &p.arena.height,
                           &p.arena.n_cheese,       &p.arena.n_rockets,
                           &p.arena.max_steps,      &p.arena.vision_radius,
                           &p.arena.mouse_hp,       &p.arena.cat_hp,
                           &p.arena.cat_attack_damage, &p.arena.crack_attack_damage,
                           &p.arena.rocket_countdown,  &p.arena.push_progress_per_step,
                           &p.arena.crack_hp,       &p.arena.wall_density_pct};
    for (int* f : arena_fields) *f = static_cast<int>(r.u32());
    p.enc.memory_capacity = static_cast<int>(r.u32());
    p.enc.entity_slots = static_cast<int>(r.u32());
    p.enc.max_age = static_cast<int>(r.u32());
    p.enc.memory_info = r.u8() != 0;
    p.enc.invisible_info = r.u8() != 0;
    if (p.arena.hash() != p.arena_hash) throw IoError("snapshot: header hash does not match arena config");
    p.layout = obs_layout(p.arena, p.enc, p.side);
    int* net_fields[] = {&p.net.conv_channels1, &p.net.conv_channels2, &p.net.image_embed, &p.net.vec_hidden1,
                         &p.net.vec_hidden2,   &p.net.entity_hidden,  &p.net.memory_embed,
                         &p.net.invisible_embed, &p.net.mid,          &p.net.head_hidden};
    for (int* f : net_fields) *f = static_cast<int>(r.u32());
    const uint32_t n_blocks = r.u32();
    for (uint32_t i = 0; i < n_blocks; ++i) {
        std::string name = r.str();
        const uint32_t nd = r.u32();
        std::vector<int> shape(nd);
        size_t count = 1;
        for (auto& d : shape) {
            d = static_cast<int>(r.i64());
            if (d <= 0) throw IoError("snapshot: bad dimension");
            count *= static_cast<size_t>(d);
        }
        p.blocks.emplace_back(std::move(name), Tensor::param(std::move(shape), r.f32s(count)));
    }
    if (!r.at_end()) throw IoError("snapshot: trailing bytes");
    return p;
}

inline void save_snapshot(const NetworkParams& p, const std::string& path) {
    auto bytes = serialize(p);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline NetworkParams load_snapshot(const std::string& path, uint64_t expected_arena_hash = 0) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open snapshot: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes, expected_arena_hash);
}

}  // namespace aet
