#pragma once

// Minimal reverse-mode autodiff over dense float32 tensors: just the ops the
// policy/value networks and the PPO loss graph need. Graphs are built
// dynamically; backward() topologically sorts and runs the recorded
// closures. No aliasing: every op produces a fresh buffer.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "aet/common.hpp"

namespace aet {

class Tensor {
  public:
    struct Node {
        std::vector<int> shape;
        std::vector<float> value;
        std::vector<float> grad;
        bool requires_grad = false;
        bool is_param = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward_fn;

        size_t numel() const { return value.size(); }
        void ensure_grad() {
            if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
        }
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape) {
        auto n = std::make_shared<Node>();
        n->value.assign(count(shape), 0.0f);
        n->shape = std::move(shape);
        return Tensor(n);
    }

    static Tensor constant(std::vector<int> shape, std::vector<float> value) {
        check_shape(shape, value.size());
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(value);
        return Tensor(n);
    }

    static Tensor param(std::vector<int> shape, std::vector<float> value) {
        check_shape(shape, value.size());
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(value);
        n->requires_grad = true;
        n->is_param = true;
        return Tensor(n);
    }

    bool defined() const { return n_ != nullptr; }
    const std::vector<int>& shape() const { return n_->shape; }
    std::vector<float>& value() { return n_->value; }
    const std::vector<float>& value() const { return n_->value; }
    std::vector<float>& grad() { return n_->grad; }
    const std::vector<float>& grad() const { return n_->grad; }
    size_t numel() const { return n_->numel(); }
    bool requires_grad() const { return n_->requires_grad; }
    std::shared_ptr<Node> node() const { return n_; }

    float item() const {
        if (numel() != 1) throw StructuralError("item() on non-scalar tensor");
        return n_->value[0];
    }

    void zero_grad() { n_->grad.assign(n_->value.size(), 0.0f); }

    // Reverse pass from this scalar. Seeds d(this)=1 and propagates to every
    // reachable parameter leaf.
    void backward() const {
        if (numel() != 1) throw StructuralError("backward() requires a scalar loss");
        // topo order
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        std::vector<std::pair<Node*, size_t>> stack{{n_.get(), 0}};
        bool any_param = false;
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx == 0 && !seen.insert(node).second) {
                stack.pop_back();
                continue;
            }
            if (idx < node->parents.size()) {
                Node* next = node->parents[idx++].get();
                if (!seen.count(next)) stack.push_back({next, 0});
            } else {
                if (node->is_param) any_param = true;
                order.push_back(node);
                stack.pop_back();
            }
        }
        if (!any_param) throw StateError("backward without a recorded forward pass over parameters");
        for (Node* node : order) node->ensure_grad();
        n_->grad[0] += 1.0f;
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn(**it);
    }

  private:
    static size_t count(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw StructuralError("non-positive tensor dimension");
            n *= static_cast<size_t>(d);
        }
        return n;
    }
    static void check_shape(const std::vector<int>& shape, size_t n) {
        if (count(shape) != n) throw StructuralError("shape does not match value count");
    }

    std::shared_ptr<Node> n_;
};

namespace tensor_ops {

using Node = Tensor::Node;

inline Tensor make_op(std::vector<int> shape, std::vector<float> value,
                      std::vector<Tensor> parents, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (auto& p : parents) {
        n->requires_grad = n->requires_grad || p.requires_grad();
        n->parents.push_back(p.node());
    }
    if (n->requires_grad) n->backward_fn = std::move(backward);
    return Tensor(n);
}

inline void same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) throw StructuralError(std::string(what) + ": shape mismatch");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "add");
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] + b.value()[i];
    return make_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
        for (int p = 0; p < 2; ++p) {
            auto& par = *n.parents[p];
            if (!par.requires_grad) continue;
            par.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) par.grad[i] += n.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "sub");
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] - b.value()[i];
    return make_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "mul");
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * b.value()[i];
    return make_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
        }
    });
}

inline Tensor mul_scalar(const Tensor& a, float c) {
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * c;
    return make_op(a.shape(), std::move(v), {a}, [c](Node& n) {
        auto& pa = *n.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * c;
    });
}

inline Tensor exp_op(const Tensor& a) {
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::exp(a.value()[i]);
    return make_op(a.shape(), std::move(v), {a}, [](Node& n) {
        auto& pa = *n.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * n.value[i];
    });
}

inline Tensor square(const Tensor& a) {
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * a.value()[i];
    return make_op(a.shape(), std::move(v), {a}, [](Node& n) {
        auto& pa = *n.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * 2.0f * pa.value[i];
    });
}

// Elementwise min/max; ties route the gradient to the first argument.
inline Tensor min_elt(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "min_elt");
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] <= b.value()[i] ? a.value()[i] : b.value()[i];
    return make_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            if (pa.value[i] <= pb.value[i]) {
                if (pa.requires_grad) pa.grad[i] += n.grad[i];
            } else if (pb.requires_grad) {
                pb.grad[i] += n.grad[i];
            }
        }
    });
}

inline Tensor max_elt(const Tensor& a, const Tensor& b) {
    same_shape(a, b, "max_elt");
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] >= b.value()[i] ? a.value()[i] : b.value()[i];
    return make_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            if (pa.value[i] >= pb.value[i]) {
                if (pa.requires_grad) pa.grad[i] += n.grad[i];
            } else if (pb.requires_grad) {
                pb.grad[i] += n.grad[i];
            }
        }
    });
}

inline Tensor clamp_scalar(const Tensor& a, float lo, float hi) {
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::min(hi, std::max(lo, a.value()[i]));
    return make_op(a.shape(), std::move(v), {a}, [lo, hi](Node& n) {
        auto& pa = *n.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (pa.value[i] >= lo && pa.value[i] <= hi) pa.grad[i] += n.grad[i];
    });
}

inline Tensor relu(const Tensor& a) {
    std::vector<float> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] > 0.0f ? a.value()[i] : 0.0f;
    return make_op(a.shape(), std::move(v), {a}, [](Node& n) {
        auto& pa = *n.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (pa.value[i] > 0.0f) pa.grad[i] += n.grad[i];
    });
}

inline Tensor reshape(const Tensor& a, std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    if (n != a.numel()) throw StructuralError("reshape: element count mismatch");
    return make_op(std::move(shape), a.value(), {a}, [](Node& nd) {
        auto& pa = *nd.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < nd.grad.size(); ++i) pa.grad[i] += nd.grad[i];
    });
}

// [B,M] x [M,N] -> [B,N]
inline Tensor matmul(const Tensor& x, const Tensor& w) {
    if (x.shape().size() != 2 || w.shape().size() != 2 || x.shape()[1] != w.shape()[0])
        throw StructuralError("matmul: incompatible shapes");
    const int B = x.shape()[0], M = x.shape()[1], N = w.shape()[1];
    std::vector<float> v(static_cast<size_t>(B) * N, 0.0f);
    const float* xv = x.value().data();
    const float* wv = w.value().data();
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) {
            const float xb = xv[b * M + m];
            if (xb == 0.0f) continue;
            const float* wr = wv + static_cast<size_t>(m) * N;
            float* out = v.data() + static_cast<size_t>(b) * N;
            for (int n = 0; n < N; ++n) out[n] += xb * wr[n];
        }
    return make_op({B, N}, std::move(v), {x, w}, [B, M, N](Node& nd) {
        auto& px = *nd.parents[0];
        auto& pw = *nd.parents[1];
        if (px.requires_grad) {
            px.ensure_grad();
            for (int b = 0; b < B; ++b)
                for (int m = 0; m < M; ++m) {
                    const float* wr = pw.value.data() + static_cast<size_t>(m) * N;
                    const float* g = nd.grad.data() + static_cast<size_t>(b) * N;
                    float acc = 0.0f;
                    for (int n = 0; n < N; ++n) acc += g[n] * wr[n];
                    px.grad[b * M + m] += acc;
                }
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            for (int b = 0; b < B; ++b)
                for (int m = 0; m < M; ++m) {
                    const float xb = px.value[b * M + m];
                    if (xb == 0.0f) continue;
                    const float* g = nd.grad.data() + static_cast<size_t>(b) * N;
                    float* wg = pw.grad.data() + static_cast<size_t>(m) * N;
                    for (int n = 0; n < N; ++n) wg[n] += xb * g[n];
                }
        }
    });
}

// [B,N] + [N]
inline Tensor add_bias(const Tensor& x, const Tensor& b) {
    if (x.shape().size() != 2 || b.shape().size() != 1 || x.shape()[1] != b.shape()[0])
        throw StructuralError("add_bias: incompatible shapes");
    const int B = x.shape()[0], N = x.shape()[1];
    std::vector<float> v(x.value());
    for (int i = 0; i < B; ++i)
        for (int n = 0; n < N; ++n) v[static_cast<size_t>(i) * N + n] += b.value()[n];
    return make_op(x.shape(), std::move(v), {x, b}, [B, N](Node& nd) {
        auto& px = *nd.parents[0];
        auto& pb = *nd.parents[1];
        if (px.requires_grad) {
            px.ensure_grad();
            for (size_t i = 0; i < nd.grad.size(); ++i) px.grad[i] += nd.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int i = 0; i < B; ++i)
                for (int n = 0; n < N; ++n) pb.grad[n] += nd.grad[static_cast<size_t>(i) * N + n];
        }
    });
}

// 3x3 conv, padding 1. x:[B,C,H,W], w:[O,C,3,3], bias:[O].
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride) {
    if (x.shape().size() != 4 || w.shape().size() != 4 || w.shape()[2] != 3 || w.shape()[3] != 3)
        throw StructuralError("conv2d: expected [B,C,H,W] and [O,C,3,3]");
    if (x.shape()[1] != w.shape()[1]) throw StructuralError("conv2d: channel mismatch");
    if (stride != 1 && stride != 2) throw StructuralError("conv2d: stride must be 1 or 2");
    const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int O = w.shape()[0];
    const int HO = (H - 1) / stride + 1, WO = (W - 1) / stride + 1;
    std::vector<float> v(static_cast<size_t>(B) * O * HO * WO, 0.0f);
    const float* xv = x.value().data();
    const float* wv = w.value().data();
    const float* bv = bias.value().data();
    for (int b = 0; b < B; ++b)
        for (int o = 0; o < O; ++o)
            for (int ho = 0; ho < HO; ++ho)
                for (int wo = 0; wo < WO; ++wo) {
                    float acc = bv[o];
                    const int hi0 = ho * stride - 1, wi0 = wo * stride - 1;
                    for (int c = 0; c < C; ++c) {
                        const float* xp = xv + ((static_cast<size_t>(b) * C + c) * H) * W;
                        const float* wp = wv + ((static_cast<size_t>(o) * C + c) * 3) * 3;
                        for (int kh = 0; kh < 3; ++kh) {
                            const int hi = hi0 + kh;
                            if (hi < 0 || hi >= H) continue;
                            for (int kw = 0; kw < 3; ++kw) {
                                const int wi = wi0 + kw;
                                if (wi < 0 || wi >= W) continue;
                                acc += xp[hi * W + wi] * wp[kh * 3 + kw];
                            }
                        }
                    }
                    v[((static_cast<size_t>(b) * O + o) * HO + ho) * WO + wo] = acc;
                }
    return make_op({B, O, HO, WO}, std::move(v), {x, w, bias}, [B, C, H, W, O, HO, WO, stride](Node& nd) {
        auto& px = *nd.parents[0];
        auto& pw = *nd.parents[1];
        auto& pb = *nd.parents[2];
        if (px.requires_grad) px.ensure_grad();
        if (pw.requires_grad) pw.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (int b = 0; b < B; ++b)
            for (int o = 0; o < O; ++o)
                for (int ho = 0; ho < HO; ++ho)
                    for (int wo = 0; wo < WO; ++wo) {
                        const float g = nd.grad[((static_cast<size_t>(b) * O + o) * HO + ho) * WO + wo];
                        if (g == 0.0f) continue;
                        if (pb.requires_grad) pb.grad[o] += g;
                        const int hi0 = ho * stride - 1, wi0 = wo * stride - 1;
                        for (int c = 0; c < C; ++c) {
                            const size_t xoff = ((static_cast<size_t>(b) * C + c) * H) * W;
                            const size_t woff = ((static_cast<size_t>(o) * C + c) * 3) * 3;
                            for (int kh = 0; kh < 3; ++kh) {
                                const int hi = hi0 + kh;
                                if (hi < 0 || hi >= H) continue;
                                for (int kw = 0; kw < 3; ++kw) {
                                    const int wi = wi0 + kw;
                                    if (wi < 0 || wi >= W) continue;
                                    if (px.requires_grad)
                                        px.grad[xoff + hi * W + wi] += g * pw.value[woff + kh * 3 + kw];
                                    if (pw.requires_grad)
                                        pw.grad[woff + kh * 3 + kw] += g * px.value[xoff + hi * W + wi];
                                }
                            }
                        }
                    }
    });
}

inline Tensor flatten(const Tensor& x) {
    if (x.shape().size() < 2) throw StructuralError("flatten: needs batch dim");
    int rest = 1;
    for (size_t i = 1; i < x.shape().size(); ++i) rest *= x.shape()[i];
    return reshape(x, {x.shape()[0], rest});
}

// concat [B,K1],[B,K2],... along dim 1
inline Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw StructuralError("concat: empty");
    const int B = parts[0].shape()[0];
    int K = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 2 || p.shape()[0] != B) throw StructuralError("concat: expected [B,K] parts");
        K += p.shape()[1];
    }
    std::vector<float> v(static_cast<size_t>(B) * K);
    std::vector<int> widths;
    int off = 0;
    for (const auto& p : parts) {
        const int k = p.shape()[1];
        widths.push_back(k);
        for (int b = 0; b < B; ++b)
            std::copy_n(p.value().data() + static_cast<size_t>(b) * k, k,
                        v.data() + static_cast<size_t>(b) * K + off);
        off += k;
    }
    std::vector<Tensor> parents(parts.begin(), parts.end());
    return make_op({B, K}, std::move(v), std::move(parents), [B, K, widths](Node& nd) {
        int off2 = 0;
        for (size_t pi = 0; pi < nd.parents.size(); ++pi) {
            auto& par = *nd.parents[pi];
            const int k = widths[pi];
            if (par.requires_grad) {
                par.ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int i = 0; i < k; ++i)
                        par.grad[static_cast<size_t>(b) * k + i] += nd.grad[static_cast<size_t>(b) * K + off2 + i];
            }
            off2 += k;
        }
    });
}

// Shared dense over slots: [B,S,F] x [F,G] -> [B,S,G]
inline Tensor slot_dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 3) throw StructuralError("slot_dense: expected [B,S,F]");
    const int B = x.shape()[0], S = x.shape()[1], F = x.shape()[2];
    Tensor flat = reshape(x, {B * S, F});
    Tensor h = add_bias(matmul(flat, w), b);
    return reshape(h, {B, S, w.shape()[1]});
}

// Max over present slots and an implicit zero row: [B,S,G],[B,S] -> [B,G].
// Absent slots never win; if nothing is present the output is 0.
inline Tensor masked_max_pool(const Tensor& x, const Tensor& presence) {
    if (x.shape().size() != 3 || presence.shape().size() != 2 || presence.shape()[0] != x.shape()[0] ||
        presence.shape()[1] != x.shape()[1])
        throw StructuralError("masked_max_pool: expected [B,S,G] and [B,S]");
    const int B = x.shape()[0], S = x.shape()[1], G = x.shape()[2];
    std::vector<float> v(static_cast<size_t>(B) * G, 0.0f);
    std::vector<int> argmax(static_cast<size_t>(B) * G, -1);  // -1 = zero row wins
    for (int b = 0; b < B; ++b)
        for (int g = 0; g < G; ++g) {
            float best = 0.0f;
            int arg = -1;
            for (int s = 0; s < S; ++s) {
                if (presence.value()[static_cast<size_t>(b) * S + s] <= 0.0f) continue;
                const float cand = x.value()[(static_cast<size_t>(b) * S + s) * G + g];
                if (cand > best) {
                    best = cand;
                    arg = s;
                }
            }
            v[static_cast<size_t>(b) * G + g] = best;
            argmax[static_cast<size_t>(b) * G + g] = arg;
        }
    return make_op({B, G}, std::move(v), {x, presence}, [B, S, G, argmax](Node& nd) {
        auto& px = *nd.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (int b = 0; b < B; ++b)
            for (int g = 0; g < G; ++g) {
                const int s = argmax[static_cast<size_t>(b) * G + g];
                if (s >= 0)
                    px.grad[(static_cast<size_t>(b) * S + s) * G + g] += nd.grad[static_cast<size_t>(b) * G + g];
            }
    });
}

inline constexpr float kMaskSentinel = -1e9f;

// Row-wise log-softmax with a 0/1 legality mask: masked logits are shifted by
// the -1e9 sentinel before normalization so their probability underflows to
// exactly 0 and their gradient stays exactly 0.
inline Tensor masked_log_softmax(const Tensor& logits, const Tensor& mask) {
    same_shape(logits, mask, "masked_log_softmax");
    if (logits.shape().size() != 2) throw StructuralError("masked_log_softmax: expected [B,K]");
    const int B = logits.shape()[0], K = logits.shape()[1];
    for (int b = 0; b < B; ++b) {
        bool any = false;
        for (int k = 0; k < K; ++k) any = any || mask.value()[static_cast<size_t>(b) * K + k] > 0.0f;
        if (!any) throw InputError("masked_log_softmax: all actions masked");
    }
    std::vector<float> v(static_cast<size_t>(B) * K);
    for (int b = 0; b < B; ++b) {
        const float* lr = logits.value().data() + static_cast<size_t>(b) * K;
        const float* mr = mask.value().data() + static_cast<size_t>(b) * K;
        float zmax = -std::numeric_limits<float>::infinity();
        for (int k = 0; k < K; ++k) {
            const float z = lr[k] + (mr[k] > 0.0f ? 0.0f : kMaskSentinel);
            zmax = std::max(zmax, z);
        }
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
            const float z = lr[k] + (mr[k] > 0.0f ? 0.0f : kMaskSentinel);
            sum += std::exp(static_cast<double>(z - zmax));
        }
        const float lse = zmax + static_cast<float>(std::log(sum));
        for (int k = 0; k < K; ++k) {
            const float z = lr[k] + (mr[k] > 0.0f ? 0.0f : kMaskSentinel);
            v[static_cast<size_t>(b) * K + k] = z - lse;
        }
    }
    return make_op(logits.shape(), std::move(v), {logits, mask}, [B, K](Node& nd) {
        auto& pl = *nd.parents[0];
        if (!pl.requires_grad) return;
        pl.ensure_grad();
        for (int b = 0; b < B; ++b) {
            const float* out = nd.value.data() + static_cast<size_t>(b) * K;
            const float* g = nd.grad.data() + static_cast<size_t>(b) * K;
            float gsum = 0.0f;
            for (int k = 0; k < K; ++k) gsum += g[k];
            float* pg = pl.grad.data() + static_cast<size_t>(b) * K;
            for (int k = 0; k < K; ++k) pg[k] += g[k] - std::exp(out[k]) * gsum;
        }
    });
}

// [B,K] + indices[B] -> [B]
inline Tensor gather(const Tensor& x, const std::vector<int>& indices) {
    if (x.shape().size() != 2 || static_cast<int>(indices.size()) != x.shape()[0])
        throw StructuralError("gather: expected [B,K] with B indices");
    const int B = x.shape()[0], K = x.shape()[1];
    std::vector<float> v(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
        if (indices[b] < 0 || indices[b] >= K) throw StructuralError("gather: index out of range");
        v[b] = x.value()[static_cast<size_t>(b) * K + indices[b]];
    }
    return make_op({B}, std::move(v), {x}, [B, K, indices](Node& nd) {
        auto& px = *nd.parents[0];
        px.ensure_grad();
        for (int b = 0; b < B; ++b) px.grad[static_cast<size_t>(b) * K + indices[b]] += nd.grad[b];
    });
}

// [B,K] -> [B]
inline Tensor sum_last(const Tensor& x) {
    if (x.shape().size() != 2) throw StructuralError("sum_last: expected [B,K]");
    const int B = x.shape()[0], K = x.shape()[1];
    std::vector<float> v(static_cast<size_t>(B), 0.0f);
    for (int b = 0; b < B; ++b)
        for (int k = 0; k < K; ++k) v[b] += x.value()[static_cast<size_t>(b) * K + k];
    return make_op({B}, std::move(v), {x}, [B, K](Node& nd) {
        auto& px = *nd.parents[0];
        px.ensure_grad();
        for (int b = 0; b < B; ++b)
            for (int k = 0; k < K; ++k) px.grad[static_cast<size_t>(b) * K + k] += nd.grad[b];
    });
}

// Scalar: sum(x*w)/sum(w) with constant non-negative weights.
inline Tensor weighted_mean(const Tensor& x, const std::vector<float>& wts) {
    if (x.shape().size() != 1 || static_cast<int>(wts.size()) != x.shape()[0])
        throw StructuralError("weighted_mean: expected [B] with B weights");
    double wsum = 0.0, acc = 0.0;
    for (size_t i = 0; i < wts.size(); ++i) {
        wsum += wts[i];
        acc += static_cast<double>(x.value()[i]) * wts[i];
    }
    if (wsum <= 0.0) throw InputError("weighted_mean: weights sum to zero");
    std::vector<float> v{static_cast<float>(acc / wsum)};
    return make_op({1}, std::move(v), {x}, [wts, wsum](Node& nd) {
        auto& px = *nd.parents[0];
        px.ensure_grad();
        const float g = nd.grad[0];
        for (size_t i = 0; i < wts.size(); ++i)
            px.grad[i] += g * static_cast<float>(wts[i] / wsum);
    });
}

inline Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.value()) acc += v;
    return make_op({1}, {static_cast<float>(acc)}, {x}, [](Node& nd) {
        auto& px = *nd.parents[0];
        px.ensure_grad();
        for (size_t i = 0; i < px.grad.size(); ++i) px.grad[i] += nd.grad[0];
    });
}

}  // namespace tensor_ops

}  // namespace aet
