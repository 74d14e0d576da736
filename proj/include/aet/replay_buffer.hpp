#pragma once

// Per-side trajectory buffer. Holds fixed-length segments, enforces the
// sample-reuse cap, and evicts FIFO under pressure. Single consumer (the
// side's trainer); producers are the sampler workers.

#include <deque>
#include <vector>

#include "aet/ppo.hpp"
#include "aet/rng.hpp"

namespace aet {

struct Segment {
    Side side = Side::Mouse;
    int agent_id = 0;
    std::vector<Transition> steps;  // padded to nominal_length, padding has weight 0
    int nominal_length = 0;
    int uses = 0;

    int real_transitions() const {
        int n = 0;
        for (const auto& t : steps)
            if (t.weight > 0.0f) ++n;
        return n;
    }
};

// Slice one agent trajectory into fixed-length segments; the final partial
// segment is padded with inert (weight 0, done) copies of its last step.
inline std::vector<Segment> segment_trajectory(Side side, int agent_id, std::vector<Transition> steps,
                                               int length) {
    if (length < 1) throw ConfigError("segment_trajectory: length must be >= 1");
    std::vector<Segment> out;
    for (size_t base = 0; base < steps.size(); base += static_cast<size_t>(length)) {
        Segment seg;
        seg.side = side;
        seg.agent_id = agent_id;
        seg.nominal_length = length;
        const size_t end = std::min(steps.size(), base + static_cast<size_t>(length));
        seg.steps.assign(std::make_move_iterator(steps.begin() + static_cast<long>(base)),
                         std::make_move_iterator(steps.begin() + static_cast<long>(end)));
        while (static_cast<int>(seg.steps.size()) < length) {
            Transition pad = seg.steps.back();
            pad.weight = 0.0f;
            pad.done = true;
            seg.steps.push_back(std::move(pad));
        }
        out.push_back(std::move(seg));
    }
    return out;
}

class ReplayBuffer {
  public:
    ReplayBuffer(Side side, int capacity_segments, double reuse_cap)
        : side_(side), capacity_(capacity_segments), reuse_cap_(reuse_cap) {}

    Side side() const { return side_; }

    void push(Segment seg) {
        if (seg.side != side_) throw InputError("replay buffer: wrong side");
        pending_transitions_ += seg.real_transitions();
        segs_.push_back(std::move(seg));
        while (static_cast<int>(segs_.size()) > capacity_) {
            pending_transitions_ -= segs_.front().real_transitions();
            segs_.pop_front();
        }
    }

    int available_transitions() const { return pending_transitions_; }
    size_t segments() const { return segs_.size(); }

    // Pops whole segments until at least batch_size real transitions are
    // gathered. Each popped segment is re-queued once with probability
    // (reuse_cap - 1), so expected uses average the cap and never exceed 2.
    std::vector<Transition> pop_batch(int batch_size, Rng& rng) {
        if (pending_transitions_ < batch_size) return {};
        std::vector<Transition> batch;
        batch.reserve(static_cast<size_t>(batch_size) + 256);
        while (static_cast<int>(batch.size()) < batch_size && !segs_.empty()) {
            Segment seg = std::move(segs_.front());
            segs_.pop_front();
            pending_transitions_ -= seg.real_transitions();
            for (auto& t : seg.steps)
                if (t.weight > 0.0f) batch.push_back(t);
            seg.uses += 1;
            if (seg.uses < 2 && reuse_cap_ > 1.0 && rng.uniform() < reuse_cap_ - 1.0) {
                pending_transitions_ += seg.real_transitions();
                segs_.push_back(std::move(seg));
            }
        }
        return batch;
    }

  private:
    Side side_;
    int capacity_;
    double reuse_cap_;
    int pending_transitions_ = 0;
    std::deque<Segment> segs_;
};

}  // namespace aet
