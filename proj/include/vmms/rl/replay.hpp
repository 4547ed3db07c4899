#pragma once

// Fixed-capacity FIFO replay memory. Observations are shared between the
// next_obs of one transition and the obs of the following one.

#include <memory>
#include <vector>

#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "../observe.hpp"
#include "../world.hpp"

namespace vmms::rl {

struct Transition {
    std::shared_ptr<const Observation> obs;
    PrivilegedState priv;
    Action action;
    double reward = 0.0;
    std::shared_ptr<const Observation> next_obs;
    PrivilegedState next_priv;
    bool done = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity)
    {
        if (capacity == 0) throw logic_error("replay capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
    }

    void push(Transition t)
    {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[cursor_] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
        ++inserted_;
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t inserted() const { return inserted_; }

    /// i-th oldest stored transition.
    const Transition& at(std::size_t i) const
    {
        if (i >= items_.size()) throw logic_error("replay index out of range");
        return items_[items_.size() < capacity_ ? i : (cursor_ + i) % capacity_];
    }

    /// Uniform sample with replacement.
    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const
    {
        if (items_.empty()) throw logic_error("sample from empty replay buffer");
        std::vector<const Transition*> out(n);
        for (auto& p : out) p = &items_[rng.index(items_.size())];
        return out;
    }

private:
    std::size_t capacity_;
    std::vector<Transition> items_;
    std::size_t cursor_ = 0;
    std::uint64_t inserted_ = 0;
};

} // namespace vmms::rl
