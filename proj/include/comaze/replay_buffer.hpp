#pragma once

#include "comaze/mlp.hpp"
#include "comaze/tray_physics.hpp"

#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

namespace comaze {

struct Transition {
  Observation state{};
  double action = 0.0;
  double reward = 0.0;
  Observation next_state{};
  bool terminal = false;
};

// FIFO experience store. Once full, the oldest transition is evicted first.
class ReplayBuffer {
 public:
  static constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

  explicit ReplayBuffer(std::size_t capacity = 1000);

  void push(const Transition& t);
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  void clear() { items_.clear(); }

  // Uniform sampling with replacement over the current contents, so a batch
  // can be drawn from a buffer smaller than the batch.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

}  // namespace comaze
