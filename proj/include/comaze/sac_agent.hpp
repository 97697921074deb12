#pragma once

#include "comaze/mlp.hpp"
#include "comaze/replay_buffer.hpp"
#include "comaze/sac_losses.hpp"
#include "comaze/tray_physics.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace comaze {

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double learning_rate = 3e-4;
  int batch_size = 256;
  int hidden = 32;
  double target_entropy = -1.0;
  double initial_log_alpha = 0.0;
  LogStdBounds log_std{};
  double output_init_scale = 1e-2;
  // Per-dimension divisor mapping raw observations to roughly [-1, 1].
  Observation state_scale{0.25, 0.25, 0.6, 0.6, 0.1, 0.1, 0.4, 0.4};

  void validate() const;
};

struct LossReport {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double v_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double entropy_estimate = 0.0;
  double alpha = 0.0;
};

struct ActionSample {
  double action = 0.0;
  double log_prob = 0.0;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anything that maps a batch of raw observations (8 x B) to deterministic
// actions. Implementations must be safe to call concurrently.
class DeterministicPolicy {
 public:
  virtual ~DeterministicPolicy() = default;
  virtual Vector act_batch(const Matrix& observations) const = 0;
};

// Soft actor-critic with a tanh-squashed Gaussian actor, twin critics, a soft
// value network with a Polyak-averaged target, and learned temperature.
class SacAgent : public DeterministicPolicy {
 public:
  explicit SacAgent(const SacConfig& cfg = {}, std::uint64_t init_seed = 0);

  ActionSample act_stochastic(const Observation& obs, Rng& rng) const;
  // Same as act_stochastic with the standard normal draw supplied.
  ActionSample act_with_noise(const Observation& obs, double eps) const;
  double act_deterministic(const Observation& obs) const;
  Vector act_batch(const Matrix& observations) const override;

  // One step of every objective on a minibatch drawn from the buffer.
  LossReport gradient_update(const ReplayBuffer& buffer, Rng& rng);

  Matrix normalize(const Matrix& observations) const;
  Vector normalize(const Observation& obs) const;

  const SacConfig& config() const { return cfg_; }
  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }
  long long update_count() const { return update_count_; }
  void set_update_count(long long n) { update_count_ = n; }

  MlpNetwork& actor() { return actor_; }
  const MlpNetwork& actor() const { return actor_; }
  MlpNetwork& q1() { return q1_; }
  const MlpNetwork& q1() const { return q1_; }
  MlpNetwork& q2() { return q2_; }
  const MlpNetwork& q2() const { return q2_; }
  MlpNetwork& value() { return v_; }
  const MlpNetwork& value() const { return v_; }
  MlpNetwork& value_target() { return v_target_; }
  const MlpNetwork& value_target() const { return v_target_; }

  struct OptimizerState {
    AdamState actor;
    AdamState q1;
    AdamState q2;
    AdamState value;
    AdamState log_alpha;
  };
  OptimizerState& optimizer() { return opt_; }
  const OptimizerState& optimizer() const { return opt_; }

  // FNV-1a over every parameter and optimiser word; used to prove that a
  // frozen agent was not touched.
  std::uint64_t parameter_hash() const;

 private:
  void check_observation(const Observation& obs) const;

  SacConfig cfg_;
  MlpNetwork actor_;
  MlpNetwork q1_;
  MlpNetwork q2_;
  MlpNetwork v_;
  MlpNetwork v_target_;
  double log_alpha_ = 0.0;
  long long update_count_ = 0;
  OptimizerState opt_;
};

}  // namespace comaze
