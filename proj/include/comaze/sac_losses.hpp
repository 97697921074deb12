#pragma once

#include "comaze/mlp.hpp"

namespace comaze {

// The individual SAC objectives as pure functions of their parameters and a
// frozen batch, each returning the loss together with its exact gradient.
// SacAgent composes them; the gradient-check tests call them directly.

struct LogStdBounds {
  double min = -20.0;
  double max = 2.0;
};

// Squashed Gaussian sample a = tanh(mean + std * eps) for a batch of
// normalised states (8 x B), with the tanh-corrected log density.
struct PolicySample {
  MlpNetwork::Tape tape;
  Vector mean;
  Vector log_std;
  Vector std;
  Eigen::Array<bool, Eigen::Dynamic, 1> log_std_clamped;
  Vector eps;
  Vector pre_tanh;
  Vector action;
  Vector log_prob;
};

PolicySample sample_policy(const MlpNetwork& actor, const Matrix& states, const Vector& eps,
                           const LogStdBounds& bounds);

// log N(u; mean, std) - log(1 - tanh(u)^2), evaluated in a form that stays
// finite when tanh saturates.
double squashed_log_prob(double eps, double log_std, double pre_tanh);

// Stacks normalised states (8 x B) and actions (1 x B) into critic inputs.
Matrix critic_input(const Matrix& states, const Vector& actions);

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

// 0.5 * mean((net(inputs) - targets)^2), used for both critics and the value
// network.
LossGrad regression_loss(const MlpNetwork& net, const Matrix& inputs, const Vector& targets);

struct MinQ {
  Vector value;
  // Per sample: true when q1 supplied the minimum.
  Eigen::Array<bool, Eigen::Dynamic, 1> from_q1;
  MlpNetwork::Tape tape1;
  MlpNetwork::Tape tape2;
};

MinQ min_q(const MlpNetwork& q1, const MlpNetwork& q2, const Matrix& inputs);

// Soft value regression targets min(q1, q2)(s, a~) - alpha * log pi(a~|s).
Vector soft_value_targets(const MinQ& q, const PolicySample& sample, double alpha);

struct ActorLoss {
  double loss = 0.0;
  Vector grad;
  double entropy_estimate = 0.0;
};

// mean(alpha * log pi(a~|s) - min(q1, q2)(s, a~)) through the
// reparameterised sample; gradient with respect to the actor parameters.
ActorLoss actor_loss(const MlpNetwork& actor, const MlpNetwork& q1, const MlpNetwork& q2,
                     const Matrix& states, const Vector& eps, double alpha,
                     const LogStdBounds& bounds);

// -alpha * mean(log pi + target_entropy) with log pi held fixed; gradient with
// respect to log_alpha.
struct AlphaLoss {
  double loss = 0.0;
  double grad = 0.0;
};

AlphaLoss alpha_loss(double log_alpha, const Vector& log_prob, double target_entropy);

}  // namespace comaze
