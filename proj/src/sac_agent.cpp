#include "comaze/sac_agent.hpp"

#include <cmath>
#include <cstring>

namespace comaze {

namespace {

constexpr int kStateDim = 8;

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw NonFiniteError(std::string("gradient_update: non-finite ") + what);
  }
}

struct Batch {
  Matrix states;
  Vector actions;
  Vector rewards;
  Matrix next_states;
  Vector not_done;
};

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

void fnv_mix(std::uint64_t& h, const Vector& v) {
  fnv_mix(h, v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

}  // namespace

void SacConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("agent: gamma must lie in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("agent: tau must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("agent: learning_rate must be positive");
  if (batch_size <= 0 || hidden <= 0) throw std::invalid_argument("agent: batch_size and hidden must be positive");
  if (!(log_std.min < log_std.max)) throw std::invalid_argument("agent: log_std bounds inverted");
  for (double s : state_scale) {
    if (!(s > 0.0)) throw std::invalid_argument("agent: state_scale entries must be positive");
  }
}

SacAgent::SacAgent(const SacConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg),
      actor_(kStateDim, cfg.hidden, 2),
      q1_(kStateDim + 1, cfg.hidden, 1),
      q2_(kStateDim + 1, cfg.hidden, 1),
      v_(kStateDim, cfg.hidden, 1),
      log_alpha_(cfg.initial_log_alpha) {
  cfg_.validate();
  Rng rng(init_seed);
  actor_.initialize(rng, cfg_.output_init_scale);
  q1_.initialize(rng, cfg_.output_init_scale);
  q2_.initialize(rng, cfg_.output_init_scale);
  v_.initialize(rng, cfg_.output_init_scale);
  v_target_ = v_;
  opt_ = {AdamState(actor_.parameter_count()), AdamState(q1_.parameter_count()),
          AdamState(q2_.parameter_count()), AdamState(v_.parameter_count()), AdamState(1)};
}

double SacAgent::alpha() const { return std::exp(log_alpha_); }

void SacAgent::check_observation(const Observation& obs) const {
  for (double v : obs) {
    if (!std::isfinite(v)) throw std::invalid_argument("SacAgent: non-finite observation");
  }
}

Vector SacAgent::normalize(const Observation& obs) const {
  Vector out(kStateDim);
  for (int i = 0; i < kStateDim; ++i) out(i) = obs[i] / cfg_.state_scale[i];
  return out;
}

Matrix SacAgent::normalize(const Matrix& observations) const {
  Matrix out = observations;
  for (int i = 0; i < kStateDim; ++i) out.row(i) /= cfg_.state_scale[i];
  return out;
}

ActionSample SacAgent::act_with_noise(const Observation& obs, double eps) const {
  check_observation(obs);
  Vector e(1);
  e(0) = eps;
  const PolicySample s = sample_policy(actor_, normalize(obs), e, cfg_.log_std);
  return {s.action(0), s.log_prob(0)};
}

ActionSample SacAgent::act_stochastic(const Observation& obs, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  return act_with_noise(obs, normal(rng));
}

double SacAgent::act_deterministic(const Observation& obs) const {
  check_observation(obs);
  const Matrix out = actor_.forward(normalize(obs));
  return std::tanh(out(0, 0));
}

Vector SacAgent::act_batch(const Matrix& observations) const {
  const Matrix out = actor_.forward(normalize(observations));
  return out.row(0).transpose().unaryExpr([](double u) { return std::tanh(u); });
}

LossReport SacAgent::gradient_update(const ReplayBuffer& buffer, Rng& rng) {
  const auto idx = buffer.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng);
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());

  Batch b{Matrix(kStateDim, n), Vector(n), Vector(n), Matrix(kStateDim, n), Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = buffer[idx[static_cast<std::size_t>(j)]];
    for (int i = 0; i < kStateDim; ++i) {
      b.states(i, j) = t.state[i];
      b.next_states(i, j) = t.next_state[i];
    }
    b.actions(j) = t.action;
    b.rewards(j) = t.reward;
    b.not_done(j) = t.terminal ? 0.0 : 1.0;
  }
  b.states = normalize(b.states);
  b.next_states = normalize(b.next_states);

  std::normal_distribution<double> normal(0.0, 1.0);
  Vector eps(n);
  for (Eigen::Index j = 0; j < n; ++j) eps(j) = normal(rng);

  const AdamConfig adam{cfg_.learning_rate};
  LossReport report;

  // (1) critics regress onto r + gamma * (1 - d) * V_target(s').
  const Vector next_v = v_target_.forward(b.next_states).row(0).transpose();
  const Vector q_targets = b.rewards.array() + cfg_.gamma * b.not_done.array() * next_v.array();
  const Matrix q_in = critic_input(b.states, b.actions);
  const LossGrad l1 = regression_loss(q1_, q_in, q_targets);
  const LossGrad l2 = regression_loss(q2_, q_in, q_targets);
  check_finite(l1.loss, "q1 loss");
  check_finite(l2.loss, "q2 loss");
  adam_step(q1_.parameters(), l1.grad, opt_.q1, adam);
  adam_step(q2_.parameters(), l2.grad, opt_.q2, adam);
  report.q1_loss = l1.loss;
  report.q2_loss = l2.loss;

  // (2) value network regresses onto E[min Q - alpha * log pi].
  const double alpha_now = alpha();
  const PolicySample fresh = sample_policy(actor_, b.states, eps, cfg_.log_std);
  const MinQ mq = min_q(q1_, q2_, critic_input(b.states, fresh.action));
  const LossGrad lv = regression_loss(v_, b.states, soft_value_targets(mq, fresh, alpha_now));
  check_finite(lv.loss, "value loss");
  adam_step(v_.parameters(), lv.grad, opt_.value, adam);
  report.v_loss = lv.loss;

  // (3) actor through the reparameterised sample.
  const ActorLoss la = actor_loss(actor_, q1_, q2_, b.states, eps, alpha_now, cfg_.log_std);
  check_finite(la.loss, "actor loss");
  adam_step(actor_.parameters(), la.grad, opt_.actor, adam);
  report.actor_loss = la.loss;
  report.entropy_estimate = la.entropy_estimate;

  // (4) temperature.
  const AlphaLoss lt = alpha_loss(log_alpha_, fresh.log_prob, cfg_.target_entropy);
  check_finite(lt.loss, "alpha loss");
  Vector log_alpha(1);
  log_alpha(0) = log_alpha_;
  Vector alpha_grad(1);
  alpha_grad(0) = lt.grad;
  adam_step(log_alpha, alpha_grad, opt_.log_alpha, adam);
  log_alpha_ = log_alpha(0);
  report.alpha_loss = lt.loss;

  // (5) Polyak average of the value target.
  v_target_.parameters() = (1.0 - cfg_.tau) * v_target_.parameters() + cfg_.tau * v_.parameters();

  report.alpha = alpha();
  ++update_count_;
  return report;
}

std::uint64_t SacAgent::parameter_hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const MlpNetwork* net : {&actor_, &q1_, &q2_, &v_, &v_target_}) fnv_mix(h, net->parameters());
  fnv_mix(h, &log_alpha_, sizeof(log_alpha_));
  fnv_mix(h, &update_count_, sizeof(update_count_));
  for (const AdamState* s : {&opt_.actor, &opt_.q1, &opt_.q2, &opt_.value, &opt_.log_alpha}) {
    fnv_mix(h, s->m);
    fnv_mix(h, s->v);
    fnv_mix(h, &s->step, sizeof(s->step));
  }
  return h;
}

}  // namespace comaze
