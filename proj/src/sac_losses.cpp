#include "comaze/sac_losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace comaze {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

double squashed_log_prob(double eps, double log_std, double pre_tanh) {
  // log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))
  const double log_jacobian = 2.0 * (std::numbers::ln2 - pre_tanh - softplus(-2.0 * pre_tanh));
  return -0.5 * eps * eps - log_std - kHalfLog2Pi - log_jacobian;
}

PolicySample sample_policy(const MlpNetwork& actor, const Matrix& states, const Vector& eps,
                           const LogStdBounds& bounds) {
  if (actor.outputs() != 2) throw std::invalid_argument("sample_policy: actor must output 2 rows");
  if (eps.size() != states.cols()) throw std::invalid_argument("sample_policy: eps size mismatch");
  PolicySample s;
  const Matrix out = actor.forward(states, s.tape);
  const Eigen::Index n = states.cols();
  s.mean = out.row(0).transpose();
  s.log_std.resize(n);
  s.log_std_clamped.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double raw = out(1, i);
    s.log_std(i) = std::clamp(raw, bounds.min, bounds.max);
    s.log_std_clamped(i) = raw < bounds.min || raw > bounds.max;
  }
  s.std = s.log_std.array().exp();
  s.eps = eps;
  s.pre_tanh = s.mean.array() + s.std.array() * eps.array();
  s.action = s.pre_tanh.array().tanh();
  s.log_prob.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.log_prob(i) = squashed_log_prob(eps(i), s.log_std(i), s.pre_tanh(i));
  }
  return s;
}

Matrix critic_input(const Matrix& states, const Vector& actions) {
  Matrix in(states.rows() + 1, states.cols());
  in.topRows(states.rows()) = states;
  in.row(states.rows()) = actions.transpose();
  return in;
}

LossGrad regression_loss(const MlpNetwork& net, const Matrix& inputs, const Vector& targets) {
  MlpNetwork::Tape tape;
  const Matrix pred = net.forward(inputs, tape);
  const double n = static_cast<double>(inputs.cols());
  const Matrix diff = pred - targets.transpose();
  LossGrad out;
  out.loss = 0.5 * diff.squaredNorm() / n;
  out.grad = net.backward(tape, diff / n);
  return out;
}

MinQ min_q(const MlpNetwork& q1, const MlpNetwork& q2, const Matrix& inputs) {
  MinQ m;
  const Matrix v1 = q1.forward(inputs, m.tape1);
  const Matrix v2 = q2.forward(inputs, m.tape2);
  const Eigen::Index n = inputs.cols();
  m.value.resize(n);
  m.from_q1.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.from_q1(i) = v1(0, i) <= v2(0, i);
    m.value(i) = m.from_q1(i) ? v1(0, i) : v2(0, i);
  }
  return m;
}

Vector soft_value_targets(const MinQ& q, const PolicySample& sample, double alpha) {
  return q.value - alpha * sample.log_prob;
}

ActorLoss actor_loss(const MlpNetwork& actor, const MlpNetwork& q1, const MlpNetwork& q2,
                     const Matrix& states, const Vector& eps, double alpha,
                     const LogStdBounds& bounds) {
  const PolicySample s = sample_policy(actor, states, eps, bounds);
  const MinQ q = min_q(q1, q2, critic_input(states, s.action));
  const Eigen::Index n = states.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  // dQmin/da through whichever critic supplied the minimum.
  Matrix sel1 = Matrix::Zero(1, n);
  Matrix sel2 = Matrix::Zero(1, n);
  for (Eigen::Index i = 0; i < n; ++i) (q.from_q1(i) ? sel1 : sel2)(0, i) = 1.0;
  const Matrix dq_din = q1.input_gradient(q.tape1, sel1) + q2.input_gradient(q.tape2, sel2);
  const Eigen::Index action_row = states.rows();

  Matrix head_grad(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = s.action(i);
    const double dq_da = dq_din(action_row, i);
    const double dq_du = dq_da * (1.0 - a * a);
    const double sigma_eps = s.std(i) * eps(i);
    // log pi depends on u through -log(1 - tanh^2 u), whose derivative is 2a.
    const double dlogp_dmean = 2.0 * a;
    const double dlogp_dlogstd = -1.0 + 2.0 * a * sigma_eps;
    head_grad(0, i) = inv_n * (alpha * dlogp_dmean - dq_du);
    head_grad(1, i) =
        s.log_std_clamped(i) ? 0.0 : inv_n * (alpha * dlogp_dlogstd - dq_du * sigma_eps);
  }

  ActorLoss out;
  out.loss = (alpha * s.log_prob - q.value).mean();
  out.grad = actor.backward(s.tape, head_grad);
  out.entropy_estimate = -s.log_prob.mean();
  return out;
}

AlphaLoss alpha_loss(double log_alpha, const Vector& log_prob, double target_entropy) {
  const double alpha = std::exp(log_alpha);
  const double gap = log_prob.mean() + target_entropy;
  return {-alpha * gap, -alpha * gap};
}

}  // namespace comaze
