#pragma once

// Reference computations shared by the unit tests and the acceptance run.
// Nothing here calls into the code paths it is used to check.

#include "comaze/sac_agent.hpp"
#include "comaze/sac_losses.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace comaze::oracle {

struct GradientCheck {
  std::string name;
  double max_rel_error = 0.0;
  Eigen::Index worst = -1;
  Eigen::Index checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps gradients
// that are zero up to rounding from dividing noise by noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of loss() over every entry of params, compared with
// the analytic gradient. params is restored afterwards.
inline GradientCheck central_difference(const std::string& name, Vector& params, const Vector& analytic,
                                        const std::function<double()>& loss, double h = 1e-5) {
  GradientCheck out{name};
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double keep = params(i);
    params(i) = keep + h;
    const double up = loss();
    params(i) = keep - h;
    const double down = loss();
    params(i) = keep;
    const double err = relative_error(analytic(i), (up - down) / (2 * h));
    if (err > out.max_rel_error) {
      out.max_rel_error = err;
      out.worst = i;
    }
    ++out.checked;
  }
  return out;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

inline Vector random_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

// One random "point" for every parameter group of a SAC agent: fresh
// parameters with output layers at full scale, a random minibatch, and a
// finite-difference comparison of each loss against its analytic gradient.
// Points where the log-std clamp is active are redrawn.
inline std::vector<GradientCheck> sac_gradient_point(std::uint64_t seed, int batch = 12, int hidden = 32) {
  Rng rng(seed);
  MlpNetwork actor(8, hidden, 2);
  MlpNetwork q1(9, hidden, 1);
  MlpNetwork q2(9, hidden, 1);
  MlpNetwork v(8, hidden, 1);
  const LogStdBounds bounds;
  Matrix states;
  Vector eps;
  for (;;) {
    actor.initialize(rng, 1.0);
    states = random_matrix(8, batch, rng, 1.2);
    eps = random_normal(batch, rng);
    const PolicySample s = sample_policy(actor, states, eps, bounds);
    if (!s.log_std_clamped.any()) break;
  }
  q1.initialize(rng, 1.0);
  q2.initialize(rng, 1.0);
  v.initialize(rng, 1.0);
  std::uniform_real_distribution<double> ua(0.05, 1.5);
  const double alpha = ua(rng);
  const Vector q_targets = random_normal(batch, rng);
  const Vector actions = random_matrix(batch, 1, rng, 0.99);
  const Matrix q_in = critic_input(states, actions);

  std::vector<GradientCheck> out;
  {
    const LossGrad g = regression_loss(q1, q_in, q_targets);
    out.push_back(central_difference("q1", q1.parameters(), g.grad,
                                     [&] { return regression_loss(q1, q_in, q_targets).loss; }));
  }
  {
    const LossGrad g = regression_loss(q2, q_in, q_targets);
    out.push_back(central_difference("q2", q2.parameters(), g.grad,
                                     [&] { return regression_loss(q2, q_in, q_targets).loss; }));
  }
  {
    const Vector v_targets = random_normal(batch, rng);
    const LossGrad g = regression_loss(v, states, v_targets);
    out.push_back(central_difference("v", v.parameters(), g.grad,
                                     [&] { return regression_loss(v, states, v_targets).loss; }));
  }
  {
    const ActorLoss g = actor_loss(actor, q1, q2, states, eps, alpha, bounds);
    out.push_back(central_difference("actor", actor.parameters(), g.grad, [&] {
      return actor_loss(actor, q1, q2, states, eps, alpha, bounds).loss;
    }));
  }
  {
    const Vector logp = sample_policy(actor, states, eps, bounds).log_prob;
    std::uniform_real_distribution<double> ul(-2.0, 1.0);
    Vector log_alpha(1);
    log_alpha(0) = ul(rng);
    Vector analytic(1);
    analytic(0) = alpha_loss(log_alpha(0), logp, -1.0).grad;
    out.push_back(central_difference("log_alpha", log_alpha, analytic,
                                     [&] { return alpha_loss(log_alpha(0), logp, -1.0).loss; }));
  }
  return out;
}

// Pearson correlation, written out the textbook way.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

// Proportional mapping by hand: gain 2 on the angle error, clipped to [-1, 1].
inline double proportional(double phi_human, double phi) {
  const double a = 2.0 * (phi_human - phi);
  return a > 1.0 ? 1.0 : (a < -1.0 ? -1.0 : a);
}

struct ProportionalCase {
  double phi_human;
  double phi;
  double expected;
};

// Worked by hand: a = clamp(2 (phi_human - phi), -1, 1).
inline constexpr ProportionalCase kProportionalCases[] = {
    {0.0, 0.0, 0.0},       {0.1, 0.0, 0.2},        {-0.1, 0.0, -0.2},    {0.1, 0.1, 0.0},
    {0.1, -0.1, 0.4},      {-0.1, 0.1, -0.4},      {0.05, 0.02, 0.06},   {0.02, 0.05, -0.06},
    {0.0, 0.08, -0.16},    {0.08, 0.0, 0.16},      {0.25, 0.0, 0.5},     {0.5, 0.0, 1.0},
    {-0.5, 0.0, -1.0},     {1.0, 0.0, 1.0},        {-1.0, 0.0, -1.0},    {0.6, 0.05, 1.0},
    {0.3, -0.3, 1.0},      {-0.3, 0.3, -1.0},      {0.45, 0.0, 0.9},     {-0.2, 0.15, -0.7},
};

}  // namespace comaze::oracle
