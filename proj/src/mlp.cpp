#include "comaze/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace comaze {

namespace {

// tanh via one vectorised exp; absolute error stays at rounding level.
Matrix fast_tanh(const Matrix& z) {
  const Eigen::ArrayXXd t = (-2.0 * z.array().abs()).exp();
  return z.array().sign() * (1.0 - t) / (1.0 + t);
}

}  // namespace

MlpNetwork::MlpNetwork(int inputs, int hidden, int outputs)
    : shapes_{{{hidden, inputs}, {hidden, hidden}, {outputs, hidden}}} {
  if (inputs <= 0 || hidden <= 0 || outputs <= 0) {
    throw std::invalid_argument("MlpNetwork: layer sizes must be positive");
  }
  Eigen::Index n = 0;
  for (const auto& s : shapes_) n += static_cast<Eigen::Index>(s.rows) * s.cols + s.rows;
  params_ = Vector::Zero(n);
}

Eigen::Index MlpNetwork::weight_offset(int layer) const {
  Eigen::Index off = 0;
  for (int i = 0; i < layer; ++i) {
    off += static_cast<Eigen::Index>(shapes_[i].rows) * shapes_[i].cols + shapes_[i].rows;
  }
  return off;
}

Eigen::Index MlpNetwork::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<Eigen::Index>(shapes_[layer].rows) * shapes_[layer].cols;
}

Eigen::Map<const Matrix> MlpNetwork::weights(int layer) const {
  return {params_.data() + weight_offset(layer), shapes_[layer].rows, shapes_[layer].cols};
}

Eigen::Map<Matrix> MlpNetwork::weights(int layer) {
  return {params_.data() + weight_offset(layer), shapes_[layer].rows, shapes_[layer].cols};
}

Eigen::Map<const Vector> MlpNetwork::bias(int layer) const {
  return {params_.data() + bias_offset(layer), shapes_[layer].rows};
}

Eigen::Map<Vector> MlpNetwork::bias(int layer) {
  return {params_.data() + bias_offset(layer), shapes_[layer].rows};
}

void MlpNetwork::initialize(Rng& rng, double output_scale) {
  for (int layer = 0; layer < 3; ++layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(shapes_[layer].cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const double scale = layer == 2 ? output_scale : 1.0;
    auto w = weights(layer);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * dist(rng);
    }
    auto b = bias(layer);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = layer == 2 ? 0.0 : dist(rng);
  }
}

Matrix MlpNetwork::forward(const Matrix& input) const {
  Tape tape;
  return forward(input, tape);
}

Matrix MlpNetwork::forward(const Matrix& input, Tape& tape) const {
  if (input.rows() != inputs()) throw std::invalid_argument("MlpNetwork: input size mismatch");
  tape.input = input;
  tape.h1 = fast_tanh((weights(0) * input).colwise() + bias(0));
  tape.h2 = fast_tanh((weights(1) * tape.h1).colwise() + bias(1));
  return (weights(2) * tape.h2).colwise() + bias(2);
}

Vector MlpNetwork::backward(const Tape& tape, const Matrix& output_grad, Matrix* input_grad) const {
  Vector grad(params_.size());
  auto put_weights = [&](int layer, const Matrix& g) {
    Eigen::Map<Matrix>(grad.data() + weight_offset(layer), shapes_[layer].rows,
                       shapes_[layer].cols) = g;
  };
  auto put_bias = [&](int layer, const Vector& g) {
    Eigen::Map<Vector>(grad.data() + bias_offset(layer), shapes_[layer].rows) = g;
  };

  put_weights(2, output_grad * tape.h2.transpose());
  put_bias(2, output_grad.rowwise().sum());

  Matrix dz2 = (weights(2).transpose() * output_grad).array() * (1.0 - tape.h2.array().square());
  put_weights(1, dz2 * tape.h1.transpose());
  put_bias(1, dz2.rowwise().sum());

  Matrix dz1 = (weights(1).transpose() * dz2).array() * (1.0 - tape.h1.array().square());
  put_weights(0, dz1 * tape.input.transpose());
  put_bias(0, dz1.rowwise().sum());

  if (input_grad != nullptr) *input_grad = weights(0).transpose() * dz1;
  return grad;
}

Matrix MlpNetwork::input_gradient(const Tape& tape, const Matrix& output_grad) const {
  Matrix dz2 = (weights(2).transpose() * output_grad).array() * (1.0 - tape.h2.array().square());
  Matrix dz1 = (weights(1).transpose() * dz2).array() * (1.0 - tape.h1.array().square());
  return weights(0).transpose() * dz1;
}

void adam_step(Vector& params, const Vector& grad, AdamState& state, const AdamConfig& cfg) {
  state.step += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  params.array() -= cfg.learning_rate * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

}  // namespace comaze
