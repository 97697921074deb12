#pragma once

#include <Eigen/Dense>

#include <array>
#include <random>
#include <vector>

namespace comaze {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

struct LayerShape {
  int rows = 0;  // outputs
  int cols = 0;  // inputs
};

// Fully connected in -> hidden -> hidden -> out network with tanh hidden
// activations and a linear head. Parameters live in one flat vector (layer
// by layer: weights column-major, then bias) so optimisers, Polyak averaging
// and finite-difference checks can treat a network as a single array.
// Batches are column-major: one sample per column.
class MlpNetwork {
 public:
  struct Tape {
    Matrix input;
    Matrix h1;
    Matrix h2;
  };

  MlpNetwork() = default;
  MlpNetwork(int inputs, int hidden, int outputs);

  // Hidden layers U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the output layer gets
  // the same draw scaled by output_scale and zero bias.
  void initialize(Rng& rng, double output_scale);

  int inputs() const { return shapes_[0].cols; }
  int outputs() const { return shapes_[2].rows; }
  int hidden() const { return shapes_[0].rows; }
  const std::array<LayerShape, 3>& shapes() const { return shapes_; }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  Eigen::Map<const Matrix> weights(int layer) const;
  Eigen::Map<Matrix> weights(int layer);
  Eigen::Map<const Vector> bias(int layer) const;
  Eigen::Map<Vector> bias(int layer);

  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, Tape& tape) const;

  // Given dL/d(output), returns dL/d(parameters); writes dL/d(input) when
  // requested.
  Vector backward(const Tape& tape, const Matrix& output_grad, Matrix* input_grad = nullptr) const;

  // dL/d(input) only, skipping the parameter gradient.
  Matrix input_gradient(const Tape& tape, const Matrix& output_grad) const;

  bool all_finite() const { return params_.allFinite(); }

 private:
  Eigen::Index weight_offset(int layer) const;
  Eigen::Index bias_offset(int layer) const;

  std::array<LayerShape, 3> shapes_{};
  Vector params_;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators for one parameter group.
struct AdamState {
  Vector m;
  Vector v;
  long long step = 0;

  explicit AdamState(Eigen::Index n = 0) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

void adam_step(Vector& params, const Vector& grad, AdamState& state, const AdamConfig& cfg);

}  // namespace comaze
