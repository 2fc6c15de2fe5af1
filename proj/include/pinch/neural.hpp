#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace pinch::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Identity, ReLU, Tanh };
enum class LossKind { MSE, Huber };
enum class OptimizerKind { SGD, Adam };

/// Fully connected network. Samples are columns: a batch is an (inputs x B) matrix.
/// Inputs are standardized with the stored statistics before the first layer.
struct MlpModel {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;  // weights[l] is (layer_sizes[l+1] x layer_sizes[l])
  std::vector<Vector> biases;
  Activation hidden = Activation::ReLU;
  Activation output = Activation::Identity;
  Vector input_mean;
  Vector input_scale;
  std::uint64_t seed = 0;

  /// He-normal hidden layers, Xavier-normal output layer, zero biases.
  static MlpModel create(const std::vector<int>& sizes, std::uint64_t seed, Activation output = Activation::Identity);

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;

  /// Per-feature mean and standard deviation of the columns of `x` (unit scale for constant features).
  void fit_normalization(const Matrix& x);
};

/// Bitwise equality of topology, parameters and normalization.
bool identical(const MlpModel& a, const MlpModel& b);

Vector forward(const MlpModel& model, const Vector& x);
Matrix forward(const MlpModel& model, const Matrix& x);

/// Sample forward passes made on this thread since the last reset.
std::uint64_t forward_pass_count();
void reset_forward_pass_count();

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  double loss = 0.0;

  static Gradients zeros_like(const MlpModel& model);
};

struct ForwardCache {
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // post[0] is the standardized input
};

ForwardCache forward_cache(const MlpModel& model, const Matrix& x);

/// Reverse-mode pass given dLoss/dOutput. When `input_grad` is set it receives
/// dLoss/dInput with respect to the raw (unstandardized) input.
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& output_grad,
                   Matrix* input_grad = nullptr);

/// Mean over all batch elements; Huber uses delta = 1.
double loss_value(LossKind kind, const Matrix& prediction, const Matrix& target);
Matrix loss_gradient(LossKind kind, const Matrix& prediction, const Matrix& target);

/// Gradient of the mean loss over the batch. Throws std::runtime_error on a
/// non-finite loss and std::invalid_argument on an empty batch.
Gradients gradient(const MlpModel& model, const Matrix& x, const Matrix& target, LossKind kind);

std::vector<double> flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, const std::vector<double>& flat);

class Optimizer {
 public:
  Optimizer(const MlpModel& model, OptimizerKind kind, double learning_rate, double weight_decay = 0.0);

  void step(MlpModel& model, const Gradients& grads);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  OptimizerKind kind_;
  double lr_;
  double weight_decay_;
  long t_ = 0;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vector> m_b_, v_b_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 100;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::MSE;
  double weight_decay = 0.0;
};

struct TrainTrace {
  std::vector<double> epoch_loss;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what) : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

/// One shuffled pass over the columns of (x, target); returns the sample-weighted mean batch loss.
double train_epoch(MlpModel& model, Optimizer& opt, const Matrix& x, const Matrix& target, const TrainConfig& config,
                   std::mt19937_64& rng);

/// Trains in place; shuffling is seeded by config.seed. Throws TrainingDiverged on a non-finite loss.
TrainTrace train(MlpModel& model, const Matrix& x, const Matrix& target, const TrainConfig& config);

nlohmann::json model_to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& doc);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace pinch::nn
