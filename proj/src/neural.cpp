#include "pinch/neural.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace pinch::nn {

namespace {

thread_local std::uint64_t g_forward_passes = 0;

Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
  }
  return z;
}

// derivative expressed through the pre-activation z and the output y
Matrix activation_grad(Activation a, const Matrix& z, const Matrix& y) {
  switch (a) {
    case Activation::Identity: return Matrix::Ones(z.rows(), z.cols());
    case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
  }
  return Matrix::Ones(z.rows(), z.cols());
}

Matrix standardize(const MlpModel& m, const Matrix& x) {
  if (x.rows() != m.input_size()) throw std::invalid_argument("input dimension does not match the first layer");
  return ((x.colwise() - m.input_mean).array().colwise() / m.input_scale.array()).matrix();
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  throw std::runtime_error("unknown activation '" + s + "'");
}

}  // namespace

MlpModel MlpModel::create(const std::vector<int>& sizes, std::uint64_t seed, Activation output) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  for (int s : sizes)
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  MlpModel m;
  m.layer_sizes = sizes;
  m.output = output;
  m.seed = seed;
  m.input_mean = Vector::Zero(sizes.front());
  m.input_scale = Vector::Ones(sizes.front());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const bool last = l + 2 == sizes.size();
    const double stddev = last ? std::sqrt(2.0 / (fan_in + fan_out)) : std::sqrt(2.0 / fan_in);
    Matrix w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = stddev * normal(rng);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Vector::Zero(fan_out));
  }
  return m;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

void MlpModel::fit_normalization(const Matrix& x) {
  if (x.rows() != input_size() || x.cols() == 0) throw std::invalid_argument("normalization data has the wrong shape");
  input_mean = x.rowwise().mean();
  input_scale.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double var = (x.row(r).array() - input_mean(r)).square().mean();
    const double sd = std::sqrt(var);
    input_scale(r) = sd > 1e-12 ? sd : 1.0;
  }
}

bool identical(const MlpModel& a, const MlpModel& b) {
  if (a.layer_sizes != b.layer_sizes || a.hidden != b.hidden || a.output != b.output || a.seed != b.seed) return false;
  if (a.weights.size() != b.weights.size()) return false;
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
  };
  for (std::size_t l = 0; l < a.weights.size(); ++l)
    if (!same(a.weights[l], b.weights[l]) || !same(a.biases[l], b.biases[l])) return false;
  return same(a.input_mean, b.input_mean) && same(a.input_scale, b.input_scale);
}

Matrix forward(const MlpModel& model, const Matrix& x) {
  g_forward_passes += static_cast<std::uint64_t>(x.cols());
  Matrix h = standardize(model, x);
  const std::size_t layers = model.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = (model.weights[l] * h).colwise() + model.biases[l];
    h = activate(l + 1 == layers ? model.output : model.hidden, z);
  }
  return h;
}

Vector forward(const MlpModel& model, const Vector& x) {
  const Matrix y = forward(model, Matrix(x));
  return y.col(0);
}

std::uint64_t forward_pass_count() { return g_forward_passes; }
void reset_forward_pass_count() { g_forward_passes = 0; }

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
    g.biases.push_back(Vector::Zero(model.biases[l].size()));
  }
  return g;
}

ForwardCache forward_cache(const MlpModel& model, const Matrix& x) {
  ForwardCache cache;
  cache.post.push_back(standardize(model, x));
  const std::size_t layers = model.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = (model.weights[l] * cache.post.back()).colwise() + model.biases[l];
    Matrix y = activate(l + 1 == layers ? model.output : model.hidden, z);
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(y));
  }
  return cache;
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& output_grad, Matrix* input_grad) {
  const std::size_t layers = model.weights.size();
  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  Matrix delta = output_grad;
  for (std::size_t l = layers; l-- > 0;) {
    const Activation act = l + 1 == layers ? model.output : model.hidden;
    delta = delta.cwiseProduct(activation_grad(act, cache.pre[l], cache.post[l + 1]));
    g.weights[l] = delta * cache.post[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    delta = model.weights[l].transpose() * delta;
  }
  if (input_grad) *input_grad = (delta.array().colwise() / model.input_scale.array()).matrix();
  return g;
}

double loss_value(LossKind kind, const Matrix& prediction, const Matrix& target) {
  const Matrix r = prediction - target;
  const double n = static_cast<double>(r.size());
  if (kind == LossKind::MSE) return r.squaredNorm() / n;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double a = std::abs(r(i));
    total += a <= 1.0 ? 0.5 * a * a : a - 0.5;
  }
  return total / n;
}

Matrix loss_gradient(LossKind kind, const Matrix& prediction, const Matrix& target) {
  const Matrix r = prediction - target;
  const double n = static_cast<double>(r.size());
  if (kind == LossKind::MSE) return 2.0 * r / n;
  return r.cwiseMax(-1.0).cwiseMin(1.0) / n;
}

Gradients gradient(const MlpModel& model, const Matrix& x, const Matrix& target, LossKind kind) {
  if (x.cols() == 0) throw std::invalid_argument("gradient of an empty batch");
  if (target.rows() != model.output_size() || target.cols() != x.cols())
    throw std::invalid_argument("target shape does not match the batch");
  const auto cache = forward_cache(model, x);
  const Matrix& y = cache.post.back();
  const double loss = loss_value(kind, y, target);
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss");
  auto g = backward(model, cache, loss_gradient(kind, y, target));
  g.loss = loss;
  return g;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto& w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) flat.push_back(model.biases[l](r));
  }
  return flat;
}

void assign_parameters(MlpModel& model, const std::vector<double>& flat) {
  if (flat.size() != model.parameter_count()) throw std::invalid_argument("parameter vector has the wrong length");
  std::size_t i = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    auto& w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[i++];
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) model.biases[l](r) = flat[i++];
  }
}

Optimizer::Optimizer(const MlpModel& model, OptimizerKind kind, double learning_rate, double weight_decay)
    : kind_(kind), lr_(learning_rate), weight_decay_(weight_decay) {
  if (kind_ == OptimizerKind::Adam) {
    const auto z = Gradients::zeros_like(model);
    m_w_ = v_w_ = z.weights;
    m_b_ = v_b_ = z.biases;
  }
}

void Optimizer::step(MlpModel& model, const Gradients& grads) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Matrix gw = grads.weights[l];
    if (weight_decay_ != 0.0) gw += weight_decay_ * model.weights[l];
    const Vector& gb = grads.biases[l];
    if (kind_ == OptimizerKind::SGD) {
      model.weights[l] -= lr_ * gw;
      model.biases[l] -= lr_ * gb;
      continue;
    }
    m_w_[l] = beta1 * m_w_[l] + (1.0 - beta1) * gw;
    v_w_[l] = beta2 * v_w_[l] + (1.0 - beta2) * gw.cwiseProduct(gw);
    m_b_[l] = beta1 * m_b_[l] + (1.0 - beta1) * gb;
    v_b_[l] = beta2 * v_b_[l] + (1.0 - beta2) * gb.cwiseProduct(gb);
    model.weights[l].array() -= lr_ * (m_w_[l].array() / c1) / ((v_w_[l].array() / c2).sqrt() + eps);
    model.biases[l].array() -= lr_ * (m_b_[l].array() / c1) / ((v_b_[l].array() / c2).sqrt() + eps);
  }
}

double train_epoch(MlpModel& model, Optimizer& opt, const Matrix& x, const Matrix& target, const TrainConfig& config,
                   std::mt19937_64& rng) {
  const Eigen::Index n = x.cols();
  if (n == 0) throw std::invalid_argument("training on an empty dataset");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  double weighted = 0.0;
  for (Eigen::Index start = 0; start < n; start += config.batch_size) {
    const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
    Matrix bx(x.rows(), b), bt(target.rows(), b);
    for (Eigen::Index j = 0; j < b; ++j) {
      bx.col(j) = x.col(order[static_cast<std::size_t>(start + j)]);
      bt.col(j) = target.col(order[static_cast<std::size_t>(start + j)]);
    }
    const auto g = gradient(model, bx, bt, config.loss);
    opt.step(model, g);
    weighted += g.loss * static_cast<double>(b);
  }
  return weighted / static_cast<double>(n);
}

TrainTrace train(MlpModel& model, const Matrix& x, const Matrix& target, const TrainConfig& config) {
  if (!(config.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  Optimizer opt(model, config.optimizer, config.learning_rate, config.weight_decay);
  std::mt19937_64 rng(config.seed);
  TrainTrace trace;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    try {
      loss = train_epoch(model, opt, x, target, config, rng);
    } catch (const std::runtime_error& e) {
      throw TrainingDiverged(epoch, std::string("training diverged: ") + e.what());
    }
    if (!std::isfinite(loss)) throw TrainingDiverged(epoch, "training diverged: non-finite epoch loss");
    trace.epoch_loss.push_back(loss);
  }
  return trace;
}

namespace {

nlohmann::json row_major(const Matrix& m) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

nlohmann::json vec_json(const Vector& v) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vec_from(const nlohmann::json& j, Eigen::Index n, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) throw std::runtime_error(std::string("checkpoint: bad ") + what);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

nlohmann::json model_to_json(const MlpModel& model) {
  nlohmann::json doc;
  doc["format"] = "pinch-mlp";
  doc["version"] = 1;
  doc["layer_sizes"] = model.layer_sizes;
  doc["hidden_activation"] = activation_name(model.hidden);
  doc["output_activation"] = activation_name(model.output);
  doc["seed"] = model.seed;
  doc["input_mean"] = vec_json(model.input_mean);
  doc["input_scale"] = vec_json(model.input_scale);
  doc["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l)
    doc["layers"].push_back({{"weights", row_major(model.weights[l])}, {"bias", vec_json(model.biases[l])}});
  return doc;
}

MlpModel model_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pinch-mlp" || doc.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported format or version");
  MlpModel m;
  m.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
  if (m.layer_sizes.size() < 2) throw std::runtime_error("checkpoint: need at least two layer sizes");
  m.hidden = activation_from(doc.at("hidden_activation").get<std::string>());
  m.output = activation_from(doc.at("output_activation").get<std::string>());
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.input_mean = vec_from(doc.at("input_mean"), m.layer_sizes.front(), "input_mean");
  m.input_scale = vec_from(doc.at("input_scale"), m.layer_sizes.front(), "input_scale");
  const auto& layers = doc.at("layers");
  if (layers.size() + 1 != m.layer_sizes.size()) throw std::runtime_error("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int rows = m.layer_sizes[l + 1], cols = m.layer_sizes[l];
    const auto& w = layers[l].at("weights");
    if (static_cast<int>(w.size()) != rows * cols) throw std::runtime_error("checkpoint: weight count mismatch");
    Matrix mat(rows, cols);
    std::size_t i = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) mat(r, c) = w[i++].get<double>();
    m.weights.push_back(std::move(mat));
    m.biases.push_back(vec_from(layers[l].at("bias"), rows, "bias"));
  }
  return m;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model).dump() << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace pinch::nn
