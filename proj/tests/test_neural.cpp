#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "pinch/neural.hpp"

using namespace pinch::nn;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = n(rng);
  return m;
}

double max_relative_fd_error(const MlpModel& model, const Matrix& x, const Matrix& t, LossKind loss) {
  const auto g = gradient(model, x, t, loss);
  MlpModel probe = model;
  auto theta = flatten_parameters(model);
  std::vector<double> analytic;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < g.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < g.weights[l].cols(); ++c) analytic.push_back(g.weights[l](r, c));
    for (Eigen::Index r = 0; r < g.biases[l].size(); ++r) analytic.push_back(g.biases[l](r));
  }
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    assign_parameters(probe, theta);
    const double up = loss_value(loss, forward_cache(probe, x).post.back(), t);
    theta[i] = keep - h;
    assign_parameters(probe, theta);
    const double down = loss_value(loss, forward_cache(probe, x).post.back(), t);
    theta[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("quadratic single-weight gradient") {
  // y = w x with w = 1, x = 3, target 6: loss (3 - 6)^2, dL/dw = 2 (3 - 6) 3 = -18
  auto m = MlpModel::create({1, 1}, 0);
  m.weights[0](0, 0) = 1.0;
  const auto g = gradient(m, Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 6.0), LossKind::MSE);
  CHECK(g.loss == doctest::Approx(9.0));
  CHECK(g.weights[0](0, 0) == doctest::Approx(-18.0));
  CHECK(g.biases[0](0) == doctest::Approx(-6.0));
}

TEST_CASE("backpropagation matches central finite differences") {
  std::mt19937_64 rng(5);
  const std::vector<std::vector<int>> shapes{{3, 4, 2}, {6, 32, 32, 1}, {2, 8, 16, 8, 3}, {5, 1}};
  for (const auto& shape : shapes) {
    for (Activation act : {Activation::Tanh, Activation::ReLU}) {
      auto m = MlpModel::create(shape, rng());
      m.hidden = act;
      for (auto& b : m.biases) b = random_matrix(static_cast<int>(b.size()), 1, rng).col(0) * 0.1;
      const Matrix x = random_matrix(shape.front(), 7, rng);
      const Matrix t = random_matrix(shape.back(), 7, rng);
      m.fit_normalization(x);
      for (LossKind loss : {LossKind::MSE, LossKind::Huber}) {
        const double err = max_relative_fd_error(m, x, t, loss);
        CHECK(err < 1e-4);
      }
    }
  }
}

TEST_CASE("input gradient matches finite differences through the normalization") {
  std::mt19937_64 rng(9);
  auto m = MlpModel::create({3, 10, 2}, 4);
  m.hidden = Activation::Tanh;
  Matrix x = random_matrix(3, 5, rng);
  m.fit_normalization(x * 3.0);
  const Matrix t = random_matrix(2, 5, rng);
  const auto cache = forward_cache(m, x);
  Matrix dx;
  backward(m, cache, loss_gradient(LossKind::MSE, cache.post.back(), t), &dx);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double numeric = (loss_value(LossKind::MSE, forward_cache(m, xp).post.back(), t) -
                            loss_value(LossKind::MSE, forward_cache(m, xm).post.back(), t)) /
                           (2 * h);
    CHECK(dx(i) == doctest::Approx(numeric).epsilon(1e-5));
  }
}

TEST_CASE("zero residual gives zero gradient") {
  std::mt19937_64 rng(3);
  const auto m = MlpModel::create({4, 8, 2}, 11);
  const Matrix x = random_matrix(4, 6, rng);
  const Matrix y = forward(m, x);
  const auto g = gradient(m, x, y, LossKind::MSE);
  CHECK(g.loss == 0.0);
  for (const auto& w : g.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  for (const auto& b : g.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("learns a linear map to the least-squares optimum") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(1, 256), y(1, 256);
  for (int i = 0; i < 256; ++i) {
    x(0, i) = u(rng);
    y(0, i) = 2.0 * x(0, i);
  }
  auto m = MlpModel::create({1, 16, 1}, 2);
  m.fit_normalization(x);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 200;
  cfg.seed = 3;
  const auto trace = train(m, x, y, cfg);
  REQUIRE(trace.epoch_loss.size() == 200);
  // least-squares oracle fits this noiseless data exactly
  CHECK(loss_value(LossKind::MSE, forward(m, x), y) < 1e-3);
  CHECK(trace.epoch_loss.back() < trace.epoch_loss.front());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(6);
  auto m = MlpModel::create({3, 5, 2}, 8);
  const auto before = m;
  const Matrix x = random_matrix(3, 40, rng), t = random_matrix(2, 40, rng);
  for (OptimizerKind k : {OptimizerKind::SGD, OptimizerKind::Adam}) {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.optimizer = k;
    cfg.epochs = 3;
    train(m, x, t, cfg);
    CHECK(identical(m, before));
  }
}

TEST_CASE("duplicating a full-batch dataset leaves the SGD trajectory unchanged") {
  std::mt19937_64 rng(12);
  const Matrix x = random_matrix(2, 20, rng), t = random_matrix(1, 20, rng);
  Matrix x2(2, 40), t2(1, 40);
  x2 << x, x;
  t2 << t, t;
  auto a = MlpModel::create({2, 6, 1}, 4);
  auto b = a;
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::SGD;
  cfg.learning_rate = 0.05;
  cfg.epochs = 20;
  cfg.batch_size = 20;
  train(a, x, t, cfg);
  cfg.batch_size = 40;
  train(b, x2, t2, cfg);
  const auto pa = flatten_parameters(a), pb = flatten_parameters(b);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-10));
}

TEST_CASE("seeded training is deterministic") {
  std::mt19937_64 rng(13);
  const Matrix x = random_matrix(3, 50, rng), t = random_matrix(2, 50, rng);
  auto a = MlpModel::create({3, 12, 2}, 99), b = MlpModel::create({3, 12, 2}, 99);
  CHECK(identical(a, b));
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 17;
  const auto ta = train(a, x, t, cfg), tb = train(b, x, t, cfg);
  CHECK(ta.epoch_loss == tb.epoch_loss);
  CHECK(identical(a, b));
  auto c = MlpModel::create({3, 12, 2}, 100);
  CHECK_FALSE(identical(a, c));
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(14);
  auto m = MlpModel::create({4, 7, 3}, 21, Activation::Tanh);
  m.fit_normalization(random_matrix(4, 30, rng));
  const auto path = std::filesystem::temp_directory_path() / "pinch_mlp_roundtrip.json";
  save_model(m, path);
  const auto back = load_model(path);
  CHECK(identical(m, back));
  const Matrix x = random_matrix(4, 9, rng);
  CHECK((forward(m, x).array() == forward(back, x).array()).all());
  std::filesystem::remove(path);
  CHECK_THROWS(model_from_json(nlohmann::json{{"format", "other"}}));
}

TEST_CASE("identity and zero networks") {
  auto m = MlpModel::create({3, 3}, 0);
  m.weights[0] = Matrix::Identity(3, 3);
  Vector x(3);
  x << 1.5, -2.0, 0.25;
  CHECK((forward(m, x) - x).norm() == 0.0);
  auto z = MlpModel::create({3, 8, 2}, 1);
  for (auto& w : z.weights) w.setZero();
  CHECK(forward(z, x).norm() == 0.0);
}

TEST_CASE("forward pass counter counts samples") {
  const auto m = MlpModel::create({2, 4, 1}, 0);
  reset_forward_pass_count();
  forward(m, Vector(Vector::Zero(2)));
  CHECK(forward_pass_count() == 1);
  forward(m, Matrix(Matrix::Zero(2, 5)));
  CHECK(forward_pass_count() == 6);
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(MlpModel::create({3}, 0), std::invalid_argument);
  CHECK_THROWS_AS(MlpModel::create({3, 0, 1}, 0), std::invalid_argument);
  const auto m = MlpModel::create({2, 1}, 0);
  CHECK_THROWS_AS(forward(m, Vector(Vector::Zero(3))), std::invalid_argument);
  CHECK_THROWS_AS(gradient(m, Matrix(2, 0), Matrix(1, 0), LossKind::MSE), std::invalid_argument);
  auto bad = m;
  bad.weights[0](0, 0) = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(bad, Matrix::Ones(2, 4), Matrix::Ones(1, 4), cfg), TrainingDiverged);
}
