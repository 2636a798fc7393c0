#include <doctest.h>

#include "neurofuse/nn.hpp"

using namespace neurofuse;
using nn::Architecture;

namespace {

Architecture small_arch() {
  Architecture a;
  a.input_len = 32;
  a.conv1_filters = 2;
  a.conv1_kernel = 3;
  a.conv2_filters = 2;
  a.conv2_kernel = 3;
  a.dense_units = 4;
  return a;
}

RowMatrixXd random_matrix(Index rows, Index cols, Rng& rng) {
  RowMatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

RowMatrixXd onehot_rows(const std::vector<int>& labels, Index classes = 5) {
  RowMatrixXd y = RowMatrixXd::Zero(static_cast<Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Index>(i), labels[i]) = 1.0;
  return y;
}

double loss_of(const nn::ModelParams<double>& m, const RowMatrixXd& x, const RowMatrixXd& y) {
  return nn::cross_entropy(nn::forward(m, x).probs, y);
}

// Rows of class k carry a bump at positions 3k..3k+2.
void toy_problem(Index n, std::uint64_t seed, RowMatrixXd& x, RowMatrixXd& y) {
  Rng rng(seed);
  x.resize(n, 16);
  std::vector<int> labels;
  for (Index i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % 5);
    labels.push_back(k);
    for (Index j = 0; j < 16; ++j) x(i, j) = 0.1 * rng.normal();
    for (Index j = 3 * k; j < 3 * k + 3; ++j) x(i, j) += 3.0;
  }
  y = onehot_rows(labels);
}

}  // namespace

TEST_CASE("layer length law") {
  const Architecture a;
  CHECK(a.conv1_len() == 735);
  CHECK(a.pool1_len() == 367);
  CHECK(a.conv2_len() == 363);
  CHECK(a.pool2_len() == 181);
  CHECK(a.flat_len() == 11584);
  Architecture tiny = a;
  tiny.input_len = 12;
  CHECK_THROWS_AS(tiny.validate(), ValidationError);
}

TEST_CASE("zero weights give uniform probabilities") {
  const auto m = nn::ModelParams<double>::zeros(Architecture{});
  Rng rng(1);
  const auto c = nn::forward(m, random_matrix(3, 739, rng));
  CHECK(c.probs.rows() == 3);
  for (Index i = 0; i < c.probs.size(); ++i) CHECK(c.probs.data()[i] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("hand-computed forward pass") {
  Architecture a;
  a.input_len = 4;
  a.conv1_filters = 1;
  a.conv1_kernel = 2;
  a.conv2_filters = 1;
  a.conv2_kernel = 1;
  a.pool = 1;
  a.dense_units = 1;
  a.classes = 2;
  auto m = nn::ModelParams<double>::zeros(a);
  m.conv1.weight << 0.5, 1.0;   // [2.5, 4, 5.5]
  m.conv2.weight << 2.0;
  m.conv2.bias << -5.0;         // relu -> [0, 3, 6]
  m.dense.weight << 1, 1, 1;
  m.dense.bias << -4.0;         // 5
  m.output.weight << 1, 0;
  RowMatrixXd x(1, 4);
  x << 1, 2, 3, 4;
  const auto c = nn::forward(m, x);
  CHECK(c.conv1(0, 0) == 2.5);
  CHECK(c.conv1(2, 0) == 5.5);
  CHECK(c.conv2(0, 0) == 0.0);
  CHECK(c.hidden(0, 0) == 5.0);
  const double p0 = 1.0 / (1.0 + std::exp(-5.0));
  CHECK(c.probs(0, 0) == doctest::Approx(p0).epsilon(1e-15));
  CHECK(c.probs(0, 1) == doctest::Approx(1.0 - p0).epsilon(1e-12));
}

TEST_CASE("max pooling keeps the larger of each pair and drops the tail") {
  RowMatrixXd x(5, 1);
  x << 1, 3, 2, 5, 4;
  RowMatrixXd y;
  std::vector<std::uint8_t> arg;
  nn::detail::maxpool_forward(x, 1, 5, 2, y, arg);
  REQUIRE(y.rows() == 2);
  CHECK(y(0, 0) == 3);
  CHECK(y(1, 0) == 5);
}

TEST_CASE("softmax is shift invariant and normalized") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    RowMatrixXd a = random_matrix(3, 5, rng) * 10.0;
    RowMatrixXd b = a.array() + rng.uniform(-500, 500);
    nn::detail::softmax_rows(a);
    nn::detail::softmax_rows(b);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    for (Index i = 0; i < 3; ++i) CHECK(a.row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
  RowMatrixXd big(1, 2);
  big << 1000, 0;
  nn::detail::softmax_rows(big);
  CHECK(big.allFinite());
  CHECK(big(0, 0) == 1.0);
}

TEST_CASE("cross entropy values") {
  const RowMatrixXd uniform = RowMatrixXd::Constant(1, 5, 0.2);
  CHECK(nn::cross_entropy(uniform, onehot_rows({3})) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  RowMatrixXd sure = RowMatrixXd::Zero(1, 5);
  sure(0, 1) = 1.0;
  CHECK(nn::cross_entropy(sure, onehot_rows({1})) == 0.0);
  RowMatrixXd two(2, 5);
  two << 0.5, 0.2, 0.1, 0.1, 0.1,
         0.1, 0.1, 0.1, 0.1, 0.6;
  CHECK(nn::cross_entropy(two, onehot_rows({0, 2})) ==
        doctest::Approx((-std::log(0.5) - std::log(0.1)) / 2).epsilon(1e-15));
  CHECK_THROWS_AS(nn::cross_entropy(two, onehot_rows({0})), ValidationError);
}

TEST_CASE("analytic gradients match central differences") {
  const Architecture a = small_arch();
  auto m = nn::init_params<double>(a, 5);
  Rng rng(6);
  for (auto* t : m.tensors()) *t += 0.05 * random_matrix(t->rows(), t->cols(), rng);
  const RowMatrixXd x = random_matrix(4, 32, rng);
  const RowMatrixXd y = onehot_rows({0, 3, 4, 1});
  auto cache = nn::forward(m, x);
  const auto grads = nn::backward(m, cache, y);

  const double h = 1e-6;
  double worst = 0.0;
  auto params = m.tensors();
  auto g = grads.tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (Index i = 0; i < params[t]->size(); ++i) {
      double& w = params[t]->data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_of(m, x, y);
      w = saved - h;
      const double down = loss_of(m, x, y);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g[t]->data()[i];
      const double rel = std::abs(numeric - analytic) / std::max(1e-7, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("output-layer gradient is (p - y) / B") {
  const Architecture a = small_arch();
  const auto m = nn::init_params<double>(a, 7);
  Rng rng(8);
  const RowMatrixXd x = random_matrix(6, 32, rng);
  const RowMatrixXd y = onehot_rows({0, 1, 2, 3, 4, 0});
  auto cache = nn::forward(m, x);
  const RowMatrixXd expect = (cache.probs - y).colwise().sum() / 6.0;
  const auto grads = nn::backward(m, cache, y);
  CHECK((grads.output.bias - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("a zero batch only moves the biases") {
  const Architecture a = small_arch();
  const auto m = nn::init_params<double>(a, 9);
  const RowMatrixXd x = RowMatrixXd::Zero(3, 32);
  auto cache = nn::forward(m, x);
  const auto grads = nn::backward(m, cache, onehot_rows({1, 1, 1}));
  CHECK(grads.conv1.weight.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.conv2.weight.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.output.bias.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("adam first step and zero gradient") {
  const Architecture a = small_arch();
  auto p = nn::init_params<double>(a, 10);
  const auto before = p;
  auto grads = nn::ModelParams<double>::zeros(a);
  grads.dense.weight.setConstant(0.37);
  grads.output.bias.setConstant(-2.0);
  auto state = nn::AdamState<double>::fresh(a);
  nn::adam_step(p, grads, state);
  // first bias-corrected step is lr * g / (|g| + eps)
  CHECK((p.dense.weight - before.dense.weight).array().maxCoeff() == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK((p.output.bias - before.output.bias).array().minCoeff() == doctest::Approx(0.001).epsilon(1e-6));
  CHECK(p.conv1.weight == before.conv1.weight);
  CHECK(p.version == before.version + 1);
  CHECK(state.t == 1);
}

TEST_CASE("stale caches are rejected") {
  const Architecture a = small_arch();
  auto m = nn::init_params<double>(a, 11);
  Rng rng(12);
  auto cache = nn::forward(m, random_matrix(2, 32, rng));
  auto state = nn::AdamState<double>::fresh(a);
  nn::adam_step(m, nn::ModelParams<double>::zeros(a), state);
  CHECK_THROWS_WITH_AS(nn::backward(m, cache, onehot_rows({0, 1})), doctest::Contains("stale"),
                       ValidationError);
}

TEST_CASE("argmax ties resolve to the lowest class") {
  RowMatrixXd p(3, 5);
  p << 0.2, 0.2, 0.2, 0.2, 0.2,
       0.1, 0.4, 0.1, 0.4, 0.0,
       0.0, 0.0, 0.0, 0.0, 1.0;
  CHECK(nn::argmax_rows(p) == std::vector<int>{0, 1, 4});
}

TEST_CASE("scaler examples") {
  RowMatrixXd d(2, 2);
  d << 1, 2,
       3, 2;
  const auto s = nn::scaler_fit(d);
  CHECK(s.mean == Eigen::Vector2d(2, 2));
  CHECK(s.std[0] == 1.0);
  CHECK(s.std[1] == nn::kStdFloor);
  CHECK(s.floored_columns == std::vector<Index>{1});
  RowMatrixXd expect(2, 2);
  expect << -1, 0,
             1, 0;
  CHECK(nn::scaler_transform(d, s) == expect);
  CHECK(nn::scaler_inverse_transform(nn::scaler_transform(d, s), s) == d);

  RowMatrixXd three(3, 1);
  three << 0, 10, 20;
  const std::vector<Index> rows = {1, 2};
  const auto sub = nn::scaler_fit(three, rows);
  CHECK(sub.mean[0] == 15.0);
  CHECK(sub.std[0] == 5.0);
}

TEST_CASE("scaled training columns have zero mean and unit variance") {
  Rng rng(13);
  const RowMatrixXd d = (random_matrix(500, 7, rng) * 4.0).array() + 3.0;
  const auto z = nn::scaler_transform(d, nn::scaler_fit(d));
  for (Index c = 0; c < 7; ++c) {
    CHECK(std::abs(z.col(c).mean()) < 1e-12);
    CHECK(std::abs(z.col(c).squaredNorm() / 500 - 1.0) < 1e-12);
  }
}

TEST_CASE("training separates a toy problem") {
  RowMatrixXd x, y, tx, ty;
  toy_problem(500, 14, x, y);
  toy_problem(200, 15, tx, ty);
  Architecture a;
  a.input_len = 16;
  a.conv1_filters = 8;
  a.conv2_filters = 8;
  a.dense_units = 16;
  nn::TrainOptions opt;
  opt.epochs = 40;
  opt.batch_size = 50;
  opt.adam.learning_rate = 3e-3;
  opt.seed = 1;
  nn::DataView train_view{&x, &y, {}, nullptr};
  const auto result = nn::train<double>(train_view, a, opt);
  REQUIRE(result.history.size() == 40);
  CHECK(result.history.back().mean_loss < result.history.front().mean_loss);
  nn::DataView test_view{&tx, nullptr, {}, nullptr};
  const auto pred = nn::predict(result.model, test_view);
  int correct = 0;
  for (Index i = 0; i < tx.rows(); ++i) correct += ty(i, pred[static_cast<std::size_t>(i)]) == 1.0;
  CHECK(correct / 200.0 >= 0.99);
}

TEST_CASE("training is deterministic and micro-batching does not change the gradient") {
  RowMatrixXd x, y;
  toy_problem(120, 16, x, y);
  Architecture a;
  a.input_len = 16;
  a.conv1_filters = 3;
  a.conv2_filters = 3;
  a.dense_units = 8;
  nn::TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 40;
  opt.seed = 3;
  nn::DataView view{&x, &y, {}, nullptr};
  const auto r1 = nn::train<double>(view, a, opt);
  const auto r2 = nn::train<double>(view, a, opt);
  opt.micro_batch = 7;
  const auto r3 = nn::train<double>(view, a, opt);
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(*r1.model.tensors()[t] == *r2.model.tensors()[t]);
    CHECK((*r1.model.tensors()[t] - *r3.model.tensors()[t]).cwiseAbs().maxCoeff() < 1e-12);
  }
  opt.micro_batch = 50;
  opt.seed = 4;
  const auto r4 = nn::train<double>(view, a, opt);
  CHECK(r4.model.dense.weight != r1.model.dense.weight);
}

TEST_CASE("zero epochs return the initial weights") {
  RowMatrixXd x, y;
  toy_problem(10, 17, x, y);
  Architecture a;
  a.input_len = 16;
  nn::TrainOptions opt;
  opt.epochs = 0;
  opt.seed = 5;
  const auto r = nn::train<double>(nn::DataView{&x, &y, {}, nullptr}, a, opt);
  CHECK(r.history.empty());
  const auto init = nn::init_params<double>(a, derive_seed(5, 0));
  CHECK(r.model.dense.weight == init.dense.weight);
}

TEST_CASE("training input validation") {
  RowMatrixXd x, y;
  toy_problem(10, 18, x, y);
  Architecture a;  // expects 739 columns
  nn::TrainOptions opt;
  CHECK_THROWS_AS(nn::train<double>(nn::DataView{&x, &y, {}, nullptr}, a, opt), ValidationError);
  a.input_len = 16;
  x(0, 0) = std::nan("");
  CHECK_THROWS_AS(nn::train<double>(nn::DataView{&x, &y, {}, nullptr}, a, opt), NumericalError);
}

TEST_CASE("float and double forward passes agree") {
  const auto m = nn::init_params<double>(Architecture{}, 19);
  Rng rng(20);
  const RowMatrixXd x = random_matrix(4, 739, rng);
  const auto pd = nn::forward(m, x).probs;
  const auto pf = nn::forward(m.cast<float>(), RowMatrix<float>(x.cast<float>())).probs;
  CHECK((pd - pf.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("Glorot init bounds and zero biases") {
  const Architecture a;
  const auto m = nn::init_params<double>(a, 21);
  CHECK(m.conv1.weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (5 + 32 * 5)));
  CHECK(m.dense.weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (11584 + 128)));
  CHECK(m.dense.bias.cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.dense.weight.cwiseAbs().maxCoeff() > 0.0);
}
