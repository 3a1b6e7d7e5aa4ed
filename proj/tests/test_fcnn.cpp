#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "snspd/fcnn.hpp"
#include "snspd/rng.hpp"

using namespace snspd;

namespace {

FcnnModel make_model(std::vector<int> layers) {
  FcnnModel m;
  m.arch.layer_sizes = std::move(layers);
  for (size_t l = 0; l < m.arch.n_layers(); ++l) {
    size_t in = static_cast<size_t>(m.arch.layer_sizes[l]);
    size_t out = static_cast<size_t>(m.arch.layer_sizes[l + 1]);
    m.weights.emplace_back(in * out, 0.0);
    m.biases.emplace_back(out, 0.0);
  }
  m.norm_mean.assign(static_cast<size_t>(m.arch.input_dim()), 0.0);
  m.norm_std.assign(static_cast<size_t>(m.arch.input_dim()), 1.0);
  return m;
}

// x=(0.5,-1), one sigmoid hidden pair, softmax out; reference values computed
// with an independent double-precision implementation.
FcnnModel hand_model() {
  FcnnModel m = make_model({2, 2, 2});
  m.weights[0] = {0.1, -0.2, 0.3, 0.4};
  m.biases[0] = {0.05, -0.05};
  m.weights[1] = {0.2, -0.1, -0.3, 0.25};
  m.biases[1] = {0.0, 0.1};
  return m;
}

const std::vector<double> kHandInput{0.5, -1.0};

double loss_of(const FcnnModel& m, const std::vector<double>& x,
               const std::vector<double>& y) {
  return cross_entropy(forward(m, x), y);
}

LabeledDataset blob_dataset(double center, double sigma, size_t n_per_class,
                            uint64_t seed) {
  LabeledDataset d;
  d.dim = 2;
  CounterRng rng(seed, Stream::nn_shuffle, 7);
  for (int cls = 0; cls < 2; ++cls) {
    double cx = cls == 0 ? -center : center;
    for (size_t i = 0; i < n_per_class; ++i) {
      d.inputs.push_back({cx + sigma * rng.normal(), sigma * rng.normal()});
      d.labels.push_back(cls);
    }
  }
  return d;
}

}  // namespace

TEST_SUITE("fcnn") {

TEST_CASE("zero model is indifferent and ties predict class 0") {
  FcnnModel m = make_model({3, 4, 2});
  auto s = forward(m, {0.3, -0.7, 2.0});
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));
  auto p = predict(m, {0.3, -0.7, 2.0});
  CHECK(p.cls == 0);
  CHECK(p.prob == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("forward matches the hand-computed fixture") {
  auto s = forward(hand_model(), kHandInput);
  CHECK(s[0] == doctest::Approx(0.50956786672383414).epsilon(1e-14));
  CHECK(s[1] == doctest::Approx(0.49043213327616592).epsilon(1e-14));
  auto h = penultimate_activations(hand_model(), kHandInput);
  REQUIRE(h.size() == 2);
  CHECK(h[0] == doctest::Approx(0.57444251681165903).epsilon(1e-14));
  CHECK(h[1] == doctest::Approx(0.42555748318834102).epsilon(1e-14));
}

TEST_CASE("cross entropy values and clamping") {
  CHECK(cross_entropy({0.5, 0.5}, {1.0, 0.0}) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(cross_entropy({0.9, 0.1}, {1.0, 0.0}) ==
        doctest::Approx(0.10536051565782631).epsilon(1e-14));
  CHECK(cross_entropy(forward(hand_model(), kHandInput), {0.0, 1.0}) ==
        doctest::Approx(0.71246837188164547).epsilon(1e-14));
  // A zero probability is clamped at 1e-12 instead of producing inf.
  CHECK(cross_entropy({1.0, 0.0}, {0.0, 1.0}) ==
        doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("softmax is invariant to a common shift of the output biases") {
  FcnnModel m = hand_model();
  auto base = forward(m, kHandInput);
  m.biases[1][0] += 3.7;
  m.biases[1][1] += 3.7;
  auto shifted = forward(m, kHandInput);
  CHECK(shifted[0] == doctest::Approx(base[0]).epsilon(1e-12));
  CHECK(shifted[1] == doctest::Approx(base[1]).epsilon(1e-12));
}

TEST_CASE("backward matches the hand-computed fixture") {
  Gradients g = backward(hand_model(), kHandInput, {0.0, 1.0});
  REQUIRE(g.weights.size() == 2);
  const double dW1[] = {0.29271744784718734, 0.21685041887664686,
                        -0.29271744784718734, -0.21685041887664686};
  const double db1[] = {0.50956786672383414, -0.50956786672383414};
  const double dW0[] = {0.031142025097790876, -0.062284050195581753,
                        -0.021799417568453609, 0.043598835136907217};
  const double db0[] = {0.062284050195581753, -0.043598835136907217};
  for (int i = 0; i < 4; ++i)
    CHECK(g.weights[1][static_cast<size_t>(i)] ==
          doctest::Approx(dW1[i]).epsilon(1e-13));
  for (int i = 0; i < 2; ++i)
    CHECK(g.biases[1][static_cast<size_t>(i)] ==
          doctest::Approx(db1[i]).epsilon(1e-13));
  for (int i = 0; i < 4; ++i)
    CHECK(g.weights[0][static_cast<size_t>(i)] ==
          doctest::Approx(dW0[i]).epsilon(1e-13));
  for (int i = 0; i < 2; ++i)
    CHECK(g.biases[0][static_cast<size_t>(i)] ==
          doctest::Approx(db0[i]).epsilon(1e-13));
}

TEST_CASE("backward agrees with central finite differences") {
  FcnnModel m = make_model({5, 4, 3, 2});
  CounterRng rng(99, Stream::nn_init, 3);
  for (auto& layer : m.weights)
    for (auto& w : layer) w = rng.uniform() - 0.5;
  for (auto& layer : m.biases)
    for (auto& b : layer) b = 0.3 * (rng.uniform() - 0.5);
  std::vector<double> x(5);
  for (auto& v : x) v = 2.0 * rng.uniform() - 1.0;
  std::vector<double> y{0.0, 1.0};

  Gradients g = backward(m, x, y);
  const double h = 1e-6;
  auto check_block = [&](std::vector<double>& params,
                         const std::vector<double>& analytic) {
    REQUIRE(params.size() == analytic.size());
    for (size_t i = 0; i < params.size(); ++i) {
      double keep = params[i];
      params[i] = keep + h;
      double up = loss_of(m, x, y);
      params[i] = keep - h;
      double dn = loss_of(m, x, y);
      params[i] = keep;
      double fd = (up - dn) / (2 * h);
      CHECK(std::abs(analytic[i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  };
  for (size_t l = 0; l < m.arch.n_layers(); ++l) {
    check_block(m.weights[l], g.weights[l]);
    check_block(m.biases[l], g.biases[l]);
  }
}

TEST_CASE("training separates well-separated blobs") {
  auto train_set = blob_dataset(2.0, 0.5, 150, 11);
  auto test_set = blob_dataset(2.0, 0.5, 100, 22);
  NetworkArch arch;
  arch.layer_sizes = {2, 8, 2};
  Hyper hyper;
  TrainResult r = train(train_set, arch, hyper, 1234);
  REQUIRE(r.epoch_loss.size() == static_cast<size_t>(hyper.epochs));
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  EvalResult e = evaluate(r.model, test_set);
  CHECK(e.accuracy >= 0.97);
  CHECK(e.confusion[0][0] + e.confusion[0][1] == 100);
  CHECK(e.confusion[1][0] + e.confusion[1][1] == 100);
  size_t correct = e.confusion[0][0] + e.confusion[1][1];
  CHECK(e.accuracy == doctest::Approx(correct / 200.0).epsilon(1e-12));
  CHECK(r.model.train_seed == 1234);
}

TEST_CASE("zero learning rate leaves the loss unchanged") {
  auto data = blob_dataset(1.0, 0.5, 40, 5);
  NetworkArch arch;
  arch.layer_sizes = {2, 4, 2};
  Hyper hyper;
  hyper.lr = 0.0;
  hyper.epochs = 5;
  TrainResult r = train(data, arch, hyper, 9);
  // Per-epoch shuffling reorders the loss sum, so allow accumulation jitter.
  for (double l : r.epoch_loss)
    CHECK(l == doctest::Approx(r.epoch_loss.front()).epsilon(1e-12));
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  auto data = blob_dataset(1.5, 0.6, 60, 3);
  NetworkArch arch;
  arch.layer_sizes = {2, 6, 2};
  Hyper hyper;
  hyper.epochs = 8;
  TrainResult a = train(data, arch, hyper, 77);
  TrainResult b = train(data, arch, hyper, 77);
  TrainResult c = train(data, arch, hyper, 78);
  REQUIRE(a.model.weights.size() == b.model.weights.size());
  for (size_t l = 0; l < a.model.weights.size(); ++l) {
    CHECK(a.model.weights[l] == b.model.weights[l]);
    CHECK(a.model.biases[l] == b.model.biases[l]);
  }
  CHECK(a.epoch_loss == b.epoch_loss);
  bool any_diff = false;
  for (size_t l = 0; l < a.model.weights.size(); ++l)
    if (a.model.weights[l] != c.model.weights[l]) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("train input validation") {
  LabeledDataset empty;
  NetworkArch arch;
  arch.layer_sizes = {2, 4, 2};
  CHECK_THROWS_AS(train(empty, arch, {}, 1), std::invalid_argument);
  NetworkArch bad;
  bad.layer_sizes = {2, 4, 3};
  auto data = blob_dataset(1.0, 0.5, 20, 1);
  CHECK_THROWS_AS(train(data, bad, {}, 1), std::invalid_argument);
  Hyper hyper;
  hyper.batch_size = 0;
  CHECK_THROWS_AS(train(data, arch, hyper, 1), std::invalid_argument);
}

TEST_CASE("model save/load round trip is lossless") {
  auto data = blob_dataset(1.5, 0.5, 60, 8);
  NetworkArch arch;
  arch.layer_sizes = {2, 5, 3, 2};
  Hyper hyper;
  hyper.epochs = 6;
  TrainResult r = train(data, arch, hyper, 4242);
  std::string path = "/tmp/snspd_test_model.json";
  save_model(r.model, path);
  FcnnModel loaded = load_model(path);
  CHECK(loaded.arch.layer_sizes == r.model.arch.layer_sizes);
  CHECK(loaded.train_seed == r.model.train_seed);
  for (size_t l = 0; l < r.model.weights.size(); ++l) {
    CHECK(loaded.weights[l] == r.model.weights[l]);
    CHECK(loaded.biases[l] == r.model.biases[l]);
  }
  CHECK(loaded.norm_mean == r.model.norm_mean);
  CHECK(loaded.norm_std == r.model.norm_std);
  auto s0 = forward(r.model, data.inputs[0]);
  auto s1 = forward(loaded, data.inputs[0]);
  CHECK(s0 == s1);
  std::remove(path.c_str());
}

TEST_CASE("model load rejects malformed files") {
  CHECK_THROWS_AS(load_model("/tmp/snspd_missing_model.json"), std::runtime_error);
  std::string path = "/tmp/snspd_corrupt_model.json";
  {
    std::ofstream f(path);
    f << "{ not json";
  }
  CHECK_THROWS_AS(load_model(path), std::runtime_error);
  {
    std::ofstream f(path);
    f << "{\"format_version\": 1, \"arch\": [2, 2], \"weights\": [[[1.0]]], ";
    f << "\"biases\": [[0.0, 0.0]], ";
    f << "\"input_norm\": {\"means\": [0, 0], \"stds\": [1, 1]}, \"train_seed\": 0}";
  }
  CHECK_THROWS_AS(load_model(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("penultimate export writes one row per sample") {
  FcnnModel m = make_model({2, 3, 2});
  LabeledDataset data;
  data.dim = 2;
  data.inputs = {{0.0, 0.0}, {1.0, -1.0}, {0.5, 0.5}, {-2.0, 3.0}};
  data.labels = {0, 1, 1, 0};
  std::string path = "/tmp/snspd_test_penultimate.csv";
  export_penultimate_features(m, data, path);

  std::ifstream f(path);
  REQUIRE(f.good());
  std::string line;
  REQUIRE(std::getline(f, line));
  CHECK(line == "f0,f1,f2,label");
  size_t rows = 0;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 4);
    // Zero model: every hidden activation is sigmoid(0) = 0.5.
    for (int i = 0; i < 3; ++i)
      CHECK(std::stod(cells[static_cast<size_t>(i)]) ==
            doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::stoi(cells[3]) == data.labels[rows]);
    ++rows;
  }
  CHECK(rows == data.inputs.size());
  std::remove(path.c_str());
}

}  // TEST_SUITE
