#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "snspd/exec.hpp"

namespace snspd {

struct NetworkArch {
  std::vector<int> layer_sizes{130, 128, 64, 32, 2};  // sigmoid hidden, softmax out

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  size_t n_layers() const { return layer_sizes.size() - 1; }
  void validate() const;
};

struct FcnnModel {
  NetworkArch arch;
  // weights[l] is row-major (layer_sizes[l+1] x layer_sizes[l]).
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> norm_mean;  // per-feature z-score constants
  std::vector<double> norm_std;
  uint64_t train_seed = 0;
};

struct LabeledDataset {
  size_t dim = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;  // class indices; one-hot rows are (1-y, y)
  std::array<std::string, 2> class_names{"class0", "class1"};
};

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

struct Hyper {
  // lr/epochs picked empirically: smaller rates leave most weight
  // initializations stuck on the symmetric softmax plateau for hundreds of
  // epochs, and training past ~100 epochs trades held-out accuracy for
  // memorization on the hardest (sub-nm) datasets.
  double lr = 0.2;
  int epochs = 50;
  int batch_size = 32;
  double init_scale = 0.0;  // 0 -> 1/sqrt(fan_in) per layer
};

struct TrainResult {
  FcnnModel model;
  std::vector<double> epoch_loss;
};

struct diverged_training_error : std::runtime_error {
  explicit diverged_training_error(int epoch)
      : std::runtime_error("training diverged (NaN loss) at epoch " +
                           std::to_string(epoch)),
        epoch(epoch) {}
  int epoch;
};

// Normalized input -> sigmoid hidden layers -> softmax probabilities.
std::vector<double> forward(const FcnnModel& model, const std::vector<double>& input);

// -sum y_i ln(max(s_i, 1e-12)).
double cross_entropy(const std::vector<double>& scores, const std::vector<double>& onehot);

// Analytic gradients of cross_entropy(forward(x), y).
Gradients backward(const FcnnModel& model, const std::vector<double>& input,
                   const std::vector<double>& onehot);

// Mini-batch gradient descent. Weights start Uniform(-s, s) from the seed,
// biases at zero; input normalization is computed from this dataset and
// stored in the model. Deterministic for a fixed seed under either policy.
TrainResult train(const LabeledDataset& dataset, const NetworkArch& arch,
                  const Hyper& hyper, uint64_t seed,
                  ExecPolicy policy = ExecPolicy::parallel);

struct Prediction {
  int cls;
  double prob;
};

// Argmax of forward, ties toward index 0.
Prediction predict(const FcnnModel& model, const std::vector<double>& input);

struct EvalResult {
  double accuracy = 0.0;
  // confusion[truth][predicted]
  std::array<std::array<size_t, 2>, 2> confusion{{{0, 0}, {0, 0}}};
  std::array<double, 2> precision{0.0, 0.0};
  std::array<double, 2> recall{0.0, 0.0};
};

EvalResult evaluate(const FcnnModel& model, const LabeledDataset& dataset,
                    ExecPolicy policy = ExecPolicy::parallel);

// JSON serialization; lossless round trip (shortest round-trip numerals).
void save_model(const FcnnModel& model, const std::string& path);
FcnnModel load_model(const std::string& path);

// Activations of the last hidden layer plus label, one CSV row per sample.
void export_penultimate_features(const FcnnModel& model,
                                 const LabeledDataset& dataset,
                                 const std::string& path);

// Last-hidden-layer activations for one input (helper for the export and its
// tests).
std::vector<double> penultimate_activations(const FcnnModel& model,
                                            const std::vector<double>& input);

}  // namespace snspd
