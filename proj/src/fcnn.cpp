#include "snspd/fcnn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "snspd/rng.hpp"

namespace snspd {

void NetworkArch::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("NetworkArch: need at least 2 layers");
  for (int s : layer_sizes)
    if (s <= 0) throw std::invalid_argument("NetworkArch: layer sizes must be > 0");
  if (layer_sizes.back() != 2)
    throw std::invalid_argument("NetworkArch: output size must be 2");
}

namespace {

// Fixed-order dot product, unrolled into four accumulators. The summation
// order is part of the determinism contract.
inline double dot(const double* w, const double* x, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += w[i] * x[i];
    s1 += w[i + 1] * x[i + 1];
    s2 += w[i + 2] * x[i + 2];
    s3 += w[i + 3] * x[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += w[i] * x[i];
  return ((s0 + s1) + (s2 + s3)) + tail;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void normalize(const FcnnModel& m, const std::vector<double>& x,
               std::vector<double>& z) {
  z.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    z[i] = (x[i] - m.norm_mean[i]) / m.norm_std[i];
}

// acts[0] = normalized input, acts[l] = activations after layer l-1; the last
// entry holds softmax probabilities.
void forward_acts(const FcnnModel& m, const std::vector<double>& z0,
                  std::vector<std::vector<double>>& acts) {
  size_t nl = m.arch.n_layers();
  acts.resize(nl + 1);
  acts[0] = z0;
  for (size_t l = 0; l < nl; ++l) {
    int in = m.arch.layer_sizes[l];
    int out = m.arch.layer_sizes[l + 1];
    auto& a = acts[l + 1];
    a.resize(static_cast<size_t>(out));
    const double* w = m.weights[l].data();
    for (int j = 0; j < out; ++j)
      a[static_cast<size_t>(j)] =
          dot(w + static_cast<size_t>(j) * in, acts[l].data(), in) +
          m.biases[l][static_cast<size_t>(j)];
    if (l + 1 < nl) {
      for (auto& v : a) v = sigmoid(v);
    } else {
      double mx = *std::max_element(a.begin(), a.end());
      double sum = 0.0;
      for (auto& v : a) {
        v = std::exp(v - mx);
        sum += v;
      }
      for (auto& v : a) v /= sum;
    }
  }
}

void check_input(const FcnnModel& m, const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != m.arch.input_dim())
    throw std::invalid_argument("forward: input length does not match arch");
}

Gradients make_gradients(const NetworkArch& arch) {
  Gradients g;
  g.weights.resize(arch.n_layers());
  g.biases.resize(arch.n_layers());
  for (size_t l = 0; l < arch.n_layers(); ++l) {
    g.weights[l].assign(static_cast<size_t>(arch.layer_sizes[l]) *
                            arch.layer_sizes[l + 1],
                        0.0);
    g.biases[l].assign(static_cast<size_t>(arch.layer_sizes[l + 1]), 0.0);
  }
  return g;
}

// Backprop for one normalized sample; writes gradients into g (overwrites).
// Returns the sample's cross-entropy loss.
double backward_normalized(const FcnnModel& m, const std::vector<double>& z0,
                           const std::vector<double>& onehot, Gradients& g,
                           std::vector<std::vector<double>>& acts,
                           std::vector<double>& delta,
                           std::vector<double>& delta_prev) {
  forward_acts(m, z0, acts);
  size_t nl = m.arch.n_layers();
  const auto& probs = acts[nl];

  double loss = 0.0;
  for (size_t i = 0; i < probs.size(); ++i)
    loss -= onehot[i] * std::log(std::max(probs[i], 1e-12));

  delta.resize(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) delta[i] = probs[i] - onehot[i];

  for (size_t l = nl; l-- > 0;) {
    int in = m.arch.layer_sizes[l];
    int out = m.arch.layer_sizes[l + 1];
    const auto& a_in = acts[l];
    double* gw = g.weights[l].data();
    for (int j = 0; j < out; ++j) {
      double dj = delta[static_cast<size_t>(j)];
      g.biases[l][static_cast<size_t>(j)] = dj;
      double* row = gw + static_cast<size_t>(j) * in;
      for (int i = 0; i < in; ++i) row[i] = dj * a_in[static_cast<size_t>(i)];
    }
    if (l > 0) {
      delta_prev.assign(static_cast<size_t>(in), 0.0);
      const double* w = m.weights[l].data();
      for (int j = 0; j < out; ++j) {
        double dj = delta[static_cast<size_t>(j)];
        const double* row = w + static_cast<size_t>(j) * in;
        for (int i = 0; i < in; ++i) delta_prev[static_cast<size_t>(i)] += dj * row[i];
      }
      for (int i = 0; i < in; ++i) {
        double a = a_in[static_cast<size_t>(i)];
        delta_prev[static_cast<size_t>(i)] *= a * (1.0 - a);
      }
      delta.swap(delta_prev);
    }
  }
  return loss;
}

std::vector<double> onehot_of(int label) {
  return label == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
}

}  // namespace

std::vector<double> forward(const FcnnModel& model, const std::vector<double>& input) {
  check_input(model, input);
  std::vector<double> z0;
  normalize(model, input, z0);
  std::vector<std::vector<double>> acts;
  forward_acts(model, z0, acts);
  return acts.back();
}

double cross_entropy(const std::vector<double>& scores,
                     const std::vector<double>& onehot) {
  double loss = 0.0;
  for (size_t i = 0; i < scores.size(); ++i)
    loss -= onehot[i] * std::log(std::max(scores[i], 1e-12));
  return loss;
}

Gradients backward(const FcnnModel& model, const std::vector<double>& input,
                   const std::vector<double>& onehot) {
  check_input(model, input);
  std::vector<double> z0;
  normalize(model, input, z0);
  Gradients g = make_gradients(model.arch);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, delta_prev;
  backward_normalized(model, z0, onehot, g, acts, delta, delta_prev);
  return g;
}

TrainResult train(const LabeledDataset& dataset, const NetworkArch& arch,
                  const Hyper& hyper, uint64_t seed, ExecPolicy policy) {
  arch.validate();
  if (dataset.inputs.empty())
    throw std::invalid_argument("train: dataset is empty");
  if (!(hyper.lr >= 0.0)) throw std::invalid_argument("train: lr must be >= 0");
  if (hyper.batch_size <= 0 || hyper.epochs < 0)
    throw std::invalid_argument("train: bad hyperparameters");
  size_t n = dataset.inputs.size();
  size_t dim = static_cast<size_t>(arch.input_dim());
  for (const auto& row : dataset.inputs)
    if (row.size() != dim)
      throw std::invalid_argument("train: input row length does not match arch");

  FcnnModel model;
  model.arch = arch;
  model.train_seed = seed;

  model.norm_mean.assign(dim, 0.0);
  model.norm_std.assign(dim, 0.0);
  for (const auto& row : dataset.inputs)
    for (size_t i = 0; i < dim; ++i) model.norm_mean[i] += row[i];
  for (size_t i = 0; i < dim; ++i) model.norm_mean[i] /= static_cast<double>(n);
  for (const auto& row : dataset.inputs)
    for (size_t i = 0; i < dim; ++i) {
      double d = row[i] - model.norm_mean[i];
      model.norm_std[i] += d * d;
    }
  for (size_t i = 0; i < dim; ++i) {
    model.norm_std[i] = std::sqrt(model.norm_std[i] / static_cast<double>(n));
    if (model.norm_std[i] < 1e-12) model.norm_std[i] = 1.0;  // constant feature
  }

  CounterRng init(seed, Stream::nn_init);
  model.weights.resize(arch.n_layers());
  model.biases.resize(arch.n_layers());
  for (size_t l = 0; l < arch.n_layers(); ++l) {
    int in = arch.layer_sizes[l];
    int out = arch.layer_sizes[l + 1];
    double scale = hyper.init_scale > 0.0 ? hyper.init_scale
                                          : 1.0 / std::sqrt(static_cast<double>(in));
    model.weights[l].resize(static_cast<size_t>(in) * out);
    for (auto& w : model.weights[l]) w = scale * (2.0 * init.uniform() - 1.0);
    model.biases[l].assign(static_cast<size_t>(out), 0.0);
  }

  // Inputs normalized once up front.
  std::vector<std::vector<double>> z(n);
  for (size_t r = 0; r < n; ++r) normalize(model, dataset.inputs[r], z[r]);

  size_t bs = static_cast<size_t>(hyper.batch_size);
  std::vector<Gradients> slots(std::min(bs, n), make_gradients(arch));
  std::vector<double> slot_loss(slots.size(), 0.0);
  struct Workspace {
    std::vector<std::vector<double>> acts;
    std::vector<double> delta, delta_prev;
  };
  std::vector<Workspace> ws(slots.size());
  Gradients gsum = make_gradients(arch);

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  result.epoch_loss.reserve(static_cast<size_t>(hyper.epochs));

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    CounterRng shuffle_rng(seed, Stream::nn_shuffle, static_cast<uint64_t>(epoch));
    for (size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order, shuffle_rng);

    double epoch_loss = 0.0;
    for (size_t start = 0; start < n; start += bs) {
      size_t count = std::min(bs, n - start);
      auto run_sample = [&](size_t b) {
        size_t r = order[start + b];
        slot_loss[b] =
            backward_normalized(model, z[r], onehot_of(dataset.labels[r]),
                                slots[b], ws[b].acts, ws[b].delta,
                                ws[b].delta_prev);
      };
      if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
        for (size_t b = 0; b < count; ++b) run_sample(b);
      } else {
        for (size_t b = 0; b < count; ++b) run_sample(b);
      }

      // Ordered reduction keeps the update bitwise-independent of the
      // schedule above.
      for (size_t l = 0; l < arch.n_layers(); ++l) {
        std::fill(gsum.weights[l].begin(), gsum.weights[l].end(), 0.0);
        std::fill(gsum.biases[l].begin(), gsum.biases[l].end(), 0.0);
      }
      for (size_t b = 0; b < count; ++b) {
        for (size_t l = 0; l < arch.n_layers(); ++l) {
          const auto& gw = slots[b].weights[l];
          auto& sw = gsum.weights[l];
          for (size_t i = 0; i < sw.size(); ++i) sw[i] += gw[i];
          const auto& gb = slots[b].biases[l];
          auto& sb = gsum.biases[l];
          for (size_t i = 0; i < sb.size(); ++i) sb[i] += gb[i];
        }
        epoch_loss += slot_loss[b];
      }
      double step = hyper.lr / static_cast<double>(count);
      for (size_t l = 0; l < arch.n_layers(); ++l) {
        auto& w = model.weights[l];
        const auto& sw = gsum.weights[l];
        for (size_t i = 0; i < w.size(); ++i) w[i] -= step * sw[i];
        auto& bv = model.biases[l];
        const auto& sb = gsum.biases[l];
        for (size_t i = 0; i < bv.size(); ++i) bv[i] -= step * sb[i];
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (std::isnan(epoch_loss)) throw diverged_training_error(epoch);
    result.epoch_loss.push_back(epoch_loss);
  }

  result.model = std::move(model);
  return result;
}

Prediction predict(const FcnnModel& model, const std::vector<double>& input) {
  auto probs = forward(model, input);
  int cls = probs[1] > probs[0] ? 1 : 0;  // tie -> index 0
  return Prediction{cls, probs[static_cast<size_t>(cls)]};
}

EvalResult evaluate(const FcnnModel& model, const LabeledDataset& dataset,
                    ExecPolicy policy) {
  if (dataset.inputs.empty())
    throw std::invalid_argument("evaluate: dataset is empty");
  size_t n = dataset.inputs.size();
  std::vector<int> pred(n);
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) pred[i] = predict(model, dataset.inputs[i]).cls;
  } else {
    for (size_t i = 0; i < n; ++i) pred[i] = predict(model, dataset.inputs[i]).cls;
  }

  EvalResult out;
  size_t correct = 0;
  for (size_t i = 0; i < n; ++i) {
    int t = dataset.labels[i];
    out.confusion[static_cast<size_t>(t)][static_cast<size_t>(pred[i])] += 1;
    if (t == pred[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  for (int c = 0; c < 2; ++c) {
    auto idx = static_cast<size_t>(c);
    double tp = static_cast<double>(out.confusion[idx][idx]);
    double pred_c = static_cast<double>(out.confusion[0][idx] + out.confusion[1][idx]);
    double truth_c = static_cast<double>(out.confusion[idx][0] + out.confusion[idx][1]);
    out.precision[idx] = pred_c > 0.0 ? tp / pred_c : 0.0;
    out.recall[idx] = truth_c > 0.0 ? tp / truth_c : 0.0;
  }
  return out;
}

void save_model(const FcnnModel& model, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["arch"] = model.arch.layer_sizes;
  auto& jw = j["weights"] = nlohmann::json::array();
  for (size_t l = 0; l < model.arch.n_layers(); ++l) {
    int in = model.arch.layer_sizes[l];
    int out = model.arch.layer_sizes[l + 1];
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < out; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < in; ++c)
        row.push_back(model.weights[l][static_cast<size_t>(r) * in + c]);
      rows.push_back(std::move(row));
    }
    jw.push_back(std::move(rows));
  }
  j["biases"] = model.biases;
  j["input_norm"] = {{"means", model.norm_mean}, {"stds", model.norm_std}};
  j["train_seed"] = model.train_seed;

  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

FcnnModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("load_model: parse error in " + path + ": " + e.what());
  }

  FcnnModel m;
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw std::runtime_error("load_model: unsupported format_version");
  m.arch.layer_sizes = j.at("arch").get<std::vector<int>>();
  m.arch.validate();
  auto weights = j.at("weights");
  auto biases = j.at("biases");
  if (weights.size() != m.arch.n_layers() || biases.size() != m.arch.n_layers())
    throw std::runtime_error("load_model: layer count mismatch");
  m.weights.resize(m.arch.n_layers());
  m.biases.resize(m.arch.n_layers());
  for (size_t l = 0; l < m.arch.n_layers(); ++l) {
    size_t in = static_cast<size_t>(m.arch.layer_sizes[l]);
    size_t out = static_cast<size_t>(m.arch.layer_sizes[l + 1]);
    if (weights[l].size() != out)
      throw std::runtime_error("load_model: weight shape mismatch at layer " +
                               std::to_string(l));
    m.weights[l].reserve(in * out);
    for (size_t r = 0; r < out; ++r) {
      if (weights[l][r].size() != in)
        throw std::runtime_error("load_model: weight shape mismatch at layer " +
                                 std::to_string(l));
      for (size_t c = 0; c < in; ++c)
        m.weights[l].push_back(weights[l][r][c].get<double>());
    }
    m.biases[l] = biases[l].get<std::vector<double>>();
    if (m.biases[l].size() != out)
      throw std::runtime_error("load_model: bias shape mismatch at layer " +
                               std::to_string(l));
  }
  m.norm_mean = j.at("input_norm").at("means").get<std::vector<double>>();
  m.norm_std = j.at("input_norm").at("stds").get<std::vector<double>>();
  if (m.norm_mean.size() != static_cast<size_t>(m.arch.input_dim()) ||
      m.norm_std.size() != static_cast<size_t>(m.arch.input_dim()))
    throw std::runtime_error("load_model: input_norm length mismatch");
  for (double s : m.norm_std)
    if (!(s > 0.0)) throw std::runtime_error("load_model: non-positive std");
  m.train_seed = j.at("train_seed").get<uint64_t>();
  return m;
}

std::vector<double> penultimate_activations(const FcnnModel& model,
                                            const std::vector<double>& input) {
  check_input(model, input);
  std::vector<double> z0;
  normalize(model, input, z0);
  std::vector<std::vector<double>> acts;
  forward_acts(model, z0, acts);
  return acts[model.arch.n_layers() - 1];
}

void export_penultimate_features(const FcnnModel& model,
                                 const LabeledDataset& dataset,
                                 const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_penultimate_features: cannot open " + path);
  size_t width = static_cast<size_t>(
      model.arch.layer_sizes[model.arch.n_layers() - 1]);
  for (size_t i = 0; i < width; ++i) f << "f" << i << ",";
  f << "label\n";
  char buf[32];
  for (size_t r = 0; r < dataset.inputs.size(); ++r) {
    auto acts = penultimate_activations(model, dataset.inputs[r]);
    for (double v : acts) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      (void)ec;
      f.write(buf, p - buf);
      f << ",";
    }
    f << dataset.labels[r] << "\n";
  }
  if (!f) throw std::runtime_error("export_penultimate_features: write failed");
}

}  // namespace snspd
