#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infoprobe/matrix.hpp"
#include "infoprobe/rng.hpp"

namespace infoprobe::nn {

/// Probe hyperparameters. `onehot_dim` only matters when the input is a
/// trainable type table.
struct ProbeConfig {
  int layers = 1;
  int base_width = 64;
  double dropout_rate = 0.0;
  int onehot_dim = 64;
  std::uint64_t seed = 0;
};

void validate(const ProbeConfig& config);

enum class Mode { train, eval };

struct Batch {
  Matrix inputs;            // one row per instance
  std::vector<int> labels;  // class index per row
};

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix inputs;  // d loss / d inputs, same shape as Batch::inputs
};

struct LossAndGrads {
  double loss_bits = 0.0;
  Gradients grads;
};

/// Hidden widths r_i = max(floor(r / 2^(i-1)), width_floor) for i = 1..m-1.
std::vector<std::size_t> hidden_widths(int layers, int base_width, std::size_t width_floor);

/// m-layer ReLU MLP ending in a softmax over classes.
class Probe {
 public:
  Probe(std::vector<Layer> layers, double dropout_rate, std::uint64_t seed);

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weight.cols()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(layers_.back().weight.rows()); }
  std::size_t layer_count() const { return layers_.size(); }
  double dropout_rate() const { return dropout_rate_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t parameter_count() const;

  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  /// Natural-log class probabilities, one row per input. In train mode,
  /// inverted dropout is applied after every ReLU and the dropout stream advances.
  Matrix forward(const Matrix& inputs);
  /// Eval-mode forward; read-only.
  Matrix log_probs(const Matrix& inputs) const;

  /// Mean cross-entropy in bits and its exact gradient.
  LossAndGrads loss_and_grads(const Batch& batch);

 private:
  struct Trace {
    std::vector<Matrix> activations;  // input to each layer
    std::vector<Matrix> pre_relu;     // hidden pre-activations
    std::vector<Matrix> masks;        // scaled dropout masks (empty if none)
    Matrix log_probs;
  };
  Trace run(const Matrix& inputs, bool dropout);
  void check_input(const Matrix& inputs) const;

  std::vector<Layer> layers_;
  double dropout_rate_;
  Mode mode_ = Mode::train;
  Rng dropout_rng_;
};

/// Glorot-uniform weights, zero biases, widths from hidden_widths with
/// width_floor = num_classes.
Probe init_probe(const ProbeConfig& config, std::size_t input_dim, std::size_t num_classes, std::uint64_t seed);

/// Instances as row references into a feature matrix: instance i reads rows
/// rows[i*slots .. i*slots+slots) and concatenates them.
struct Examples {
  std::shared_ptr<const Matrix> features;
  std::size_t slots = 1;
  std::vector<std::size_t> rows;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return slots * static_cast<std::size_t>(features->cols()); }
};

void validate(const Examples& examples);

Batch gather(const Matrix& features, const Examples& examples, std::span<const std::size_t> indices);
Batch gather_all(const Matrix& features, const Examples& examples);

/// A probe plus, for the trainable one-hot control, its trained lookup table.
/// When `embedding` is set it replaces Examples::features.
struct Model {
  Probe probe;
  std::optional<Matrix> embedding;

  const Matrix& features_for(const Examples& examples) const {
    return embedding ? *embedding : *examples.features;
  }
};

/// Eval-mode log-probabilities for every instance, computed in chunks.
Matrix model_log_probs(const Model& model, const Examples& examples);

/// Mean -log2 q(t|r) over the examples under the eval-mode model.
double mean_cross_entropy_bits(const Model& model, const Examples& examples);

struct TrainSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
};

struct TrainResult {
  Model model;                  // parameters from the best dev epoch
  std::vector<double> train_ce; // per-epoch mean minibatch loss (train mode), bits
  std::vector<double> dev_ce;   // per-epoch dev cross-entropy (eval mode), bits
  std::size_t best_epoch = 0;   // index into dev_ce
  bool diverged = false;

  std::size_t epochs_run() const { return dev_ce.size(); }
  double best_dev_ce() const { return dev_ce.empty() ? 0.0 : dev_ce[best_epoch]; }
};

/// Adam on minibatches shuffled from `seed`, early-stopped on dev
/// cross-entropy. A trainable `embedding` receives row-sparse Adam updates.
TrainResult train(Probe probe, std::optional<Matrix> embedding, const Examples& train_set,
                  const Examples& dev_set, const TrainSettings& settings, std::uint64_t seed);

// Checkpoint: "PPRB" | u32 version=1 | u32 layer_count | f64 dropout |
// (u32 out, u32 in) per layer | u32 has_embedding [| u32 rows | u32 cols] |
// f64 payload: per layer weight (row-major) then bias, then the embedding.
std::string encode_model(const Model& model);
Model decode_model(std::string_view bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace infoprobe::nn
