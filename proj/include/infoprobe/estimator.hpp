#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "infoprobe/nn.hpp"

namespace infoprobe::estimator {

enum class Method { plugin, cross_entropy };

struct EntropyEstimate {
  double value = 0.0;  // bits
  Method method = Method::plugin;
  std::size_t n = 0;
};

struct Gain {
  double value = 0.0;  // bits, signed
  double percent_of_HT = 0.0;
  std::string control_tag;
};

/// Plug-in (maximum likelihood) entropy in bits. Throws if all counts are zero.
EntropyEstimate plugin_entropy(std::span<const std::size_t> counts);
EntropyEstimate plugin_entropy(const std::map<std::string, std::size_t>& counts);
/// Plug-in entropy of a label sequence.
EntropyEstimate plugin_entropy_of(const std::vector<std::string>& labels);

/// Mean -log2 q(t|r) of an eval-mode model; an upper-bound estimate of H(T|R).
EntropyEstimate cross_entropy_estimate(const nn::Model& model, const nn::Examples& dataset);

/// H(T) - H_q(T|R). Negative values are returned as-is.
double mi_lower_bound(const EntropyEstimate& h_t, const EntropyEstimate& ce);

/// ce_control - ce_repr, both measured on the same test instances.
Gain gain_estimate(double ce_control, double ce_repr, std::string control_tag = {});

/// 100 * gain / H(T). Requires H(T) > 0.
double gain_percent(double gain, double h_t);
double gain_percent(const Gain& gain, double h_t);

/// Fraction of instances whose argmax matches the gold label. Only the first
/// `predictable` classes compete (ties -> smallest index); labels at or past
/// `predictable` always count as errors. predictable = 0 means all classes.
double accuracy(const nn::Model& model, const nn::Examples& dataset, std::size_t predictable = 0);

struct Labeled {
  std::string type;
  std::string label;
};

struct MemorizerResult {
  std::vector<std::string> predictions;
  double accuracy = 0.0;
  std::string global_mode;
  double oov_rate = 0.0;
};

/// Per word type, the most frequent training label; unseen types get the
/// global training mode. Ties resolve to the lexicographically smallest label.
MemorizerResult memorizer_predict(std::span<const Labeled> train, std::span<const Labeled> test);

struct MemorizerClosedForm {
  double oov_rate = 0.0;
  /// Fraction of OOV test tokens whose gold label is not the global mode.
  double oov_non_mode_fraction = 0.0;
  /// 1 - oov_rate * oov_non_mode_fraction.
  double predicted_accuracy = 0.0;
  /// Whether every type seen in train and test maps to a single label, which
  /// is when the prediction is exact.
  bool deterministic = false;
};

MemorizerClosedForm memorizer_closed_form(std::span<const Labeled> train, std::span<const Labeled> test);

/// Plug-in H(T | word type): sum_w p(w) H(T | W = w), in bits.
double ambiguity_entropy(std::span<const Labeled> instances);

/// Stored report row for one task.
struct ControlResult {
  std::string tag;
  double h_t_given_c = 0.0;
  Gain gain;
  std::optional<double> accuracy;
};

struct EstimateReport {
  std::string name;  // language or run label
  std::string task;  // pos | deplabel
  std::size_t train_tokens = 0;
  std::size_t test_tokens = 0;
  std::size_t classes = 0;
  double h_t = 0.0;
  double h_t_given_r = 0.0;
  std::optional<double> accuracy_r;
  std::vector<ControlResult> controls;
  std::optional<double> h_t_given_word;
  std::vector<std::string> warnings;

  /// Recomputes every gain from the stored entropies.
  void recompute_gains();
  /// Largest |stored gain - recomputed gain| over controls.
  double gain_consistency_error() const;
};

}  // namespace infoprobe::estimator
