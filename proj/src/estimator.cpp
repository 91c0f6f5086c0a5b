#include "infoprobe/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"

namespace infoprobe::estimator {

namespace {

// Most frequent label; ties go to the lexicographically smallest.
std::string mode_of(const std::map<std::string, std::size_t>& counts) {
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [label, c] : counts) {  // map iterates in lexicographic order
    if (c > best_count) {
      best = label;
      best_count = c;
    }
  }
  return best;
}

}  // namespace

EntropyEstimate plugin_entropy(std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (const auto c : counts) {
    total += c;
  }
  if (total == 0) {
    throw InvalidArgument("plug-in entropy needs at least one observation");
  }
  const double n = static_cast<double>(total);
  double h = 0.0;
  for (const auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return {std::max(h, 0.0), Method::plugin, total};
}

EntropyEstimate plugin_entropy(const std::map<std::string, std::size_t>& counts) {
  std::vector<std::size_t> c;
  c.reserve(counts.size());
  for (const auto& [_, v] : counts) {
    c.push_back(v);
  }
  return plugin_entropy(c);
}

EntropyEstimate plugin_entropy_of(const std::vector<std::string>& labels) {
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) {
    ++counts[l];
  }
  return plugin_entropy(counts);
}

EntropyEstimate cross_entropy_estimate(const nn::Model& model, const nn::Examples& dataset) {
  return {nn::mean_cross_entropy_bits(model, dataset), Method::cross_entropy, dataset.size()};
}

double mi_lower_bound(const EntropyEstimate& h_t, const EntropyEstimate& ce) { return h_t.value - ce.value; }

Gain gain_estimate(double ce_control, double ce_repr, std::string control_tag) {
  return {ce_control - ce_repr, 0.0, std::move(control_tag)};
}

double gain_percent(double gain, double h_t) {
  if (!(h_t > 0.0)) {
    throw InvalidArgument(fmt::format("gain percentage needs H(T) > 0, got {}", h_t));
  }
  return 100.0 * gain / h_t;
}

double gain_percent(const Gain& gain, double h_t) { return gain_percent(gain.value, h_t); }

double accuracy(const nn::Model& model, const nn::Examples& dataset, std::size_t predictable) {
  if (dataset.size() == 0) {
    throw InvalidArgument("accuracy over an empty dataset");
  }
  const auto lp = nn::model_log_probs(model, dataset);
  const auto k = predictable == 0 ? static_cast<std::size_t>(lp.cols())
                                  : std::min(predictable, static_cast<std::size_t>(lp.cols()));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (lp(row, static_cast<Eigen::Index>(c)) > lp(row, static_cast<Eigen::Index>(best))) {
        best = c;
      }
    }
    if (static_cast<int>(best) == dataset.labels[i]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

MemorizerResult memorizer_predict(std::span<const Labeled> train, std::span<const Labeled> test) {
  if (train.empty()) {
    throw InvalidArgument("memorizer needs training instances");
  }
  std::unordered_map<std::string, std::map<std::string, std::size_t>> per_type;
  std::map<std::string, std::size_t> global;
  for (const auto& x : train) {
    ++per_type[x.type][x.label];
    ++global[x.label];
  }
  std::unordered_map<std::string, std::string> table;
  for (const auto& [type, counts] : per_type) {
    table.emplace(type, mode_of(counts));
  }

  MemorizerResult r;
  r.global_mode = mode_of(global);
  std::size_t correct = 0;
  std::size_t oov = 0;
  r.predictions.reserve(test.size());
  for (const auto& x : test) {
    const auto it = table.find(x.type);
    if (it == table.end()) {
      ++oov;
      r.predictions.push_back(r.global_mode);
    } else {
      r.predictions.push_back(it->second);
    }
    if (r.predictions.back() == x.label) {
      ++correct;
    }
  }
  if (!test.empty()) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    r.oov_rate = static_cast<double>(oov) / static_cast<double>(test.size());
  }
  return r;
}

MemorizerClosedForm memorizer_closed_form(std::span<const Labeled> train, std::span<const Labeled> test) {
  if (train.empty()) {
    throw InvalidArgument("memorizer needs training instances");
  }
  std::unordered_map<std::string, std::set<std::string>> labels_of;
  std::set<std::string> train_types;
  std::map<std::string, std::size_t> global;
  for (const auto& x : train) {
    labels_of[x.type].insert(x.label);
    train_types.insert(x.type);
    ++global[x.label];
  }
  for (const auto& x : test) {
    labels_of[x.type].insert(x.label);
  }
  const auto mode = mode_of(global);

  MemorizerClosedForm f;
  f.deterministic = std::all_of(labels_of.begin(), labels_of.end(), [](const auto& kv) { return kv.second.size() == 1; });
  std::size_t oov = 0;
  std::size_t oov_non_mode = 0;
  for (const auto& x : test) {
    if (!train_types.contains(x.type)) {
      ++oov;
      if (x.label != mode) ++oov_non_mode;
    }
  }
  if (!test.empty()) {
    f.oov_rate = static_cast<double>(oov) / static_cast<double>(test.size());
  }
  if (oov > 0) {
    f.oov_non_mode_fraction = static_cast<double>(oov_non_mode) / static_cast<double>(oov);
  }
  f.predicted_accuracy = 1.0 - f.oov_rate * f.oov_non_mode_fraction;
  return f;
}

double ambiguity_entropy(std::span<const Labeled> instances) {
  if (instances.empty()) {
    throw InvalidArgument("ambiguity entropy needs a non-empty corpus");
  }
  std::unordered_map<std::string, std::map<std::string, std::size_t>> per_type;
  for (const auto& x : instances) {
    ++per_type[x.type][x.label];
  }
  // Accumulate in sorted type order so the sum is reproducible bit-for-bit.
  std::vector<const std::pair<const std::string, std::map<std::string, std::size_t>>*> entries;
  for (const auto& kv : per_type) entries.push_back(&kv);
  std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->first < b->first; });

  const double n = static_cast<double>(instances.size());
  double h = 0.0;
  for (const auto* kv : entries) {
    const auto est = plugin_entropy(kv->second);
    h += static_cast<double>(est.n) / n * est.value;
  }
  return h;
}

void EstimateReport::recompute_gains() {
  for (auto& c : controls) {
    c.gain = gain_estimate(c.h_t_given_c, h_t_given_r, c.tag);
    c.gain.percent_of_HT = h_t > 0.0 ? gain_percent(c.gain, h_t) : 0.0;
  }
}

double EstimateReport::gain_consistency_error() const {
  double worst = 0.0;
  for (const auto& c : controls) {
    worst = std::max(worst, std::abs(c.gain.value - (c.h_t_given_c - h_t_given_r)));
  }
  return worst;
}

}  // namespace infoprobe::estimator
