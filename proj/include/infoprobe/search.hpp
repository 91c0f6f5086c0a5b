#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infoprobe/nn.hpp"

namespace infoprobe::search {

template <typename T>
struct Range {
  T lo;
  T hi;
};

struct SearchSpace {
  Range<int> layers{1, 5};
  Range<int> width{64, 1024};  // sampled log-uniformly
  Range<double> dropout{0.0, 0.5};
  Range<int> onehot_dim{16, 512};  // sampled log-uniformly
  std::size_t n_trials = 50;
};

void validate(const SearchSpace& space);

/// Flat `key = value` settings shared by the CLI config file.
using KeyValues = std::map<std::string, std::string, std::less<>>;
KeyValues parse_key_values(std::string_view text);

/// Reads layers_min/layers_max, width_min/width_max, dropout_min/dropout_max,
/// onehot_dim_min/onehot_dim_max and trials; absent keys keep defaults.
SearchSpace search_space_from(const KeyValues& kv, SearchSpace base = {});
/// Reads learning_rate, batch_size, max_epochs, patience.
nn::TrainSettings train_settings_from(const KeyValues& kv, nn::TrainSettings base = {});

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_index);

/// Deterministic in (space, master_seed, trial_index).
nn::ProbeConfig sample_config(const SearchSpace& space, std::uint64_t master_seed, std::size_t trial_index);

enum class TrialStatus { ok, diverged };

struct TrialResult {
  std::size_t index = 0;
  nn::ProbeConfig config;
  double dev_ce = 0.0;
  std::optional<double> test_ce;
  std::optional<double> test_accuracy;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  TrialStatus status = TrialStatus::ok;
};

/// Train/dev/test examples for one trial. For the trainable control the
/// table is rebuilt per trial (its size is a hyperparameter), so data is
/// produced from the sampled config.
struct TrialData {
  nn::Examples train;
  nn::Examples dev;
  nn::Examples test;
  std::size_t num_classes = 0;
  /// Classes the probe may predict; the rest are reserved (unseen labels).
  std::size_t predictable = 0;
  /// Initial trainable lookup table, if the input is the one-hot control.
  std::optional<Matrix> trainable;
};

using DataProvider = std::function<TrialData(const nn::ProbeConfig&)>;

/// Index of the ok trial with the smallest dev cross-entropy (ties -> lower
/// index). std::nullopt if every trial diverged.
std::optional<std::size_t> select_winner(std::span<const TrialResult> trials);

struct SearchOutcome {
  TrialResult best;
  std::vector<TrialResult> trials;  // ordered by trial index
  nn::Model model;                  // winning model
};

struct SearchOptions {
  nn::TrainSettings train;
  std::size_t threads = 1;
};

/// Runs every trial, picks the winner on dev cross-entropy and evaluates
/// only the winner on test. Throws SearchFailure if every trial diverged.
SearchOutcome run_search(const SearchSpace& space, const DataProvider& data, std::uint64_t master_seed,
                         const SearchOptions& options = {});

std::string ledger_csv(std::span<const TrialResult> trials);

}  // namespace infoprobe::search
