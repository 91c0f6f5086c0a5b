#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "infoprobe/conllu.hpp"
#include "infoprobe/embedkit.hpp"
#include "infoprobe/estimator.hpp"
#include "infoprobe/search.hpp"
#include "infoprobe/synth.hpp"

namespace infoprobe::pipeline {

enum class Task { pos, deplabel };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

struct Treebank {
  conllu::Corpus train;
  conllu::Corpus dev;
  conllu::Corpus test;
};

Treebank read_treebank(const std::filesystem::path& train, const std::filesystem::path& dev,
                       const std::filesystem::path& test);

/// contextual:DIR (DIR holds train.pemb, dev.pemb, test.pemb), fasttext:FILE.vec,
/// onehot, random.
struct SourceSpec {
  embedkit::SourceTag kind = embedkit::SourceTag::contextual;
  std::filesystem::path path;

  std::string label() const { return std::string(embedkit::to_string(kind)); }
};

SourceSpec parse_source(std::string_view spec);
std::filesystem::path pemb_path(const SourceSpec& spec, conllu::Split split);

/// Probing instances of one split: token references (1 slot for POS, child
/// and head for dependency labels) and encoded labels.
struct SplitInstances {
  std::vector<std::size_t> tokens;  // size = labels.size() * slots
  std::vector<int> labels;
  std::vector<std::string> types;   // word type per instance ("child\thead" for deplabel)
  std::vector<std::string> unseen;  // labels not in the training vocab
};

struct TaskInstances {
  Task task = Task::pos;
  std::size_t slots = 1;
  conllu::LabelVocab vocab;
  SplitInstances train;
  SplitInstances dev;
  SplitInstances test;
  std::size_t num_classes = 0;   // vocab size, plus one reserved row if dev/test hold unseen labels
  std::size_t predictable = 0;   // vocab size
  std::vector<std::string> warnings;
};

TaskInstances build_instances(const Treebank& treebank, Task task);

struct ProviderOptions {
  std::uint64_t seed = 0;
  std::size_t random_dim = 300;
};

/// Builds the per-trial data for a representation source. Contextual and
/// fastText data are loaded once; the random table is drawn once from the
/// seed; the one-hot table is drawn per trial at the sampled size.
search::DataProvider make_provider(const Treebank& treebank, const TaskInstances& instances, const SourceSpec& source,
                                   const ProviderOptions& options);

struct EstimateOptions {
  std::string name = "run";
  Task task = Task::pos;
  SourceSpec representation;
  std::vector<SourceSpec> controls;
  search::SearchSpace space;
  search::SearchOptions search;
  std::uint64_t seed = 0;
  std::size_t random_dim = 300;
};

struct SourceOutcome {
  std::string label;
  search::SearchOutcome outcome;
};

struct EstimateRun {
  estimator::EstimateReport report;
  std::vector<SourceOutcome> searches;  // representation first, then controls
};

EstimateRun run_estimate(const Treebank& treebank, const EstimateOptions& options);

struct BaselineReport {
  estimator::MemorizerResult memorizer;
  estimator::MemorizerClosedForm closed_form;
  std::size_t train_instances = 0;
  std::size_t test_instances = 0;
};

BaselineReport run_baseline(const Treebank& treebank, Task task);

struct SyntheticOptions {
  std::size_t train_n = 10000;
  std::size_t dev_n = 2000;
  std::size_t test_n = 10000;
  search::SearchSpace space;
  search::SearchOptions search;
  std::uint64_t seed = 0;
};

struct SyntheticEstimate {
  synth::TrueQuantities truth;          // of (T, R)
  synth::TrueQuantities truth_control;  // of (T, c(R))
  double true_gain = 0.0;
  double ce_repr = 0.0;     // test cross-entropy of the R probe
  double ce_control = 0.0;  // test cross-entropy of the c(R) probe
  double gain = 0.0;        // ce_control - ce_repr
  search::SearchOutcome repr;
  search::SearchOutcome control;
  estimator::EstimateReport report;
};

/// Samples train/dev/test sets from the joint and runs the full estimation
/// protocol on R and on c(R).
SyntheticEstimate estimate_synthetic(const synth::JointDistribution& joint, const synth::Channel& channel,
                                     const SyntheticOptions& options);

}  // namespace infoprobe::pipeline
