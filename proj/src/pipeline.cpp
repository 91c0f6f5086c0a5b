#include "infoprobe/pipeline.hpp"

#include <algorithm>
#include <memory>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"

namespace infoprobe::pipeline {

namespace {

struct SplitTokens {
  const conllu::Corpus* corpus;
  const SplitInstances* instances;
};

SplitInstances collect(const conllu::Corpus& corpus, Task task, const conllu::LabelVocab* vocab,
                       std::vector<std::string>& raw_labels) {
  SplitInstances s;
  const auto forms = corpus.forms();
  raw_labels.clear();
  if (task == Task::pos) {
    for (auto& x : conllu::pos_instances(corpus)) {
      s.tokens.push_back(x.token);
      s.types.push_back(forms[x.token]);
      raw_labels.push_back(std::move(x.label));
    }
  } else {
    for (auto& x : conllu::dep_instances(corpus)) {
      s.tokens.push_back(x.child);
      s.tokens.push_back(x.head);
      s.types.push_back(forms[x.child] + '\t' + forms[x.head]);
      raw_labels.push_back(std::move(x.label));
    }
  }
  if (vocab) {
    s.labels = vocab->encode(raw_labels, &s.unseen);
  }
  return s;
}

std::vector<std::size_t> map_rows(const std::vector<std::size_t>& tokens, const std::vector<std::size_t>& token_to_row) {
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (const auto t : tokens) rows.push_back(token_to_row[t]);
  return rows;
}

nn::Examples make_examples(std::shared_ptr<const Matrix> features, std::size_t slots, std::vector<std::size_t> rows,
                           const std::vector<int>& labels) {
  nn::Examples e;
  e.features = std::move(features);
  e.slots = slots;
  e.rows = std::move(rows);
  e.labels = labels;
  return e;
}

std::vector<estimator::Labeled> labeled(const SplitInstances& s, const std::vector<std::string>& raw) {
  std::vector<estimator::Labeled> out;
  out.reserve(s.types.size());
  for (std::size_t i = 0; i < s.types.size(); ++i) out.push_back({s.types[i], raw[i]});
  return out;
}

}  // namespace

std::string_view to_string(Task task) { return task == Task::pos ? "pos" : "deplabel"; }

Task task_from_string(std::string_view name) {
  if (name == "pos") return Task::pos;
  if (name == "deplabel" || name == "dep") return Task::deplabel;
  throw InvalidArgument(fmt::format("unknown task '{}' (expected pos or deplabel)", name));
}

Treebank read_treebank(const std::filesystem::path& train, const std::filesystem::path& dev,
                       const std::filesystem::path& test) {
  return {conllu::read_conllu(train, conllu::Split::train), conllu::read_conllu(dev, conllu::Split::dev),
          conllu::read_conllu(test, conllu::Split::test)};
}

SourceSpec parse_source(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto kind = spec.substr(0, colon);
  SourceSpec s;
  s.kind = embedkit::source_tag_from_string(kind);
  if (colon != std::string_view::npos) s.path = std::string(spec.substr(colon + 1));
  const bool needs_path = s.kind == embedkit::SourceTag::contextual || s.kind == embedkit::SourceTag::fasttext;
  if (needs_path && s.path.empty()) {
    throw InvalidArgument(fmt::format("source '{}' needs a path ({}:PATH)", spec, kind));
  }
  if (!needs_path && !s.path.empty()) {
    throw InvalidArgument(fmt::format("source '{}' takes no path", kind));
  }
  return s;
}

std::filesystem::path pemb_path(const SourceSpec& spec, conllu::Split split) {
  return spec.path / fmt::format("{}.pemb", conllu::to_string(split));
}

TaskInstances build_instances(const Treebank& treebank, Task task) {
  TaskInstances ti;
  ti.task = task;
  ti.slots = task == Task::pos ? 1 : 2;
  std::vector<std::string> raw;
  ti.train = collect(treebank.train, task, nullptr, raw);
  ti.vocab = conllu::LabelVocab::build(raw);
  ti.train.labels = ti.vocab.encode(raw);
  ti.dev = collect(treebank.dev, task, &ti.vocab, raw);
  ti.test = collect(treebank.test, task, &ti.vocab, raw);
  if (ti.train.labels.empty()) {
    throw DataError(fmt::format("training split has no {} instances", to_string(task)));
  }
  const bool unseen = !ti.dev.unseen.empty() || !ti.test.unseen.empty();
  ti.predictable = ti.vocab.size();
  ti.num_classes = std::max<std::size_t>(2, ti.vocab.size() + (unseen ? 1 : 0));
  for (const auto* split : {&ti.dev, &ti.test}) {
    if (!split->unseen.empty()) {
      std::vector<std::string> distinct(split->unseen);
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      std::string names;
      for (const auto& d : distinct) names += (names.empty() ? "" : " ") + d;
      ti.warnings.push_back(fmt::format("{} {} instances carry labels unseen in training: {}",
                                        split->unseen.size(), split == &ti.dev ? "dev" : "test", names));
    }
  }
  return ti;
}

search::DataProvider make_provider(const Treebank& treebank, const TaskInstances& instances, const SourceSpec& source,
                                   const ProviderOptions& options) {
  using embedkit::SourceTag;
  const auto slots = instances.slots;
  search::TrialData base;
  base.num_classes = instances.num_classes;
  base.predictable = instances.predictable;

  switch (source.kind) {
    case SourceTag::contextual: {
      auto load = [&](const conllu::Corpus& c) {
        return std::make_shared<const Matrix>(
            embedkit::load_embedding_matrix(pemb_path(source, c.split), c).vectors);
      };
      base.train = make_examples(load(treebank.train), slots, instances.train.tokens, instances.train.labels);
      base.dev = make_examples(load(treebank.dev), slots, instances.dev.tokens, instances.dev.labels);
      base.test = make_examples(load(treebank.test), slots, instances.test.tokens, instances.test.labels);
      return [base](const nn::ProbeConfig&) { return base; };
    }
    case SourceTag::fasttext:
    case SourceTag::random: {
      const auto table = source.kind == SourceTag::fasttext
                             ? embedkit::load_vec_file(source.path)
                             : embedkit::build_random_table(embedkit::corpus_vocab(treebank.train), options.random_dim,
                                                            mix_seed(options.seed, 0x7AB));
      auto features = std::make_shared<const Matrix>(table.matrix());
      auto split = [&](const conllu::Corpus& c, const SplitInstances& s) {
        return make_examples(features, slots, map_rows(s.tokens, embedkit::type_rows(c, table)), s.labels);
      };
      base.train = split(treebank.train, instances.train);
      base.dev = split(treebank.dev, instances.dev);
      base.test = split(treebank.test, instances.test);
      return [base](const nn::ProbeConfig&) { return base; };
    }
    case SourceTag::onehot: {
      // Type rows depend only on the vocabulary, so they are computed once;
      // the table itself is drawn per trial at the sampled dimension.
      const auto vocab = embedkit::corpus_vocab(treebank.train);
      const auto shape_table = embedkit::build_onehot_table(vocab, 1, 0);
      auto rows = [&](const conllu::Corpus& c, const SplitInstances& s) {
        return map_rows(s.tokens, embedkit::type_rows(c, shape_table));
      };
      auto train_rows = rows(treebank.train, instances.train);
      auto dev_rows = rows(treebank.dev, instances.dev);
      auto test_rows = rows(treebank.test, instances.test);
      return [base, vocab, slots, train_rows, dev_rows, test_rows, &instances](const nn::ProbeConfig& config) {
        auto table = embedkit::build_onehot_table(vocab, static_cast<std::size_t>(config.onehot_dim),
                                                  mix_seed(config.seed, 0x0E));
        auto d = base;
        auto features = std::make_shared<const Matrix>(table.matrix());
        d.train = make_examples(features, slots, train_rows, instances.train.labels);
        d.dev = make_examples(features, slots, dev_rows, instances.dev.labels);
        d.test = make_examples(features, slots, test_rows, instances.test.labels);
        d.trainable = table.matrix();
        return d;
      };
    }
  }
  throw InvalidArgument("unknown source kind");
}

EstimateRun run_estimate(const Treebank& treebank, const EstimateOptions& options) {
  const auto instances = build_instances(treebank, options.task);
  if (instances.dev.labels.empty() || instances.test.labels.empty()) {
    throw DataError("dev and test splits need at least one instance");
  }
  const ProviderOptions popts{options.seed, options.random_dim};

  estimator::EstimateReport report;
  report.name = options.name;
  report.task = std::string(to_string(options.task));
  report.train_tokens = instances.train.labels.size();
  report.test_tokens = instances.test.labels.size();
  report.classes = instances.vocab.size();
  report.h_t = estimator::plugin_entropy(instances.vocab.counts()).value;
  report.warnings = instances.warnings;

  std::vector<std::string> raw;
  collect(treebank.train, options.task, nullptr, raw);
  report.h_t_given_word = estimator::ambiguity_entropy(labeled(instances.train, raw));

  EstimateRun run{report, {}};
  auto search_source = [&](const SourceSpec& s) {
    auto provider = make_provider(treebank, instances, s, popts);
    return search::run_search(options.space, provider, options.seed, options.search);
  };

  auto repr = search_source(options.representation);
  run.report.h_t_given_r = *repr.best.test_ce;
  run.report.accuracy_r = repr.best.test_accuracy;
  run.searches.push_back({options.representation.label(), std::move(repr)});

  for (const auto& c : options.controls) {
    auto outcome = search_source(c);
    estimator::ControlResult cr;
    cr.tag = c.label();
    cr.h_t_given_c = *outcome.best.test_ce;
    cr.accuracy = outcome.best.test_accuracy;
    run.report.controls.push_back(cr);
    run.searches.push_back({c.label(), std::move(outcome)});
  }
  run.report.recompute_gains();
  return run;
}

BaselineReport run_baseline(const Treebank& treebank, Task task) {
  std::vector<std::string> train_raw;
  std::vector<std::string> test_raw;
  const auto train = collect(treebank.train, task, nullptr, train_raw);
  const auto test = collect(treebank.test, task, nullptr, test_raw);
  const auto train_l = labeled(train, train_raw);
  const auto test_l = labeled(test, test_raw);
  BaselineReport b;
  b.memorizer = estimator::memorizer_predict(train_l, test_l);
  b.closed_form = estimator::memorizer_closed_form(train_l, test_l);
  b.train_instances = train_l.size();
  b.test_instances = test_l.size();
  return b;
}

SyntheticEstimate estimate_synthetic(const synth::JointDistribution& joint, const synth::Channel& channel,
                                     const SyntheticOptions& options) {
  synth::validate(joint);
  synth::validate(channel, joint);
  const auto pushed = synth::apply_channel(joint, channel);
  const auto truth = synth::true_quantities(joint);
  const auto truth_c = synth::true_quantities(pushed);

  const auto train = synth::sample(joint, options.train_n, mix_seed(options.seed, 1));
  const auto dev = synth::sample(joint, options.dev_n, mix_seed(options.seed, 2));
  const auto test = synth::sample(joint, options.test_n, mix_seed(options.seed, 3));

  search::TrialData repr_data;
  repr_data.train = synth::to_examples(train, joint.r_support);
  repr_data.dev = synth::to_examples(dev, joint.r_support);
  repr_data.test = synth::to_examples(test, joint.r_support);
  repr_data.num_classes = std::max<std::size_t>(2, joint.num_labels());
  repr_data.predictable = joint.num_labels();

  search::TrialData ctrl_data = repr_data;
  ctrl_data.train = synth::to_examples(train, channel);
  ctrl_data.dev = synth::to_examples(dev, channel);
  ctrl_data.test = synth::to_examples(test, channel);

  auto repr = search::run_search(options.space, [&](const nn::ProbeConfig&) { return repr_data; }, options.seed,
                                 options.search);
  auto ctrl = search::run_search(options.space, [&](const nn::ProbeConfig&) { return ctrl_data; }, options.seed,
                                 options.search);

  estimator::EstimateReport report;
  report.name = "synthetic";
  report.task = "synthetic";
  report.train_tokens = options.train_n;
  report.test_tokens = options.test_n;
  report.classes = joint.num_labels();
  std::vector<std::size_t> counts(joint.num_labels(), 0);
  for (const int t : train.labels) ++counts[static_cast<std::size_t>(t)];
  report.h_t = estimator::plugin_entropy(counts).value;
  report.h_t_given_r = *repr.best.test_ce;
  report.accuracy_r = repr.best.test_accuracy;
  estimator::ControlResult cr;
  cr.tag = "channel";
  cr.h_t_given_c = *ctrl.best.test_ce;
  cr.accuracy = ctrl.best.test_accuracy;
  report.controls.push_back(cr);
  report.recompute_gains();

  const double ce_r = *repr.best.test_ce;
  const double ce_c = *ctrl.best.test_ce;
  return SyntheticEstimate{truth,  truth_c, truth.mi - truth_c.mi, ce_r, ce_c, ce_c - ce_r, std::move(repr),
                           std::move(ctrl), std::move(report)};
}

}  // namespace infoprobe::pipeline
