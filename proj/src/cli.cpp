#include "infoprobe/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "infoprobe/conllu.hpp"
#include "infoprobe/embedkit.hpp"
#include "infoprobe/errors.hpp"
#include "infoprobe/estimator.hpp"
#include "infoprobe/pipeline.hpp"
#include "infoprobe/report.hpp"
#include "infoprobe/search.hpp"
#include "infoprobe/synth.hpp"

namespace infoprobe::cli {

namespace fs = std::filesystem;

namespace {

// Flags shared by the treebank commands. Empty / unset values fall back to the
// config file, then to the defaults.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string task;
  std::string source;
  std::string controls;
  std::string out;
  std::string train, dev, test;
  std::optional<std::size_t> threads;
  bool nats = false;
};

struct Settings {
  pipeline::Treebank treebank;
  pipeline::EstimateOptions options;
  fs::path out;
  report::Units units = report::Units::bits;
  bool has_source = false;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidArgument(fmt::format("cannot write '{}'", path.string()));
  f << text;
}

template <typename T>
T to_number(const std::string& key, const std::string& s) {
  T value{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw InvalidArgument(fmt::format("config key '{}': cannot parse '{}'", key, s));
  }
  return value;
}

std::string pick(const std::string& flag, const search::KeyValues& kv, const std::string& key,
                 const std::string& fallback = {}) {
  if (!flag.empty()) return flag;
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = s.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.emplace_back(item);
    start = comma + 1;
  }
  return out;
}

Settings resolve(const CommonFlags& f, bool need_treebank) {
  search::KeyValues kv;
  if (!f.config.empty()) {
    kv = search::parse_key_values(read_text(f.config));
  }
  // Relative paths in a config file are taken relative to the file.
  const fs::path base = f.config.empty() ? fs::path{} : fs::path(f.config).parent_path();
  auto path_of = [&](const std::string& flag, const std::string& key) -> fs::path {
    if (!flag.empty()) return flag;
    const auto it = kv.find(key);
    if (it == kv.end()) return {};
    const fs::path p(it->second);
    return p.is_absolute() ? p : base / p;
  };

  Settings s;
  auto& o = s.options;
  o.name = pick({}, kv, "name", "run");
  o.task = pipeline::task_from_string(pick(f.task, kv, "task", "pos"));
  o.seed = f.seed ? *f.seed : (kv.count("seed") ? to_number<std::uint64_t>("seed", kv.at("seed")) : 0);
  if (kv.count("random_dim")) o.random_dim = to_number<std::size_t>("random_dim", kv.at("random_dim"));
  o.space = search::search_space_from(kv);
  if (f.trials) {
    o.space.n_trials = *f.trials;
    search::validate(o.space);
  }
  o.search.train = search::train_settings_from(kv);
  o.search.threads = f.threads ? *f.threads : (kv.count("threads") ? to_number<std::size_t>("threads", kv.at("threads")) : 1);

  auto resolve_source = [&](const std::string& spec) {
    auto src = pipeline::parse_source(spec);
    if (!f.source.empty() && spec == f.source) return src;
    if (!src.path.empty() && !src.path.is_absolute()) src.path = base / src.path;
    return src;
  };
  const auto source = pick(f.source, kv, "source");
  if (!source.empty()) {
    o.representation = resolve_source(source);
    s.has_source = true;
  }
  for (const auto& c : split_list(pick(f.controls, kv, "controls"))) {
    auto src = pipeline::parse_source(c);
    if (!src.path.empty() && !src.path.is_absolute() && f.controls.empty()) src.path = base / src.path;
    o.controls.push_back(std::move(src));
  }

  s.out = path_of(f.out, "out");
  s.units = f.nats ? report::Units::nats : report::Units::bits;

  if (need_treebank) {
    const auto train = path_of(f.train, "train");
    const auto dev = path_of(f.dev, "dev");
    const auto test = path_of(f.test, "test");
    if (train.empty() || dev.empty() || test.empty()) {
      throw InvalidArgument("train, dev and test treebanks are required (--train/--dev/--test or config keys)");
    }
    s.treebank = pipeline::read_treebank(train, dev, test);
  }
  return s;
}

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "key = value config file");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--trials", f.trials, "random-search trials per source");
  app->add_option("--task", f.task, "pos | deplabel");
  app->add_option("--source", f.source, "contextual:DIR | fasttext:FILE | onehot | random");
  app->add_option("--controls", f.controls, "comma-separated control sources");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--train", f.train, "training treebank (CoNLL-U)");
  app->add_option("--dev", f.dev, "development treebank (CoNLL-U)");
  app->add_option("--test", f.test, "test treebank (CoNLL-U)");
  app->add_option("--threads", f.threads, "worker threads for the search");
  app->add_flag("--nats", f.nats, "report entropies in nats instead of bits");
}

int cmd_validate(const CommonFlags& flags, std::ostream& out) {
  const auto s = resolve(flags, true);
  const auto& tb = s.treebank;
  std::vector<std::string> warnings;
  out << fmt::format("{:<8}  {:>10}  {:>9}  {:>10}\n", "split", "sentences", "tokens", "hash");
  for (const auto* c : {&tb.train, &tb.dev, &tb.test}) {
    out << fmt::format("{:<8}  {:>10}  {:>9}  {:016x}\n", conllu::to_string(c->split),
                       report::group_thousands(c->sentences.size()), report::group_thousands(c->token_count()),
                       conllu::corpus_token_hash(*c));
  }
  for (const auto task : {pipeline::Task::pos, pipeline::Task::deplabel}) {
    const auto ti = pipeline::build_instances(tb, task);
    out << fmt::format("{:<8}  train {} / test {}  classes {}\n", pipeline::to_string(task),
                       report::group_thousands(ti.train.labels.size()), report::group_thousands(ti.test.labels.size()),
                       ti.vocab.size());
    warnings.insert(warnings.end(), ti.warnings.begin(), ti.warnings.end());
  }
  if (s.has_source && s.options.representation.kind == embedkit::SourceTag::contextual) {
    for (const auto* c : {&tb.train, &tb.dev, &tb.test}) {
      const auto path = pipeline::pemb_path(s.options.representation, c->split);
      const auto e = embedkit::load_embedding_matrix(path, *c);
      out << fmt::format("{}: {} x {} aligned\n", path.string(), e.count(), e.dim());
    }
  } else if (s.has_source && s.options.representation.kind == embedkit::SourceTag::fasttext) {
    const auto table = embedkit::load_vec_file(s.options.representation.path);
    out << fmt::format("{}: {} types x {}\n", s.options.representation.path.string(), table.types().size(),
                       table.matrix().cols());
    warnings.insert(warnings.end(), table.warnings().begin(), table.warnings().end());
  }
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  return ExitCode::ok;
}

int cmd_estimate(const CommonFlags& flags, const std::string& replay, std::ostream& out, std::ostream& err) {
  std::vector<estimator::EstimateReport> rows;
  std::vector<std::pair<std::string, std::string>> ledgers;
  fs::path out_dir;
  report::Units units = flags.nats ? report::Units::nats : report::Units::bits;
  if (!replay.empty()) {
    rows = report::parse_replay_csv(read_text(replay));
    out_dir = flags.out;
  } else {
    auto s = resolve(flags, true);
    if (!s.has_source) throw InvalidArgument("estimate needs a representation --source");
    out_dir = s.out;
    units = s.units;
    auto run = pipeline::run_estimate(s.treebank, s.options);
    for (const auto& w : run.report.warnings) err << "warning: " << w << '\n';
    for (const auto& so : run.searches) {
      ledgers.emplace_back(fmt::format("trials_{}.csv", so.label), search::ledger_csv(so.outcome.trials));
    }
    rows.push_back(std::move(run.report));
  }
  const auto table = report::text_table(rows, units);
  out << table;
  if (!out_dir.empty()) {
    write_text(out_dir / "report.txt", table);
    write_text(out_dir / "report.csv", report::csv(rows, units));
    for (const auto& [name, text] : ledgers) write_text(out_dir / name, text);
  }
  return ExitCode::ok;
}

int cmd_baseline(const CommonFlags& flags, std::ostream& out) {
  const auto s = resolve(flags, true);
  const auto b = pipeline::run_baseline(s.treebank, s.options.task);
  const auto& m = b.memorizer;
  const auto& cf = b.closed_form;
  out << fmt::format("task {}  train {}  test {}\n", pipeline::to_string(s.options.task),
                     report::group_thousands(b.train_instances), report::group_thousands(b.test_instances));
  out << fmt::format("memorizer accuracy {:.4f}  global mode {}  oov rate {:.4f}\n", m.accuracy, m.global_mode,
                     m.oov_rate);
  out << fmt::format("closed form {:.4f} ({})\n", cf.predicted_accuracy,
                     cf.deterministic ? "exact: every type has one label" : "lower bound: ambiguous types");
  if (!s.out.empty()) {
    write_text(s.out / "baseline.csv",
               fmt::format("task,train_instances,test_instances,accuracy,global_mode,oov_rate,oov_non_mode_fraction,"
                           "closed_form_accuracy,deterministic\n{},{},{},{:.17g},{},{:.17g},{:.17g},{:.17g},{}\n",
                           pipeline::to_string(s.options.task), b.train_instances, b.test_instances, m.accuracy,
                           m.global_mode, m.oov_rate, cf.oov_non_mode_fraction, cf.predicted_accuracy,
                           cf.deterministic ? 1 : 0));
  }
  return ExitCode::ok;
}

// Checks one user-supplied joint (and channel, if given) against the identities.
bool check_joint(const synth::JointSpec& spec, std::uint64_t seed, std::ostream& out) {
  synth::validate(spec.joint);
  const auto channel = spec.channel ? *spec.channel : synth::Channel::identity(spec.joint.num_values());
  synth::validate(channel, spec.joint);

  const auto truth = synth::true_quantities(spec.joint);
  const auto pushed = synth::apply_channel(spec.joint, channel);
  const auto truth_c = synth::true_quantities(pushed);
  Rng rng(seed);
  const auto q1 = synth::perturb(synth::conditional(spec.joint), 0.5, rng);
  const auto q2 = synth::perturb(synth::conditional(pushed), 0.5, rng);
  const auto d = synth::validate_error_decomposition(spec.joint, channel, q1, q2);
  const double dpi = truth.mi - truth_c.mi;
  const double gibbs = synth::expected_cross_entropy(spec.joint, q1) - truth.h_t_given_r;

  bool ok = dpi >= -1e-12 && d.identity_error <= 1e-9 && d.upper_bound_holds && d.lower_bound_holds && gibbs >= -1e-9;
  out << fmt::format("H(T) {:.6f}  H(T|R) {:.6f}  I(T;R) {:.6f}  I(T;c(R)) {:.6f}\n", truth.h_t, truth.h_t_given_r,
                     truth.mi, truth_c.mi);
  if (channel.is_deterministic()) {
    const double prop1 = std::abs(dpi - synth::conditional_mi(spec.joint, channel));
    ok = ok && prop1 <= 1e-9;
    out << fmt::format("gain {:.6f}  |gain - I(T;R|c(R))| {:.3g}\n", dpi, prop1);
  } else {
    out << fmt::format("gain {:.6f}\n", dpi);
  }
  out << fmt::format("decomposition error {:.3g}  bounds {}  gibbs slack {:.6f}\n", d.identity_error,
                     d.upper_bound_holds && d.lower_bound_holds ? "hold" : "VIOLATED", gibbs);
  return ok;
}

int cmd_synth_validate(std::size_t cases, std::uint64_t seed, const std::string& joint, const std::string& out_dir,
                       std::ostream& out) {
  if (cases < 1) throw InvalidArgument("--cases must be at least 1");
  bool ok = true;
  if (!joint.empty()) {
    // Input problems surface here as exceptions, before any property is evaluated.
    const auto spec = synth::parse_joint_spec(read_text(joint));
    ok = check_joint(spec, seed, out) && ok;
  }
  const auto summary = synth::run_sweep(cases, seed);
  out << fmt::format("{} cases  dpi {:.3g}  prop1 {:.3g}  decomposition {:.3g}  gibbs {:.3g}  bound violations {}\n",
                     summary.cases.size(), summary.worst_dpi_violation, summary.worst_prop1_error,
                     summary.worst_identity_error, summary.worst_gibbs_violation, summary.bound_violations);
  ok = ok && summary.passed();
  out << (ok ? "PASS\n" : "FAIL\n");
  if (!out_dir.empty()) write_text(fs::path(out_dir) / "synth.csv", synth::sweep_csv(summary));
  return ok ? ExitCode::ok : ExitCode::failure;
}

int cmd_extract_check(const std::string& conllu_path, const std::string& pemb, const std::string& vec,
                      std::ostream& out) {
  const auto corpus = conllu::read_conllu(conllu_path);
  const auto hash = conllu::corpus_token_hash(corpus);
  out << fmt::format("{}: {} sentences, {} tokens, hash {:016x}\n", conllu_path, corpus.sentences.size(),
                     corpus.token_count(), hash);
  if (!pemb.empty()) {
    const auto e = embedkit::load_embedding_matrix(pemb, corpus);
    out << fmt::format("{}: {} x {} aligned\n", pemb, e.count(), e.dim());
  }
  if (!vec.empty()) {
    const auto table = embedkit::load_vec_file(vec);
    const auto vocab = embedkit::corpus_vocab(corpus);
    std::size_t covered = 0;
    for (const auto& w : vocab) covered += table.find(w).has_value() ? 1 : 0;
    out << fmt::format("{}: {} types x {}, covers {} of {} corpus types\n", vec, table.types().size(),
                       table.matrix().cols(), covered, vocab.size());
    for (const auto& w : table.warnings()) out << "warning: " << w << '\n';
  }
  return ExitCode::ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Information-theoretic probing toolkit", "infoprobe"};
  app.require_subcommand(1);

  CommonFlags validate_flags, estimate_flags, baseline_flags;
  std::string replay;
  auto* validate = app.add_subcommand("validate", "parse treebanks and check embedding alignment");
  add_common(validate, validate_flags);
  auto* estimate = app.add_subcommand("estimate", "search probes and report entropies and gains");
  add_common(estimate, estimate_flags);
  estimate->add_option("--replay", replay, "CSV of precomputed entropies; skips training");
  auto* baseline = app.add_subcommand("baseline", "most-frequent-label memorizer");
  add_common(baseline, baseline_flags);

  std::size_t cases = 100;
  std::uint64_t synth_seed = 0;
  std::string joint, synth_out;
  auto* synth_cmd = app.add_subcommand("synth-validate", "check the information identities on random joints");
  synth_cmd->add_option("--cases", cases, "number of random cases")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "sweep seed")->capture_default_str();
  synth_cmd->add_option("--joint", joint, "also check a joint spec file");
  synth_cmd->add_option("--out", synth_out, "directory for synth.csv");

  std::string conllu_path, pemb, vec;
  auto* extract = app.add_subcommand("extract-check", "check extracted embeddings against a treebank");
  extract->add_option("--conllu", conllu_path, "treebank file")->required();
  extract->add_option("--pemb", pemb, "PEMB file to check");
  extract->add_option("--vec", vec, ".vec file to check");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::input_error;
  }

  try {
    if (*validate) return cmd_validate(validate_flags, out);
    if (*estimate) return cmd_estimate(estimate_flags, replay, out, err);
    if (*baseline) return cmd_baseline(baseline_flags, out);
    if (*synth_cmd) return cmd_synth_validate(cases, synth_seed, joint, synth_out, out);
    if (*extract) return cmd_extract_check(conllu_path, pemb, vec, out);
  } catch (const AlignmentError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::alignment;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::input_error;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::input_error;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::input_error;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::data_error;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::data_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::failure;
  }
  return ExitCode::failure;
}

}  // namespace infoprobe::cli
