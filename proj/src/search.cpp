#include "infoprobe/search.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"
#include "infoprobe/estimator.hpp"

namespace infoprobe::search {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const KeyValues& kv, std::string_view key, T fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  T value{};
  const auto& s = it->second;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw InvalidArgument(fmt::format("config key '{}': cannot parse '{}'", key, s));
  }
  return value;
}

int log_uniform_int(Rng& rng, int lo, int hi) {
  if (lo == hi) return lo;
  const double x = std::exp(uniform(rng, std::log(static_cast<double>(lo)), std::log(static_cast<double>(hi))));
  return std::clamp(static_cast<int>(std::lround(x)), lo, hi);
}

bool better(const TrialResult& a, const TrialResult& b) {
  if (a.dev_ce != b.dev_ce) return a.dev_ce < b.dev_ce;
  return a.index < b.index;
}

}  // namespace

void validate(const SearchSpace& s) {
  auto check = [](bool ok, std::string_view what) {
    if (!ok) throw InvalidArgument(fmt::format("search space: {}", what));
  };
  check(s.layers.lo >= 1 && s.layers.lo <= s.layers.hi, "layers range must be non-empty and >= 1");
  check(s.width.lo >= 1 && s.width.lo <= s.width.hi, "width range must be non-empty and >= 1");
  check(s.dropout.lo >= 0.0 && s.dropout.lo <= s.dropout.hi && s.dropout.hi < 1.0,
        "dropout range must be non-empty and inside [0, 1)");
  check(s.onehot_dim.lo >= 1 && s.onehot_dim.lo <= s.onehot_dim.hi, "one-hot dim range must be non-empty and >= 1");
  check(s.n_trials >= 1, "need at least one trial");
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument(fmt::format("config line {}: expected 'key = value'", line_no));
    }
    kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

SearchSpace search_space_from(const KeyValues& kv, SearchSpace s) {
  s.layers = {parse_number(kv, "layers_min", s.layers.lo), parse_number(kv, "layers_max", s.layers.hi)};
  s.width = {parse_number(kv, "width_min", s.width.lo), parse_number(kv, "width_max", s.width.hi)};
  s.dropout = {parse_number(kv, "dropout_min", s.dropout.lo), parse_number(kv, "dropout_max", s.dropout.hi)};
  s.onehot_dim = {parse_number(kv, "onehot_dim_min", s.onehot_dim.lo),
                  parse_number(kv, "onehot_dim_max", s.onehot_dim.hi)};
  s.n_trials = parse_number(kv, "trials", s.n_trials);
  validate(s);
  return s;
}

nn::TrainSettings train_settings_from(const KeyValues& kv, nn::TrainSettings t) {
  t.learning_rate = parse_number(kv, "learning_rate", t.learning_rate);
  t.batch_size = parse_number(kv, "batch_size", t.batch_size);
  t.max_epochs = parse_number(kv, "max_epochs", t.max_epochs);
  t.patience = parse_number(kv, "patience", t.patience);
  return t;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_index) {
  return mix_seed(master_seed, trial_index);
}

nn::ProbeConfig sample_config(const SearchSpace& space, std::uint64_t master_seed, std::size_t trial_index) {
  validate(space);
  if (trial_index >= space.n_trials) {
    throw InvalidArgument(fmt::format("trial index {} out of range for {} trials", trial_index, space.n_trials));
  }
  nn::ProbeConfig c;
  c.seed = trial_seed(master_seed, trial_index);
  Rng rng(mix_seed(c.seed, 0xC0F));
  c.layers = static_cast<int>(uniform_int(rng, space.layers.lo, space.layers.hi));
  c.base_width = log_uniform_int(rng, space.width.lo, space.width.hi);
  c.dropout_rate = space.dropout.lo == space.dropout.hi ? space.dropout.lo
                                                          : uniform(rng, space.dropout.lo, space.dropout.hi);
  c.onehot_dim = log_uniform_int(rng, space.onehot_dim.lo, space.onehot_dim.hi);
  return c;
}

std::optional<std::size_t> select_winner(std::span<const TrialResult> trials) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].status != TrialStatus::ok) continue;
    if (!best || better(trials[i], trials[*best])) best = i;
  }
  return best;
}

SearchOutcome run_search(const SearchSpace& space, const DataProvider& data, std::uint64_t master_seed,
                         const SearchOptions& options) {
  validate(space);
  std::vector<TrialResult> trials(space.n_trials);
  std::optional<nn::Model> best_model;
  std::optional<TrialResult> best_trial;
  std::mutex best_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const auto i = next.fetch_add(1);
      if (i >= space.n_trials) return;
      try {
        TrialResult r;
        r.index = i;
        r.config = sample_config(space, master_seed, i);
        auto d = data(r.config);
        auto probe = nn::init_probe(r.config, d.train.input_dim(), d.num_classes, r.config.seed);
        auto trained = nn::train(std::move(probe), d.trainable, d.train, d.dev, options.train, r.config.seed);
        r.epochs_run = trained.epochs_run();
        r.best_epoch = trained.best_epoch;
        r.status = trained.diverged || trained.dev_ce.empty() ? TrialStatus::diverged : TrialStatus::ok;
        r.dev_ce = trained.dev_ce.empty() ? std::nan("") : trained.best_dev_ce();
        trials[i] = r;
        if (r.status == TrialStatus::ok) {
          std::lock_guard lock(best_mutex);
          if (!best_trial || better(r, *best_trial)) {
            best_trial = r;
            best_model = std::move(trained.model);
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = space.n_trials;
      }
    }
  };

  const auto n_threads = std::max<std::size_t>(1, std::min(options.threads, space.n_trials));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const auto winner = select_winner(trials);
  if (!winner) {
    throw SearchFailure(fmt::format("all {} trials diverged", space.n_trials));
  }
  auto& best = trials[*winner];
  const auto d = data(best.config);
  best.test_ce = nn::mean_cross_entropy_bits(*best_model, d.test);
  best.test_accuracy = estimator::accuracy(*best_model, d.test, d.predictable);
  return SearchOutcome{best, std::move(trials), std::move(*best_model)};
}

std::string ledger_csv(std::span<const TrialResult> trials) {
  std::string out = "trial,layers,width,dropout,onehot_dim,seed,status,epochs_run,best_epoch,dev_ce,test_ce,test_accuracy\n";
  for (const auto& t : trials) {
    out += fmt::format("{},{},{},{:.17g},{},{},{},{},{},{:.17g},{},{}\n", t.index, t.config.layers,
                       t.config.base_width, t.config.dropout_rate, t.config.onehot_dim, t.config.seed,
                       t.status == TrialStatus::ok ? "ok" : "diverged", t.epochs_run, t.best_epoch, t.dev_ce,
                       t.test_ce ? fmt::format("{:.17g}", *t.test_ce) : std::string{},
                       t.test_accuracy ? fmt::format("{:.17g}", *t.test_accuracy) : std::string{});
  }
  return out;
}

}  // namespace infoprobe::search
