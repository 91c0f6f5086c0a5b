#include "infoprobe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"

namespace infoprobe::synth {

namespace {

double xlog2x_ratio(double p, double q) {
  // p * log2(p / q) with the 0 log 0 = 0 convention.
  if (p <= 0.0) return 0.0;
  return p * std::log2(p / q);
}

double entropy_of(const Vector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log2(p[i]);
  }
  return h;
}

double normal(Rng& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void check_rows(const Matrix& q, std::size_t rows, std::size_t cols, const char* name, double tol) {
  if (static_cast<std::size_t>(q.rows()) != rows || static_cast<std::size_t>(q.cols()) != cols) {
    throw InvalidArgument(fmt::format("{} must be {} x {}, got {} x {}", name, rows, cols, q.rows(), q.cols()));
  }
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    if ((q.row(i).array() < 0.0).any()) {
      throw InvalidArgument(fmt::format("{} row {} has a negative entry", name, i));
    }
    const double s = q.row(i).sum();
    if (std::abs(s - 1.0) > tol) {
      throw InvalidArgument(fmt::format("{} row {} sums to {:.17g}, not 1", name, i, s));
    }
  }
}

Matrix one_hot_basis(std::size_t n) { return Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)); }

}  // namespace

void validate(const JointDistribution& joint) {
  if (joint.probs.rows() == 0 || joint.probs.cols() == 0) {
    throw InvalidArgument("joint distribution has an empty support");
  }
  if (!joint.t_support.empty() && joint.t_support.size() != joint.num_labels()) {
    throw InvalidArgument(fmt::format("joint has {} label names for {} label rows", joint.t_support.size(),
                                      joint.num_labels()));
  }
  if (joint.r_support.rows() != joint.probs.cols()) {
    throw InvalidArgument(fmt::format("joint has {} support vectors for {} r values", joint.r_support.rows(),
                                      joint.probs.cols()));
  }
  if ((joint.probs.array() < 0.0).any() || !joint.probs.allFinite()) {
    throw InvalidArgument("joint probabilities must be finite and non-negative");
  }
  const double s = joint.probs.sum();
  if (std::abs(s - 1.0) > 1e-12) {
    throw InvalidArgument(fmt::format("joint probabilities sum to {:.17g}, not 1", s));
  }
}

JointDistribution make_joint(Matrix probs, Matrix r_support) {
  JointDistribution j;
  const double s = probs.sum();
  if (!(s > 0.0)) {
    throw InvalidArgument("joint probabilities must have positive mass");
  }
  j.probs = probs / s;
  j.r_support = std::move(r_support);
  for (Eigen::Index t = 0; t < j.probs.rows(); ++t) {
    j.t_support.push_back(fmt::format("t{}", t));
  }
  validate(j);
  return j;
}

Channel Channel::deterministic(std::vector<std::size_t> mapping, std::size_t outputs) {
  Channel c;
  c.outputs_ = outputs;
  c.deterministic_ = true;
  c.transition_ = Matrix::Zero(static_cast<Eigen::Index>(mapping.size()), static_cast<Eigen::Index>(outputs));
  for (std::size_t r = 0; r < mapping.size(); ++r) {
    if (mapping[r] >= outputs) {
      throw InvalidArgument(fmt::format("channel maps r={} to {} but has only {} outputs", r, mapping[r], outputs));
    }
    c.transition_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(mapping[r])) = 1.0;
  }
  c.mapping_ = std::move(mapping);
  c.c_support = one_hot_basis(outputs);
  return c;
}

Channel Channel::stochastic(Matrix transition) {
  Channel c;
  c.outputs_ = static_cast<std::size_t>(transition.cols());
  c.deterministic_ = false;
  c.transition_ = std::move(transition);
  c.c_support = one_hot_basis(c.outputs_);
  return c;
}

Channel Channel::identity(std::size_t n) {
  std::vector<std::size_t> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = i;
  return deterministic(std::move(m), n);
}

Channel Channel::constant(std::size_t n) { return deterministic(std::vector<std::size_t>(n, 0), 1); }

void validate(const Channel& channel, const JointDistribution& joint) {
  if (channel.inputs() != joint.num_values()) {
    throw InvalidArgument(fmt::format("channel takes {} inputs but the joint has {} r values", channel.inputs(),
                                      joint.num_values()));
  }
  if (channel.outputs() == 0) {
    throw InvalidArgument("channel has no outputs");
  }
  check_rows(channel.transition(), channel.inputs(), channel.outputs(), "channel", 1e-12);
  if (static_cast<std::size_t>(channel.c_support.rows()) != channel.outputs()) {
    throw InvalidArgument("channel c_support must have one row per output");
  }
}

TrueQuantities true_quantities(const JointDistribution& joint) {
  validate(joint);
  const Vector pt = joint.probs.rowwise().sum();
  const Vector pr = joint.probs.colwise().sum().transpose();
  TrueQuantities q;
  q.h_t = entropy_of(pt);
  double h = 0.0;
  for (Eigen::Index r = 0; r < joint.probs.cols(); ++r) {
    for (Eigen::Index t = 0; t < joint.probs.rows(); ++t) {
      h += xlog2x_ratio(joint.probs(t, r), pr[r]) * -1.0;
    }
  }
  q.h_t_given_r = std::max(h, 0.0);
  q.mi = q.h_t - q.h_t_given_r;
  return q;
}

JointDistribution apply_channel(const JointDistribution& joint, const Channel& channel) {
  validate(joint);
  validate(channel, joint);
  JointDistribution out;
  out.t_support = joint.t_support;
  out.probs = joint.probs * channel.transition();
  out.r_support = channel.c_support;
  return out;
}

double conditional_mi(const JointDistribution& joint, const Channel& channel) {
  validate(joint);
  validate(channel, joint);
  if (!channel.is_deterministic()) {
    throw InvalidArgument("conditional_mi requires a deterministic channel");
  }
  const auto nt = joint.probs.rows();
  const auto nr = joint.probs.cols();
  const auto nc = static_cast<Eigen::Index>(channel.outputs());
  const auto& map = channel.mapping();
  // p(t, r, c) = p(t, r) [c = c(r)]
  Vector pc = Vector::Zero(nc);
  Matrix ptc = Matrix::Zero(nt, nc);
  Vector prc = Vector::Zero(nr);  // p(r, c(r)); zero for every other c
  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto c = static_cast<Eigen::Index>(map[static_cast<std::size_t>(r)]);
    for (Eigen::Index t = 0; t < nt; ++t) {
      const double p = joint.probs(t, r);
      pc[c] += p;
      ptc(t, c) += p;
      prc[r] += p;
    }
  }
  double i = 0.0;
  for (Eigen::Index r = 0; r < nr; ++r) {
    const auto c = static_cast<Eigen::Index>(map[static_cast<std::size_t>(r)]);
    for (Eigen::Index t = 0; t < nt; ++t) {
      const double p = joint.probs(t, r);
      if (p <= 0.0) continue;
      i += p * std::log2(p * pc[c] / (ptc(t, c) * prc[r]));
    }
  }
  return std::max(i, 0.0);
}

Matrix conditional(const JointDistribution& joint) {
  const auto nt = joint.probs.rows();
  Matrix q(joint.probs.cols(), nt);
  for (Eigen::Index r = 0; r < joint.probs.cols(); ++r) {
    const double pr = joint.probs.col(r).sum();
    if (pr > 0.0) {
      q.row(r) = joint.probs.col(r).transpose() / pr;
    } else {
      q.row(r).setConstant(1.0 / static_cast<double>(nt));
    }
  }
  return q;
}

double expected_cross_entropy(const JointDistribution& joint, const Matrix& q) {
  check_rows(q, joint.num_values(), joint.num_labels(), "q", 1e-9);
  double ce = 0.0;
  for (Eigen::Index r = 0; r < joint.probs.cols(); ++r) {
    for (Eigen::Index t = 0; t < joint.probs.rows(); ++t) {
      const double p = joint.probs(t, r);
      if (p > 0.0) ce -= p * std::log2(q(r, t));
    }
  }
  return ce;
}

double expected_kl(const JointDistribution& joint, const Matrix& q) {
  check_rows(q, joint.num_values(), joint.num_labels(), "q", 1e-9);
  const auto p = conditional(joint);
  double kl = 0.0;
  for (Eigen::Index r = 0; r < joint.probs.cols(); ++r) {
    for (Eigen::Index t = 0; t < joint.probs.rows(); ++t) {
      // p(t, r) log p(t|r)/q(t|r)
      kl += joint.probs(t, r) > 0.0 ? joint.probs(t, r) * std::log2(p(r, t) / q(r, t)) : 0.0;
    }
  }
  return kl;
}

DecompositionCheck validate_error_decomposition(const JointDistribution& joint, const Channel& channel,
                                                const Matrix& q1, const Matrix& q2, double tolerance) {
  validate(joint);
  validate(channel, joint);
  check_rows(q1, joint.num_values(), joint.num_labels(), "q1", 1e-9);
  check_rows(q2, channel.outputs(), joint.num_labels(), "q2", 1e-9);
  const auto pushed = apply_channel(joint, channel);
  const auto full = true_quantities(joint);
  const auto ctrl = true_quantities(pushed);

  DecompositionCheck d;
  d.estimated_gain = expected_cross_entropy(pushed, q2) - expected_cross_entropy(joint, q1);
  d.true_gain = full.mi - ctrl.mi;
  d.kl1 = expected_kl(joint, q1);
  d.kl2 = expected_kl(pushed, q2);
  d.identity_error = std::abs(d.true_gain - (d.estimated_gain + d.kl1 - d.kl2));
  d.upper_bound_holds = d.true_gain <= d.estimated_gain + d.kl1 + tolerance;
  d.lower_bound_holds = d.true_gain >= d.estimated_gain - d.kl2 - tolerance;
  return d;
}

Sample sample(const JointDistribution& joint, std::size_t n, std::uint64_t seed) {
  validate(joint);
  if (n == 0) {
    throw InvalidArgument("sample size must be >= 1");
  }
  const auto nt = joint.probs.rows();
  const auto nr = joint.probs.cols();
  // Cumulative distribution over cells in (r, t) order.
  std::vector<double> cdf;
  cdf.reserve(static_cast<std::size_t>(nt * nr));
  double acc = 0.0;
  for (Eigen::Index r = 0; r < nr; ++r) {
    for (Eigen::Index t = 0; t < nt; ++t) {
      acc += joint.probs(t, r);
      cdf.push_back(acc);
    }
  }
  Rng rng(seed);
  Sample s;
  s.labels.reserve(n);
  s.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng) * acc;
    auto cell = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    cell = std::min(cell, cdf.size() - 1);
    // Skip zero-mass cells that upper_bound can land on only through rounding.
    while (cell > 0 && cdf[cell] == cdf[cell - 1]) --cell;
    s.values.push_back(cell / static_cast<std::size_t>(nt));
    s.labels.push_back(static_cast<int>(cell % static_cast<std::size_t>(nt)));
  }
  return s;
}

Matrix empirical_joint(const Sample& s, std::size_t num_labels, std::size_t num_values) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(num_labels), static_cast<Eigen::Index>(num_values));
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    m(s.labels[i], static_cast<Eigen::Index>(s.values[i])) += 1.0;
  }
  if (!s.labels.empty()) m /= static_cast<double>(s.labels.size());
  return m;
}

nn::Examples to_examples(const Sample& s, const Matrix& support) {
  nn::Examples e;
  e.features = std::make_shared<const Matrix>(support);
  e.slots = 1;
  e.rows = s.values;
  e.labels = s.labels;
  return e;
}

nn::Examples to_examples(const Sample& s, const Channel& channel) {
  if (!channel.is_deterministic()) {
    throw InvalidArgument("to_examples needs a deterministic channel");
  }
  nn::Examples e;
  e.features = std::make_shared<const Matrix>(channel.c_support);
  e.slots = 1;
  e.rows.reserve(s.values.size());
  for (const auto v : s.values) {
    e.rows.push_back(channel.mapping().at(v));
  }
  e.labels = s.labels;
  return e;
}

JointDistribution random_joint(std::size_t num_labels, std::size_t num_values, std::size_t dim, Rng& rng) {
  Matrix probs(static_cast<Eigen::Index>(num_labels), static_cast<Eigen::Index>(num_values));
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    // Exponential weights give a flat Dirichlet; a fifth of the cells are
    // zeroed so that the 0 log 0 paths are exercised.
    const double w = -std::log(1.0 - uniform01(rng));
    probs.data()[i] = uniform01(rng) < 0.2 ? 0.0 : w;
  }
  if (probs.sum() <= 0.0) {
    probs(0, 0) = 1.0;
  }
  Matrix support(static_cast<Eigen::Index>(num_values), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < support.size(); ++i) {
    support.data()[i] = uniform(rng, -1.0, 1.0);
  }
  return make_joint(std::move(probs), std::move(support));
}

Channel random_merge_channel(std::size_t num_values, std::size_t outputs, Rng& rng) {
  std::vector<std::size_t> mapping(num_values);
  for (auto& m : mapping) {
    m = static_cast<std::size_t>(uniform_index(rng, outputs));
  }
  return Channel::deterministic(std::move(mapping), outputs);
}

Matrix perturb(const Matrix& base, double scale, Rng& rng) {
  Matrix q = base;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      q(i, j) *= std::exp(scale * normal(rng));
    }
    const double s = q.row(i).sum();
    if (s > 0.0) {
      q.row(i) /= s;
    } else {
      q.row(i).setConstant(1.0 / static_cast<double>(q.cols()));
    }
  }
  return q;
}

SweepSummary run_sweep(std::size_t n_cases, std::uint64_t seed) {
  if (n_cases == 0) {
    throw InvalidArgument("sweep needs at least one case");
  }
  SweepSummary summary;
  for (std::size_t k = 0; k < n_cases; ++k) {
    Rng rng(mix_seed(seed, k));
    SweepCase c;
    c.index = k;
    c.num_labels = static_cast<std::size_t>(uniform_int(rng, 2, 16));
    c.num_values = static_cast<std::size_t>(uniform_int(rng, 2, 16));
    c.outputs = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(c.num_values)));
    const auto dim = static_cast<std::size_t>(uniform_int(rng, 1, 8));
    const auto joint = random_joint(c.num_labels, c.num_values, dim, rng);
    const auto channel = random_merge_channel(c.num_values, c.outputs, rng);
    const auto pushed = apply_channel(joint, channel);

    const auto full = true_quantities(joint);
    const auto ctrl = true_quantities(pushed);
    c.mi = full.mi;
    c.mi_control = ctrl.mi;
    c.dpi_slack = full.mi - ctrl.mi;
    c.prop1_error = std::abs((full.mi - ctrl.mi) - conditional_mi(joint, channel));

    // Every fourth case uses exact conditionals so equality is exercised too.
    const double scale = k % 4 == 0 ? 0.0 : uniform(rng, 0.05, 1.5);
    const Matrix q1 = perturb(conditional(joint), scale, rng);
    const Matrix q2 = perturb(conditional(pushed), scale, rng);
    c.gibbs_slack = expected_cross_entropy(joint, q1) - full.h_t_given_r;
    c.decomposition = validate_error_decomposition(joint, channel, q1, q2);

    summary.worst_dpi_violation = std::max(summary.worst_dpi_violation, -c.dpi_slack);
    summary.worst_prop1_error = std::max(summary.worst_prop1_error, c.prop1_error);
    summary.worst_identity_error = std::max(summary.worst_identity_error, c.decomposition.identity_error);
    double gibbs_violation = -c.gibbs_slack;
    if (scale == 0.0) gibbs_violation = std::abs(c.gibbs_slack);
    summary.worst_gibbs_violation = std::max(summary.worst_gibbs_violation, gibbs_violation);
    if (!c.decomposition.upper_bound_holds || !c.decomposition.lower_bound_holds) {
      ++summary.bound_violations;
    }
    summary.cases.push_back(c);
  }
  return summary;
}

std::string sweep_csv(const SweepSummary& summary) {
  std::string out =
      "case,labels,values,outputs,mi,mi_control,dpi_slack,prop1_error,gibbs_slack,estimated_gain,true_gain,kl1,kl2,"
      "identity_error,upper_ok,lower_ok\n";
  for (const auto& c : summary.cases) {
    const auto& d = c.decomposition;
    out += fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n",
                       c.index, c.num_labels, c.num_values, c.outputs, c.mi, c.mi_control, c.dpi_slack,
                       c.prop1_error, c.gibbs_slack, d.estimated_gain, d.true_gain, d.kl1, d.kl2,
                       d.identity_error, d.upper_bound_holds ? 1 : 0, d.lower_bound_holds ? 1 : 0);
  }
  return out;
}

JointSpec parse_joint_spec(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t labels = 0;
  std::size_t points = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> point_rows;
  std::vector<std::vector<double>> prob_rows;
  std::vector<std::vector<double>> transition_rows;
  std::optional<std::vector<std::size_t>> mapping;

  auto fail = [&](const std::string& what) {
    throw FormatError(fmt::format("joint spec line {}: {}", line_no, what));
  };
  auto numbers = [&](std::istringstream& ls) {
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      double x = 0.0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc{} || p != tok.data() + tok.size()) fail(fmt::format("cannot parse number '{}'", tok));
      v.push_back(x);
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key.front() == '#') continue;
    if (key == "labels") {
      const auto v = numbers(ls);
      if (v.size() != 1 || v[0] < 1) fail("expected 'labels K'");
      labels = static_cast<std::size_t>(v[0]);
    } else if (key == "points") {
      const auto v = numbers(ls);
      if (v.size() != 2 || v[0] < 1 || v[1] < 1) fail("expected 'points N D'");
      points = static_cast<std::size_t>(v[0]);
      dim = static_cast<std::size_t>(v[1]);
    } else if (key == "point") {
      auto v = numbers(ls);
      if (v.size() != dim) fail(fmt::format("expected {} coordinates", dim));
      point_rows.push_back(std::move(v));
    } else if (key == "row") {
      auto v = numbers(ls);
      if (v.size() != points) fail(fmt::format("expected {} probabilities", points));
      prob_rows.push_back(std::move(v));
    } else if (key == "channel") {
      const auto v = numbers(ls);
      if (v.size() != points) fail(fmt::format("expected {} channel outputs", points));
      std::vector<std::size_t> m;
      for (const double x : v) {
        if (x < 0 || x != std::floor(x)) fail("channel outputs must be non-negative integers");
        m.push_back(static_cast<std::size_t>(x));
      }
      mapping = std::move(m);
    } else if (key == "transition") {
      transition_rows.push_back(numbers(ls));
    } else {
      fail(fmt::format("unknown key '{}'", key));
    }
  }
  if (labels == 0 || points == 0) {
    throw FormatError("joint spec: missing 'labels' or 'points'");
  }
  if (point_rows.size() != points || prob_rows.size() != labels) {
    throw FormatError(fmt::format("joint spec: expected {} point lines and {} row lines, found {} and {}", points,
                                  labels, point_rows.size(), prob_rows.size()));
  }
  Matrix support(static_cast<Eigen::Index>(points), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = 0; j < dim; ++j) support(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = point_rows[i][j];
  Matrix probs(static_cast<Eigen::Index>(labels), static_cast<Eigen::Index>(points));
  for (std::size_t i = 0; i < labels; ++i)
    for (std::size_t j = 0; j < points; ++j) probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = prob_rows[i][j];
  if ((probs.array() < 0.0).any()) {
    throw InvalidArgument("joint spec: negative probability");
  }
  if (std::abs(probs.sum() - 1.0) > 1e-6) {
    throw InvalidArgument(fmt::format("joint spec: probabilities sum to {:.9g}, not 1", probs.sum()));
  }
  JointSpec spec{make_joint(std::move(probs), std::move(support)), std::nullopt};
  if (mapping && !transition_rows.empty()) {
    throw FormatError("joint spec: give either 'channel' or 'transition' lines, not both");
  }
  if (mapping) {
    const auto outputs = mapping->empty() ? 0 : *std::max_element(mapping->begin(), mapping->end()) + 1;
    spec.channel = Channel::deterministic(std::move(*mapping), outputs);
  } else if (!transition_rows.empty()) {
    if (transition_rows.size() != points) {
      throw FormatError(fmt::format("joint spec: expected {} transition lines, found {}", points, transition_rows.size()));
    }
    const auto outputs = transition_rows.front().size();
    Matrix t(static_cast<Eigen::Index>(points), static_cast<Eigen::Index>(outputs));
    for (std::size_t i = 0; i < points; ++i) {
      if (transition_rows[i].size() != outputs) throw FormatError("joint spec: ragged transition rows");
      for (std::size_t j = 0; j < outputs; ++j) t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = transition_rows[i][j];
    }
    spec.channel = Channel::stochastic(std::move(t));
  }
  if (spec.channel) {
    validate(*spec.channel, spec.joint);
  }
  return spec;
}

}  // namespace infoprobe::synth
