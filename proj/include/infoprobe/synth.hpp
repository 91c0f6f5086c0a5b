#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "infoprobe/matrix.hpp"
#include "infoprobe/nn.hpp"
#include "infoprobe/rng.hpp"

namespace infoprobe::synth {

/// Finite joint p(t, r). probs is |T| x |R|; r_support holds one embedding
/// vector per r value so that real probes can consume samples.
struct JointDistribution {
  std::vector<std::string> t_support;
  Matrix r_support;
  Matrix probs;

  std::size_t num_labels() const { return static_cast<std::size_t>(probs.rows()); }
  std::size_t num_values() const { return static_cast<std::size_t>(probs.cols()); }
};

/// Throws InvalidArgument unless probs is non-negative, sums to 1 within
/// 1e-12 and the supports agree in size.
void validate(const JointDistribution& joint);

/// Builds a joint with labels "t0".."tK-1"; rescales probs to sum to 1.
JointDistribution make_joint(Matrix probs, Matrix r_support);

/// c(.) as either a function of r (mapping) or a row-stochastic |R| x |C| matrix.
class Channel {
 public:
  static Channel deterministic(std::vector<std::size_t> mapping, std::size_t outputs);
  static Channel stochastic(Matrix transition);
  static Channel identity(std::size_t n);
  static Channel constant(std::size_t n);

  bool is_deterministic() const { return deterministic_; }
  std::size_t inputs() const { return static_cast<std::size_t>(transition_.rows()); }
  std::size_t outputs() const { return outputs_; }
  const std::vector<std::size_t>& mapping() const { return mapping_; }
  /// |R| x |C| row-stochastic matrix (0/1 rows for deterministic channels).
  const Matrix& transition() const { return transition_; }

  /// Embedding for each c value. Defaults to the one-hot basis of size |C|.
  Matrix c_support;

 private:
  std::vector<std::size_t> mapping_;
  std::size_t outputs_ = 0;
  bool deterministic_ = true;
  Matrix transition_;
};

/// Throws InvalidArgument if the channel does not fit the joint or a row of
/// a stochastic channel does not sum to 1 within 1e-12.
void validate(const Channel& channel, const JointDistribution& joint);

struct TrueQuantities {
  double h_t = 0.0;
  double h_t_given_r = 0.0;
  double mi = 0.0;
};

TrueQuantities true_quantities(const JointDistribution& joint);

/// Pushforward joint over (T, c(R)).
JointDistribution apply_channel(const JointDistribution& joint, const Channel& channel);

/// I(T; R | c(R)) by enumerating p(t, r, c) directly. Deterministic channels only.
double conditional_mi(const JointDistribution& joint, const Channel& channel);

/// p(t | r) as a |R| x |T| row-stochastic matrix. Rows with p(r) = 0 are uniform.
Matrix conditional(const JointDistribution& joint);

/// E_p[-log2 q(t|r)], q given as |R| x |T| rows.
double expected_cross_entropy(const JointDistribution& joint, const Matrix& q);

/// E_{r~p} KL(p(.|r) || q(.|r)) in bits.
double expected_kl(const JointDistribution& joint, const Matrix& q);

struct DecompositionCheck {
  double estimated_gain = 0.0;  // H_q2(T|c(R)) - H_q1(T|R)
  double true_gain = 0.0;       // I(T;R) - I(T;c(R))
  double kl1 = 0.0;             // E KL(p(.|r) || q1(.|r))
  double kl2 = 0.0;             // E KL(p(.|c) || q2(.|c))
  /// |true_gain - (estimated_gain + kl1 - kl2)|
  double identity_error = 0.0;
  bool upper_bound_holds = true;  // true_gain <= estimated_gain + kl1
  bool lower_bound_holds = true;  // true_gain >= estimated_gain - kl2
};

/// Checks true gain = estimated gain + KL1 - KL2 and the two bounds it implies.
/// q1 is |R| x |T|, q2 is |C| x |T|; rows must sum to 1 within 1e-9.
DecompositionCheck validate_error_decomposition(const JointDistribution& joint, const Channel& channel,
                                                const Matrix& q1, const Matrix& q2, double tolerance = 1e-9);

struct Sample {
  std::vector<int> labels;
  std::vector<std::size_t> values;  // r index per draw
};

/// n i.i.d. draws from the joint.
Sample sample(const JointDistribution& joint, std::size_t n, std::uint64_t seed);

/// Empirical |T| x |R| frequencies of a sample.
Matrix empirical_joint(const Sample& s, std::size_t num_labels, std::size_t num_values);

/// Wraps a sample as probe examples whose features are the r-support vectors.
nn::Examples to_examples(const Sample& s, const Matrix& support);
/// Same sample seen through a deterministic channel, with c-support features.
nn::Examples to_examples(const Sample& s, const Channel& channel);

// Random instances for property sweeps.
JointDistribution random_joint(std::size_t num_labels, std::size_t num_values, std::size_t dim, Rng& rng);
Channel random_merge_channel(std::size_t num_values, std::size_t outputs, Rng& rng);
/// Row-stochastic matrix: `base` perturbed multiplicatively by exp(N(0, scale)) noise.
Matrix perturb(const Matrix& base, double scale, Rng& rng);

struct SweepCase {
  std::size_t index = 0;
  std::size_t num_labels = 0;
  std::size_t num_values = 0;
  std::size_t outputs = 0;
  double mi = 0.0;
  double mi_control = 0.0;
  double dpi_slack = 0.0;        // I(T;R) - I(T;c(R)), must be >= -1e-12
  double prop1_error = 0.0;      // |gain - I(T;R|c(R))|
  double gibbs_slack = 0.0;      // E[-log q1] - H(T|R), must be >= -1e-9
  DecompositionCheck decomposition;
};

struct SweepSummary {
  std::vector<SweepCase> cases;
  double worst_dpi_violation = 0.0;
  double worst_prop1_error = 0.0;
  double worst_identity_error = 0.0;
  double worst_gibbs_violation = 0.0;
  std::size_t bound_violations = 0;

  bool passed() const {
    return worst_dpi_violation <= 1e-12 && worst_prop1_error <= 1e-9 && worst_identity_error <= 1e-9 &&
           worst_gibbs_violation <= 1e-9 && bound_violations == 0;
  }
};

/// Seeded sweep over random joints (supports up to 16 x 16) and merge channels.
SweepSummary run_sweep(std::size_t n_cases, std::uint64_t seed);

std::string sweep_csv(const SweepSummary& summary);

struct JointSpec {
  JointDistribution joint;
  std::optional<Channel> channel;
};

/// Text format:
///   labels K
///   points N D
///   point x1 .. xD        (N lines)
///   row p(t,r_1) .. p(t,r_N)  (K lines)
///   channel c(r_1) .. c(r_N)  (optional, deterministic)
///   transition q_1 .. q_C     (optional, N lines, stochastic; instead of channel)
/// Blank lines and lines starting with '#' are ignored.
JointSpec parse_joint_spec(std::string_view text);

}  // namespace infoprobe::synth
