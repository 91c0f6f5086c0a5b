#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infoprobe/estimator.hpp"

namespace infoprobe::report {

enum class Units { bits, nats };

/// "0.16 (4.4%)": gain to 2 decimals, percent of H(T) to 1 decimal.
std::string format_gain_cell(double gain, double percent);

/// 203762 -> "203,762".
std::string group_thousands(std::size_t n);

/// Replay input: CSV with header
///   language,task,train_tokens,test_tokens,classes,H_T,H_T_given_R,H_T_given_c_<tag>...
/// (`task` optional). Gains and percents are recomputed from the entropies.
std::vector<estimator::EstimateReport> parse_replay_csv(std::string_view text);

/// Aligned table in the layout of the published results (2-decimal display).
std::string text_table(std::span<const estimator::EstimateReport> rows, Units units = Units::bits);

/// Same numbers at full double precision.
std::string csv(std::span<const estimator::EstimateReport> rows, Units units = Units::bits);

}  // namespace infoprobe::report
