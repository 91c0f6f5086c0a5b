#include <doctest.h>

#include <cmath>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"
#include "infoprobe/report.hpp"
#include "support/support.hpp"

using namespace infoprobe;
using namespace infoprobe::report;

TEST_CASE("gain cells") {
  CHECK(format_gain_cell(0.39 - 0.23, 100 * (0.39 - 0.23) / 3.61) == "0.16 (4.4%)");
  CHECK(format_gain_cell(0.23 - 0.36, 100 * (0.23 - 0.36) / 3.03) == "-0.13 (-4.3%)");
  CHECK(format_gain_cell(0.0, 0.0) == "0.00 (0.0%)");
}

TEST_CASE("thousands") {
  CHECK(group_thousands(203762) == "203,762");
  CHECK(group_thousands(24958) == "24,958");
  CHECK(group_thousands(1173281) == "1,173,281");
  CHECK(group_thousands(999) == "999");
  CHECK(group_thousands(0) == "0");
}

TEST_CASE("replay parsing") {
  const auto rows = parse_replay_csv(
      "language,train_tokens,test_tokens,classes,H_T,H_T_given_R,H_T_given_c_fasttext\n"
      "English,203_762,24958,16,3.61,0.23,0.39\r\n"
      "# skipped\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].name == "English");
  CHECK(rows[0].train_tokens == 203762);
  REQUIRE(rows[0].controls.size() == 1);
  CHECK(rows[0].controls[0].tag == "fasttext");
  CHECK(rows[0].controls[0].gain.value == doctest::Approx(0.16));

  CHECK_THROWS_AS(parse_replay_csv(""), FormatError);
  CHECK_THROWS_AS(parse_replay_csv("language,H_T\nx,1\n"), FormatError);
  CHECK_THROWS_AS(parse_replay_csv("language,H_T,H_T_given_R\nx,1\n"), FormatError);
  CHECK_THROWS_AS(parse_replay_csv("language,H_T,H_T_given_R\nx,1,abc\n"), FormatError);
}

TEST_CASE("English row of the POS table") {
  const auto rows = parse_replay_csv(testsupport::slurp(testsupport::data_dir() / "table1_pos.csv"));
  const auto table = text_table(rows);
  CHECK(table.find("203,762") != std::string::npos);
  CHECK(table.find("24,958") != std::string::npos);
  CHECK(table.find("0.16 (4.4%)") != std::string::npos);
  CHECK(table.find("-0.13 (-4.3%)") != std::string::npos);
}

TEST_CASE("csv keeps full precision and units") {
  estimator::EstimateReport r;
  r.name = "x";
  r.task = "pos";
  r.h_t = 1.0 / 3.0;
  r.h_t_given_r = 0.1;
  r.controls.push_back({"onehot", 0.2, {}, 0.5});
  r.recompute_gains();
  const std::vector<estimator::EstimateReport> rows{r};
  const auto bits = csv(rows);
  CHECK(bits.find("0.33333333333333331") != std::string::npos);
  CHECK(bits.find(",bits,") != std::string::npos);
  const auto nats = csv(rows, Units::nats);
  CHECK(nats.find(fmt::format("{:.17g}", std::log(2.0) / 3.0)) != std::string::npos);
  // Percentages are unit-free.
  CHECK(nats.find(fmt::format("{:.17g}", r.controls[0].gain.percent_of_HT)) != std::string::npos);
  CHECK(text_table(rows, Units::nats).find("0.23") != std::string::npos);
}
