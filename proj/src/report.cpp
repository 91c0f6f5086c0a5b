#include "infoprobe/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"

namespace infoprobe::report {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr std::string_view kControlPrefix = "H_T_given_c_";

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

double scale_of(Units u) { return u == Units::nats ? kLn2 : 1.0; }

std::vector<std::string> control_tags(std::span<const estimator::EstimateReport> rows) {
  std::vector<std::string> tags;
  for (const auto& r : rows) {
    for (const auto& c : r.controls) {
      if (std::find(tags.begin(), tags.end(), c.tag) == tags.end()) tags.push_back(c.tag);
    }
  }
  return tags;
}

const estimator::ControlResult* find_control(const estimator::EstimateReport& r, const std::string& tag) {
  for (const auto& c : r.controls) {
    if (c.tag == tag) return &c;
  }
  return nullptr;
}

std::string full(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string format_gain_cell(double gain, double percent) { return fmt::format("{:.2f} ({:.1f}%)", gain, percent); }

std::string group_thousands(std::size_t n) {
  auto digits = std::to_string(n);
  std::string out;
  const auto len = digits.size();
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0 && (len - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::vector<estimator::EstimateReport> parse_replay_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  if (lines.empty()) {
    throw FormatError("replay file: missing header");
  }
  const auto header = split_csv(lines.front());
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_lang = column("language");
  const auto c_h = column("H_T");
  const auto c_r = column("H_T_given_R");
  if (!c_lang || !c_h || !c_r) {
    throw FormatError("replay file: header needs language, H_T and H_T_given_R");
  }
  const auto c_task = column("task");
  const auto c_train = column("train_tokens");
  const auto c_test = column("test_tokens");
  const auto c_classes = column("classes");
  std::vector<std::pair<std::string, std::size_t>> controls;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].starts_with(kControlPrefix)) controls.emplace_back(header[i].substr(kControlPrefix.size()), i);
  }

  std::vector<estimator::EstimateReport> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_csv(lines[li]);
    if (f.size() != header.size()) {
      throw FormatError(fmt::format("replay file row {}: {} fields for {} columns", li, f.size(), header.size()));
    }
    auto num = [&](std::size_t col) {
      double v = 0.0;
      const auto& s = f[col];
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) {
        throw FormatError(fmt::format("replay file row {}: cannot parse '{}' in column {}", li, s, header[col]));
      }
      return v;
    };
    auto count = [&](std::optional<std::size_t> col) -> std::size_t {
      if (!col) return 0;
      std::string s;
      for (char ch : f[*col]) {
        if (ch != '_' && ch != ' ') s += ch;  // allow 203_762 style grouping
      }
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) {
        throw FormatError(fmt::format("replay file row {}: cannot parse count '{}'", li, f[*col]));
      }
      return v;
    };
    estimator::EstimateReport r;
    r.name = f[*c_lang];
    r.task = c_task ? f[*c_task] : std::string{};
    r.train_tokens = count(c_train);
    r.test_tokens = count(c_test);
    r.classes = count(c_classes);
    r.h_t = num(*c_h);
    r.h_t_given_r = num(*c_r);
    for (const auto& [tag, col] : controls) {
      estimator::ControlResult c;
      c.tag = tag;
      c.h_t_given_c = num(col);
      r.controls.push_back(c);
    }
    r.recompute_gains();
    out.push_back(std::move(r));
  }
  return out;
}

std::string text_table(std::span<const estimator::EstimateReport> rows, Units units) {
  const double k = scale_of(units);
  const auto tags = control_tags(rows);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"Language", "Task", "Train", "Test", "Classes", "H(T)", "H(T|R)"};
  for (const auto& t : tags) {
    head.push_back(fmt::format("H(T|c(R)) {}", t));
    head.push_back(fmt::format("G {}", t));
  }
  head.push_back("Acc R");
  for (const auto& t : tags) head.push_back(fmt::format("Acc {}", t));
  head.push_back("H(T|id(R))");
  cells.push_back(head);

  for (const auto& r : rows) {
    std::vector<std::string> row{r.name,
                                 r.task,
                                 group_thousands(r.train_tokens),
                                 group_thousands(r.test_tokens),
                                 std::to_string(r.classes),
                                 fmt::format("{:.2f}", r.h_t * k),
                                 fmt::format("{:.2f}", r.h_t_given_r * k)};
    for (const auto& t : tags) {
      if (const auto* c = find_control(r, t)) {
        row.push_back(fmt::format("{:.2f}", c->h_t_given_c * k));
        row.push_back(format_gain_cell(c->gain.value * k, c->gain.percent_of_HT));
      } else {
        row.insert(row.end(), {"-", "-"});
      }
    }
    row.push_back(r.accuracy_r ? fmt::format("{:.2f}", *r.accuracy_r) : "-");
    for (const auto& t : tags) {
      const auto* c = find_control(r, t);
      row.push_back(c && c->accuracy ? fmt::format("{:.2f}", *c->accuracy) : "-");
    }
    row.push_back(r.h_t_given_word ? fmt::format("{:.2f}", *r.h_t_given_word * k) : "-");
    cells.push_back(std::move(row));
  }

  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::string out;
  for (std::size_t ri = 0; ri < cells.size(); ++ri) {
    for (std::size_t i = 0; i < cells[ri].size(); ++i) {
      if (i > 0) out += "  ";
      // Text columns left-aligned, numbers right-aligned.
      out += i < 2 ? fmt::format("{:<{}}", cells[ri][i], width[i]) : fmt::format("{:>{}}", cells[ri][i], width[i]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    if (ri == 0) {
      std::size_t total = 0;
      for (const auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    }
  }
  return out;
}

std::string csv(std::span<const estimator::EstimateReport> rows, Units units) {
  const double k = scale_of(units);
  const auto tags = control_tags(rows);
  std::string out = "language,task,units,train_tokens,test_tokens,classes,H_T,H_T_given_R";
  for (const auto& t : tags) out += fmt::format(",H_T_given_c_{0},gain_{0},gain_pct_{0}", t);
  out += ",accuracy_R";
  for (const auto& t : tags) out += fmt::format(",accuracy_{}", t);
  out += ",H_T_given_word\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}", r.name, r.task, units == Units::nats ? "nats" : "bits",
                       r.train_tokens, r.test_tokens, r.classes, full(r.h_t * k), full(r.h_t_given_r * k));
    for (const auto& t : tags) {
      if (const auto* c = find_control(r, t)) {
        out += fmt::format(",{},{},{}", full(c->h_t_given_c * k), full(c->gain.value * k), full(c->gain.percent_of_HT));
      } else {
        out += ",,,";
      }
    }
    out += "," + (r.accuracy_r ? full(*r.accuracy_r) : std::string{});
    for (const auto& t : tags) {
      const auto* c = find_control(r, t);
      out += "," + (c && c->accuracy ? full(*c->accuracy) : std::string{});
    }
    out += "," + (r.h_t_given_word ? full(*r.h_t_given_word * k) : std::string{});
    out += '\n';
  }
  return out;
}

}  // namespace infoprobe::report
