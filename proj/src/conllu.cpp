#include "infoprobe/conllu.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"

namespace infoprobe::conllu {

namespace {

constexpr std::size_t kColumns = 10;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
  }
  return "?";
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) {
    n += s.tokens.size();
  }
  return n;
}

std::vector<std::string> Corpus::forms() const {
  std::vector<std::string> out;
  out.reserve(token_count());
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) {
      out.push_back(t.form);
    }
  }
  return out;
}

Corpus parse_conllu(std::string_view text, Split split) {
  Corpus corpus;
  corpus.split = split;
  Sentence current;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto flush = [&] {
    if (!current.tokens.empty()) {
      corpus.sentences.push_back(std::move(current));
      current = Sentence{};
    }
  };

  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      eol = text.size();
    }
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }

    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') {
      continue;
    }

    const auto fields = split_tabs(line);
    if (fields.size() != kColumns) {
      throw ParseError(line_no, fmt::format("expected {} tab-separated columns, found {}", kColumns,
                                            fields.size()));
    }
    const auto id = fields[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) {
      continue;  // multiword range or empty node
    }
    const auto index = parse_int(id);
    if (!index) {
      throw ParseError(line_no, fmt::format("non-integer ID '{}'", id));
    }
    const int expected = static_cast<int>(current.tokens.size()) + 1;
    if (*index != expected) {
      throw ParseError(line_no, fmt::format("token ID {} out of sequence (expected {})", *index, expected));
    }
    const auto head = parse_int(fields[6]);
    if (!head || *head < 0) {
      throw ParseError(line_no, fmt::format("invalid HEAD '{}'", fields[6]));
    }
    if (fields[1].empty()) {
      throw ParseError(line_no, "empty FORM");
    }
    current.tokens.push_back(Token{*index, std::string(fields[1]), std::string(fields[3]), *head,
                                   std::string(fields[7])});
  }
  flush();
  return corpus;
}

Corpus read_conllu(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_conllu(buffer.str(), split);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

std::string to_conllu(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) {
      out += fmt::format("{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_\n", t.index, t.form, t.upos, t.head, t.deprel);
    }
    out += '\n';
  }
  return out;
}

std::vector<PosInstance> pos_instances(const Corpus& corpus) {
  std::vector<PosInstance> out;
  out.reserve(corpus.token_count());
  std::size_t flat = 0;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) {
      out.push_back({flat++, t.upos});
    }
  }
  return out;
}

std::vector<DepInstance> dep_instances(const Corpus& corpus) {
  std::vector<DepInstance> out;
  std::size_t offset = 0;
  for (std::size_t si = 0; si < corpus.sentences.size(); ++si) {
    const auto& tokens = corpus.sentences[si].tokens;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& t = tokens[i];
      if (t.head == 0) {
        continue;
      }
      if (t.head < 0 || static_cast<std::size_t>(t.head) > tokens.size()) {
        throw DataError(fmt::format("sentence {}: token {} has head {} but the sentence has {} tokens",
                                    si + 1, t.index, t.head, tokens.size()));
      }
      out.push_back({offset + i, offset + static_cast<std::size_t>(t.head) - 1, t.deprel});
    }
    offset += tokens.size();
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (const char c : bytes) {
    state ^= static_cast<std::uint8_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

std::uint64_t corpus_token_hash(const Corpus& corpus) {
  std::uint64_t h = kFnvOffsetBasis;
  bool first = true;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) {
      if (!first) {
        h = fnv1a64("\n", h);
      }
      h = fnv1a64(t.form, h);
      first = false;
    }
  }
  return h;
}

LabelVocab LabelVocab::build(const std::vector<std::string>& train_labels) {
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& l : train_labels) {
    ++counts[l];
  }
  LabelVocab v;
  for (const auto& [label, count] : counts) {
    v.index_.emplace(label, v.labels_.size());
    v.labels_.push_back(label);
    v.counts_.push_back(count);
  }
  return v;
}

std::optional<std::size_t> LabelVocab::find(std::string_view label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::vector<int> LabelVocab::encode(const std::vector<std::string>& labels,
                                    std::vector<std::string>* unseen) const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    if (const auto idx = find(l)) {
      out.push_back(static_cast<int>(*idx));
    } else {
      out.push_back(static_cast<int>(unk_index()));
      if (unseen) {
        unseen->push_back(l);
      }
    }
  }
  return out;
}

}  // namespace infoprobe::conllu
