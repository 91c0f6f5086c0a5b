#include "infoprobe/embedkit.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "infoprobe/errors.hpp"
#include "infoprobe/rng.hpp"

namespace infoprobe::embedkit {

namespace {

constexpr char kMagic[4] = {'P', 'E', 'M', 'B'};

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<std::uint8_t>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

PembHeader decode_header(std::string_view bytes) {
  if (bytes.size() < kPembHeaderBytes) {
    throw FormatError(fmt::format("PEMB: truncated header ({} bytes)", bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("PEMB: bad magic");
  }
  PembHeader h;
  h.version = get_le<std::uint32_t>(bytes, 4);
  if (h.version != kPembVersion) {
    throw FormatError(fmt::format("PEMB: unsupported version {}", h.version));
  }
  h.dim = get_le<std::uint32_t>(bytes, 8);
  h.token_count = get_le<std::uint64_t>(bytes, 12);
  h.corpus_hash = get_le<std::uint64_t>(bytes, 20);
  return h;
}

Matrix uniform_table(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) {
    throw InvalidArgument("type table dim must be >= 1");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  Matrix m(rows, dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = uniform(rng, -bound, bound);
    }
  }
  return m;
}

TypeEmbeddingTable build_type_table(const std::set<std::string>& vocab, std::size_t dim, std::uint64_t seed,
                                    SourceTag kind, bool trainable) {
  if (vocab.empty()) {
    throw InvalidArgument("cannot build a type table from an empty vocabulary");
  }
  std::vector<std::string> types(vocab.begin(), vocab.end());
  auto m = uniform_table(types.size() + 1, dim, seed);
  return TypeEmbeddingTable(kind, std::move(types), std::move(m), trainable);
}

}  // namespace

std::string_view to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::contextual:
      return "contextual";
    case SourceTag::fasttext:
      return "fasttext";
    case SourceTag::onehot:
      return "onehot";
    case SourceTag::random:
      return "random";
  }
  return "?";
}

SourceTag source_tag_from_string(std::string_view name) {
  for (auto tag : {SourceTag::contextual, SourceTag::fasttext, SourceTag::onehot, SourceTag::random}) {
    if (name == to_string(tag)) {
      return tag;
    }
  }
  throw InvalidArgument(fmt::format("unknown source tag '{}'", name));
}

TypeEmbeddingTable::TypeEmbeddingTable(SourceTag kind, std::vector<std::string> types, Matrix vectors,
                                       bool trainable)
    : kind_(kind), types_(std::move(types)), vectors_(std::move(vectors)), trainable_(trainable) {
  if (static_cast<std::size_t>(vectors_.rows()) != types_.size() + 1) {
    throw ShapeError(fmt::format("type table has {} types but {} rows (expected types + 1)", types_.size(),
                                 vectors_.rows()));
  }
  index_.reserve(types_.size());
  for (std::size_t i = 0; i < types_.size(); ++i) {
    index_.emplace(types_[i], i);
  }
}

std::optional<std::size_t> TypeEmbeddingTable::find(std::string_view type) const {
  const auto it = index_.find(std::string(type));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::size_t TypeEmbeddingTable::row_of(std::string_view type) const {
  return find(type).value_or(unk_row());
}

std::string encode_pemb(const TokenEmbeddings& embeddings) {
  std::string out;
  out.reserve(kPembHeaderBytes + embeddings.count() * embeddings.dim() * 4);
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kPembVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(embeddings.dim()));
  put_le<std::uint64_t>(out, embeddings.count());
  put_le<std::uint64_t>(out, embeddings.corpus_hash);
  for (Eigen::Index i = 0; i < embeddings.vectors.rows(); ++i) {
    for (Eigen::Index j = 0; j < embeddings.vectors.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(embeddings.vectors(i, j)));
      put_le<std::uint32_t>(out, bits);
    }
  }
  return out;
}

void write_embedding_matrix(const TokenEmbeddings& embeddings, const std::filesystem::path& path) {
  const auto bytes = encode_pemb(embeddings);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(fmt::format("failed to write '{}'", path.string()));
  }
}

TokenEmbeddings decode_pemb(std::string_view bytes) {
  const auto h = decode_header(bytes);
  const auto payload = static_cast<std::uint64_t>(bytes.size() - kPembHeaderBytes);
  if (h.dim != 0 && h.token_count > payload / 4 / h.dim) {
    throw FormatError(fmt::format("PEMB: payload holds {} bytes, header declares {} x {} floats", payload,
                                  h.token_count, h.dim));
  }
  if (payload != h.token_count * h.dim * 4) {
    throw FormatError(fmt::format("PEMB: payload holds {} bytes, header declares {} x {} floats", payload,
                                  h.token_count, h.dim));
  }
  TokenEmbeddings e;
  e.corpus_hash = h.corpus_hash;
  e.vectors.resize(static_cast<Eigen::Index>(h.token_count), h.dim);
  std::size_t offset = kPembHeaderBytes;
  for (Eigen::Index i = 0; i < e.vectors.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.vectors.cols(); ++j) {
      const float v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
      offset += 4;
      if (!std::isfinite(v)) {
        throw DataError(fmt::format("PEMB: non-finite component at row {}, column {}", i, j));
      }
      e.vectors(i, j) = v;
    }
  }
  return e;
}

PembHeader read_pemb_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(fmt::format("cannot open '{}'", path.string()));
  }
  std::string head(kPembHeaderBytes, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return decode_header(head);
}

TokenEmbeddings read_embedding_matrix(const std::filesystem::path& path) {
  return decode_pemb(read_file(path));
}

TokenEmbeddings check_alignment(TokenEmbeddings embeddings, const conllu::Corpus& corpus) {
  const auto n = corpus.token_count();
  if (embeddings.count() != n) {
    throw CountMismatchError(
        fmt::format("embeddings hold {} vectors but the corpus has {} tokens", embeddings.count(), n));
  }
  const auto expected = conllu::corpus_token_hash(corpus);
  if (embeddings.corpus_hash != expected) {
    throw HashMismatchError(fmt::format("embedding hash {:016x} does not match corpus hash {:016x}",
                                        embeddings.corpus_hash, expected));
  }
  return embeddings;
}

TokenEmbeddings load_embedding_matrix(const std::filesystem::path& path, const conllu::Corpus& corpus) {
  const auto bytes = read_file(path);
  // Alignment is checked on the header first so a wrong file fails with an
  // alignment error rather than a payload-size complaint.
  const auto h = decode_header(bytes);
  if (h.token_count != corpus.token_count()) {
    throw CountMismatchError(fmt::format("{}: header declares {} vectors but the corpus has {} tokens",
                                         path.string(), h.token_count, corpus.token_count()));
  }
  try {
    return check_alignment(decode_pemb(bytes), corpus);
  } catch (const HashMismatchError& e) {
    throw HashMismatchError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

TypeEmbeddingTable parse_vec(std::string_view text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      auto eol = text.find('\n', pos);
      if (eol == std::string_view::npos) {
        eol = text.size();
      }
      line = text.substr(pos, eol - pos);
      pos = eol + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
      }
      if (line.find_first_not_of(' ') != std::string_view::npos) {
        return true;
      }
    }
    return false;
  };
  auto fields_of = [](std::string_view line) {
    std::vector<std::string_view> f;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      const auto start = i;
      while (i < line.size() && line[i] != ' ') ++i;
      if (i > start) f.push_back(line.substr(start, i - start));
    }
    return f;
  };

  std::string_view line;
  if (!next_line(line)) {
    throw FormatError(".vec: missing '<count> <dim>' header");
  }
  const auto header = fields_of(line);
  std::size_t count = 0;
  std::size_t dim = 0;
  auto parse_size = [](std::string_view s, std::size_t& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
  };
  if (header.size() != 2 || !parse_size(header[0], count) || !parse_size(header[1], dim) || dim == 0) {
    throw FormatError(fmt::format(".vec line {}: expected '<count> <dim>' header", line_no));
  }

  std::vector<std::string> types;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<std::string> warnings;
  std::size_t body_lines = 0;
  while (next_line(line)) {
    ++body_lines;
    const auto f = fields_of(line);
    if (f.size() != dim + 1) {
      throw FormatError(
          fmt::format(".vec line {}: expected a type and {} values, found {} values", line_no, dim, f.size() - 1));
    }
    std::vector<double> v(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto s = f[j + 1];
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v[j]);
      if (ec != std::errc{} || p != s.data() + s.size()) {
        throw FormatError(fmt::format(".vec line {}: cannot parse value '{}'", line_no, s));
      }
      if (!std::isfinite(v[j])) {
        throw DataError(fmt::format(".vec line {}: non-finite value", line_no));
      }
    }
    std::string type(f[0]);
    if (seen.contains(type)) {
      warnings.push_back(fmt::format(".vec line {}: duplicate type '{}' ignored", line_no, type));
      continue;
    }
    seen.emplace(type, types.size());
    types.push_back(std::move(type));
    rows.push_back(std::move(v));
  }
  if (body_lines != count) {
    throw FormatError(fmt::format(".vec: header declares {} entries, body has {}", count, body_lines));
  }

  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(types.size() + 1), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  if (!rows.empty()) {
    m.row(static_cast<Eigen::Index>(rows.size())) =
        m.topRows(static_cast<Eigen::Index>(rows.size())).colwise().mean();
  }
  TypeEmbeddingTable table(SourceTag::fasttext, std::move(types), std::move(m), false);
  for (auto& w : warnings) {
    table.add_warning(std::move(w));
  }
  return table;
}

TypeEmbeddingTable load_vec_file(const std::filesystem::path& path) {
  return parse_vec(read_file(path));
}

std::set<std::string> corpus_vocab(const conllu::Corpus& corpus) {
  std::set<std::string> vocab;
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) {
      vocab.insert(t.form);
    }
  }
  return vocab;
}

TypeEmbeddingTable build_onehot_table(const std::set<std::string>& vocab, std::size_t dim, std::uint64_t seed) {
  return build_type_table(vocab, dim, seed, SourceTag::onehot, true);
}

TypeEmbeddingTable build_random_table(const std::set<std::string>& vocab, std::size_t dim, std::uint64_t seed) {
  return build_type_table(vocab, dim, seed, SourceTag::random, false);
}

std::vector<std::size_t> type_rows(const conllu::Corpus& corpus, const TypeEmbeddingTable& table) {
  std::vector<std::size_t> rows;
  rows.reserve(corpus.token_count());
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) {
      rows.push_back(table.row_of(t.form));
    }
  }
  return rows;
}

TokenEmbeddings apply_control(const conllu::Corpus& corpus, const TypeEmbeddingTable& table) {
  const auto rows = type_rows(corpus, table);
  TokenEmbeddings out;
  out.source_tag = table.kind();
  out.corpus_hash = conllu::corpus_token_hash(corpus);
  out.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.dim()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.vectors.row(static_cast<Eigen::Index>(i)) = table.matrix().row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace infoprobe::embedkit
