#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "infoprobe/conllu.hpp"
#include "infoprobe/matrix.hpp"

namespace infoprobe::embedkit {

enum class SourceTag { contextual, fasttext, onehot, random };

std::string_view to_string(SourceTag tag);
SourceTag source_tag_from_string(std::string_view name);

/// One vector per corpus token, rows in canonical corpus order.
struct TokenEmbeddings {
  Matrix vectors;
  SourceTag source_tag = SourceTag::contextual;
  std::uint64_t corpus_hash = conllu::kFnvOffsetBasis;

  std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
  std::size_t count() const { return static_cast<std::size_t>(vectors.rows()); }
};

/// Word type -> vector lookup `e`. Row i of matrix() belongs to types()[i];
/// the final row is the vector used for unseen types.
class TypeEmbeddingTable {
 public:
  TypeEmbeddingTable(SourceTag kind, std::vector<std::string> types, Matrix vectors, bool trainable);

  SourceTag kind() const { return kind_; }
  bool trainable() const { return trainable_; }
  std::size_t dim() const { return static_cast<std::size_t>(vectors_.cols()); }
  std::size_t size() const { return types_.size(); }
  const std::vector<std::string>& types() const { return types_; }
  const Matrix& matrix() const { return vectors_; }
  std::size_t unk_row() const { return types_.size(); }

  std::optional<std::size_t> find(std::string_view type) const;
  /// Row for `type`, or unk_row() when absent.
  std::size_t row_of(std::string_view type) const;
  Eigen::Ref<const RowVector> vector(std::string_view type) const { return vectors_.row(row_of(type)); }
  Eigen::Ref<const RowVector> unk_vector() const { return vectors_.row(unk_row()); }

  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  SourceTag kind_;
  std::vector<std::string> types_;
  Matrix vectors_;
  bool trainable_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;
};

// PEMB: "PEMB" | u32 version=1 | u32 dim | u64 token_count | u64 corpus_hash |
// token_count*dim f32, all little-endian, rows in canonical corpus order.
inline constexpr std::uint32_t kPembVersion = 1;
inline constexpr std::size_t kPembHeaderBytes = 4 + 4 + 4 + 8 + 8;

struct PembHeader {
  std::uint32_t version = kPembVersion;
  std::uint32_t dim = 0;
  std::uint64_t token_count = 0;
  std::uint64_t corpus_hash = 0;
};

std::string encode_pemb(const TokenEmbeddings& embeddings);
void write_embedding_matrix(const TokenEmbeddings& embeddings, const std::filesystem::path& path);

PembHeader read_pemb_header(const std::filesystem::path& path);
/// Reads a PEMB file without an alignment check.
TokenEmbeddings read_embedding_matrix(const std::filesystem::path& path);
TokenEmbeddings decode_pemb(std::string_view bytes);

/// Reads a PEMB file and checks it against `corpus`: CountMismatchError when
/// the token count differs, HashMismatchError when the form hash differs.
TokenEmbeddings load_embedding_matrix(const std::filesystem::path& path, const conllu::Corpus& corpus);
TokenEmbeddings check_alignment(TokenEmbeddings embeddings, const conllu::Corpus& corpus);

/// fastText text format. The unseen-type vector is the mean of all entries.
TypeEmbeddingTable parse_vec(std::string_view text);
TypeEmbeddingTable load_vec_file(const std::filesystem::path& path);

/// Sorted set of word types in a corpus (case-sensitive).
std::set<std::string> corpus_vocab(const conllu::Corpus& corpus);

/// Trainable type table, entries ~ U[-1/sqrt(dim), 1/sqrt(dim)].
TypeEmbeddingTable build_onehot_table(const std::set<std::string>& vocab, std::size_t dim, std::uint64_t seed);
/// Same draw as build_onehot_table but frozen.
TypeEmbeddingTable build_random_table(const std::set<std::string>& vocab, std::size_t dim, std::uint64_t seed);

/// Control representation c(R) = e(id(R)): each token gets its type's vector.
TokenEmbeddings apply_control(const conllu::Corpus& corpus, const TypeEmbeddingTable& table);

/// Row of `table` for every token of `corpus`, canonical order.
std::vector<std::size_t> type_rows(const conllu::Corpus& corpus, const TypeEmbeddingTable& table);

}  // namespace infoprobe::embedkit
