#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace infoprobe::conllu {

struct Token {
  int index = 1;  // 1-based position in the sentence
  std::string form;
  std::string upos;
  int head = 0;  // 0 = attached to root
  std::string deprel;
};

struct Sentence {
  std::vector<Token> tokens;
};

enum class Split { train, dev, test };

std::string_view to_string(Split split);

struct Corpus {
  std::vector<Sentence> sentences;
  Split split = Split::train;

  std::size_t token_count() const;
  /// Token forms in canonical (file) order.
  std::vector<std::string> forms() const;
};

/// Parses a CoNLL-U document. Range lines (`1-2`) and empty nodes (`1.1`)
/// are skipped; CR before LF is stripped. Throws ParseError with the line.
Corpus parse_conllu(std::string_view text, Split split = Split::train);

Corpus read_conllu(const std::filesystem::path& path, Split split = Split::train);

/// Writes the five consumed columns back out; the other columns become `_`.
std::string to_conllu(const Corpus& corpus);

struct PosInstance {
  std::size_t token;  // flat index in canonical order
  std::string label;
};

struct DepInstance {
  std::size_t child;  // flat index of the dependent
  std::size_t head;   // flat index of its head
  std::string label;
};

std::vector<PosInstance> pos_instances(const Corpus& corpus);

/// One instance per token with head != 0. Throws DataError if a head points
/// past the end of its sentence.
std::vector<DepInstance> dep_instances(const Corpus& corpus);

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffsetBasis);

/// FNV-1a 64 over token forms in canonical order joined by '\n'.
std::uint64_t corpus_token_hash(const Corpus& corpus);

/// Label inventory of the training split. Labels are sorted lexicographically,
/// so index order and lexicographic order agree.
class LabelVocab {
 public:
  LabelVocab() = default;
  static LabelVocab build(const std::vector<std::string>& train_labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::optional<std::size_t> find(std::string_view label) const;
  /// Index reserved for labels never seen in training; equals size().
  std::size_t unk_index() const { return labels_.size(); }
  /// Maps labels to indices; unseen labels map to unk_index() and are
  /// appended to `unseen` (if given) without growing the vocab.
  std::vector<int> encode(const std::vector<std::string>& labels,
                          std::vector<std::string>* unseen = nullptr) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace infoprobe::conllu
