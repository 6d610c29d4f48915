#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ftsum {

class Rng;

using Tokens = std::vector<std::string>;
using Ids = std::vector<int>;

// Reserved ids. Every vocabulary places the specials at these positions.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kSep = 4;
inline constexpr int kNumSpecials = 5;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kSepToken = "|||";

bool is_special_token(std::string_view token);

/// Bidirectional token/id map. Ids below kNumSpecials are the specials.
class Vocab {
 public:
  Vocab();

  /// Builds from non-special tokens in id order. Duplicates and specials are rejected.
  static Vocab from_tokens(std::span<const std::string> tokens);

  int id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// One non-special token per line; line k has id kNumSpecials + k.
  void save(std::ostream& out) const;
  static Vocab load(std::istream& in);
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab&, const Vocab&) = default;

 private:
  void add(const std::string& token);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct ParallelPair {
  Tokens source;
  Tokens facts;  // descriptions separated by kSepToken; may be empty
  Tokens target;
};

using IdMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FlagMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Padded id matrices, one row per pair. Targets carry BOS ... EOS.
struct Batch {
  IdMatrix source_ids, fact_ids, target_ids;
  FlagMatrix source_mask, fact_mask, target_mask;  // 0 exactly at PAD
  FlagMatrix gamma;                                // 0 exactly at SEP
  std::vector<std::size_t> pair_index;             // position in the input stream

  Eigen::Index size() const { return source_ids.rows(); }
  Ids source_row(Eigen::Index row) const;
  Ids fact_row(Eigen::Index row) const;
  Ids target_row(Eigen::Index row) const;
};

struct CorpusStats {
  std::size_t pairs = 0;
  double avg_source_len = 0;
  double avg_fact_len = 0;  // tokens, separators excluded
  double avg_fact_count = 0;
  double avg_target_len = 0;
  double copy_ratio_source = 0;
  double copy_ratio_fact = 0;
};

struct EmbeddingLoad {
  Eigen::MatrixXd matrix;  // vocab.size() x dim
  std::size_t covered = 0;
  std::size_t candidates = 0;  // non-special vocab entries
  double coverage() const {
    return candidates == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(candidates);
  }
};

/// Lowercases and masks every decimal digit with '#'.
Tokens normalize_text(std::span<const std::string> tokens);
std::string normalize_token(std::string_view token);

Tokens split_tokens(std::string_view line);

/// Vocabulary of tokens seen at least `min_freq` times. `max_size` bounds the
/// total size including specials (0 = unbounded); ties at the cut go to the
/// lexicographically smaller token.
Vocab build_vocab(std::span<const Tokens> corpus, int min_freq, int max_size = 0);

Ids encode_sequence(std::span<const std::string> tokens, const Vocab& vocab);
Tokens decode_sequence(std::span<const int> ids, const Vocab& vocab);

/// Seeded shuffle then fixed-size batches in shuffled order; the last batch may be short.
std::vector<Batch> make_batches(std::span<const ParallelPair> pairs, const Vocab& source_vocab,
                                const Vocab& target_vocab, int batch_size, std::uint64_t seed);

/// All pairs in corpus order, unshuffled.
std::vector<Batch> make_ordered_batches(std::span<const ParallelPair> pairs, const Vocab& source_vocab,
                                        const Vocab& target_vocab, int batch_size);

/// Copies rows of a "token v1 ... v_dim" text file into an embedding matrix.
/// Uncovered rows are drawn from the uniform Glorot init.
EmbeddingLoad load_pretrained_embeddings(std::istream& in, const Vocab& vocab, int dim, Rng& rng);
EmbeddingLoad load_pretrained_embeddings(const std::filesystem::path& path, const Vocab& vocab, int dim,
                                         Rng& rng);

CorpusStats corpus_stats(std::span<const ParallelPair> pairs);

/// Splits a fact token sequence on separators. Empty segments are dropped.
std::vector<Tokens> split_facts(std::span<const std::string> facts);

/// Reads "source<TAB>target" lines plus an optional line-aligned facts file.
/// Tokens are normalized on the way in.
std::vector<ParallelPair> read_parallel_corpus(std::istream& corpus, std::istream* facts);
std::vector<ParallelPair> read_parallel_corpus(const std::filesystem::path& corpus,
                                               const std::optional<std::filesystem::path>& facts);

}  // namespace ftsum
