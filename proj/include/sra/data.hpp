#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sra/rng.hpp"
#include "sra/tensor.hpp"

namespace sra {

inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kUnkId = 1;
inline constexpr int32_t kMaskId = 2;
inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr int kNoLabel = -1;

// Lowercase, split on Unicode whitespace, and split each punctuation
// character into its own token. The reserved sentinels [PAD]/[UNK]/[MASK]
// are recognized case-insensitively and kept whole so augmented corpora
// survive a write/read round trip.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  Vocabulary();  // reserved ids only

  // Returns the id, inserting the token if new.
  int32_t add(const std::string& token);
  // 1 ([UNK]) for unknown tokens.
  int32_t lookup(const std::string& token) const;
  bool contains(const std::string& token) const;
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary from_texts(const std::vector<std::string>& texts);
  // Rebuild from a checkpoint's token list; validates the reserved slots.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::vector<int32_t> encode(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> index_;
};

struct LabeledExample {
  std::string text_a;
  std::optional<std::string> text_b;
  int label = kNoLabel;

  bool is_pair() const { return text_b.has_value(); }
};

enum class TaskKind { kSingle, kPair };

struct Dataset {
  std::vector<LabeledExample> examples;
  std::vector<std::string> label_names;  // index = class id, first-seen order
};

// TSV: single -> "label\ttext", pair -> "label\ttext_a\ttext_b". Labels are
// mapped through a dictionary built in order of first appearance. Blank
// lines are skipped.
Dataset read_tsv(const std::string& path, TaskKind kind, bool has_header);

// Plain UTF-8 text, one sentence per line; blank lines skipped.
std::vector<std::string> read_lines(const std::string& path);

inline constexpr uint64_t kWordVectorSeed = 0x454D4244;  // fallback-row stream

// Text format "token v1 ... vE" per line. Covered rows are copied; [PAD] is
// zero; every other row is drawn uniform(-0.1, 0.1) from a per-row stream of
// `seed` so the result does not depend on file ordering.
Tensor load_word_vectors(const std::string& path, const Vocabulary& vocab,
                         size_t expected_dim = 0,
                         uint64_t seed = kWordVectorSeed);

std::vector<std::string> augment_mask(const std::vector<std::string>& tokens,
                                      double p_mask, Rng& rng);

std::vector<std::string> augment_ngram(const std::vector<std::string>& tokens,
                                       Rng& rng, size_t n_lo = 1,
                                       size_t n_hi = 5);

struct TransferSetOptions {
  size_t multiplier = 10;
  size_t cap = 800000;
  double p_mask = 0.1;
  size_t ngram_lo = 1;
  size_t ngram_hi = 5;
};

// Originals plus augmented variants (each variant applies masking with
// probability 0.5, then n-gram sampling with probability 0.5), emitted in
// round-robin passes and truncated at the cap. Pair sides are augmented
// independently. Output examples carry no labels.
std::vector<LabeledExample> build_transfer_set(
    const std::vector<LabeledExample>& examples,
    const TransferSetOptions& opts, Rng& rng);

struct Batch {
  std::vector<std::vector<int32_t>> tokens_a;  // rows padded to batch width
  std::vector<int32_t> lengths_a;
  std::vector<std::vector<int32_t>> tokens_b;  // empty for single tasks
  std::vector<int32_t> lengths_b;
  std::vector<int32_t> labels;  // kNoLabel where absent

  size_t size() const { return tokens_a.size(); }
};

struct BatchingResult {
  std::vector<Batch> batches;
  size_t skipped = 0;  // examples that tokenized to nothing
};

BatchingResult make_batches(const std::vector<LabeledExample>& examples,
                            const Vocabulary& vocab, size_t batch_size,
                            Rng& rng, bool shuffle);

}  // namespace sra
