#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sra/tensor.hpp"

namespace sra {

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

// Trims leading/trailing whitespace and collapses interior runs to a single
// space. Input text is expected to already be in NFC form.
std::string normalize_for_id(const std::string& text);

// SHA-256 of the normalized sentence text; the key used by teacher files.
std::string sentence_id(const std::string& text);

class TeacherOracle {
 public:
  virtual ~TeacherOracle() = default;
  virtual size_t dim() const = 0;
  virtual bool covers(const std::string& sentence) const = 0;
  virtual Tensor embed(const std::string& sentence) const = 0;
  virtual std::string kind() const = 0;
  virtual std::string digest() const = 0;
};

// Precomputed embeddings from a JSONL file. Line 1 is a header
// {"format":"sra-teacher","version":1,"d":D}; each further line is
// {"id":<64 hex>,"text":...,"vec":[...]}. Vectors are stored at f32
// precision so export/import round trips are bit-exact.
class FileTeacher : public TeacherOracle {
 public:
  static FileTeacher load(const std::string& path);

  size_t dim() const override { return dim_; }
  bool covers(const std::string& sentence) const override;
  Tensor embed(const std::string& sentence) const override;
  std::string kind() const override { return "file"; }
  std::string digest() const override { return digest_; }
  size_t size() const { return vectors_.size(); }

 private:
  size_t dim_ = 0;
  std::unordered_map<std::string, Tensor> vectors_;  // id -> (d,)
  std::string digest_;
};

// Deterministic stand-in teacher: frozen per-token vectors derived from a
// hash of the token string are mean-pooled, passed through a fixed random
// projection, and squashed with tanh. Output components lie in (-1, 1) and
// are quantized to f32 so file export round trips exactly.
class SyntheticTeacher : public TeacherOracle {
 public:
  SyntheticTeacher(uint64_t seed, size_t dim);

  size_t dim() const override { return dim_; }
  bool covers(const std::string& sentence) const override;
  Tensor embed(const std::string& sentence) const override;
  Tensor encode_tokens(const std::vector<std::string>& tokens) const;
  std::string kind() const override { return "synthetic"; }
  std::string digest() const override { return digest_; }
  uint64_t seed() const { return seed_; }

 private:
  Tensor token_vector(const std::string& token) const;

  uint64_t seed_;
  size_t dim_;
  Tensor projection_;  // dim x dim
  std::string digest_;
};

// Fraction of components with |x| <= 1 across all vectors.
double range_statistic(const std::vector<Tensor>& vectors);

// Writes header + one record per distinct sentence id (first occurrence
// wins). Returns the number of records written.
size_t export_teacher_file(const TeacherOracle& oracle,
                           const std::vector<std::string>& corpus,
                           const std::string& path);

}  // namespace sra
