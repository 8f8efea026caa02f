#include "sra/teacher.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sra/data.hpp"
#include "sra/error.hpp"
#include "sra/rng.hpp"

namespace sra {

namespace {

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void append_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f32_le(std::string& out, double v) {
  float f = static_cast<float>(v);
  uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

bool is_hex64(const std::string& s) {
  if (s.size() != 64) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isxdigit(c) != 0;
  });
}

std::string to_lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string sha256_hex(const void* data, size_t len) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  if (EVP_Digest(data, len, md, &md_len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(md_len * 2);
  for (unsigned int i = 0; i < md_len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  return sha256_hex(contents);
}

std::string normalize_for_id(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::string sentence_id(const std::string& text) {
  return sha256_hex(normalize_for_id(text));
}

FileTeacher FileTeacher::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  FileTeacher teacher;
  std::string line;
  size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    if (line_no == 1) {
      if (!j.is_object() || j.value("format", "") != "sra-teacher") {
        throw fail("missing sra-teacher header");
      }
      if (j.value("version", 0) != 1) throw fail("unsupported version");
      if (!j.contains("d") || !j["d"].is_number_unsigned() ||
          j["d"].get<uint64_t>() == 0) {
        throw fail("header lacks a positive dimension d");
      }
      teacher.dim_ = j["d"].get<size_t>();
      continue;
    }
    if (teacher.dim_ == 0) throw fail("records before header");
    if (!j.is_object() || !j.contains("id") || !j.contains("vec") ||
        !j["id"].is_string()) {
      throw fail("record needs a string id and a vec field");
    }
    std::string id = to_lower(j["id"].get<std::string>());
    if (!is_hex64(id)) throw fail("id is not a 64-char hex digest");
    if (!j["vec"].is_array() || j["vec"].size() != teacher.dim_) {
      throw fail("vec length does not match header dimension " +
                 std::to_string(teacher.dim_));
    }
    Tensor vec = Tensor::zeros({teacher.dim_});
    for (size_t k = 0; k < teacher.dim_; ++k) {
      if (!j["vec"][k].is_number()) throw fail("vec holds a non-number");
      vec.data[k] = static_cast<double>(
          static_cast<float>(j["vec"][k].get<double>()));
    }
    teacher.vectors_.emplace(std::move(id), std::move(vec));  // first one wins
  }
  if (teacher.dim_ == 0) throw FormatError(path + ": empty teacher file");

  std::vector<const std::string*> ids;
  ids.reserve(teacher.vectors_.size());
  for (const auto& [id, _] : teacher.vectors_) ids.push_back(&id);
  std::sort(ids.begin(), ids.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  std::string blob = "file-teacher\n";
  append_u64_le(blob, teacher.dim_);
  for (const std::string* id : ids) {
    blob += *id;
    for (double v : teacher.vectors_.at(*id).data) append_f32_le(blob, v);
  }
  teacher.digest_ = sha256_hex(blob);
  return teacher;
}

bool FileTeacher::covers(const std::string& sentence) const {
  return vectors_.count(sentence_id(sentence)) > 0;
}

Tensor FileTeacher::embed(const std::string& sentence) const {
  auto it = vectors_.find(sentence_id(sentence));
  if (it == vectors_.end()) {
    throw CoverageError("teacher file has no embedding for: " +
                        normalize_for_id(sentence));
  }
  return it->second;
}

SyntheticTeacher::SyntheticTeacher(uint64_t seed, size_t dim)
    : seed_(seed), dim_(dim) {
  if (dim == 0) throw ParameterError("teacher dimension must be positive");
  Rng rng(mix_seed(seed, 0x7EAC4E8));
  double bound = std::sqrt(3.0 / static_cast<double>(dim));
  projection_ = Tensor::zeros({dim, dim});
  for (auto& v : projection_.data) v = rng.uniform(-bound, bound);

  std::string blob = "synthetic-teacher\n";
  append_u64_le(blob, seed_);
  append_u64_le(blob, dim_);
  for (double v : projection_.data) append_f32_le(blob, v);
  digest_ = sha256_hex(blob);
}

Tensor SyntheticTeacher::token_vector(const std::string& token) const {
  Rng rng(mix_seed(seed_, fnv1a64(token)));
  Tensor vec = Tensor::zeros({dim_});
  for (auto& v : vec.data) v = rng.uniform(-1.0, 1.0);
  return vec;
}

Tensor SyntheticTeacher::encode_tokens(
    const std::vector<std::string>& tokens) const {
  if (tokens.empty()) {
    throw EmptyInputError("synthetic teacher: empty token list");
  }
  Tensor pool = Tensor::zeros({dim_});
  for (const auto& token : tokens) {
    Tensor vec = token_vector(token);
    for (size_t j = 0; j < dim_; ++j) pool.data[j] += vec.data[j];
  }
  double inv = 1.0 / static_cast<double>(tokens.size());
  for (auto& v : pool.data) v *= inv;

  Tensor out = Tensor::zeros({dim_});
  for (size_t j = 0; j < dim_; ++j) {
    double z = 0.0;
    for (size_t k = 0; k < dim_; ++k) z += projection_.at(j, k) * pool.data[k];
    out.data[j] = static_cast<double>(static_cast<float>(std::tanh(z)));
  }
  return out;
}

bool SyntheticTeacher::covers(const std::string& sentence) const {
  return !tokenize(sentence).empty();
}

Tensor SyntheticTeacher::embed(const std::string& sentence) const {
  auto tokens = tokenize(sentence);
  if (tokens.empty()) {
    throw CoverageError("cannot embed a sentence with no tokens: " + sentence);
  }
  return encode_tokens(tokens);
}

double range_statistic(const std::vector<Tensor>& vectors) {
  if (vectors.empty()) throw EmptyInputError("range_statistic: no vectors");
  size_t total = 0, inside = 0;
  for (const auto& v : vectors) {
    for (double x : v.data) {
      ++total;
      if (std::fabs(x) <= 1.0) ++inside;
    }
  }
  if (total == 0) throw EmptyInputError("range_statistic: vectors are empty");
  return static_cast<double>(inside) / static_cast<double>(total);
}

size_t export_teacher_file(const TeacherOracle& oracle,
                           const std::vector<std::string>& corpus,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  nlohmann::ordered_json header;
  header["format"] = "sra-teacher";
  header["version"] = 1;
  header["d"] = oracle.dim();
  out << header.dump() << "\n";

  std::unordered_map<std::string, bool> seen;
  size_t written = 0;
  for (const auto& sentence : corpus) {
    std::string id = sentence_id(sentence);
    if (seen.count(id)) continue;
    seen.emplace(id, true);
    if (!oracle.covers(sentence)) {
      throw CoverageError("oracle does not cover: " + normalize_for_id(sentence));
    }
    Tensor vec = oracle.embed(sentence);
    nlohmann::ordered_json rec;
    rec["id"] = id;
    rec["text"] = sentence;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (double v : vec.data) {
      arr.push_back(static_cast<double>(static_cast<float>(v)));
    }
    rec["vec"] = std::move(arr);
    out << rec.dump() << "\n";
    ++written;
  }
  if (!out) throw IoError("failed while writing " + path);
  return written;
}

}  // namespace sra
