#include "sra/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "sra/error.hpp"

namespace sra {

namespace {

bool is_unicode_space(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_punct(uint32_t cp) {
  return cp < 0x80 && std::ispunct(static_cast<int>(cp));
}

// Decodes the codepoint at byte offset i, advancing i. Invalid sequences are
// consumed one byte at a time and returned as that byte's value.
uint32_t next_codepoint(const std::string& s, size_t& i) {
  const auto byte = [&](size_t k) {
    return static_cast<uint32_t>(static_cast<unsigned char>(s[k]));
  };
  uint32_t b0 = byte(i);
  size_t need = 0;
  uint32_t cp = b0;
  if (b0 < 0x80) {
    i += 1;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    need = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    need = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    need = 3;
    cp = b0 & 0x07;
  } else {
    i += 1;
    return b0;
  }
  if (i + need >= s.size()) {
    i += 1;
    return b0;
  }
  for (size_t k = 1; k <= need; ++k) {
    uint32_t bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) {
      i += 1;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += need + 1;
  return cp;
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Matches [PAD]/[UNK]/[MASK] (any case) starting at byte i; on success
// returns the canonical form and advances i past the closing bracket.
bool match_reserved(const std::string& s, size_t& i, std::string& out) {
  static const char* kForms[] = {kPadToken, kUnkToken, kMaskToken};
  for (const char* form : kForms) {
    size_t len = std::char_traits<char>::length(form);
    if (i + len > s.size()) continue;
    bool ok = true;
    for (size_t k = 0; k < len; ++k) {
      char a = s[i + k];
      char b = form[k];
      if (std::toupper(static_cast<unsigned char>(a)) != b) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out = form;
      i += len;
      return true;
    }
  }
  return false;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(word);
      word.clear();
    }
  };
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '[') {
      std::string reserved;
      size_t j = i;
      if (match_reserved(text, j, reserved)) {
        flush();
        tokens.push_back(reserved);
        i = j;
        continue;
      }
    }
    uint32_t cp = next_codepoint(text, i);
    if (is_unicode_space(cp)) {
      flush();
    } else if (is_ascii_punct(cp)) {
      flush();
      tokens.push_back(std::string(1, static_cast<char>(cp)));
    } else {
      if (cp < 0x80) {
        word.push_back(static_cast<char>(
            std::tolower(static_cast<int>(cp))));
      } else {
        append_utf8(word, cp);
      }
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
  add(kMaskToken);
}

int32_t Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int32_t id = static_cast<int32_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int32_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

Vocabulary Vocabulary::from_texts(const std::vector<std::string>& texts) {
  Vocabulary vocab;
  for (const auto& text : texts) {
    for (const auto& token : tokenize(text)) vocab.add(token);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3 || tokens[0] != kPadToken || tokens[1] != kUnkToken ||
      tokens[2] != kMaskToken) {
    throw VocabularyError("vocabulary token list lacks the reserved prefix "
                          "[PAD],[UNK],[MASK]");
  }
  Vocabulary vocab;
  for (size_t i = 3; i < tokens.size(); ++i) {
    int32_t id = vocab.add(tokens[i]);
    if (id != static_cast<int32_t>(i)) {
      throw VocabularyError("duplicate token '" + tokens[i] +
                            "' in vocabulary list");
    }
  }
  return vocab;
}

std::vector<int32_t> Vocabulary::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(lookup(token));
  return ids;
}

Dataset read_tsv(const std::string& path, TaskKind kind, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Dataset ds;
  std::unordered_map<std::string, int> label_ids;
  const size_t want = kind == TaskKind::kPair ? 3 : 2;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (has_header && line_no == 1) continue;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() != want) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(want) + " tab-separated columns, got " +
                        std::to_string(cols.size()));
    }
    const std::string label_text = trim(cols[0]);
    if (label_text.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": empty label");
    }
    auto it = label_ids.find(label_text);
    int label;
    if (it == label_ids.end()) {
      label = static_cast<int>(ds.label_names.size());
      label_ids.emplace(label_text, label);
      ds.label_names.push_back(label_text);
    } else {
      label = it->second;
    }
    LabeledExample ex;
    ex.label = label;
    ex.text_a = cols[1];
    if (kind == TaskKind::kPair) ex.text_b = cols[2];
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

Tensor load_word_vectors(const std::string& path, const Vocabulary& vocab,
                         size_t expected_dim, uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  size_t dim = expected_dim;
  std::unordered_map<std::string, std::vector<double>> file_rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (token.empty() || values.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": malformed vector line");
    }
    if (dim == 0) dim = values.size();
    if (values.size() != dim) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(dim) + " values, got " +
                        std::to_string(values.size()));
    }
    file_rows.emplace(std::move(token), std::move(values));
  }
  if (dim == 0) throw FormatError(path + ": no vectors found");

  const auto& tokens = vocab.tokens();
  Tensor emb = Tensor::zeros({tokens.size(), dim});
  for (size_t id = 0; id < tokens.size(); ++id) {
    if (id == static_cast<size_t>(kPadId)) continue;  // stays zero
    auto it = file_rows.find(tokens[id]);
    if (it != file_rows.end()) {
      for (size_t j = 0; j < dim; ++j) emb.at(id, j) = it->second[j];
    } else {
      Rng row_rng(mix_seed(seed, id));
      for (size_t j = 0; j < dim; ++j) emb.at(id, j) = row_rng.uniform(-0.1, 0.1);
    }
  }
  return emb;
}

std::vector<std::string> augment_mask(const std::vector<std::string>& tokens,
                                      double p_mask, Rng& rng) {
  if (!(p_mask >= 0.0 && p_mask <= 1.0)) {
    throw ParameterError("p_mask must lie in [0, 1]");
  }
  std::vector<std::string> out = tokens;
  for (auto& token : out) {
    if (rng.bernoulli(p_mask)) token = kMaskToken;
  }
  return out;
}

std::vector<std::string> augment_ngram(const std::vector<std::string>& tokens,
                                       Rng& rng, size_t n_lo, size_t n_hi) {
  if (tokens.empty()) throw EmptyInputError("augment_ngram: empty token list");
  if (n_lo == 0 || n_lo > n_hi) {
    throw ParameterError("augment_ngram: invalid n-gram range");
  }
  size_t lo = std::min(n_lo, tokens.size());
  size_t hi = std::min(n_hi, tokens.size());
  size_t n = lo + static_cast<size_t>(rng.next_below(hi - lo + 1));
  size_t start = static_cast<size_t>(rng.next_below(tokens.size() - n + 1));
  return std::vector<std::string>(tokens.begin() + start,
                                  tokens.begin() + start + n);
}

namespace {

std::string augment_text(const std::string& text, const TransferSetOptions& o,
                         Rng& rng) {
  std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) return text;
  if (rng.bernoulli(0.5)) tokens = augment_mask(tokens, o.p_mask, rng);
  if (!tokens.empty() && rng.bernoulli(0.5)) {
    tokens = augment_ngram(tokens, rng, o.ngram_lo, o.ngram_hi);
  }
  return join_tokens(tokens);
}

}  // namespace

std::vector<LabeledExample> build_transfer_set(
    const std::vector<LabeledExample>& examples,
    const TransferSetOptions& opts, Rng& rng) {
  if (opts.multiplier < 1) throw ParameterError("multiplier must be >= 1");
  if (examples.empty()) throw EmptyInputError("build_transfer_set: no input");
  std::vector<LabeledExample> out;
  for (size_t pass = 0; pass < opts.multiplier; ++pass) {
    for (const auto& ex : examples) {
      if (out.size() >= opts.cap) return out;
      LabeledExample variant;
      if (pass == 0) {
        variant.text_a = ex.text_a;
        variant.text_b = ex.text_b;
      } else {
        variant.text_a = augment_text(ex.text_a, opts, rng);
        if (ex.text_b) variant.text_b = augment_text(*ex.text_b, opts, rng);
      }
      out.push_back(std::move(variant));
    }
  }
  return out;
}

BatchingResult make_batches(const std::vector<LabeledExample>& examples,
                            const Vocabulary& vocab, size_t batch_size,
                            Rng& rng, bool shuffle) {
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  struct Row {
    std::vector<int32_t> a, b;
    int label;
    bool pair;
  };
  BatchingResult result;
  std::vector<Row> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) {
    Row row;
    row.a = vocab.encode(tokenize(ex.text_a));
    row.pair = ex.is_pair();
    if (row.pair) row.b = vocab.encode(tokenize(*ex.text_b));
    row.label = ex.label;
    if (row.a.empty() || (row.pair && row.b.empty())) {
      ++result.skipped;
      continue;
    }
    rows.push_back(std::move(row));
  }
  std::vector<size_t> order(rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) rng.shuffle(order);

  for (size_t begin = 0; begin < order.size(); begin += batch_size) {
    size_t end = std::min(begin + batch_size, order.size());
    Batch batch;
    size_t width_a = 0, width_b = 0;
    bool pair = false;
    for (size_t k = begin; k < end; ++k) {
      const Row& row = rows[order[k]];
      width_a = std::max(width_a, row.a.size());
      if (row.pair) {
        pair = true;
        width_b = std::max(width_b, row.b.size());
      }
    }
    for (size_t k = begin; k < end; ++k) {
      const Row& row = rows[order[k]];
      std::vector<int32_t> padded_a(width_a, kPadId);
      std::copy(row.a.begin(), row.a.end(), padded_a.begin());
      batch.tokens_a.push_back(std::move(padded_a));
      batch.lengths_a.push_back(static_cast<int32_t>(row.a.size()));
      if (pair) {
        std::vector<int32_t> padded_b(width_b, kPadId);
        std::copy(row.b.begin(), row.b.end(), padded_b.begin());
        batch.tokens_b.push_back(std::move(padded_b));
        batch.lengths_b.push_back(static_cast<int32_t>(row.b.size()));
      }
      batch.labels.push_back(row.label);
    }
    result.batches.push_back(std::move(batch));
  }
  return result;
}

}  // namespace sra
