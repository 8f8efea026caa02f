#include "sra/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "sra/error.hpp"
#include "sra/rng.hpp"

namespace sra {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t take_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("checkpoint truncated while reading " + what);
  }
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t take_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError("checkpoint truncated while reading " + what);
  }
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string take_string(std::istream& in, const std::string& what) {
  uint64_t len = take_u64(in, what + " length");
  if (len > (1ull << 32)) {
    throw FormatError("implausible " + what + " length in checkpoint");
  }
  std::string s(static_cast<size_t>(len), '\0');
  if (len > 0 && !in.read(s.data(), static_cast<std::streamsize>(len))) {
    throw FormatError("checkpoint truncated while reading " + what);
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const NamedTensorViews& tensors) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, meta.emb_dim);
  put_u64(out, meta.hidden_dim);
  put_u64(out, meta.teacher_dim);
  put_u64(out, meta.vocab_size);
  put_string(out, meta.rng_algorithm.empty() ? std::string(kRngAlgorithm)
                                             : meta.rng_algorithm);
  put_string(out, meta.stage);
  put_string(out, meta.parent_digest);
  put_u64(out, meta.vocab.size());
  for (const auto& token : meta.vocab) put_string(out, token);
  put_u64(out, meta.label_dict.size());
  for (const auto& label : meta.label_dict) put_string(out, label);
  put_u64(out, meta.extra.size());
  for (const auto& [key, value] : meta.extra) {
    put_string(out, key);
    put_string(out, value);
  }
  put_u64(out, tensors.size());
  for (const auto& view : tensors) {
    write_tensor_record(out, view.name, *view.tensor);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path);
  const std::string blob = out.str();
  file.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!file) throw IoError("failed while writing " + path);
}

const Tensor* LoadedCheckpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& LoadedCheckpoint::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw FormatError("checkpoint lacks tensor '" + name + "'");
  return *t;
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(path + ": not an SRA1 checkpoint");
  }
  uint32_t version = take_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  LoadedCheckpoint ckpt;
  CheckpointMeta& meta = ckpt.meta;
  meta.emb_dim = take_u64(in, "emb_dim");
  meta.hidden_dim = take_u64(in, "hidden_dim");
  meta.teacher_dim = take_u64(in, "teacher_dim");
  meta.vocab_size = take_u64(in, "vocab_size");
  meta.rng_algorithm = take_string(in, "rng algorithm");
  if (meta.rng_algorithm != kRngAlgorithm) {
    throw FormatError(path + ": unknown rng algorithm '" + meta.rng_algorithm +
                      "'");
  }
  meta.stage = take_string(in, "stage");
  if (meta.stage != "distilled" && meta.stage != "finetuned") {
    throw FormatError(path + ": unknown stage '" + meta.stage + "'");
  }
  meta.parent_digest = take_string(in, "parent digest");
  uint64_t vocab_count = take_u64(in, "vocab count");
  if (vocab_count != meta.vocab_size) {
    throw FormatError(path + ": vocab list length disagrees with header");
  }
  meta.vocab.reserve(static_cast<size_t>(vocab_count));
  for (uint64_t i = 0; i < vocab_count; ++i) {
    meta.vocab.push_back(take_string(in, "vocab token"));
  }
  uint64_t label_count = take_u64(in, "label count");
  for (uint64_t i = 0; i < label_count; ++i) {
    meta.label_dict.push_back(take_string(in, "label"));
  }
  uint64_t extra_count = take_u64(in, "extra count");
  for (uint64_t i = 0; i < extra_count; ++i) {
    std::string key = take_string(in, "extra key");
    std::string value = take_string(in, "extra value");
    meta.extra.emplace_back(std::move(key), std::move(value));
  }
  uint64_t tensor_count = take_u64(in, "tensor count");
  for (uint64_t i = 0; i < tensor_count; ++i) {
    auto [name, tensor] = read_tensor_record(in);
    ckpt.tensors.emplace_back(std::move(name), std::move(tensor));
  }
  char trailing;
  if (in.read(&trailing, 1)) {
    throw FormatError(path + ": trailing bytes after final tensor record");
  }
  return ckpt;
}

void save_encoder_checkpoint(
    const std::string& path, const StudentEncoder& encoder,
    const Vocabulary& vocab, const std::string& stage,
    const std::string& parent_digest,
    const std::vector<std::pair<std::string, std::string>>& extra) {
  const EncoderConfig& cfg = encoder.config();
  if (vocab.size() != cfg.vocab_size) {
    throw DimensionError("vocabulary size does not match encoder config");
  }
  CheckpointMeta meta;
  meta.emb_dim = cfg.emb_dim;
  meta.hidden_dim = cfg.hidden_dim;
  meta.teacher_dim = cfg.teacher_dim;
  meta.vocab_size = cfg.vocab_size;
  meta.rng_algorithm = kRngAlgorithm;
  meta.stage = stage;
  meta.parent_digest = parent_digest;
  meta.vocab = vocab.tokens();
  meta.extra = extra;
  save_checkpoint(path, meta, encoder.named_tensors());
}

StudentEncoder encoder_from_checkpoint(const LoadedCheckpoint& ckpt) {
  EncoderConfig cfg;
  cfg.vocab_size = static_cast<size_t>(ckpt.meta.vocab_size);
  cfg.emb_dim = static_cast<size_t>(ckpt.meta.emb_dim);
  cfg.hidden_dim = static_cast<size_t>(ckpt.meta.hidden_dim);
  cfg.teacher_dim = static_cast<size_t>(ckpt.meta.teacher_dim);
  StudentEncoder encoder = StudentEncoder::zeros(cfg);
  for (auto ref : encoder.params()) {
    const Tensor& stored = ckpt.require(ref.name);
    if (!stored.same_shape(*ref.tensor)) {
      throw FormatError("tensor '" + ref.name + "' has shape " +
                        stored.shape_str() + ", expected " +
                        ref.tensor->shape_str());
    }
    ref.tensor->data = stored.data;
  }
  return encoder;
}

EncoderCheckpoint load_encoder_checkpoint(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  EncoderCheckpoint out{encoder_from_checkpoint(ckpt),
                        Vocabulary::from_tokens(ckpt.meta.vocab),
                        std::move(ckpt.meta)};
  if (out.vocab.size() != out.meta.vocab_size) {
    throw FormatError(path + ": vocabulary size mismatch");
  }
  return out;
}

}  // namespace sra
