#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sra/data.hpp"
#include "sra/nn.hpp"

namespace sra {

inline constexpr char kCheckpointMagic[4] = {'S', 'R', 'A', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  uint64_t emb_dim = 0;
  uint64_t hidden_dim = 0;
  uint64_t teacher_dim = 0;
  uint64_t vocab_size = 0;
  std::string rng_algorithm;  // must equal kRngAlgorithm
  std::string stage;          // "distilled" or "finetuned"
  std::string parent_digest;  // sha256 of the parent checkpoint file, or ""
  std::vector<std::string> vocab;       // id order, reserved tokens first
  std::vector<std::string> label_dict;  // finetuned checkpoints only
  std::vector<std::pair<std::string, std::string>> extra;  // ordered
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const NamedTensorViews& tensors);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor>> tensors;  // file order

  const Tensor* find(const std::string& name) const;
  const Tensor& require(const std::string& name) const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

void save_encoder_checkpoint(
    const std::string& path, const StudentEncoder& encoder,
    const Vocabulary& vocab, const std::string& stage,
    const std::string& parent_digest,
    const std::vector<std::pair<std::string, std::string>>& extra = {});

struct EncoderCheckpoint {
  StudentEncoder encoder;
  Vocabulary vocab;
  CheckpointMeta meta;
};

EncoderCheckpoint load_encoder_checkpoint(const std::string& path);

// Rebuilds encoder tensors from an already-parsed checkpoint; shared by the
// encoder and task-model loaders.
StudentEncoder encoder_from_checkpoint(const LoadedCheckpoint& ckpt);

}  // namespace sra
