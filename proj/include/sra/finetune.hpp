#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sra/checkpoint.hpp"
#include "sra/data.hpp"
#include "sra/nn.hpp"

namespace sra {

enum class FeatureSource { kProjected, kHidden };  // S_x (default) or H

struct TaskModelConfig {
  TaskKind task = TaskKind::kSingle;
  FeatureSource features = FeatureSource::kProjected;
  size_t num_classes = 2;
  std::vector<size_t> head_hidden = {256};
};

// Per-sentence feature width: d for kProjected, 2h for kHidden. Pair tasks
// feed the head [a, b, |a-b|, a*b] (4x that width).
size_t feature_dim(const EncoderConfig& enc, const TaskModelConfig& cfg);
size_t head_input_dim(const EncoderConfig& enc, const TaskModelConfig& cfg);

Tensor pair_features(const Tensor& a, const Tensor& b);
void pair_features_backward(const Tensor& a, const Tensor& b,
                            const Tensor& d_feat, Tensor& d_a, Tensor& d_b);

struct TaskTrace {
  EncoderTrace enc_a, enc_b;  // enc_b unused for single tasks
  Tensor feat_a, feat_b;      // per-sentence features
  MlpTrace mlp;
};

// Shared encoder (single storage, used for both pair sides) plus MLP head.
struct TaskModel {
  StudentEncoder encoder;
  MlpHead head;

  static TaskModel create(StudentEncoder encoder, const TaskModelConfig& cfg,
                          Rng& head_rng);
  static TaskModel zeros(const EncoderConfig& enc_cfg,
                         const TaskModelConfig& cfg);

  const TaskModelConfig& task_config() const { return cfg_; }

  Tensor forward(const std::vector<int32_t>& tokens_a,
                 const std::vector<int32_t>& tokens_b,
                 TaskTrace* trace = nullptr) const;  // logits
  // Accumulates into `grads`; both pair sides flow into the one encoder.
  void backward(const TaskTrace& trace, const Tensor& d_logits,
                TaskModel& grads) const;

  ParamRefs params();
  NamedTensorViews named_tensors() const;

  void set_task_config(const TaskModelConfig& cfg) { cfg_ = cfg; }

 private:
  TaskModelConfig cfg_;
};

// Stream ids for deriving init rngs from a run seed, shared by the loaders,
// the sweeps, and the CLI so equal seeds mean equal initializations.
inline constexpr uint64_t kHeadInitStream = 0x4EAD;
inline constexpr uint64_t kEncoderInitStream = 0xE4C0DE;

// Copies the encoder bit-exactly from a distilled checkpoint and draws a
// fresh head from the run seed.
struct InheritedModel {
  TaskModel model;
  Vocabulary vocab;
  std::string parent_digest;  // digest of the checkpoint file inherited from
};
InheritedModel task_model_from_checkpoint(const std::string& path,
                                          const TaskModelConfig& cfg,
                                          uint64_t seed);

void save_task_checkpoint(const std::string& path, const TaskModel& model,
                          const Vocabulary& vocab,
                          const std::vector<std::string>& label_dict,
                          const std::string& parent_digest);

struct LoadedTaskModel {
  TaskModel model;
  Vocabulary vocab;
  std::vector<std::string> label_dict;
  CheckpointMeta meta;
};
LoadedTaskModel load_task_checkpoint(const std::string& path);

// Teacher logits for optional distillation during fine-tuning, keyed by
// sentence id (pairs: sha256 of the two normalized sides joined by '\n').
struct TeacherLogits {
  size_t num_classes = 0;
  std::unordered_map<std::string, Tensor> by_id;
};
TeacherLogits load_teacher_logits(const std::string& path);
std::string example_kd_id(const LabeledExample& ex);

struct FinetuneConfig {
  std::vector<double> lr_grid = {2e-4, 3e-4, 5e-4, 1e-3};
  size_t max_epochs = 100;
  size_t patience = 5;  // epochs without dev improvement before stopping
  size_t batch_size = 32;
  uint64_t seed = 42;
  double kd_alpha = 1.0;  // weight of the logit-MSE term when logits present
  size_t workers = 1;
};

struct EpochStats {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_metric = 0.0;     // accuracy (single) or F1 (pair)
  double dev_secondary = 0.0;  // accuracy for pair tasks, ties broken on it
};

struct ArmResult {
  double lr = 0.0;
  std::vector<EpochStats> history;
  size_t best_epoch = 0;  // 1-based
  double best_metric = 0.0;
  double best_secondary = 0.0;
};

struct FinetuneResult {
  TaskModel best_model;
  double best_lr = 0.0;
  size_t best_arm = 0;
  double best_metric = 0.0;
  double best_secondary = 0.0;
  std::vector<ArmResult> arms;
  size_t skipped = 0;  // train/dev examples with empty tokenizations
};

// Grid search over lr_grid; every arm starts from a copy of `init` and sees
// the same batch order. Dev metric is accuracy for single-sentence tasks and
// F1 (accuracy tie-break) for pair tasks; grid ties resolve to the smaller
// lr. Early stopping per arm after `patience` epochs without improvement.
FinetuneResult finetune(const TaskModel& init,
                        const std::vector<LabeledExample>& train,
                        const std::vector<LabeledExample>& dev,
                        const Vocabulary& vocab, const FinetuneConfig& cfg,
                        const TeacherLogits* teacher = nullptr);

// "lr,epoch,train_loss,dev_metric" rows across all arms.
void write_finetune_report(const std::string& path,
                           const FinetuneResult& result);

struct SimilarityResult {
  double accuracy = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  size_t evaluated = 0;
  size_t skipped = 0;
};

// Zero-shot pair evaluation: cosine between the two encoded sides against a
// threshold. With no explicit threshold the best-accuracy value is chosen on
// `dev` (or on `pairs` when dev is null), scanning -1.0 to 1.0 in 0.02 steps
// and keeping the smallest tie. Positive class is label 1.
SimilarityResult untuned_similarity_eval(
    const std::vector<LabeledExample>& pairs, const StudentEncoder& encoder,
    const Vocabulary& vocab, std::optional<double> threshold = std::nullopt,
    const std::vector<LabeledExample>* dev = nullptr);

}  // namespace sra
