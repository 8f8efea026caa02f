#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sra/distill.hpp"
#include "sra/finetune.hpp"
#include "sra/nn.hpp"
#include "sra/teacher.hpp"

namespace sra {

int argmax(const Tensor& logits);

double accuracy(const std::vector<int>& preds, const std::vector<int>& golds);
// 2PR/(P+R); 0 when precision+recall is 0.
double f1_binary(const std::vector<int>& preds, const std::vector<int>& golds,
                 int positive_class);

struct MetricReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  int positive_class = 1;
  size_t support_positive = 0;
  size_t support_negative = 0;
};

MetricReport compute_metrics(const std::vector<int>& preds,
                             const std::vector<int>& golds,
                             int positive_class = 1);

// Sum of element counts over named tensors; the "embedding" table is omitted
// when exclude_embeddings is set.
size_t count_parameters(const NamedTensorViews& tensors,
                        bool exclude_embeddings);

struct TimingReport {
  double seconds = 0.0;        // median over repeats
  double sentences_per_sec = 0.0;
  size_t sentences = 0;
  size_t batch_size = 0;
  size_t repeats = 0;
};

// Times batched forward passes only: batches are padded up front, one
// warm-up pass runs untimed, and the median of `repeats` timed passes is
// reported.
TimingReport time_inference(const StudentEncoder& encoder,
                            const std::vector<std::vector<int32_t>>& rows,
                            size_t batch_size, size_t repeats);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepTask {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
  TaskModelConfig task;
  FinetuneConfig finetune;  // patience is overridden to max_epochs so every
                            // run yields exactly max_epochs history rows
};

struct DataFractionRow {
  double fraction = 0.0;
  std::string init;  // "distilled" or "random"
  uint64_t seed = 0;
  size_t epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

// Fractions are prefixes of the training set in original order (fraction 1.0
// is the whole set, hence identical to a plain run). "distilled" rows start
// from the checkpoint's encoder, "random" rows from a fresh encoder of the
// same shape; heads are drawn from the run seed either way.
std::vector<DataFractionRow> data_fraction_sweep(
    const SweepTask& task, const Vocabulary& vocab,
    const std::string& distilled_checkpoint, const EncoderConfig& enc_cfg,
    const std::vector<double>& fractions, const std::vector<std::string>& inits,
    const std::vector<uint64_t>& seeds);

void write_data_fraction_csv(const std::string& path,
                             const std::vector<DataFractionRow>& rows,
                             bool plot_shape);

struct DistillSizeRow {
  size_t size = 0;
  std::optional<double> val_loss;  // absent for the undistilled size-0 row
  double dev_metric = 0.0;
};

// Distills on ascending prefix sizes of the corpus against a fixed held-out
// validation split, then fine-tunes the downstream task from each result.
// val_loss and dev_metric are means over `seeds`.
std::vector<DistillSizeRow> distill_size_sweep(
    const std::vector<std::string>& corpus, const std::vector<size_t>& sizes,
    const TeacherOracle& oracle, const Vocabulary& vocab,
    const EncoderConfig& enc_cfg, const DistillConfig& distill_cfg,
    const SweepTask& downstream, const std::vector<uint64_t>& seeds);

void write_distill_size_csv(const std::string& path,
                            const std::vector<DistillSizeRow>& rows);

}  // namespace sra
