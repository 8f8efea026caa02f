#include "sra/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include "sra/error.hpp"

namespace sra {

int argmax(const Tensor& logits) {
  if (logits.data.empty()) throw EmptyInputError("argmax of an empty tensor");
  size_t best = 0;
  for (size_t i = 1; i < logits.data.size(); ++i) {
    if (logits.data[i] > logits.data[best]) best = i;
  }
  return static_cast<int>(best);
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& golds) {
  if (preds.size() != golds.size()) {
    throw DimensionError("accuracy: prediction/gold length mismatch");
  }
  if (preds.empty()) throw EmptyInputError("accuracy: no predictions");
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == golds[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double f1_binary(const std::vector<int>& preds, const std::vector<int>& golds,
                 int positive_class) {
  if (preds.size() != golds.size()) {
    throw DimensionError("f1_binary: prediction/gold length mismatch");
  }
  if (preds.empty()) throw EmptyInputError("f1_binary: no predictions");
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const bool pred_pos = preds[i] == positive_class;
    const bool gold_pos = golds[i] == positive_class;
    if (pred_pos && gold_pos) ++tp;
    if (pred_pos && !gold_pos) ++fp;
    if (!pred_pos && gold_pos) ++fn;
  }
  const double p = tp + fp == 0 ? 0.0
                                : static_cast<double>(tp) /
                                      static_cast<double>(tp + fp);
  const double r = tp + fn == 0 ? 0.0
                                : static_cast<double>(tp) /
                                      static_cast<double>(tp + fn);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

MetricReport compute_metrics(const std::vector<int>& preds,
                             const std::vector<int>& golds,
                             int positive_class) {
  MetricReport report;
  report.positive_class = positive_class;
  report.accuracy = accuracy(preds, golds);
  report.f1 = f1_binary(preds, golds, positive_class);
  for (int g : golds) {
    if (g == positive_class) {
      ++report.support_positive;
    } else {
      ++report.support_negative;
    }
  }
  return report;
}

size_t count_parameters(const NamedTensorViews& tensors,
                        bool exclude_embeddings) {
  size_t total = 0;
  for (const auto& view : tensors) {
    if (exclude_embeddings && view.name == "embedding") continue;
    total += view.tensor->data.size();
  }
  return total;
}

TimingReport time_inference(const StudentEncoder& encoder,
                            const std::vector<std::vector<int32_t>>& rows,
                            size_t batch_size, size_t repeats) {
  if (rows.empty()) throw EmptyInputError("time_inference: no sentences");
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (repeats == 0) throw ParameterError("repeats must be positive");

  struct Padded {
    std::vector<std::vector<int32_t>> rows;
    std::vector<int32_t> lengths;
  };
  std::vector<Padded> batches;
  for (size_t begin = 0; begin < rows.size(); begin += batch_size) {
    const size_t end = std::min(begin + batch_size, rows.size());
    Padded batch;
    size_t width = 0;
    for (size_t i = begin; i < end; ++i) width = std::max(width, rows[i].size());
    for (size_t i = begin; i < end; ++i) {
      if (rows[i].empty()) {
        throw EmptyInputError("time_inference: empty token row");
      }
      std::vector<int32_t> padded(width, kPadId);
      std::copy(rows[i].begin(), rows[i].end(), padded.begin());
      batch.rows.push_back(std::move(padded));
      batch.lengths.push_back(static_cast<int32_t>(rows[i].size()));
    }
    batches.push_back(std::move(batch));
  }

  encoder.forward_batch(batches.front().rows, batches.front().lengths);

  std::vector<double> elapsed;
  elapsed.reserve(repeats);
  for (size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& batch : batches) {
      encoder.forward_batch(batch.rows, batch.lengths);
    }
    const auto t1 = std::chrono::steady_clock::now();
    elapsed.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(elapsed.begin(), elapsed.end());
  const size_t mid = elapsed.size() / 2;
  const double median = elapsed.size() % 2 == 1
                            ? elapsed[mid]
                            : 0.5 * (elapsed[mid - 1] + elapsed[mid]);

  TimingReport report;
  report.seconds = median;
  report.sentences = rows.size();
  report.batch_size = batch_size;
  report.repeats = repeats;
  report.sentences_per_sec =
      median > 0.0 ? static_cast<double>(rows.size()) / median : 0.0;
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

FinetuneConfig rectangular(const FinetuneConfig& cfg, uint64_t seed) {
  FinetuneConfig out = cfg;
  out.seed = seed;
  out.patience = out.max_epochs;  // no early stop: fixed-length histories
  return out;
}

}  // namespace

std::vector<DataFractionRow> data_fraction_sweep(
    const SweepTask& task, const Vocabulary& vocab,
    const std::string& distilled_checkpoint, const EncoderConfig& enc_cfg,
    const std::vector<double>& fractions, const std::vector<std::string>& inits,
    const std::vector<uint64_t>& seeds) {
  if (fractions.empty()) throw ParameterError("no fractions given");
  if (inits.empty()) throw ParameterError("no inits given");
  if (seeds.empty()) throw ParameterError("no seeds given");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw ParameterError("fractions must lie in (0, 1]");
    }
  }
  bool wants_distilled = false;
  for (const auto& init : inits) {
    if (init == "distilled") {
      wants_distilled = true;
    } else if (init != "random") {
      throw ParameterError("init must be 'distilled' or 'random', got '" +
                           init + "'");
    }
  }

  std::optional<EncoderCheckpoint> ckpt;
  if (wants_distilled) {
    if (distilled_checkpoint.empty()) {
      throw ParameterError("distilled init requires a checkpoint path");
    }
    ckpt = load_encoder_checkpoint(distilled_checkpoint);
    if (ckpt->vocab.tokens() != vocab.tokens()) {
      throw ParameterError(
          "checkpoint vocabulary differs from the task vocabulary");
    }
    const EncoderConfig& c = ckpt->encoder.config();
    if (c.emb_dim != enc_cfg.emb_dim || c.hidden_dim != enc_cfg.hidden_dim ||
        c.teacher_dim != enc_cfg.teacher_dim ||
        c.vocab_size != enc_cfg.vocab_size) {
      throw DimensionError("checkpoint encoder shape differs from enc_cfg");
    }
  }

  const size_t n = task.train.size();
  if (n == 0) throw EmptyInputError("data_fraction_sweep: no training data");

  std::vector<DataFractionRow> rows;
  for (double fraction : fractions) {
    size_t count = static_cast<size_t>(
        std::llround(fraction * static_cast<double>(n)));
    count = std::min(count, n);
    if (count < 1) {
      throw ParameterError("fraction " + std::to_string(fraction) +
                           " yields no training examples");
    }
    std::vector<LabeledExample> subset(task.train.begin(),
                                       task.train.begin() + count);
    for (const auto& init : inits) {
      for (uint64_t seed : seeds) {
        StudentEncoder encoder;
        if (init == "distilled") {
          encoder = ckpt->encoder;
        } else {
          Rng enc_rng(mix_seed(seed, kEncoderInitStream));
          encoder = StudentEncoder::create(enc_cfg, enc_rng);
        }
        Rng head_rng(mix_seed(seed, kHeadInitStream));
        TaskModel model =
            TaskModel::create(std::move(encoder), task.task, head_rng);
        FinetuneResult run = finetune(model, subset, task.dev, vocab,
                                      rectangular(task.finetune, seed));
        for (const auto& stats : run.arms[run.best_arm].history) {
          rows.push_back(DataFractionRow{fraction, init, seed, stats.epoch,
                                         stats.train_loss, stats.dev_metric});
        }
      }
    }
  }
  return rows;
}

void write_data_fraction_csv(const std::string& path,
                             const std::vector<DataFractionRow>& rows,
                             bool plot_shape) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  if (!plot_shape) {
    out << "fraction,init,seed,epoch,train_loss,dev_metric\n";
    for (const auto& r : rows) {
      out << r.fraction << "," << r.init << "," << r.seed << "," << r.epoch
          << "," << r.train_loss << "," << r.dev_metric << "\n";
    }
  } else {
    // One point per (fraction, init): mean final-epoch dev metric over seeds.
    std::map<std::pair<double, std::string>, std::pair<double, size_t>> cells;
    std::map<std::pair<double, std::string>, size_t> final_epoch;
    for (const auto& r : rows) {
      auto key = std::make_pair(r.fraction, r.init);
      final_epoch[key] = std::max(final_epoch[key], r.epoch);
    }
    for (const auto& r : rows) {
      auto key = std::make_pair(r.fraction, r.init);
      if (r.epoch != final_epoch[key]) continue;
      auto& cell = cells[key];
      cell.first += r.dev_metric;
      cell.second += 1;
    }
    out << "fraction,init,mean_final_dev_metric\n";
    for (const auto& [key, cell] : cells) {
      out << key.first << "," << key.second << ","
          << cell.first / static_cast<double>(cell.second) << "\n";
    }
  }
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<DistillSizeRow> distill_size_sweep(
    const std::vector<std::string>& corpus, const std::vector<size_t>& sizes,
    const TeacherOracle& oracle, const Vocabulary& vocab,
    const EncoderConfig& enc_cfg, const DistillConfig& distill_cfg,
    const SweepTask& downstream, const std::vector<uint64_t>& seeds) {
  if (sizes.empty()) throw ParameterError("no sizes given");
  if (seeds.empty()) throw ParameterError("no seeds given");
  for (size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) {
      throw ParameterError("sizes must be strictly ascending");
    }
  }
  if (corpus.empty()) throw EmptyInputError("distill_size_sweep: empty corpus");

  // Fixed held-out validation tail, shared by every (size, seed) cell.
  size_t val_count = static_cast<size_t>(std::llround(
      std::max(distill_cfg.validation_fraction, 0.01) *
      static_cast<double>(corpus.size())));
  val_count = std::clamp<size_t>(val_count, 1, corpus.size() - 1);
  const size_t pool = corpus.size() - val_count;
  if (sizes.back() > pool) {
    throw ParameterError("size " + std::to_string(sizes.back()) +
                         " exceeds the " + std::to_string(pool) +
                         " sentences available after the validation split");
  }
  const std::vector<std::string> val(corpus.end() - val_count, corpus.end());

  std::vector<DistillSizeRow> rows;
  for (size_t size : sizes) {
    double loss_sum = 0.0;
    double metric_sum = 0.0;
    for (uint64_t seed : seeds) {
      Rng enc_rng(mix_seed(seed, kEncoderInitStream));
      StudentEncoder encoder = StudentEncoder::create(enc_cfg, enc_rng);
      if (size > 0) {
        std::vector<std::string> prefix(corpus.begin(), corpus.begin() + size);
        DistillConfig dcfg = distill_cfg;
        dcfg.seed = seed;
        dcfg.checkpoint_dir.clear();
        DistillResult dres =
            distill(prefix, oracle, encoder, vocab, dcfg, &val);
        loss_sum += dres.val_loss.back();
      }
      Rng head_rng(mix_seed(seed, kHeadInitStream));
      TaskModel model =
          TaskModel::create(std::move(encoder), downstream.task, head_rng);
      FinetuneConfig fcfg = downstream.finetune;
      fcfg.seed = seed;
      FinetuneResult run =
          finetune(model, downstream.train, downstream.dev, vocab, fcfg);
      metric_sum += run.best_metric;
    }
    DistillSizeRow row;
    row.size = size;
    if (size > 0) {
      row.val_loss = loss_sum / static_cast<double>(seeds.size());
    }
    row.dev_metric = metric_sum / static_cast<double>(seeds.size());
    rows.push_back(row);
  }
  return rows;
}

void write_distill_size_csv(const std::string& path,
                            const std::vector<DistillSizeRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "size,val_loss,dev_metric\n";
  for (const auto& r : rows) {
    out << r.size << ",";
    if (r.val_loss) out << *r.val_loss;
    out << "," << r.dev_metric << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace sra
