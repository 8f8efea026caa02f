#include "sra/distill.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "sra/checkpoint.hpp"
#include "sra/error.hpp"

namespace sra {

namespace {

struct Sample {
  std::vector<int32_t> ids;
  Tensor teacher;
};

// Tokenizes, drops empties, verifies coverage, and caches teacher vectors.
std::vector<Sample> prepare(const std::vector<std::string>& sentences,
                            const TeacherOracle& oracle,
                            const Vocabulary& vocab, size_t* dropped) {
  std::vector<const std::string*> kept;
  std::vector<std::vector<int32_t>> ids;
  for (const auto& s : sentences) {
    auto row = vocab.encode(tokenize(s));
    if (row.empty()) {
      ++*dropped;
      continue;
    }
    kept.push_back(&s);
    ids.push_back(std::move(row));
  }
  std::vector<std::string> missing;
  for (const auto* s : kept) {
    if (!oracle.covers(*s)) missing.push_back(normalize_for_id(*s));
  }
  if (!missing.empty()) {
    std::string msg = "teacher does not cover " +
                      std::to_string(missing.size()) + " sentence(s):";
    for (size_t i = 0; i < missing.size() && i < 10; ++i) {
      msg += "\n  " + missing[i];
    }
    if (missing.size() > 10) {
      msg += "\n  ... and " + std::to_string(missing.size() - 10) + " more";
    }
    throw CoverageError(msg);
  }
  std::vector<Sample> samples;
  samples.reserve(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    Tensor t = oracle.embed(*kept[i]);
    samples.push_back(Sample{std::move(ids[i]), std::move(t)});
  }
  return samples;
}

double validate_cached(const StudentEncoder& encoder,
                       const std::vector<Sample>& samples) {
  if (samples.empty()) throw EmptyInputError("validation set is empty");
  double total = 0.0;
  size_t n = 0;
  for (const auto& sample : samples) {
    try {
      Tensor s = encoder.forward(sample.ids);
      total += cosine_distill_loss(sample.teacher, s);
      ++n;
    } catch (const DegenerateVectorError&) {
    }
  }
  if (n == 0) {
    throw NumericError("every validation embedding was degenerate");
  }
  return total / static_cast<double>(n);
}

ParamRefs select_params(StudentEncoder& encoder, bool freeze_embeddings) {
  ParamRefs refs = encoder.params();
  if (freeze_embeddings) {
    refs.erase(std::remove_if(refs.begin(), refs.end(),
                              [](const ParamRef& r) {
                                return r.name == "embedding";
                              }),
               refs.end());
  }
  return refs;
}

std::vector<std::pair<std::string, std::string>> config_extra(
    const DistillConfig& cfg) {
  auto fmt = [](double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
  };
  return {{"lr", fmt(cfg.lr)},
          {"batch_size", std::to_string(cfg.batch_size)},
          {"epochs", std::to_string(cfg.epochs)},
          {"seed", std::to_string(cfg.seed)},
          {"freeze_embeddings", cfg.freeze_embeddings ? "1" : "0"}};
}

}  // namespace

DistillResult distill(const std::vector<std::string>& corpus,
                      const TeacherOracle& oracle, StudentEncoder& encoder,
                      const Vocabulary& vocab, const DistillConfig& cfg,
                      const std::vector<std::string>* explicit_validation) {
  if (corpus.empty()) throw EmptyInputError("distill: empty corpus");
  if (cfg.batch_size == 0) throw ParameterError("batch_size must be positive");
  if (cfg.epochs == 0) throw ParameterError("epochs must be positive");
  if (cfg.workers == 0) throw ParameterError("workers must be positive");
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
    throw ParameterError("validation_fraction must lie in [0, 1)");
  }
  if (oracle.dim() != encoder.config().teacher_dim) {
    throw DimensionError("teacher dimension " + std::to_string(oracle.dim()) +
                         " does not match encoder output dimension " +
                         std::to_string(encoder.config().teacher_dim));
  }

  DistillResult result;
  std::vector<Sample> train = prepare(corpus, oracle, vocab, &result.skipped);
  if (train.empty()) {
    throw EmptyInputError("distill: corpus is empty after dropping "
                          "untokenizable sentences");
  }

  Rng order_rng(mix_seed(cfg.seed, 0xD157111));
  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  order_rng.shuffle(order);

  std::vector<Sample> val;
  if (explicit_validation) {
    val = prepare(*explicit_validation, oracle, vocab, &result.skipped);
  } else if (cfg.validation_fraction > 0.0 && train.size() >= 2) {
    size_t val_count = static_cast<size_t>(
        cfg.validation_fraction * static_cast<double>(train.size()));
    val_count = std::clamp<size_t>(val_count, 1, train.size() - 1);
    for (size_t k = train.size() - val_count; k < train.size(); ++k) {
      val.push_back(std::move(train[order[k]]));
    }
    order.resize(train.size() - val_count);
  }
  // Compact train down to the surviving order.
  {
    std::vector<Sample> compact;
    compact.reserve(order.size());
    for (size_t idx : order) compact.push_back(std::move(train[idx]));
    train = std::move(compact);
  }
  result.train_sentences = train.size();
  result.val_sentences = val.size();

  const bool has_val = !val.empty();
  if (has_val) {
    result.initial_val_loss = validate_cached(encoder, val);
    result.best_val_loss = result.initial_val_loss;
  }

  if (!cfg.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
  }
  auto ckpt_path = [&](const char* name) {
    return (std::filesystem::path(cfg.checkpoint_dir) / name).string();
  };

  StudentEncoder master_grads = StudentEncoder::zeros(encoder.config());
  std::vector<StudentEncoder> worker_grads;
  for (size_t w = 0; w + 1 < cfg.workers; ++w) {
    worker_grads.push_back(StudentEncoder::zeros(encoder.config()));
  }

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  ParamRefs params = select_params(encoder, cfg.freeze_embeddings);
  ParamRefs grad_refs = select_params(master_grads, cfg.freeze_embeddings);
  Adam adam(adam_cfg, params);

  std::vector<size_t> epoch_order(train.size());
  for (size_t i = 0; i < epoch_order.size(); ++i) epoch_order[i] = i;

  size_t succeeded = 0;
  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(epoch_order);
    double epoch_loss_sum = 0.0;
    size_t epoch_count = 0;

    for (size_t begin = 0; begin < epoch_order.size();
         begin += cfg.batch_size) {
      const size_t end = std::min(begin + cfg.batch_size, epoch_order.size());
      zero_params(master_grads.params());
      for (auto& wg : worker_grads) zero_params(wg.params());

      struct Shard {
        double loss_sum = 0.0;
        size_t count = 0;
        size_t skipped = 0;
        std::optional<std::string> numeric_error;
      };
      const size_t span = end - begin;
      const size_t n_workers = std::min(cfg.workers, span);
      std::vector<Shard> shards(n_workers);

      auto run_shard = [&](size_t w, StudentEncoder& grads) {
        Shard& shard = shards[w];
        const size_t lo = begin + (span * w) / n_workers;
        const size_t hi = begin + (span * (w + 1)) / n_workers;
        for (size_t k = lo; k < hi; ++k) {
          const Sample& sample = train[epoch_order[k]];
          EncoderTrace trace;
          double loss;
          Tensor d_s;
          try {
            Tensor s = encoder.forward(sample.ids, &trace);
            loss = cosine_distill_loss(sample.teacher, s);
            d_s = cosine_distill_backward(sample.teacher, s);
          } catch (const DegenerateVectorError&) {
            ++shard.skipped;
            continue;
          }
          if (!std::isfinite(loss)) {
            shard.numeric_error = "epoch " + std::to_string(epoch) +
                                  ": non-finite training loss";
            return;
          }
          encoder.backward(trace, d_s, grads);
          shard.loss_sum += loss;
          ++shard.count;
        }
      };

      if (n_workers == 1) {
        run_shard(0, master_grads);
      } else {
        std::vector<std::thread> threads;
        for (size_t w = 1; w < n_workers; ++w) {
          threads.emplace_back(run_shard, w, std::ref(worker_grads[w - 1]));
        }
        run_shard(0, master_grads);
        for (auto& t : threads) t.join();
        for (size_t w = 1; w < n_workers; ++w) {
          ParamRefs dst = master_grads.params();
          ParamRefs src = worker_grads[w - 1].params();
          for (size_t p = 0; p < dst.size(); ++p) {
            add_inplace(*dst[p].tensor, *src[p].tensor);
          }
        }
      }

      size_t batch_count = 0;
      for (const auto& shard : shards) {
        if (shard.numeric_error) throw NumericError(*shard.numeric_error);
        epoch_loss_sum += shard.loss_sum;
        batch_count += shard.count;
        result.skipped += shard.skipped;
      }
      succeeded += batch_count;
      epoch_count += batch_count;
      if (batch_count == 0) continue;

      const double inv = 1.0 / static_cast<double>(batch_count);
      for (auto ref : master_grads.params()) scale_inplace(*ref.tensor, inv);
      adam.step(params, grad_refs);
    }

    if (epoch_count == 0) {
      throw NumericError("epoch " + std::to_string(epoch) +
                         ": every sample was skipped");
    }
    result.train_loss.push_back(epoch_loss_sum /
                                static_cast<double>(epoch_count));
    if (has_val) {
      double vl = validate_cached(encoder, val);
      result.val_loss.push_back(vl);
      if (vl < result.best_val_loss || result.best_epoch == 0) {
        result.best_val_loss = vl;
        result.best_epoch = epoch;
        if (!cfg.checkpoint_dir.empty()) {
          result.best_checkpoint = ckpt_path("best.ckpt");
          save_encoder_checkpoint(result.best_checkpoint, encoder, vocab,
                                  "distilled", "", config_extra(cfg));
        }
      }
    }

    const double skip_rate =
        static_cast<double>(result.skipped) /
        static_cast<double>(result.skipped + succeeded);
    if (skip_rate > cfg.max_skip_fraction) {
      throw NumericError(
          "skip rate " + std::to_string(skip_rate) + " exceeds " +
          std::to_string(cfg.max_skip_fraction) +
          " (degenerate embeddings or untokenizable sentences)");
    }
  }

  if (!cfg.checkpoint_dir.empty()) {
    result.final_checkpoint = ckpt_path("final.ckpt");
    save_encoder_checkpoint(result.final_checkpoint, encoder, vocab,
                            "distilled", "", config_extra(cfg));
    if (result.best_checkpoint.empty()) {
      result.best_checkpoint = ckpt_path("best.ckpt");
      save_encoder_checkpoint(result.best_checkpoint, encoder, vocab,
                              "distilled", "", config_extra(cfg));
    }
    write_loss_history(ckpt_path("history.csv"), result);
  }
  return result;
}

double validate_distill(const StudentEncoder& encoder,
                        const TeacherOracle& oracle,
                        const std::vector<std::string>& held_out,
                        const Vocabulary& vocab) {
  if (held_out.empty()) throw EmptyInputError("validate_distill: no sentences");
  size_t dropped = 0;
  std::vector<Sample> samples = prepare(held_out, oracle, vocab, &dropped);
  if (samples.empty()) {
    throw EmptyInputError("validate_distill: nothing tokenizable");
  }
  return validate_cached(encoder, samples);
}

void write_loss_history(const std::string& path, const DistillResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,train_loss,val_loss\n";
  out.precision(17);
  for (size_t i = 0; i < result.train_loss.size(); ++i) {
    out << (i + 1) << "," << result.train_loss[i] << ",";
    if (i < result.val_loss.size()) out << result.val_loss[i];
    out << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace sra
