#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sra/data.hpp"
#include "sra/nn.hpp"
#include "sra/teacher.hpp"

namespace sra {

struct DistillConfig {
  double lr = 1e-3;
  size_t batch_size = 1024;
  size_t epochs = 10;
  uint64_t seed = 42;
  bool freeze_embeddings = false;
  double validation_fraction = 0.02;
  std::string checkpoint_dir;  // empty: nothing written to disk
  size_t workers = 1;
  // Abort threshold for sentences whose embedding collapses to a degenerate
  // vector (plus empty tokenizations dropped up front).
  double max_skip_fraction = 0.01;
};

struct DistillResult {
  std::vector<double> train_loss;  // mean cosine loss per epoch
  std::vector<double> val_loss;    // parallel to train_loss; empty if no val
  double initial_val_loss = 0.0;
  size_t best_epoch = 0;  // 1-based; 0 = never improved / no val set
  double best_val_loss = 0.0;
  size_t skipped = 0;     // degenerate or empty samples over the whole run
  size_t train_sentences = 0;
  size_t val_sentences = 0;
  std::string best_checkpoint;   // paths; empty when checkpoint_dir unset
  std::string final_checkpoint;
};

// Trains `encoder` in place against the oracle with the cosine objective.
// The corpus is shuffled once, the tail validation_fraction held out, and
// teacher vectors are computed once up front (the teacher is frozen).
// The oracle must cover every sentence; otherwise CoverageError names the
// misses. A non-finite loss raises NumericError immediately.
DistillResult distill(const std::vector<std::string>& corpus,
                      const TeacherOracle& oracle, StudentEncoder& encoder,
                      const Vocabulary& vocab, const DistillConfig& cfg,
                      const std::vector<std::string>* explicit_validation = nullptr);

// Mean cosine loss of the encoder against the oracle on held-out sentences.
double validate_distill(const StudentEncoder& encoder,
                        const TeacherOracle& oracle,
                        const std::vector<std::string>& held_out,
                        const Vocabulary& vocab);

// "epoch,train_loss,val_loss" rows; val column blank when no val set.
void write_loss_history(const std::string& path, const DistillResult& result);

}  // namespace sra
