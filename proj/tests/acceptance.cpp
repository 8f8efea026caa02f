// End-to-end acceptance gate. Each criterion prints one [PASS]/[FAIL] line;
// the process exits nonzero if any criterion fails. Runs standalone, no
// doctest, so ctest output stays a readable checklist.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sra/checkpoint.hpp"
#include "sra/distill.hpp"
#include "sra/error.hpp"
#include "sra/eval.hpp"
#include "sra/finetune.hpp"
#include "sra/teacher.hpp"
#include "fd_check.hpp"
#include "tmpdir.hpp"

using namespace sra;
using sra::test::check_gradients;
using sra::test::slurp;
using sra::test::TempDir;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw CheckFailure(msg);
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream ss;
  ss << std::setprecision(digits) << x;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Shared corpus/teacher fixture: a 100-token vocabulary (97 words plus the
// reserved sentinels) and a student sized for a desk-scale run.

std::vector<std::string> word_list() {
  std::vector<std::string> words;
  for (int i = 0; i < 97; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    words.emplace_back(buf);
  }
  return words;
}

std::vector<std::string> make_corpus(size_t n, uint64_t seed, size_t len_lo,
                                     size_t len_hi) {
  const auto words = word_list();
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t len = len_lo + rng.next_below(len_hi - len_lo + 1);
    std::string s;
    for (size_t t = 0; t < len; ++t) {
      if (t) s += " ";
      s += words[rng.next_below(words.size())];
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct Pipeline {
  TempDir scratch{"acceptance"};
  Vocabulary vocab;
  EncoderConfig enc_cfg;
  SyntheticTeacher teacher{707, 16};
  std::optional<DistillResult> distilled;
  std::optional<StudentEncoder> encoder;
  double distill_seconds = 0.0;

  Pipeline() {
    std::vector<std::string> tokens = {kPadToken, kUnkToken, kMaskToken};
    for (const auto& w : word_list()) tokens.push_back(w);
    vocab = Vocabulary::from_tokens(tokens);
    enc_cfg.vocab_size = vocab.size();
    enc_cfg.emb_dim = 16;
    enc_cfg.hidden_dim = 8;
    enc_cfg.teacher_dim = 16;
  }

  // The convergence run (criterion 3); its artifacts feed criteria 5 and 10.
  void ensure_distilled() {
    if (distilled) return;
    auto corpus = make_corpus(2000, 303, 4, 12);
    Rng rng(42);
    StudentEncoder enc = StudentEncoder::create(enc_cfg, rng);
    DistillConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 32;
    cfg.epochs = 50;
    cfg.seed = 42;
    cfg.validation_fraction = 0.02;
    cfg.checkpoint_dir = scratch.file("convergence");
    const double t0 = now_seconds();
    distilled = distill(corpus, teacher, enc, vocab, cfg);
    distill_seconds = now_seconds() - t0;
    encoder = std::move(enc);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

// ---------------------------------------------------------------------------
// Criterion bodies. Each returns an info string for the [PASS] line and
// throws CheckFailure with a reason otherwise.

// Central differences are only valid where the loss is differentiable, so
// heads whose ReLU pre-activations (or pair |a-b| creases) sit within a few
// steps of zero are redrawn from the next derived seed.
double relu_margin(const MlpHead& head, const Tensor& input) {
  double margin = std::numeric_limits<double>::infinity();
  Tensor x = input;
  for (size_t l = 0; l < head.config().hidden.size(); ++l) {
    const Tensor& w = head.weights[l];
    Tensor pre = Tensor::zeros({w.rows()});
    for (size_t r = 0; r < w.rows(); ++r) {
      double sum = head.biases[l].data[r];
      for (size_t c = 0; c < w.cols(); ++c) sum += w.at(r, c) * x.data[c];
      pre.data[r] = sum;
      margin = std::min(margin, std::fabs(sum));
    }
    for (auto& v : pre.data) v = std::max(0.0, v);
    x = std::move(pre);
  }
  return margin;
}

double kink_margin(const TaskModel& model, const std::vector<int32_t>& a,
                   const std::vector<int32_t>& b) {
  TaskTrace trace;
  model.forward(a, b, &trace);
  return relu_margin(model.head, trace.mlp.input);
}

TaskModel smooth_model(const StudentEncoder& enc, const TaskModelConfig& cfg,
                       uint64_t base_seed, const std::vector<int32_t>& a,
                       const std::vector<int32_t>& b) {
  double best = 0.0;
  for (uint64_t attempt = 0; attempt < 32; ++attempt) {
    Rng head_rng(base_seed + attempt);
    TaskModel model = TaskModel::create(enc, cfg, head_rng);
    const double margin = kink_margin(model, a, b);
    if (margin > 3.0 * sra::test::kFdStep) return model;
    best = std::max(best, margin);
  }
  throw CheckFailure("no kink-free head draw found (best margin " +
                     fmt(best) + ")");
}

// The |a-b| crease is fixed by the encoder alone, so the second sentence is
// rotated through the vocabulary until every coordinate gap exceeds what a
// single finite-difference probe can move it (sensitivities here are well
// under 1, so 3x the step is conservative).
std::vector<int32_t> crease_free_pair(const StudentEncoder& enc,
                                      const std::vector<int32_t>& a,
                                      std::vector<int32_t> b) {
  double best = 0.0;
  for (int attempt = 0; attempt < 16; ++attempt) {
    Tensor sa = enc.forward(a);
    Tensor sb = enc.forward(b);
    double margin = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < sa.data.size(); ++j) {
      margin = std::min(margin, std::fabs(sa.data[j] - sb.data[j]));
    }
    if (margin > 3.0 * sra::test::kFdStep) return b;
    best = std::max(best, margin);
    for (auto& id : b) id = 3 + (id - 3 + 1) % 6;
  }
  throw CheckFailure("no crease-free sentence pair found (best margin " +
                     fmt(best) + ")");
}

std::string check_gradient_suite() {
  const double t0 = now_seconds();
  double worst = 0.0;
  std::string worst_at;
  auto note = [&](const sra::test::FdResult& r, const char* what,
                  uint64_t seed) {
    if (r.max_rel > worst) {
      worst = r.max_rel;
      worst_at = std::string(what) + "/" + r.worst + " (seed " +
                 std::to_string(seed) + ")";
    }
  };

  for (uint64_t seed = 1; seed <= 5; ++seed) {
    EncoderConfig cfg;
    cfg.vocab_size = 9;
    cfg.emb_dim = 3;
    cfg.hidden_dim = 2;
    cfg.teacher_dim = 4;
    Rng rng(seed);
    StudentEncoder enc = StudentEncoder::create(cfg, rng);
    // Check at a generic point rather than the tiny init, where gradients
    // collapse toward zero and finite differences drown in rounding noise.
    for (auto ref : enc.params()) {
      *ref.tensor = uniform_init(rng, ref.tensor->shape, -0.6, 0.6);
    }
    const std::vector<int32_t> tokens = {3, 5, 4, 6};
    Tensor target = uniform_init(rng, {4}, -1.0, 1.0);

    // Distillation path: embedding, both LSTM directions, projection, and
    // the cosine loss.
    auto cosine_loss = [&] {
      return cosine_distill_loss(target, enc.forward(tokens));
    };
    EncoderTrace trace;
    Tensor s = enc.forward(tokens, &trace);
    StudentEncoder enc_grads = StudentEncoder::zeros(cfg);
    enc.backward(trace, cosine_distill_backward(target, s), enc_grads);
    note(check_gradients(cosine_loss, enc.params(), enc_grads.params()),
         "cosine", seed);

    // Classification path: shared-encoder pair features, the MLP head, and
    // the cross-entropy loss.
    TaskModelConfig task_cfg;
    task_cfg.task = TaskKind::kPair;
    task_cfg.num_classes = 3;
    task_cfg.head_hidden = {4};
    const std::vector<int32_t> tb = crease_free_pair(enc, tokens, {4, 3, 7});
    TaskModel model = smooth_model(enc, task_cfg, seed * 131, tokens, tb);
    auto ce_loss = [&] {
      return softmax_cross_entropy(model.forward(tokens, tb), 2);
    };
    TaskTrace tt;
    Tensor logits = model.forward(tokens, tb, &tt);
    TaskModel model_grads = TaskModel::zeros(cfg, task_cfg);
    model.backward(tt, softmax_cross_entropy_backward(logits, 2), model_grads);
    note(check_gradients(ce_loss, model.params(), model_grads.params()),
         "cross-entropy", seed);

    // Logit-matching path: the MSE loss through a single-sentence head.
    TaskModelConfig single_cfg;
    single_cfg.num_classes = 3;
    single_cfg.head_hidden = {4};
    TaskModel single = smooth_model(enc, single_cfg, seed * 257, tokens, {});
    Tensor teacher_logits = uniform_init(rng, {3}, -1.0, 1.0);
    auto mse_loss = [&] {
      return mse_logit_loss(single.forward(tokens, {}), teacher_logits);
    };
    TaskTrace st;
    Tensor slogits = single.forward(tokens, {}, &st);
    TaskModel single_grads = TaskModel::zeros(cfg, single_cfg);
    single.backward(st, mse_logit_backward(slogits, teacher_logits),
                    single_grads);
    note(check_gradients(mse_loss, single.params(), single_grads.params()),
         "mse", seed);
  }
  const double elapsed = now_seconds() - t0;
  require(worst <= 1e-4,
          "max relative error " + fmt(worst) + " at " + worst_at);
  require(elapsed < 60.0, "suite took " + fmt(elapsed) + "s");
  return "5 seeds, max rel err " + fmt(worst, 2) + ", " + fmt(elapsed, 2) +
         "s";
}

std::string check_loss_contract() {
  Rng rng(2026);
  Tensor t = uniform_init(rng, {16}, -1.0, 1.0);
  require(std::fabs(cosine_distill_loss(t, t)) <= 1e-12,
          "loss(T,T) = " + fmt(cosine_distill_loss(t, t)));
  require(std::fabs(cosine_distill_loss(t, scale(t, -1.0)) - 1.0) <= 1e-12,
          "loss(T,-T) != 1");

  for (int i = 0; i < 1000; ++i) {
    Tensor a = uniform_init(rng, {16}, -1.0, 1.0);
    Tensor b = uniform_init(rng, {16}, -1.0, 1.0);
    const double l = cosine_distill_loss(a, b);
    require(l >= 0.0 && l <= 1.0,
            "pair " + std::to_string(i) + " out of range: " + fmt(l));
  }

  for (double c : {0.1, 10.0}) {
    Tensor a = uniform_init(rng, {16}, -1.0, 1.0);
    Tensor b = uniform_init(rng, {16}, -1.0, 1.0);
    const double gap =
        std::fabs(cosine_distill_loss(a, scale(b, c)) -
                  cosine_distill_loss(a, b));
    require(gap <= 1e-12, "scale " + fmt(c) + " gap " + fmt(gap));
  }
  return "endpoints, 1000 pairs in [0,1], scale invariance at 1e-12";
}

std::string check_convergence() {
  Pipeline& p = pipeline();
  p.ensure_distilled();
  const DistillResult& res = *p.distilled;
  const double initial = res.train_loss.front();
  const double final_loss = res.train_loss.back();
  require(res.train_loss.size() == 50, "expected 50 epochs");
  require(final_loss <= 0.1 * initial,
          "train " + fmt(initial) + " -> " + fmt(final_loss) +
              " misses the 10x bar");
  require(res.val_loss.back() < res.initial_val_loss,
          "validation did not improve: " + fmt(res.initial_val_loss) +
              " -> " + fmt(res.val_loss.back()));
  require(p.distill_seconds < 300.0,
          "took " + fmt(p.distill_seconds) + "s");
  return "train " + fmt(initial, 3) + " -> " + fmt(final_loss, 3) + ", val " +
         fmt(res.initial_val_loss, 3) + " -> " + fmt(res.val_loss.back(), 3) +
         ", " + fmt(p.distill_seconds, 3) + "s";
}

std::string check_corpus_size_trend() {
  Pipeline& p = pipeline();
  auto corpus = make_corpus(4200, 404, 4, 12);

  DistillConfig dcfg;
  dcfg.lr = 1e-3;
  dcfg.batch_size = 32;
  dcfg.epochs = 5;
  dcfg.validation_fraction = 0.02;

  SweepTask downstream;
  for (int i = 0; i < 8; ++i) {
    LabeledExample ex;
    ex.text_a = "w0" + std::to_string(i) + " w1" + std::to_string(i);
    ex.label = i % 2;
    downstream.train.push_back(ex);
  }
  downstream.dev = downstream.train;
  downstream.task.head_hidden = {8};
  downstream.finetune.lr_grid = {1e-3};
  downstream.finetune.max_epochs = 1;
  downstream.finetune.patience = 1;
  downstream.finetune.batch_size = 8;

  auto rows = distill_size_sweep(corpus, {500, 1000, 2000, 4000}, p.teacher,
                                 p.vocab, p.enc_cfg, dcfg, downstream,
                                 {1, 2, 3});
  require(rows.size() == 4, "expected 4 rows");
  std::ostringstream seen;
  size_t inversions = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].val_loss.has_value(), "missing val loss");
    if (i) {
      seen << " -> ";
      if (*rows[i].val_loss > *rows[i - 1].val_loss) ++inversions;
    }
    seen << fmt(*rows[i].val_loss, 3);
  }
  require(inversions <= 1,
          std::to_string(inversions) + " inversions in " + seen.str());
  return "3-seed mean val loss " + seen.str() + " (" +
         std::to_string(inversions) + " inversion" +
         (inversions == 1 ? "" : "s") + ")";
}

// Downstream labels come from the sign of one teacher coordinate relative to
// its median, so the distilled encoder walks in already speaking the label's
// language while the random init has to learn it from 40 examples.
std::string check_distilled_init_advantage() {
  Pipeline& p = pipeline();
  p.ensure_distilled();

  auto sentences = make_corpus(300, 505, 4, 12);
  std::vector<double> coord;
  coord.reserve(sentences.size());
  for (const auto& s : sentences) coord.push_back(p.teacher.embed(s).data[0]);
  std::vector<double> sorted = coord;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted[sorted.size() / 2];

  SweepTask task;
  for (size_t i = 0; i < sentences.size(); ++i) {
    LabeledExample ex;
    ex.text_a = sentences[i];
    ex.label = coord[i] > median ? 1 : 0;
    (i < 200 ? task.train : task.dev).push_back(ex);
  }
  task.task.head_hidden = {16};
  task.finetune.lr_grid = {3e-3};
  task.finetune.max_epochs = 30;
  task.finetune.batch_size = 8;

  auto rows = data_fraction_sweep(task, p.vocab,
                                  p.distilled->final_checkpoint, p.enc_cfg,
                                  {0.2}, {"distilled", "random"},
                                  {1, 2, 3, 4, 5});
  double mean_distilled = 0.0, mean_random = 0.0;
  size_t n_distilled = 0, n_random = 0;
  for (const auto& row : rows) {
    if (row.epoch != task.finetune.max_epochs) continue;
    if (row.init == "distilled") {
      mean_distilled += row.dev_metric;
      ++n_distilled;
    } else {
      mean_random += row.dev_metric;
      ++n_random;
    }
  }
  require(n_distilled == 5 && n_random == 5, "wrong row counts");
  mean_distilled /= 5.0;
  mean_random /= 5.0;
  require(mean_distilled > mean_random,
          "distilled " + fmt(mean_distilled) + " vs random " +
              fmt(mean_random));
  return "20% fraction, 5-seed mean dev acc: distilled " +
         fmt(mean_distilled, 3) + " > random " + fmt(mean_random, 3);
}

std::string check_overfit_capacity() {
  Pipeline& p = pipeline();
  const auto words = word_list();
  std::vector<LabeledExample> train;
  for (int i = 0; i < 32; ++i) {
    LabeledExample ex;
    ex.text_a = words[3 * i] + " " + words[3 * i + 1] + " " + words[3 * i + 2];
    ex.label = i % 2;
    train.push_back(ex);
  }

  Rng enc_rng(606);
  Rng head_rng(607);
  TaskModelConfig task_cfg;
  task_cfg.head_hidden = {32};
  TaskModel init = TaskModel::create(StudentEncoder::create(p.enc_cfg, enc_rng),
                                     task_cfg, head_rng);
  FinetuneConfig cfg;
  cfg.lr_grid = {1e-2};
  cfg.max_epochs = 200;
  cfg.patience = 20;
  cfg.batch_size = 8;
  cfg.seed = 66;
  FinetuneResult res = finetune(init, train, train, p.vocab, cfg);
  require(res.best_metric == 1.0,
          "train accuracy peaked at " + fmt(res.best_metric));
  return "100% on 32 examples at epoch " +
         std::to_string(res.arms[res.best_arm].best_epoch);
}

std::string check_parameter_accounting() {
  auto closed_form = [](size_t E, size_t h, size_t d) {
    return 2 * 4 * (h * (E + h) + h) + d * 2 * h;
  };
  for (size_t E : {2, 4, 16}) {
    for (size_t h : {2, 8}) {
      for (size_t d : {2, 16}) {
        EncoderConfig cfg;
        cfg.vocab_size = 11;
        cfg.emb_dim = E;
        cfg.hidden_dim = h;
        cfg.teacher_dim = d;
        StudentEncoder enc = StudentEncoder::zeros(cfg);
        const size_t counted = count_parameters(enc.named_tensors(), true);
        require(counted == closed_form(E, h, d),
                "E=" + std::to_string(E) + " h=" + std::to_string(h) +
                    " d=" + std::to_string(d) + ": counted " +
                    std::to_string(counted) + ", closed form " +
                    std::to_string(closed_form(E, h, d)));
        require(count_parameters(enc.named_tensors(), false) ==
                    counted + 11 * E,
                "embedding exclusion is off");
      }
    }
  }

  EncoderConfig full;
  full.vocab_size = 4;
  full.emb_dim = 300;
  full.hidden_dim = 512;
  full.teacher_dim = 768;
  TaskModelConfig head_cfg;
  head_cfg.task = TaskKind::kPair;
  head_cfg.num_classes = 2;
  head_cfg.head_hidden = {256};
  TaskModel model = TaskModel::zeros(full, head_cfg);
  const size_t total = count_parameters(model.named_tensors(), true);
  require(total >= 4100000 && total <= 5000000,
          "full config totals " + std::to_string(total));
  return "closed form exact on 12 shapes; full config " +
         std::to_string(total) + " non-embedding parameters";
}

std::string check_range_diagnostic() {
  Pipeline& p = pipeline();
  auto corpus = make_corpus(50, 808, 3, 9);

  std::vector<Tensor> direct;
  for (const auto& s : corpus) direct.push_back(p.teacher.embed(s));
  require(range_statistic(direct) == 1.0, "synthetic vectors strayed");

  const std::string path = p.scratch.file("range.jsonl");
  export_teacher_file(p.teacher, corpus, path);
  FileTeacher file = FileTeacher::load(path);
  std::vector<Tensor> loaded;
  for (const auto& s : corpus) loaded.push_back(file.embed(s));
  require(range_statistic(loaded) == 1.0, "file round trip strayed");
  return "statistic exactly 1.0 in memory and through a file";
}

std::string check_determinism() {
  Pipeline& p = pipeline();
  auto corpus = make_corpus(200, 909, 4, 10);

  auto run_distill = [&](const std::string& dir) {
    Rng rng(7);
    StudentEncoder enc = StudentEncoder::create(p.enc_cfg, rng);
    DistillConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 3;
    cfg.seed = 99;
    cfg.checkpoint_dir = dir;
    return distill(corpus, p.teacher, enc, p.vocab, cfg);
  };
  DistillResult d1 = run_distill(p.scratch.file("det_a"));
  DistillResult d2 = run_distill(p.scratch.file("det_b"));
  require(d1.train_loss == d2.train_loss && d1.val_loss == d2.val_loss,
          "distill histories diverged");

  std::vector<LabeledExample> train;
  for (int i = 0; i < 16; ++i) {
    LabeledExample ex;
    ex.text_a = "w" + std::string(i < 10 ? "0" : "") + std::to_string(i) +
                " w" + std::to_string(20 + i);
    ex.label = i % 2;
    train.push_back(ex);
  }
  auto run_finetune = [&] {
    Rng enc_rng(4);
    Rng head_rng(5);
    TaskModelConfig task_cfg;
    task_cfg.head_hidden = {8};
    TaskModel init = TaskModel::create(
        StudentEncoder::create(p.enc_cfg, enc_rng), task_cfg, head_rng);
    FinetuneConfig cfg;
    cfg.lr_grid = {1e-3, 2e-3};
    cfg.max_epochs = 3;
    cfg.patience = 3;
    cfg.batch_size = 8;
    cfg.seed = 12;
    return finetune(init, train, train, p.vocab, cfg);
  };
  FinetuneResult f1 = run_finetune();
  FinetuneResult f2 = run_finetune();
  for (size_t a = 0; a < f1.arms.size(); ++a) {
    require(f1.arms[a].history.size() == f2.arms[a].history.size(),
            "finetune arm lengths diverged");
    for (size_t e = 0; e < f1.arms[a].history.size(); ++e) {
      require(f1.arms[a].history[e].train_loss ==
                      f2.arms[a].history[e].train_loss &&
                  f1.arms[a].history[e].dev_metric ==
                      f2.arms[a].history[e].dev_metric,
              "finetune histories diverged");
    }
  }

  require(slurp(d1.final_checkpoint) == slurp(d2.final_checkpoint),
          "checkpoint files diverged");
  LoadedCheckpoint loaded = load_checkpoint(d1.final_checkpoint);
  NamedTensorViews views;
  for (const auto& [name, tensor] : loaded.tensors) {
    views.push_back({name, &tensor});
  }
  const std::string resaved = p.scratch.file("resaved.ckpt");
  save_checkpoint(resaved, loaded.meta, views);
  require(slurp(resaved) == slurp(d1.final_checkpoint),
          "save/load/save is not byte-stable");
  return "bit-identical histories; checkpoint round trip byte-exact";
}

std::string check_untuned_similarity() {
  Pipeline& p = pipeline();
  p.ensure_distilled();

  auto bases = make_corpus(80, 1010, 8, 14);
  Rng rng(1111);
  std::vector<LabeledExample> pairs;
  for (size_t i = 0; i < bases.size(); ++i) {
    LabeledExample ex;
    ex.text_a = bases[i];
    if (i % 2 == 0) {
      auto tokens = tokenize(bases[i]);
      auto span = augment_ngram(tokens, rng, 6, 12);
      std::string joined;
      for (size_t t = 0; t < span.size(); ++t) {
        if (t) joined += " ";
        joined += span[t];
      }
      ex.text_b = joined;
      ex.label = 1;
    } else {
      ex.text_b = bases[(i + 7) % bases.size()];
      ex.label = 0;
    }
    pairs.push_back(std::move(ex));
  }
  rng.shuffle(pairs);
  std::vector<LabeledExample> dev(pairs.begin(), pairs.begin() + 40);
  std::vector<LabeledExample> test(pairs.begin() + 40, pairs.end());

  SimilarityResult res = untuned_similarity_eval(test, *p.encoder, p.vocab,
                                                 std::nullopt, &dev);
  size_t positives = 0;
  for (const auto& ex : test) positives += ex.label == 1;
  const double majority =
      std::max(positives, test.size() - positives) /
      static_cast<double>(test.size());
  require(res.accuracy > 0.8, "accuracy " + fmt(res.accuracy));
  require(res.accuracy > majority,
          "accuracy " + fmt(res.accuracy) + " vs majority " + fmt(majority));
  return "accuracy " + fmt(res.accuracy, 3) + " at threshold " +
         fmt(res.threshold, 3) + " (majority " + fmt(majority, 3) + ")";
}

std::string check_throughput() {
  Pipeline& p = pipeline();
  Rng rng(1212);
  StudentEncoder enc = StudentEncoder::create(p.enc_cfg, rng);

  auto make_rows = [&](size_t n) {
    std::vector<std::vector<int32_t>> rows;
    rows.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      std::vector<int32_t> row(8);
      for (auto& id : row) {
        id = static_cast<int32_t>(3 + rng.next_below(p.enc_cfg.vocab_size - 3));
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto half = make_rows(4096);
  auto full = make_rows(8192);

  // Scheduler stalls only ever add time, so the minimum over raw passes is
  // the cleanest estimate of the true cost. A spike-ridden round can still
  // come out skewed; re-measuring up to three times keeps load noise from
  // failing the check while a genuinely nonlinear scan would fail every
  // round.
  time_inference(enc, full, 32, 2);
  auto min_pass = [&](const std::vector<std::vector<int32_t>>& rows) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 7; ++k) {
      best = std::min(best, time_inference(enc, rows, 32, 1).seconds);
    }
    return best;
  };
  double ratio = 0.0;
  for (int round = 0; round < 3; ++round) {
    const double t_half = min_pass(half);
    const double t_full = min_pass(full);
    require(t_half > 0.0 && t_full > 0.0, "zero elapsed time");
    ratio = t_full / t_half;
    if (ratio >= 1.7 && ratio <= 2.3) break;
  }
  require(ratio >= 1.7 && ratio <= 2.3, "doubling ratio " + fmt(ratio));

  TimingReport batch1 = time_inference(enc, full, 1, 3);
  TimingReport batch1024 = time_inference(enc, full, 1024, 3);
  require(batch1024.sentences_per_sec >= batch1.sentences_per_sec,
          "batch 1024 at " + fmt(batch1024.sentences_per_sec) +
              " sent/s vs batch 1 at " + fmt(batch1.sentences_per_sec));
  return "doubling ratio " + fmt(ratio, 3) + "; batch 1024 " +
         fmt(batch1024.sentences_per_sec / 1000.0, 3) + "k sent/s >= batch 1 " +
         fmt(batch1.sentences_per_sec / 1000.0, 3) + "k";
}

struct Criterion {
  int id;
  const char* name;
  std::function<std::string()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gradient checks", check_gradient_suite},
      {2, "cosine loss contract", check_loss_contract},
      {3, "distillation convergence", check_convergence},
      {4, "corpus size trend", check_corpus_size_trend},
      {5, "distilled-init advantage", check_distilled_init_advantage},
      {6, "overfit capacity", check_overfit_capacity},
      {7, "parameter accounting", check_parameter_accounting},
      {8, "range diagnostic", check_range_diagnostic},
      {9, "determinism", check_determinism},
      {10, "untuned paraphrase similarity", check_untuned_similarity},
      {11, "throughput scaling", check_throughput},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    try {
      const std::string info = c.run();
      std::printf("[PASS] %2d %s: %s\n", c.id, c.name, info.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %2d %s: %s\n", c.id, c.name, e.what());
    }
    std::fflush(stdout);
  }
  if (failures) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  } else {
    std::printf("all %zu criteria passed\n", criteria.size());
  }
  return failures == 0 ? 0 : 1;
}
