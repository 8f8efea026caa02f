#include "sra/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sra/error.hpp"
#include "sra/eval.hpp"
#include "sra/teacher.hpp"

namespace sra {

size_t feature_dim(const EncoderConfig& enc, const TaskModelConfig& cfg) {
  return cfg.features == FeatureSource::kProjected ? enc.teacher_dim
                                                   : 2 * enc.hidden_dim;
}

size_t head_input_dim(const EncoderConfig& enc, const TaskModelConfig& cfg) {
  size_t base = feature_dim(enc, cfg);
  return cfg.task == TaskKind::kPair ? 4 * base : base;
}

Tensor pair_features(const Tensor& a, const Tensor& b) {
  if (a.shape.size() != 1 || !a.same_shape(b)) {
    throw DimensionError("pair_features expects two equal-length vectors");
  }
  const size_t d = a.data.size();
  Tensor out = Tensor::zeros({4 * d});
  for (size_t j = 0; j < d; ++j) {
    out.data[j] = a.data[j];
    out.data[d + j] = b.data[j];
    out.data[2 * d + j] = std::fabs(a.data[j] - b.data[j]);
    out.data[3 * d + j] = a.data[j] * b.data[j];
  }
  return out;
}

void pair_features_backward(const Tensor& a, const Tensor& b,
                            const Tensor& d_feat, Tensor& d_a, Tensor& d_b) {
  const size_t d = a.data.size();
  if (d_feat.data.size() != 4 * d) {
    throw DimensionError("pair_features_backward: gradient length mismatch");
  }
  d_a = Tensor::zeros({d});
  d_b = Tensor::zeros({d});
  for (size_t j = 0; j < d; ++j) {
    double diff = a.data[j] - b.data[j];
    double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    d_a.data[j] = d_feat.data[j] + sgn * d_feat.data[2 * d + j] +
                  b.data[j] * d_feat.data[3 * d + j];
    d_b.data[j] = d_feat.data[d + j] - sgn * d_feat.data[2 * d + j] +
                  a.data[j] * d_feat.data[3 * d + j];
  }
}

TaskModel TaskModel::create(StudentEncoder encoder, const TaskModelConfig& cfg,
                            Rng& head_rng) {
  if (cfg.num_classes < 2) throw ParameterError("need at least two classes");
  TaskModel model;
  model.cfg_ = cfg;
  MlpConfig mlp_cfg;
  mlp_cfg.input_dim = head_input_dim(encoder.config(), cfg);
  mlp_cfg.hidden = cfg.head_hidden;
  mlp_cfg.num_classes = cfg.num_classes;
  model.encoder = std::move(encoder);
  model.head = MlpHead::create(mlp_cfg, head_rng);
  return model;
}

TaskModel TaskModel::zeros(const EncoderConfig& enc_cfg,
                           const TaskModelConfig& cfg) {
  TaskModel model;
  model.cfg_ = cfg;
  model.encoder = StudentEncoder::zeros(enc_cfg);
  MlpConfig mlp_cfg;
  mlp_cfg.input_dim = head_input_dim(enc_cfg, cfg);
  mlp_cfg.hidden = cfg.head_hidden;
  mlp_cfg.num_classes = cfg.num_classes;
  model.head = MlpHead::zeros(mlp_cfg);
  return model;
}

Tensor TaskModel::forward(const std::vector<int32_t>& tokens_a,
                          const std::vector<int32_t>& tokens_b,
                          TaskTrace* trace) const {
  const bool hidden = cfg_.features == FeatureSource::kHidden;
  auto encode = [&](const std::vector<int32_t>& tokens, EncoderTrace* et) {
    return hidden ? encoder.encode_hidden(tokens, et)
                  : encoder.forward(tokens, et);
  };
  Tensor feat;
  if (cfg_.task == TaskKind::kPair) {
    if (tokens_b.empty()) {
      throw EmptyInputError("pair task needs a non-empty second sentence");
    }
    Tensor fa = encode(tokens_a, trace ? &trace->enc_a : nullptr);
    Tensor fb = encode(tokens_b, trace ? &trace->enc_b : nullptr);
    feat = pair_features(fa, fb);
    if (trace) {
      trace->feat_a = std::move(fa);
      trace->feat_b = std::move(fb);
    }
  } else {
    feat = encode(tokens_a, trace ? &trace->enc_a : nullptr);
    if (trace) trace->feat_a = feat;
  }
  return head.forward(feat, trace ? &trace->mlp : nullptr);
}

void TaskModel::backward(const TaskTrace& trace, const Tensor& d_logits,
                         TaskModel& grads) const {
  Tensor d_feat;
  head.backward(trace.mlp, d_logits, grads.head, &d_feat);
  const bool hidden = cfg_.features == FeatureSource::kHidden;
  auto back = [&](const EncoderTrace& et, const Tensor& d) {
    if (hidden) {
      encoder.backward_from_hidden(et, d, grads.encoder);
    } else {
      encoder.backward(et, d, grads.encoder);
    }
  };
  if (cfg_.task == TaskKind::kPair) {
    Tensor d_a, d_b;
    pair_features_backward(trace.feat_a, trace.feat_b, d_feat, d_a, d_b);
    back(trace.enc_a, d_a);
    back(trace.enc_b, d_b);
  } else {
    back(trace.enc_a, d_feat);
  }
}

ParamRefs TaskModel::params() {
  ParamRefs refs = encoder.params();
  for (auto& r : head.params()) refs.push_back(r);
  return refs;
}

NamedTensorViews TaskModel::named_tensors() const {
  NamedTensorViews views = encoder.named_tensors();
  for (auto& v : head.named_tensors()) views.push_back(v);
  return views;
}

InheritedModel task_model_from_checkpoint(const std::string& path,
                                          const TaskModelConfig& cfg,
                                          uint64_t seed) {
  EncoderCheckpoint ckpt = load_encoder_checkpoint(path);
  std::string digest = sha256_file(path);
  Rng head_rng(mix_seed(seed, kHeadInitStream));
  return InheritedModel{
      TaskModel::create(std::move(ckpt.encoder), cfg, head_rng),
      std::move(ckpt.vocab), std::move(digest)};
}

namespace {

std::string joined_sizes(const std::vector<size_t>& sizes) {
  std::string out;
  for (size_t i = 0; i < sizes.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(sizes[i]);
  }
  return out;
}

std::vector<size_t> parse_sizes(const std::string& s) {
  std::vector<size_t> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

}  // namespace

void save_task_checkpoint(const std::string& path, const TaskModel& model,
                          const Vocabulary& vocab,
                          const std::vector<std::string>& label_dict,
                          const std::string& parent_digest) {
  const EncoderConfig& enc = model.encoder.config();
  const TaskModelConfig& cfg = model.task_config();
  if (label_dict.size() != cfg.num_classes) {
    throw LabelError("label dictionary size does not match class count");
  }
  CheckpointMeta meta;
  meta.emb_dim = enc.emb_dim;
  meta.hidden_dim = enc.hidden_dim;
  meta.teacher_dim = enc.teacher_dim;
  meta.vocab_size = enc.vocab_size;
  meta.rng_algorithm = kRngAlgorithm;
  meta.stage = "finetuned";
  meta.parent_digest = parent_digest;
  meta.vocab = vocab.tokens();
  meta.label_dict = label_dict;
  meta.extra = {
      {"task", cfg.task == TaskKind::kPair ? "pair" : "single"},
      {"features",
       cfg.features == FeatureSource::kHidden ? "hidden" : "projected"},
      {"num_classes", std::to_string(cfg.num_classes)},
      {"head_hidden", joined_sizes(cfg.head_hidden)},
  };
  save_checkpoint(path, meta, model.named_tensors());
}

LoadedTaskModel load_task_checkpoint(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.stage != "finetuned") {
    throw FormatError(path + ": expected a finetuned checkpoint, found stage '" +
                      ckpt.meta.stage + "'");
  }
  auto extra = [&](const std::string& key) -> std::string {
    for (const auto& [k, v] : ckpt.meta.extra) {
      if (k == key) return v;
    }
    throw FormatError(path + ": checkpoint lacks metadata key '" + key + "'");
  };
  TaskModelConfig cfg;
  cfg.task = extra("task") == "pair" ? TaskKind::kPair : TaskKind::kSingle;
  cfg.features = extra("features") == "hidden" ? FeatureSource::kHidden
                                               : FeatureSource::kProjected;
  cfg.num_classes = std::stoull(extra("num_classes"));
  cfg.head_hidden = parse_sizes(extra("head_hidden"));

  StudentEncoder encoder = encoder_from_checkpoint(ckpt);
  LoadedTaskModel out{TaskModel::zeros(encoder.config(), cfg),
                      Vocabulary::from_tokens(ckpt.meta.vocab),
                      ckpt.meta.label_dict, {}};
  out.model.encoder = std::move(encoder);
  for (auto ref : out.model.head.params()) {
    const Tensor& stored = ckpt.require(ref.name);
    if (!stored.same_shape(*ref.tensor)) {
      throw FormatError(path + ": tensor '" + ref.name + "' has shape " +
                        stored.shape_str() + ", expected " +
                        ref.tensor->shape_str());
    }
    ref.tensor->data = stored.data;
  }
  out.model.set_task_config(cfg);
  out.meta = std::move(ckpt.meta);
  return out;
}

TeacherLogits load_teacher_logits(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  TeacherLogits out;
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
      if (!j.is_object() || j.value("format", "") != "sra-logits") {
        throw fail("missing sra-logits header");
      }
      if (j.value("version", 0) != 1) throw fail("unsupported version");
      if (!j.contains("classes") || !j["classes"].is_number_unsigned() ||
          j["classes"].get<uint64_t>() < 2) {
        throw fail("header needs classes >= 2");
      }
      out.num_classes = j["classes"].get<size_t>();
      continue;
    }
    if (out.num_classes == 0) throw fail("records before header");
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("logits") || !j["logits"].is_array()) {
      throw fail("record needs id and logits fields");
    }
    if (j["logits"].size() != out.num_classes) {
      throw fail("logits length does not match header class count");
    }
    Tensor logits = Tensor::zeros({out.num_classes});
    for (size_t k = 0; k < out.num_classes; ++k) {
      if (!j["logits"][k].is_number()) throw fail("logits hold a non-number");
      logits.data[k] = j["logits"][k].get<double>();
    }
    out.by_id.emplace(j["id"].get<std::string>(), std::move(logits));
  }
  if (out.num_classes == 0) throw FormatError(path + ": empty logits file");
  return out;
}

std::string example_kd_id(const LabeledExample& ex) {
  if (ex.is_pair()) {
    return sha256_hex(normalize_for_id(ex.text_a) + "\n" +
                      normalize_for_id(*ex.text_b));
  }
  return sentence_id(ex.text_a);
}

namespace {

struct TokRow {
  std::vector<int32_t> a, b;
  int label = kNoLabel;
  const Tensor* kd = nullptr;
};

std::vector<TokRow> tokenize_split(const std::vector<LabeledExample>& examples,
                                   const Vocabulary& vocab, TaskKind task,
                                   size_t num_classes, const char* split,
                                   size_t* skipped) {
  std::vector<TokRow> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) {
    if ((task == TaskKind::kPair) != ex.is_pair()) {
      throw FormatError(std::string(split) +
                        " example arity does not match the task kind");
    }
    if (ex.label < 0 || static_cast<size_t>(ex.label) >= num_classes) {
      throw LabelError(std::string(split) + " label " +
                       std::to_string(ex.label) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
    TokRow row;
    row.a = vocab.encode(tokenize(ex.text_a));
    if (ex.is_pair()) row.b = vocab.encode(tokenize(*ex.text_b));
    row.label = ex.label;
    if (row.a.empty() || (ex.is_pair() && row.b.empty())) {
      ++*skipped;
      continue;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw EmptyInputError(std::string(split) +
                          " set is empty after tokenization");
  }
  return rows;
}

struct DevScore {
  double primary = 0.0;
  double secondary = 0.0;
};

bool better(const DevScore& a, const DevScore& b) {
  if (a.primary != b.primary) return a.primary > b.primary;
  return a.secondary > b.secondary;
}

DevScore eval_dev(const TaskModel& model, const std::vector<TokRow>& dev) {
  std::vector<int> preds, golds;
  preds.reserve(dev.size());
  golds.reserve(dev.size());
  for (const auto& row : dev) {
    Tensor logits = model.forward(row.a, row.b);
    preds.push_back(argmax(logits));
    golds.push_back(row.label);
  }
  DevScore score;
  const bool pair_f1 = model.task_config().task == TaskKind::kPair &&
                       model.task_config().num_classes == 2;
  if (pair_f1) {
    score.primary = f1_binary(preds, golds, 1);
    score.secondary = accuracy(preds, golds);
  } else {
    score.primary = accuracy(preds, golds);
    score.secondary = score.primary;
  }
  return score;
}

}  // namespace

FinetuneResult finetune(const TaskModel& init,
                        const std::vector<LabeledExample>& train,
                        const std::vector<LabeledExample>& dev,
                        const Vocabulary& vocab, const FinetuneConfig& cfg,
                        const TeacherLogits* teacher) {
  if (cfg.lr_grid.empty()) throw ParameterError("lr grid is empty");
  for (double lr : cfg.lr_grid) {
    if (!(lr > 0.0)) throw ParameterError("learning rates must be positive");
  }
  if (cfg.max_epochs == 0) throw ParameterError("max_epochs must be positive");
  if (cfg.patience == 0) throw ParameterError("patience must be positive");
  if (cfg.batch_size == 0) throw ParameterError("batch_size must be positive");
  if (cfg.workers == 0) throw ParameterError("workers must be positive");
  if (train.empty()) throw EmptyInputError("finetune: no training examples");
  if (dev.empty()) throw EmptyInputError("finetune: no dev examples");

  const TaskModelConfig& task_cfg = init.task_config();
  FinetuneResult result;
  result.best_model = init;

  std::vector<TokRow> train_rows =
      tokenize_split(train, vocab, task_cfg.task, task_cfg.num_classes,
                     "train", &result.skipped);
  std::vector<TokRow> dev_rows =
      tokenize_split(dev, vocab, task_cfg.task, task_cfg.num_classes, "dev",
                     &result.skipped);

  const bool kd = teacher != nullptr && cfg.kd_alpha > 0.0;
  std::vector<Tensor> kd_logits;
  if (kd) {
    if (teacher->num_classes != task_cfg.num_classes) {
      throw DimensionError("teacher logits have " +
                           std::to_string(teacher->num_classes) +
                           " classes, task has " +
                           std::to_string(task_cfg.num_classes));
    }
    // Rebuild ids over the same surviving rows as tokenize_split kept.
    size_t missing = 0, row_idx = 0;
    kd_logits.reserve(train_rows.size());
    for (const auto& ex : train) {
      auto a = vocab.encode(tokenize(ex.text_a));
      bool kept = !a.empty() && (!ex.is_pair() ||
                                 !vocab.encode(tokenize(*ex.text_b)).empty());
      if (!kept) continue;
      auto it = teacher->by_id.find(example_kd_id(ex));
      if (it == teacher->by_id.end()) {
        ++missing;
      } else {
        kd_logits.push_back(it->second);
        train_rows[row_idx].kd = &kd_logits.back();
      }
      ++row_idx;
    }
    if (missing > 0) {
      throw CoverageError("teacher logits missing for " +
                          std::to_string(missing) + " training example(s)");
    }
    // kd_logits reallocation would invalidate the pointers; repair them.
    size_t k = 0;
    for (auto& row : train_rows) row.kd = &kd_logits[k++];
  }

  for (size_t arm_idx = 0; arm_idx < cfg.lr_grid.size(); ++arm_idx) {
    const double lr = cfg.lr_grid[arm_idx];
    ArmResult arm;
    arm.lr = lr;

    TaskModel model = init;
    TaskModel grads = TaskModel::zeros(model.encoder.config(), task_cfg);
    std::vector<TaskModel> worker_grads;
    for (size_t w = 0; w + 1 < cfg.workers; ++w) {
      worker_grads.push_back(TaskModel::zeros(model.encoder.config(), task_cfg));
    }
    AdamConfig adam_cfg;
    adam_cfg.lr = lr;
    Adam adam(adam_cfg, model.params());

    Rng order_rng(mix_seed(cfg.seed, 0x0BDE8));
    std::vector<size_t> order(train_rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TaskModel arm_best = model;
    DevScore arm_best_score{-1.0, -1.0};
    size_t since_improved = 0;

    for (size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      order_rng.shuffle(order);
      double loss_sum = 0.0;
      size_t loss_count = 0;

      for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
        const size_t end = std::min(begin + cfg.batch_size, order.size());
        const size_t span = end - begin;
        zero_params(grads.params());
        for (auto& wg : worker_grads) zero_params(wg.params());

        struct Shard {
          double loss_sum = 0.0;
          std::optional<std::string> numeric_error;
        };
        const size_t n_workers = std::min(cfg.workers, span);
        std::vector<Shard> shards(n_workers);

        auto run_shard = [&](size_t w, TaskModel& g) {
          Shard& shard = shards[w];
          const size_t lo = begin + (span * w) / n_workers;
          const size_t hi = begin + (span * (w + 1)) / n_workers;
          for (size_t k = lo; k < hi; ++k) {
            const TokRow& row = train_rows[order[k]];
            TaskTrace trace;
            Tensor logits = model.forward(row.a, row.b, &trace);
            double loss = softmax_cross_entropy(logits, row.label);
            Tensor d_logits = softmax_cross_entropy_backward(logits, row.label);
            if (row.kd) {
              loss += cfg.kd_alpha * mse_logit_loss(logits, *row.kd);
              Tensor d_kd = mse_logit_backward(logits, *row.kd);
              for (size_t j = 0; j < d_logits.data.size(); ++j) {
                d_logits.data[j] += cfg.kd_alpha * d_kd.data[j];
              }
            }
            if (!std::isfinite(loss)) {
              shard.numeric_error =
                  "epoch " + std::to_string(epoch) + ": non-finite loss";
              return;
            }
            model.backward(trace, d_logits, g);
            shard.loss_sum += loss;
          }
        };

        if (n_workers == 1) {
          run_shard(0, grads);
        } else {
          std::vector<std::thread> threads;
          for (size_t w = 1; w < n_workers; ++w) {
            threads.emplace_back(run_shard, w, std::ref(worker_grads[w - 1]));
          }
          run_shard(0, grads);
          for (auto& t : threads) t.join();
          for (size_t w = 1; w < n_workers; ++w) {
            ParamRefs dst = grads.params();
            ParamRefs src = worker_grads[w - 1].params();
            for (size_t p = 0; p < dst.size(); ++p) {
              add_inplace(*dst[p].tensor, *src[p].tensor);
            }
          }
        }
        for (const auto& shard : shards) {
          if (shard.numeric_error) throw NumericError(*shard.numeric_error);
          loss_sum += shard.loss_sum;
        }
        loss_count += span;

        const double inv = 1.0 / static_cast<double>(span);
        for (auto ref : grads.params()) scale_inplace(*ref.tensor, inv);
        ParamRefs model_params = model.params();
        ParamRefs grad_params = grads.params();
        adam.step(model_params, grad_params);
      }

      DevScore score = eval_dev(model, dev_rows);
      EpochStats stats;
      stats.epoch = epoch;
      stats.train_loss = loss_sum / static_cast<double>(loss_count);
      stats.dev_metric = score.primary;
      stats.dev_secondary = score.secondary;
      arm.history.push_back(stats);

      if (better(score, arm_best_score)) {
        arm_best_score = score;
        arm_best = model;
        arm.best_epoch = epoch;
        since_improved = 0;
      } else if (++since_improved >= cfg.patience) {
        break;
      }
    }

    arm.best_metric = arm_best_score.primary;
    arm.best_secondary = arm_best_score.secondary;

    const bool take =
        arm_idx == 0 ||
        better(DevScore{arm.best_metric, arm.best_secondary},
               DevScore{result.best_metric, result.best_secondary}) ||
        (arm.best_metric == result.best_metric &&
         arm.best_secondary == result.best_secondary && lr < result.best_lr);
    if (take) {
      result.best_model = std::move(arm_best);
      result.best_lr = lr;
      result.best_arm = arm_idx;
      result.best_metric = arm.best_metric;
      result.best_secondary = arm.best_secondary;
    }
    result.arms.push_back(std::move(arm));
  }
  return result;
}

void write_finetune_report(const std::string& path,
                           const FinetuneResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "lr,epoch,train_loss,dev_metric\n";
  out.precision(17);
  for (const auto& arm : result.arms) {
    for (const auto& row : arm.history) {
      out << arm.lr << "," << row.epoch << "," << row.train_loss << ","
          << row.dev_metric << "\n";
    }
  }
  if (!out) throw IoError("failed while writing " + path);
}

SimilarityResult untuned_similarity_eval(
    const std::vector<LabeledExample>& pairs, const StudentEncoder& encoder,
    const Vocabulary& vocab, std::optional<double> threshold,
    const std::vector<LabeledExample>* dev) {
  if (pairs.empty()) throw EmptyInputError("similarity eval: no pairs");

  auto score_pairs = [&](const std::vector<LabeledExample>& examples,
                         std::vector<double>& cosines, std::vector<int>& golds,
                         size_t& skipped) {
    for (const auto& ex : examples) {
      if (!ex.is_pair()) {
        throw FormatError("similarity eval needs sentence pairs");
      }
      if (ex.label != 0 && ex.label != 1) {
        throw LabelError("similarity eval needs binary {0,1} labels, got " +
                         std::to_string(ex.label));
      }
      auto a = vocab.encode(tokenize(ex.text_a));
      auto b = vocab.encode(tokenize(*ex.text_b));
      if (a.empty() || b.empty()) {
        ++skipped;
        continue;
      }
      Tensor ea = encoder.forward(a);
      Tensor eb = encoder.forward(b);
      double na = l2_norm(ea), nb = l2_norm(eb);
      if (na < kNormEpsilon || nb < kNormEpsilon) {
        ++skipped;
        continue;
      }
      cosines.push_back(dot(ea, eb) / (na * nb));
      golds.push_back(ex.label);
    }
  };

  SimilarityResult result;
  std::vector<double> cosines;
  std::vector<int> golds;
  score_pairs(pairs, cosines, golds, result.skipped);
  if (cosines.empty()) {
    throw EmptyInputError("similarity eval: every pair was skipped");
  }
  result.evaluated = cosines.size();

  double chosen;
  if (threshold) {
    chosen = *threshold;
  } else {
    std::vector<double> tune_cos;
    std::vector<int> tune_gold;
    if (dev) {
      size_t dev_skipped = 0;
      score_pairs(*dev, tune_cos, tune_gold, dev_skipped);
      if (tune_cos.empty()) {
        throw EmptyInputError("similarity eval: empty dev set");
      }
    } else {
      tune_cos = cosines;
      tune_gold = golds;
    }
    double best_acc = -1.0;
    chosen = -1.0;
    for (int k = 0; k <= 100; ++k) {
      double t = -1.0 + 0.02 * k;
      size_t hits = 0;
      for (size_t i = 0; i < tune_cos.size(); ++i) {
        int pred = tune_cos[i] >= t ? 1 : 0;
        if (pred == tune_gold[i]) ++hits;
      }
      double acc = static_cast<double>(hits) /
                   static_cast<double>(tune_cos.size());
      if (acc > best_acc) {
        best_acc = acc;
        chosen = t;
      }
    }
  }
  result.threshold = chosen;

  std::vector<int> preds;
  preds.reserve(cosines.size());
  for (double c : cosines) preds.push_back(c >= chosen ? 1 : 0);
  result.accuracy = accuracy(preds, golds);
  result.f1 = f1_binary(preds, golds, 1);
  return result;
}

}  // namespace sra
