// Command-line front end: one executable, one subcommand per pipeline stage.
// Every run resolves its configuration as defaults < --paper-defaults <
// --config file < explicit flags, prints the merged result, and writes a
// run manifest (config, input digests, seed, timings) next to its outputs so
// any artifact can be reproduced from the manifest alone.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sra/checkpoint.hpp"
#include "sra/data.hpp"
#include "sra/distill.hpp"
#include "sra/error.hpp"
#include "sra/eval.hpp"
#include "sra/finetune.hpp"
#include "sra/gradcheck.hpp"
#include "sra/teacher.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sra;

constexpr const char* kArtifactVersion = "1.0.0";

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

std::string sci3(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

std::string millions(size_t n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1fM", static_cast<double>(n) / 1e6);
  return buf;
}

std::string fixed1(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", x);
  return buf;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

void need(bool cond, const std::string& msg) {
  if (!cond) throw ParameterError(msg);
}

// ---------------------------------------------------------------------------
// Config file + precedence plumbing

struct Ctx {
  json cfg = json::object();     // values from --config, if any
  std::string manifest_command;  // set when --config pointed at a manifest
  bool paper = false;            // --paper-defaults seen anywhere in argv
  uint64_t seed_default = 42;    // 42, or SRA_SEED when set
};

// Accepts either a bare JSON object of flag values or a previous run
// manifest (whose "config" member holds exactly that object).
void load_file_config(const std::string& path, Ctx& ctx) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError("config: top level must be an object");
  if (j.contains("artifact_version") && j.contains("config") &&
      j["config"].is_object()) {
    ctx.cfg = j["config"];
    ctx.manifest_command = j.value("command", "");
  } else {
    ctx.cfg = j;
  }
}

// Binds config-file values onto an option struct before CLI11 parses the
// command line, so explicit flags still win. Records every key the
// subcommand understands for the unknown-key check.
class Binder {
 public:
  Binder(const Ctx& ctx, std::vector<std::string>& known)
      : ctx_(ctx), known_(known) {}

  template <typename T>
  void operator()(const char* key, T& field) const {
    known_.push_back(key);
    auto it = ctx_.cfg.find(key);
    if (it == ctx_.cfg.end() || it->is_null()) return;
    try {
      field = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError(std::string("config: bad value for '") + key + "'");
    }
  }

 private:
  const Ctx& ctx_;
  std::vector<std::string>& known_;
};

void check_config_keys(const Ctx& ctx, const std::vector<std::string>& known,
                       const std::string& command) {
  if (!ctx.manifest_command.empty() && ctx.manifest_command != command) {
    throw ParameterError("config: manifest records a '" +
                         ctx.manifest_command + "' run, not '" + command +
                         "'");
  }
  for (const auto& item : ctx.cfg.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ParameterError("config: unknown key '" + item.key() + "' for " +
                           command);
    }
  }
}

// ---------------------------------------------------------------------------
// Run manifest

struct Manifest {
  std::string command;
  std::optional<uint64_t> seed;
  json config = json::object();
  json inputs = json::object();
  std::vector<std::string> outputs;
  double t0 = now_seconds();

  Manifest(std::string cmd, std::optional<uint64_t> s)
      : command(std::move(cmd)), seed(s) {}

  void input(const std::string& label, const std::string& path) {
    inputs[label] = {{"path", path}, {"sha256", sha256_file(path)}};
  }

  // Directory anchors get <dir>/run_manifest.json, file anchors a sibling
  // <file>.manifest.json.
  void write(const std::string& anchor) const {
    json m;
    m["artifact_version"] = kArtifactVersion;
    m["command"] = command;
    if (seed) {
      m["seed"] = *seed;
    } else {
      m["seed"] = nullptr;
    }
    m["config"] = config;
    m["inputs"] = inputs;
    json outs = json::array();
    for (const auto& path : outputs) {
      outs.push_back({{"path", path}, {"sha256", sha256_file(path)}});
    }
    m["outputs"] = outs;
    m["timings"] = {{"seconds", now_seconds() - t0}};

    const std::string path =
        fs::is_directory(anchor)
            ? (fs::path(anchor) / "run_manifest.json").string()
            : anchor + ".manifest.json";
    std::ofstream out(path, std::ios::trunc);
    out << m.dump(2) << "\n";
    if (!out) throw IoError("cannot write " + path);
    std::cout << "manifest " << path << "\n";
  }
};

void print_config(const json& config) {
  std::cout << "config " << config.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Shared pieces

TaskKind parse_task(const std::string& s) {
  if (s == "single") return TaskKind::kSingle;
  if (s == "pair") return TaskKind::kPair;
  throw ParameterError("task must be 'single' or 'pair', got '" + s + "'");
}

FeatureSource parse_features(const std::string& s) {
  if (s == "projected") return FeatureSource::kProjected;
  if (s == "hidden") return FeatureSource::kHidden;
  throw ParameterError("features must be 'projected' or 'hidden', got '" + s +
                       "'");
}

std::unique_ptr<TeacherOracle> make_teacher(const std::string& file,
                                            bool synthetic, uint64_t seed,
                                            size_t dim, Manifest& man,
                                            const std::string& command) {
  if (!file.empty() && synthetic) {
    throw ParameterError(command +
                         ": --teacher and --synthetic-teacher are mutually "
                         "exclusive");
  }
  if (file.empty() && !synthetic) {
    throw ParameterError(command +
                         ": give --teacher FILE or --synthetic-teacher");
  }
  if (synthetic) return std::make_unique<SyntheticTeacher>(seed, dim);
  man.input("teacher", file);
  return std::make_unique<FileTeacher>(FileTeacher::load(file));
}

std::vector<std::string> all_texts(const Dataset& ds) {
  std::vector<std::string> out;
  for (const auto& ex : ds.examples) {
    out.push_back(ex.text_a);
    if (ex.text_b) out.push_back(*ex.text_b);
  }
  return out;
}

// Rewrites `ds` labels through `dict` so every split shares the reference
// label ids (read_tsv numbers labels by first appearance per file).
void remap_labels(Dataset& ds, const std::vector<std::string>& dict,
                  const std::string& what) {
  for (auto& ex : ds.examples) {
    if (ex.label == kNoLabel) continue;
    const std::string& name = ds.label_names[static_cast<size_t>(ex.label)];
    auto it = std::find(dict.begin(), dict.end(), name);
    if (it == dict.end()) {
      throw LabelError(what + ": unknown label '" + name + "'");
    }
    ex.label = static_cast<int>(it - dict.begin());
  }
  ds.label_names = dict;
}

// The similarity evaluator treats class 1 as the positive class; when a
// label is literally named "1" make sure it lands there regardless of which
// class the file happened to mention first.
void orient_binary_labels(Dataset& ds, const std::string& what) {
  if (ds.label_names.size() != 2) {
    throw LabelError(what + ": expected exactly 2 label classes, got " +
                     std::to_string(ds.label_names.size()));
  }
  if (ds.label_names[0] == "1" && ds.label_names[1] != "1") {
    std::swap(ds.label_names[0], ds.label_names[1]);
    for (auto& ex : ds.examples) {
      if (ex.label != kNoLabel) ex.label = 1 - ex.label;
    }
  }
}

struct CommonFlags {
  std::string config_path;
  bool paper = false;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path,
                  "JSON config file, or a previous run_manifest.json to "
                  "reproduce that run; flags override config values");
  sub->add_flag("--paper-defaults", flags.paper,
                "start from paper-scale defaults (batch 1024, E 300, h 512, "
                "d 768) instead of desk-scale ones");
}

// ---------------------------------------------------------------------------
// teacher-synth

struct TeacherSynthOpts {
  std::string corpus, out;
  size_t dim = 16;
  uint64_t seed = 42;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_teacher_synth(const TeacherSynthOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "teacher-synth");
  need(!o.corpus.empty(), "teacher-synth: --corpus is required");
  need(!o.out.empty(), "teacher-synth: --out is required");

  Manifest man("teacher-synth", o.seed);
  man.config = {{"corpus", o.corpus},
                {"out", o.out},
                {"dim", o.dim},
                {"seed", o.seed}};
  print_config(man.config);

  man.input("corpus", o.corpus);
  const auto corpus = read_lines(o.corpus);
  SyntheticTeacher teacher(o.seed, o.dim);
  const size_t records = export_teacher_file(teacher, corpus, o.out);
  std::cout << "teacher-synth: wrote " << records << " records (d=" << o.dim
            << ") to " << o.out << "\n";
  man.outputs = {o.out};
  man.write(o.out);
}

void setup_teacher_synth(CLI::App& app, const Ctx& ctx) {
  auto o = std::make_shared<TeacherSynthOpts>();
  o->seed = ctx.seed_default;
  if (ctx.paper) o->dim = 768;
  Binder bind(ctx, o->known);
  bind("corpus", o->corpus);
  bind("out", o->out);
  bind("dim", o->dim);
  bind("seed", o->seed);

  auto* sub = app.add_subcommand(
      "teacher-synth", "export a synthetic teacher's embeddings as JSONL");
  sub->add_option("--corpus", o->corpus,
                  "corpus file, one sentence per line (required)");
  sub->add_option("--out", o->out, "output teacher JSONL path (required)");
  sub->add_option("--dim", o->dim, "teacher embedding dimension")
      ->capture_default_str();
  sub->add_option("--seed", o->seed, "teacher seed")->capture_default_str();
  add_common(sub, o->common);
  sub->callback([o, &ctx] { run_teacher_synth(*o, ctx); });
}

// ---------------------------------------------------------------------------
// distill

struct DistillOpts {
  std::string corpus, teacher, out, vectors;
  bool synthetic = false;
  uint64_t teacher_seed = 7;
  size_t dim = 16;
  size_t emb = 16, hidden = 8;
  double lr = 1e-3, val_fraction = 0.02;
  size_t batch = 32, epochs = 10, workers = 1;
  bool freeze = false;
  uint64_t seed = 42;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_distill(const DistillOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "distill");
  need(!o.corpus.empty(), "distill: --corpus is required");
  need(!o.out.empty(), "distill: --out is required");

  Manifest man("distill", o.seed);
  man.config = {{"corpus", o.corpus},
                {"teacher", o.teacher},
                {"synthetic-teacher", o.synthetic},
                {"teacher-seed", o.teacher_seed},
                {"dim", o.dim},
                {"emb-dim", o.emb},
                {"hidden-dim", o.hidden},
                {"lr", o.lr},
                {"batch-size", o.batch},
                {"epochs", o.epochs},
                {"val-fraction", o.val_fraction},
                {"freeze-embeddings", o.freeze},
                {"vectors", o.vectors},
                {"workers", o.workers},
                {"seed", o.seed},
                {"out", o.out}};
  print_config(man.config);

  man.input("corpus", o.corpus);
  const auto corpus = read_lines(o.corpus);
  const auto teacher =
      make_teacher(o.teacher, o.synthetic, o.teacher_seed, o.dim, man,
                   "distill");
  const Vocabulary vocab = Vocabulary::from_texts(corpus);

  EncoderConfig ec;
  ec.vocab_size = vocab.size();
  ec.emb_dim = o.emb;
  ec.hidden_dim = o.hidden;
  ec.teacher_dim = teacher->dim();
  Rng enc_rng(mix_seed(o.seed, kEncoderInitStream));
  StudentEncoder encoder = StudentEncoder::create(ec, enc_rng);
  if (!o.vectors.empty()) {
    man.input("vectors", o.vectors);
    encoder.embedding = load_word_vectors(o.vectors, vocab, o.emb);
  }

  DistillConfig dc;
  dc.lr = o.lr;
  dc.batch_size = o.batch;
  dc.epochs = o.epochs;
  dc.seed = o.seed;
  dc.freeze_embeddings = o.freeze;
  dc.validation_fraction = o.val_fraction;
  dc.checkpoint_dir = o.out;
  dc.workers = o.workers;

  const DistillResult res = distill(corpus, *teacher, encoder, vocab, dc);

  for (size_t e = 0; e < res.train_loss.size(); ++e) {
    std::cout << "epoch " << e + 1 << "/" << res.train_loss.size() << " train "
              << fixed6(res.train_loss[e]);
    if (e < res.val_loss.size()) std::cout << " val " << fixed6(res.val_loss[e]);
    std::cout << "\n";
  }
  std::cout << "distill: " << res.train_sentences << " train / "
            << res.val_sentences << " val sentences, skipped " << res.skipped
            << "\n";
  if (!res.val_loss.empty()) {
    std::cout << "best val " << fixed6(res.best_val_loss) << " (epoch "
              << res.best_epoch << ")\n";
  }
  for (const auto& path :
       {res.best_checkpoint, res.final_checkpoint,
        (fs::path(o.out) / "history.csv").string()}) {
    if (!path.empty() && fs::exists(path)) man.outputs.push_back(path);
  }
  man.write(o.out);
}

void setup_distill(CLI::App& app, const Ctx& ctx) {
  auto o = std::make_shared<DistillOpts>();
  o->seed = ctx.seed_default;
  if (ctx.paper) {
    o->batch = 1024;
    o->emb = 300;
    o->hidden = 512;
    o->dim = 768;
  }
  Binder bind(ctx, o->known);
  bind("corpus", o->corpus);
  bind("teacher", o->teacher);
  bind("synthetic-teacher", o->synthetic);
  bind("teacher-seed", o->teacher_seed);
  bind("dim", o->dim);
  bind("emb-dim", o->emb);
  bind("hidden-dim", o->hidden);
  bind("lr", o->lr);
  bind("batch-size", o->batch);
  bind("epochs", o->epochs);
  bind("val-fraction", o->val_fraction);
  bind("freeze-embeddings", o->freeze);
  bind("vectors", o->vectors);
  bind("workers", o->workers);
  bind("seed", o->seed);
  bind("out", o->out);

  auto* sub = app.add_subcommand(
      "distill",
      "train the student encoder against a frozen teacher (cosine objective)");
  sub->add_option("--corpus", o->corpus,
                  "corpus file, one sentence per line (required)");
  sub->add_option("--teacher", o->teacher, "teacher embeddings JSONL");
  sub->add_flag("--synthetic-teacher,!--no-synthetic-teacher", o->synthetic,
                "use the built-in synthetic teacher instead of a file");
  sub->add_option("--teacher-seed", o->teacher_seed, "synthetic teacher seed")
      ->capture_default_str();
  sub->add_option("--dim", o->dim, "synthetic teacher dimension")
      ->capture_default_str();
  sub->add_option("--emb-dim", o->emb, "student embedding dimension")
      ->capture_default_str();
  sub->add_option("--hidden-dim", o->hidden,
                  "student LSTM hidden size per direction")
      ->capture_default_str();
  sub->add_option("--lr", o->lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--batch-size", o->batch, "minibatch size")
      ->capture_default_str();
  sub->add_option("--epochs", o->epochs, "training epochs")
      ->capture_default_str();
  sub->add_option("--val-fraction", o->val_fraction,
                  "held-out fraction of the corpus")
      ->capture_default_str();
  sub->add_flag("--freeze-embeddings,!--no-freeze-embeddings", o->freeze,
                "keep the embedding table fixed");
  sub->add_option("--vectors", o->vectors,
                  "word-vector text file to initialize the embedding table");
  sub->add_option("--workers", o->workers, "gradient worker threads")
      ->capture_default_str();
  sub->add_option("--seed", o->seed, "run seed")->capture_default_str();
  sub->add_option("--out", o->out,
                  "checkpoint directory for best/final/history (required)");
  add_common(sub, o->common);
  sub->callback([o, &ctx] { run_distill(*o, ctx); });
}

// ---------------------------------------------------------------------------
// finetune

struct FinetuneOpts {
  std::string train, dev, out, init, kd_logits;
  std::string task = "single", features = "projected";
  bool header = false;
  std::vector<double> lr_grid = {2e-4, 3e-4, 5e-4, 1e-3};
  size_t max_epochs = 100, patience = 5, batch = 32, workers = 1;
  std::vector<size_t> head_hidden = {256};
  double kd_alpha = 1.0;
  size_t emb = 16, hidden = 8, dim = 16;
  uint64_t seed = 42;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_finetune(const FinetuneOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "finetune");
  need(!o.train.empty(), "finetune: --train is required");
  need(!o.dev.empty(), "finetune: --dev is required");
  need(!o.out.empty(), "finetune: --out is required");

  Manifest man("finetune", o.seed);
  man.config = {{"train", o.train},
                {"dev", o.dev},
                {"task", o.task},
                {"features", o.features},
                {"header", o.header},
                {"init", o.init},
                {"lr-grid", o.lr_grid},
                {"max-epochs", o.max_epochs},
                {"patience", o.patience},
                {"batch-size", o.batch},
                {"head-hidden", o.head_hidden},
                {"kd-logits", o.kd_logits},
                {"kd-alpha", o.kd_alpha},
                {"emb-dim", o.emb},
                {"hidden-dim", o.hidden},
                {"dim", o.dim},
                {"workers", o.workers},
                {"seed", o.seed},
                {"out", o.out}};
  print_config(man.config);

  man.input("train", o.train);
  man.input("dev", o.dev);
  const TaskKind kind = parse_task(o.task);
  Dataset train = read_tsv(o.train, kind, o.header);
  Dataset dev = read_tsv(o.dev, kind, o.header);
  remap_labels(dev, train.label_names, "finetune: dev");
  if (train.label_names.size() < 2) {
    throw LabelError("finetune: training data has fewer than 2 label classes");
  }

  TaskModelConfig tc;
  tc.task = kind;
  tc.features = parse_features(o.features);
  tc.num_classes = train.label_names.size();
  tc.head_hidden = o.head_hidden;

  TaskModel init;
  Vocabulary vocab;
  std::string parent_digest;
  if (!o.init.empty()) {
    man.input("init", o.init);
    InheritedModel im = task_model_from_checkpoint(o.init, tc, o.seed);
    init = std::move(im.model);
    vocab = std::move(im.vocab);
    parent_digest = im.parent_digest;
  } else {
    vocab = Vocabulary::from_texts([&] {
      auto texts = all_texts(train);
      const auto more = all_texts(dev);
      texts.insert(texts.end(), more.begin(), more.end());
      return texts;
    }());
    EncoderConfig ec;
    ec.vocab_size = vocab.size();
    ec.emb_dim = o.emb;
    ec.hidden_dim = o.hidden;
    ec.teacher_dim = o.dim;
    Rng enc_rng(mix_seed(o.seed, kEncoderInitStream));
    Rng head_rng(mix_seed(o.seed, kHeadInitStream));
    init = TaskModel::create(StudentEncoder::create(ec, enc_rng), tc, head_rng);
  }

  TeacherLogits logits;
  const TeacherLogits* logits_ptr = nullptr;
  if (!o.kd_logits.empty()) {
    man.input("kd-logits", o.kd_logits);
    logits = load_teacher_logits(o.kd_logits);
    logits_ptr = &logits;
  }

  FinetuneConfig fc;
  fc.lr_grid = o.lr_grid;
  fc.max_epochs = o.max_epochs;
  fc.patience = o.patience;
  fc.batch_size = o.batch;
  fc.seed = o.seed;
  fc.kd_alpha = o.kd_alpha;
  fc.workers = o.workers;

  const FinetuneResult res =
      finetune(init, train.examples, dev.examples, vocab, fc, logits_ptr);

  const char* metric = kind == TaskKind::kPair ? "F1" : "accuracy";
  for (size_t a = 0; a < res.arms.size(); ++a) {
    const ArmResult& arm = res.arms[a];
    std::cout << "arm " << a + 1 << " lr " << arm.lr << " best dev " << metric
              << " " << fixed6(arm.best_metric) << " (epoch " << arm.best_epoch
              << ", " << arm.history.size() << " epochs run)\n";
  }
  std::cout << "finetune: best lr " << res.best_lr << " dev " << metric << " "
            << fixed6(res.best_metric) << ", skipped " << res.skipped << "\n";

  fs::create_directories(o.out);
  const std::string model_path = (fs::path(o.out) / "task.ckpt").string();
  const std::string report_path = (fs::path(o.out) / "report.csv").string();
  save_task_checkpoint(model_path, res.best_model, vocab, train.label_names,
                       parent_digest);
  write_finetune_report(report_path, res);
  std::cout << "model " << model_path << "\n";
  man.outputs = {model_path, report_path};
  man.write(o.out);
}

void setup_finetune(CLI::App& app, const Ctx& ctx) {
  auto o = std::make_shared<FinetuneOpts>();
  o->seed = ctx.seed_default;
  if (ctx.paper) {
    o->batch = 1024;
    o->emb = 300;
    o->hidden = 512;
    o->dim = 768;
  }
  Binder bind(ctx, o->known);
  bind("train", o->train);
  bind("dev", o->dev);
  bind("task", o->task);
  bind("features", o->features);
  bind("header", o->header);
  bind("init", o->init);
  bind("lr-grid", o->lr_grid);
  bind("max-epochs", o->max_epochs);
  bind("patience", o->patience);
  bind("batch-size", o->batch);
  bind("head-hidden", o->head_hidden);
  bind("kd-logits", o->kd_logits);
  bind("kd-alpha", o->kd_alpha);
  bind("emb-dim", o->emb);
  bind("hidden-dim", o->hidden);
  bind("dim", o->dim);
  bind("workers", o->workers);
  bind("seed", o->seed);
  bind("out", o->out);

  auto* sub = app.add_subcommand(
      "finetune", "grid-search fine-tuning of a task head (plus encoder)");
  sub->add_option("--train", o->train, "training TSV (required)");
  sub->add_option("--dev", o->dev, "development TSV (required)");
  sub->add_option("--task", o->task, "'single' or 'pair'")
      ->capture_default_str();
  sub->add_option("--features", o->features,
                  "head input: 'projected' (S) or 'hidden' (H)")
      ->capture_default_str();
  sub->add_flag("--header,!--no-header", o->header,
                "first TSV line is a header");
  sub->add_option("--init", o->init,
                  "distilled encoder checkpoint to inherit from");
  sub->add_option("--lr-grid", o->lr_grid, "learning-rate grid")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--max-epochs", o->max_epochs, "epoch cap per arm")
      ->capture_default_str();
  sub->add_option("--patience", o->patience,
                  "epochs without dev improvement before stopping")
      ->capture_default_str();
  sub->add_option("--batch-size", o->batch, "minibatch size")
      ->capture_default_str();
  sub->add_option("--head-hidden", o->head_hidden,
                  "hidden layer widths of the MLP head")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--kd-logits", o->kd_logits,
                  "teacher logits JSONL for task-level distillation");
  sub->add_option("--kd-alpha", o->kd_alpha,
                  "weight of the logit-MSE term when logits are given")
      ->capture_default_str();
  sub->add_option("--emb-dim", o->emb, "embedding dim (random init only)")
      ->capture_default_str();
  sub->add_option("--hidden-dim", o->hidden,
                  "LSTM hidden size per direction (random init only)")
      ->capture_default_str();
  sub->add_option("--dim", o->dim, "projection dim (random init only)")
      ->capture_default_str();
  sub->add_option("--workers", o->workers, "gradient worker threads")
      ->capture_default_str();
  sub->add_option("--seed", o->seed, "run seed")->capture_default_str();
  sub->add_option("--out", o->out,
                  "output directory for task.ckpt and report.csv (required)");
  add_common(sub, o->common);
  sub->callback([o, &ctx] { run_finetune(*o, ctx); });
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string model, data, out, range_check;
  bool header = false;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_range_check(const std::string& path) {
  const FileTeacher teacher = FileTeacher::load(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Tensor> vectors;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header_seen) {  // load() already validated the header line
      header_seen = true;
      continue;
    }
    try {
      const auto record = nlohmann::json::parse(line);
      vectors.push_back(
          Tensor::vector(record.at("vec").get<std::vector<double>>()));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
  }
  const double stat = range_statistic(vectors);
  std::cout << "range check: " << vectors.size() << " vectors (d="
            << teacher.dim() << ") from " << path << "\n";
  std::cout << "range_statistic " << fixed6(stat) << "\n";
  std::cout << "reference: teacher exports are expected to score > 0.98\n";
}

void run_eval(const EvalOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "eval");
  if (!o.range_check.empty()) {
    need(o.model.empty() && o.data.empty(),
         "eval: --range-check excludes --model/--data");
    print_config({{"range-check", o.range_check}});
    run_range_check(o.range_check);
    return;
  }
  need(!o.model.empty(), "eval: --model is required");
  need(!o.data.empty(), "eval: --data is required");

  Manifest man("eval", std::nullopt);
  man.config = {{"model", o.model},
                {"data", o.data},
                {"header", o.header},
                {"range-check", o.range_check},
                {"out", o.out}};
  print_config(man.config);

  man.input("model", o.model);
  man.input("data", o.data);
  const LoadedTaskModel lm = load_task_checkpoint(o.model);
  const TaskKind kind = lm.model.task_config().task;
  Dataset data = read_tsv(o.data, kind, o.header);
  remap_labels(data, lm.label_dict, "eval");

  std::vector<int> preds, golds;
  size_t skipped = 0;
  for (const auto& ex : data.examples) {
    const auto ta = lm.vocab.encode(tokenize(ex.text_a));
    std::vector<int32_t> tb;
    if (kind == TaskKind::kPair) tb = lm.vocab.encode(tokenize(*ex.text_b));
    if (ta.empty() || (kind == TaskKind::kPair && tb.empty())) {
      ++skipped;
      continue;
    }
    preds.push_back(argmax(lm.model.forward(ta, tb)));
    golds.push_back(ex.label);
  }
  if (preds.empty()) throw EmptyInputError("eval: no evaluable examples");

  const MetricReport mr = compute_metrics(preds, golds, 1);
  std::cout << "eval: " << data.examples.size() << " examples, "
            << preds.size() << " evaluated, " << skipped << " skipped\n";
  std::cout << "accuracy " << fixed6(mr.accuracy) << "\n";
  if (lm.label_dict.size() == 2) {
    std::cout << "f1 " << fixed6(mr.f1) << " (positive class '"
              << lm.label_dict[1] << "')\n";
  }

  if (!o.out.empty()) {
    json metrics = {{"accuracy", mr.accuracy},
                    {"f1", mr.f1},
                    {"positive_class", lm.label_dict.size() == 2
                                           ? json(lm.label_dict[1])
                                           : json(nullptr)},
                    {"support_positive", mr.support_positive},
                    {"support_negative", mr.support_negative},
                    {"evaluated", preds.size()},
                    {"skipped", skipped}};
    std::ofstream f(o.out, std::ios::trunc);
    f << metrics.dump(2) << "\n";
    if (!f) throw IoError("cannot write " + o.out);
    man.outputs = {o.out};
    man.write(o.out);
  }
}

void setup_eval(CLI::App& app, const Ctx& ctx) {
  auto o = std::make_shared<EvalOpts>();
  Binder bind(ctx, o->known);
  bind("model", o->model);
  bind("data", o->data);
  bind("header", o->header);
  bind("range-check", o->range_check);
  bind("out", o->out);

  auto* sub = app.add_subcommand(
      "eval", "evaluate a fine-tuned checkpoint on a labeled TSV");
  sub->add_option("--model", o->model, "task checkpoint (required)");
  sub->add_option("--data", o->data, "labeled TSV (required)");
  sub->add_flag("--header,!--no-header", o->header,
                "first TSV line is a header");
  sub->add_option("--range-check", o->range_check,
                  "instead: report the range diagnostic of a teacher JSONL");
  sub->add_option("--out", o->out, "optional metrics JSON path");
  add_common(sub, o->common);
  sub->callback([o, &ctx] { run_eval(*o, ctx); });
}

// ---------------------------------------------------------------------------
// similarity

struct SimilarityOpts {
  std::string model, pairs, dev, out;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  bool header = false;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_similarity(const SimilarityOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "similarity");
  need(!o.model.empty(), "similarity: --model is required");
  need(!o.pairs.empty(), "similarity: --pairs is required");

  Manifest man("similarity", std::nullopt);
  man.config = {{"model", o.model},
                {"pairs", o.pairs},
                {"dev", o.dev},
                {"threshold",
                 std::isnan(o.threshold) ? json(nullptr) : json(o.threshold)},
                {"header", o.header},
                {"out", o.out}};
  print_config(man.config);

  man.input("model", o.model);
  man.input("pairs", o.pairs);
  const EncoderCheckpoint ck = load_encoder_checkpoint(o.model);
  Dataset pairs = read_tsv(o.pairs, TaskKind::kPair, o.header);
  orient_binary_labels(pairs, "similarity");

  std::optional<Dataset> dev;
  if (!o.dev.empty()) {
    man.input("dev", o.dev);
    dev = read_tsv(o.dev, TaskKind::kPair, o.header);
    remap_labels(*dev, pairs.label_names, "similarity: dev");
  }
  std::optional<double> threshold;
  if (!std::isnan(o.threshold)) threshold = o.threshold;

  const SimilarityResult res = untuned_similarity_eval(
      pairs.examples, ck.encoder, ck.vocab, threshold,
      dev ? &dev->examples : nullptr);
  std::cout << "similarity: accuracy " << fixed6(res.accuracy) << " f1 "
            << fixed6(res.f1) << " threshold " << fixed6(res.threshold)
            << " (" << res.evaluated << " evaluated, " << res.skipped
            << " skipped; positive class '" << pairs.label_names[1] << "')\n";

  if (!o.out.empty()) {
    json metrics = {{"accuracy", res.accuracy},
                    {"f1", res.f1},
                    {"threshold", res.threshold},
                    {"evaluated", res.evaluated},
                    {"skipped", res.skipped}};
    std::ofstream f(o.out, std::ios::trunc);
    f << metrics.dump(2) << "\n";
    if (!f) throw IoError("cannot write " + o.out);
    man.outputs = {o.out};
    man.write(o.out);
  }
}

void setup_similarity(CLI::App& app, const Ctx& ctx) {
  auto o = std::make_shared<SimilarityOpts>();
  Binder bind(ctx, o->known);
  bind("model", o->model);
  bind("pairs", o->pairs);
  bind("dev", o->dev);
  bind("threshold", o->threshold);
  bind("header", o->header);
  bind("out", o->out);

  auto* sub = app.add_subcommand(
      "similarity",
      "untuned paraphrase evaluation: thresholded cosine of frozen "
      "embeddings");
  sub->add_option("--model", o->model, "distilled encoder checkpoint "
                                       "(required)");
  sub->add_option("--pairs", o->pairs, "pair TSV to score (required)");
  sub->add_option("--dev", o->dev, "pair TSV for threshold selection");
  sub->add_option("--threshold", o->threshold,
                  "fixed cosine threshold (default: tuned on dev, or on "
                  "--pairs when no dev is given)");
  sub->add_flag("--header,!--no-header", o->header,
                "first TSV line is a header");
  sub->add_option("--out", o->out, "optional metrics JSON path");
  add_common(sub, o->common);
  sub->callback([o, &ctx] { run_similarity(*o, ctx); });
}

// ---------------------------------------------------------------------------
// augment

struct AugmentOpts {
  std::string corpus, out;
  size_t multiplier = 10, cap = 800000;
  double p_mask = 0.1;
  size_t ngram_lo = 1, ngram_hi = 5;
  uint64_t seed = 42;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_augment(const AugmentOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "augment");
  need(!o.corpus.empty(), "augment: --corpus is required");
  need(!o.out.empty(), "augment: --out is required");

  Manifest man("augment", o.seed);
  man.config = {{"corpus", o.corpus}, {"out", o.out},
                {"multiplier", o.multiplier}, {"cap", o.cap},
                {"p-mask", o.p_mask}, {"ngram-lo", o.ngram_lo},
                {"ngram-hi", o.ngram_hi}, {"seed", o.seed}};
  print_config(man.config);

  man.input("corpus", o.corpus);
  const auto lines = read_lines(o.corpus);
  std::vector<LabeledExample> examples;
  examples.reserve(lines.size());
  for (const auto& line : lines) examples.push_back({line, std::nullopt, kNoLabel});

  TransferSetOptions topts;
  topts.multiplier = o.multiplier;
  topts.cap = o.cap;
  topts.p_mask = o.p_mask;
  topts.ngram_lo = o.ngram_lo;
  topts.ngram_hi = o.ngram_hi;
  Rng rng(o.seed);
  const auto transfer = build_transfer_set(examples, topts, rng);

  std::ofstream out(o.out, std::ios::trunc);
  if (!out) throw IoError("cannot write " + o.out);
  for (const auto& ex : transfer) out << ex.text_a << "\n";
  if (!out) throw IoError("failed while writing " + o.out);

  std::cout << "augment: wrote " << transfer.size() << " sentences ("
            << lines.size() << " originals) to " << o.out << "\n";
  man.outputs = {o.out};
  man.write(o.out);
}

void setup_augment(CLI::App& app, const Ctx& ctx) {
  auto o = std::make_shared<AugmentOpts>();
  o->seed = ctx.seed_default;
  Binder bind(ctx, o->known);
  bind("corpus", o->corpus);
  bind("out", o->out);
  bind("multiplier", o->multiplier);
  bind("cap", o->cap);
  bind("p-mask", o->p_mask);
  bind("ngram-lo", o->ngram_lo);
  bind("ngram-hi", o->ngram_hi);
  bind("seed", o->seed);

  auto* sub = app.add_subcommand(
      "augment", "build a transfer set (masking + n-gram sampling)");
  sub->add_option("--corpus", o->corpus,
                  "corpus file, one sentence per line (required)");
  sub->add_option("--out", o->out, "output corpus path (required)");
  sub->add_option("--multiplier", o->multiplier,
                  "augmented variants per original")
      ->capture_default_str();
  sub->add_option("--cap", o->cap, "output size cap")->capture_default_str();
  sub->add_option("--p-mask", o->p_mask, "per-token masking probability")
      ->capture_default_str();
  sub->add_option("--ngram-lo", o->ngram_lo, "n-gram sampling lower bound")
      ->capture_default_str();
  sub->add_option("--ngram-hi", o->ngram_hi, "n-gram sampling upper bound")
      ->capture_default_str();
  sub->add_option("--seed", o->seed, "run seed")->capture_default_str();
  add_common(sub, o->common);
  sub->callback([o, &ctx] { run_augment(*o, ctx); });
}

// ---------------------------------------------------------------------------
// bench params | speed

struct BenchParamsOpts {
  size_t vocab = 100, emb = 16, hidden = 8, dim = 16;
  std::string task = "none";
  std::vector<size_t> head_hidden = {256};
  size_t num_classes = 2;
  std::string out;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_bench_params(const BenchParamsOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "bench-params");

  Manifest man("bench-params", std::nullopt);
  man.config = {{"vocab", o.vocab},       {"emb-dim", o.emb},
                {"hidden-dim", o.hidden}, {"dim", o.dim},
                {"task", o.task},         {"head-hidden", o.head_hidden},
                {"num-classes", o.num_classes}, {"out", o.out}};
  print_config(man.config);

  EncoderConfig ec;
  ec.vocab_size = o.vocab;
  ec.emb_dim = o.emb;
  ec.hidden_dim = o.hidden;
  ec.teacher_dim = o.dim;

  size_t total = 0, non_embedding = 0;
  if (o.task == "none") {
    const StudentEncoder enc = StudentEncoder::zeros(ec);
    const auto views = enc.named_tensors();
    total = count_parameters(views, false);
    non_embedding = count_parameters(views, true);
  } else {
    TaskModelConfig tc;
    tc.task = parse_task(o.task);
    tc.num_classes = o.num_classes;
    tc.head_hidden = o.head_hidden;
    const TaskModel model = TaskModel::zeros(ec, tc);
    const auto views = model.named_tensors();
    total = count_parameters(views, false);
    non_embedding = count_parameters(views, true);
  }

  std::cout << "bench params: V=" << o.vocab << " E=" << o.emb << " h="
            << o.hidden << " d=" << o.dim << " task=" << o.task << "\n";
  std::cout << "total " << total << " (" << millions(total) << ")\n";
  std::cout << "non-embedding " << non_embedding << " ("
            << millions(non_embedding) << ")\n";

  if (!o.out.empty()) {
    json counts = {{"total", total}, {"non_embedding", non_embedding}};
    std::ofstream f(o.out, std::ios::trunc);
    f << counts.dump(2) << "\n";
    if (!f) throw IoError("cannot write " + o.out);
    man.outputs = {o.out};
    man.write(o.out);
  }
}

struct BenchSpeedOpts {
  std::string model, corpus, out;
  size_t sentences = 2048, length = 16;
  size_t vocab = 100, emb = 16, hidden = 8, dim = 16;
  size_t batch = 32, repeats = 5;
  uint64_t seed = 42;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_bench_speed(const BenchSpeedOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "bench-speed");

  Manifest man("bench-speed", o.seed);
  man.config = {{"model", o.model},       {"corpus", o.corpus},
                {"sentences", o.sentences}, {"length", o.length},
                {"vocab", o.vocab},       {"emb-dim", o.emb},
                {"hidden-dim", o.hidden}, {"dim", o.dim},
                {"batch-size", o.batch},  {"repeats", o.repeats},
                {"seed", o.seed},         {"out", o.out}};
  print_config(man.config);

  StudentEncoder encoder;
  Vocabulary vocab;
  if (!o.model.empty()) {
    man.input("model", o.model);
    EncoderCheckpoint ck = load_encoder_checkpoint(o.model);
    encoder = std::move(ck.encoder);
    vocab = std::move(ck.vocab);
  } else {
    if (!o.corpus.empty()) {
      vocab = Vocabulary::from_texts(read_lines(o.corpus));
    }
    EncoderConfig ec;
    ec.vocab_size = o.corpus.empty() ? o.vocab : vocab.size();
    ec.emb_dim = o.emb;
    ec.hidden_dim = o.hidden;
    ec.teacher_dim = o.dim;
    Rng enc_rng(mix_seed(o.seed, kEncoderInitStream));
    encoder = StudentEncoder::create(ec, enc_rng);
  }

  std::vector<std::vector<int32_t>> rows;
  if (!o.corpus.empty()) {
    man.input("corpus", o.corpus);
    for (const auto& line : read_lines(o.corpus)) {
      auto ids = vocab.encode(tokenize(line));
      if (!ids.empty()) rows.push_back(std::move(ids));
    }
  } else {
    const size_t v = encoder.config().vocab_size;
    need(v > 3, "bench-speed: vocab must exceed the 3 reserved ids");
    need(o.length > 0, "bench-speed: --length must be positive");
    Rng rng(mix_seed(o.seed, 0xBE5C));
    rows.reserve(o.sentences);
    for (size_t i = 0; i < o.sentences; ++i) {
      std::vector<int32_t> row(o.length);
      for (auto& id : row) {
        id = static_cast<int32_t>(3 + rng.next_below(v - 3));
      }
      rows.push_back(std::move(row));
    }
  }

  const TimingReport tr = time_inference(encoder, rows, o.batch, o.repeats);
  std::cout << "bench speed: " << tr.sentences << " sentences, batch "
            << tr.batch_size << ", repeats " << tr.repeats << "\n";
  std::cout << "elapsed " << fixed6(tr.seconds) << " s (median), "
            << fixed1(tr.sentences_per_sec) << " sentences/sec\n";

  if (!o.out.empty()) {
    json timing = {{"sentences", tr.sentences},
                   {"batch_size", tr.batch_size},
                   {"repeats", tr.repeats},
                   {"seconds", tr.seconds},
                   {"sentences_per_sec", tr.sentences_per_sec}};
    std::ofstream f(o.out, std::ios::trunc);
    f << timing.dump(2) << "\n";
    if (!f) throw IoError("cannot write " + o.out);
    man.outputs = {o.out};
    man.write(o.out);
  }
}

void setup_bench(CLI::App& app, const Ctx& ctx) {
  auto* bench = app.add_subcommand("bench", "model accounting benchmarks");
  bench->require_subcommand(1);

  auto po = std::make_shared<BenchParamsOpts>();
  if (ctx.paper) {
    po->emb = 300;
    po->hidden = 512;
    po->dim = 768;
  }
  Binder pbind(ctx, po->known);
  pbind("vocab", po->vocab);
  pbind("emb-dim", po->emb);
  pbind("hidden-dim", po->hidden);
  pbind("dim", po->dim);
  pbind("task", po->task);
  pbind("head-hidden", po->head_hidden);
  pbind("num-classes", po->num_classes);
  pbind("out", po->out);

  auto* params = bench->add_subcommand("params", "parameter counts");
  params->add_option("--vocab", po->vocab, "vocabulary size")
      ->capture_default_str();
  params->add_option("--emb-dim", po->emb, "embedding dimension")
      ->capture_default_str();
  params->add_option("--hidden-dim", po->hidden,
                     "LSTM hidden size per direction")
      ->capture_default_str();
  params->add_option("--dim", po->dim, "projection dimension")
      ->capture_default_str();
  params->add_option("--task", po->task,
                     "'none' (encoder only), 'single', or 'pair'")
      ->capture_default_str();
  params->add_option("--head-hidden", po->head_hidden,
                     "hidden layer widths of the MLP head")
      ->delimiter(',')
      ->capture_default_str();
  params->add_option("--num-classes", po->num_classes, "head output classes")
      ->capture_default_str();
  params->add_option("--out", po->out, "optional counts JSON path");
  add_common(params, po->common);
  params->callback([po, &ctx] { run_bench_params(*po, ctx); });

  auto so = std::make_shared<BenchSpeedOpts>();
  so->seed = ctx.seed_default;
  if (ctx.paper) {
    so->batch = 1024;
    so->emb = 300;
    so->hidden = 512;
    so->dim = 768;
  }
  Binder sbind(ctx, so->known);
  sbind("model", so->model);
  sbind("corpus", so->corpus);
  sbind("sentences", so->sentences);
  sbind("length", so->length);
  sbind("vocab", so->vocab);
  sbind("emb-dim", so->emb);
  sbind("hidden-dim", so->hidden);
  sbind("dim", so->dim);
  sbind("batch-size", so->batch);
  sbind("repeats", so->repeats);
  sbind("seed", so->seed);
  sbind("out", so->out);

  auto* speed = bench->add_subcommand("speed", "inference throughput");
  speed->add_option("--model", so->model,
                    "encoder checkpoint (default: random encoder)");
  speed->add_option("--corpus", so->corpus,
                    "sentences to encode (default: synthetic rows)");
  speed->add_option("--sentences", so->sentences,
                    "synthetic row count when no corpus is given")
      ->capture_default_str();
  speed->add_option("--length", so->length, "synthetic row length")
      ->capture_default_str();
  speed->add_option("--vocab", so->vocab,
                    "vocabulary size for the random encoder")
      ->capture_default_str();
  speed->add_option("--emb-dim", so->emb, "embedding dimension")
      ->capture_default_str();
  speed->add_option("--hidden-dim", so->hidden,
                    "LSTM hidden size per direction")
      ->capture_default_str();
  speed->add_option("--dim", so->dim, "projection dimension")
      ->capture_default_str();
  speed->add_option("--batch-size", so->batch, "inference batch size")
      ->capture_default_str();
  speed->add_option("--repeats", so->repeats, "timed passes (median)")
      ->capture_default_str();
  speed->add_option("--seed", so->seed, "run seed")->capture_default_str();
  speed->add_option("--out", so->out, "optional timing JSON path");
  add_common(speed, so->common);
  speed->callback([so, &ctx] { run_bench_speed(*so, ctx); });
}

// ---------------------------------------------------------------------------
// sweep data-fraction | distill-size

struct DataFractionOpts {
  std::string train, dev, out, init;
  std::string task = "single", features = "projected";
  bool header = false, plot = false;
  std::vector<double> fractions = {0.1, 0.2, 0.5, 1.0};
  std::vector<std::string> inits = {"distilled", "random"};
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::vector<double> lr_grid = {2e-4, 3e-4, 5e-4, 1e-3};
  size_t max_epochs = 20, batch = 32, workers = 1;
  std::vector<size_t> head_hidden = {256};
  size_t emb = 16, hidden = 8, dim = 16;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_sweep_data_fraction(const DataFractionOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "sweep-data-fraction");
  need(!o.train.empty(), "sweep data-fraction: --train is required");
  need(!o.dev.empty(), "sweep data-fraction: --dev is required");
  need(!o.out.empty(), "sweep data-fraction: --out is required");

  Manifest man("sweep-data-fraction", std::nullopt);
  man.config = {{"train", o.train},
                {"dev", o.dev},
                {"task", o.task},
                {"features", o.features},
                {"header", o.header},
                {"init", o.init},
                {"fractions", o.fractions},
                {"inits", o.inits},
                {"seeds", o.seeds},
                {"lr-grid", o.lr_grid},
                {"max-epochs", o.max_epochs},
                {"batch-size", o.batch},
                {"head-hidden", o.head_hidden},
                {"emb-dim", o.emb},
                {"hidden-dim", o.hidden},
                {"dim", o.dim},
                {"workers", o.workers},
                {"plot-data", o.plot},
                {"out", o.out}};
  print_config(man.config);

  man.input("train", o.train);
  man.input("dev", o.dev);
  const TaskKind kind = parse_task(o.task);
  Dataset train = read_tsv(o.train, kind, o.header);
  Dataset dev = read_tsv(o.dev, kind, o.header);
  remap_labels(dev, train.label_names, "sweep data-fraction: dev");
  if (train.label_names.size() < 2) {
    throw LabelError(
        "sweep data-fraction: training data has fewer than 2 label classes");
  }

  const bool wants_distilled =
      std::find(o.inits.begin(), o.inits.end(), "distilled") != o.inits.end();
  Vocabulary vocab;
  EncoderConfig ec;
  if (!o.init.empty()) {
    man.input("init", o.init);
    EncoderCheckpoint ck = load_encoder_checkpoint(o.init);
    vocab = std::move(ck.vocab);
    ec = ck.encoder.config();
  } else {
    if (wants_distilled) {
      throw ParameterError(
          "sweep data-fraction: distilled inits need --init CKPT");
    }
    vocab = Vocabulary::from_texts([&] {
      auto texts = all_texts(train);
      const auto more = all_texts(dev);
      texts.insert(texts.end(), more.begin(), more.end());
      return texts;
    }());
    ec.vocab_size = vocab.size();
    ec.emb_dim = o.emb;
    ec.hidden_dim = o.hidden;
    ec.teacher_dim = o.dim;
  }

  SweepTask st;
  st.train = train.examples;
  st.dev = dev.examples;
  st.task.task = kind;
  st.task.features = parse_features(o.features);
  st.task.num_classes = train.label_names.size();
  st.task.head_hidden = o.head_hidden;
  st.finetune.lr_grid = o.lr_grid;
  st.finetune.max_epochs = o.max_epochs;
  st.finetune.batch_size = o.batch;
  st.finetune.workers = o.workers;

  const auto rows = data_fraction_sweep(st, vocab, o.init, ec, o.fractions,
                                        o.inits, o.seeds);
  write_data_fraction_csv(o.out, rows, o.plot);

  for (double fraction : o.fractions) {
    for (const auto& init : o.inits) {
      double sum = 0.0;
      size_t count = 0;
      for (const auto& r : rows) {
        if (r.fraction == fraction && r.init == init &&
            r.epoch == o.max_epochs) {
          sum += r.dev_metric;
          ++count;
        }
      }
      if (count > 0) {
        std::cout << "fraction " << fraction << " init " << init
                  << " mean final dev " << fixed6(sum / count) << "\n";
      }
    }
  }
  std::cout << "sweep data-fraction: wrote " << rows.size() << " rows to "
            << o.out << "\n";
  man.outputs = {o.out};
  man.write(o.out);
}

struct DistillSizeOpts {
  std::string corpus, teacher, train, dev, out;
  bool synthetic = false;
  uint64_t teacher_seed = 7;
  size_t dim = 16;
  std::vector<size_t> sizes;
  std::string task = "single", features = "projected";
  bool header = false, plot = false;
  double distill_lr = 1e-3, val_fraction = 0.02;
  size_t distill_batch = 32, distill_epochs = 10;
  std::vector<double> lr_grid = {2e-4, 3e-4, 5e-4, 1e-3};
  size_t max_epochs = 20, batch = 32, workers = 1;
  std::vector<size_t> head_hidden = {256};
  size_t emb = 16, hidden = 8;
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::vector<std::string> known;
  CommonFlags common;
};

void run_sweep_distill_size(const DistillSizeOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "sweep-distill-size");
  need(!o.corpus.empty(), "sweep distill-size: --corpus is required");
  need(!o.sizes.empty(), "sweep distill-size: --sizes is required");
  need(!o.train.empty(), "sweep distill-size: --train is required");
  need(!o.dev.empty(), "sweep distill-size: --dev is required");
  need(!o.out.empty(), "sweep distill-size: --out is required");

  Manifest man("sweep-distill-size", std::nullopt);
  man.config = {{"corpus", o.corpus},
                {"sizes", o.sizes},
                {"teacher", o.teacher},
                {"synthetic-teacher", o.synthetic},
                {"teacher-seed", o.teacher_seed},
                {"dim", o.dim},
                {"train", o.train},
                {"dev", o.dev},
                {"task", o.task},
                {"features", o.features},
                {"header", o.header},
                {"distill-lr", o.distill_lr},
                {"distill-batch-size", o.distill_batch},
                {"distill-epochs", o.distill_epochs},
                {"val-fraction", o.val_fraction},
                {"lr-grid", o.lr_grid},
                {"max-epochs", o.max_epochs},
                {"batch-size", o.batch},
                {"head-hidden", o.head_hidden},
                {"emb-dim", o.emb},
                {"hidden-dim", o.hidden},
                {"seeds", o.seeds},
                {"workers", o.workers},
                {"plot-data", o.plot},
                {"out", o.out}};
  print_config(man.config);

  man.input("corpus", o.corpus);
  man.input("train", o.train);
  man.input("dev", o.dev);
  const auto corpus = read_lines(o.corpus);
  const auto teacher = make_teacher(o.teacher, o.synthetic, o.teacher_seed,
                                    o.dim, man, "sweep distill-size");
  const TaskKind kind = parse_task(o.task);
  Dataset train = read_tsv(o.train, kind, o.header);
  Dataset dev = read_tsv(o.dev, kind, o.header);
  remap_labels(dev, train.label_names, "sweep distill-size: dev");
  if (train.label_names.size() < 2) {
    throw LabelError(
        "sweep distill-size: training data has fewer than 2 label classes");
  }

  const Vocabulary vocab = Vocabulary::from_texts([&] {
    std::vector<std::string> texts = corpus;
    for (const auto& t : all_texts(train)) texts.push_back(t);
    for (const auto& t : all_texts(dev)) texts.push_back(t);
    return texts;
  }());

  EncoderConfig ec;
  ec.vocab_size = vocab.size();
  ec.emb_dim = o.emb;
  ec.hidden_dim = o.hidden;
  ec.teacher_dim = teacher->dim();

  DistillConfig dc;
  dc.lr = o.distill_lr;
  dc.batch_size = o.distill_batch;
  dc.epochs = o.distill_epochs;
  dc.validation_fraction = o.val_fraction;
  dc.workers = o.workers;

  SweepTask st;
  st.train = train.examples;
  st.dev = dev.examples;
  st.task.task = kind;
  st.task.features = parse_features(o.features);
  st.task.num_classes = train.label_names.size();
  st.task.head_hidden = o.head_hidden;
  st.finetune.lr_grid = o.lr_grid;
  st.finetune.max_epochs = o.max_epochs;
  st.finetune.batch_size = o.batch;
  st.finetune.workers = o.workers;

  const auto rows =
      distill_size_sweep(corpus, o.sizes, *teacher, vocab, ec, dc, st, o.seeds);
  write_distill_size_csv(o.out, rows);

  for (const auto& r : rows) {
    std::cout << "size " << r.size << " val_loss "
              << (r.val_loss ? fixed6(*r.val_loss) : std::string("-"))
              << " dev " << fixed6(r.dev_metric) << "\n";
  }
  std::cout << "sweep distill-size: wrote " << rows.size() << " rows to "
            << o.out << "\n";
  man.outputs = {o.out};
  man.write(o.out);
}

void setup_sweep(CLI::App& app, const Ctx& ctx) {
  auto* sweep = app.add_subcommand("sweep", "multi-run study harnesses");
  sweep->require_subcommand(1);

  auto fo = std::make_shared<DataFractionOpts>();
  if (ctx.paper) {
    fo->batch = 1024;
    fo->emb = 300;
    fo->hidden = 512;
    fo->dim = 768;
  }
  Binder fbind(ctx, fo->known);
  fbind("train", fo->train);
  fbind("dev", fo->dev);
  fbind("task", fo->task);
  fbind("features", fo->features);
  fbind("header", fo->header);
  fbind("init", fo->init);
  fbind("fractions", fo->fractions);
  fbind("inits", fo->inits);
  fbind("seeds", fo->seeds);
  fbind("lr-grid", fo->lr_grid);
  fbind("max-epochs", fo->max_epochs);
  fbind("batch-size", fo->batch);
  fbind("head-hidden", fo->head_hidden);
  fbind("emb-dim", fo->emb);
  fbind("hidden-dim", fo->hidden);
  fbind("dim", fo->dim);
  fbind("workers", fo->workers);
  fbind("plot-data", fo->plot);
  fbind("out", fo->out);

  auto* fraction = sweep->add_subcommand(
      "data-fraction",
      "fine-tune on training prefixes from distilled vs random inits");
  fraction->add_option("--train", fo->train, "training TSV (required)");
  fraction->add_option("--dev", fo->dev, "development TSV (required)");
  fraction->add_option("--task", fo->task, "'single' or 'pair'")
      ->capture_default_str();
  fraction->add_option("--features", fo->features,
                       "head input: 'projected' or 'hidden'")
      ->capture_default_str();
  fraction->add_flag("--header,!--no-header", fo->header,
                     "first TSV line is a header");
  fraction->add_option("--init", fo->init,
                       "distilled encoder checkpoint for 'distilled' cells");
  fraction->add_option("--fractions", fo->fractions,
                       "training-set fractions in (0, 1]")
      ->delimiter(',')
      ->capture_default_str();
  fraction->add_option("--inits", fo->inits,
                       "initializations: 'distilled' and/or 'random'")
      ->delimiter(',')
      ->capture_default_str();
  fraction->add_option("--seeds", fo->seeds, "seeds, one run per seed")
      ->delimiter(',')
      ->capture_default_str();
  fraction->add_option("--lr-grid", fo->lr_grid, "learning-rate grid")
      ->delimiter(',')
      ->capture_default_str();
  fraction->add_option("--max-epochs", fo->max_epochs,
                       "epochs per run (no early stop inside sweeps)")
      ->capture_default_str();
  fraction->add_option("--batch-size", fo->batch, "minibatch size")
      ->capture_default_str();
  fraction->add_option("--head-hidden", fo->head_hidden,
                       "hidden layer widths of the MLP head")
      ->delimiter(',')
      ->capture_default_str();
  fraction->add_option("--emb-dim", fo->emb,
                       "embedding dim (random-only sweeps)")
      ->capture_default_str();
  fraction->add_option("--hidden-dim", fo->hidden,
                       "LSTM hidden size (random-only sweeps)")
      ->capture_default_str();
  fraction->add_option("--dim", fo->dim, "projection dim (random-only sweeps)")
      ->capture_default_str();
  fraction->add_option("--workers", fo->workers, "gradient worker threads")
      ->capture_default_str();
  fraction->add_flag("--plot-data,!--no-plot-data", fo->plot,
                     "emit one mean point per (fraction, init) instead of "
                     "per-epoch rows");
  fraction->add_option("--out", fo->out, "output CSV path (required)");
  add_common(fraction, fo->common);
  fraction->callback([fo, &ctx] { run_sweep_data_fraction(*fo, ctx); });

  auto so = std::make_shared<DistillSizeOpts>();
  if (ctx.paper) {
    so->batch = 1024;
    so->distill_batch = 1024;
    so->emb = 300;
    so->hidden = 512;
    so->dim = 768;
  }
  Binder sbind(ctx, so->known);
  sbind("corpus", so->corpus);
  sbind("sizes", so->sizes);
  sbind("teacher", so->teacher);
  sbind("synthetic-teacher", so->synthetic);
  sbind("teacher-seed", so->teacher_seed);
  sbind("dim", so->dim);
  sbind("train", so->train);
  sbind("dev", so->dev);
  sbind("task", so->task);
  sbind("features", so->features);
  sbind("header", so->header);
  sbind("distill-lr", so->distill_lr);
  sbind("distill-batch-size", so->distill_batch);
  sbind("distill-epochs", so->distill_epochs);
  sbind("val-fraction", so->val_fraction);
  sbind("lr-grid", so->lr_grid);
  sbind("max-epochs", so->max_epochs);
  sbind("batch-size", so->batch);
  sbind("head-hidden", so->head_hidden);
  sbind("emb-dim", so->emb);
  sbind("hidden-dim", so->hidden);
  sbind("seeds", so->seeds);
  sbind("workers", so->workers);
  sbind("plot-data", so->plot);
  sbind("out", so->out);

  auto* size = sweep->add_subcommand(
      "distill-size",
      "distill on corpus prefixes, then fine-tune the downstream task");
  size->add_option("--corpus", so->corpus,
                   "distillation corpus, one sentence per line (required)");
  size->add_option("--sizes", so->sizes,
                   "ascending corpus prefix sizes; 0 = undistilled baseline "
                   "(required)")
      ->delimiter(',');
  size->add_option("--teacher", so->teacher, "teacher embeddings JSONL");
  size->add_flag("--synthetic-teacher,!--no-synthetic-teacher", so->synthetic,
                 "use the built-in synthetic teacher instead of a file");
  size->add_option("--teacher-seed", so->teacher_seed,
                   "synthetic teacher seed")
      ->capture_default_str();
  size->add_option("--dim", so->dim, "synthetic teacher dimension")
      ->capture_default_str();
  size->add_option("--train", so->train, "training TSV (required)");
  size->add_option("--dev", so->dev, "development TSV (required)");
  size->add_option("--task", so->task, "'single' or 'pair'")
      ->capture_default_str();
  size->add_option("--features", so->features,
                   "head input: 'projected' or 'hidden'")
      ->capture_default_str();
  size->add_flag("--header,!--no-header", so->header,
                 "first TSV line is a header");
  size->add_option("--distill-lr", so->distill_lr, "distillation learning "
                                                   "rate")
      ->capture_default_str();
  size->add_option("--distill-batch-size", so->distill_batch,
                   "distillation minibatch size")
      ->capture_default_str();
  size->add_option("--distill-epochs", so->distill_epochs,
                   "distillation epochs per cell")
      ->capture_default_str();
  size->add_option("--val-fraction", so->val_fraction,
                   "held-out fraction of the corpus")
      ->capture_default_str();
  size->add_option("--lr-grid", so->lr_grid, "fine-tuning learning-rate grid")
      ->delimiter(',')
      ->capture_default_str();
  size->add_option("--max-epochs", so->max_epochs,
                   "fine-tuning epochs per run")
      ->capture_default_str();
  size->add_option("--batch-size", so->batch, "fine-tuning minibatch size")
      ->capture_default_str();
  size->add_option("--head-hidden", so->head_hidden,
                   "hidden layer widths of the MLP head")
      ->delimiter(',')
      ->capture_default_str();
  size->add_option("--emb-dim", so->emb, "student embedding dimension")
      ->capture_default_str();
  size->add_option("--hidden-dim", so->hidden,
                   "student LSTM hidden size per direction")
      ->capture_default_str();
  size->add_option("--seeds", so->seeds, "seeds averaged per size")
      ->delimiter(',')
      ->capture_default_str();
  size->add_option("--workers", so->workers, "gradient worker threads")
      ->capture_default_str();
  size->add_flag("--plot-data,!--no-plot-data", so->plot,
                 "accepted for symmetry; the CSV is already one row per size");
  size->add_option("--out", so->out, "output CSV path (required)");
  add_common(size, so->common);
  size->callback([so, &ctx] { run_sweep_distill_size(*so, ctx); });
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOpts {
  size_t seeds = 5;
  std::vector<std::string> known;
  CommonFlags common;
};

void run_gradcheck(const GradcheckOpts& o, const Ctx& ctx) {
  check_config_keys(ctx, o.known, "gradcheck");
  print_config({{"seeds", o.seeds}});

  const GradCheckReport report = run_gradient_checks(o.seeds);
  std::cout << "gradcheck: " << report.seeds << " seeds, step "
            << sci3(kGradCheckStep) << ", tol " << sci3(kGradCheckTol) << "\n";
  for (const auto& layer : report.layers) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %-10s (%zu coords)",
                  layer.layer.c_str(), sci3(layer.max_rel_err).c_str(),
                  layer.coords);
    std::cout << buf << "\n";
  }
  std::cout << "max rel err " << sci3(report.max_rel_err) << " at "
            << report.worst << "\n";
  if (!report.passed()) {
    std::cout << "FAIL\n";
    throw NumericError("gradcheck: max relative error " +
                       sci3(report.max_rel_err) + " exceeds " +
                       sci3(kGradCheckTol));
  }
  std::cout << "PASS\n";
}

void setup_gradcheck(CLI::App& app, const Ctx& ctx) {
  auto o = std::make_shared<GradcheckOpts>();
  Binder bind(ctx, o->known);
  bind("seeds", o->seeds);

  auto* sub = app.add_subcommand(
      "gradcheck",
      "finite-difference check of every layer through all three losses");
  sub->add_option("--seeds", o->seeds, "number of seeds to run")
      ->capture_default_str();
  add_common(sub, o->common);
  sub->callback([o, &ctx] { run_gradcheck(*o, ctx); });
}

// ---------------------------------------------------------------------------

std::optional<std::string> scan_value(const std::vector<std::string>& args,
                                      const std::string& name) {
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == name && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(name + "=", 0) == 0) {
      return args[i].substr(name.size() + 1);
    }
  }
  return std::nullopt;
}

uint64_t parse_seed_env(const char* value) {
  const std::string s = value;
  uint64_t seed = 0;
  size_t pos = 0;
  try {
    seed = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size() || s.empty()) {
    throw ParameterError("SRA_SEED must be an unsigned integer, got '" + s +
                         "'");
  }
  return seed;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App app{"student sentence-encoder distillation toolkit"};
  try {
    Ctx ctx;
    if (const char* env = std::getenv("SRA_SEED")) {
      ctx.seed_default = parse_seed_env(env);
    }
    ctx.paper = std::find(args.begin(), args.end(), "--paper-defaults") !=
                args.end();
    if (const auto config_path = scan_value(args, "--config")) {
      load_file_config(*config_path, ctx);
    }

    app.require_subcommand(1);
    app.set_version_flag("--version", kArtifactVersion);
    setup_teacher_synth(app, ctx);
    setup_distill(app, ctx);
    setup_finetune(app, ctx);
    setup_eval(app, ctx);
    setup_similarity(app, ctx);
    setup_augment(app, ctx);
    setup_bench(app, ctx);
    setup_sweep(app, ctx);
    setup_gradcheck(app, ctx);

    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  } catch (const sra::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const sra::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sra::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
