#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "sra/checkpoint.hpp"
#include "sra/distill.hpp"
#include "sra/error.hpp"
#include "tmpdir.hpp"

using namespace sra;
using sra::test::TempDir;
using sra::test::slurp;

namespace {

const char* kWords[] = {"red",  "green", "blue",  "cat",  "dog",
                        "bird", "runs",  "walks", "sees", "holds"};

std::vector<std::string> word_soup(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    size_t len = 2 + rng.next_below(5);
    std::string s;
    for (size_t t = 0; t < len; ++t) {
      if (t) s += " ";
      s += kWords[rng.next_below(10)];
    }
    out.push_back(s);
  }
  return out;
}

EncoderConfig tiny_config(size_t vocab_size) {
  EncoderConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.emb_dim = 6;
  cfg.hidden_dim = 4;
  cfg.teacher_dim = 8;
  return cfg;
}

}  // namespace

TEST_SUITE("distill") {

TEST_CASE("loss falls and history is well-formed") {
  auto corpus = word_soup(60, 1);
  Vocabulary vocab = Vocabulary::from_texts(corpus);
  SyntheticTeacher teacher(5, 8);
  EncoderConfig cfg = tiny_config(vocab.size());
  Rng rng(2);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);

  DistillConfig dcfg;
  dcfg.lr = 3e-3;
  dcfg.batch_size = 8;
  dcfg.epochs = 6;
  dcfg.seed = 11;
  dcfg.validation_fraction = 0.1;

  DistillResult res = distill(corpus, teacher, enc, vocab, dcfg);
  REQUIRE(res.train_loss.size() == 6);
  REQUIRE(res.val_loss.size() == 6);
  CHECK(res.train_sentences == 54);
  CHECK(res.val_sentences == 6);
  for (double l : res.train_loss) {
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
  }
  CHECK(res.train_loss.back() < res.train_loss.front());
  CHECK(res.val_loss.back() < res.initial_val_loss);
  CHECK(res.best_epoch >= 1);
  CHECK(res.best_epoch <= 6);
  CHECK(res.best_val_loss ==
        *std::min_element(res.val_loss.begin(), res.val_loss.end()));
  CHECK(res.skipped == 0);
}

TEST_CASE("fixed seed gives bit-identical histories and checkpoints") {
  auto corpus = word_soup(40, 3);
  Vocabulary vocab = Vocabulary::from_texts(corpus);
  SyntheticTeacher teacher(9, 8);
  EncoderConfig cfg = tiny_config(vocab.size());

  auto run = [&](const std::string& dir) {
    Rng rng(4);
    StudentEncoder enc = StudentEncoder::create(cfg, rng);
    DistillConfig dcfg;
    dcfg.lr = 1e-3;
    dcfg.batch_size = 8;
    dcfg.epochs = 3;
    dcfg.seed = 21;
    dcfg.checkpoint_dir = dir;
    return distill(corpus, teacher, enc, vocab, dcfg);
  };

  TempDir d1("det1"), d2("det2");
  DistillResult r1 = run(d1.file("ck"));
  DistillResult r2 = run(d2.file("ck"));
  CHECK(r1.train_loss == r2.train_loss);
  CHECK(r1.val_loss == r2.val_loss);
  CHECK(slurp(r1.final_checkpoint) == slurp(r2.final_checkpoint));
  CHECK(slurp(r1.best_checkpoint) == slurp(r2.best_checkpoint));
  CHECK(slurp(d1.file("ck/history.csv")) == slurp(d2.file("ck/history.csv")));

  // history.csv has one row per epoch plus a header.
  std::string csv = slurp(d1.file("ck/history.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("epoch,train_loss,val_loss", 0) == 0);

  // The final checkpoint reloads to the trained weights (f32-quantized).
  Rng rng(4);
  StudentEncoder fresh = StudentEncoder::create(cfg, rng);
  DistillConfig dcfg;
  dcfg.lr = 1e-3;
  dcfg.batch_size = 8;
  dcfg.epochs = 3;
  dcfg.seed = 21;
  DistillResult r3 = distill(corpus, teacher, fresh, vocab, dcfg);
  CHECK(r3.train_loss == r1.train_loss);
  EncoderCheckpoint loaded = load_encoder_checkpoint(r1.final_checkpoint);
  for (size_t i = 0; i < fresh.proj.data.size(); ++i) {
    CHECK(loaded.encoder.proj.data[i] == to_f32(fresh.proj.data[i]));
  }
}

TEST_CASE("freeze_embeddings keeps the table bit-identical") {
  auto corpus = word_soup(30, 6);
  Vocabulary vocab = Vocabulary::from_texts(corpus);
  SyntheticTeacher teacher(2, 8);
  EncoderConfig cfg = tiny_config(vocab.size());
  Rng rng(5);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);
  const std::vector<double> before = enc.embedding.data;
  const std::vector<double> proj_before = enc.proj.data;

  DistillConfig dcfg;
  dcfg.lr = 3e-3;
  dcfg.batch_size = 8;
  dcfg.epochs = 2;
  dcfg.seed = 31;
  dcfg.freeze_embeddings = true;
  distill(corpus, teacher, enc, vocab, dcfg);
  CHECK(enc.embedding.data == before);
  CHECK(enc.proj.data != proj_before);
}

TEST_CASE("explicit validation set and validate_distill") {
  auto corpus = word_soup(30, 8);
  auto held_out = word_soup(10, 9);
  Vocabulary vocab = Vocabulary::from_texts(corpus);
  SyntheticTeacher teacher(7, 8);
  EncoderConfig cfg = tiny_config(vocab.size());
  Rng rng(6);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);

  DistillConfig dcfg;
  dcfg.lr = 1e-3;
  dcfg.batch_size = 8;
  dcfg.epochs = 2;
  dcfg.seed = 41;
  DistillResult res = distill(corpus, teacher, enc, vocab, dcfg, &held_out);
  CHECK(res.train_sentences == 30);
  CHECK(res.val_sentences == 10);
  double check = validate_distill(enc, teacher, held_out, vocab);
  CHECK(res.val_loss.back() == check);

  CHECK_THROWS_AS(validate_distill(enc, teacher, {}, vocab), EmptyInputError);
}

TEST_CASE("coverage misses are fatal and name the sentence") {
  TempDir dir("cov");
  auto corpus = word_soup(12, 10);
  Vocabulary vocab = Vocabulary::from_texts(corpus);
  SyntheticTeacher synth(3, 8);
  auto path = dir.file("t.jsonl");
  std::vector<std::string> partial(corpus.begin(), corpus.end() - 1);
  export_teacher_file(synth, partial, path);
  FileTeacher teacher = FileTeacher::load(path);

  EncoderConfig cfg = tiny_config(vocab.size());
  Rng rng(7);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);
  DistillConfig dcfg;
  dcfg.epochs = 1;
  try {
    distill(corpus, teacher, enc, vocab, dcfg);
    FAIL("expected CoverageError");
  } catch (const CoverageError& e) {
    CHECK(std::string(e.what()).find(normalize_for_id(corpus.back())) !=
          std::string::npos);
  }
}

TEST_CASE("input validation") {
  auto corpus = word_soup(10, 11);
  Vocabulary vocab = Vocabulary::from_texts(corpus);
  SyntheticTeacher teacher(1, 8);
  EncoderConfig cfg = tiny_config(vocab.size());
  Rng rng(8);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);

  DistillConfig dcfg;
  CHECK_THROWS_AS(distill({}, teacher, enc, vocab, dcfg), EmptyInputError);

  DistillConfig bad = dcfg;
  bad.validation_fraction = 1.0;
  CHECK_THROWS_AS(distill(corpus, teacher, enc, vocab, bad), ParameterError);
  bad = dcfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(distill(corpus, teacher, enc, vocab, bad), ParameterError);
  bad = dcfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(distill(corpus, teacher, enc, vocab, bad), ParameterError);

  SyntheticTeacher wrong_dim(1, 5);
  CHECK_THROWS_AS(distill(corpus, wrong_dim, enc, vocab, dcfg),
                  DimensionError);
}

TEST_CASE("two workers are deterministic too") {
  auto corpus = word_soup(24, 13);
  Vocabulary vocab = Vocabulary::from_texts(corpus);
  SyntheticTeacher teacher(4, 8);
  EncoderConfig cfg = tiny_config(vocab.size());

  auto run = [&] {
    Rng rng(9);
    StudentEncoder enc = StudentEncoder::create(cfg, rng);
    DistillConfig dcfg;
    dcfg.lr = 1e-3;
    dcfg.batch_size = 8;
    dcfg.epochs = 2;
    dcfg.seed = 51;
    dcfg.workers = 2;
    return distill(corpus, teacher, enc, vocab, dcfg);
  };
  DistillResult a = run();
  DistillResult b = run();
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.val_loss == b.val_loss);
}

}  // TEST_SUITE
