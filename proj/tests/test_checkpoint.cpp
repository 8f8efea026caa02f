#include <doctest.h>

#include "sra/checkpoint.hpp"
#include "sra/error.hpp"
#include "sra/rng.hpp"
#include "tmpdir.hpp"

using namespace sra;
using sra::test::TempDir;
using sra::test::slurp;

namespace {

StudentEncoder small_encoder(uint64_t seed) {
  EncoderConfig cfg;
  cfg.vocab_size = 6;
  cfg.emb_dim = 3;
  cfg.hidden_dim = 2;
  cfg.teacher_dim = 4;
  Rng rng(seed);
  return StudentEncoder::create(cfg, rng);
}

Vocabulary small_vocab() {
  return Vocabulary::from_texts({"cat dog bird"});
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save -> load -> save is byte-identical") {
  TempDir dir("ckpt");
  StudentEncoder enc = small_encoder(1);
  Vocabulary vocab = small_vocab();
  auto p1 = dir.file("a.ckpt");
  save_encoder_checkpoint(p1, enc, vocab, "distilled", "",
                          {{"note", "unit"}});

  EncoderCheckpoint loaded = load_encoder_checkpoint(p1);
  auto p2 = dir.file("b.ckpt");
  save_encoder_checkpoint(p2, loaded.encoder, loaded.vocab, loaded.meta.stage,
                          loaded.meta.parent_digest, loaded.meta.extra);
  CHECK(slurp(p1) == slurp(p2));
  CHECK_FALSE(slurp(p1).empty());
}

TEST_CASE("round trip preserves parameters, vocab, and metadata") {
  TempDir dir("ckpt2");
  StudentEncoder enc = small_encoder(7);
  // Storage is f32; start from representable values so equality is exact.
  for (auto ref : enc.params()) {
    for (auto& v : ref.tensor->data) v = to_f32(v);
  }
  Vocabulary vocab = small_vocab();
  auto p = dir.file("e.ckpt");
  save_encoder_checkpoint(p, enc, vocab, "distilled", "feedbeef",
                          {{"lr", "0.001"}, {"seed", "7"}});

  EncoderCheckpoint back = load_encoder_checkpoint(p);
  CHECK(back.encoder.embedding.data == enc.embedding.data);
  CHECK(back.encoder.fwd.w_g.data == enc.fwd.w_g.data);
  CHECK(back.encoder.bwd.b_f.data == enc.bwd.b_f.data);
  CHECK(back.encoder.proj.data == enc.proj.data);
  CHECK(back.vocab.tokens() == vocab.tokens());
  CHECK(back.meta.stage == "distilled");
  CHECK(back.meta.parent_digest == "feedbeef");
  CHECK(back.meta.rng_algorithm == kRngAlgorithm);
  REQUIRE(back.meta.extra.size() == 2);
  CHECK(back.meta.extra[0] == std::pair<std::string, std::string>{"lr",
                                                                   "0.001"});
}

TEST_CASE("weights survive at f32 precision exactly") {
  // Stored tensors are f32; params produced by training are doubles. The
  // round trip must equal an explicit f32 quantization, not the raw double.
  TempDir dir("quant");
  StudentEncoder enc = small_encoder(3);
  enc.proj.data[0] = 0.1234567890123456789;  // not representable in f32
  Vocabulary vocab = small_vocab();
  auto p = dir.file("q.ckpt");
  save_encoder_checkpoint(p, enc, vocab, "distilled", "");
  EncoderCheckpoint back = load_encoder_checkpoint(p);
  CHECK(back.encoder.proj.data[0] == to_f32(enc.proj.data[0]));
  CHECK(back.encoder.proj.data[0] !=
        0.1234567890123456789);  // double precision would be a format change
}

TEST_CASE("corrupt files fail loudly") {
  TempDir dir("corrupt");
  StudentEncoder enc = small_encoder(2);
  Vocabulary vocab = small_vocab();
  auto p = dir.file("good.ckpt");
  save_encoder_checkpoint(p, enc, vocab, "distilled", "");
  std::string blob = slurp(p);

  auto bad_magic = blob;
  bad_magic[0] = 'X';
  dir.write("bad_magic.ckpt", bad_magic);
  CHECK_THROWS_AS(load_checkpoint(dir.file("bad_magic.ckpt")), FormatError);

  dir.write("truncated.ckpt", blob.substr(0, blob.size() - 7));
  CHECK_THROWS_AS(load_checkpoint(dir.file("truncated.ckpt")), FormatError);

  dir.write("trailing.ckpt", blob + "x");
  CHECK_THROWS_AS(load_checkpoint(dir.file("trailing.ckpt")), FormatError);

  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.ckpt")), IoError);
}

TEST_CASE("stage and vocabulary validation") {
  TempDir dir("meta");
  StudentEncoder enc = small_encoder(4);
  Vocabulary vocab = small_vocab();
  CHECK_THROWS_AS(
      save_encoder_checkpoint(dir.file("x.ckpt"), enc, Vocabulary{},
                              "distilled", ""),
      DimensionError);

  CheckpointMeta meta;
  meta.emb_dim = 3;
  meta.hidden_dim = 2;
  meta.teacher_dim = 4;
  meta.vocab_size = vocab.size();
  meta.rng_algorithm = kRngAlgorithm;
  meta.stage = "imaginary";
  meta.vocab = vocab.tokens();
  auto p = dir.file("stage.ckpt");
  save_checkpoint(p, meta, enc.named_tensors());
  CHECK_THROWS_AS(load_checkpoint(p), FormatError);
}

TEST_CASE("missing tensors are reported by name") {
  TempDir dir("missing-tensor");
  StudentEncoder enc = small_encoder(5);
  Vocabulary vocab = small_vocab();
  CheckpointMeta meta;
  meta.emb_dim = 3;
  meta.hidden_dim = 2;
  meta.teacher_dim = 4;
  meta.vocab_size = vocab.size();
  meta.rng_algorithm = kRngAlgorithm;
  meta.stage = "distilled";
  meta.vocab = vocab.tokens();
  NamedTensorViews views = enc.named_tensors();
  views.pop_back();  // drop proj
  auto p = dir.file("m.ckpt");
  save_checkpoint(p, meta, views);
  try {
    load_encoder_checkpoint(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("proj") != std::string::npos);
  }
}

}  // TEST_SUITE
