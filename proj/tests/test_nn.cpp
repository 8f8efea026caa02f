#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "sra/error.hpp"
#include "sra/nn.hpp"
#include "sra/rng.hpp"

using namespace sra;
using sra::test::check_gradients;
using sra::test::fd_partial;
using sra::test::kFdTol;

namespace {

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar re-derivation of the cell recurrence, kept independent of nn.cpp.
void lstm_cell_reference(const std::vector<double>& x,
                         const std::vector<double>& h_prev,
                         const std::vector<double>& c_prev,
                         const LstmParams& p, std::vector<double>& h_out,
                         std::vector<double>& c_out) {
  const size_t e = p.input_dim, h = p.hidden_dim;
  std::vector<double> xh(e + h);
  std::copy(x.begin(), x.end(), xh.begin());
  std::copy(h_prev.begin(), h_prev.end(), xh.begin() + e);
  h_out.assign(h, 0.0);
  c_out.assign(h, 0.0);
  for (size_t j = 0; j < h; ++j) {
    double zi = p.b_i.data[j], zf = p.b_f.data[j], zo = p.b_o.data[j],
           zg = p.b_g.data[j];
    for (size_t k = 0; k < e + h; ++k) {
      zi += p.w_i.at(j, k) * xh[k];
      zf += p.w_f.at(j, k) * xh[k];
      zo += p.w_o.at(j, k) * xh[k];
      zg += p.w_g.at(j, k) * xh[k];
    }
    const double i = sigmoid_ref(zi), f = sigmoid_ref(zf),
                 o = sigmoid_ref(zo), g = std::tanh(zg);
    c_out[j] = f * c_prev[j] + i * g;
    h_out[j] = o * std::tanh(c_out[j]);
  }
}

LstmParams random_cell(size_t e, size_t h, uint64_t seed) {
  LstmParams p = LstmParams::zeros(e, h);
  Rng rng(seed);
  p.init_uniform(rng, 0.5, 1.0);
  return p;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("lstm cell forward matches scalar reference") {
  const size_t e = 4, h = 3;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    LstmParams p = random_cell(e, h, seed);
    Rng rng(seed + 100);
    std::vector<double> x(e), h_prev(h), c_prev(h);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : h_prev) v = rng.uniform(-1, 1);
    for (auto& v : c_prev) v = rng.uniform(-1, 1);

    std::vector<double> h_out(h), c_out(h);
    lstm_cell_forward(x.data(), h_prev.data(), c_prev.data(), p, h_out.data(),
                      c_out.data(), nullptr);

    std::vector<double> h_ref, c_ref;
    lstm_cell_reference(x, h_prev, c_prev, p, h_ref, c_ref);
    for (size_t j = 0; j < h; ++j) {
      CHECK(h_out[j] == doctest::Approx(h_ref[j]).epsilon(1e-12));
      CHECK(c_out[j] == doctest::Approx(c_ref[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("lstm cell backward against finite differences") {
  const size_t e = 3, h = 2;
  for (uint64_t seed : {5ull, 6ull}) {
    LstmParams p = random_cell(e, h, seed);
    Rng rng(seed + 50);
    std::vector<double> x(e), h_prev(h), c_prev(h), a(h), b(h);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : h_prev) v = rng.uniform(-1, 1);
    for (auto& v : c_prev) v = rng.uniform(-1, 1);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);

    // L = a.h_t + b.c_t
    auto loss = [&] {
      std::vector<double> h_out(h), c_out(h);
      lstm_cell_forward(x.data(), h_prev.data(), c_prev.data(), p,
                        h_out.data(), c_out.data(), nullptr);
      double L = 0.0;
      for (size_t j = 0; j < h; ++j) L += a[j] * h_out[j] + b[j] * c_out[j];
      return L;
    };

    std::vector<double> h_out(h), c_out(h);
    LstmStepCache cache;
    lstm_cell_forward(x.data(), h_prev.data(), c_prev.data(), p, h_out.data(),
                      c_out.data(), &cache);
    LstmParams grads = LstmParams::zeros(e, h);
    std::vector<double> dx(e, 0.0), dh_prev(h, 0.0), dc_prev(h, 0.0);
    lstm_cell_backward(p, cache, a.data(), b.data(), grads, dx.data(),
                       dh_prev.data(), dc_prev.data());

    ParamRefs params, grad_refs;
    p.collect_params("cell", params);
    grads.collect_params("cell", grad_refs);
    auto report = check_gradients(loss, params, grad_refs);
    CHECK(report.max_rel <= kFdTol);

    for (size_t k = 0; k < e; ++k) {
      CHECK(sra::test::rel_err(dx[k], fd_partial(loss, &x[k])) <= kFdTol);
    }
    for (size_t j = 0; j < h; ++j) {
      CHECK(sra::test::rel_err(dh_prev[j], fd_partial(loss, &h_prev[j])) <=
            kFdTol);
      CHECK(sra::test::rel_err(dc_prev[j], fd_partial(loss, &c_prev[j])) <=
            kFdTol);
    }
  }
}

TEST_CASE("encoder backward against finite differences, cosine loss") {
  EncoderConfig cfg;
  cfg.vocab_size = 9;
  cfg.emb_dim = 3;
  cfg.hidden_dim = 2;
  cfg.teacher_dim = 4;
  for (uint64_t seed : {11ull, 12ull, 13ull}) {
    Rng rng(seed);
    StudentEncoder enc = StudentEncoder::create(cfg, rng);
    Tensor t = uniform_init(rng, {cfg.teacher_dim}, -1.0, 1.0);
    const std::vector<int32_t> tokens{3, 4, 5, 3};

    auto loss = [&] { return cosine_distill_loss(t, enc.forward(tokens)); };

    EncoderTrace trace;
    Tensor s = enc.forward(tokens, &trace);
    StudentEncoder grads = StudentEncoder::zeros(cfg);
    enc.backward(trace, cosine_distill_backward(t, s), grads);

    auto report = check_gradients(loss, enc.params(), grads.params());
    CHECK(report.max_rel <= kFdTol);
    // The untouched embedding rows must have exactly zero gradient.
    for (size_t j = 0; j < cfg.emb_dim; ++j) {
      CHECK(grads.embedding.at(7, j) == 0.0);
    }
  }
}

TEST_CASE("encoder hidden-path backward against finite differences") {
  EncoderConfig cfg;
  cfg.vocab_size = 6;
  cfg.emb_dim = 2;
  cfg.hidden_dim = 3;
  cfg.teacher_dim = 2;
  Rng rng(31);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);
  Tensor a = uniform_init(rng, {2 * cfg.hidden_dim}, -1.0, 1.0);
  const std::vector<int32_t> tokens{1, 2, 3};

  auto loss = [&] { return dot(a, enc.encode_hidden(tokens)); };

  EncoderTrace trace;
  enc.encode_hidden(tokens, &trace);
  StudentEncoder grads = StudentEncoder::zeros(cfg);
  enc.backward_from_hidden(trace, a, grads);

  auto report = check_gradients(loss, enc.params(), grads.params());
  CHECK(report.max_rel <= kFdTol);
  // proj is not on the hidden path.
  for (double g : grads.proj.data) CHECK(g == 0.0);
}

TEST_CASE("mlp forward and backward") {
  MlpConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden = {3};
  cfg.num_classes = 2;
  Rng rng(17);
  MlpHead head = MlpHead::create(cfg, rng);
  Tensor x = uniform_init(rng, {4}, -1.0, 1.0);
  const int label = 1;

  auto loss = [&] { return softmax_cross_entropy(head.forward(x), label); };

  MlpTrace trace;
  Tensor logits = head.forward(x, &trace);
  CHECK(logits.size() == 2);
  MlpHead grads = MlpHead::zeros(cfg);
  Tensor d_input;
  head.backward(trace, softmax_cross_entropy_backward(logits, label), grads,
                &d_input);

  auto report = check_gradients(loss, head.params(), grads.params());
  CHECK(report.max_rel <= kFdTol);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(sra::test::rel_err(d_input.data[i], fd_partial(loss, &x.data[i])) <=
          kFdTol);
  }
}

TEST_CASE("mlp with no hidden layers is a linear classifier") {
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden = {};
  cfg.num_classes = 3;
  MlpHead head = MlpHead::zeros(cfg);
  head.weights[0].at(2, 1) = 2.0;
  head.biases[0].data[0] = -1.0;
  Tensor out = head.forward(Tensor::vector({5.0, 4.0}));
  CHECK(out.data == std::vector<double>{-1.0, 0.0, 8.0});
}

TEST_CASE("cosine loss contract") {
  Tensor t = Tensor::vector({0.3, -0.2, 0.9});
  CHECK(cosine_distill_loss(t, t) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_distill_loss(t, scale(t, -1.0)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  Tensor orth = Tensor::vector({0.2, 0.3, 0.0});
  orth.data[2] = -(t.data[0] * orth.data[0] + t.data[1] * orth.data[1]) /
                 t.data[2];
  CHECK(cosine_distill_loss(t, orth) == doctest::Approx(0.5).epsilon(1e-12));
  // Scale invariance in the student argument.
  Tensor s = Tensor::vector({0.5, 0.1, -0.4});
  for (double c : {0.1, 10.0}) {
    CHECK(std::fabs(cosine_distill_loss(t, scale(s, c)) -
                    cosine_distill_loss(t, s)) < 1e-12);
  }
  CHECK_THROWS_AS(cosine_distill_loss(t, Tensor::vector({0, 0, 0})),
                  DegenerateVectorError);
  CHECK_THROWS_AS(cosine_distill_loss(Tensor::vector({0, 0, 0}), s),
                  DegenerateVectorError);

  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    Tensor u = uniform_init(rng, {5}, -2.0, 2.0);
    Tensor v = uniform_init(rng, {5}, -2.0, 2.0);
    double loss = cosine_distill_loss(u, v);
    CHECK(loss >= 0.0);
    CHECK(loss <= 1.0);
  }
}

TEST_CASE("cosine loss backward against finite differences") {
  Rng rng(41);
  Tensor t = uniform_init(rng, {6}, -1.0, 1.0);
  Tensor s = uniform_init(rng, {6}, -1.0, 1.0);
  Tensor d = cosine_distill_backward(t, s);
  auto loss = [&] { return cosine_distill_loss(t, s); };
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(sra::test::rel_err(d.data[i], fd_partial(loss, &s.data[i])) <=
          kFdTol);
  }
}

TEST_CASE("softmax cross entropy values and gradient") {
  Tensor logits = Tensor::vector({0.0, 0.0});
  CHECK(softmax_cross_entropy(logits, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Tensor p = softmax(logits);
  CHECK(p.data[0] == doctest::Approx(0.5));
  CHECK(p.data[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(softmax_cross_entropy(logits, 2), LabelError);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, -1), LabelError);

  // Shift invariance and large-logit stability.
  Tensor big = Tensor::vector({1000.0, 999.0});
  CHECK(std::isfinite(softmax_cross_entropy(big, 1)));
  Tensor shifted = Tensor::vector({3.0 + 100, -1.0 + 100, 0.5 + 100});
  Tensor base = Tensor::vector({3.0, -1.0, 0.5});
  CHECK(softmax_cross_entropy(shifted, 1) ==
        doctest::Approx(softmax_cross_entropy(base, 1)).epsilon(1e-12));

  Rng rng(9);
  Tensor z = uniform_init(rng, {4}, -2.0, 2.0);
  Tensor g = softmax_cross_entropy_backward(z, 2);
  auto loss = [&] { return softmax_cross_entropy(z, 2); };
  for (size_t i = 0; i < z.size(); ++i) {
    CHECK(sra::test::rel_err(g.data[i], fd_partial(loss, &z.data[i])) <=
          kFdTol);
  }
  // Gradient sums to zero (softmax minus one-hot).
  double sum = 0.0;
  for (double v : g.data) sum += v;
  CHECK(std::fabs(sum) < 1e-12);
}

TEST_CASE("mse logit loss value and gradient") {
  Tensor s = Tensor::vector({1.0, 2.0});
  Tensor t = Tensor::vector({0.0, 0.0});
  CHECK(mse_logit_loss(s, t) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(mse_logit_loss(t, t) == 0.0);
  CHECK_THROWS_AS(mse_logit_loss(s, Tensor::vector({1.0})), DimensionError);

  Rng rng(10);
  Tensor a = uniform_init(rng, {3}, -2.0, 2.0);
  Tensor b = uniform_init(rng, {3}, -2.0, 2.0);
  Tensor g = mse_logit_backward(a, b);
  auto loss = [&] { return mse_logit_loss(a, b); };
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(sra::test::rel_err(g.data[i], fd_partial(loss, &a.data[i])) <=
          kFdTol);
  }
}

TEST_CASE("adam first two steps match the closed form") {
  Tensor theta = Tensor::vector({0.0});
  Tensor grad = Tensor::vector({1.0});
  ParamRefs params{{"theta", &theta}};
  ParamRefs grads{{"theta", &grad}};
  Adam adam(AdamConfig{}, params);
  adam.step(params, grads);
  CHECK(std::fabs(theta.data[0] + 0.001) < 1e-9);
  adam.step(params, grads);
  CHECK(std::fabs(theta.data[0] + 0.002) < 1e-9);
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam validates shapes and rejects non-finite gradients") {
  Tensor theta = Tensor::vector({0.0, 1.0});
  ParamRefs params{{"theta", &theta}};
  Adam adam(AdamConfig{}, params);

  Tensor bad_shape = Tensor::vector({0.0});
  ParamRefs bad{{"theta", &bad_shape}};
  CHECK_THROWS_AS(adam.step(params, bad), DimensionError);

  Tensor nan_grad = Tensor::vector({0.0, std::nan("")});
  ParamRefs nan_refs{{"theta", &nan_grad}};
  Tensor before = theta;
  CHECK_THROWS_AS(adam.step(params, nan_refs), NumericError);
  CHECK(theta.data == before.data);  // failed step mutates nothing
}

TEST_CASE("encoder rejects bad inputs") {
  EncoderConfig cfg;
  cfg.vocab_size = 5;
  cfg.emb_dim = 2;
  cfg.hidden_dim = 2;
  cfg.teacher_dim = 3;
  Rng rng(1);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);
  CHECK_THROWS_AS(enc.forward({}), EmptyInputError);
  CHECK_THROWS_AS(enc.forward({0, 5}), VocabularyError);
  CHECK_THROWS_AS(enc.forward({-1}), VocabularyError);
}

TEST_CASE("encoder init: uniform bounds and forget bias") {
  EncoderConfig cfg;
  cfg.vocab_size = 20;
  cfg.emb_dim = 4;
  cfg.hidden_dim = 3;
  cfg.teacher_dim = 5;
  Rng rng(2);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);
  for (double v : enc.fwd.w_i.data) {
    CHECK(v >= -0.08);
    CHECK(v < 0.08);
  }
  for (double v : enc.bwd.b_f.data) CHECK(v == 1.0);
  for (double v : enc.fwd.b_i.data) CHECK(v == 0.0);
  for (double v : enc.embedding.data) {
    CHECK(v >= -0.1);
    CHECK(v < 0.1);
  }
  Rng rng2(2);
  StudentEncoder enc2 = StudentEncoder::create(cfg, rng2);
  CHECK(enc.proj.data == enc2.proj.data);
}

TEST_CASE("batched forward is bit-identical to per-sentence forward") {
  EncoderConfig cfg;
  cfg.vocab_size = 30;
  cfg.emb_dim = 5;
  cfg.hidden_dim = 4;
  cfg.teacher_dim = 6;
  Rng rng(77);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);

  std::vector<std::vector<int32_t>> rows;
  std::vector<int32_t> lengths;
  Rng data_rng(78);
  const size_t width = 7;
  for (int i = 0; i < 9; ++i) {
    size_t len = 1 + data_rng.next_below(width);
    std::vector<int32_t> row(width, 0);
    for (size_t t = 0; t < len; ++t) {
      row[t] = static_cast<int32_t>(1 + data_rng.next_below(29));
    }
    rows.push_back(row);
    lengths.push_back(static_cast<int32_t>(len));
  }

  Tensor batch_s = enc.forward_batch(rows, lengths);
  Tensor batch_h = enc.forward_batch_hidden(rows, lengths);
  for (size_t i = 0; i < rows.size(); ++i) {
    std::vector<int32_t> true_tokens(rows[i].begin(),
                                     rows[i].begin() + lengths[i]);
    Tensor s = enc.forward(true_tokens);
    Tensor h = enc.encode_hidden(true_tokens);
    for (size_t j = 0; j < s.size(); ++j) {
      CHECK(batch_s.at(i, j) == s.data[j]);
    }
    for (size_t j = 0; j < h.size(); ++j) {
      CHECK(batch_h.at(i, j) == h.data[j]);
    }
  }
}

TEST_CASE("bilstm_encode concatenates final states of both directions") {
  const size_t e = 2, h = 2;
  LstmParams fwd = random_cell(e, h, 3);
  LstmParams bwd = random_cell(e, h, 4);
  Rng rng(5);
  std::vector<Tensor> xs;
  for (int t = 0; t < 3; ++t) xs.push_back(uniform_init(rng, {e}, -1.0, 1.0));

  Tensor H = bilstm_encode(xs, fwd, bwd);
  REQUIRE(H.size() == 2 * h);

  // Forward half: run the reference cell along t = 0..2.
  std::vector<double> hf(h, 0.0), cf(h, 0.0);
  for (const auto& x : xs) {
    std::vector<double> hn, cn;
    lstm_cell_reference(x.data, hf, cf, fwd, hn, cn);
    hf = hn;
    cf = cn;
  }
  // Backward half: reversed input order.
  std::vector<double> hb(h, 0.0), cb(h, 0.0);
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) {
    std::vector<double> hn, cn;
    lstm_cell_reference(it->data, hb, cb, bwd, hn, cn);
    hb = hn;
    cb = cn;
  }
  for (size_t j = 0; j < h; ++j) {
    CHECK(H.data[j] == doctest::Approx(hf[j]).epsilon(1e-12));
    CHECK(H.data[h + j] == doctest::Approx(hb[j]).epsilon(1e-12));
  }
}

TEST_CASE("encoder output lies in (-1,1) and matches tanh(proj.H)") {
  EncoderConfig cfg;
  cfg.vocab_size = 12;
  cfg.emb_dim = 3;
  cfg.hidden_dim = 2;
  cfg.teacher_dim = 4;
  Rng rng(8);
  StudentEncoder enc = StudentEncoder::create(cfg, rng);
  std::vector<int32_t> tokens{2, 7, 1};
  Tensor s = enc.forward(tokens);
  Tensor H = enc.encode_hidden(tokens);
  for (size_t j = 0; j < s.size(); ++j) {
    CHECK(std::fabs(s.data[j]) < 1.0);
    double z = 0.0;
    for (size_t k = 0; k < H.size(); ++k) z += enc.proj.at(j, k) * H.data[k];
    CHECK(s.data[j] == doctest::Approx(std::tanh(z)).epsilon(1e-12));
  }
}

}  // TEST_SUITE
