#include "sra/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sra {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// pre[j] = sum_k w[j,k]*xh[k] + b[j], accumulated in ascending k so the
// per-sentence and batched paths produce identical values.
void gate_preact(const Tensor& w, const Tensor& b, const std::vector<double>& xh,
                 std::vector<double>& pre) {
  const size_t h = w.shape[0], k = w.shape[1];
  pre.resize(h);
  for (size_t j = 0; j < h; ++j) {
    const double* wrow = w.data.data() + j * k;
    double acc = 0.0;
    for (size_t kk = 0; kk < k; ++kk) acc += wrow[kk] * xh[kk];
    pre[j] = acc + b.data[j];
  }
}

// grads_w += dpre (outer) xh; grads_b += dpre; dxh += w^T dpre
void gate_backward(const Tensor& w, const std::vector<double>& dpre,
                   const std::vector<double>& xh, Tensor& grads_w,
                   Tensor& grads_b, std::vector<double>& dxh) {
  const size_t h = w.shape[0], k = w.shape[1];
  for (size_t j = 0; j < h; ++j) {
    const double d = dpre[j];
    grads_b.data[j] += d;
    double* gw = grads_w.data.data() + j * k;
    const double* wrow = w.data.data() + j * k;
    for (size_t kk = 0; kk < k; ++kk) {
      gw[kk] += d * xh[kk];
      dxh[kk] += wrow[kk] * d;
    }
  }
}

std::vector<double> run_lstm(const LstmParams& p,
                             const std::vector<const double*>& xs,
                             DirectionTrace* trace) {
  const size_t h = p.hidden_dim;
  std::vector<double> hidden(h, 0.0), cell(h, 0.0);
  if (trace) {
    trace->steps.clear();
    trace->steps.resize(xs.size());
  }
  for (size_t t = 0; t < xs.size(); ++t) {
    lstm_cell_forward(xs[t], hidden.data(), cell.data(), p, hidden.data(),
                      cell.data(), trace ? &trace->steps[t] : nullptr);
  }
  return hidden;
}

// Walks the unrolled direction backwards. dh_final lands on the last step's
// h; d_inputs[t] receives dLoss/dx at processing step t.
void backprop_lstm(const LstmParams& p, const DirectionTrace& trace,
                   const std::vector<double>& dh_final, LstmParams& grads,
                   std::vector<std::vector<double>>& d_inputs) {
  const size_t h = p.hidden_dim, e = p.input_dim;
  const size_t n = trace.steps.size();
  d_inputs.assign(n, std::vector<double>(e, 0.0));
  std::vector<double> dh = dh_final, dc(h, 0.0);
  std::vector<double> dh_prev(h), dc_prev(h);
  for (size_t s = n; s-- > 0;) {
    lstm_cell_backward(p, trace.steps[s], dh.data(), dc.data(), grads,
                       d_inputs[s].data(), dh_prev.data(), dc_prev.data());
    dh = dh_prev;
    dc = dc_prev;
  }
}

void check_token_ids(const std::vector<int32_t>& tokens, size_t vocab_size) {
  if (tokens.empty()) throw EmptyInputError("encoder: empty token sequence");
  for (int32_t id : tokens) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size) {
      throw VocabularyError("token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(vocab_size));
    }
  }
}

// Gate weights stacked in i,f,o,g order and transposed to (E+h) x 4h for the
// batched matmul path.
Tensor stacked_gates_transposed(const LstmParams& p) {
  const size_t h = p.hidden_dim, k = p.input_dim + p.hidden_dim;
  Tensor wt = Tensor::zeros({k, 4 * h});
  const Tensor* gates[4] = {&p.w_i, &p.w_f, &p.w_o, &p.w_g};
  for (size_t gi = 0; gi < 4; ++gi) {
    const Tensor& w = *gates[gi];
    for (size_t j = 0; j < h; ++j)
      for (size_t kk = 0; kk < k; ++kk)
        wt.at(kk, gi * h + j) = w.at(j, kk);
  }
  return wt;
}

}  // namespace

// ---------------------------------------------------------------------------
// LstmParams

LstmParams LstmParams::zeros(size_t input_dim, size_t hidden_dim) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::vector<size_t> wshape{hidden_dim, input_dim + hidden_dim};
  p.w_i = Tensor::zeros(wshape);
  p.w_f = Tensor::zeros(wshape);
  p.w_o = Tensor::zeros(wshape);
  p.w_g = Tensor::zeros(wshape);
  p.b_i = Tensor::zeros({hidden_dim});
  p.b_f = Tensor::zeros({hidden_dim});
  p.b_o = Tensor::zeros({hidden_dim});
  p.b_g = Tensor::zeros({hidden_dim});
  return p;
}

void LstmParams::init_uniform(Rng& rng, double scale, double forget_bias) {
  for (Tensor* w : {&w_i, &w_f, &w_o, &w_g}) {
    for (double& x : w->data) x = rng.uniform(-scale, scale);
  }
  b_i.fill(0.0);
  b_f.fill(forget_bias);
  b_o.fill(0.0);
  b_g.fill(0.0);
}

void LstmParams::collect_params(const std::string& prefix, ParamRefs& out) {
  out.push_back({prefix + ".w_i", &w_i});
  out.push_back({prefix + ".w_f", &w_f});
  out.push_back({prefix + ".w_o", &w_o});
  out.push_back({prefix + ".w_g", &w_g});
  out.push_back({prefix + ".b_i", &b_i});
  out.push_back({prefix + ".b_f", &b_f});
  out.push_back({prefix + ".b_o", &b_o});
  out.push_back({prefix + ".b_g", &b_g});
}

void LstmParams::collect_views(const std::string& prefix,
                               NamedTensorViews& out) const {
  out.push_back({prefix + ".w_i", &w_i});
  out.push_back({prefix + ".w_f", &w_f});
  out.push_back({prefix + ".w_o", &w_o});
  out.push_back({prefix + ".w_g", &w_g});
  out.push_back({prefix + ".b_i", &b_i});
  out.push_back({prefix + ".b_f", &b_f});
  out.push_back({prefix + ".b_o", &b_o});
  out.push_back({prefix + ".b_g", &b_g});
}

// ---------------------------------------------------------------------------
// LSTM cell

void lstm_cell_forward(const double* x, const double* h_prev,
                       const double* c_prev, const LstmParams& p,
                       double* h_out, double* c_out, LstmStepCache* cache) {
  const size_t e = p.input_dim, h = p.hidden_dim;
  std::vector<double> xh(e + h);
  std::memcpy(xh.data(), x, e * sizeof(double));
  std::memcpy(xh.data() + e, h_prev, h * sizeof(double));

  std::vector<double> gi, gf, go, gg;
  gate_preact(p.w_i, p.b_i, xh, gi);
  gate_preact(p.w_f, p.b_f, xh, gf);
  gate_preact(p.w_o, p.b_o, xh, go);
  gate_preact(p.w_g, p.b_g, xh, gg);
  for (size_t j = 0; j < h; ++j) {
    gi[j] = sigmoid(gi[j]);
    gf[j] = sigmoid(gf[j]);
    go[j] = sigmoid(go[j]);
    gg[j] = std::tanh(gg[j]);
  }

  std::vector<double> c_prev_copy(c_prev, c_prev + h);
  std::vector<double> c_new(h), tanh_c(h);
  for (size_t j = 0; j < h; ++j) {
    c_new[j] = gf[j] * c_prev_copy[j] + gi[j] * gg[j];
    tanh_c[j] = std::tanh(c_new[j]);
  }
  for (size_t j = 0; j < h; ++j) {
    c_out[j] = c_new[j];
    h_out[j] = go[j] * tanh_c[j];
  }

  if (cache) {
    cache->xh = std::move(xh);
    cache->i = std::move(gi);
    cache->f = std::move(gf);
    cache->o = std::move(go);
    cache->g = std::move(gg);
    cache->c_prev = std::move(c_prev_copy);
    cache->c = std::move(c_new);
    cache->tanh_c = std::move(tanh_c);
  }
}

std::pair<Tensor, Tensor> lstm_cell_forward(const Tensor& x,
                                            const Tensor& h_prev,
                                            const Tensor& c_prev,
                                            const LstmParams& p) {
  if (x.size() != p.input_dim || h_prev.size() != p.hidden_dim ||
      c_prev.size() != p.hidden_dim) {
    throw DimensionError("lstm_cell_forward: got x " + x.shape_str() + ", h " +
                         h_prev.shape_str() + ", c " + c_prev.shape_str() +
                         " for cell E=" + std::to_string(p.input_dim) +
                         " h=" + std::to_string(p.hidden_dim));
  }
  Tensor h_out = Tensor::zeros({p.hidden_dim});
  Tensor c_out = Tensor::zeros({p.hidden_dim});
  lstm_cell_forward(x.data.data(), h_prev.data.data(), c_prev.data.data(), p,
                    h_out.data.data(), c_out.data.data(), nullptr);
  check_finite(h_out, "lstm_cell_forward");
  return {std::move(h_out), std::move(c_out)};
}

void lstm_cell_backward(const LstmParams& p, const LstmStepCache& cache,
                        const double* dh, const double* dc_in,
                        LstmParams& grads, double* dx, double* dh_prev,
                        double* dc_prev) {
  const size_t e = p.input_dim, h = p.hidden_dim;
  std::vector<double> dpre_i(h), dpre_f(h), dpre_o(h), dpre_g(h);
  std::vector<double> dc_total(h);
  for (size_t j = 0; j < h; ++j) {
    const double i = cache.i[j], f = cache.f[j], o = cache.o[j], g = cache.g[j];
    const double tc = cache.tanh_c[j];
    const double dct = dc_in[j] + dh[j] * o * (1.0 - tc * tc);
    dc_total[j] = dct;
    dpre_o[j] = dh[j] * tc * o * (1.0 - o);
    dpre_f[j] = dct * cache.c_prev[j] * f * (1.0 - f);
    dpre_i[j] = dct * g * i * (1.0 - i);
    dpre_g[j] = dct * i * (1.0 - g * g);
    dc_prev[j] = dct * f;
  }

  std::vector<double> dxh(e + h, 0.0);
  gate_backward(p.w_i, dpre_i, cache.xh, grads.w_i, grads.b_i, dxh);
  gate_backward(p.w_f, dpre_f, cache.xh, grads.w_f, grads.b_f, dxh);
  gate_backward(p.w_o, dpre_o, cache.xh, grads.w_o, grads.b_o, dxh);
  gate_backward(p.w_g, dpre_g, cache.xh, grads.w_g, grads.b_g, dxh);
  std::memcpy(dx, dxh.data(), e * sizeof(double));
  std::memcpy(dh_prev, dxh.data() + e, h * sizeof(double));
}

// ---------------------------------------------------------------------------
// StudentEncoder

StudentEncoder StudentEncoder::create(const EncoderConfig& cfg, Rng& rng) {
  StudentEncoder enc = zeros(cfg);
  // Embeddings match the word-vector loader's fallback range; recurrent and
  // projection weights use a flat +-0.08 with forget-gate bias 1.
  for (double& x : enc.embedding.data) x = rng.uniform(-0.1, 0.1);
  enc.fwd.init_uniform(rng, 0.08, 1.0);
  enc.bwd.init_uniform(rng, 0.08, 1.0);
  for (double& x : enc.proj.data) x = rng.uniform(-0.08, 0.08);
  return enc;
}

StudentEncoder StudentEncoder::zeros(const EncoderConfig& cfg) {
  if (cfg.vocab_size == 0 || cfg.emb_dim == 0 || cfg.hidden_dim == 0 ||
      cfg.teacher_dim == 0) {
    throw ParameterError("encoder config: all dimensions must be positive");
  }
  StudentEncoder enc;
  enc.cfg_ = cfg;
  enc.embedding = Tensor::zeros({cfg.vocab_size, cfg.emb_dim});
  enc.fwd = LstmParams::zeros(cfg.emb_dim, cfg.hidden_dim);
  enc.bwd = LstmParams::zeros(cfg.emb_dim, cfg.hidden_dim);
  enc.proj = Tensor::zeros({cfg.teacher_dim, 2 * cfg.hidden_dim});
  return enc;
}

Tensor StudentEncoder::encode_hidden(const std::vector<int32_t>& tokens,
                                     EncoderTrace* trace) const {
  check_token_ids(tokens, cfg_.vocab_size);
  const size_t n = tokens.size(), e = cfg_.emb_dim, h = cfg_.hidden_dim;

  std::vector<const double*> xs_fwd(n), xs_bwd(n);
  for (size_t t = 0; t < n; ++t) {
    const double* row = embedding.data.data() + static_cast<size_t>(tokens[t]) * e;
    xs_fwd[t] = row;
    xs_bwd[n - 1 - t] = row;
  }
  std::vector<double> h_fwd =
      run_lstm(fwd, xs_fwd, trace ? &trace->fwd : nullptr);
  std::vector<double> h_bwd =
      run_lstm(bwd, xs_bwd, trace ? &trace->bwd : nullptr);

  Tensor hidden = Tensor::zeros({2 * h});
  std::memcpy(hidden.data.data(), h_fwd.data(), h * sizeof(double));
  std::memcpy(hidden.data.data() + h, h_bwd.data(), h * sizeof(double));
  if (trace) {
    trace->tokens = tokens;
    trace->hidden = hidden;
  }
  return hidden;
}

Tensor StudentEncoder::forward(const std::vector<int32_t>& tokens,
                               EncoderTrace* trace) const {
  Tensor hidden = encode_hidden(tokens, trace);
  const size_t d = cfg_.teacher_dim, m = 2 * cfg_.hidden_dim;
  Tensor s = Tensor::zeros({d});
  for (size_t r = 0; r < d; ++r) {
    const double* prow = proj.data.data() + r * m;
    double acc = 0.0;
    for (size_t c = 0; c < m; ++c) acc += prow[c] * hidden.data[c];
    s.data[r] = std::tanh(acc);
  }
  if (trace) trace->s = s;
  check_finite(s, "student_forward");
  return s;
}

void StudentEncoder::backward_from_hidden(const EncoderTrace& trace,
                                          const Tensor& d_hidden,
                                          StudentEncoder& grads) const {
  const size_t h = cfg_.hidden_dim, e = cfg_.emb_dim;
  const size_t n = trace.tokens.size();
  if (d_hidden.size() != 2 * h) {
    throw DimensionError("backward_from_hidden: expected gradient of size " +
                         std::to_string(2 * h));
  }
  std::vector<double> dh_fwd(d_hidden.data.begin(), d_hidden.data.begin() + h);
  std::vector<double> dh_bwd(d_hidden.data.begin() + h, d_hidden.data.end());

  std::vector<std::vector<double>> dx_fwd, dx_bwd;
  backprop_lstm(fwd, trace.fwd, dh_fwd, grads.fwd, dx_fwd);
  backprop_lstm(bwd, trace.bwd, dh_bwd, grads.bwd, dx_bwd);

  for (size_t t = 0; t < n; ++t) {
    double* grow =
        grads.embedding.data.data() + static_cast<size_t>(trace.tokens[t]) * e;
    const double* gf = dx_fwd[t].data();
    const double* gb = dx_bwd[n - 1 - t].data();
    for (size_t j = 0; j < e; ++j) grow[j] += gf[j] + gb[j];
  }
}

void StudentEncoder::backward(const EncoderTrace& trace, const Tensor& d_s,
                              StudentEncoder& grads) const {
  const size_t d = cfg_.teacher_dim, m = 2 * cfg_.hidden_dim;
  if (d_s.size() != d) {
    throw DimensionError("encoder backward: gradient size " + d_s.shape_str() +
                         " != teacher dim " + std::to_string(d));
  }
  Tensor d_hidden = Tensor::zeros({m});
  for (size_t r = 0; r < d; ++r) {
    const double s = trace.s.data[r];
    const double dz = d_s.data[r] * (1.0 - s * s);
    double* gp = grads.proj.data.data() + r * m;
    const double* prow = proj.data.data() + r * m;
    const double* hid = trace.hidden.data.data();
    for (size_t c = 0; c < m; ++c) {
      gp[c] += dz * hid[c];
      d_hidden.data[c] += prow[c] * dz;
    }
  }
  backward_from_hidden(trace, d_hidden, grads);
}

Tensor bilstm_encode(const std::vector<Tensor>& embedded,
                     const LstmParams& fwd, const LstmParams& bwd) {
  if (embedded.empty()) throw EmptyInputError("bilstm_encode: empty sequence");
  const size_t n = embedded.size();
  for (const Tensor& x : embedded) {
    if (x.size() != fwd.input_dim) {
      throw DimensionError("bilstm_encode: step size " + x.shape_str() +
                           " != input dim " + std::to_string(fwd.input_dim));
    }
  }
  std::vector<const double*> xs_fwd(n), xs_bwd(n);
  for (size_t t = 0; t < n; ++t) {
    xs_fwd[t] = embedded[t].data.data();
    xs_bwd[n - 1 - t] = embedded[t].data.data();
  }
  std::vector<double> h_fwd = run_lstm(fwd, xs_fwd, nullptr);
  std::vector<double> h_bwd = run_lstm(bwd, xs_bwd, nullptr);
  Tensor out = Tensor::zeros({fwd.hidden_dim + bwd.hidden_dim});
  std::memcpy(out.data.data(), h_fwd.data(), fwd.hidden_dim * sizeof(double));
  std::memcpy(out.data.data() + fwd.hidden_dim, h_bwd.data(),
              bwd.hidden_dim * sizeof(double));
  check_finite(out, "bilstm_encode");
  return out;
}

Tensor StudentEncoder::forward_batch_hidden(
    const std::vector<std::vector<int32_t>>& rows,
    const std::vector<int32_t>& lengths) const {
  if (rows.empty()) throw EmptyInputError("forward_batch: empty batch");
  if (rows.size() != lengths.size()) {
    throw DimensionError("forward_batch: rows/lengths size mismatch");
  }
  const size_t bsz = rows.size(), e = cfg_.emb_dim, h = cfg_.hidden_dim;
  size_t max_len = 0;
  for (size_t i = 0; i < bsz; ++i) {
    const size_t len = static_cast<size_t>(lengths[i]);
    if (len == 0) throw EmptyInputError("forward_batch: zero-length row");
    if (len > rows[i].size()) {
      throw DimensionError("forward_batch: length exceeds row width");
    }
    for (size_t t = 0; t < len; ++t) {
      const int32_t id = rows[i][t];
      if (id < 0 || static_cast<size_t>(id) >= cfg_.vocab_size) {
        throw VocabularyError("token id " + std::to_string(id) +
                              " outside vocabulary");
      }
    }
    max_len = std::max(max_len, len);
  }

  const Tensor wt_fwd = stacked_gates_transposed(fwd);
  const Tensor wt_bwd = stacked_gates_transposed(bwd);
  const Tensor* biases_fwd[4] = {&fwd.b_i, &fwd.b_f, &fwd.b_o, &fwd.b_g};
  const Tensor* biases_bwd[4] = {&bwd.b_i, &bwd.b_f, &bwd.b_o, &bwd.b_g};

  Tensor hidden = Tensor::zeros({bsz, 2 * h});

  // reverse=false consumes token t at step t; reverse=true consumes
  // token len-1-t, so each lane ends on its own first token.
  auto run = [&](bool reverse, const Tensor& wt, const Tensor* const* biases,
                 size_t out_offset) {
    std::vector<double> hs(bsz * h, 0.0), cs(bsz * h, 0.0);
    std::vector<size_t> active;
    for (size_t t = 0; t < max_len; ++t) {
      active.clear();
      for (size_t i = 0; i < bsz; ++i) {
        if (t < static_cast<size_t>(lengths[i])) active.push_back(i);
      }
      const size_t a = active.size();
      Tensor xh = Tensor::zeros({a, e + h});
      for (size_t ai = 0; ai < a; ++ai) {
        const size_t lane = active[ai];
        const size_t len = static_cast<size_t>(lengths[lane]);
        const size_t tok_idx = reverse ? (len - 1 - t) : t;
        const double* emb_row =
            embedding.data.data() +
            static_cast<size_t>(rows[lane][tok_idx]) * e;
        double* dst = xh.data.data() + ai * (e + h);
        std::memcpy(dst, emb_row, e * sizeof(double));
        std::memcpy(dst + e, hs.data() + lane * h, h * sizeof(double));
      }
      Tensor pre = matmul(xh, wt);  // a x 4h
      for (size_t ai = 0; ai < a; ++ai) {
        const size_t lane = active[ai];
        double* prow = pre.data.data() + ai * 4 * h;
        double* hrow = hs.data() + lane * h;
        double* crow = cs.data() + lane * h;
        for (size_t j = 0; j < h; ++j) {
          const double gi = sigmoid(prow[j] + biases[0]->data[j]);
          const double gf = sigmoid(prow[h + j] + biases[1]->data[j]);
          const double go = sigmoid(prow[2 * h + j] + biases[2]->data[j]);
          const double gg = std::tanh(prow[3 * h + j] + biases[3]->data[j]);
          const double c_new = gf * crow[j] + gi * gg;
          crow[j] = c_new;
          hrow[j] = go * std::tanh(c_new);
        }
      }
    }
    for (size_t i = 0; i < bsz; ++i) {
      std::memcpy(hidden.data.data() + i * 2 * h + out_offset,
                  hs.data() + i * h, h * sizeof(double));
    }
  };
  run(false, wt_fwd, biases_fwd, 0);
  run(true, wt_bwd, biases_bwd, h);
  return hidden;
}

Tensor StudentEncoder::forward_batch(
    const std::vector<std::vector<int32_t>>& rows,
    const std::vector<int32_t>& lengths) const {
  Tensor hidden = forward_batch_hidden(rows, lengths);
  const size_t bsz = rows.size(), d = cfg_.teacher_dim, m = 2 * cfg_.hidden_dim;
  // S = tanh(H . proj^T)
  Tensor proj_t = Tensor::zeros({m, d});
  for (size_t r = 0; r < d; ++r)
    for (size_t c = 0; c < m; ++c) proj_t.at(c, r) = proj.at(r, c);
  Tensor s = matmul(hidden, proj_t);
  for (double& x : s.data) x = std::tanh(x);
  (void)bsz;
  return s;
}

ParamRefs StudentEncoder::params() {
  ParamRefs refs;
  refs.push_back({"embedding", &embedding});
  fwd.collect_params("lstm_fwd", refs);
  bwd.collect_params("lstm_bwd", refs);
  refs.push_back({"proj", &proj});
  return refs;
}

NamedTensorViews StudentEncoder::named_tensors() const {
  NamedTensorViews views;
  views.push_back({"embedding", &embedding});
  fwd.collect_views("lstm_fwd", views);
  bwd.collect_views("lstm_bwd", views);
  views.push_back({"proj", &proj});
  return views;
}

// ---------------------------------------------------------------------------
// MlpHead

MlpHead MlpHead::create(const MlpConfig& cfg, Rng& rng) {
  MlpHead head = zeros(cfg);
  for (size_t l = 0; l < head.weights.size(); ++l) {
    const size_t fan_out = head.weights[l].shape[0];
    const size_t fan_in = head.weights[l].shape[1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : head.weights[l].data) x = rng.uniform(-bound, bound);
  }
  return head;
}

MlpHead MlpHead::zeros(const MlpConfig& cfg) {
  if (cfg.input_dim == 0 || cfg.num_classes == 0) {
    throw ParameterError("mlp config: input_dim and num_classes must be positive");
  }
  MlpHead head;
  head.cfg_ = cfg;
  size_t in = cfg.input_dim;
  for (size_t width : cfg.hidden) {
    if (width == 0) throw ParameterError("mlp config: zero hidden width");
    head.weights.push_back(Tensor::zeros({width, in}));
    head.biases.push_back(Tensor::zeros({width}));
    in = width;
  }
  head.weights.push_back(Tensor::zeros({cfg.num_classes, in}));
  head.biases.push_back(Tensor::zeros({cfg.num_classes}));
  return head;
}

Tensor MlpHead::forward(const Tensor& x, MlpTrace* trace) const {
  if (x.size() != cfg_.input_dim) {
    throw DimensionError("mlp_forward: input " + x.shape_str() +
                         " != expected dim " + std::to_string(cfg_.input_dim));
  }
  if (trace) {
    trace->input = x;
    trace->acts.clear();
  }
  Tensor act = x;
  const size_t n_hidden = cfg_.hidden.size();
  for (size_t l = 0; l < n_hidden; ++l) {
    const Tensor& w = weights[l];
    Tensor next = Tensor::zeros({w.shape[0]});
    for (size_t j = 0; j < w.shape[0]; ++j) {
      const double* wrow = w.data.data() + j * w.shape[1];
      double acc = 0.0;
      for (size_t k = 0; k < w.shape[1]; ++k) acc += wrow[k] * act.data[k];
      acc += biases[l].data[j];
      next.data[j] = acc > 0.0 ? acc : 0.0;
    }
    act = std::move(next);
    if (trace) trace->acts.push_back(act);
  }
  const Tensor& w = weights[n_hidden];
  Tensor logits = Tensor::zeros({w.shape[0]});
  for (size_t j = 0; j < w.shape[0]; ++j) {
    const double* wrow = w.data.data() + j * w.shape[1];
    double acc = 0.0;
    for (size_t k = 0; k < w.shape[1]; ++k) acc += wrow[k] * act.data[k];
    logits.data[j] = acc + biases[n_hidden].data[j];
  }
  check_finite(logits, "mlp_forward");
  return logits;
}

void MlpHead::backward(const MlpTrace& trace, const Tensor& d_logits,
                       MlpHead& grads, Tensor* d_input) const {
  const size_t n_hidden = cfg_.hidden.size();
  Tensor d_out = d_logits;
  for (size_t l = n_hidden + 1; l-- > 0;) {
    const Tensor& w = weights[l];
    const Tensor& in_act = (l == 0) ? trace.input : trace.acts[l - 1];
    Tensor d_in = Tensor::zeros({w.shape[1]});
    for (size_t j = 0; j < w.shape[0]; ++j) {
      const double d = d_out.data[j];
      grads.biases[l].data[j] += d;
      double* gw = grads.weights[l].data.data() + j * w.shape[1];
      const double* wrow = w.data.data() + j * w.shape[1];
      for (size_t k = 0; k < w.shape[1]; ++k) {
        gw[k] += d * in_act.data[k];
        d_in.data[k] += wrow[k] * d;
      }
    }
    if (l > 0) {
      // ReLU mask of the producing hidden layer
      const Tensor& act = trace.acts[l - 1];
      for (size_t k = 0; k < d_in.size(); ++k) {
        if (act.data[k] <= 0.0) d_in.data[k] = 0.0;
      }
    }
    d_out = std::move(d_in);
  }
  if (d_input) *d_input = std::move(d_out);
}

ParamRefs MlpHead::params() {
  ParamRefs refs;
  for (size_t l = 0; l < weights.size(); ++l) {
    refs.push_back({"head.w" + std::to_string(l), &weights[l]});
    refs.push_back({"head.b" + std::to_string(l), &biases[l]});
  }
  return refs;
}

NamedTensorViews MlpHead::named_tensors() const {
  NamedTensorViews views;
  for (size_t l = 0; l < weights.size(); ++l) {
    views.push_back({"head.w" + std::to_string(l), &weights[l]});
    views.push_back({"head.b" + std::to_string(l), &biases[l]});
  }
  return views;
}

// ---------------------------------------------------------------------------
// Losses

namespace {
void check_pair_dims(const Tensor& t, const Tensor& s, const char* what) {
  if (t.size() != s.size() || t.size() == 0) {
    throw DimensionError(std::string(what) + ": vectors " + t.shape_str() +
                         " vs " + s.shape_str());
  }
}
}  // namespace

double cosine_distill_loss(const Tensor& t, const Tensor& s) {
  check_pair_dims(t, s, "cosine_distill_loss");
  const double nt = l2_norm(t), ns = l2_norm(s);
  if (nt < kNormEpsilon || ns < kNormEpsilon) {
    throw DegenerateVectorError("cosine loss: vector norm below 1e-12");
  }
  return 0.5 * (1.0 - dot(t, s) / (nt * ns));
}

Tensor cosine_distill_backward(const Tensor& t, const Tensor& s) {
  check_pair_dims(t, s, "cosine_distill_backward");
  const double nt = l2_norm(t), ns = l2_norm(s);
  if (nt < kNormEpsilon || ns < kNormEpsilon) {
    throw DegenerateVectorError("cosine loss: vector norm below 1e-12");
  }
  const double ts = dot(t, s);
  const double inv = 1.0 / (nt * ns);
  const double inv3 = ts / (nt * ns * ns * ns);
  Tensor grad = Tensor::zeros({s.size()});
  for (size_t i = 0; i < s.size(); ++i) {
    grad.data[i] = -0.5 * (t.data[i] * inv - s.data[i] * inv3);
  }
  return grad;
}

Tensor softmax(const Tensor& logits) {
  if (logits.size() == 0) throw DimensionError("softmax: empty logits");
  const double mx = *std::max_element(logits.data.begin(), logits.data.end());
  Tensor out = Tensor::zeros({logits.size()});
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out.data[i] = std::exp(logits.data[i] - mx);
    z += out.data[i];
  }
  for (double& x : out.data) x /= z;
  return out;
}

double softmax_cross_entropy(const Tensor& logits, int label) {
  if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
    throw LabelError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  const double mx = *std::max_element(logits.data.begin(), logits.data.end());
  double z = 0.0;
  for (double x : logits.data) z += std::exp(x - mx);
  return std::log(z) - (logits.data[static_cast<size_t>(label)] - mx);
}

Tensor softmax_cross_entropy_backward(const Tensor& logits, int label) {
  if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
    throw LabelError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  Tensor grad = softmax(logits);
  grad.data[static_cast<size_t>(label)] -= 1.0;
  return grad;
}

double mse_logit_loss(const Tensor& student_logits,
                      const Tensor& teacher_logits) {
  check_pair_dims(student_logits, teacher_logits, "mse_logit_loss");
  double s = 0.0;
  for (size_t i = 0; i < student_logits.size(); ++i) {
    const double d = student_logits.data[i] - teacher_logits.data[i];
    s += d * d;
  }
  return s / static_cast<double>(student_logits.size());
}

Tensor mse_logit_backward(const Tensor& student_logits,
                          const Tensor& teacher_logits) {
  check_pair_dims(student_logits, teacher_logits, "mse_logit_backward");
  const double scale = 2.0 / static_cast<double>(student_logits.size());
  Tensor grad = Tensor::zeros({student_logits.size()});
  for (size_t i = 0; i < student_logits.size(); ++i) {
    grad.data[i] =
        scale * (student_logits.data[i] - teacher_logits.data[i]);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const AdamConfig& cfg, const ParamRefs& params) : cfg_(cfg) {
  if (!(cfg.lr >= 0.0)) throw ParameterError("adam: lr must be >= 0");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const ParamRef& p : params) {
    m_.push_back(Tensor::zeros(p.tensor->shape));
    v_.push_back(Tensor::zeros(p.tensor->shape));
  }
}

void Adam::step(const ParamRefs& params, const ParamRefs& grads) {
  if (params.size() != m_.size() || grads.size() != params.size()) {
    throw DimensionError("adam: parameter/gradient list size mismatch");
  }
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].tensor->same_shape(*params[i].tensor)) {
      throw DimensionError("adam: gradient shape mismatch for " +
                           params[i].name);
    }
    for (double g : grads[i].tensor->data) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in " + params[i].name +
                           ", step aborted");
      }
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i].tensor;
    const Tensor& g = *grads[i].tensor;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (size_t j = 0; j < theta.size(); ++j) {
      m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g.data[j];
      v.data[j] =
          cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * g.data[j] * g.data[j];
      const double m_hat = m.data[j] / bc1;
      const double v_hat = v.data[j] / bc2;
      theta.data[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void zero_params(const ParamRefs& refs) {
  for (const ParamRef& r : refs) r.tensor->fill(0.0);
}

}  // namespace sra
