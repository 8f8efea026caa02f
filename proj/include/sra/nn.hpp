#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sra/tensor.hpp"

namespace sra {

struct ParamRef {
  std::string name;
  Tensor* tensor;
};
using ParamRefs = std::vector<ParamRef>;

struct NamedTensorView {
  std::string name;
  const Tensor* tensor;
};
using NamedTensorViews = std::vector<NamedTensorView>;

// ---------------------------------------------------------------------------
// LSTM cell

// One direction's gate parameters. Each gate weight is h x (E+h) and acts on
// the concatenation [x_t ; h_prev]; biases are length h.
struct LstmParams {
  size_t input_dim = 0;
  size_t hidden_dim = 0;
  Tensor w_i, w_f, w_o, w_g;
  Tensor b_i, b_f, b_o, b_g;

  static LstmParams zeros(size_t input_dim, size_t hidden_dim);
  // Weights uniform(-scale, scale); forget-gate bias set to forget_bias,
  // other biases zero.
  void init_uniform(Rng& rng, double scale, double forget_bias);
  void collect_params(const std::string& prefix, ParamRefs& out);
  void collect_views(const std::string& prefix, NamedTensorViews& out) const;
};

// Every intermediate the backward pass needs for one timestep.
struct LstmStepCache {
  std::vector<double> xh;      // [x_t ; h_prev], length E+h
  std::vector<double> i, f, o, g;
  std::vector<double> c_prev, c, tanh_c;
};

// i,f,o = sigmoid(W.[x;h_prev]+b); g = tanh(W_g.[x;h_prev]+b_g);
// c_t = f*c_prev + i*g; h_t = o*tanh(c_t).
void lstm_cell_forward(const double* x, const double* h_prev,
                       const double* c_prev, const LstmParams& p,
                       double* h_out, double* c_out, LstmStepCache* cache);

std::pair<Tensor, Tensor> lstm_cell_forward(const Tensor& x,
                                            const Tensor& h_prev,
                                            const Tensor& c_prev,
                                            const LstmParams& p);

// Accumulates into `grads` (a zeros() clone of p). dh/dc_in are the incoming
// gradients on h_t and c_t; dx, dh_prev, dc_prev receive the input gradients.
void lstm_cell_backward(const LstmParams& p, const LstmStepCache& cache,
                        const double* dh, const double* dc_in,
                        LstmParams& grads, double* dx, double* dh_prev,
                        double* dc_prev);

// ---------------------------------------------------------------------------
// BiLSTM sentence encoder

struct EncoderConfig {
  size_t vocab_size = 0;
  size_t emb_dim = 300;
  size_t hidden_dim = 512;   // per direction
  size_t teacher_dim = 768;  // d
};

struct DirectionTrace {
  std::vector<LstmStepCache> steps;  // in processing order
};

struct EncoderTrace {
  std::vector<int32_t> tokens;
  DirectionTrace fwd, bwd;
  Tensor hidden;  // H, length 2h
  Tensor s;       // S_x = tanh(proj . H), length d
};

// Embedding table + forward/backward LSTM + bias-free projection + tanh.
// Fields are public so gradient holders are just zeros() clones.
struct StudentEncoder {
  Tensor embedding;  // V x E
  LstmParams fwd, bwd;
  Tensor proj;  // d x 2h, no bias

  static StudentEncoder create(const EncoderConfig& cfg, Rng& rng);
  static StudentEncoder zeros(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }

  // S_x for one sentence. Throws EmptyInputError / VocabularyError.
  Tensor forward(const std::vector<int32_t>& tokens,
                 EncoderTrace* trace = nullptr) const;

  // H (pre-projection) for one sentence; same trace layout.
  Tensor encode_hidden(const std::vector<int32_t>& tokens,
                       EncoderTrace* trace = nullptr) const;

  // d_s is dLoss/dS_x; accumulates parameter gradients into `grads`.
  void backward(const EncoderTrace& trace, const Tensor& d_s,
                StudentEncoder& grads) const;

  // Same but from a gradient on H (used when heads read the pre-projection
  // representation).
  void backward_from_hidden(const EncoderTrace& trace, const Tensor& d_hidden,
                            StudentEncoder& grads) const;

  // Inference-only batched forward over padded rows; returns B x d. Value-
  // identical to calling forward() per row.
  Tensor forward_batch(const std::vector<std::vector<int32_t>>& rows,
                       const std::vector<int32_t>& lengths) const;
  // Batched variant returning H rows (B x 2h).
  Tensor forward_batch_hidden(const std::vector<std::vector<int32_t>>& rows,
                              const std::vector<int32_t>& lengths) const;

  ParamRefs params();
  NamedTensorViews named_tensors() const;

  void set_config(const EncoderConfig& cfg) { cfg_ = cfg; }

 private:
  EncoderConfig cfg_;
};

// Spec-level op: encode an already-embedded sequence into H = concat(final
// forward state, final backward state). Padding never reaches this function;
// callers pass true tokens only.
Tensor bilstm_encode(const std::vector<Tensor>& embedded,
                     const LstmParams& fwd, const LstmParams& bwd);

// ---------------------------------------------------------------------------
// MLP head

struct MlpConfig {
  size_t input_dim = 0;
  std::vector<size_t> hidden = {256};
  size_t num_classes = 2;
};

struct MlpTrace {
  Tensor input;
  std::vector<Tensor> acts;  // post-ReLU activations per hidden layer
};

// Hidden layers linear+bias+ReLU, output layer linear+bias (softmax lives in
// the loss).
struct MlpHead {
  std::vector<Tensor> weights;  // layer l: out_l x in_l
  std::vector<Tensor> biases;   // layer l: out_l

  static MlpHead create(const MlpConfig& cfg, Rng& rng);  // Glorot uniform
  static MlpHead zeros(const MlpConfig& cfg);

  const MlpConfig& config() const { return cfg_; }

  Tensor forward(const Tensor& x, MlpTrace* trace = nullptr) const;
  void backward(const MlpTrace& trace, const Tensor& d_logits, MlpHead& grads,
                Tensor* d_input) const;

  ParamRefs params();
  NamedTensorViews named_tensors() const;

  void set_config(const MlpConfig& cfg) { cfg_ = cfg; }

 private:
  MlpConfig cfg_;
};

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kNormEpsilon = 1e-12;

// 0.5 * (1 - cos(t, s)) in [0, 1]. Throws DegenerateVectorError when either
// norm is below kNormEpsilon.
double cosine_distill_loss(const Tensor& t, const Tensor& s);
// dLoss/ds with the teacher vector held constant.
Tensor cosine_distill_backward(const Tensor& t, const Tensor& s);

double softmax_cross_entropy(const Tensor& logits, int label);
Tensor softmax_cross_entropy_backward(const Tensor& logits, int label);
Tensor softmax(const Tensor& logits);

double mse_logit_loss(const Tensor& student_logits,
                      const Tensor& teacher_logits);
Tensor mse_logit_backward(const Tensor& student_logits,
                          const Tensor& teacher_logits);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const AdamConfig& cfg, const ParamRefs& params);

  // Standard update with bias correction. Scans all gradients for NaN/Inf
  // first and aborts the whole step on any hit.
  void step(const ParamRefs& params, const ParamRefs& grads);

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

void zero_params(const ParamRefs& refs);

}  // namespace sra
