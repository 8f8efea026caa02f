#include "sra/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "sra/error.hpp"
#include "sra/finetune.hpp"
#include "sra/nn.hpp"

namespace sra {

namespace {

double fd_partial(const std::function<double()>& loss, double* coord) {
  const double orig = *coord;
  *coord = orig + kGradCheckStep;
  const double up = loss();
  *coord = orig - kGradCheckStep;
  const double down = loss();
  *coord = orig;
  return (up - down) / (2.0 * kGradCheckStep);
}

// Relative error with an absolute floor so exactly-zero coordinate pairs
// (dead ReLUs, untouched embedding rows) compare cleanly.
double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), 1e-5});
  return std::fabs(analytic - numeric) / denom;
}

// "lstm_fwd.w_i" -> "lstm_fwd", "head.w0" -> "head", "proj" -> "proj".
std::string layer_of(const std::string& tensor_name) {
  const size_t dot = tensor_name.rfind('.');
  return dot == std::string::npos ? tensor_name : tensor_name.substr(0, dot);
}

struct Accumulator {
  GradCheckReport report;

  void record(const std::string& path, const std::string& tensor, size_t idx,
              uint64_t seed, double err) {
    const std::string layer = layer_of(tensor);
    auto it = std::find_if(report.layers.begin(), report.layers.end(),
                           [&](const GradCheckLayer& l) {
                             return l.layer == layer;
                           });
    if (it == report.layers.end()) {
      report.layers.push_back({layer, 0.0, 0});
      it = report.layers.end() - 1;
    }
    ++it->coords;
    it->max_rel_err = std::max(it->max_rel_err, err);
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst = path + "/" + tensor + "[" + std::to_string(idx) +
                     "] (seed " + std::to_string(seed) + ")";
    }
  }

  void check(const std::string& path, uint64_t seed,
             const std::function<double()>& loss, ParamRefs params,
             ParamRefs grads) {
    for (size_t p = 0; p < params.size(); ++p) {
      Tensor* theta = params[p].tensor;
      const Tensor* g = grads[p].tensor;
      for (size_t i = 0; i < theta->data.size(); ++i) {
        const double numeric = fd_partial(loss, &theta->data[i]);
        record(path, params[p].name, i, seed, rel_err(g->data[i], numeric));
      }
    }
  }
};

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

TaskModel smooth_model(const StudentEncoder& enc, const TaskModelConfig& cfg,
                       uint64_t base_seed, const std::vector<int32_t>& a,
                       const std::vector<int32_t>& b) {
  for (uint64_t attempt = 0; attempt < 32; ++attempt) {
    Rng head_rng(base_seed + attempt);
    TaskModel model = TaskModel::create(enc, cfg, head_rng);
    TaskTrace trace;
    model.forward(a, b, &trace);
    if (relu_margin(model.head, trace.mlp.input) > 3.0 * kGradCheckStep) {
      return model;
    }
  }
  throw NumericError("gradcheck: no kink-free head draw found");
}

std::vector<int32_t> crease_free_pair(const StudentEncoder& enc,
                                      const std::vector<int32_t>& a,
                                      std::vector<int32_t> b) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    Tensor sa = enc.forward(a);
    Tensor sb = enc.forward(b);
    double margin = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < sa.data.size(); ++j) {
      margin = std::min(margin, std::fabs(sa.data[j] - sb.data[j]));
    }
    if (margin > 3.0 * kGradCheckStep) return b;
    for (auto& id : b) id = 3 + (id - 3 + 1) % 6;
  }
  throw NumericError("gradcheck: no crease-free sentence pair found");
}

}  // namespace

GradCheckReport run_gradient_checks(size_t num_seeds) {
  if (num_seeds == 0) throw ParameterError("gradcheck: seeds must be >= 1");
  Accumulator acc;
  acc.report.seeds = num_seeds;

  for (uint64_t seed = 1; seed <= num_seeds; ++seed) {
    EncoderConfig cfg;
    cfg.vocab_size = 9;
    cfg.emb_dim = 3;
    cfg.hidden_dim = 2;
    cfg.teacher_dim = 4;
    Rng rng(seed);
    StudentEncoder enc = StudentEncoder::create(cfg, rng);
    for (auto ref : enc.params()) {
      *ref.tensor = uniform_init(rng, ref.tensor->shape, -0.6, 0.6);
    }
    const std::vector<int32_t> tokens = {3, 5, 4, 6};
    Tensor target = uniform_init(rng, {4}, -1.0, 1.0);

    auto cosine_loss = [&] {
      return cosine_distill_loss(target, enc.forward(tokens));
    };
    EncoderTrace trace;
    Tensor s = enc.forward(tokens, &trace);
    StudentEncoder enc_grads = StudentEncoder::zeros(cfg);
    enc.backward(trace, cosine_distill_backward(target, s), enc_grads);
    acc.check("cosine", seed, cosine_loss, enc.params(), enc_grads.params());

    TaskModelConfig pair_cfg;
    pair_cfg.task = TaskKind::kPair;
    pair_cfg.num_classes = 3;
    pair_cfg.head_hidden = {4};
    const std::vector<int32_t> tb = crease_free_pair(enc, tokens, {4, 3, 7});
    TaskModel pair_model = smooth_model(enc, pair_cfg, seed * 131, tokens, tb);
    auto ce_loss = [&] {
      return softmax_cross_entropy(pair_model.forward(tokens, tb), 2);
    };
    TaskTrace tt;
    Tensor logits = pair_model.forward(tokens, tb, &tt);
    TaskModel pair_grads = TaskModel::zeros(cfg, pair_cfg);
    pair_model.backward(tt, softmax_cross_entropy_backward(logits, 2),
                        pair_grads);
    acc.check("cross-entropy", seed, ce_loss, pair_model.params(),
              pair_grads.params());

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
    acc.check("mse", seed, mse_loss, single.params(), single_grads.params());
  }
  return acc.report;
}

}  // namespace sra
