#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sra {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTol = 1e-4;

struct GradCheckLayer {
  std::string layer;
  double max_rel_err = 0.0;
  size_t coords = 0;
};

struct GradCheckReport {
  std::vector<GradCheckLayer> layers;  // first-appearance order
  double max_rel_err = 0.0;
  std::string worst;  // "path/tensor[idx] (seed k)" of the worst coordinate
  size_t seeds = 0;

  bool passed() const { return max_rel_err <= kGradCheckTol; }
};

// Central finite differences against the hand-written backward passes. Each
// seed builds a small encoder, moves it to a generic parameter point (the
// tiny init leaves gradients near zero, where differences drown in rounding
// noise), and pushes three losses through it: cosine distillation through
// the bare encoder, cross-entropy through a pair head, and logit MSE through
// a single-sentence head. Head draws and sentence pairs are re-rolled until
// ReLU pre-activations and |a-b| creases sit more than a few steps from
// their kinks, since central differences are only valid away from them.
GradCheckReport run_gradient_checks(size_t num_seeds = 5);

}  // namespace sra
