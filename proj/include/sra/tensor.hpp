#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sra/error.hpp"
#include "sra/rng.hpp"

namespace sra {

// Dense row-major tensor of 64-bit floats. Training arithmetic is all done
// in doubles; the 32-bit form exists only inside checkpoint records.
// Tensors are plain values: once an operation returns one, nothing mutates
// it behind your back, so sharing read-only across threads is fine.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<size_t> shape_in, std::vector<double> data_in);

  static Tensor zeros(std::vector<size_t> shape);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(size_t rows, size_t cols, std::vector<double> values);

  size_t size() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t rows() const;
  size_t cols() const;

  double& at(size_t i) { return data[i]; }
  double at(size_t i) const { return data[i]; }
  double& at(size_t r, size_t c) { return data[r * cols() + c]; }
  double at(size_t r, size_t c) const { return data[r * cols() + c]; }

  void fill(double value);
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  std::string shape_str() const;
};

// Throws NumericError if any element is NaN/Inf. Exported ops call this on
// their results so the all-finite invariant holds module-wide.
void check_finite(const Tensor& t, const char* what);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor concat(const Tensor& a, const Tensor& b);  // rank-1 only
double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& v);

void add_inplace(Tensor& dst, const Tensor& src);
void scale_inplace(Tensor& t, double c);

Tensor uniform_init(Rng& rng, std::vector<size_t> shape, double lo, double hi);

// Checkpoint tensor record: name (u64 LE length + UTF-8), rank (u64 LE),
// shape dims (u64 LE each), data (f32 LE, row-major).
void write_tensor_record(std::ostream& out, const std::string& name,
                         const Tensor& t);
std::pair<std::string, Tensor> read_tensor_record(std::istream& in);

// Round-trips a double through IEEE-754 binary32, the precision stored in
// checkpoints and teacher files.
double to_f32(double x);

}  // namespace sra
