#include "sra/tensor.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sra {

namespace {

size_t shape_product(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void encode_u64(std::ostream& out, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t decode_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw FormatError("unexpected end of stream in tensor record");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

void encode_f32(std::ostream& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

float decode_f32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw FormatError("unexpected end of stream in tensor record");
  uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(buf[i]) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

Tensor::Tensor(std::vector<size_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape_product(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
  size_t n = shape_product(shape);
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape = {values.size()};
  t.data = std::move(values);
  if (t.data.empty()) throw DimensionError("tensor dimensions must be positive");
  return t;
}

Tensor Tensor::matrix(size_t rows, size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not rank-2");
  return shape[0];
}

size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not rank-2");
  return shape[1];
}

void Tensor::fill(double value) {
  std::fill(data.begin(), data.end(), value);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_finite(const Tensor& t, const char* what) {
  for (double x : t.data) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(what) + ": non-finite value in result");
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: need rank-2 tensors, got " + a.shape_str() +
                         " and " + b.shape_str());
  }
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree: " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  const size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  // ikj order keeps the inner loop contiguous in both b and out.
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a.data.data() + i * k;
    double* orow = out.data.data() + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + kk * n;
      for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  check_finite(out, "matmul");
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("add: shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  Tensor out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  check_finite(out, "add");
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("sub: shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  Tensor out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  check_finite(out, "sub");
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("hadamard: shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  Tensor out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
  check_finite(out, "hadamard");
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& x : out.data) x *= c;
  check_finite(out, "scale");
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) {
    throw DimensionError("concat: need rank-1 tensors");
  }
  Tensor out;
  out.shape = {a.size() + b.size()};
  out.data.reserve(out.shape[0]);
  out.data.insert(out.data.end(), a.data.begin(), a.data.end());
  out.data.insert(out.data.end(), b.data.begin(), b.data.end());
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double l2_norm(const Tensor& v) {
  if (v.size() == 0) throw DimensionError("l2_norm: empty vector");
  double s = 0.0;
  for (double x : v.data) s += x * x;
  return std::sqrt(s);
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) {
    throw DimensionError("add_inplace: shape mismatch " + dst.shape_str() +
                         " vs " + src.shape_str());
  }
  for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

void scale_inplace(Tensor& t, double c) {
  for (double& x : t.data) x *= c;
}

Tensor uniform_init(Rng& rng, std::vector<size_t> shape, double lo, double hi) {
  if (!(lo < hi)) throw ParameterError("uniform_init: lo must be < hi");
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.data) x = lo + (hi - lo) * rng.next_double();
  return t;
}

void write_tensor_record(std::ostream& out, const std::string& name,
                         const Tensor& t) {
  encode_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  encode_u64(out, t.rank());
  for (size_t d : t.shape) encode_u64(out, d);
  for (double x : t.data) encode_f32(out, static_cast<float>(x));
  if (!out) throw IoError("write_tensor_record: stream write failed");
}

std::pair<std::string, Tensor> read_tensor_record(std::istream& in) {
  const uint64_t name_len = decode_u64(in);
  std::string name(name_len, '\0');
  in.read(name.data(), static_cast<std::streamsize>(name_len));
  if (!in) throw FormatError("tensor record: truncated name");
  const uint64_t rank = decode_u64(in);
  std::vector<size_t> shape(rank);
  uint64_t n = 1;
  for (uint64_t i = 0; i < rank; ++i) {
    shape[i] = decode_u64(in);
    if (shape[i] == 0) throw FormatError("tensor record: zero dimension");
    n *= shape[i];
  }
  std::vector<double> data(n);
  for (uint64_t i = 0; i < n; ++i) data[i] = static_cast<double>(decode_f32(in));
  return {std::move(name), Tensor(std::move(shape), std::move(data))};
}

double to_f32(double x) {
  return static_cast<double>(static_cast<float>(x));
}

}  // namespace sra
