#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace latentgeo {

// Dense n-dimensional array of 64-bit reals, row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor from_vector(const std::vector<double>& v);
  static Tensor identity(int n);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  // 2-D helpers; throw on rank mismatch.
  int rows() const;
  int cols() const;

  double& at(std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  double& at(int r, int c);
  double at(int r, int c) const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

bool bitwise_equal(const Tensor& a, const Tensor& b);

// LGT1 file format: header line "LGT1 <ndim> <d0> <d1> ...\n" followed by
// raw little-endian 64-bit floats, row-major. Shared by datasets and
// checkpoints.
void write_lgt1(std::ostream& out, const Tensor& t);
Tensor read_lgt1(std::istream& in, const std::string& context);
void save_lgt1(const std::string& path, const Tensor& t);
Tensor load_lgt1(const std::string& path);

}  // namespace latentgeo
