#include "latentgeo/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "latentgeo/errors.hpp"

namespace latentgeo {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  for (int d : shape_) {
    if (d <= 0) throw ShapeError("tensor: non-positive dimension in shape " + shape_to_string(shape_));
  }
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (int d : shape_) {
    if (d <= 0) throw ShapeError("tensor: non-positive dimension in shape " + shape_to_string(shape_));
  }
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw ShapeError("tensor: shape " + shape_to_string(shape_) + " expects " +
                     std::to_string(shape_numel(shape_)) + " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = value;
  return t;
}

Tensor Tensor::from_vector(const std::vector<double>& v) {
  return Tensor({static_cast<int>(v.size())}, v);
}

Tensor Tensor::identity(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is not 2-D, shape " + shape_str());
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is not 2-D, shape " + shape_str());
  return shape_[1];
}

double& Tensor::at(int r, int c) {
  return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(c)];
}

double Tensor::at(int r, int c) const {
  return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(c)];
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

namespace {

void byteswap_doubles(std::vector<double>& v) {
  for (double& x : v) {
    std::uint64_t u;
    std::memcpy(&u, &x, 8);
    u = ((u & 0x00000000000000ffULL) << 56) | ((u & 0x000000000000ff00ULL) << 40) |
        ((u & 0x0000000000ff0000ULL) << 24) | ((u & 0x00000000ff000000ULL) << 8) |
        ((u & 0x000000ff00000000ULL) >> 8) | ((u & 0x0000ff0000000000ULL) >> 24) |
        ((u & 0x00ff000000000000ULL) >> 40) | ((u & 0xff00000000000000ULL) >> 56);
    std::memcpy(&x, &u, 8);
  }
}

constexpr bool kHostLittleEndian = std::endian::native == std::endian::little;

}  // namespace

void write_lgt1(std::ostream& out, const Tensor& t) {
  out << "LGT1 " << t.rank();
  for (int d : t.shape()) out << ' ' << d;
  out << '\n';
  if (kHostLittleEndian) {
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.data().size() * sizeof(double)));
  } else {
    std::vector<double> copy = t.data();
    byteswap_doubles(copy);
    out.write(reinterpret_cast<const char*>(copy.data()),
              static_cast<std::streamsize>(copy.size() * sizeof(double)));
  }
  if (!out) throw IoError("LGT1 write failed");
}

Tensor read_lgt1(std::istream& in, const std::string& context) {
  const std::streampos start = in.tellg();
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("LGT1 " + context + ": malformed header at byte offset " +
                  std::to_string(static_cast<long long>(start)) + " (no header line)");
  }
  std::istringstream hs(line);
  std::string magic;
  int ndim = -1;
  hs >> magic >> ndim;
  if (magic != "LGT1" || ndim < 0 || !hs) {
    throw IoError("LGT1 " + context + ": malformed header at byte offset " +
                  std::to_string(static_cast<long long>(start)) + " (\"" + line + "\")");
  }
  std::vector<int> shape(static_cast<std::size_t>(ndim));
  for (int i = 0; i < ndim; ++i) {
    if (!(hs >> shape[static_cast<std::size_t>(i)]) || shape[static_cast<std::size_t>(i)] <= 0) {
      throw IoError("LGT1 " + context + ": malformed header at byte offset " +
                    std::to_string(static_cast<long long>(start)) + " (bad dimension " + std::to_string(i) + ")");
    }
  }
  const std::int64_t n = shape_numel(shape);
  std::vector<double> data(static_cast<std::size_t>(n));
  const std::streampos payload = in.tellg();
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(double))) {
    throw IoError("LGT1 " + context + ": truncated payload at byte offset " +
                  std::to_string(static_cast<long long>(payload) + in.gcount()) + " (expected " +
                  std::to_string(n * 8) + " bytes)");
  }
  if (!kHostLittleEndian) byteswap_doubles(data);
  return Tensor(std::move(shape), std::move(data));
}

void save_lgt1(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  write_lgt1(out, t);
}

Tensor load_lgt1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + path);
  return read_lgt1(in, path);
}

}  // namespace latentgeo
