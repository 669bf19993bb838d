#include "latentgeo/linalg.hpp"

#include <Eigen/Core>
#include <Eigen/SVD>

#include "latentgeo/errors.hpp"

namespace latentgeo::linalg {

std::vector<double> singular_values(const Tensor& m) {
  if (m.rank() != 2) throw ShapeError("singular_values: expects 2-D, got " + m.shape_str());
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> mm(m.data().data(), m.shape()[0], m.shape()[1]);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(mm.eval());
  const auto& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

double rank_residual(const Tensor& m, int r) {
  const std::vector<double> sv = singular_values(m);
  if (sv.empty() || sv[0] == 0.0) return 0.0;
  if (static_cast<int>(sv.size()) <= r) return 0.0;
  return sv[static_cast<std::size_t>(r)] / sv[0];
}

}  // namespace latentgeo::linalg
