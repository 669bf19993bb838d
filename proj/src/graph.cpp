#include "latentgeo/graph.hpp"

#include <Eigen/Core>
#include <cmath>
#include <utility>

#include "latentgeo/errors.hpp"

namespace latentgeo {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  if (values_.count(name)) throw ConfigError("parameter already exists: " + name);
  order_.push_back(name);
  return values_.emplace(name, std::move(init)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const { return values_.count(name) > 0; }

std::int64_t ParamStore::total_scalars() const {
  std::int64_t n = 0;
  for (const auto& [k, v] : values_) n += v.numel();
  return n;
}

const char* Graph::op_name(Op op) {
  switch (op) {
    case Op::Placeholder: return "placeholder";
    case Op::Param: return "param";
    case Op::Const: return "const";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Broadcast: return "broadcast";
    case Op::Relu: return "relu";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Sin: return "sin";
    case Op::Acos: return "acos";
    case Op::Clamp: return "clamp";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::RowSum: return "row_sum";
    case Op::RowMean: return "row_mean";
    case Op::Concat: return "concat";
    case Op::SliceCols: return "slice_cols";
    case Op::Reshape: return "reshape";
    case Op::Where: return "where";
    case Op::LessThan: return "less_than";
  }
  return "?";
}

Graph::Value Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  forward_done_ = false;
  return Value{static_cast<int>(nodes_.size()) - 1};
}

const Graph::Node& Graph::node(Value v) const {
  check_built(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

void Graph::check_built(Value v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw Error("graph: invalid value handle");
}

std::vector<int> Graph::shape_of(Value v) const { return node(v).shape; }

Graph::Value Graph::placeholder(const std::string& name, std::vector<int> shape) {
  Node n;
  n.op = Op::Placeholder;
  n.name = name;
  n.shape = std::move(shape);
  return push(std::move(n));
}

Graph::Value Graph::param(const std::string& name) {
  if (!params_) throw ConfigError("graph has no parameter store");
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Value{it->second};
  Node n;
  n.op = Op::Param;
  n.name = name;
  n.shape = params_->at(name).shape();
  Value v = push(std::move(n));
  param_nodes_[name] = v.id;
  return v;
}

Graph::Value Graph::constant(Tensor value) {
  Node n;
  n.op = Op::Const;
  n.shape = value.shape();
  n.constant = std::move(value);
  return push(std::move(n));
}

namespace {

void require_same_shape(const char* op, const std::vector<int>& a, const std::vector<int>& b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a) + " vs " + shape_to_string(b));
  }
}

}  // namespace

Graph::Value Graph::add(Value a, Value b) {
  require_same_shape("add", shape_of(a), shape_of(b));
  Node n;
  n.op = Op::Add;
  n.inputs = {a.id, b.id};
  n.shape = shape_of(a);
  return push(std::move(n));
}

Graph::Value Graph::sub(Value a, Value b) {
  require_same_shape("sub", shape_of(a), shape_of(b));
  Node n;
  n.op = Op::Sub;
  n.inputs = {a.id, b.id};
  n.shape = shape_of(a);
  return push(std::move(n));
}

Graph::Value Graph::mul(Value a, Value b) {
  require_same_shape("mul", shape_of(a), shape_of(b));
  Node n;
  n.op = Op::Mul;
  n.inputs = {a.id, b.id};
  n.shape = shape_of(a);
  return push(std::move(n));
}

Graph::Value Graph::div(Value a, Value b) {
  require_same_shape("div", shape_of(a), shape_of(b));
  Node n;
  n.op = Op::Div;
  n.inputs = {a.id, b.id};
  n.shape = shape_of(a);
  return push(std::move(n));
}

Graph::Value Graph::matmul(Value a, Value b) {
  const auto& sa = shape_of(a);
  const auto& sb = shape_of(b);
  if (sa.size() != 2 || (sb.size() != 2 && sb.size() != 1)) {
    throw ShapeError("matmul: expects [r,k] x [k,c] or [r,k] x [k], got " + shape_to_string(sa) + " x " +
                     shape_to_string(sb));
  }
  if (sa[1] != sb[0]) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(sa) + " x " + shape_to_string(sb));
  }
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.id, b.id};
  n.shape = sb.size() == 2 ? std::vector<int>{sa[0], sb[1]} : std::vector<int>{sa[0]};
  return push(std::move(n));
}

Graph::Value Graph::transpose(Value a) {
  const auto& s = shape_of(a);
  if (s.size() != 2) throw ShapeError("transpose: expects 2-D, got " + shape_to_string(s));
  Node n;
  n.op = Op::Transpose;
  n.inputs = {a.id};
  n.shape = {s[1], s[0]};
  return push(std::move(n));
}

Graph::Value Graph::broadcast(Value a, std::vector<int> target_shape) {
  const auto& s = shape_of(a);
  const std::int64_t sn = shape_numel(s);
  bool ok = false;
  if (sn == 1) {
    ok = true;  // scalar to anything
  } else if (target_shape.size() == 2) {
    const int r = target_shape[0], c = target_shape[1];
    if (s.size() == 1 && s[0] == c) ok = true;                       // row vector
    if (s.size() == 2 && s[0] == 1 && s[1] == c) ok = true;          // [1,c]
    if (s.size() == 2 && s[0] == r && s[1] == 1) ok = true;          // [r,1]
    if (s.size() == 2 && s[0] == r && s[1] == c) ok = true;          // no-op
  } else if (target_shape.size() == 1 && s.size() == 1 && s[0] == target_shape[0]) {
    ok = true;
  }
  if (!ok) {
    throw ShapeError("broadcast: cannot expand " + shape_to_string(s) + " to " + shape_to_string(target_shape));
  }
  Node n;
  n.op = Op::Broadcast;
  n.inputs = {a.id};
  n.shape = std::move(target_shape);
  return push(std::move(n));
}

#define LATENTGEO_UNARY(NAME, OP)                  \
  Graph::Value Graph::NAME(Value a) {              \
    Node n;                                        \
    n.op = Op::OP;                                 \
    n.inputs = {a.id};                             \
    n.shape = shape_of(a);                         \
    return push(std::move(n));                     \
  }

LATENTGEO_UNARY(relu, Relu)
LATENTGEO_UNARY(tanh, Tanh)
LATENTGEO_UNARY(sigmoid, Sigmoid)
LATENTGEO_UNARY(exp, Exp)
LATENTGEO_UNARY(log, Log)
LATENTGEO_UNARY(square, Square)
LATENTGEO_UNARY(sqrt, Sqrt)
LATENTGEO_UNARY(sin, Sin)
LATENTGEO_UNARY(acos, Acos)
#undef LATENTGEO_UNARY

Graph::Value Graph::leaky_relu(Value a, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.inputs = {a.id};
  n.shape = shape_of(a);
  n.p0 = slope;
  return push(std::move(n));
}

Graph::Value Graph::clamp(Value a, double lo, double hi) {
  Node n;
  n.op = Op::Clamp;
  n.inputs = {a.id};
  n.shape = shape_of(a);
  n.p0 = lo;
  n.p1 = hi;
  return push(std::move(n));
}

Graph::Value Graph::sum(Value a) {
  Node n;
  n.op = Op::Sum;
  n.inputs = {a.id};
  n.shape = {1};
  return push(std::move(n));
}

Graph::Value Graph::mean(Value a) {
  Node n;
  n.op = Op::Mean;
  n.inputs = {a.id};
  n.shape = {1};
  return push(std::move(n));
}

Graph::Value Graph::row_sum(Value a) {
  const auto& s = shape_of(a);
  if (s.size() != 2) throw ShapeError("row_sum: expects 2-D, got " + shape_to_string(s));
  Node n;
  n.op = Op::RowSum;
  n.inputs = {a.id};
  n.shape = {s[0], 1};
  return push(std::move(n));
}

Graph::Value Graph::row_mean(Value a) {
  const auto& s = shape_of(a);
  if (s.size() != 2) throw ShapeError("row_mean: expects 2-D, got " + shape_to_string(s));
  Node n;
  n.op = Op::RowMean;
  n.inputs = {a.id};
  n.shape = {s[0], 1};
  return push(std::move(n));
}

Graph::Value Graph::concat(Value a, Value b) {
  const auto& sa = shape_of(a);
  const auto& sb = shape_of(b);
  Node n;
  n.op = Op::Concat;
  n.inputs = {a.id, b.id};
  if (sa.size() == 1 && sb.size() == 1) {
    n.shape = {sa[0] + sb[0]};
  } else if (sa.size() == 2 && sb.size() == 2 && sa[0] == sb[0]) {
    n.shape = {sa[0], sa[1] + sb[1]};
  } else {
    throw ShapeError("concat: incompatible shapes " + shape_to_string(sa) + " and " + shape_to_string(sb));
  }
  return push(std::move(n));
}

Graph::Value Graph::slice_cols(Value a, int start, int len) {
  const auto& s = shape_of(a);
  const int cols = s.size() == 2 ? s[1] : (s.size() == 1 ? s[0] : -1);
  if (cols < 0) throw ShapeError("slice_cols: expects 1-D or 2-D, got " + shape_to_string(s));
  if (start < 0 || len <= 0 || start + len > cols) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of bounds for " + shape_to_string(s));
  }
  Node n;
  n.op = Op::SliceCols;
  n.inputs = {a.id};
  n.shape = s.size() == 2 ? std::vector<int>{s[0], len} : std::vector<int>{len};
  n.p0 = start;
  n.p1 = len;
  return push(std::move(n));
}

Graph::Value Graph::reshape(Value a, std::vector<int> shape) {
  if (shape_numel(shape) != shape_numel(shape_of(a))) {
    throw ShapeError("reshape: element count mismatch, " + shape_to_string(shape_of(a)) + " to " +
                     shape_to_string(shape));
  }
  Node n;
  n.op = Op::Reshape;
  n.inputs = {a.id};
  n.shape = std::move(shape);
  return push(std::move(n));
}

Graph::Value Graph::where(Value cond, Value a, Value b) {
  require_same_shape("where", shape_of(cond), shape_of(a));
  require_same_shape("where", shape_of(a), shape_of(b));
  Node n;
  n.op = Op::Where;
  n.inputs = {cond.id, a.id, b.id};
  n.shape = shape_of(a);
  return push(std::move(n));
}

Graph::Value Graph::less_than(Value a, double threshold) {
  Node n;
  n.op = Op::LessThan;
  n.inputs = {a.id};
  n.shape = shape_of(a);
  n.p0 = threshold;
  return push(std::move(n));
}

const Tensor& Graph::forward(const Bindings& inputs, Value output) {
  check_built(output);
  values_.assign(nodes_.size(), Tensor());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    Tensor& out = values_[i];
    switch (n.op) {
      case Op::Placeholder: {
        auto it = inputs.find(n.name);
        if (it == inputs.end()) throw ConfigError("forward: unbound input \"" + n.name + "\"");
        if (it->second.shape() != n.shape) {
          throw ShapeError("forward: input \"" + n.name + "\" has shape " + it->second.shape_str() +
                           ", graph expects " + shape_to_string(n.shape));
        }
        out = it->second;
        break;
      }
      case Op::Param:
        out = params_->at(n.name);
        break;
      case Op::Const:
        out = n.constant;
        break;
      case Op::Add: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        out = a;
        for (std::int64_t k = 0; k < out.numel(); ++k) out.at(k) += b.at(k);
        break;
      }
      case Op::Sub: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        out = a;
        for (std::int64_t k = 0; k < out.numel(); ++k) out.at(k) -= b.at(k);
        break;
      }
      case Op::Mul: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        out = a;
        for (std::int64_t k = 0; k < out.numel(); ++k) out.at(k) *= b.at(k);
        break;
      }
      case Op::Div: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        out = a;
        for (std::int64_t k = 0; k < out.numel(); ++k) out.at(k) /= b.at(k);
        break;
      }
      case Op::MatMul: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        const int r = a.shape()[0], k = a.shape()[1];
        const int c = b.rank() == 2 ? b.shape()[1] : 1;
        out = Tensor(n.shape);
        ConstMatMap ma(a.data().data(), r, k);
        ConstMatMap mb(b.data().data(), k, c);
        MatMap mo(out.data().data(), r, c);
        mo.noalias() = ma * mb;
        break;
      }
      case Op::Transpose: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        out = Tensor(n.shape);
        const int r = a.shape()[0], c = a.shape()[1];
        for (int i2 = 0; i2 < r; ++i2)
          for (int j = 0; j < c; ++j) out.at(j, i2) = a.at(i2, j);
        break;
      }
      case Op::Broadcast: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        out = Tensor(n.shape);
        if (a.numel() == 1) {
          for (std::int64_t k = 0; k < out.numel(); ++k) out.at(k) = a.at(0);
        } else if (n.shape.size() == 2) {
          const int r = n.shape[0], c = n.shape[1];
          const bool row_vec = (a.rank() == 1) || (a.shape()[0] == 1);
          if (a.rank() == 2 && a.shape()[0] == r && a.shape()[1] == c) {
            out = a;
          } else if (row_vec) {
            for (int i2 = 0; i2 < r; ++i2)
              for (int j = 0; j < c; ++j) out.at(i2, j) = a.at(j);
          } else {  // [r,1]
            for (int i2 = 0; i2 < r; ++i2)
              for (int j = 0; j < c; ++j) out.at(i2, j) = a.at(i2);
          }
        } else {
          out = a;
        }
        break;
      }
      case Op::Relu: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        out = a;
        for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
        break;
      }
      case Op::LeakyRelu: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        out = a;
        for (double& x : out.data()) x = x > 0.0 ? x : n.p0 * x;
        break;
      }
      case Op::Tanh: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = std::tanh(x);
        break;
      }
      case Op::Sigmoid: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = 1.0 / (1.0 + std::exp(-x));
        break;
      }
      case Op::Exp: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = std::exp(x);
        break;
      }
      case Op::Log: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = std::log(x);
        break;
      }
      case Op::Square: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = x * x;
        break;
      }
      case Op::Sqrt: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = std::sqrt(x);
        break;
      }
      case Op::Sin: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = std::sin(x);
        break;
      }
      case Op::Acos: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = std::acos(x);
        break;
      }
      case Op::Clamp: {
        out = values_[static_cast<std::size_t>(n.inputs[0])];
        for (double& x : out.data()) x = x < n.p0 ? n.p0 : (x > n.p1 ? n.p1 : x);
        break;
      }
      case Op::Sum: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        double s = 0.0;
        for (double x : a.data()) s += x;
        out = Tensor::scalar(s);
        break;
      }
      case Op::Mean: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        double s = 0.0;
        for (double x : a.data()) s += x;
        out = Tensor::scalar(s / static_cast<double>(a.numel()));
        break;
      }
      case Op::RowSum:
      case Op::RowMean: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const int r = a.shape()[0], c = a.shape()[1];
        out = Tensor(n.shape);
        for (int i2 = 0; i2 < r; ++i2) {
          double s = 0.0;
          for (int j = 0; j < c; ++j) s += a.at(i2, j);
          out.at(i2, 0) = n.op == Op::RowSum ? s : s / static_cast<double>(c);
        }
        break;
      }
      case Op::Concat: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        out = Tensor(n.shape);
        if (n.shape.size() == 1) {
          std::int64_t k = 0;
          for (double x : a.data()) out.at(k++) = x;
          for (double x : b.data()) out.at(k++) = x;
        } else {
          const int r = n.shape[0], ca = a.shape()[1], cb = b.shape()[1];
          for (int i2 = 0; i2 < r; ++i2) {
            for (int j = 0; j < ca; ++j) out.at(i2, j) = a.at(i2, j);
            for (int j = 0; j < cb; ++j) out.at(i2, ca + j) = b.at(i2, j);
          }
        }
        break;
      }
      case Op::SliceCols: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const int start = static_cast<int>(n.p0), len = static_cast<int>(n.p1);
        out = Tensor(n.shape);
        if (a.rank() == 1) {
          for (int j = 0; j < len; ++j) out.at(j) = a.at(start + j);
        } else {
          const int r = a.shape()[0];
          for (int i2 = 0; i2 < r; ++i2)
            for (int j = 0; j < len; ++j) out.at(i2, j) = a.at(i2, start + j);
        }
        break;
      }
      case Op::Reshape: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        out = Tensor(n.shape, a.data());
        break;
      }
      case Op::Where: {
        const Tensor& c = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[1])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[2])];
        out = Tensor(n.shape);
        for (std::int64_t k = 0; k < out.numel(); ++k) out.at(k) = c.at(k) != 0.0 ? a.at(k) : b.at(k);
        break;
      }
      case Op::LessThan: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        out = Tensor(n.shape);
        for (std::int64_t k = 0; k < out.numel(); ++k) out.at(k) = a.at(k) < n.p0 ? 1.0 : 0.0;
        break;
      }
    }
  }
  forward_done_ = true;
  return values_[static_cast<std::size_t>(output.id)];
}

double Graph::forward_scalar(const Bindings& inputs, Value output) {
  const Tensor& t = forward(inputs, output);
  if (t.numel() != 1) throw ShapeError("forward_scalar: output has shape " + t.shape_str());
  return t.at(0);
}

const Tensor& Graph::value_of(Value v) const {
  check_built(v);
  if (!forward_done_) throw Error("value_of: no forward pass has been run");
  return values_[static_cast<std::size_t>(v.id)];
}

const Tensor& Graph::grad_of(Value v) const {
  check_built(v);
  if (grads_.empty()) throw Error("grad_of: no backward pass has been run");
  return grads_[static_cast<std::size_t>(v.id)];
}

NamedGrads Graph::backward(Value output) {
  check_built(output);
  if (!forward_done_) throw Error("backward: called before forward");
  const Tensor& out_val = values_[static_cast<std::size_t>(output.id)];
  if (out_val.numel() != 1) {
    throw ShapeError("backward: output must be scalar, got shape " + out_val.shape_str());
  }

  grads_.assign(nodes_.size(), Tensor());
  for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor(nodes_[i].shape);
  grads_[static_cast<std::size_t>(output.id)].at(0) = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const Tensor& g = grads_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Placeholder:
      case Op::Param:
      case Op::Const:
      case Op::LessThan:
        break;
      case Op::Add: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& gb = grads_[static_cast<std::size_t>(n.inputs[1])];
        for (std::int64_t k = 0; k < g.numel(); ++k) {
          ga.at(k) += g.at(k);
          gb.at(k) += g.at(k);
        }
        break;
      }
      case Op::Sub: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& gb = grads_[static_cast<std::size_t>(n.inputs[1])];
        for (std::int64_t k = 0; k < g.numel(); ++k) {
          ga.at(k) += g.at(k);
          gb.at(k) -= g.at(k);
        }
        break;
      }
      case Op::Mul: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& gb = grads_[static_cast<std::size_t>(n.inputs[1])];
        for (std::int64_t k = 0; k < g.numel(); ++k) {
          ga.at(k) += g.at(k) * b.at(k);
          gb.at(k) += g.at(k) * a.at(k);
        }
        break;
      }
      case Op::Div: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& gb = grads_[static_cast<std::size_t>(n.inputs[1])];
        for (std::int64_t k = 0; k < g.numel(); ++k) {
          ga.at(k) += g.at(k) / b.at(k);
          gb.at(k) -= g.at(k) * a.at(k) / (b.at(k) * b.at(k));
        }
        break;
      }
      case Op::MatMul: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        const Tensor& b = values_[static_cast<std::size_t>(n.inputs[1])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& gb = grads_[static_cast<std::size_t>(n.inputs[1])];
        const int r = a.shape()[0], k = a.shape()[1];
        const int c = b.rank() == 2 ? b.shape()[1] : 1;
        ConstMatMap ma(a.data().data(), r, k);
        ConstMatMap mb(b.data().data(), k, c);
        ConstMatMap mg(g.data().data(), r, c);
        MatMap mga(ga.data().data(), r, k);
        MatMap mgb(gb.data().data(), k, c);
        mga.noalias() += mg * mb.transpose();
        mgb.noalias() += ma.transpose() * mg;
        break;
      }
      case Op::Transpose: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        const int r = n.shape[0], c = n.shape[1];  // shape of the transposed output
        for (int i2 = 0; i2 < r; ++i2)
          for (int j = 0; j < c; ++j) ga.at(j, i2) += g.at(i2, j);
        break;
      }
      case Op::Broadcast: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        if (a.numel() == 1) {
          double s = 0.0;
          for (double x : g.data()) s += x;
          ga.at(0) += s;
        } else if (n.shape.size() == 2) {
          const int r = n.shape[0], c = n.shape[1];
          if (a.rank() == 2 && a.shape()[0] == r && a.shape()[1] == c) {
            for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k);
          } else if (a.rank() == 1 || a.shape()[0] == 1) {
            for (int i2 = 0; i2 < r; ++i2)
              for (int j = 0; j < c; ++j) ga.at(j) += g.at(i2, j);
          } else {
            for (int i2 = 0; i2 < r; ++i2)
              for (int j = 0; j < c; ++j) ga.at(i2) += g.at(i2, j);
          }
        } else {
          for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k);
        }
        break;
      }
      case Op::Relu: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += a.at(k) > 0.0 ? g.at(k) : 0.0;
        break;
      }
      case Op::LeakyRelu: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += a.at(k) > 0.0 ? g.at(k) : n.p0 * g.at(k);
        break;
      }
      case Op::Tanh: {
        const Tensor& y = values_[static_cast<std::size_t>(i)];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k) * (1.0 - y.at(k) * y.at(k));
        break;
      }
      case Op::Sigmoid: {
        const Tensor& y = values_[static_cast<std::size_t>(i)];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k) * y.at(k) * (1.0 - y.at(k));
        break;
      }
      case Op::Exp: {
        const Tensor& y = values_[static_cast<std::size_t>(i)];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k) * y.at(k);
        break;
      }
      case Op::Log: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k) / a.at(k);
        break;
      }
      case Op::Square: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k) * 2.0 * a.at(k);
        break;
      }
      case Op::Sqrt: {
        const Tensor& y = values_[static_cast<std::size_t>(i)];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k) * 0.5 / y.at(k);
        break;
      }
      case Op::Sin: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k) * std::cos(a.at(k));
        break;
      }
      case Op::Acos: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) {
          ga.at(k) -= g.at(k) / std::sqrt(1.0 - a.at(k) * a.at(k));
        }
        break;
      }
      case Op::Clamp: {
        const Tensor& a = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) {
          if (a.at(k) > n.p0 && a.at(k) < n.p1) ga.at(k) += g.at(k);
        }
        break;
      }
      case Op::Sum: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < ga.numel(); ++k) ga.at(k) += g.at(0);
        break;
      }
      case Op::Mean: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        const double d = g.at(0) / static_cast<double>(ga.numel());
        for (std::int64_t k = 0; k < ga.numel(); ++k) ga.at(k) += d;
        break;
      }
      case Op::RowSum:
      case Op::RowMean: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        const int r = ga.shape()[0], c = ga.shape()[1];
        for (int i2 = 0; i2 < r; ++i2) {
          const double d = n.op == Op::RowSum ? g.at(i2, 0) : g.at(i2, 0) / static_cast<double>(c);
          for (int j = 0; j < c; ++j) ga.at(i2, j) += d;
        }
        break;
      }
      case Op::Concat: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& gb = grads_[static_cast<std::size_t>(n.inputs[1])];
        if (n.shape.size() == 1) {
          std::int64_t k = 0;
          for (std::int64_t j = 0; j < ga.numel(); ++j) ga.at(j) += g.at(k++);
          for (std::int64_t j = 0; j < gb.numel(); ++j) gb.at(j) += g.at(k++);
        } else {
          const int r = n.shape[0], ca = ga.shape()[1], cb = gb.shape()[1];
          for (int i2 = 0; i2 < r; ++i2) {
            for (int j = 0; j < ca; ++j) ga.at(i2, j) += g.at(i2, j);
            for (int j = 0; j < cb; ++j) gb.at(i2, j) += g.at(i2, ca + j);
          }
        }
        break;
      }
      case Op::SliceCols: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        const int start = static_cast<int>(n.p0), len = static_cast<int>(n.p1);
        if (ga.rank() == 1) {
          for (int j = 0; j < len; ++j) ga.at(start + j) += g.at(j);
        } else {
          const int r = ga.shape()[0];
          for (int i2 = 0; i2 < r; ++i2)
            for (int j = 0; j < len; ++j) ga.at(i2, start + j) += g.at(i2, j);
        }
        break;
      }
      case Op::Reshape: {
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[0])];
        for (std::int64_t k = 0; k < g.numel(); ++k) ga.at(k) += g.at(k);
        break;
      }
      case Op::Where: {
        const Tensor& c = values_[static_cast<std::size_t>(n.inputs[0])];
        Tensor& ga = grads_[static_cast<std::size_t>(n.inputs[1])];
        Tensor& gb = grads_[static_cast<std::size_t>(n.inputs[2])];
        for (std::int64_t k = 0; k < g.numel(); ++k) {
          if (c.at(k) != 0.0) {
            ga.at(k) += g.at(k);
          } else {
            gb.at(k) += g.at(k);
          }
        }
        break;
      }
    }
  }

  NamedGrads grads;
  if (params_) {
    for (const std::string& name : params_->names()) {
      auto it = param_nodes_.find(name);
      if (it != param_nodes_.end()) {
        grads[name] = grads_[static_cast<std::size_t>(it->second)];
      } else {
        grads[name] = Tensor(params_->at(name).shape());  // zero: not on the path
      }
    }
  }
  return grads;
}

}  // namespace latentgeo
