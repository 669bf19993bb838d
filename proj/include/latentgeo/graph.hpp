#pragma once

#include <map>
#include <string>
#include <vector>

#include "latentgeo/tensor.hpp"

namespace latentgeo {

// Named trainable tensors. Creation order is the canonical parameter order
// used by checkpoints and the finite-difference oracle.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Tensor init);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::int64_t total_scalars() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor> values_;
};

using NamedGrads = std::map<std::string, Tensor>;
using Bindings = std::map<std::string, Tensor>;

// Reverse-mode automatic differentiation over a static computation graph.
//
// A Graph is built once (shapes fixed), then run many times: forward() binds
// placeholder tensors and evaluates every node in topological order (node ids
// are assigned in construction order, so inputs always precede their users);
// backward() walks the tape once in reverse and returns d(output)/d(param)
// for every parameter in the attached store, zero tensors for parameters the
// output does not depend on.
class Graph {
 public:
  struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  explicit Graph(const ParamStore* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaves.
  Value placeholder(const std::string& name, std::vector<int> shape);
  Value param(const std::string& name);  // shape taken from the store
  Value constant(Tensor value);

  // Primitive ops. Binary elementwise ops require exactly matching shapes;
  // use broadcast() to align operands first.
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value div(Value a, Value b);
  Value matmul(Value a, Value b);  // [r,k]x[k,c] -> [r,c]; [r,k]x[k] -> [r]
  Value transpose(Value a);        // 2-D only
  Value broadcast(Value a, std::vector<int> target_shape);
  Value relu(Value a);
  Value leaky_relu(Value a, double slope = 0.01);
  Value tanh(Value a);
  Value sigmoid(Value a);
  Value exp(Value a);
  Value log(Value a);
  Value square(Value a);
  Value sqrt(Value a);
  Value sin(Value a);
  Value acos(Value a);
  Value clamp(Value a, double lo, double hi);
  Value sum(Value a);       // all elements -> [1]
  Value mean(Value a);      // all elements -> [1]
  Value row_sum(Value a);   // [r,c] -> [r,1]
  Value row_mean(Value a);  // [r,c] -> [r,1]
  Value concat(Value a, Value b);             // rank-1 or along columns of rank-2
  Value slice_cols(Value a, int start, int len);  // rank-2; rank-1 treated as single row
  Value reshape(Value a, std::vector<int> shape);
  // Selection: cond entries are 0/1; gradient flows into the taken branch
  // only, cond gets none.
  Value where(Value cond, Value a, Value b);
  Value less_than(Value a, double threshold);  // 0/1 output, no gradient

  // By value: building further nodes may reallocate the node table.
  std::vector<int> shape_of(Value v) const;

  // Execution. forward() evaluates every node; repeated calls rebind.
  const Tensor& forward(const Bindings& inputs, Value output);
  double forward_scalar(const Bindings& inputs, Value output);

  // d(output)/d(param) for every parameter in the store. Requires a
  // preceding forward() and a scalar output.
  NamedGrads backward(Value output);

  // Value of any node from the last forward pass.
  const Tensor& value_of(Value v) const;
  // Gradient of the last backward()'s output w.r.t. any node.
  const Tensor& grad_of(Value v) const;

  const ParamStore* params() const { return params_; }

 private:
  enum class Op {
    Placeholder, Param, Const,
    Add, Sub, Mul, Div, MatMul, Transpose, Broadcast,
    Relu, LeakyRelu, Tanh, Sigmoid, Exp, Log, Square, Sqrt, Sin, Acos, Clamp,
    Sum, Mean, RowSum, RowMean, Concat, SliceCols, Reshape, Where, LessThan,
  };

  struct Node {
    Op op;
    std::vector<int> inputs;
    std::vector<int> shape;
    std::string name;    // placeholder/param name
    Tensor constant;     // Const payload
    double p0 = 0.0, p1 = 0.0;  // op parameters (slope, clamp bounds, slice, threshold)
  };

  Value push(Node n);
  const Node& node(Value v) const;
  void check_built(Value v) const;
  static const char* op_name(Op op);

  const ParamStore* params_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::map<std::string, int> param_nodes_;  // one node per parameter name
  bool forward_done_ = false;
};

}  // namespace latentgeo
