#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// A Graph is built once (define), then evaluated any number of times with
// fresh input bindings (run). Node ids are assigned in creation order, which
// is a topological order, so forward walks ids upward and backward walks them
// downward. Inputs created with differentiable=true, and every node that
// depends on one, accumulate gradients.

#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cluekit/tensor.hpp"

namespace cluekit::ad {

enum class Op : std::uint8_t {
  Input,
  Constant,
  Affine,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Shift,
  Tanh,
  Relu,
  Sigmoid,
  Exp,
  Log,
  XLogX,
  Reciprocal,
  Softmax,
  LogSoftmax,
  Sum,
  Mean,
  NormL1,
  SquaredNormL2,
  NormL2,
  Concat,
  Reshape,
  Det,
  ElementMax,
  Pick,
  CrossEntropy,
  BceWithLogits,
};

const char* op_name(Op op);

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Shape& shape() const;
  const Tensor& value() const;
  const Tensor& grad() const;

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Declares a leaf that must be bound before every forward().
  Var input(std::string name, Shape shape, bool differentiable = true);
  Var constant(Tensor value);

  void bind(Var input, Tensor value);
  void forward();
  void forward(std::initializer_list<std::pair<Var, Tensor>> bindings);
  /// Binds inputs by the names given to input().
  void forward(const std::map<std::string, Tensor>& bindings);

  /// Seeds d(output)/d(output) = 1 elementwise and propagates to all tracked
  /// nodes. Requires a forward() since the last bind().
  void backward(Var output);
  void backward(Var output, const Tensor& seed);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  const Shape& shape(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Labels every node created while alive; the label appears in numerical
  /// error messages.
  class Scope {
   public:
    Scope(Graph& g, std::string label);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph& g_;
    std::uint16_t previous_;
  };

  Var make(Op op, std::vector<std::uint32_t> inputs, Shape shape, double attr = 0.0,
           std::vector<std::size_t> iattr = {});

 private:
  struct Node {
    Op op;
    std::vector<std::uint32_t> inputs;
    Shape shape;
    double attr = 0.0;
    std::vector<std::size_t> iattr;
    std::vector<std::size_t> aux;  // runtime bookkeeping (argmax routes)
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool bound = false;
    std::uint16_t scope = 0;
    std::string name;
  };

  void eval(Node& n);
  void backprop(Node& n);
  Tensor& grad_of(std::uint32_t id) { return nodes_[id].grad; }
  bool tracked(std::uint32_t id) const { return nodes_[id].requires_grad; }
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::string> scopes_;
  std::uint16_t current_scope_ = 0;
  bool forwarded_ = false;
};

// Op constructors. Shapes are checked when the node is created.
Var affine(Var x, Var w, Var b);
Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double s, Var a);
Var operator+(Var a, double s);
Var operator-(Var a);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var xlogx(Var a);
Var reciprocal(Var a);
Var softmax(Var a);
Var log_softmax(Var a);
Var sum(Var a);
Var mean(Var a);
Var norm_l1(Var a);
Var squared_norm_l2(Var a);
Var norm_l2(Var a);
Var concat(const std::vector<Var>& parts);
Var reshape(Var a, Shape shape);
Var det(Var a);
Var element_max(const std::vector<Var>& parts);
Var pick(Var a, std::size_t index);
/// Mean over rows of -log softmax(logits)[label].
Var cross_entropy(Var logits, const std::vector<int>& labels);
/// Sum of elementwise Bernoulli negative log-likelihood given logits.
Var bce_with_logits(Var logits, Var target);

}  // namespace cluekit::ad
