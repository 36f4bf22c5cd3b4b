#pragma once

// Reverse-mode autodiff over dense row-major tensors of rank <= 3.
//
// A Tape records operations as they execute. Leaves are either constants,
// differentiable inputs, or Parameters owned by a ParamStore; backward()
// accumulates into Parameter::grad and into input nodes, then frees every
// intermediate buffer. A tape can run backward once.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace riframe::ad {

// 64-byte aligned so vectorized reductions sum in the same order no matter
// where the heap places a buffer; keeps repeated runs bit-identical.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

struct Shape {
  std::array<int, 3> dims{1, 1, 1};
  int rank = 0;

  Shape() = default;
  Shape(std::initializer_list<int> d);
  static Shape of(std::span<const int> d);

  int operator[](int i) const { return dims[i]; }
  std::size_t size() const;
  /// Product of all but the last dimension.
  int rows() const;
  int cols() const { return rank == 0 ? 1 : dims[rank - 1]; }
  std::string str() const;
  bool operator==(const Shape& o) const;
};

template <class T>
struct Parameter {
  std::string name;
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;
  Buffer<T> momentum;
  bool decay = true;  // biases are exempt from weight decay
};

template <class T>
class ParamStore {
 public:
  /// He-style uniform init in gain * [-sqrt(6/fan_in), sqrt(6/fan_in)].
  Parameter<T>& add(const std::string& name, Shape shape, int fan_in, std::mt19937_64& rng, double gain = 1.0);
  Parameter<T>& add_zero(const std::string& name, Shape shape, bool decay = false);

  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::deque<Parameter<T>>& all() { return params_; }
  const std::deque<Parameter<T>>& all() const { return params_; }
  std::size_t count() const;

  void zero_grad();
  /// Rescales all gradients so their joint L2 norm is at most max_norm.
  /// Returns the norm before clipping.
  T clip_grad_norm(T max_norm);
  /// SGD with momentum and decoupled-from-bias weight decay.
  void sgd_step(T lr, T momentum, T weight_decay);

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) {
      auto& q = out.add_zero(p.name, p.shape, p.decay);
      for (std::size_t i = 0; i < p.value.size(); ++i) q.value[i] = static_cast<U>(p.value[i]);
    }
    return out;
  }

 private:
  std::deque<Parameter<T>> params_;  // stable addresses for Tape::param
};

struct Var {
  int id = -1;
};

template <class T>
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var constant(Shape shape, std::vector<T> data);
  Var input(Shape shape, std::vector<T> data);  // differentiable, grad kept
  Var param(Parameter<T>& p);

  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  const Buffer<T>& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of an input leaf after backward (empty if unreached).
  const Buffer<T>& grad(Var v) const { return nodes_[v.id].grad; }
  T scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Linear algebra.
  Var matmul(Var a, Var b);      // (n,k)(k,m)
  Var affine(Var x, Var w, Var b);  // x w + b, b broadcast over rows
  Var bmm(Var a, Var b);         // (B,n,k)(B,k,m)
  Var transpose(Var a);          // swaps the last two axes
  Var reshape(Var a, Shape s);

  // Elementwise.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scalar_mul(Var a, T s);
  Var add_bias(Var a, Var bias);  // bias has cols() entries, added to every row
  Var relu(Var a);
  Var leaky_relu(Var a, T slope = T(0.2));
  Var exp(Var a);
  Var log(Var a);

  // Row-wise over the last axis.
  Var row_softmax(Var a);
  Var l1_normalize_rows(Var a);
  Var l2_normalize_rows(Var a);
  /// (x - mean) / sqrt(var + eps) per row, no learned affine.
  Var layer_norm_rows(Var a, T eps = T(1e-5));

  // Reductions and structure.
  Var max_over_axis(Var a, int axis);
  Var mean_over_axis(Var a, int axis);
  Var sum(Var a);
  Var concat(Var a, Var b, int axis);
  Var gather_rows(Var a, std::span<const int> rows);  // 2-D only
  /// Mean cross entropy of row logits against integer labels.
  Var cross_entropy_logits(Var logits, std::span<const int> labels);

  void backward(Var loss);
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Shape shape;
    Buffer<T> value;
    Buffer<T> grad;
    std::function<void()> back;  // reads this node's grad, accumulates parents
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
    bool keep_grad = false;
  };

  Var push(Shape shape, Buffer<T> value, bool needs_grad);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  Buffer<T>& gbuf(Var v);  // lazily allocated grad buffer of v
  void check_same(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace riframe::ad
