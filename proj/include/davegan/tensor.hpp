#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace davegan {

#ifdef DAVEGAN_REAL32
using real_t = float;
#else
using real_t = double;
#endif

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims) : dims_(dims) { validate(); }
  explicit Shape(std::vector<int> dims) : dims_(std::move(dims)) { validate(); }

  int rank() const { return static_cast<int>(dims_.size()); }
  int operator[](int i) const { return dims_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t numel() const;
  bool operator==(const Shape& o) const { return dims_ == o.dims_; }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;  // e.g. "[2, 3, 8, 8]"

 private:
  void validate() const;  // extents must be positive
  std::vector<int> dims_;
};

// A named trainable parameter. Lives outside any tape; gradients accumulate
// additively into grad() across backward passes until zero_grad().
class Variable {
 public:
  Variable(std::string name, Shape shape, std::vector<real_t> value);
  static Variable zeros(std::string name, Shape shape);

  const std::string& name() const { return name_; }
  const Shape& shape() const { return shape_; }
  std::vector<real_t>& value() { return value_; }
  const std::vector<real_t>& value() const { return value_; }
  std::vector<real_t>& grad() { return grad_; }
  const std::vector<real_t>& grad() const { return grad_; }
  std::size_t numel() const { return value_.size(); }
  void zero_grad();

 private:
  std::string name_;
  Shape shape_;
  std::vector<real_t> value_;
  std::vector<real_t> grad_;
};

class Tape;

// Immutable value handle. A Tensor produced by an op on a live tape carries
// (tape, node) so backward can reach it; a detached Tensor is just data.
// Copies share the underlying buffer.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<real_t> data);  // detached
  static Tensor scalar(real_t v) { return Tensor(Shape{}, {v}); }
  static Tensor full(Shape shape, real_t v);

  const Shape& shape() const { return shape_; }
  const std::vector<real_t>& data() const { return *data_; }
  const std::shared_ptr<const std::vector<real_t>>& data_ptr() const { return data_; }
  std::size_t numel() const { return data_ ? data_->size() : 0; }
  real_t item() const;  // requires numel() == 1
  bool attached() const { return tape_ != nullptr; }
  Tensor detach() const { return Tensor(shape_, data_, nullptr, -1); }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<const std::vector<real_t>> data, Tape* tape, int node)
      : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {}

  Shape shape_;
  std::shared_ptr<const std::vector<real_t>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Dynamic gradient tape. Ops append nodes as they execute; backward walks the
// node list once in reverse, so evaluation order is the topological order.
// Typical use: rebuild per training pass via clear(), watch the parameters,
// run the forward computation, call backward on the scalar loss.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor watch(Variable& v);

  // Seeds d(loss)/d(loss) = 1 and accumulates into the grad() of every
  // watched Variable the loss depends on. Throws if loss is not a scalar
  // recorded on this tape.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }
  std::size_t node_count() const { return nodes_.size(); }

  // --- recording interface, used by op implementations ---
  using BackFn = std::function<void(Tape&, const std::vector<real_t>&)>;
  Tensor emit(Shape shape, std::vector<real_t> data, BackFn back);
  // Adjoint buffer of a node, allocated to zeros on first touch. Returns
  // nullptr for node < 0 so ops can pass a detached parent straight through.
  real_t* adjoint_ptr(int node, std::size_t n);
  // adjoint += g, elementwise; negative node (detached parent) is a no-op
  void accumulate(int node, const real_t* g, std::size_t n);

 private:
  struct Node {
    std::size_t size;
    BackFn back;                  // null for leaves
    Variable* leaf = nullptr;
    std::vector<real_t> adjoint;  // allocated on first accumulate
  };
  std::vector<Node> nodes_;
};

// --- primitive ops ---
// Binary ops broadcast when one operand is a scalar or its shape is a
// trailing suffix of the other's (the adjoint then sums over leading dims).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor log(const Tensor& a);   // throws on input <= 0
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);  // throws on input < 0
Tensor clamp(const Tensor& a, real_t lo, real_t hi);  // adjoint masked outside [lo, hi]

// axes empty = reduce everything (to a rank-0 scalar); duplicate axes invalid
Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes = {});
Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes = {});

Tensor reshape(const Tensor& a, Shape shape);  // numel must match
Tensor narrow(const Tensor& a, int axis, int start, int len);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, real_t b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator+(real_t a, const Tensor& b) { return add(Tensor::scalar(a), b); }
inline Tensor operator-(const Tensor& a, real_t b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator-(real_t a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
inline Tensor operator*(const Tensor& a, real_t b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator*(real_t a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
inline Tensor operator/(const Tensor& a, real_t b) { return div(a, Tensor::scalar(b)); }
inline Tensor operator/(real_t a, const Tensor& b) { return div(Tensor::scalar(a), b); }

}  // namespace davegan
