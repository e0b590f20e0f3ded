#include "davegan/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace davegan {

void Shape::validate() const {
  for (int d : dims_)
    if (d <= 0) throw std::invalid_argument("Shape: extents must be positive, got " + str());
}

std::size_t Shape::numel() const {
  std::size_t n = 1;
  for (int d : dims_) n *= static_cast<std::size_t>(d);
  return n;
}

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

Variable::Variable(std::string name, Shape shape, std::vector<real_t> value)
    : name_(std::move(name)), shape_(std::move(shape)), value_(std::move(value)) {
  if (value_.size() != shape_.numel())
    throw std::invalid_argument("Variable " + name_ + ": value size " +
                                std::to_string(value_.size()) + " does not match shape " +
                                shape_.str());
  grad_.assign(value_.size(), 0);
}

Variable Variable::zeros(std::string name, Shape shape) {
  std::vector<real_t> v(shape.numel(), 0);
  return Variable(std::move(name), std::move(shape), std::move(v));
}

void Variable::zero_grad() { std::fill(grad_.begin(), grad_.end(), real_t{0}); }

Tensor::Tensor(Shape shape, std::vector<real_t> data) : shape_(std::move(shape)) {
  if (data.size() != shape_.numel())
    throw std::invalid_argument("Tensor: data size " + std::to_string(data.size()) +
                                " does not match shape " + shape_.str());
  data_ = std::make_shared<const std::vector<real_t>>(std::move(data));
}

Tensor Tensor::full(Shape shape, real_t v) {
  std::vector<real_t> d(shape.numel(), v);
  return Tensor(std::move(shape), std::move(d));
}

real_t Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item: tensor has shape " + shape_.str() + ", expected one element");
  return (*data_)[0];
}

Tensor Tape::watch(Variable& v) {
  nodes_.push_back(Node{v.numel(), nullptr, &v, {}});
  auto data = std::make_shared<const std::vector<real_t>>(v.value());
  return Tensor(v.shape(), std::move(data), this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::emit(Shape shape, std::vector<real_t> data, BackFn back) {
  if (data.size() != shape.numel())
    throw std::logic_error("emit: data size does not match shape " + shape.str());
  nodes_.push_back(Node{data.size(), std::move(back), nullptr, {}});
  auto sp = std::make_shared<const std::vector<real_t>>(std::move(data));
  return Tensor(std::move(shape), std::move(sp), this, static_cast<int>(nodes_.size()) - 1);
}

real_t* Tape::adjoint_ptr(int node, std::size_t n) {
  if (node < 0) return nullptr;
  Node& nd = nodes_[static_cast<std::size_t>(node)];
  if (nd.size != n)
    throw std::logic_error("adjoint size mismatch: node holds " + std::to_string(nd.size) +
                           " elements, op expects " + std::to_string(n));
  if (nd.adjoint.empty()) nd.adjoint.assign(nd.size, 0);
  return nd.adjoint.data();
}

void Tape::accumulate(int node, const real_t* g, std::size_t n) {
  if (real_t* adj = adjoint_ptr(node, n))
    for (std::size_t i = 0; i < n; ++i) adj[i] += g[i];
}

void Tape::backward(const Tensor& loss) {
  if (!loss.attached() || loss.tape() != this)
    throw std::invalid_argument("backward: loss is not recorded on this tape");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + loss.shape().str());
  for (Node& nd : nodes_) nd.adjoint.clear();
  nodes_[static_cast<std::size_t>(loss.node())].adjoint.assign(1, 1);
  for (int i = loss.node(); i >= 0; --i) {
    Node& nd = nodes_[static_cast<std::size_t>(i)];
    if (nd.adjoint.empty()) continue;  // not on the path to the loss
    if (nd.leaf) {
      std::vector<real_t>& g = nd.leaf->grad();
      for (std::size_t j = 0; j < nd.size; ++j) g[j] += nd.adjoint[j];
    } else if (nd.back) {
      nd.back(*this, nd.adjoint);
    }
  }
}

namespace {

// Broadcast layout of a binary op. "Block" means the smaller operand's shape
// is a trailing suffix of the larger's: it repeats as contiguous blocks.
enum class BPath { Equal, ScalarA, ScalarB, BlockA, BlockB };

bool is_suffix(const Shape& small, const Shape& big) {
  int rs = small.rank(), rb = big.rank();
  if (rs >= rb) return false;
  for (int i = 0; i < rs; ++i)
    if (small[i] != big[rb - rs + i]) return false;
  return true;
}

BPath broadcast_path(const char* op, const Tensor& a, const Tensor& b) {
  if (a.numel() == 0 || b.numel() == 0)
    throw std::invalid_argument(std::string(op) + ": empty tensor operand");
  if (a.shape() == b.shape()) return BPath::Equal;
  if (a.numel() == 1 && b.numel() == 1)  // keep the higher-rank shape
    return b.shape().rank() > a.shape().rank() ? BPath::ScalarA : BPath::ScalarB;
  if (b.numel() == 1) return BPath::ScalarB;
  if (a.numel() == 1) return BPath::ScalarA;
  if (is_suffix(b.shape(), a.shape())) return BPath::BlockB;
  if (is_suffix(a.shape(), b.shape())) return BPath::BlockA;
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape().str() +
                              " and " + b.shape().str());
}

Tape* result_tape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.attached() && b.attached() && a.tape() != b.tape())
    throw std::invalid_argument(std::string(op) + ": operands recorded on different tapes");
  return a.attached() ? a.tape() : b.tape();
}

// f(av, bv) -> out; dfda(av, bv, ov), dfdb(av, bv, ov) -> partials
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA dfda, DB dfdb) {
  BPath p = broadcast_path(op, a, b);
  bool a_big = (p == BPath::Equal || p == BPath::ScalarB || p == BPath::BlockB);
  const Tensor& big = a_big ? a : b;
  const std::size_t n = big.numel();
  const std::size_t m = (a_big ? b : a).numel();
  const real_t* pa = a.data().data();
  const real_t* pb = b.data().data();

  std::vector<real_t> out(n);
  switch (p) {
    case BPath::Equal:
      for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i], pb[i]);
      break;
    case BPath::ScalarB: {
      const real_t vb = pb[0];
      for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i], vb);
      break;
    }
    case BPath::ScalarA: {
      const real_t va = pa[0];
      for (std::size_t i = 0; i < n; ++i) out[i] = f(va, pb[i]);
      break;
    }
    case BPath::BlockB:
      for (std::size_t base = 0; base < n; base += m)
        for (std::size_t j = 0; j < m; ++j) out[base + j] = f(pa[base + j], pb[j]);
      break;
    case BPath::BlockA:
      for (std::size_t base = 0; base < n; base += m)
        for (std::size_t j = 0; j < m; ++j) out[base + j] = f(pa[j], pb[base + j]);
      break;
  }

  Tape* tape = result_tape(op, a, b);
  if (!tape) return Tensor(big.shape(), std::move(out));

  auto sa = a.data_ptr();
  auto sb = b.data_ptr();
  const int anode = a.attached() ? a.node() : -1;
  const int bnode = b.attached() ? b.node() : -1;
  const std::size_t na = a.numel(), nb = b.numel();
  auto back = [=](Tape& t, const std::vector<real_t>& g) {
    const real_t* qa = sa->data();
    const real_t* qb = sb->data();
    if (real_t* ga = t.adjoint_ptr(anode, na)) {
      switch (p) {
        case BPath::Equal:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * dfda(qa[i], qb[i]);
          break;
        case BPath::ScalarB:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * dfda(qa[i], qb[0]);
          break;
        case BPath::ScalarA:
          for (std::size_t i = 0; i < n; ++i) ga[0] += g[i] * dfda(qa[0], qb[i]);
          break;
        case BPath::BlockB:
          for (std::size_t base = 0; base < n; base += m)
            for (std::size_t j = 0; j < m; ++j)
              ga[base + j] += g[base + j] * dfda(qa[base + j], qb[j]);
          break;
        case BPath::BlockA:
          for (std::size_t base = 0; base < n; base += m)
            for (std::size_t j = 0; j < m; ++j) ga[j] += g[base + j] * dfda(qa[j], qb[base + j]);
          break;
      }
    }
    if (real_t* gb = t.adjoint_ptr(bnode, nb)) {
      switch (p) {
        case BPath::Equal:
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * dfdb(qa[i], qb[i]);
          break;
        case BPath::ScalarB:
          for (std::size_t i = 0; i < n; ++i) gb[0] += g[i] * dfdb(qa[i], qb[0]);
          break;
        case BPath::ScalarA:
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * dfdb(qa[0], qb[i]);
          break;
        case BPath::BlockB:
          for (std::size_t base = 0; base < n; base += m)
            for (std::size_t j = 0; j < m; ++j)
              gb[j] += g[base + j] * dfdb(qa[base + j], qb[j]);
          break;
        case BPath::BlockA:
          for (std::size_t base = 0; base < n; base += m)
            for (std::size_t j = 0; j < m; ++j)
              gb[base + j] += g[base + j] * dfdb(qa[j], qb[base + j]);
          break;
      }
    }
  };
  return tape->emit(big.shape(), std::move(out), std::move(back));
}

// f(av) -> out; dfdx(av, ov) -> derivative
template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D dfdx) {
  if (a.numel() == 0) throw std::invalid_argument(std::string(op) + ": empty tensor");
  const std::size_t n = a.numel();
  const real_t* pa = a.data().data();
  std::vector<real_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i]);

  if (!a.attached()) return Tensor(a.shape(), std::move(out));
  Tape* tape = a.tape();
  auto sa = a.data_ptr();
  auto so = std::make_shared<const std::vector<real_t>>(std::move(out));
  const int anode = a.node();
  auto back = [=](Tape& t, const std::vector<real_t>& g) {
    if (real_t* ga = t.adjoint_ptr(anode, n)) {
      const real_t* qa = sa->data();
      const real_t* qo = so->data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * dfdx(qa[i], qo[i]);
    }
  };
  return tape->emit(a.shape(), std::vector<real_t>(*so), std::move(back));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](real_t x, real_t y) { return x + y; },
      [](real_t, real_t) { return real_t{1}; }, [](real_t, real_t) { return real_t{1}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](real_t x, real_t y) { return x - y; },
      [](real_t, real_t) { return real_t{1}; }, [](real_t, real_t) { return real_t{-1}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](real_t x, real_t y) { return x * y; },
      [](real_t, real_t y) { return y; }, [](real_t x, real_t) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](real_t x, real_t y) { return x / y; },
      [](real_t, real_t y) { return real_t{1} / y; },
      [](real_t x, real_t y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary(
      "neg", a, [](real_t x) { return -x; }, [](real_t, real_t) { return real_t{-1}; });
}

Tensor log(const Tensor& a) {
  const real_t* p = a.data_ptr() ? a.data().data() : nullptr;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (p[i] <= 0)
      throw std::domain_error("log: input " + std::to_string(p[i]) + " at index " +
                              std::to_string(i) + " is not positive");
  return unary(
      "log", a, [](real_t x) { return std::log(x); },
      [](real_t x, real_t) { return real_t{1} / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](real_t x) { return std::exp(x); }, [](real_t, real_t o) { return o; });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](real_t x) { return x * x; },
      [](real_t x, real_t) { return real_t{2} * x; });
}

Tensor sqrt(const Tensor& a) {
  const real_t* p = a.data_ptr() ? a.data().data() : nullptr;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (p[i] < 0)
      throw std::domain_error("sqrt: input " + std::to_string(p[i]) + " at index " +
                              std::to_string(i) + " is negative");
  return unary(
      "sqrt", a, [](real_t x) { return std::sqrt(x); },
      [](real_t, real_t o) { return real_t{0.5} / o; });
}

Tensor clamp(const Tensor& a, real_t lo, real_t hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary(
      "clamp", a,
      [lo, hi](real_t x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](real_t x, real_t) { return (x >= lo && x <= hi) ? real_t{1} : real_t{0}; });
}

namespace {

// Reduction bookkeeping shared by sum and mean. Walks the input linearly with
// an odometer multi-index; reduced axes contribute stride 0 to the out index.
struct ReducePlan {
  Shape out_shape;
  std::vector<int> dims;
  std::vector<std::size_t> ostride;  // per input axis, 0 if reduced
  std::size_t out_n;
};

ReducePlan plan_reduce(const char* op, const Tensor& a, const std::vector<int>& axes) {
  if (a.numel() == 0) throw std::invalid_argument(std::string(op) + ": empty tensor");
  const int rank = a.shape().rank();
  std::vector<bool> reduced(static_cast<std::size_t>(rank), axes.empty());
  for (int ax : axes) {
    if (ax < 0 || ax >= rank)
      throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(ax) +
                                  " out of range for shape " + a.shape().str());
    if (reduced[static_cast<std::size_t>(ax)])
      throw std::invalid_argument(std::string(op) + ": duplicate axis " + std::to_string(ax));
    reduced[static_cast<std::size_t>(ax)] = true;
  }
  ReducePlan plan;
  plan.dims = a.shape().dims();
  std::vector<int> out_dims;
  for (int i = 0; i < rank; ++i)
    if (!reduced[static_cast<std::size_t>(i)]) out_dims.push_back(plan.dims[static_cast<std::size_t>(i)]);
  plan.out_shape = Shape(out_dims);
  plan.out_n = plan.out_shape.numel();
  plan.ostride.assign(static_cast<std::size_t>(rank), 0);
  std::size_t s = 1;
  for (int i = rank - 1; i >= 0; --i) {
    if (!reduced[static_cast<std::size_t>(i)]) {
      plan.ostride[static_cast<std::size_t>(i)] = s;
      s *= static_cast<std::size_t>(plan.dims[static_cast<std::size_t>(i)]);
    }
  }
  return plan;
}

// calls visit(in_index, out_index) for every input element
template <class V>
void reduce_walk(const ReducePlan& plan, std::size_t n, V visit) {
  const int rank = static_cast<int>(plan.dims.size());
  std::vector<int> idx(static_cast<std::size_t>(rank), 0);
  std::size_t oi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    visit(i, oi);
    for (int ax = rank - 1; ax >= 0; --ax) {
      auto u = static_cast<std::size_t>(ax);
      ++idx[u];
      oi += plan.ostride[u];
      if (idx[u] < plan.dims[u]) break;
      idx[u] = 0;
      oi -= static_cast<std::size_t>(plan.dims[u]) * plan.ostride[u];
    }
  }
}

Tensor reduce_impl(const char* op, const Tensor& a, const std::vector<int>& axes, bool mean) {
  ReducePlan plan = plan_reduce(op, a, axes);
  const std::size_t n = a.numel();
  const real_t* pa = a.data().data();
  const real_t scale = mean ? real_t{1} / static_cast<real_t>(n / plan.out_n) : real_t{1};

  std::vector<real_t> out(plan.out_n, 0);
  if (plan.out_n == 1) {
    real_t acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += pa[i];
    out[0] = acc * scale;
  } else {
    reduce_walk(plan, n, [&](std::size_t i, std::size_t oi) { out[oi] += pa[i]; });
    if (mean)
      for (real_t& v : out) v *= scale;
  }

  if (!a.attached()) return Tensor(plan.out_shape, std::move(out));
  Tape* tape = a.tape();
  const int anode = a.node();
  auto back = [=](Tape& t, const std::vector<real_t>& g) {
    if (real_t* ga = t.adjoint_ptr(anode, n)) {
      if (plan.out_n == 1) {
        const real_t gv = g[0] * scale;
        for (std::size_t i = 0; i < n; ++i) ga[i] += gv;
      } else {
        reduce_walk(plan, n, [&](std::size_t i, std::size_t oi) { ga[i] += g[oi] * scale; });
      }
    }
  };
  return tape->emit(plan.out_shape, std::move(out), std::move(back));
}

}  // namespace

Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes) {
  return reduce_impl("reduce_sum", a, axes, false);
}

Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes) {
  return reduce_impl("reduce_mean", a, axes, true);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (a.numel() != shape.numel())
    throw std::invalid_argument("reshape: cannot view " + a.shape().str() + " as " + shape.str());
  if (!a.attached()) return Tensor(std::move(shape), std::vector<real_t>(a.data()));
  Tape* tape = a.tape();
  const int anode = a.node();
  const std::size_t n = a.numel();
  auto back = [=](Tape& t, const std::vector<real_t>& g) {
    if (real_t* ga = t.adjoint_ptr(anode, n))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
  };
  return tape->emit(std::move(shape), std::vector<real_t>(a.data()), std::move(back));
}

Tensor narrow(const Tensor& a, int axis, int start, int len) {
  const int rank = a.shape().rank();
  if (axis < 0 || axis >= rank)
    throw std::invalid_argument("narrow: axis " + std::to_string(axis) + " out of range for " +
                                a.shape().str());
  const int extent = a.shape()[axis];
  if (len < 1 || start < 0 || start + len > extent)
    throw std::invalid_argument("narrow: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") invalid for extent " +
                                std::to_string(extent));
  std::size_t pre = 1, post = 1;
  for (int i = 0; i < axis; ++i) pre *= static_cast<std::size_t>(a.shape()[i]);
  for (int i = axis + 1; i < rank; ++i) post *= static_cast<std::size_t>(a.shape()[i]);

  std::vector<int> out_dims = a.shape().dims();
  out_dims[static_cast<std::size_t>(axis)] = len;
  Shape out_shape(out_dims);

  const real_t* pa = a.data().data();
  std::vector<real_t> out(out_shape.numel());
  const std::size_t ue = static_cast<std::size_t>(extent), ul = static_cast<std::size_t>(len),
                    us = static_cast<std::size_t>(start);
  for (std::size_t p = 0; p < pre; ++p)
    for (std::size_t l = 0; l < ul; ++l)
      std::memcpy(&out[(p * ul + l) * post], &pa[(p * ue + us + l) * post], post * sizeof(real_t));

  if (!a.attached()) return Tensor(std::move(out_shape), std::move(out));
  Tape* tape = a.tape();
  const int anode = a.node();
  const std::size_t n = a.numel();
  auto back = [=](Tape& t, const std::vector<real_t>& g) {
    if (real_t* ga = t.adjoint_ptr(anode, n))
      for (std::size_t p = 0; p < pre; ++p)
        for (std::size_t l = 0; l < ul; ++l) {
          const real_t* gs = &g[(p * ul + l) * post];
          real_t* gd = &ga[(p * ue + us + l) * post];
          for (std::size_t q = 0; q < post; ++q) gd[q] += gs[q];
        }
  };
  return tape->emit(std::move(out_shape), std::move(out), std::move(back));
}

}  // namespace davegan
