#include "riframe/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <malloc.h>
#include <mutex>
#include <numeric>

#include "riframe/error.hpp"

namespace riframe::ad {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Map = Eigen::Map<MatR<T>>;
template <class T>
using CMap = Eigen::Map<const MatR<T>>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + a.str() + " vs " + b.str());
}

// (outer, axis length, inner) view of a shape around one axis.
struct AxisView {
  int outer, len, inner;
};

AxisView around(const Shape& s, int axis) {
  AxisView v{1, s.dims[axis], 1};
  for (int i = 0; i < axis; ++i) v.outer *= s.dims[i];
  for (int i = axis + 1; i < s.rank; ++i) v.inner *= s.dims[i];
  return v;
}

Shape drop_axis(const Shape& s, int axis) {
  std::vector<int> d;
  for (int i = 0; i < s.rank; ++i)
    if (i != axis) d.push_back(s.dims[i]);
  return Shape::of(d);
}

}  // namespace

Shape::Shape(std::initializer_list<int> d) {
  if (d.size() > 3) throw Error(ErrorCode::ShapeMismatch, "rank > 3");
  rank = static_cast<int>(d.size());
  int i = 0;
  for (int x : d) dims[i++] = x;
}

Shape Shape::of(std::span<const int> d) {
  if (d.size() > 3) throw Error(ErrorCode::ShapeMismatch, "rank > 3");
  Shape s;
  s.rank = static_cast<int>(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) s.dims[i] = d[i];
  return s;
}

std::size_t Shape::size() const {
  std::size_t n = 1;
  for (int i = 0; i < rank; ++i) n *= static_cast<std::size_t>(dims[i]);
  return n;
}

int Shape::rows() const {
  int n = 1;
  for (int i = 0; i + 1 < rank; ++i) n *= dims[i];
  return n;
}

std::string Shape::str() const {
  std::string s = "(";
  for (int i = 0; i < rank; ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + ")";
}

bool Shape::operator==(const Shape& o) const {
  if (rank != o.rank) return false;
  for (int i = 0; i < rank; ++i)
    if (dims[i] != o.dims[i]) return false;
  return true;
}

// ---------------------------------------------------------------- params

template <class T>
Parameter<T>& ParamStore<T>::add(const std::string& name, Shape shape, int fan_in, std::mt19937_64& rng,
                                  double gain) {
  auto& p = add_zero(name, shape, true);
  const double bound = gain * std::sqrt(6.0 / std::max(1, fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : p.value) v = static_cast<T>(u(rng));
  return p;
}

template <class T>
Parameter<T>& ParamStore<T>::add_zero(const std::string& name, Shape shape, bool decay) {
  if (contains(name)) throw Error(ErrorCode::BadSpec, "duplicate parameter " + name);
  Parameter<T> p;
  p.name = name;
  p.shape = shape;
  p.value.assign(shape.size(), T(0));
  p.grad.assign(shape.size(), T(0));
  p.momentum.assign(shape.size(), T(0));
  p.decay = decay;
  params_.push_back(std::move(p));
  return params_.back();
}

template <class T>
Parameter<T>& ParamStore<T>::get(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw Error(ErrorCode::BadSpec, "no parameter " + name);
}

template <class T>
const Parameter<T>& ParamStore<T>::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw Error(ErrorCode::BadSpec, "no parameter " + name);
}

template <class T>
bool ParamStore<T>::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.name == name; });
}

template <class T>
std::size_t ParamStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <class T>
T ParamStore<T>::clip_grad_norm(T max_norm) {
  double sq = 0.0;
  for (const auto& p : params_)
    for (T g : p.grad) sq += static_cast<double>(g) * g;
  const T norm = static_cast<T>(std::sqrt(sq));
  if (norm > max_norm && norm > T(0)) {
    const T s = max_norm / norm;
    for (auto& p : params_)
      for (auto& g : p.grad) g *= s;
  }
  return norm;
}

template <class T>
void ParamStore<T>::sgd_step(T lr, T momentum, T weight_decay) {
  for (auto& p : params_) {
    const T wd = p.decay ? weight_decay : T(0);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i] + wd * p.value[i];
      p.momentum[i] = momentum * p.momentum[i] + g;
      p.value[i] -= lr * p.momentum[i];
    }
  }
}

// ---------------------------------------------------------------- tape core

template <class T>
Tape<T>::Tape() {
  // Large tensors are allocated and freed every step; keep them on the heap
  // instead of mmap so pages are reused rather than faulted in again.
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
}

template <class T>
Var Tape<T>::push(Shape shape, Buffer<T> value, bool needs_grad) {
  if (consumed_) throw Error(ErrorCode::TapeConsumed, "tape already ran backward");
  Node n;
  n.shape = shape;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Buffer<T>& Tape<T>::gbuf(Var v) {
  auto& n = nodes_[v.id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
  return n.grad;
}

template <class T>
void Tape<T>::check_same(Var a, Var b, const char* op) const {
  if (!(shape(a) == shape(b))) shape_error(op, shape(a), shape(b));
}

template <class T>
Var Tape<T>::constant(Shape shape, std::vector<T> data) {
  if (data.size() != shape.size()) throw Error(ErrorCode::ShapeMismatch, "constant data size vs " + shape.str());
  return push(shape, Buffer<T>(data.begin(), data.end()), false);
}

template <class T>
Var Tape<T>::input(Shape shape, std::vector<T> data) {
  if (data.size() != shape.size()) throw Error(ErrorCode::ShapeMismatch, "input data size vs " + shape.str());
  const Var v = push(shape, Buffer<T>(data.begin(), data.end()), true);
  nodes_[v.id].keep_grad = true;
  return v;
}

template <class T>
Var Tape<T>::param(Parameter<T>& p) {
  const Var v = push(p.shape, p.value, true);
  nodes_[v.id].param = &p;
  nodes_[v.id].back = [this, v] {
    auto& n = nodes_[v.id];
    for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
  };
  return v;
}

template <class T>
T Tape<T>::scalar(Var v) const {
  if (shape(v).size() != 1) throw Error(ErrorCode::NonScalarLoss, "not a scalar: " + shape(v).str());
  return value(v)[0];
}

template <class T>
void Tape<T>::backward(Var loss) {
  if (consumed_) throw Error(ErrorCode::TapeConsumed, "backward called twice on one tape");
  if (shape(loss).size() != 1) throw Error(ErrorCode::NonScalarLoss, "loss shape " + shape(loss).str());
  consumed_ = true;
  if (!needs(loss)) return;
  gbuf(loss)[0] = T(1);
  for (int id = loss.id; id >= 0; --id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (n.back) n.back();
    n.back = nullptr;
    if (!n.keep_grad) Buffer<T>().swap(n.grad);
  }
}

// ---------------------------------------------------------------- linear algebra

template <class T>
Var Tape<T>::matmul(Var a, Var b) {
  const Shape sa = shape(a), sb = shape(b);
  if (sa.rank != 2 || sb.rank != 2 || sa[1] != sb[0]) shape_error("matmul", sa, sb);
  const int n = sa[0], k = sa[1], m = sb[1];
  Buffer<T> out(static_cast<std::size_t>(n) * m);
  Map<T>(out.data(), n, m).noalias() = CMap<T>(value(a).data(), n, k) * CMap<T>(value(b).data(), k, m);
  const Var o = push({n, m}, std::move(out), needs(a) || needs(b));
  if (needs(o))
    nodes_[o.id].back = [this, a, b, o, n, k, m] {
      CMap<T> g(nodes_[o.id].grad.data(), n, m);
      if (needs(a)) Map<T>(gbuf(a).data(), n, k).noalias() += g * CMap<T>(value(b).data(), k, m).transpose();
      if (needs(b)) Map<T>(gbuf(b).data(), k, m).noalias() += CMap<T>(value(a).data(), n, k).transpose() * g;
    };
  return o;
}

template <class T>
Var Tape<T>::affine(Var x, Var w, Var b) {
  const Shape sx = shape(x), sw = shape(w);
  if (sx.rank != 2 || sw.rank != 2 || sx[1] != sw[0]) shape_error("affine", sx, sw);
  if (shape(b).size() != static_cast<std::size_t>(sw[1])) shape_error("affine bias", sw, shape(b));
  const int n = sx[0], k = sx[1], m = sw[1];
  Buffer<T> out(static_cast<std::size_t>(n) * m);
  Map<T> o(out.data(), n, m);
  o.noalias() = CMap<T>(value(x).data(), n, k) * CMap<T>(value(w).data(), k, m);
  o.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(value(b).data(), m);
  const Var v = push({n, m}, std::move(out), needs(x) || needs(w) || needs(b));
  if (needs(v))
    nodes_[v.id].back = [this, x, w, b, v, n, k, m] {
      CMap<T> g(nodes_[v.id].grad.data(), n, m);
      if (needs(x)) Map<T>(gbuf(x).data(), n, k).noalias() += g * CMap<T>(value(w).data(), k, m).transpose();
      if (needs(w)) Map<T>(gbuf(w).data(), k, m).noalias() += CMap<T>(value(x).data(), n, k).transpose() * g;
      if (needs(b)) Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gbuf(b).data(), m) += g.colwise().sum();
    };
  return v;
}

template <class T>
Var Tape<T>::bmm(Var a, Var b) {
  const Shape sa = shape(a), sb = shape(b);
  if (sa.rank != 3 || sb.rank != 3 || sa[0] != sb[0] || sa[2] != sb[1]) shape_error("bmm", sa, sb);
  const int bs = sa[0], n = sa[1], k = sa[2], m = sb[2];
  Buffer<T> out(static_cast<std::size_t>(bs) * n * m);
  for (int i = 0; i < bs; ++i)
    Map<T>(out.data() + std::size_t(i) * n * m, n, m).noalias() =
        CMap<T>(value(a).data() + std::size_t(i) * n * k, n, k) * CMap<T>(value(b).data() + std::size_t(i) * k * m, k, m);
  const Var o = push({bs, n, m}, std::move(out), needs(a) || needs(b));
  if (needs(o))
    nodes_[o.id].back = [this, a, b, o, bs, n, k, m] {
      for (int i = 0; i < bs; ++i) {
        CMap<T> g(nodes_[o.id].grad.data() + std::size_t(i) * n * m, n, m);
        if (needs(a))
          Map<T>(gbuf(a).data() + std::size_t(i) * n * k, n, k).noalias() +=
              g * CMap<T>(value(b).data() + std::size_t(i) * k * m, k, m).transpose();
        if (needs(b))
          Map<T>(gbuf(b).data() + std::size_t(i) * k * m, k, m).noalias() +=
              CMap<T>(value(a).data() + std::size_t(i) * n * k, n, k).transpose() * g;
      }
    };
  return o;
}

template <class T>
Var Tape<T>::transpose(Var a) {
  const Shape s = shape(a);
  if (s.rank < 2) shape_error("transpose", s, s);
  const int bs = s.rank == 3 ? s[0] : 1, n = s[s.rank - 2], m = s[s.rank - 1];
  Buffer<T> out(s.size());
  for (int i = 0; i < bs; ++i)
    Map<T>(out.data() + std::size_t(i) * n * m, m, n) = CMap<T>(value(a).data() + std::size_t(i) * n * m, n, m).transpose();
  Shape t = s;
  t.dims[s.rank - 2] = m;
  t.dims[s.rank - 1] = n;
  const Var o = push(t, std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, bs, n, m] {
      for (int i = 0; i < bs; ++i)
        Map<T>(gbuf(a).data() + std::size_t(i) * n * m, n, m) +=
            CMap<T>(nodes_[o.id].grad.data() + std::size_t(i) * n * m, m, n).transpose();
    };
  return o;
}

template <class T>
Var Tape<T>::reshape(Var a, Shape s) {
  if (s.size() != shape(a).size()) shape_error("reshape", shape(a), s);
  const Var o = push(s, value(a), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
  return o;
}

// ---------------------------------------------------------------- elementwise

template <class T>
Var Tape<T>::add(Var a, Var b) {
  check_same(a, b, "add");
  Buffer<T> out = value(a);
  const auto& vb = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  const Var o = push(shape(a), std::move(out), needs(a) || needs(b));
  if (needs(o))
    nodes_[o.id].back = [this, a, b, o] {
      const auto& g = nodes_[o.id].grad;
      for (Var p : {a, b})
        if (needs(p)) {
          auto& gp = gbuf(p);
          for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
        }
    };
  return o;
}

template <class T>
Var Tape<T>::sub(Var a, Var b) {
  check_same(a, b, "sub");
  Buffer<T> out = value(a);
  const auto& vb = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  const Var o = push(shape(a), std::move(out), needs(a) || needs(b));
  if (needs(o))
    nodes_[o.id].back = [this, a, b, o] {
      const auto& g = nodes_[o.id].grad;
      if (needs(a)) {
        auto& ga = gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (needs(b)) {
        auto& gb = gbuf(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  return o;
}

template <class T>
Var Tape<T>::hadamard(Var a, Var b) {
  check_same(a, b, "hadamard");
  Buffer<T> out = value(a);
  const auto& vb = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  const Var o = push(shape(a), std::move(out), needs(a) || needs(b));
  if (needs(o))
    nodes_[o.id].back = [this, a, b, o] {
      const auto& g = nodes_[o.id].grad;
      if (needs(a)) {
        auto& ga = gbuf(a);
        const auto& vb = value(b);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
      }
      if (needs(b)) {
        auto& gb = gbuf(b);
        const auto& va = value(a);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
      }
    };
  return o;
}

template <class T>
Var Tape<T>::scalar_mul(Var a, T s) {
  Buffer<T> out = value(a);
  for (auto& x : out) x *= s;
  const Var o = push(shape(a), std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, s] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    };
  return o;
}

template <class T>
Var Tape<T>::add_bias(Var a, Var bias) {
  const Shape sa = shape(a);
  const int c = sa.cols(), r = sa.rows();
  if (shape(bias).size() != static_cast<std::size_t>(c)) shape_error("add_bias", sa, shape(bias));
  Buffer<T> out = value(a);
  const auto& vb = value(bias);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[std::size_t(i) * c + j] += vb[j];
  const Var o = push(sa, std::move(out), needs(a) || needs(bias));
  if (needs(o))
    nodes_[o.id].back = [this, a, bias, o, r, c] {
      const auto& g = nodes_[o.id].grad;
      if (needs(a)) {
        auto& ga = gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (needs(bias)) {
        auto& gb = gbuf(bias);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gb[j] += g[std::size_t(i) * c + j];
      }
    };
  return o;
}

template <class T>
Var Tape<T>::relu(Var a) {
  return leaky_relu(a, T(0));
}

template <class T>
Var Tape<T>::leaky_relu(Var a, T slope) {
  if (!(slope >= T(0) && slope <= T(1))) throw Error(ErrorCode::BadSpec, "leaky_relu slope must be in [0, 1]");
  Buffer<T> out = value(a);
  for (auto& x : out) x = std::max(x, x * slope);
  const Var o = push(shape(a), std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, slope] {
      // Slope from the sign bit: 1 for x >= +0, `slope` below. Vectorizes, unlike a select.
      const T mid = (T(1) + slope) / 2, half = (T(1) - slope) / 2;
      T* __restrict ga = gbuf(a).data();
      const T* __restrict g = nodes_[o.id].grad.data();
      const T* __restrict va = value(a).data();
      const std::size_t n = nodes_[o.id].grad.size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (mid + half * std::copysign(T(1), va[i]));
    };
  return o;
}

template <class T>
Var Tape<T>::exp(Var a) {
  Buffer<T> out = value(a);
  for (auto& x : out) x = std::exp(x);
  const Var o = push(shape(a), std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      const auto& y = nodes_[o.id].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    };
  return o;
}

template <class T>
Var Tape<T>::log(Var a) {
  Buffer<T> out = value(a);
  for (auto& x : out) x = std::log(x);
  const Var o = push(shape(a), std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      const auto& va = value(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / va[i];
    };
  return o;
}

// ---------------------------------------------------------------- row ops

template <class T>
Var Tape<T>::row_softmax(Var a) {
  const Shape s = shape(a);
  const int r = s.rows(), c = s.cols();
  Buffer<T> out = value(a);
  for (int i = 0; i < r; ++i) {
    T* row = out.data() + std::size_t(i) * c;
    const T m = *std::max_element(row, row + c);
    T z = 0;
    for (int j = 0; j < c; ++j) z += (row[j] = std::exp(row[j] - m));
    for (int j = 0; j < c; ++j) row[j] /= z;
  }
  const Var o = push(s, std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, r, c] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      const auto& y = nodes_[o.id].value;
      for (int i = 0; i < r; ++i) {
        const std::size_t off = std::size_t(i) * c;
        T dot = 0;
        for (int j = 0; j < c; ++j) dot += g[off + j] * y[off + j];
        for (int j = 0; j < c; ++j) ga[off + j] += y[off + j] * (g[off + j] - dot);
      }
    };
  return o;
}

template <class T>
Var Tape<T>::l1_normalize_rows(Var a) {
  const Shape s = shape(a);
  const int r = s.rows(), c = s.cols();
  const auto& va = value(a);
  Buffer<T> out(va.size(), T(0));
  Buffer<T> norms(r);
  for (int i = 0; i < r; ++i) {
    const std::size_t off = std::size_t(i) * c;
    T n = 0;
    for (int j = 0; j < c; ++j) n += std::abs(va[off + j]);
    norms[i] = n;
    if (n > T(0))
      for (int j = 0; j < c; ++j) out[off + j] = va[off + j] / n;
  }
  const Var o = push(s, std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, r, c, norms = std::move(norms)] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      const auto& y = nodes_[o.id].value;
      const auto& x = value(a);
      for (int i = 0; i < r; ++i) {
        if (norms[i] == T(0)) continue;
        const std::size_t off = std::size_t(i) * c;
        T dot = 0;
        for (int j = 0; j < c; ++j) dot += g[off + j] * y[off + j];
        for (int j = 0; j < c; ++j) {
          const T sgn = x[off + j] > T(0) ? T(1) : (x[off + j] < T(0) ? T(-1) : T(0));
          ga[off + j] += (g[off + j] - sgn * dot) / norms[i];
        }
      }
    };
  return o;
}

template <class T>
Var Tape<T>::l2_normalize_rows(Var a) {
  const Shape s = shape(a);
  const int r = s.rows(), c = s.cols();
  const auto& va = value(a);
  Buffer<T> out(va.size(), T(0));
  Buffer<T> norms(r);
  for (int i = 0; i < r; ++i) {
    const std::size_t off = std::size_t(i) * c;
    T n = 0;
    for (int j = 0; j < c; ++j) n += va[off + j] * va[off + j];
    norms[i] = n = std::sqrt(n);
    if (n > T(0))
      for (int j = 0; j < c; ++j) out[off + j] = va[off + j] / n;
  }
  const Var o = push(s, std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, r, c, norms = std::move(norms)] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      const auto& y = nodes_[o.id].value;
      for (int i = 0; i < r; ++i) {
        if (norms[i] == T(0)) continue;
        const std::size_t off = std::size_t(i) * c;
        T dot = 0;
        for (int j = 0; j < c; ++j) dot += g[off + j] * y[off + j];
        for (int j = 0; j < c; ++j) ga[off + j] += (g[off + j] - y[off + j] * dot) / norms[i];
      }
    };
  return o;
}

template <class T>
Var Tape<T>::layer_norm_rows(Var a, T eps) {
  const Shape s = shape(a);
  const int r = s.rows(), c = s.cols();
  Buffer<T> out = value(a);
  Buffer<T> inv(r);
  for (int i = 0; i < r; ++i) {
    T* row = out.data() + std::size_t(i) * c;
    T mean = 0;
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<T>(c);
    T var = 0;
    for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    inv[i] = T(1) / std::sqrt(var / static_cast<T>(c) + eps);
    for (int j = 0; j < c; ++j) row[j] = (row[j] - mean) * inv[i];
  }
  const Var o = push(s, std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, r, c, inv = std::move(inv)] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      const auto& y = nodes_[o.id].value;
      for (int i = 0; i < r; ++i) {
        const std::size_t off = std::size_t(i) * c;
        T mg = 0, mgy = 0;
        for (int j = 0; j < c; ++j) {
          mg += g[off + j];
          mgy += g[off + j] * y[off + j];
        }
        mg /= static_cast<T>(c);
        mgy /= static_cast<T>(c);
        for (int j = 0; j < c; ++j) ga[off + j] += inv[i] * (g[off + j] - mg - y[off + j] * mgy);
      }
    };
  return o;
}

// ---------------------------------------------------------------- reductions

template <class T>
Var Tape<T>::max_over_axis(Var a, int axis) {
  const Shape s = shape(a);
  if (axis < 0 || axis >= s.rank) shape_error("max_over_axis", s, s);
  const AxisView v = around(s, axis);
  const auto& va = value(a);
  Buffer<T> out(std::size_t(v.outer) * v.inner);
  std::vector<int> arg(out.size());
  for (int o = 0; o < v.outer; ++o)
    for (int in = 0; in < v.inner; ++in) {
      const std::size_t base = std::size_t(o) * v.len * v.inner + in;
      int best = 0;
      T bv = va[base];
      for (int l = 1; l < v.len; ++l) {
        const T x = va[base + std::size_t(l) * v.inner];
        if (x > bv) {
          bv = x;
          best = l;
        }
      }
      out[std::size_t(o) * v.inner + in] = bv;
      arg[std::size_t(o) * v.inner + in] = best;
    }
  const Var o = push(drop_axis(s, axis), std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, v, arg = std::move(arg)] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      for (int oo = 0; oo < v.outer; ++oo)
        for (int in = 0; in < v.inner; ++in) {
          const std::size_t k = std::size_t(oo) * v.inner + in;
          ga[std::size_t(oo) * v.len * v.inner + std::size_t(arg[k]) * v.inner + in] += g[k];
        }
    };
  return o;
}

template <class T>
Var Tape<T>::mean_over_axis(Var a, int axis) {
  const Shape s = shape(a);
  if (axis < 0 || axis >= s.rank) shape_error("mean_over_axis", s, s);
  const AxisView v = around(s, axis);
  const auto& va = value(a);
  Buffer<T> out(std::size_t(v.outer) * v.inner, T(0));
  for (int o = 0; o < v.outer; ++o)
    for (int l = 0; l < v.len; ++l)
      for (int in = 0; in < v.inner; ++in)
        out[std::size_t(o) * v.inner + in] += va[(std::size_t(o) * v.len + l) * v.inner + in];
  for (auto& x : out) x /= static_cast<T>(v.len);
  const Var o = push(drop_axis(s, axis), std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, v] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      const T inv = T(1) / static_cast<T>(v.len);
      for (int oo = 0; oo < v.outer; ++oo)
        for (int l = 0; l < v.len; ++l)
          for (int in = 0; in < v.inner; ++in)
            ga[(std::size_t(oo) * v.len + l) * v.inner + in] += g[std::size_t(oo) * v.inner + in] * inv;
    };
  return o;
}

template <class T>
Var Tape<T>::sum(Var a) {
  const auto& va = value(a);
  const T total = std::accumulate(va.begin(), va.end(), T(0));
  const Var o = push(Shape{}, {total}, needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o] {
      auto& ga = gbuf(a);
      const T g = nodes_[o.id].grad[0];
      for (auto& x : ga) x += g;
    };
  return o;
}

template <class T>
Var Tape<T>::concat(Var a, Var b, int axis) {
  const Shape sa = shape(a), sb = shape(b);
  bool ok = sa.rank == sb.rank && axis >= 0 && axis < sa.rank;
  for (int i = 0; ok && i < sa.rank; ++i) ok = i == axis || sa[i] == sb[i];
  if (!ok) shape_error("concat", sa, sb);
  const AxisView va = around(sa, axis), vb = around(sb, axis);
  const std::size_t ca = std::size_t(va.len) * va.inner, cb = std::size_t(vb.len) * vb.inner;
  Buffer<T> out(sa.size() + sb.size());
  for (int o = 0; o < va.outer; ++o) {
    std::copy_n(value(a).data() + o * ca, ca, out.data() + o * (ca + cb));
    std::copy_n(value(b).data() + o * cb, cb, out.data() + o * (ca + cb) + ca);
  }
  Shape s = sa;
  s.dims[axis] += sb[axis];
  const Var o = push(s, std::move(out), needs(a) || needs(b));
  if (needs(o))
    nodes_[o.id].back = [this, a, b, o, ca, cb, outer = va.outer] {
      const auto& g = nodes_[o.id].grad;
      for (int oo = 0; oo < outer; ++oo) {
        if (needs(a)) {
          T* d = gbuf(a).data() + oo * ca;
          for (std::size_t i = 0; i < ca; ++i) d[i] += g[oo * (ca + cb) + i];
        }
        if (needs(b)) {
          T* d = gbuf(b).data() + oo * cb;
          for (std::size_t i = 0; i < cb; ++i) d[i] += g[oo * (ca + cb) + ca + i];
        }
      }
    };
  return o;
}

template <class T>
Var Tape<T>::gather_rows(Var a, std::span<const int> rows) {
  const Shape s = shape(a);
  if (s.rank != 2) shape_error("gather_rows", s, s);
  const int c = s[1];
  Buffer<T> out(rows.size() * c);
  std::vector<int> idx(rows.begin(), rows.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= s[0]) throw Error(ErrorCode::ShapeMismatch, "gather_rows index out of range");
    std::copy_n(value(a).data() + std::size_t(idx[i]) * c, c, out.data() + i * c);
  }
  const Var o = push({static_cast<int>(idx.size()), c}, std::move(out), needs(a));
  if (needs(o))
    nodes_[o.id].back = [this, a, o, c, idx = std::move(idx)] {
      auto& ga = gbuf(a);
      const auto& g = nodes_[o.id].grad;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < c; ++j) ga[std::size_t(idx[i]) * c + j] += g[i * c + j];
    };
  return o;
}

template <class T>
Var Tape<T>::cross_entropy_logits(Var logits, std::span<const int> labels) {
  const Shape s = shape(logits);
  if (s.rank != 2 || static_cast<std::size_t>(s[0]) != labels.size())
    throw Error(ErrorCode::ShapeMismatch,
                "cross_entropy_logits: " + s.str() + " vs " + std::to_string(labels.size()) + " labels");
  const int r = s[0], c = s[1];
  const auto& x = value(logits);
  Buffer<T> prob(x.size());
  std::vector<int> lab(labels.begin(), labels.end());
  T loss = 0;
  for (int i = 0; i < r; ++i) {
    if (lab[i] < 0 || lab[i] >= c) throw Error(ErrorCode::ShapeMismatch, "label out of range");
    const std::size_t off = std::size_t(i) * c;
    const T m = *std::max_element(x.begin() + off, x.begin() + off + c);
    T z = 0;
    for (int j = 0; j < c; ++j) z += (prob[off + j] = std::exp(x[off + j] - m));
    for (int j = 0; j < c; ++j) prob[off + j] /= z;
    loss += -(x[off + lab[i]] - m - std::log(z));
  }
  loss /= static_cast<T>(r);
  const Var o = push(Shape{}, {loss}, needs(logits));
  if (needs(o))
    nodes_[o.id].back = [this, logits, o, r, c, prob = std::move(prob), lab = std::move(lab)] {
      auto& gl = gbuf(logits);
      const T g = nodes_[o.id].grad[0] / static_cast<T>(r);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          const std::size_t k = std::size_t(i) * c + j;
          gl[k] += g * (prob[k] - (j == lab[i] ? T(1) : T(0)));
        }
    };
  return o;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace riframe::ad
