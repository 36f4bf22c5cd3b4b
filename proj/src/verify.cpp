#include "riframe/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "riframe/descriptors.hpp"
#include "riframe/error.hpp"
#include "riframe/gradcheck.hpp"

namespace riframe::verify {

using ad::ParamStore;
using ad::Shape;
using ad::Tape;
using ad::Var;

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void note(SuiteResult& r, double residual) {
  ++r.count;
  r.max_residual = std::max(r.max_residual, residual);
  if (!(residual <= r.tolerance)) ++r.failures;
}

double frob(const Mat3& m) { return m.frobenius(); }

Vec3 gauss3(std::mt19937_64& rng, double sx = 1.0, double sy = 1.0, double sz = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  return {sx * g(rng), sy * g(rng), sz * g(rng)};
}

// Center at index 0 plus k anisotropic neighbors, placed away from the origin.
std::vector<Vec3> random_patch(std::mt19937_64& rng, int k) {
  const Vec3 offset = gauss3(rng) * 2.0;
  const Mat3 orient = random_rotation(rng(), RotationMode::full_so3);
  std::vector<Vec3> pts{offset};
  for (int j = 0; j < k; ++j) pts.push_back(offset + orient * gauss3(rng, 0.3, 0.18, 0.05));
  return pts;
}

std::vector<Vec3> rotated(const std::vector<Vec3>& pts, const Mat3& r) {
  std::vector<Vec3> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = r * pts[i];
  return out;
}

std::vector<int> iota_from(int first, int count) {
  std::vector<int> v(count);
  for (int i = 0; i < count; ++i) v[i] = first + i;
  return v;
}

Mat3 random_sym(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 b;
  for (double& x : b.a) x = u(rng);
  return b + b.transposed();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

nlohmann::json to_json(const SuiteResult& r) {
  return {{"name", r.name},           {"max_residual", r.max_residual}, {"tolerance", r.tolerance},
          {"count", r.count},         {"failures", r.failures},         {"passed", r.passed()},
          {"seconds", r.seconds}};
}

PointCloud generic_shape(int i, int n_points, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 1000003 + i);
  // plane_cross is skipped: its planes contain the origin, so every normal is
  // orthogonal to p_i and the local z sign is undefined.
  static constexpr ShapeFamily kGeneric[] = {ShapeFamily::sphere, ShapeFamily::box,   ShapeFamily::torus,
                                             ShapeFamily::cylinder, ShapeFamily::cone, ShapeFamily::helix,
                                             ShapeFamily::ellipsoid};
  auto spec = default_shape_spec(kGeneric[(i / 2) % std::size(kGeneric)], n_points);
  std::uniform_real_distribution<double> jitter(0.85, 1.15);
  for (double& p : spec.params) p *= jitter(rng);
  PointCloud pc = generate_shape(spec, rng());
  const double sx = i % 2 ? -1.0 : 1.0;
  for (Vec3& p : pc.points) p = {sx * p.x, 0.8 * p.y, 0.62 * p.z};
  return pc;
}

SuiteResult lrf_equivariance(int patches, int rotations, std::uint64_t seed, const FrameOptions& opt) {
  Timer t;
  SuiteResult r{"lrf_equivariance", 0, 1e-7};
  std::mt19937_64 rng(seed);
  const int k = 32;
  const auto nb = iota_from(1, k);
  for (int p = 0; p < patches; ++p) {
    const auto pts = random_patch(rng, k);
    const Frame m = lrf(pts, 0, nb, opt);
    for (int q = 0; q < rotations; ++q) {
      const Mat3 rot = random_rotation(rng(), RotationMode::full_so3);
      const Frame mr = lrf(rotated(pts, rot), 0, nb, opt);
      note(r, frob(mr.basis - rot * m.basis));
    }
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult covariance_conjugation(int patches, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"covariance_conjugation", 0, 1e-10};
  std::mt19937_64 rng(seed);
  const auto nb = iota_from(1, 32);
  for (int p = 0; p < patches; ++p) {
    const auto pts = random_patch(rng, 32);
    const Mat3 rot = random_rotation(rng(), RotationMode::full_so3);
    const Mat3 c = local_covariance(pts, 0, nb);
    const Mat3 cr = local_covariance(rotated(pts, rot), 0, nb);
    note(r, frob(cr - rot * c * rot.transposed()) / std::max(frob(c), 1e-300));
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult eigvec_rotation(int matrices, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"eigvec_rotation", 0, 1e-8};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < matrices; ++i) {
    const Mat3 a = random_sym(rng);
    const Mat3 rot = random_rotation(rng(), RotationMode::full_so3);
    const SymEig3 e = eig_sym3(a), er = eig_sym3(rot * a * rot.transposed());
    double worst = 0.0;
    for (int c = 0; c < 3; ++c) {
      const Vec3 want = rot * e.vectors.col(c), got = er.vectors.col(c);
      worst = std::max(worst, std::min((got - want).norm(), (got + want).norm()));
      worst = std::max(worst, std::abs(e.values[c] - er.values[c]));
    }
    note(r, worst);
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult cross_equivariance(int pairs, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"cross_equivariance", 0, 1e-12};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < pairs; ++i) {
    const Vec3 a = gauss3(rng), b = gauss3(rng);
    const Mat3 rot = random_rotation(rng(), RotationMode::full_so3);
    note(r, (cross(rot * a, rot * b) - rot * cross(a, b)).norm());
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult descriptor_invariance(int shapes, int rotations, std::uint64_t seed, const FrameOptions& opt) {
  Timer t;
  SuiteResult r{"descriptor_invariance", 0, 1e-7};
  std::mt19937_64 rng(seed);
  const int k = 32;
  for (int s = 0; s < shapes; ++s) {
    const PointCloud pc = generic_shape(s, 511, seed);
    const DescriptorSet ref = extract_descriptors(pc, k, opt);
    double worst = 0.0;
    for (int q = 0; q < rotations; ++q) {
      const Mat3 rot = random_rotation(rng(), RotationMode::full_so3);
      const DescriptorSet d = extract_descriptors(apply_rotation(pc, rot), k, opt);
      worst = std::max({worst, max_abs_diff(d.local, ref.local), max_abs_diff(d.global, ref.global)});
      ++r.count;
    }
    r.max_residual = std::max(r.max_residual, worst);
    if (!(worst <= r.tolerance)) ++r.failures;
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult logit_invariance(int shapes, int rotations, std::uint64_t seed, const net::ModelConfig& cfg) {
  Timer t;
  SuiteResult r{"logit_invariance", 0, 1e-6};
  std::mt19937_64 rng(seed);
  ParamStore<double> store;
  net::init_params(store, cfg, seed);
  for (int s = 0; s < shapes; ++s) {
    const PointCloud pc = generic_shape(s, cfg.n_points | 1, seed);
    const net::Prepared p = net::prepare(pc, cfg, seed + s);
    const net::Prepared* pp = &p;
    const auto ref = net::predict_logits(store, cfg, std::span(&pp, 1));
    double worst = 0.0;
    for (int q = 0; q < rotations; ++q) {
      const Mat3 rot = random_rotation(rng(), RotationMode::full_so3);
      const net::Prepared pr = net::prepare(apply_rotation(pc, rot), cfg, seed + s);
      const net::Prepared* prp = &pr;
      const auto got = net::predict_logits(store, cfg, std::span(&prp, 1));
      for (std::size_t i = 0; i < got.size(); ++i)
        worst = std::max(worst, std::abs(got[i] - ref[i]) / (std::abs(ref[i]) + 1e-6));
      ++r.count;
    }
    r.max_residual = std::max(r.max_residual, worst);
    if (!(worst <= r.tolerance)) ++r.failures;
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult angle_metric(int frames, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"angle_metric", 0, 0.0};
  std::mt19937_64 rng(seed);
  std::vector<Frame> fs(frames);
  for (auto& f : fs) f.basis = random_rotation(rng(), RotationMode::full_so3);
  const auto a = pairwise_angles(fs);
  for (int i = 0; i < frames; ++i)
    for (int j = 0; j < frames; ++j) {
      const double v = a[i * frames + j];
      double bad = std::abs(v - a[j * frames + i]);
      if (i == j) bad = std::max(bad, std::abs(v));
      if (!(v >= 0.0 && v <= 180.0)) bad = std::max(bad, 1.0);
      note(r, bad);
    }
  r.seconds = t.seconds();
  return r;
}

namespace {

void add_linear(ParamStore<double>& s, const std::string& name, int in, int out, std::mt19937_64& rng) {
  s.add(name + ".W", {in, out}, in, rng);
  auto& b = s.add_zero(name + ".b", {out});
  std::normal_distribution<double> g(0.0, 0.1);
  for (auto& v : b.value) v = g(rng);
}

void add_projection(ParamStore<double>& s, const std::string& name, int c, int p, std::mt19937_64& rng) {
  add_linear(s, name + ".0", c, c, rng);
  add_linear(s, name + ".1", c, p, rng);
}

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

SuiteResult correspondence_rows(int trials, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"correspondence_rows", 0, 1e-9};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < trials; ++i) {
    const int n = 1 + i % 16, c = 8;
    ParamStore<double> s;
    add_projection(s, "reg.u", c, 8, rng);
    add_projection(s, "reg.fl", c, 8, rng);
    Tape<double> tape;
    const Var m = net::correspondence_map(tape, s, "reg.fl", tape.constant({n, c}, randn(n * c, rng)),
                                          tape.constant({n, c}, randn(n * c, rng)), 0.017);
    for (int row = 0; row < n; ++row) {
      double sum = 0.0, neg = 0.0;
      for (int j = 0; j < n; ++j) {
        sum += tape.value(m)[row * n + j];
        neg = std::max(neg, -tape.value(m)[row * n + j]);
      }
      note(r, std::max(std::abs(sum - 1.0), neg));
    }
  }
  r.seconds = t.seconds();
  return r;
}

namespace {

// Projection head evaluated directly: l2norm(W1 leaky(ln(x W0 + b0)) + b1).
std::vector<double> project_rows(const ParamStore<double>& s, const std::string& name, const std::vector<double>& x,
                                 int rows, int c) {
  const auto& w0 = s.get(name + ".0.W");
  const auto& b0 = s.get(name + ".0.b");
  const auto& w1 = s.get(name + ".1.W");
  const auto& b1 = s.get(name + ".1.b");
  const int h = w0.shape[1], p = w1.shape[1];
  std::vector<double> out(static_cast<std::size_t>(rows) * p);
  for (int r = 0; r < rows; ++r) {
    std::vector<double> a(h);
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < h; ++j) {
      a[j] = b0.value[j];
      for (int i = 0; i < c; ++i) a[j] += x[r * c + i] * w0.value[i * h + j];
      mean += a[j] / h;
    }
    for (double v : a) var += (v - mean) * (v - mean) / h;
    for (double& v : a) {
      v = (v - mean) / std::sqrt(var + 1e-5);
      if (v < 0.0) v *= 0.2;
    }
    double norm = 0.0;
    for (int j = 0; j < p; ++j) {
      double acc = b1.value[j];
      for (int i = 0; i < h; ++i) acc += a[i] * w1.value[i * p + j];
      out[r * p + j] = acc;
      norm += acc * acc;
    }
    for (int j = 0; j < p; ++j) out[r * p + j] /= std::sqrt(norm);
  }
  return out;
}

}  // namespace

SuiteResult registration_oracle(int trials, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"registration_oracle", 0, 1e-10};
  std::mt19937_64 rng(seed);
  const int b = 2, n = 4, c = 8;
  const double temp = 0.017;
  for (int i = 0; i < trials; ++i) {
    ParamStore<double> s;
    add_projection(s, "reg.u", c, c, rng);
    add_projection(s, "reg.fl", c, c, rng);
    const auto f = randn(b * n * c, rng), u = randn(b * n * c, rng);
    Tape<double> tape;
    const double loss = tape.scalar(
        net::registration_loss(tape, s, "reg.fl", tape.constant({b * n, c}, f), tape.constant({b * n, c}, u), temp));
    const int m = b * n;
    const auto zu = project_rows(s, "reg.u", u, m, c), zf = project_rows(s, "reg.fl", f, m, c);
    double total = 0.0;
    for (int a = 0; a < m; ++a) {
      std::vector<double> row(m);
      for (int k = 0; k < m; ++k) {
        double dot = 0.0;
        for (int l = 0; l < c; ++l) dot += zu[a * c + l] * zf[k * c + l];
        row[k] = dot / temp;
      }
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (double v : row) z += std::exp(v - mx);
      total -= row[a] - mx - std::log(z);
    }
    note(r, std::abs(loss - total / m));
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult eig_oracle(int matrices, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"eig_oracle", 0, 1e-8};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < matrices; ++i) {
    Mat3 a = random_sym(rng);
    if (i % 10 == 0) a = a * std::pow(10.0, static_cast<double>(i % 7) - 3.0);
    const SymEig3 e = eig_sym3(a), j = eig_sym3_jacobi(a);
    Mat3 d;
    for (int k = 0; k < 3; ++k) d(k, k) = e.values[k];
    const double scale = std::max(frob(a), 1e-300);
    double worst = frob(e.vectors * d * e.vectors.transposed() - a) / scale;
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(e.values[k] - j.values[k]) / scale);
    note(r, worst);
  }
  r.seconds = t.seconds();
  return r;
}

namespace {

using Op = std::function<Var(Tape<double>&, Var, Var)>;
using ShapeA = std::function<Shape(std::mt19937_64&)>;
using ShapeB = std::function<Shape(const Shape&, std::mt19937_64&)>;

int dim(std::mt19937_64& rng) { return std::uniform_int_distribution<int>(1, 5)(rng); }
Shape mat(std::mt19937_64& rng) { return {dim(rng), dim(rng)}; }
Shape cube(std::mt19937_64& rng) { return {dim(rng), dim(rng), dim(rng)}; }
Shape same(const Shape& s, std::mt19937_64&) { return s; }

struct Primitive {
  std::string name;
  ShapeA a;
  ShapeB b;
  Op op;
  double lo = -1.0, hi = 1.0;
  bool avoid_zero = false;
};

// Contracts op(a, b) with a fixed random tensor and checks d/da, d/db.
SuiteResult check_primitive(const Primitive& p, int trials, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"grad_" + p.name, 0, 1e-5};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < trials; ++i) {
    ParamStore<double> store;
    const Shape sa = p.a(rng);
    const Shape sb = p.b(sa, rng);
    std::uniform_real_distribution<double> u(p.lo, p.hi);
    for (const auto& [name, shape] : {std::pair{"a", sa}, std::pair{"b", sb}})
      for (auto& v : store.add_zero(name, shape).value) {
        do v = u(rng);
        while (p.avoid_zero && std::abs(v) < 0.05);
      }
    std::vector<double> w;
    auto build = [&](Tape<double>& tape) {
      const Var y = p.op(tape, tape.param(store.get("a")), tape.param(store.get("b")));
      if (w.empty()) {
        std::uniform_real_distribution<double> wu(-1.0, 1.0);
        w.resize(tape.shape(y).size());
        for (auto& x : w) x = wu(rng);
      }
      return tape.sum(tape.hadamard(y, tape.constant(tape.shape(y), w)));
    };
    note(r, ad::grad_check(store, build, 1e-5, 1e-4, 64, seed + i).max_rel_error);
  }
  r.seconds = t.seconds();
  return r;
}

std::vector<Primitive> primitives() {
  auto k_by = [](const Shape& s, std::mt19937_64& rng) { return Shape{s[1], dim(rng)}; };
  std::vector<Primitive> out = {
      {"matmul", mat, k_by, [](auto& t, Var a, Var b) { return t.matmul(a, b); }},
      {"affine", mat, k_by,
       [](auto& t, Var a, Var b) {
         return t.affine(a, b, t.constant({t.shape(b)[1]}, std::vector<double>(t.shape(b)[1], 0.3)));
       }},
      {"bmm", cube, [](const Shape& s, auto& rng) { return Shape{s[0], s[2], dim(rng)}; },
       [](auto& t, Var a, Var b) { return t.bmm(a, b); }},
      {"transpose", cube, same, [](auto& t, Var a, Var) { return t.transpose(a); }},
      {"reshape", cube, same,
       [](auto& t, Var a, Var) { return t.reshape(a, {static_cast<int>(t.shape(a).size())}); }},
      {"add", cube, same, [](auto& t, Var a, Var b) { return t.add(a, b); }},
      {"sub", cube, same, [](auto& t, Var a, Var b) { return t.sub(a, b); }},
      {"hadamard", cube, same, [](auto& t, Var a, Var b) { return t.hadamard(a, b); }},
      {"scalar_mul", mat, same, [](auto& t, Var a, Var) { return t.scalar_mul(a, -1.7); }},
      {"add_bias", cube, [](const Shape& s, auto&) { return Shape{s.cols()}; },
       [](auto& t, Var a, Var b) { return t.add_bias(a, b); }},
      {"relu", cube, same, [](auto& t, Var a, Var) { return t.relu(a); }, -1, 1, true},
      {"leaky_relu", cube, same, [](auto& t, Var a, Var) { return t.leaky_relu(a); }, -1, 1, true},
      {"exp", cube, same, [](auto& t, Var a, Var) { return t.exp(a); }},
      {"log", cube, same, [](auto& t, Var a, Var) { return t.log(a); }, 0.1, 3.0},
      {"row_softmax", cube, same, [](auto& t, Var a, Var) { return t.row_softmax(a); }, -3, 3},
      {"l1_normalize_rows", mat, same, [](auto& t, Var a, Var) { return t.l1_normalize_rows(a); }, -1, 1, true},
      {"l2_normalize_rows", mat, same, [](auto& t, Var a, Var) { return t.l2_normalize_rows(a); }, -1, 1, true},
      {"layer_norm_rows", cube, same, [](auto& t, Var a, Var) { return t.layer_norm_rows(a); }},
      {"sum", cube, same, [](auto& t, Var a, Var) { return t.sum(a); }},
      {"gather_rows", mat, same,
       [](auto& t, Var a, Var) {
         const int n = t.shape(a)[0];
         const std::vector<int> rows{n - 1, 0, n - 1, n / 2};
         return t.gather_rows(a, rows);
       }},
      {"cross_entropy_logits", mat, same,
       [](auto& t, Var a, Var) {
         const Shape s = t.shape(a);
         std::vector<int> labels(s[0]);
         for (int i = 0; i < s[0]; ++i) labels[i] = (i * 7) % s[1];
         return t.cross_entropy_logits(a, labels);
       },
       -3, 3},
  };
  for (int axis = 0; axis < 3; ++axis) {
    const std::string ax = std::to_string(axis);
    out.push_back({"max_over_axis" + ax, cube, same, [axis](auto& t, Var a, Var) { return t.max_over_axis(a, axis); }});
    out.push_back(
        {"mean_over_axis" + ax, cube, same, [axis](auto& t, Var a, Var) { return t.mean_over_axis(a, axis); }});
    out.push_back({"concat" + ax, cube,
                   [axis](const Shape& s, auto& rng) {
                     Shape o = s;
                     o.dims[axis] = dim(rng);
                     return o;
                   },
                   [axis](auto& t, Var a, Var b) { return t.concat(a, b, axis); }});
  }
  return out;
}

SuiteResult composite(int trials, std::uint64_t seed) {
  Timer t;
  SuiteResult r{"grad_afi_ce_registration", 0, 1e-5};
  const int b = 2, n = 4, c = 6, d = 4;
  // At t = 0.017 the 1/t logit scale lifts f64 roundoff in the difference
  // quotient to ~2e-5 on the smallest gradients; t = 0.1 keeps it well under
  // the tolerance. The backward rules do not depend on t.
  const double temp = 0.1;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + trial);
    ParamStore<double> s;
    for (const char* name : {"x.sa", "x.ca"}) {
      s.add(std::string(name) + ".Wq", {c, d}, c, rng);
      s.add(std::string(name) + ".Wk", {c, d}, c, rng);
      s.add(std::string(name) + ".Wv", {c, c}, c, rng);
      s.add(std::string(name) + ".Wa", {d, d}, d, rng);
    }
    add_linear(s, "x.phi", c, c, rng);
    for (const char* name : {"reg.u", "reg.fl", "reg.fg"}) add_projection(s, name, c, 4, rng);
    add_linear(s, "head.0", c, 5, rng);
    add_linear(s, "head.1", 5, 3, rng);
    auto& fl = s.add_zero("fl", {b * n, c});
    auto& fg = s.add_zero("fg", {b * n, c});
    { const auto r = randn(fl.value.size(), rng); fl.value.assign(r.begin(), r.end()); }
    { const auto r = randn(fg.value.size(), rng); fg.value.assign(r.begin(), r.end()); }
    std::vector<double> esa, eca;
    std::uniform_real_distribution<double> angle(0.0, 180.0);
    for (int i = 0; i < b; ++i) {
      std::vector<Frame> frames(n);
      for (auto& f : frames) f.basis = random_rotation(rng(), RotationMode::full_so3);
      const auto e = net::angular_embedding(pairwise_angles(frames), d, 15.0);
      esa.insert(esa.end(), e.begin(), e.end());
      std::vector<double> cross(n);
      for (auto& x : cross) x = angle(rng);
      const auto ec = net::angular_embedding(cross, d, 15.0);
      eca.insert(eca.end(), ec.begin(), ec.end());
    }
    const std::vector<int> labels{0, 2};
    auto build = [&](Tape<double>& tape) {
      const Var f = tape.param(s.get("fl")), g = tape.param(s.get("fg"));
      const Var u = net::afi(tape, s, "x", f, g, tape.constant({b * n, n, d}, esa), tape.constant({b * n, d}, eca), b,
                             net::AttnOptions{});
      Var loss = tape.cross_entropy_logits(net::classify(tape, s, u, b), labels);
      loss = tape.add(loss, net::registration_loss(tape, s, "reg.fl", f, u, temp));
      return tape.add(loss, net::registration_loss(tape, s, "reg.fg", g, u, temp));
    };
    note(r, ad::grad_check(s, build, 1e-5, 1e-4, 64, seed + trial).max_rel_error);
  }
  r.seconds = t.seconds();
  return r;
}

}  // namespace

std::vector<SuiteResult> gradient_suite(int trials, std::uint64_t seed) {
  std::vector<SuiteResult> out;
  std::uint64_t s = seed;
  for (const auto& p : primitives()) out.push_back(check_primitive(p, trials, ++s * 7919));
  out.push_back(composite(trials, seed));
  return out;
}

std::vector<SuiteResult> run_all(Level level, const net::ModelConfig& cfg, std::uint64_t seed) {
  const bool full = level == Level::full;
  std::vector<SuiteResult> out;
  out.push_back(lrf_equivariance(full ? 200 : 50, full ? 20 : 10, seed, cfg.frames));
  out.push_back(covariance_conjugation(full ? 1000 : 200, seed + 1));
  out.push_back(eigvec_rotation(full ? 10000 : 1000, seed + 2));
  out.push_back(cross_equivariance(full ? 10000 : 1000, seed + 3));
  out.push_back(descriptor_invariance(20, full ? 50 : 5, seed + 4, cfg.frames));
  out.push_back(logit_invariance(full ? 4 : 2, full ? 50 : 5, seed + 5, cfg));
  out.push_back(angle_metric(128, seed + 6));
  out.push_back(correspondence_rows(full ? 200 : 50, seed + 7));
  out.push_back(registration_oracle(full ? 100 : 20, seed + 8));
  out.push_back(eig_oracle(full ? 10000 : 2000, seed + 9));
  for (auto& g : gradient_suite(full ? 100 : 10, seed + 10)) out.push_back(std::move(g));
  return out;
}

}  // namespace riframe::verify
