#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "riframe/cloud_io.hpp"
#include "riframe/error.hpp"
#include "riframe/gradcheck.hpp"
#include "riframe/net.hpp"

using namespace riframe;
using namespace riframe::net;
using ad::Parameter;
using ad::Shape;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.n_points = 256;
  c.k_lrf = 16;
  c.k1 = 8;
  c.n1 = 32;
  c.n2 = 8;
  c.k2 = 4;
  c.widths1 = {8, 8};
  c.widths2 = {8, 16};
  c.d = 4;
  c.proj = 8;
  c.head = 8;
  c.blocks = 1;
  return c;
}

PointCloud tiny_cloud(int family, std::uint64_t seed, int n = 256) {
  auto spec = default_shape_spec(static_cast<ShapeFamily>(family), n);
  return generate_shape(spec, seed);
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void add_linear(ParamStore<double>& s, const std::string& name, int in, int out, std::mt19937_64& rng) {
  s.add(name + ".W", {in, out}, in, rng);
  auto& b = s.add_zero(name + ".b", {out});
  { const auto r = random_values(out, rng, 0.1); b.value.assign(r.begin(), r.end()); }
}

void add_attention(ParamStore<double>& s, const std::string& name, int c, int d, std::mt19937_64& rng) {
  s.add(name + ".Wq", {c, d}, c, rng);
  s.add(name + ".Wk", {c, d}, c, rng);
  s.add(name + ".Wv", {c, c}, c, rng);
  s.add(name + ".Wa", {d, d}, d, rng);
}

void zero(Parameter<double>& p) { std::fill(p.value.begin(), p.value.end(), 0.0); }

// Angles of random rotations between n random frames: symmetric, zero diagonal.
std::vector<double> random_angles(int n, std::mt19937_64& rng) {
  std::vector<Frame> frames(n);
  for (auto& f : frames) f.basis = oracle::random_axis_angle(rng);
  return pairwise_angles(frames);
}

struct AttnFixture {
  int batch = 2, n = 5, c = 6, d = 4;
  ParamStore<double> store;
  std::vector<double> f, g, esa, eca;

  explicit AttnFixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const char* name : {"x.sa", "x.ca"}) add_attention(store, name, c, d, rng);
    add_linear(store, "x.phi", c, c, rng);
    f = random_values(batch * n * c, rng);
    g = random_values(batch * n * c, rng);
    for (int b = 0; b < batch; ++b) {
      const auto e = angular_embedding(random_angles(n, rng), d, 15.0);
      esa.insert(esa.end(), e.begin(), e.end());
      std::uniform_real_distribution<double> a(0.0, 180.0);
      std::vector<double> cross(n);
      for (auto& x : cross) x = a(rng);
      const auto ec = angular_embedding(cross, d, 15.0);
      eca.insert(eca.end(), ec.begin(), ec.end());
    }
  }

  Var fv(Tape<double>& t) const { return t.constant({batch * n, c}, f); }
  Var gv(Tape<double>& t) const { return t.constant({batch * n, c}, g); }
  Var esav(Tape<double>& t) const { return t.constant({batch * n, n, d}, esa); }
  Var ecav(Tape<double>& t) const { return t.constant({batch * n, d}, eca); }
};

// Independent forward of the projection head: l2norm(W1 leaky(ln(x W0 + b0)) + b1).
std::vector<std::vector<double>> project(const ParamStore<double>& s, const std::string& name,
                                         const std::vector<double>& x, int rows, int c) {
  const auto& w0 = s.get(name + ".0.W");
  const auto& b0 = s.get(name + ".0.b");
  const auto& w1 = s.get(name + ".1.W");
  const auto& b1 = s.get(name + ".1.b");
  const int h = w0.shape[1], p = w1.shape[1];
  std::vector<std::vector<double>> out(rows);
  for (int r = 0; r < rows; ++r) {
    std::vector<double> a(h);
    for (int j = 0; j < h; ++j) {
      double acc = b0.value[j];
      for (int i = 0; i < c; ++i) acc += x[r * c + i] * w0.value[i * h + j];
      a[j] = acc;
    }
    double mean = 0.0, var = 0.0;
    for (double v : a) mean += v / h;
    for (double v : a) var += (v - mean) * (v - mean) / h;
    for (double& v : a) {
      v = (v - mean) / std::sqrt(var + 1e-5);
      if (v < 0) v *= 0.2;
    }
    std::vector<double> z(p);
    double norm = 0.0;
    for (int j = 0; j < p; ++j) {
      double acc = b1.value[j];
      for (int i = 0; i < h; ++i) acc += a[i] * w1.value[i * p + j];
      z[j] = acc;
      norm += acc * acc;
    }
    for (double& v : z) v /= std::sqrt(norm);
    out[r] = z;
  }
  return out;
}

void add_projection(ParamStore<double>& s, const std::string& name, int c, int p, std::mt19937_64& rng) {
  add_linear(s, name + ".0", c, c, rng);
  add_linear(s, name + ".1", c, p, rng);
}

template <class A, class B>
double max_abs_diff(const A& a, const B& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("angular embedding values") {
  const std::vector<double> a{15.0};
  const auto e = angular_embedding(a, 4, 15.0);
  CHECK(e[0] == doctest::Approx(0.84147).epsilon(1e-5));
  CHECK(e[1] == doctest::Approx(0.54030).epsilon(1e-5));
  CHECK(e[2] == doctest::Approx(std::sin(1.0 / 100.0)));
  CHECK(e[3] == doctest::Approx(std::cos(1.0 / 100.0)));

  const std::vector<double> z{0.0};
  const auto e0 = angular_embedding(z, 8, 15.0);
  for (int i = 0; i < 8; ++i) CHECK(e0[i] == (i % 2 ? 1.0 : 0.0));

  CHECK_THROWS_WITH_AS(angular_embedding(a, 5, 15.0), doctest::Contains("OddDimension"), Error);
  ModelConfig c = tiny();
  c.d = 5;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("angular embedding is symmetric over frame pairs") {
  std::mt19937_64 rng(3);
  const int n = 12, d = 6;
  const auto e = angular_embedding(random_angles(n, rng), d, 15.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < d; ++l) CHECK(e[(i * n + j) * d + l] == e[(j * n + i) * d + l]);
}

TEST_CASE("offset attention on a single point") {
  std::mt19937_64 rng(5);
  const int c = 6, d = 4;
  ParamStore<double> s;
  add_linear(s, "phi", c, c, rng);
  auto& wq = s.add("Wq", {c, d}, c, rng);
  auto& wk = s.add("Wk", {c, d}, c, rng);
  const auto f = random_values(c, rng);

  SUBCASE("identity value projection leaves phi(0) + F_in") {
    for (auto norm : {OffsetNorm::pct, OffsetNorm::plain}) {
      Tape<double> t;
      const Var x = t.constant({1, c}, f);
      const Var y = offset_attention(t, s, "phi", x, t.matmul(x, t.param(wq)), t.matmul(x, t.param(wk)), x, 1, norm);
      const Var ref = t.add(dense(t, s, "phi", t.constant({1, c}, std::vector<double>(c, 0.0))), x);
      CHECK(max_abs_diff(t.value(y), t.value(ref)) < 1e-15);
    }
  }
  SUBCASE("zero values give phi(F_in) + F_in") {
    Tape<double> t;
    const Var x = t.constant({1, c}, f);
    const Var v = t.constant({1, c}, std::vector<double>(c, 0.0));
    const Var y = offset_attention(t, s, "phi", x, t.matmul(x, t.param(wq)), t.matmul(x, t.param(wk)), v, 1,
                                   OffsetNorm::pct);
    const Var ref = t.add(dense(t, s, "phi", x), x);
    CHECK(max_abs_diff(t.value(y), t.value(ref)) < 1e-15);
  }
}

TEST_CASE("zero rotation weights reduce ias to offset attention") {
  AttnFixture fx(7);
  zero(fx.store.get("x.sa.Wa"));
  Tape<double> t;
  const Var f = fx.fv(t);
  const AttnOptions on{OffsetNorm::pct, true, true}, off{OffsetNorm::pct, false, true};
  const Var with_e = ias(t, fx.store, "x", f, fx.esav(t), fx.batch, on);
  const Var without = ias(t, fx.store, "x", f, fx.esav(t), fx.batch, off);
  CHECK(t.value(with_e) == t.value(without));

  const double s = 1.0 / std::sqrt(double(fx.d));
  const Var q = t.scalar_mul(t.matmul(f, t.param(fx.store.get("x.sa.Wq"))), s);
  const Var k = t.matmul(f, t.param(fx.store.get("x.sa.Wk")));
  const Var v = t.matmul(f, t.param(fx.store.get("x.sa.Wv")));
  const Var plain = offset_attention(t, fx.store, "x.phi", f, q, k, v, fx.batch, OffsetNorm::pct);
  CHECK(max_abs_diff(t.value(with_e), t.value(plain)) < 1e-12);
}

TEST_CASE("afi with an empty cross branch equals ias bitwise") {
  AttnFixture fx(9);
  for (const char* w : {"x.ca.Wq", "x.ca.Wk", "x.ca.Wv", "x.ca.Wa"}) zero(fx.store.get(w));
  for (auto norm : {OffsetNorm::pct, OffsetNorm::plain}) {
    Tape<double> t;
    const AttnOptions opt{norm, true, true};
    const Var a = afi(t, fx.store, "x", fx.fv(t), fx.gv(t), fx.esav(t), fx.ecav(t), fx.batch, opt);
    const Var b = ias(t, fx.store, "x", fx.fv(t), fx.esav(t), fx.batch, opt);
    CHECK(t.value(a) == t.value(b));
  }
}

TEST_CASE("afi on a single point subtracts both value branches") {
  std::mt19937_64 rng(11);
  const int c = 6, d = 4;
  ParamStore<double> s;
  for (const char* name : {"x.sa", "x.ca"}) add_attention(s, name, c, d, rng);
  add_linear(s, "x.phi", c, c, rng);
  Tape<double> t;
  const Var f = t.constant({1, c}, random_values(c, rng));
  const Var g = t.constant({1, c}, random_values(c, rng));
  const std::vector<double> zero_angle{0.0};
  const Var esa = t.constant({1, 1, d}, angular_embedding(zero_angle, d, 15.0));
  const Var eca = t.constant({1, d}, angular_embedding(std::vector<double>{40.0}, d, 15.0));
  const Var u = afi(t, s, "x", f, g, esa, eca, 1, AttnOptions{});
  const Var vsa = t.matmul(f, t.param(s.get("x.sa.Wv")));
  const Var vca = t.matmul(g, t.param(s.get("x.ca.Wv")));
  const Var ref = t.add(dense(t, s, "x.phi", t.sub(f, t.add(vsa, vca))), f);
  CHECK(max_abs_diff(t.value(u), t.value(ref)) < 1e-14);
}

TEST_CASE("attention blocks are permutation equivariant") {
  AttnFixture fx(13);
  const int n = fx.n, c = fx.c, d = fx.d;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));

  AttnFixture px = fx;
  for (int b = 0; b < fx.batch; ++b)
    for (int i = 0; i < n; ++i) {
      const int src = b * n + perm[i], dst = b * n + i;
      for (int l = 0; l < c; ++l) {
        px.f[dst * c + l] = fx.f[src * c + l];
        px.g[dst * c + l] = fx.g[src * c + l];
      }
      for (int l = 0; l < d; ++l) px.eca[dst * d + l] = fx.eca[src * d + l];
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < d; ++l) px.esa[(dst * n + j) * d + l] = fx.esa[(src * n + perm[j]) * d + l];
    }
  Tape<double> t;
  const Var a = afi(t, fx.store, "x", fx.fv(t), fx.gv(t), fx.esav(t), fx.ecav(t), fx.batch, AttnOptions{});
  const Var b = afi(t, px.store, "x", px.fv(t), px.gv(t), px.esav(t), px.ecav(t), px.batch, AttnOptions{});
  double worst = 0.0;
  for (int bb = 0; bb < fx.batch; ++bb)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < c; ++l)
        worst = std::max(worst, std::abs(t.value(b)[(bb * n + i) * c + l] - t.value(a)[(bb * n + perm[i]) * c + l]));
  CHECK(worst < 1e-12);
}

TEST_CASE("correspondence map rows") {
  std::mt19937_64 rng(17);
  const int c = 6;
  ParamStore<double> s;
  add_projection(s, "reg.u", c, 4, rng);
  add_projection(s, "reg.fl", c, 4, rng);

  SUBCASE("single point") {
    Tape<double> t;
    const Var m = correspondence_map(t, s, "reg.fl", t.constant({1, c}, random_values(c, rng)),
                                     t.constant({1, c}, random_values(c, rng)), 0.017);
    REQUIRE(t.value(m).size() == 1);
    CHECK(t.value(m)[0] == 1.0);
  }
  SUBCASE("rows are distributions") {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 3 + trial;
      Tape<double> t;
      const Var m = correspondence_map(t, s, "reg.fl", t.constant({n, c}, random_values(n * c, rng)),
                                       t.constant({n, c}, random_values(n * c, rng)), 0.017);
      for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
          CHECK(t.value(m)[i * n + j] >= 0.0);
          sum += t.value(m)[i * n + j];
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
    }
  }
  SUBCASE("high temperature flattens rows") {
    const int n = 7;
    Tape<double> t;
    const Var m = correspondence_map(t, s, "reg.fl", t.constant({n, c}, random_values(n * c, rng)),
                                     t.constant({n, c}, random_values(n * c, rng)), 1e6);
    for (double v : t.value(m)) CHECK(std::abs(v - 1.0 / n) < 1e-6);
  }
}

TEST_CASE("registration loss matches a double-loop InfoNCE") {
  const int b = 2, n = 4, c = 8, p = 8;
  const double temp = 0.017;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    ParamStore<double> s;
    add_projection(s, "reg.u", c, p, rng);
    add_projection(s, "reg.fl", c, p, rng);
    const auto f = random_values(b * n * c, rng), u = random_values(b * n * c, rng);
    Tape<double> t;
    const double loss =
        t.scalar(registration_loss(t, s, "reg.fl", t.constant({b * n, c}, f), t.constant({b * n, c}, u), temp));

    const auto zu = project(s, "reg.u", u, b * n, c);
    const auto zf = project(s, "reg.fl", f, b * n, c);
    std::vector<std::vector<double>> scores(b * n, std::vector<double>(b * n));
    for (int i = 0; i < b * n; ++i)
      for (int k = 0; k < b * n; ++k) {
        double dot = 0.0;
        for (int l = 0; l < p; ++l) dot += zu[i][l] * zf[k][l];
        scores[i][k] = dot / temp;
      }
    CHECK(std::abs(loss - oracle::info_nce(scores)) < 1e-10);
  }
}

TEST_CASE("registration loss of identical features is log(BN)") {
  const int b = 2, n = 5, c = 6;
  std::mt19937_64 rng(19);
  ParamStore<double> s;
  add_projection(s, "reg.u", c, 4, rng);
  add_projection(s, "reg.fl", c, 4, rng);
  const auto row = random_values(c, rng);
  std::vector<double> x;
  for (int i = 0; i < b * n; ++i) x.insert(x.end(), row.begin(), row.end());
  Tape<double> t;
  const double loss =
      t.scalar(registration_loss(t, s, "reg.fl", t.constant({b * n, c}, x), t.constant({b * n, c}, x), 0.017));
  CHECK(loss == doctest::Approx(std::log(double(b * n))).epsilon(1e-12));

  Tape<double> t2;
  CHECK_THROWS_AS(registration_loss(t2, s, "reg.fl", t2.constant({b * n, c}, x), t2.constant({2, c}, row), 0.017),
                  Error);
}

TEST_CASE("registration loss falls under gradient descent") {
  const int b = 2, n = 4, c = 8;
  std::mt19937_64 rng(23);
  ParamStore<double> s;
  add_projection(s, "reg.u", c, 8, rng);
  add_projection(s, "reg.fl", c, 8, rng);
  const auto f = random_values(b * n * c, rng), u = random_values(b * n * c, rng);
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    Tape<double> t;
    const Var l = registration_loss(t, s, "reg.fl", t.constant({b * n, c}, f), t.constant({b * n, c}, u), 0.017);
    losses.push_back(t.scalar(l));
    t.backward(l);
    s.clip_grad_norm(5.0);
    s.sgd_step(1e-2, 0.9, 0.0);
    s.zero_grad();
  }
  CHECK(losses.back() < 0.5 * losses.front());
  int rises = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) rises += losses[i] > losses[i - 1] + 1e-9;
  CHECK(rises < 10);
}

TEST_CASE("classify ignores duplicated rows") {
  std::mt19937_64 rng(29);
  const int n = 6, c = 8;
  ParamStore<double> s;
  add_linear(s, "head.0", c, 5, rng);
  add_linear(s, "head.1", 5, 3, rng);
  const auto u = random_values(n * c, rng);
  auto dup = u;
  dup.insert(dup.end(), u.begin() + 2 * c, u.begin() + 3 * c);
  dup.insert(dup.end(), u.begin(), u.begin() + c);
  Tape<double> t;
  const Var a = classify(t, s, t.constant({n, c}, u), 1);
  const Var b = classify(t, s, t.constant({n + 2, c}, dup), 1);
  CHECK(t.value(a) == t.value(b));
}

TEST_CASE("prepare sizes and invariance") {
  const ModelConfig cfg = tiny();
  const auto pc = tiny_cloud(1, 4);
  const Prepared p = prepare(pc, cfg, 2);
  CHECK(p.local1.size() == std::size_t(cfg.n1 * cfg.k1 * 3));
  CHECK(p.global1.size() == std::size_t(cfg.n1 * cfg.k1 * 6));
  CHECK(p.group2.size() == std::size_t(cfg.n2 * cfg.k2));
  CHECK(p.self_angles.size() == std::size_t(cfg.n2 * cfg.n2));
  CHECK(p.cross_angles.size() == std::size_t(cfg.n2));
  CHECK(p.label == 1);

  std::mt19937_64 rng(31);
  for (int r = 0; r < 5; ++r) {
    const Prepared q = prepare(apply_rotation(pc, oracle::random_axis_angle(rng)), cfg, 2);
    CHECK(q.centroids1 == p.centroids1);
    CHECK(q.group2 == p.group2);
    CHECK(max_abs_diff(q.local1, p.local1) < 1e-7);
    CHECK(max_abs_diff(q.global1, p.global1) < 1e-7);
    CHECK(max_abs_diff(q.local2, p.local2) < 1e-7);
    CHECK(max_abs_diff(q.global2, p.global2) < 1e-7);
    CHECK(max_abs_diff(q.self_angles, p.self_angles) < 1e-6);
    CHECK(max_abs_diff(q.cross_angles, p.cross_angles) < 1e-6);
  }

  ModelConfig big = cfg;
  big.n1 = 300;
  CHECK_THROWS_AS(prepare(pc, big, 0), Error);
}

TEST_CASE("logits are rotation invariant") {
  const ModelConfig cfg = tiny();
  ParamStore<float> sf;
  init_params(sf, cfg, 3);
  ParamStore<double> sd = sf.cast<double>();
  std::mt19937_64 rng(37);
  for (int shape = 0; shape < 3; ++shape) {
    const auto pc = tiny_cloud(shape * 3 % 8, 40 + shape);
    const Prepared p = prepare(pc, cfg, 1);
    const Prepared* pp = &p;
    const auto ref_d = predict_logits(sd, cfg, std::span(&pp, 1));
    const auto ref_f = predict_logits(sf, cfg, std::span(&pp, 1));
    for (int r = 0; r < 8; ++r) {
      const Prepared q = prepare(apply_rotation(pc, oracle::random_axis_angle(rng)), cfg, 1);
      const Prepared* qp = &q;
      const auto ld = predict_logits(sd, cfg, std::span(&qp, 1));
      const auto lf = predict_logits(sf, cfg, std::span(&qp, 1));
      for (std::size_t i = 0; i < ld.size(); ++i) {
        CHECK(std::abs(ld[i] - ref_d[i]) / (std::abs(ref_d[i]) + 1e-6) < 1e-7);
        CHECK(std::abs(lf[i] - ref_f[i]) / (std::abs(ref_f[i]) + 1e-6) < 1e-3);
      }
    }
  }
}

TEST_CASE("forward runs every ablation") {
  const auto pc0 = tiny_cloud(0, 1), pc1 = tiny_cloud(5, 2);
  for (int variant = 0; variant < 7; ++variant) {
    ModelConfig cfg = tiny();
    switch (variant) {
      case 1: cfg.use_e_sa = false; break;
      case 2: cfg.use_e_ca = false; break;
      case 3: cfg.sa_on_global = true; break;
      case 4: cfg.sequential_attn = true; break;
      case 5: cfg.reg_local = false; cfg.reg_global = false; break;
      case 6: cfg.offset_norm = OffsetNorm::plain; cfg.blocks = 2; break;
      default: break;
    }
    CAPTURE(variant);
    const Prepared a = prepare(pc0, cfg, 0), b = prepare(pc1, cfg, 0);
    const Prepared* batch[] = {&a, &b};
    ParamStore<float> s;
    init_params(s, cfg, 1);
    Tape<float> t;
    const auto out = forward(t, s, cfg, std::span<const Prepared* const>(batch), true);
    CHECK(t.shape(out.logits) == Shape{2, cfg.classes});
    CHECK(t.shape(out.u) == Shape{2 * cfg.n2, cfg.channels()});
    CHECK(std::isfinite(t.scalar(out.loss)));
    CHECK((out.reg_local.id >= 0) == cfg.reg_local);
    t.backward(out.loss);
    double norm = 0.0;
    for (const auto& p : s.all())
      for (float g : p.grad) norm += double(g) * g;
    CHECK(norm > 0.0);
    CHECK(std::isfinite(norm));
  }
}

TEST_CASE("lambda zero leaves cross entropy only") {
  ModelConfig cfg = tiny();
  cfg.lambda = 0.0;
  const Prepared a = prepare(tiny_cloud(2, 3), cfg, 0);
  const Prepared* batch[] = {&a};
  ParamStore<double> s;
  init_params(s, cfg, 2);
  Tape<double> t;
  const auto out = forward(t, s, cfg, std::span<const Prepared* const>(batch), true);
  CHECK(t.scalar(out.loss) == t.scalar(out.ce));
}

TEST_CASE("gradient of integration, cross entropy and registration losses") {
  const int b = 2, n = 4, c = 6, d = 4;
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    std::mt19937_64 rng(500 + trial);
    ParamStore<double> s;
    for (const char* name : {"x.sa", "x.ca"}) add_attention(s, name, c, d, rng);
    add_linear(s, "x.phi", c, c, rng);
    for (const char* name : {"reg.u", "reg.fl", "reg.fg"}) add_projection(s, name, c, 4, rng);
    add_linear(s, "head.0", c, 5, rng);
    add_linear(s, "head.1", 5, 3, rng);
    auto& fl = s.add_zero("fl", {b * n, c});
    auto& fg = s.add_zero("fg", {b * n, c});
    { const auto r = random_values(fl.value.size(), rng); fl.value.assign(r.begin(), r.end()); }
    { const auto r = random_values(fg.value.size(), rng); fg.value.assign(r.begin(), r.end()); }
    std::vector<double> esa, eca;
    for (int i = 0; i < b; ++i) {
      const auto e = angular_embedding(random_angles(n, rng), d, 15.0);
      esa.insert(esa.end(), e.begin(), e.end());
      std::vector<double> cross(n);
      for (auto& x : cross) x = std::uniform_real_distribution<double>(0.0, 180.0)(rng);
      const auto ec = angular_embedding(cross, d, 15.0);
      eca.insert(eca.end(), ec.begin(), ec.end());
    }
    const std::vector<int> labels{0, 2};
    auto build = [&](Tape<double>& t) {
      const Var f = t.param(s.get("fl")), g = t.param(s.get("fg"));
      const Var u = afi(t, s, "x", f, g, t.constant({b * n, n, d}, esa), t.constant({b * n, d}, eca), b,
                        AttnOptions{});
      Var loss = t.cross_entropy_logits(classify(t, s, u, b), labels);
      loss = t.add(loss, registration_loss(t, s, "reg.fl", f, u, 0.017));
      return t.add(loss, registration_loss(t, s, "reg.fg", g, u, 0.017));
    };
    worst = std::max(worst, ad::grad_check(s, build, 1e-5, 1e-4, 64, trial).max_rel_error);
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("checkpoint round trip and mismatch") {
  const auto dir = std::filesystem::temp_directory_path() / "riframe_test_net";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.rimw";
  const ModelConfig cfg = tiny();
  ParamStore<float> a;
  init_params(a, cfg, 8);
  save_checkpoint(path, a, {{"model", to_json(cfg)}, {"epoch", 3}});

  const auto header = read_checkpoint_header(path);
  CHECK(header.at("epoch") == 3);
  CHECK(model_config_from_json(header.at("model")).d == cfg.d);

  ParamStore<float> b;
  init_params(b, cfg, 9);
  load_checkpoint(path, b);
  for (std::size_t i = 0; i < a.all().size(); ++i) CHECK(a.all()[i].value == b.all()[i].value);

  ModelConfig other = cfg;
  other.head = 12;
  ParamStore<float> c;
  init_params(c, other, 1);
  CHECK_THROWS_WITH_AS(load_checkpoint(path, c), doctest::Contains("CheckpointMismatch"), Error);

  auto bytes = read_file_bytes(path);
  bytes.push_back(0);
  write_file_bytes(dir / "long.rimw", bytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "long.rimw", b), doctest::Contains("CheckpointMismatch"), Error);
  bytes.resize(bytes.size() - 9);
  write_file_bytes(dir / "short.rimw", bytes);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.rimw", b), Error);
  bytes[0] = 'X';
  write_file_bytes(dir / "magic.rimw", bytes);
  CHECK_THROWS_WITH_AS(read_checkpoint_header(dir / "magic.rimw"), doctest::Contains("MagicMismatch"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model config json round trip") {
  ModelConfig c = ModelConfig::full_size();
  c.sequential_attn = true;
  c.offset_norm = OffsetNorm::plain;
  const auto back = model_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  auto j = to_json(c);
  j.erase("d");
  CHECK_THROWS_AS(model_config_from_json(j), Error);
}
