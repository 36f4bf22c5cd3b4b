#include "riframe/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "riframe/cloud_io.hpp"
#include "riframe/descriptors.hpp"
#include "riframe/error.hpp"

namespace riframe::net {

using ad::Shape;

namespace {

constexpr std::uint8_t kCheckpointVersion = 1;
// Output layer starts small so initial logits are near uniform.
constexpr double kHeadGain = 0.1;

std::string block(int b) { return "ait" + std::to_string(b); }

template <class T>
std::vector<T> cast(const std::vector<double>& v) {
  return std::vector<T>(v.begin(), v.end());
}

template <class T>
void add_linear(ParamStore<T>& s, const std::string& name, int in, int out, std::mt19937_64& rng,
                double gain = 1.0) {
  s.add(name + ".W", {in, out}, in, rng, gain);
  s.add_zero(name + ".b", {out});
}

template <class T>
void add_attention(ParamStore<T>& s, const std::string& name, int c, int d, std::mt19937_64& rng) {
  s.add(name + ".Wq", {c, d}, c, rng);
  s.add(name + ".Wk", {c, d}, c, rng);
  s.add(name + ".Wv", {c, c}, c, rng);
  s.add(name + ".Wa", {d, d}, d, rng);
}

template <class T>
void add_mlp(ParamStore<T>& s, const std::string& name, int in, const std::vector<int>& widths, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < widths.size(); ++i) {
    add_linear(s, name + "." + std::to_string(i), in, widths[i], rng);
    in = widths[i];
  }
}

template <class T>
void init_impl(ParamStore<T>& s, const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const int w1 = cfg.widths1.back(), c = cfg.channels();
  add_mlp(s, "enc.l1", 3, cfg.widths1, rng);
  add_mlp(s, "enc.l2", w1 + 3, cfg.widths2, rng);
  add_mlp(s, "enc.g1", 6, cfg.widths1, rng);
  add_mlp(s, "enc.g2", w1 + 3, cfg.widths2, rng);
  if (cfg.sa_on_global) {
    add_attention(s, "gias.sa", c, cfg.d, rng);
    add_linear(s, "gias.phi", c, c, rng);
  }
  for (int b = 0; b < cfg.blocks; ++b) {
    add_attention(s, block(b) + ".ias.sa", c, cfg.d, rng);
    add_linear(s, block(b) + ".ias.phi", c, c, rng);
    const std::string second = block(b) + (cfg.sequential_attn ? ".iac" : ".afi");
    if (!cfg.sequential_attn) add_attention(s, second + ".sa", c, cfg.d, rng);
    add_attention(s, second + ".ca", c, cfg.d, rng);
    add_linear(s, second + ".phi", c, c, rng);
  }
  for (const char* phi : {"reg.u", "reg.fl", "reg.fg"}) {
    add_linear(s, std::string(phi) + ".0", c, c, rng);
    add_linear(s, std::string(phi) + ".1", c, cfg.proj, rng);
  }
  add_linear(s, "head.0", c, cfg.head, rng);
  add_linear(s, "head.1", cfg.head, cfg.classes, rng, kHeadGain);
}

template <class T>
Var projection(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var x) {
  const Var h = dense(tape, store, name + ".0", x);
  return tape.l2_normalize_rows(linear(tape, store, name + ".1", h));
}

// (batch*n, c) -> (batch, n, c)
template <class T>
Var split(Tape<T>& tape, Var x, int batch) {
  const Shape s = tape.shape(x);
  if (s.rank != 2 || s[0] % batch != 0) throw Error(ErrorCode::ShapeMismatch, "split " + s.str());
  return tape.reshape(x, {batch, s[0] / batch, s[1]});
}

template <class T>
Var merge(Tape<T>& tape, Var x) {
  const Shape s = tape.shape(x);
  return tape.reshape(x, {s[0] * s[1], s[2]});
}

template <class T>
T inv_sqrt(int d) {
  return static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));
}

}  // namespace

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::BadSpec, m); };
  if (n_points < 2 || k_lrf < 2 || n1 < 1 || n2 < 1 || k2 < 1) bad("sizes must be positive");
  if (n1 > n_points || n2 > n1 || k2 > n2 || k_lrf >= n_points || k1 < 1 || k1 > k_lrf)
    bad("sampling sizes must shrink");
  if (widths1.empty() || widths2.empty()) bad("empty widths");
  for (int w : widths1) if (w < 1) bad("bad width");
  for (int w : widths2) if (w < 1) bad("bad width");
  if (d < 2 || d > channels()) bad("need 2 <= d <= C");
  if (d % 2) throw Error(ErrorCode::OddDimension, "d must be even, got " + std::to_string(d));
  if (proj < 1 || head < 1 || blocks < 0 || classes < 2) bad("bad head sizes");
  if (!(t_alpha > 0) || !(t > 0) || !(lambda >= 0)) bad("t_alpha, t > 0 and lambda >= 0");
}

ModelConfig ModelConfig::desk() { return {}; }

ModelConfig ModelConfig::full_size() {
  ModelConfig c;
  c.k1 = 32;
  c.n1 = 512;
  c.n2 = 128;
  c.k2 = 32;
  c.widths1 = {64, 128};
  c.widths2 = {128, 256};
  c.d = 64;
  c.proj = 64;
  c.head = 256;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_points", c.n_points},
          {"k_lrf", c.k_lrf},
          {"k1", c.k1},
          {"n1", c.n1},
          {"n2", c.n2},
          {"k2", c.k2},
          {"widths1", c.widths1},
          {"widths2", c.widths2},
          {"d", c.d},
          {"proj", c.proj},
          {"head", c.head},
          {"blocks", c.blocks},
          {"classes", c.classes},
          {"t_alpha", c.t_alpha},
          {"t", c.t},
          {"lambda", c.lambda},
          {"offset_norm", c.offset_norm == OffsetNorm::pct ? "pct" : "plain"},
          {"disambiguate", c.frames.disambiguate},
          {"regularize_equal_weights", c.frames.regularize_equal_weights},
          {"strategy", std::string(strategy_name(c.frames.strategy))},
          {"use_e_sa", c.use_e_sa},
          {"use_e_ca", c.use_e_ca},
          {"sa_on_global", c.sa_on_global},
          {"sequential_attn", c.sequential_attn},
          {"reg_local", c.reg_local},
          {"reg_global", c.reg_global}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.n_points = j.at("n_points");
    c.k_lrf = j.at("k_lrf");
    c.k1 = j.at("k1");
    c.n1 = j.at("n1");
    c.n2 = j.at("n2");
    c.k2 = j.at("k2");
    c.widths1 = j.at("widths1").get<std::vector<int>>();
    c.widths2 = j.at("widths2").get<std::vector<int>>();
    c.d = j.at("d");
    c.proj = j.at("proj");
    c.head = j.at("head");
    c.blocks = j.at("blocks");
    c.classes = j.at("classes");
    c.t_alpha = j.at("t_alpha");
    c.t = j.at("t");
    c.lambda = j.at("lambda");
    c.offset_norm = j.at("offset_norm") == "plain" ? OffsetNorm::plain : OffsetNorm::pct;
    c.frames.disambiguate = j.at("disambiguate");
    c.frames.regularize_equal_weights = j.at("regularize_equal_weights");
    const auto s = strategy_from_name(j.at("strategy").get<std::string>());
    if (!s) throw Error(ErrorCode::BadSpec, "unknown strategy");
    c.frames.strategy = *s;
    c.use_e_sa = j.at("use_e_sa");
    c.use_e_ca = j.at("use_e_ca");
    c.sa_on_global = j.at("sa_on_global");
    c.sequential_attn = j.at("sequential_attn");
    c.reg_local = j.at("reg_local");
    c.reg_global = j.at("reg_global");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadSpec, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- data

Prepared prepare(const PointCloud& pc, const ModelConfig& cfg, std::uint64_t fps_seed) {
  cfg.validate();
  const auto& pts = pc.points;
  if (pts.size() < static_cast<std::size_t>(cfg.n1) || pts.size() <= static_cast<std::size_t>(cfg.k_lrf))
    throw Error(ErrorCode::TooFewPoints, "cloud has " + std::to_string(pts.size()) + " points");
  std::mt19937_64 rng(fps_seed);
  const Frame g = grf(pts, cfg.frames, &rng);
  const auto canon = global_descriptors(pts, g);

  Prepared p;
  p.n1 = cfg.n1;
  p.k1 = cfg.k1;
  p.n2 = cfg.n2;
  p.k2 = cfg.k2;
  p.label = pc.label.value_or(-1);
  p.centroids1 = farthest_point_indices(pts, cfg.n1, fps_seed);
  const auto nb1 = knn_query(pts, p.centroids1, cfg.k_lrf);
  const auto frames1 = compute_lrfs(pts, nb1, g, cfg.frames, &p.fallback_frames);
  NeighborIndex group1 = nb1;
  group1.k = p.k1;
  group1.indices.clear();
  group1.distances.clear();
  for (int c = 0; c < p.n1; ++c) {
    group1.indices.insert(group1.indices.end(), nb1.row(c).begin(), nb1.row(c).begin() + p.k1);
    group1.distances.insert(group1.distances.end(), nb1.row_distances(c).begin(), nb1.row_distances(c).begin() + p.k1);
    group1.d_max[c] = group1.distances.back();
  }
  p.local1 = local_descriptors(pts, group1, frames1);

  p.global1.resize(static_cast<std::size_t>(p.n1) * p.k1 * 6);
  for (int c = 0; c < p.n1; ++c) {
    const double* pc3 = &canon[3 * static_cast<std::size_t>(p.centroids1[c])];
    const auto row = group1.row(c);
    for (int j = 0; j < p.k1; ++j) {
      const double* pj = &canon[3 * static_cast<std::size_t>(row[j])];
      double* out = &p.global1[(static_cast<std::size_t>(c) * p.k1 + j) * 6];
      for (int a = 0; a < 3; ++a) {
        out[a] = pj[a] - pc3[a];
        out[3 + a] = pj[a];
      }
    }
  }

  std::vector<Vec3> cpts(p.n1);
  for (int c = 0; c < p.n1; ++c) cpts[c] = pts[p.centroids1[c]];
  p.centroids2 = farthest_point_indices(cpts, cfg.n2, fps_seed + 1);
  const auto nb2 = knn_query(cpts, p.centroids2, cfg.k2, true);
  p.group2 = nb2.indices;
  p.local2.resize(static_cast<std::size_t>(p.n2) * p.k2 * 3);
  p.global2.resize(p.local2.size());
  std::vector<Frame> frames2(p.n2);
  for (int i = 0; i < p.n2; ++i) {
    const int ci = p.centroids2[i];
    frames2[i] = frames1[ci];
    const auto row = nb2.row(i);
    for (int j = 0; j < p.k2; ++j) {
      const Vec3 l = row_times(cpts[row[j]] - cpts[ci], frames1[ci].basis);
      double* ol = &p.local2[(static_cast<std::size_t>(i) * p.k2 + j) * 3];
      ol[0] = l.x;
      ol[1] = l.y;
      ol[2] = l.z;
      const double* qj = &canon[3 * static_cast<std::size_t>(p.centroids1[row[j]])];
      const double* qi = &canon[3 * static_cast<std::size_t>(p.centroids1[ci])];
      double* og = &p.global2[(static_cast<std::size_t>(i) * p.k2 + j) * 3];
      for (int a = 0; a < 3; ++a) og[a] = qj[a] - qi[a];
    }
  }
  p.self_angles = pairwise_angles(frames2);
  p.cross_angles.resize(p.n2);
  for (int i = 0; i < p.n2; ++i) p.cross_angles[i] = relative_angle_deg(frames2[i], g);
  return p;
}

std::vector<double> angular_embedding(std::span<const double> angles_deg, int d, double t_alpha) {
  if (d % 2) throw Error(ErrorCode::OddDimension, "embedding width must be even, got " + std::to_string(d));
  std::vector<double> freq(d / 2);
  for (int k = 0; k < d / 2; ++k) freq[k] = 1.0 / (t_alpha * std::pow(10000.0, 2.0 * k / d));
  std::vector<double> out(angles_deg.size() * d);
  for (std::size_t i = 0; i < angles_deg.size(); ++i)
    for (int k = 0; k < d / 2; ++k) {
      const double x = angles_deg[i] * freq[k];
      out[i * d + 2 * k] = std::sin(x);
      out[i * d + 2 * k + 1] = std::cos(x);
    }
  return out;
}

void init_params(ParamStore<float>& store, const ModelConfig& cfg, std::uint64_t seed) { init_impl(store, cfg, seed); }
void init_params(ParamStore<double>& store, const ModelConfig& cfg, std::uint64_t seed) { init_impl(store, cfg, seed); }

// ---------------------------------------------------------------- layers

template <class T>
Var linear(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var x) {
  return tape.affine(x, tape.param(store.get(name + ".W")), tape.param(store.get(name + ".b")));
}

template <class T>
Var dense(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var x) {
  return tape.leaky_relu(tape.layer_norm_rows(linear(tape, store, name, x)));
}

template <class T>
Var mlp(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var x, int layers) {
  for (int i = 0; i < layers; ++i) x = dense(tape, store, name + "." + std::to_string(i), x);
  return x;
}

template <class T>
Var attend(Tape<T>& tape, ParamStore<T>& store, const std::string& phi, Var f_in, Var logits, Var v, int batch,
           OffsetNorm norm) {
  Var attn = tape.row_softmax(logits);
  if (norm == OffsetNorm::pct) attn = tape.transpose(tape.l1_normalize_rows(tape.transpose(attn)));
  const Var mixed = merge(tape, tape.bmm(attn, split(tape, v, batch)));
  const Var f_oa = tape.sub(f_in, mixed);
  return tape.add(dense(tape, store, phi, f_oa), f_in);
}

template <class T>
Var offset_attention(Tape<T>& tape, ParamStore<T>& store, const std::string& phi, Var f_in, Var q, Var k, Var v,
                     int batch, OffsetNorm norm) {
  const Var logits = tape.bmm(split(tape, q, batch), tape.transpose(split(tape, k, batch)));
  return attend(tape, store, phi, f_in, logits, v, batch, norm);
}

template <class T>
std::pair<Var, Var> self_logits(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var e_sa,
                                int batch, bool use_e) {
  const Var q = tape.matmul(f, tape.param(store.get(name + ".Wq")));
  const Var k = tape.matmul(f, tape.param(store.get(name + ".Wk")));
  const Var v = tape.matmul(f, tape.param(store.get(name + ".Wv")));
  const int d = tape.shape(q)[1];
  Var a = tape.bmm(split(tape, q, batch), tape.transpose(split(tape, k, batch)));
  if (use_e) {
    // (q (e W)^T)[i,j] = sum_l e[i,j,l] (q W^T)[i,l]
    const Var r = tape.matmul(q, tape.transpose(tape.param(store.get(name + ".Wa"))));
    const int rows = tape.shape(r)[0];
    const Var rot = tape.bmm(e_sa, tape.reshape(r, {rows, d, 1}));
    a = tape.add(a, tape.reshape(rot, tape.shape(a)));
  }
  return {tape.scalar_mul(a, inv_sqrt<T>(d)), v};
}

template <class T>
std::pair<Var, Var> cross_logits(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var g, Var e_ca,
                                 int batch, bool use_e) {
  const Var q = tape.matmul(f, tape.param(store.get(name + ".Wq")));
  Var k = tape.matmul(g, tape.param(store.get(name + ".Wk")));
  const Var v = tape.matmul(g, tape.param(store.get(name + ".Wv")));
  const int d = tape.shape(q)[1];
  if (use_e) k = tape.add(k, tape.matmul(e_ca, tape.param(store.get(name + ".Wa"))));
  const Var a = tape.bmm(split(tape, q, batch), tape.transpose(split(tape, k, batch)));
  return {tape.scalar_mul(a, inv_sqrt<T>(d)), v};
}

template <class T>
Var ias(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var e_sa, int batch,
        const AttnOptions& opt) {
  const auto [a, v] = self_logits(tape, store, name + ".sa", f, e_sa, batch, opt.use_e_sa);
  return attend(tape, store, name + ".phi", f, a, v, batch, opt.norm);
}

template <class T>
Var iac(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var g, Var e_ca, int batch,
        const AttnOptions& opt) {
  const auto [a, v] = cross_logits(tape, store, name + ".ca", f, g, e_ca, batch, opt.use_e_ca);
  return attend(tape, store, name + ".phi", f, a, v, batch, opt.norm);
}

template <class T>
Var afi(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var g, Var e_sa, Var e_ca, int batch,
        const AttnOptions& opt) {
  const auto [a_sa, v_sa] = self_logits(tape, store, name + ".sa", f, e_sa, batch, opt.use_e_sa);
  const auto [a_ca, v_ca] = cross_logits(tape, store, name + ".ca", f, g, e_ca, batch, opt.use_e_ca);
  return attend(tape, store, name + ".phi", f, tape.add(a_sa, a_ca), tape.add(v_sa, v_ca), batch, opt.norm);
}

template <class T>
Var correspondence_logits(Tape<T>& tape, ParamStore<T>& store, const std::string& phi_x, Var x, Var y, T t) {
  const Var zy = projection(tape, store, "reg.u", y);
  const Var zx = projection(tape, store, phi_x, x);
  return tape.scalar_mul(tape.matmul(zy, tape.transpose(zx)), T(1) / t);
}

template <class T>
Var correspondence_map(Tape<T>& tape, ParamStore<T>& store, const std::string& phi_x, Var x, Var y, T t) {
  return tape.row_softmax(correspondence_logits(tape, store, phi_x, x, y, t));
}

template <class T>
Var registration_loss(Tape<T>& tape, ParamStore<T>& store, const std::string& phi_x, Var f, Var u, T t) {
  if (!(tape.shape(f) == tape.shape(u)))
    throw Error(ErrorCode::ShapeMismatch, "registration_loss " + tape.shape(f).str() + " vs " + tape.shape(u).str());
  const Var s = correspondence_logits(tape, store, phi_x, f, u, t);
  std::vector<int> labels(tape.shape(s)[0]);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i);
  return tape.cross_entropy_logits(s, labels);
}

template <class T>
Var classify(Tape<T>& tape, ParamStore<T>& store, Var u, int batch) {
  const Var pooled = tape.max_over_axis(split(tape, u, batch), 1);
  return linear(tape, store, "head.1", dense(tape, store, "head.0", pooled));
}

// ---------------------------------------------------------------- model

template <class T>
Forward<T> forward(Tape<T>& tape, ParamStore<T>& store, const ModelConfig& cfg,
                   std::span<const Prepared* const> batch, bool with_loss) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  const Prepared& p0 = *batch[0];
  const int n1 = p0.n1, k1 = p0.k1, n2 = p0.n2, k2 = p0.k2, d = cfg.d;
  const int w1 = cfg.widths1.back(), c = cfg.channels();

  std::vector<T> l1, g1, l2, g2, esa, eca;
  std::vector<int> group, labels;
  for (int i = 0; i < b; ++i) {
    const Prepared& p = *batch[i];
    if (p.n1 != n1 || p.k1 != k1 || p.n2 != n2 || p.k2 != k2)
      throw Error(ErrorCode::ShapeMismatch, "batch members differ in sampling sizes");
    l1.insert(l1.end(), p.local1.begin(), p.local1.end());
    g1.insert(g1.end(), p.global1.begin(), p.global1.end());
    l2.insert(l2.end(), p.local2.begin(), p.local2.end());
    g2.insert(g2.end(), p.global2.begin(), p.global2.end());
    for (int idx : p.group2) group.push_back(i * n1 + idx);
    const auto es = angular_embedding(p.self_angles, d, cfg.t_alpha);
    const auto ec = angular_embedding(p.cross_angles, d, cfg.t_alpha);
    esa.insert(esa.end(), es.begin(), es.end());
    eca.insert(eca.end(), ec.begin(), ec.end());
    labels.push_back(p.label);
  }

  const int rows1 = b * n1 * k1, rows2 = b * n2 * k2, layers1 = static_cast<int>(cfg.widths1.size()),
            layers2 = static_cast<int>(cfg.widths2.size());
  auto encode = [&](const char* s1, const char* s2, std::vector<T>& in1, int ch1, std::vector<T>& in2) {
    const Var x1 = tape.constant({rows1, ch1}, std::move(in1));
    const Var f1 = tape.max_over_axis(tape.reshape(mlp(tape, store, s1, x1, layers1), {b * n1, k1, w1}), 1);
    const Var x2 = tape.concat(tape.gather_rows(f1, group), tape.constant({rows2, 3}, std::move(in2)), 1);
    return tape.max_over_axis(tape.reshape(mlp(tape, store, s2, x2, layers2), {b * n2, k2, c}), 1);
  };

  Forward<T> out;
  out.fl = encode("enc.l1", "enc.l2", l1, 3, l2);
  out.fg = encode("enc.g1", "enc.g2", g1, 6, g2);
  const Var e_sa = tape.constant({b * n2, n2, d}, std::move(esa));
  const Var e_ca = tape.constant({b * n2, d}, std::move(eca));
  AttnOptions opt{cfg.offset_norm, cfg.use_e_sa, cfg.use_e_ca};

  Var fg = out.fg;
  if (cfg.sa_on_global) {
    const std::vector<double> zeros(static_cast<std::size_t>(b) * n2 * n2, 0.0);
    const Var e0 = tape.constant({b * n2, n2, d}, cast<T>(angular_embedding(zeros, d, cfg.t_alpha)));
    fg = ias(tape, store, "gias", fg, e0, b, opt);
  }
  Var f = out.fl;
  for (int i = 0; i < cfg.blocks; ++i) {
    f = ias(tape, store, block(i) + ".ias", f, e_sa, b, opt);
    f = cfg.sequential_attn ? iac(tape, store, block(i) + ".iac", f, fg, e_ca, b, opt)
                            : afi(tape, store, block(i) + ".afi", f, fg, e_sa, e_ca, b, opt);
  }
  out.u = f;
  out.logits = classify(tape, store, out.u, b);
  if (!with_loss) return out;

  out.ce = tape.cross_entropy_logits(out.logits, labels);
  out.loss = out.ce;
  const T t = static_cast<T>(cfg.t), lambda = static_cast<T>(cfg.lambda);
  if (cfg.reg_local) {
    out.reg_local = registration_loss(tape, store, "reg.fl", out.fl, out.u, t);
    out.loss = tape.add(out.loss, tape.scalar_mul(out.reg_local, lambda));
  }
  if (cfg.reg_global) {
    out.reg_global = registration_loss(tape, store, "reg.fg", out.fg, out.u, t);
    out.loss = tape.add(out.loss, tape.scalar_mul(out.reg_global, lambda));
  }
  return out;
}

template <class T>
std::vector<T> predict_logits(ParamStore<T>& store, const ModelConfig& cfg, std::span<const Prepared* const> batch) {
  Tape<T> tape;
  const auto out = forward(tape, store, cfg, batch, false);
  const auto& v = tape.value(out.logits);
  return std::vector<T>(v.begin(), v.end());
}

#define RIFRAME_NET_INSTANTIATE(T)                                                                                   \
  template Var linear<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var);                                        \
  template Var dense<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var);                                         \
  template Var mlp<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, int);                                      \
  template Var attend<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, Var, int, OffsetNorm);             \
  template Var offset_attention<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, Var, Var, int,           \
                                   OffsetNorm);                                                                      \
  template std::pair<Var, Var> self_logits<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, int, bool);   \
  template std::pair<Var, Var> cross_logits<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, Var, int,    \
                                               bool);                                                                \
  template Var ias<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, int, const AttnOptions&);             \
  template Var iac<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, Var, int, const AttnOptions&);        \
  template Var afi<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, Var, Var, int, const AttnOptions&);   \
  template Var correspondence_logits<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, T);                 \
  template Var correspondence_map<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, T);                    \
  template Var registration_loss<T>(Tape<T>&, ParamStore<T>&, const std::string&, Var, Var, T);                     \
  template Var classify<T>(Tape<T>&, ParamStore<T>&, Var, int);                                                     \
  template Forward<T> forward<T>(Tape<T>&, ParamStore<T>&, const ModelConfig&, std::span<const Prepared* const>,    \
                                 bool);                                                                              \
  template std::vector<T> predict_logits<T>(ParamStore<T>&, const ModelConfig&, std::span<const Prepared* const>);

RIFRAME_NET_INSTANTIATE(float)
RIFRAME_NET_INSTANTIATE(double)

// ---------------------------------------------------------------- checkpoint

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store, const nlohmann::json& header) {
  nlohmann::json h = header;
  h["params"] = nlohmann::json::array();
  for (const auto& p : store.all()) {
    std::vector<int> dims(p.shape.dims.begin(), p.shape.dims.begin() + p.shape.rank);
    h["params"].push_back({{"name", p.name}, {"shape", dims}});
  }
  const std::string text = h.dump();
  std::vector<std::uint8_t> out = {'R', 'I', 'M', 'W'};
  le::put_u8(out, kCheckpointVersion);
  le::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& p : store.all())
    for (float v : p.value) le::put_f32(out, v);
  write_file_bytes(path, out);
}

namespace {

nlohmann::json parse_header(le::Reader& r) {
  r.expect_magic("RIMW");
  const auto version = r.u8();
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint version " + std::to_string(version));
  const auto len = r.u32();
  r.need(len);
  std::string text(len, '\0');
  for (auto& ch : text) ch = static_cast<char>(r.u8());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  le::Reader r(bytes);
  return parse_header(r);
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore<float>& store) {
  const auto bytes = read_file_bytes(path);
  le::Reader r(bytes);
  const auto h = parse_header(r);
  const auto& table = h.at("params");
  if (table.size() != store.all().size())
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint has " + std::to_string(table.size()) + " tensors, model " +
                                                   std::to_string(store.all().size()));
  std::size_t i = 0;
  for (const auto& p : store.all()) {
    std::vector<int> dims(p.shape.dims.begin(), p.shape.dims.begin() + p.shape.rank);
    if (table[i].at("name") != p.name || table[i].at("shape").get<std::vector<int>>() != dims)
      throw Error(ErrorCode::CheckpointMismatch, "tensor " + std::to_string(i) + " (" + p.name + ") differs");
    ++i;
  }
  for (auto& p : store.all())
    for (auto& v : p.value) v = r.f32();
  if (r.remaining() != 0) throw Error(ErrorCode::CheckpointMismatch, "trailing bytes in checkpoint");
  return h;
}

}  // namespace riframe::net
