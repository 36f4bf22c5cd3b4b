#include "riframe/cloud.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "riframe/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace riframe {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_sample_size(std::size_t size, int n) {
  if (n < 1 || static_cast<std::size_t>(n) > size)
    throw Error(ErrorCode::TooFewPoints,
                "requested " + std::to_string(n) + " of " + std::to_string(size) + " points");
}

int seeded_start(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, size - 1);
  return static_cast<int>(pick(rng));
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = {g(rng), g(rng), g(rng)};
  } while (v.norm() < 1e-12);
  return normalized(v);
}

}  // namespace

void PointCloud::validate() const {
  if (points.empty()) throw Error(ErrorCode::BadSpec, "point cloud is empty");
  for (const auto& p : points)
    if (!p.finite()) throw Error(ErrorCode::BadSpec, "point cloud has a non-finite coordinate");
}

// ---- sampling ---------------------------------------------------------------

std::vector<int> farthest_point_indices_from(std::span<const Vec3> points, int n, int start) {
  check_sample_size(points.size(), n);
  const std::size_t size = points.size();
  std::vector<double> min_d(size, std::numeric_limits<double>::infinity());
  std::vector<int> out;
  out.reserve(n);
  int cur = start;
  for (int s = 0; s < n; ++s) {
    out.push_back(cur);
    const Vec3 c = points[cur];
    // Branch-free update and max, then the first index at the max; keeps the
    // loops vectorizable and the timing independent of the data.
    double best_d = -1.0;
    for (std::size_t i = 0; i < size; ++i) {
      const double d = (points[i] - c).squared_norm();
      min_d[i] = std::min(min_d[i], d);
      best_d = std::max(best_d, min_d[i]);
    }
    cur = static_cast<int>(std::find(min_d.begin(), min_d.end(), best_d) - min_d.begin());
  }
  return out;
}

std::vector<int> farthest_point_indices(std::span<const Vec3> points, int n, std::uint64_t seed) {
  check_sample_size(points.size(), n);
  return farthest_point_indices_from(points, n, seeded_start(points.size(), seed));
}

std::vector<int> farthest_point_indices_parallel(std::span<const Vec3> points, int n, std::uint64_t seed) {
  check_sample_size(points.size(), n);
  const long size = static_cast<long>(points.size());
  std::vector<double> min_d(size, std::numeric_limits<double>::infinity());
  std::vector<int> out;
  out.reserve(n);
  int cur = seeded_start(points.size(), seed);
  for (int s = 0; s < n; ++s) {
    out.push_back(cur);
    const Vec3 c = points[cur];
    int best = -1;
    double best_d = -1.0;
#pragma omp parallel
    {
      int local_best = -1;
      double local_d = -1.0;
#pragma omp for schedule(static) nowait
      for (long i = 0; i < size; ++i) {
        const double d = (points[i] - c).squared_norm();
        if (d < min_d[i]) min_d[i] = d;
        if (min_d[i] > local_d) {
          local_d = min_d[i];
          local_best = static_cast<int>(i);
        }
      }
#pragma omp critical
      {
        if (local_best >= 0 && (local_d > best_d || (local_d == best_d && local_best < best))) {
          best_d = local_d;
          best = local_best;
        }
      }
    }
    cur = best;
  }
  return out;
}

std::vector<int> random_sample_indices(std::size_t size, int n, std::uint64_t seed) {
  check_sample_size(size, n);
  std::vector<int> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

PointCloud select(const PointCloud& pc, std::span<const int> indices) {
  PointCloud out;
  out.label = pc.label;
  out.seed = pc.seed;
  out.points.reserve(indices.size());
  for (int i : indices) out.points.push_back(pc.points[i]);
  return out;
}

PointCloud farthest_point_sample(const PointCloud& pc, int n, std::uint64_t seed) {
  auto out = select(pc, farthest_point_indices(pc.points, n, seed));
  out.seed = seed;
  return out;
}

PointCloud random_sample(const PointCloud& pc, int n, std::uint64_t seed) {
  auto out = select(pc, random_sample_indices(pc.size(), n, seed));
  out.seed = seed;
  return out;
}

// ---- neighbors --------------------------------------------------------------

namespace {

void check_k(std::size_t size, int k, bool include_self) {
  const std::size_t limit = include_self ? size : size - 1;
  if (k < 1 || static_cast<std::size_t>(k) > limit)
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " for " + std::to_string(size) + " points");
}

// One query row: brute-force distances, partial sort by (distance, index).
void knn_row(std::span<const Vec3> points, int q, int k, bool include_self, std::vector<std::pair<double, int>>& scratch,
             int* out_idx, double* out_dist, double& d_max) {
  scratch.clear();
  const Vec3 c = points[q];
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!include_self && static_cast<int>(i) == q) continue;
    scratch.emplace_back((points[i] - c).squared_norm(), static_cast<int>(i));
  }
  if (include_self) {
    // The query itself always leads, even against coincident duplicates.
    for (auto& e : scratch)
      if (e.second == q) e.first = -1.0;
  }
  std::partial_sort(scratch.begin(), scratch.begin() + k, scratch.end());
  for (int j = 0; j < k; ++j) {
    out_idx[j] = scratch[j].second;
    out_dist[j] = scratch[j].first < 0.0 ? 0.0 : std::sqrt(scratch[j].first);
  }
  d_max = out_dist[k - 1];
}

NeighborIndex make_index(std::span<const int> queries, int k) {
  NeighborIndex nb;
  nb.k = k;
  nb.query.assign(queries.begin(), queries.end());
  nb.indices.resize(queries.size() * k);
  nb.distances.resize(queries.size() * k);
  nb.d_max.resize(queries.size());
  return nb;
}

}  // namespace

NeighborIndex knn_query_serial(std::span<const Vec3> points, std::span<const int> queries, int k, bool include_self) {
  check_k(points.size(), k, include_self);
  NeighborIndex nb = make_index(queries, k);
  std::vector<std::pair<double, int>> scratch;
  scratch.reserve(points.size());
  for (std::size_t q = 0; q < queries.size(); ++q)
    knn_row(points, queries[q], k, include_self, scratch, nb.indices.data() + q * k, nb.distances.data() + q * k,
            nb.d_max[q]);
  return nb;
}

NeighborIndex knn_query(std::span<const Vec3> points, std::span<const int> queries, int k, bool include_self) {
  check_k(points.size(), k, include_self);
  NeighborIndex nb = make_index(queries, k);
  const long nq = static_cast<long>(queries.size());
#pragma omp parallel
  {
    std::vector<std::pair<double, int>> scratch;
    scratch.reserve(points.size());
#pragma omp for schedule(static)
    for (long q = 0; q < nq; ++q)
      knn_row(points, queries[q], k, include_self, scratch, nb.indices.data() + q * k, nb.distances.data() + q * k,
              nb.d_max[q]);
  }
  return nb;
}

NeighborIndex knn(const PointCloud& pc, int k) {
  if (pc.size() < 2) throw Error(ErrorCode::KTooLarge, "kNN needs at least two points");
  std::vector<int> all(pc.size());
  std::iota(all.begin(), all.end(), 0);
  return knn_query(pc.points, all, k, false);
}

// ---- transforms -------------------------------------------------------------

PointCloud apply_rotation(const PointCloud& pc, const Mat3& r) {
  if (!is_rotation(r)) throw Error(ErrorCode::NotRotation, "apply_rotation: matrix is not a rotation");
  PointCloud out = pc;
  for (auto& p : out.points) p = r * p;
  return out;
}

PointCloud augment(const PointCloud& pc, std::uint64_t seed, const AugmentOptions& opt) {
  if (!(opt.scale_low > 0.0) || opt.scale_low > opt.scale_high)
    throw Error(ErrorCode::BadSpec, "augment: scale range must be positive with low <= high");
  std::mt19937_64 rng(seed);
  double scale = opt.scale_low;
  if (opt.scale_high > opt.scale_low) scale = std::uniform_real_distribution<double>(opt.scale_low, opt.scale_high)(rng);
  Vec3 shift;
  if (opt.translate_range > 0.0) {
    std::uniform_real_distribution<double> u(-opt.translate_range, opt.translate_range);
    shift = {u(rng), u(rng), u(rng)};
  }
  PointCloud out = pc;
  for (auto& p : out.points) p = p * scale + shift;
  return out;
}

PointCloud add_noise(const PointCloud& pc, double sigma, int n_outliers, std::uint64_t seed) {
  if (sigma < 0.0 || n_outliers < 0) throw Error(ErrorCode::BadSpec, "add_noise: sigma and n_outliers must be >= 0");
  std::mt19937_64 rng(seed);
  PointCloud out = pc;
  if (sigma > 0.0) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& p : out.points) p += Vec3{g(rng), g(rng), g(rng)};
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < n_outliers; ++i) {
    Vec3 p;
    do {
      p = {u(rng), u(rng), u(rng)};
    } while (p.squared_norm() > 1.0);
    out.points.push_back(p);
  }
  return out;
}

// ---- synthetic shapes -------------------------------------------------------

namespace {

constexpr std::array<std::string_view, kNumShapeFamilies> kFamilyNames = {
    "sphere", "box", "torus", "cylinder", "cone", "plane_cross", "helix", "ellipsoid"};

constexpr std::array<std::size_t, kNumShapeFamilies> kParamCounts = {1, 3, 2, 2, 2, 3, 4, 3};

// Pick one of several weighted pieces.
int pick_piece(std::mt19937_64& rng, std::span<const double> areas) {
  const double total = std::accumulate(areas.begin(), areas.end(), 0.0);
  double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t i = 0; i < areas.size(); ++i) {
    if (r < areas[i]) return static_cast<int>(i);
    r -= areas[i];
  }
  return static_cast<int>(areas.size()) - 1;
}

Vec3 sample_one(const ShapeSpec& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uab = [&](double a, double b) { return a + (b - a) * u01(rng); };
  const auto& p = s.params;
  switch (s.family) {
    case ShapeFamily::sphere:
      return random_unit(rng) * p[0];
    case ShapeFamily::box: {
      const double hx = p[0], hy = p[1], hz = p[2];
      const std::array<double, 3> areas = {hy * hz, hx * hz, hx * hy};
      const int axis = pick_piece(rng, areas);
      const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
      Vec3 v{uab(-hx, hx), uab(-hy, hy), uab(-hz, hz)};
      v[axis] = sign * p[axis];
      return v;
    }
    case ShapeFamily::torus: {
      const double big = p[0], small = p[1];
      // Rejection on the area element (R + r cos v).
      for (;;) {
        const double a = uab(0.0, kTwoPi), b = uab(0.0, kTwoPi);
        if (u01(rng) * (big + small) <= big + small * std::cos(b)) {
          const double rho = big + small * std::cos(b);
          return {rho * std::cos(a), rho * std::sin(a), small * std::sin(b)};
        }
      }
    }
    case ShapeFamily::cylinder: {
      const double r = p[0], h = p[1];
      const std::array<double, 3> areas = {2.0 * std::numbers::pi * r * 2.0 * h, std::numbers::pi * r * r,
                                           std::numbers::pi * r * r};
      const int piece = pick_piece(rng, areas);
      const double a = uab(0.0, kTwoPi);
      if (piece == 0) return {r * std::cos(a), r * std::sin(a), uab(-h, h)};
      const double rr = r * std::sqrt(u01(rng));
      return {rr * std::cos(a), rr * std::sin(a), piece == 1 ? h : -h};
    }
    case ShapeFamily::cone: {
      // Apex at +2h/3, base at -h/3 so the solid centroid sits at the origin.
      const double r = p[0], h = p[1];
      const double slant = std::sqrt(r * r + h * h);
      const std::array<double, 2> areas = {std::numbers::pi * r * slant, std::numbers::pi * r * r};
      const int piece = pick_piece(rng, areas);
      const double a = uab(0.0, kTwoPi);
      const double t = std::sqrt(u01(rng));
      if (piece == 0) return {t * r * std::cos(a), t * r * std::sin(a), 2.0 * h / 3.0 - t * h};
      return {t * r * std::cos(a), t * r * std::sin(a), -h / 3.0};
    }
    case ShapeFamily::plane_cross: {
      // Two orthogonal rectangles sharing the x axis.
      const double l = p[0], w = p[1], hh = p[2];
      const std::array<double, 2> areas = {l * w, l * hh};
      if (pick_piece(rng, areas) == 0) return {uab(-l, l), uab(-w, w), 0.0};
      return {uab(-l, l), 0.0, uab(-hh, hh)};
    }
    case ShapeFamily::helix: {
      const double r = p[0], pitch = p[1], turns = p[2], tube = p[3];
      const double t = uab(0.0, turns * kTwoPi);
      const double zc = pitch * turns / 2.0;
      const Vec3 c{r * std::cos(t), r * std::sin(t), pitch * t / kTwoPi - zc};
      const Vec3 tangent = normalized(Vec3{-r * std::sin(t), r * std::cos(t), pitch / kTwoPi});
      const Vec3 n1 = normalized(Vec3{std::cos(t), std::sin(t), 0.0});
      const Vec3 n2 = cross(tangent, n1);
      const double a = uab(0.0, kTwoPi);
      return c + (n1 * std::cos(a) + n2 * std::sin(a)) * tube;
    }
    case ShapeFamily::ellipsoid: {
      const Vec3 d = random_unit(rng);
      return {p[0] * d.x, p[1] * d.y, p[2] * d.z};
    }
  }
  return {};
}

}  // namespace

std::string_view family_name(ShapeFamily f) { return kFamilyNames[static_cast<int>(f)]; }

std::optional<ShapeFamily> family_from_name(std::string_view name) {
  for (int i = 0; i < kNumShapeFamilies; ++i)
    if (kFamilyNames[i] == name) return static_cast<ShapeFamily>(i);
  return std::nullopt;
}

void ShapeSpec::validate() const {
  const int f = static_cast<int>(family);
  if (f < 0 || f >= kNumShapeFamilies) throw Error(ErrorCode::BadSpec, "unknown shape family");
  if (params.size() != kParamCounts[f])
    throw Error(ErrorCode::BadSpec, std::string(family_name(family)) + " expects " +
                                        std::to_string(kParamCounts[f]) + " parameters");
  for (double v : params)
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::BadSpec, "shape parameters must be positive");
  if (n_points < 16) throw Error(ErrorCode::BadSpec, "n_points must be >= 16");
}

ShapeSpec default_shape_spec(ShapeFamily family, int n_points) {
  ShapeSpec s;
  s.family = family;
  s.n_points = n_points;
  switch (family) {
    case ShapeFamily::sphere: s.params = {1.0}; break;
    case ShapeFamily::box: s.params = {1.0, 0.7, 0.45}; break;
    case ShapeFamily::torus: s.params = {1.0, 0.25}; break;
    case ShapeFamily::cylinder: s.params = {0.5, 1.0}; break;
    case ShapeFamily::cone: s.params = {0.7, 1.6}; break;
    case ShapeFamily::plane_cross: s.params = {1.0, 0.6, 0.35}; break;
    case ShapeFamily::helix: s.params = {0.6, 0.6, 2.5, 0.12}; break;
    case ShapeFamily::ellipsoid: s.params = {1.0, 0.6, 0.35}; break;
  }
  return s;
}

PointCloud sample_shape_raw(const ShapeSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  PointCloud pc;
  pc.points.reserve(spec.n_points);
  for (int i = 0; i < spec.n_points; ++i) pc.points.push_back(sample_one(spec, rng));
  pc.label = static_cast<int>(spec.family);
  pc.seed = seed;
  return pc;
}

PointCloud generate_shape(const ShapeSpec& spec, std::uint64_t seed) {
  PointCloud pc = sample_shape_raw(spec, seed);
  double r = 0.0;
  for (const auto& p : pc.points) r = std::max(r, p.norm());
  if (r > 0.0)
    for (auto& p : pc.points) p *= 1.0 / r;
  return pc;
}

}  // namespace riframe
