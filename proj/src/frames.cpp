#include "riframe/frames.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "riframe/error.hpp"

namespace riframe {

namespace {

constexpr double kWeightEps = 1e-12;
constexpr double kRankTol = 1e-9;
constexpr double kCloudVarTol = 1e-18;

constexpr std::array<std::string_view, 4> kStrategyNames = {"a", "b", "c", "d"};

Vec3 barycenter(std::span<const Vec3> points) {
  Vec3 m;
  for (const auto& p : points) m += p;
  return m * (1.0 / static_cast<double>(points.size()));
}

}  // namespace

std::string_view strategy_name(DisambiguationStrategy s) { return kStrategyNames[static_cast<int>(s)]; }

std::optional<DisambiguationStrategy> strategy_from_name(std::string_view name) {
  for (int i = 0; i < 4; ++i)
    if (kStrategyNames[i] == name) return static_cast<DisambiguationStrategy>(i);
  return std::nullopt;
}

Mat3 local_covariance(std::span<const Vec3> points, int center, std::span<const int> neighbors,
                      const FrameOptions& opt) {
  if (neighbors.empty()) throw Error(ErrorCode::DegenerateNeighborhood, "empty neighborhood");
  const Vec3 c = points[center];
  double d = 0.0;
  for (int j : neighbors) d = std::max(d, (points[j] - c).norm());
  if (!(d > 0.0)) throw Error(ErrorCode::DegenerateNeighborhood, "all neighbors coincide with the center");

  Mat3 sigma;
  double wsum = 0.0;
  for (int j : neighbors) {
    const Vec3 o = points[j] - c;
    double w = d - o.norm();
    if (opt.regularize_equal_weights) w += kWeightEps;
    sigma += Mat3::outer(o, o) * w;
    wsum += w;
  }
  if (!(wsum > 0.0)) throw Error(ErrorCode::ZeroWeightSum, "every neighbor lies at the maximum distance");
  return sigma * (1.0 / wsum);
}

Frame lrf(std::span<const Vec3> points, int center, std::span<const int> neighbors, const FrameOptions& opt) {
  const Vec3 p = points[center];
  Vec3 m;
  double d = 0.0;
  for (int j : neighbors) {
    m += points[j];
    d = std::max(d, (points[j] - p).norm());
  }
  m *= 1.0 / static_cast<double>(neighbors.size());

  const Vec3 toward = p - m;
  if (toward.norm() <= kRankTol * d || !(d > 0.0))
    throw Error(ErrorCode::BarycenterCoincides, "point " + std::to_string(center) + " sits on its barycenter");
  const Vec3 x = normalized(toward);

  const SymEig3 eig = eig_sym3(local_covariance(points, center, neighbors, opt));
  if (!(eig.values[0] > 0.0) || eig.values[1] <= kRankTol * eig.values[0])
    throw Error(ErrorCode::DegenerateNeighborhood, "neighborhood of point " + std::to_string(center) + " is colinear");

  Vec3 z = eig.vectors.col(2);
  if (opt.disambiguate && dot(z, p) < 0.0) z = -z;
  z -= x * dot(z, x);
  if (z.norm() <= kRankTol) throw Error(ErrorCode::DegenerateNeighborhood, "normal parallel to barycenter direction");
  z = normalized(z);
  const Vec3 y = cross(z, x);
  return Frame{Mat3::from_cols(x, y, z), p};
}

namespace {

bool lrf_or_fallback(std::span<const Vec3> points, int center, std::span<const int> neighbors, const Frame& fallback,
                     const FrameOptions& opt, Frame& out) {
  try {
    out = lrf(points, center, neighbors, opt);
    return true;
  } catch (const Error&) {
    out = Frame{fallback.basis, points[center]};
    return false;
  }
}

}  // namespace

std::vector<Frame> compute_lrfs_serial(std::span<const Vec3> points, const NeighborIndex& nbrs, const Frame& fallback,
                                       const FrameOptions& opt, int* fallbacks) {
  std::vector<Frame> frames(nbrs.num_queries());
  int failed = 0;
  for (std::size_t q = 0; q < frames.size(); ++q)
    if (!lrf_or_fallback(points, nbrs.query[q], nbrs.row(q), fallback, opt, frames[q])) ++failed;
  if (fallbacks) *fallbacks = failed;
  return frames;
}

std::vector<Frame> compute_lrfs(std::span<const Vec3> points, const NeighborIndex& nbrs, const Frame& fallback,
                                const FrameOptions& opt, int* fallbacks) {
  std::vector<Frame> frames(nbrs.num_queries());
  const long nq = static_cast<long>(frames.size());
  int failed = 0;
#pragma omp parallel for schedule(static) reduction(+ : failed)
  for (long q = 0; q < nq; ++q)
    if (!lrf_or_fallback(points, nbrs.query[q], nbrs.row(q), fallback, opt, frames[q])) ++failed;
  if (fallbacks) *fallbacks = failed;
  return frames;
}

SignVotes sign_votes(std::span<const Vec3> points, const Mat3& basis) {
  const Vec3 m = barycenter(points);
  const Vec3 ax[3] = {basis.col(0), basis.col(1), basis.col(2)};
  int s[3] = {0, 0, 0};
  for (const auto& p : points) {
    const Vec3 o = p - m;
    for (int a = 0; a < 3; ++a)
      if (dot(ax[a], o) > 0.0) ++s[a];
  }
  return {s[0], s[1], s[2]};
}

Mat3 resolve_signs(std::span<const Vec3> points, const Mat3& basis) {
  const SignVotes v = sign_votes(points, basis);
  const auto n = static_cast<long>(points.size());
  Mat3 out = basis;
  for (int a = 0; a < 3; ++a)
    if (2L * v[a] < n) out.set_col(a, -basis.col(a));
  return out;
}

Frame grf(std::span<const Vec3> points, const FrameOptions& opt, std::mt19937_64* rng) {
  if (points.size() < 2) throw Error(ErrorCode::DegenerateCloud, "global frame needs at least two points");
  const Vec3 m = barycenter(points);
  Mat3 cov;
  for (const auto& p : points) {
    const Vec3 o = p - m;
    cov += Mat3::outer(o, o);
  }
  cov *= 1.0 / static_cast<double>(points.size());
  const SymEig3 eig = eig_sym3(cov);
  if (eig.values[0] <= kCloudVarTol) throw Error(ErrorCode::DegenerateCloud, "all points coincide");
  if (eig.values[1] <= kCloudVarTol) throw Error(ErrorCode::DegenerateCloud, "points are colinear");

  Mat3 basis = eig.vectors;
  if (!opt.disambiguate) {
    if (basis.det() < 0.0) basis.set_col(2, -basis.col(2));
    return Frame{basis, m};
  }

  basis = resolve_signs(points, basis);
  if (basis.det() < 0.0) {
    const SignVotes v = sign_votes(points, basis);
    std::mt19937_64 local_rng(0);
    std::mt19937_64& r = rng ? *rng : local_rng;
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return v[i] < v[j]; });
    switch (opt.strategy) {
      case DisambiguationStrategy::a_permute_random: {
        static constexpr int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
        const int k = std::uniform_int_distribution<int>(0, 2)(r);
        const Vec3 tmp = basis.col(pairs[k][0]);
        basis.set_col(pairs[k][0], basis.col(pairs[k][1]));
        basis.set_col(pairs[k][1], tmp);
        break;
      }
      case DisambiguationStrategy::b_negate_random: {
        const int k = std::uniform_int_distribution<int>(0, 2)(r);
        basis.set_col(k, -basis.col(k));
        break;
      }
      case DisambiguationStrategy::c_permute_smallest_two: {
        const Vec3 tmp = basis.col(order[0]);
        basis.set_col(order[0], basis.col(order[1]));
        basis.set_col(order[1], tmp);
        break;
      }
      case DisambiguationStrategy::d_reverse_smallest:
        basis.set_col(order[0], -basis.col(order[0]));
        break;
    }
  }
  return Frame{basis, m};
}

Mat3 relative_rotation(const Frame& a, const Frame& b) { return a.basis * b.basis.transposed(); }

Vec3 relative_translation(const Frame& a, const Frame& b) { return a.origin - b.origin; }

double relative_angle_deg(const Frame& a, const Frame& b) {
  if (a.basis == b.basis) return 0.0;
  return rotation_angle_deg(relative_rotation(a, b));
}

std::vector<double> pairwise_angles_serial(std::span<const Frame> frames) {
  const std::size_t n = frames.size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out[i * n + j] = relative_angle_deg(frames[i], frames[j]);
  return out;
}

std::vector<double> pairwise_angles(std::span<const Frame> frames) {
  const long n = static_cast<long>(frames.size());
  std::vector<double> out(n * n, 0.0);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (i != j) out[i * n + j] = relative_angle_deg(frames[i], frames[j]);
  return out;
}

}  // namespace riframe
