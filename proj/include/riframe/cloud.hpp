#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riframe/linalg3.hpp"

namespace riframe {

struct PointCloud {
  std::vector<Vec3> points;
  std::optional<int> label;
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return points.size(); }
  /// Throws BadSpec if empty or any coordinate is not finite.
  void validate() const;
};

/// k nearest neighbors per query point, ascending distance, ties by index.
struct NeighborIndex {
  int k = 0;
  std::vector<int> query;        // index of each query point in the cloud
  std::vector<int> indices;      // query.size() * k
  std::vector<double> distances; // query.size() * k
  std::vector<double> d_max;     // distance of the k-th neighbor

  std::size_t num_queries() const { return query.size(); }
  std::span<const int> row(std::size_t q) const {
    return {indices.data() + q * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }
  std::span<const double> row_distances(std::size_t q) const {
    return {distances.data() + q * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }
};

// ---- sampling ---------------------------------------------------------------

/// Greedy maximin subset. The first index is drawn from `seed`; later picks
/// maximize the distance to the selected set, ties to the lowest index.
/// Returns indices in selection order. Throws TooFewPoints when n > |points|.
std::vector<int> farthest_point_indices(std::span<const Vec3> points, int n, std::uint64_t seed);
/// Same selection, parallel distance update (OpenMP). Identical output.
std::vector<int> farthest_point_indices_parallel(std::span<const Vec3> points, int n, std::uint64_t seed);
/// Same selection from an explicit start index.
std::vector<int> farthest_point_indices_from(std::span<const Vec3> points, int n, int start);

std::vector<int> random_sample_indices(std::size_t size, int n, std::uint64_t seed);

PointCloud farthest_point_sample(const PointCloud& pc, int n, std::uint64_t seed);
PointCloud random_sample(const PointCloud& pc, int n, std::uint64_t seed);
PointCloud select(const PointCloud& pc, std::span<const int> indices);

// ---- neighbors --------------------------------------------------------------

/// Exact kNN of every point, self excluded. Throws KTooLarge unless 1 <= k < |pc|.
NeighborIndex knn(const PointCloud& pc, int k);

/// Exact kNN of the given query points (indices into `points`), brute force.
/// With `include_self` the query point itself counts as its own nearest
/// neighbor; otherwise it is skipped.
NeighborIndex knn_query_serial(std::span<const Vec3> points, std::span<const int> queries, int k,
                               bool include_self = false);
/// OpenMP version of knn_query_serial, identical output.
NeighborIndex knn_query(std::span<const Vec3> points, std::span<const int> queries, int k,
                        bool include_self = false);

// ---- transforms -------------------------------------------------------------

/// Throws NotRotation unless r is a rotation within 1e-9.
PointCloud apply_rotation(const PointCloud& pc, const Mat3& r);

struct AugmentOptions {
  double translate_range = 0.2;
  double scale_low = 0.67;
  double scale_high = 1.5;
};

/// One global scale U(low, high), then one global translation with
/// components U(-t, t).
PointCloud augment(const PointCloud& pc, std::uint64_t seed, const AugmentOptions& opt = {});

/// Per-coordinate N(0, sigma^2) jitter plus `n_outliers` points drawn
/// uniformly inside the unit ball, appended.
PointCloud add_noise(const PointCloud& pc, double sigma, int n_outliers, std::uint64_t seed);

// ---- synthetic shapes -------------------------------------------------------

enum class ShapeFamily { sphere, box, torus, cylinder, cone, plane_cross, helix, ellipsoid };
inline constexpr int kNumShapeFamilies = 8;

std::string_view family_name(ShapeFamily f);
std::optional<ShapeFamily> family_from_name(std::string_view name);

/// Size parameters per family:
///   sphere {radius}; box {hx, hy, hz}; torus {R, r}; cylinder {radius, half_height};
///   cone {radius, height}; plane_cross {half_len, half_wid, half_height};
///   helix {radius, pitch, turns, tube}; ellipsoid {a, b, c}.
struct ShapeSpec {
  ShapeFamily family = ShapeFamily::sphere;
  std::vector<double> params;
  int n_points = 1024;

  /// Throws BadSpec on a wrong parameter count, non-positive values or
  /// n_points < 16.
  void validate() const;
};

ShapeSpec default_shape_spec(ShapeFamily family, int n_points);

/// Surface samples in the family's own coordinates (centered, unscaled).
PointCloud sample_shape_raw(const ShapeSpec& spec, std::uint64_t seed);
/// Raw samples scaled to unit max radius, labeled by family index.
PointCloud generate_shape(const ShapeSpec& spec, std::uint64_t seed);

}  // namespace riframe
