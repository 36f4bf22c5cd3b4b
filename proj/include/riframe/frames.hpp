#pragma once

// Local and global reference frames.
//
// A local frame at p_i uses x = unit(p_i - p_m) with p_m the neighborhood
// barycenter, z = smallest-eigenvalue eigenvector of the distance-weighted
// covariance (signed toward p_i as seen from the world origin, then made
// orthogonal to x), and y = z cross x. Every step commutes with a rotation of
// the input, so the basis rotates with the cloud.
//
// The global frame is the PCA basis of the whole cloud, with each axis sign
// chosen by a majority vote of the points and a reflection repaired by one of
// four strategies.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "riframe/cloud.hpp"
#include "riframe/linalg3.hpp"

namespace riframe {

struct Frame {
  Mat3 basis = Mat3::identity();  // columns: x, y, z
  Vec3 origin;

  /// Orthonormal, right-handed within `tol`.
  bool valid(double tol = 1e-9) const { return is_rotation(basis, tol); }
};

enum class DisambiguationStrategy {
  a_permute_random,
  b_negate_random,
  c_permute_smallest_two,
  d_reverse_smallest,
};

std::string_view strategy_name(DisambiguationStrategy s);
std::optional<DisambiguationStrategy> strategy_from_name(std::string_view name);

struct SignVotes {
  int s_x = 0, s_y = 0, s_z = 0;
  int operator[](int i) const { return i == 0 ? s_x : (i == 1 ? s_y : s_z); }
};

struct FrameOptions {
  /// Apply the sign rules (z toward o->p_i locally, majority vote globally).
  bool disambiguate = true;
  /// All-equidistant neighborhoods fall back to uniform weights instead of
  /// raising ZeroWeightSum.
  bool regularize_equal_weights = true;
  DisambiguationStrategy strategy = DisambiguationStrategy::d_reverse_smallest;
};

/// Distance-weighted covariance of the offsets p_j - p_i. Weights are
/// (d - |p_j - p_i|) normalized to sum 1, d the largest neighbor distance.
Mat3 local_covariance(std::span<const Vec3> points, int center, std::span<const int> neighbors,
                      const FrameOptions& opt = {});

Frame lrf(std::span<const Vec3> points, int center, std::span<const int> neighbors, const FrameOptions& opt = {});

/// One local frame per query of `nbrs`. A neighborhood that cannot produce a
/// frame gets `fallback.basis` (origin still at its point); the number of
/// such fallbacks is written to `fallbacks` when given.
std::vector<Frame> compute_lrfs_serial(std::span<const Vec3> points, const NeighborIndex& nbrs, const Frame& fallback,
                                       const FrameOptions& opt = {}, int* fallbacks = nullptr);
/// OpenMP version, identical output.
std::vector<Frame> compute_lrfs(std::span<const Vec3> points, const NeighborIndex& nbrs, const Frame& fallback,
                                const FrameOptions& opt = {}, int* fallbacks = nullptr);

/// Count, per column of `basis`, the points whose offset from the barycenter
/// has a strictly positive projection on that axis.
SignVotes sign_votes(std::span<const Vec3> points, const Mat3& basis);

/// Flip every axis whose vote is below half the points.
Mat3 resolve_signs(std::span<const Vec3> points, const Mat3& basis);

/// PCA frame with origin at the barycenter. Strategies a and b draw from
/// `rng`; the others ignore it. Throws DegenerateCloud for coincident or
/// colinear clouds.
Frame grf(std::span<const Vec3> points, const FrameOptions& opt = {}, std::mt19937_64* rng = nullptr);

/// basis_a * basis_b^T.
Mat3 relative_rotation(const Frame& a, const Frame& b);
/// origin_a - origin_b. Not used by the attention layers.
Vec3 relative_translation(const Frame& a, const Frame& b);
double relative_angle_deg(const Frame& a, const Frame& b);

/// Row-major N x N matrix of relative angles.
std::vector<double> pairwise_angles_serial(std::span<const Frame> frames);
std::vector<double> pairwise_angles(std::span<const Frame> frames);

}  // namespace riframe
