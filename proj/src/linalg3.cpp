#include "riframe/linalg3.hpp"

#include <algorithm>
#include <numbers>
#include <random>
#include <utility>

#include "riframe/error.hpp"

namespace riframe {

namespace {

constexpr double kSymTol = 1e-9;
constexpr double kFallbackSpacing = 1e-6;
constexpr double kClusterTol = 1e-10;
constexpr double kResidualTol = 1e-12;

void check_input(const Mat3& a) {
  if (!a.finite()) throw Error(ErrorCode::NonFinite, "eig_sym3 input has NaN/Inf");
  for (int r = 0; r < 3; ++r)
    for (int c = r + 1; c < 3; ++c)
      if (std::abs(a(r, c) - a(c, r)) > kSymTol)
        throw Error(ErrorCode::NonSymmetric, "asymmetry " + std::to_string(std::abs(a(r, c) - a(c, r))));
}

Vec3 canonical_sign(Vec3 v) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0) v = -v;
      break;
    }
  }
  return v;
}

void sort_descending(SymEig3& e) {
  std::array<int, 3> idx{0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return e.values[i] > e.values[j]; });
  SymEig3 out;
  for (int k = 0; k < 3; ++k) {
    out.values[k] = e.values[idx[k]];
    out.vectors.set_col(k, e.vectors.col(idx[k]));
  }
  e = out;
}

// Null vector of (a - lambda I) from the best-conditioned pair of rows.
Vec3 null_vector(const Mat3& a, double lambda) {
  Mat3 m = a - Mat3::identity() * lambda;
  const Vec3 r0 = m.row(0), r1 = m.row(1), r2 = m.row(2);
  const Vec3 c[3] = {cross(r0, r1), cross(r0, r2), cross(r1, r2)};
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (c[i].squared_norm() > c[best].squared_norm()) best = i;
  return normalized(c[best]);
}

bool residual_ok(const Mat3& a, const SymEig3& e, double scale) {
  for (int i = 0; i < 3; ++i) {
    const Vec3 v = e.vectors.col(i);
    if ((a * v - v * e.values[i]).norm() > kResidualTol * scale) return false;
  }
  return true;
}

// Replace eigenvectors inside numerically tied eigenspaces with the
// deterministic choice: the projection of e_x (then e_y, e_z) into the space.
void resolve_ties(SymEig3& e, double scale) {
  const double tol = kClusterTol * scale;
  const bool t01 = e.values[0] - e.values[1] <= tol;
  const bool t12 = e.values[1] - e.values[2] <= tol;
  if (t01 && t12) {
    e.vectors = Mat3::identity();
    return;
  }
  if (!t01 && !t12) return;

  const int lone = t01 ? 2 : 0;
  const int first = t01 ? 0 : 1;
  const Vec3 n = e.vectors.col(lone);
  const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  Vec3 pick = axes[0];
  for (const Vec3& ax : axes) {
    const Vec3 p = ax - n * dot(ax, n);
    if (p.norm() > 1e-9) {
      pick = normalized(p);
      break;
    }
  }
  e.vectors.set_col(first, pick);
  e.vectors.set_col(first + 1, normalized(cross(n, pick)));
}

SymEig3 finish(SymEig3 e, double scale) {
  sort_descending(e);
  resolve_ties(e, scale);
  for (int i = 0; i < 3; ++i) e.vectors.set_col(i, canonical_sign(e.vectors.col(i)));
  return e;
}

}  // namespace

SymEig3 eig_sym3_jacobi(const Mat3& input, double tol) {
  Mat3 a = input;
  Mat3 v = Mat3::identity();
  const double scale = std::max(input.frobenius(), 1e-300);
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::sqrt(2.0 * (a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2)));
    if (off <= tol * scale) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // a <- J^T a J with the Givens rotation J acting on (p, q).
        for (int k = 0; k < 3; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEig3 e;
  e.values = {a(0, 0), a(1, 1), a(2, 2)};
  e.vectors = v;
  sort_descending(e);
  return e;
}

SymEig3 eig_sym3(const Mat3& input) {
  check_input(input);
  Mat3 a = input;
  for (int r = 0; r < 3; ++r)
    for (int c = r + 1; c < 3; ++c) a(r, c) = a(c, r) = 0.5 * (input(r, c) + input(c, r));

  const double scale = a.frobenius();
  if (scale == 0.0) {
    SymEig3 e;
    e.vectors = Mat3::identity();
    return e;
  }

  const double q = a.trace() / 3.0;
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);

  if (p > 0.0) {
    const Mat3 b = (a - Mat3::identity() * q) * (1.0 / p);
    const double r = std::clamp(b.det() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double l0 = q + 2.0 * p * std::cos(phi);
    const double l2 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    const double l1 = 3.0 * q - l0 - l2;
    if (std::min(l0 - l1, l1 - l2) >= kFallbackSpacing * scale) {
      SymEig3 e;
      e.values = {l0, l1, l2};
      const Vec3 v0 = null_vector(a, l0);
      Vec3 v2 = null_vector(a, l2);
      v2 = normalized(v2 - v0 * dot(v2, v0));
      e.vectors = Mat3::from_cols(v0, normalized(cross(v2, v0)), v2);
      if (residual_ok(a, e, scale)) return finish(e, scale);
    }
  }
  return finish(eig_sym3_jacobi(a), scale);
}

Mat3 random_rotation(std::uint64_t seed, RotationMode mode) {
  std::mt19937_64 rng(seed);
  if (mode == RotationMode::z_axis) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double t = angle(rng);
    const double c = std::cos(t), s = std::sin(t);
    Mat3 r = Mat3::identity();
    r(0, 0) = c; r(0, 1) = -s;
    r(1, 0) = s; r(1, 1) = c;
    return r;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  double w, x, y, z, n;
  do {
    w = gauss(rng); x = gauss(rng); y = gauss(rng); z = gauss(rng);
    n = std::sqrt(w * w + x * x + y * y + z * z);
  } while (n < 1e-12);
  w /= n; x /= n; y /= n; z /= n;
  Mat3 r;
  r(0, 0) = 1 - 2 * (y * y + z * z); r(0, 1) = 2 * (x * y - w * z);     r(0, 2) = 2 * (x * z + w * y);
  r(1, 0) = 2 * (x * y + w * z);     r(1, 1) = 1 - 2 * (x * x + z * z); r(1, 2) = 2 * (y * z - w * x);
  r(2, 0) = 2 * (x * z - w * y);     r(2, 1) = 2 * (y * z + w * x);     r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.finite()) return false;
  const Mat3 g = r.transposed() * r - Mat3::identity();
  for (double v : g.a)
    if (std::abs(v) > tol) return false;
  return std::abs(r.det() - 1.0) <= tol;
}

double rotation_angle_deg(const Mat3& r) {
  if (!is_rotation(r)) throw Error(ErrorCode::NotRotation, "rotation_angle_deg: input is not a rotation");
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace riframe
