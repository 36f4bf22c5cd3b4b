#pragma once

// Fixed-size 3-vector / 3x3 kernels used by frame construction.

#include <array>
#include <cmath>
#include <cstdint>

namespace riframe {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  constexpr double squared_norm() const { return x * x + y * y + z * z; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& u, const Vec3& v) {
  return {u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
}

inline Vec3 normalized(const Vec3& v) { return v * (1.0 / v.norm()); }

/// 3x3 matrix. Element (r, c) is stored row-major; when used as a frame the
/// columns are the basis axes.
struct Mat3 {
  std::array<double, 9> a{};

  constexpr double operator()(int r, int c) const { return a[r * 3 + c]; }
  constexpr double& operator()(int r, int c) { return a[r * 3 + c]; }

  static constexpr Mat3 identity() { return diag(1.0, 1.0, 1.0); }
  static constexpr Mat3 zero() { return Mat3{}; }
  static constexpr Mat3 diag(double d0, double d1, double d2) {
    Mat3 m;
    m(0, 0) = d0; m(1, 1) = d1; m(2, 2) = d2;
    return m;
  }
  static constexpr Mat3 from_cols(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      m(r, 0) = c0[r]; m(r, 1) = c1[r]; m(r, 2) = c2[r];
    }
    return m;
  }
  static constexpr Mat3 outer(const Vec3& u, const Vec3& v) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = u[r] * v[c];
    return m;
  }

  constexpr Vec3 col(int c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }
  constexpr Vec3 row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }
  constexpr void set_col(int c, const Vec3& v) {
    for (int r = 0; r < 3; ++r) (*this)(r, c) = v[r];
  }

  constexpr Mat3 transposed() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(c, r) = (*this)(r, c);
    return t;
  }
  constexpr double trace() const { return a[0] + a[4] + a[8]; }
  constexpr double det() const {
    const auto& m = *this;
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
           m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
  }
  double frobenius() const {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
  }
  bool finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }

  constexpr Mat3& operator+=(const Mat3& o) {
    for (int i = 0; i < 9; ++i) a[i] += o.a[i];
    return *this;
  }
  constexpr Mat3& operator-=(const Mat3& o) {
    for (int i = 0; i < 9; ++i) a[i] -= o.a[i];
    return *this;
  }
  constexpr Mat3& operator*=(double s) {
    for (double& v : a) v *= s;
    return *this;
  }

  friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

constexpr Mat3 operator+(Mat3 a, const Mat3& b) { return a += b; }
constexpr Mat3 operator-(Mat3 a, const Mat3& b) { return a -= b; }
constexpr Mat3 operator*(Mat3 a, double s) { return a *= s; }
constexpr Mat3 operator*(double s, Mat3 a) { return a *= s; }

constexpr Vec3 operator*(const Mat3& m, const Vec3& v) {
  return {m(0, 0) * v.x + m(0, 1) * v.y + m(0, 2) * v.z,
          m(1, 0) * v.x + m(1, 1) * v.y + m(1, 2) * v.z,
          m(2, 0) * v.x + m(2, 1) * v.y + m(2, 2) * v.z};
}

constexpr Mat3 operator*(const Mat3& p, const Mat3& q) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = p(r, 0) * q(0, c) + p(r, 1) * q(1, c) + p(r, 2) * q(2, c);
  return m;
}

/// Row vector times matrix: the coordinates of v in the basis given by the
/// columns of m (when m is orthonormal).
constexpr Vec3 row_times(const Vec3& v, const Mat3& m) { return m.transposed() * v; }

/// Eigendecomposition of a symmetric 3x3 matrix. Eigenvalues descend;
/// `vectors.col(i)` pairs with `values[i]`.
struct SymEig3 {
  std::array<double, 3> values{};
  Mat3 vectors;
};

/// Closed-form (Cardano) solve, falling back to cyclic Jacobi when two
/// eigenvalues are closer than 1e-6 * ||a||. Eigenvectors are sign-canonical
/// (first component with |c| > 1e-12 positive); degenerate eigenspaces are
/// resolved by projecting e_x, then e_y, then e_z into the eigenspace.
/// Throws NonSymmetric (asymmetry > 1e-9) or NonFinite.
SymEig3 eig_sym3(const Mat3& a);

/// Cyclic Jacobi sweeps until off-diagonal mass falls below `tol` * ||a||.
/// Exposed for use as an independent oracle; does not canonicalize.
SymEig3 eig_sym3_jacobi(const Mat3& a, double tol = 1e-15);

enum class RotationMode { full_so3, z_axis };

/// Deterministic rotation for a seed. full_so3 draws a uniform unit
/// quaternion; z_axis draws an angle uniformly from [0, 2pi).
Mat3 random_rotation(std::uint64_t seed, RotationMode mode);

/// Geodesic angle of a rotation in degrees, in [0, 180]. Throws NotRotation
/// when r is not orthonormal with det +1 within 1e-9.
double rotation_angle_deg(const Mat3& r);

/// Orthonormality and det check within `tol`.
bool is_rotation(const Mat3& r, double tol = 1e-9);

}  // namespace riframe
