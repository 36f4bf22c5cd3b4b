#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "riframe/cloud.hpp"
#include "riframe/error.hpp"

using namespace riframe;

namespace {

PointCloud random_cloud(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  PointCloud pc;
  for (int i = 0; i < n; ++i) pc.points.push_back({u(rng), u(rng), u(rng)});
  return pc;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("fps on colinear points picks the farthest") {
  const std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {9, 0, 0}};
  const auto idx = farthest_point_indices_from(pts, 2, 0);
  CHECK(idx == std::vector<int>{0, 3});
  CHECK(farthest_point_indices_from(pts, 3, 0) == std::vector<int>{0, 3, 2});
}

TEST_CASE("fps exhaustion yields a permutation; ties go to the lowest index") {
  const auto pc = random_cloud(64, 2);
  auto idx = farthest_point_indices(pc.points, 64, 9);
  std::sort(idx.begin(), idx.end());
  std::vector<int> all(64);
  std::iota(all.begin(), all.end(), 0);
  CHECK(idx == all);

  // Symmetric square: after corner 0, corner 2 is farthest; 1 and 3 then tie.
  const std::vector<Vec3> sq = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  CHECK(farthest_point_indices_from(sq, 3, 0) == std::vector<int>{0, 2, 1});
}

TEST_CASE("fps is deterministic, seeds its start and errors on oversize") {
  const auto pc = random_cloud(200, 4);
  CHECK(farthest_point_indices(pc.points, 50, 1) == farthest_point_indices(pc.points, 50, 1));
  std::set<int> starts;
  for (std::uint64_t s = 0; s < 20; ++s) starts.insert(farthest_point_indices(pc.points, 1, s)[0]);
  CHECK(starts.size() > 1);
  CHECK(code_of([&] { farthest_point_indices(pc.points, 201, 0); }) == ErrorCode::TooFewPoints);
  CHECK(farthest_point_sample(pc, 10, 3).seed == 3u);
}

TEST_CASE("parallel fps matches the serial reference") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto pc = random_cloud(1024, 100 + s);
    CHECK(farthest_point_indices_parallel(pc.points, 256, s) == farthest_point_indices(pc.points, 256, s));
  }
}

TEST_CASE("fps spreads points farther than random sampling") {
  int wins = 0;
  for (int t = 0; t < 100; ++t) {
    const auto pc = random_cloud(1024, 500 + t);
    const auto f = farthest_point_sample(pc, 512, t);
    const auto r = random_sample(pc, 512, t);
    if (oracle::min_pairwise_distance(f.points) >= oracle::min_pairwise_distance(r.points)) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("fps selects the same point set after permuting the input") {
  const auto pc = random_cloud(300, 12);
  std::vector<int> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  const auto shuffled = select(pc, perm);
  const int start = 17;
  int start_in_shuffled = static_cast<int>(std::find(perm.begin(), perm.end(), start) - perm.begin());
  const auto a = farthest_point_indices_from(pc.points, 60, start);
  const auto b = farthest_point_indices_from(shuffled.points, 60, start_in_shuffled);
  std::set<int> sa(a.begin(), a.end()), sb;
  for (int i : b) sb.insert(perm[i]);
  CHECK(sa == sb);
}

TEST_CASE("random_sample contracts") {
  const auto pc = random_cloud(40, 1);
  auto idx = random_sample_indices(40, 40, 3);
  std::sort(idx.begin(), idx.end());
  CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  CHECK(idx.size() == 40);
  const auto one = random_sample(pc, 1, 5);
  REQUIRE(one.size() == 1);
  CHECK(std::find(pc.points.begin(), pc.points.end(), one.points[0]) != pc.points.end());
  CHECK(random_sample(pc, 10, 8).points == random_sample(pc, 10, 8).points);
  CHECK(code_of([&] { random_sample(pc, 41, 0); }) == ErrorCode::TooFewPoints);
}

TEST_CASE("knn on three colinear points") {
  PointCloud pc;
  pc.points = {{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  const auto nb = knn(pc, 1);
  CHECK(nb.row(0)[0] == 1);
  CHECK(nb.row(1)[0] == 0);
  CHECK(nb.row(2)[0] == 1);
  CHECK(nb.d_max[2] == 2.0);
  const auto all = knn(pc, 2);
  CHECK(std::vector<int>(all.row(0).begin(), all.row(0).end()) == std::vector<int>{1, 2});
  CHECK(code_of([&] { knn(pc, 3); }) == ErrorCode::KTooLarge);
  CHECK(code_of([&] { knn(pc, 0); }) == ErrorCode::KTooLarge);
}

TEST_CASE("knn matches the brute-force oracle exactly") {
  const auto pc = random_cloud(1024, 77);
  const auto nb = knn(pc, 32);
  const auto ref = oracle::brute_knn(pc.points, 32);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    REQUIRE(std::vector<int>(nb.row(i).begin(), nb.row(i).end()) == ref[i]);
    const auto d = nb.row_distances(i);
    CHECK(std::is_sorted(d.begin(), d.end()));
    CHECK(nb.d_max[i] == d[31]);
  }
  std::vector<int> all(1024);
  std::iota(all.begin(), all.end(), 0);
  const auto serial = knn_query_serial(pc.points, all, 32);
  CHECK(serial.indices == nb.indices);
  CHECK(serial.distances == nb.distances);
}

TEST_CASE("knn with include_self puts the query first") {
  const auto pc = random_cloud(50, 3);
  const std::vector<int> q = {4, 9};
  const auto nb = knn_query(pc.points, q, 5, true);
  CHECK(nb.row(0)[0] == 4);
  CHECK(nb.row(1)[0] == 9);
  CHECK(nb.row_distances(0)[0] == 0.0);
}

TEST_CASE("knn index sets survive global rotation") {
  const auto pc = random_cloud(400, 21);
  const auto base = knn(pc, 16);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto rot = apply_rotation(pc, random_rotation(s, RotationMode::full_so3));
    CHECK(knn(rot, 16).indices == base.indices);
  }
}

TEST_CASE("apply_rotation is an isometry and inverts with the transpose") {
  const auto pc = random_cloud(100, 6);
  CHECK(apply_rotation(pc, Mat3::identity()).points == pc.points);
  const Mat3 r = random_rotation(9, RotationMode::full_so3);
  const auto there = apply_rotation(pc, r);
  const auto back = apply_rotation(there, r.transposed());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    CHECK((back.points[i] - pc.points[i]).norm() < 1e-12);
    CHECK(std::abs(there.points[i].norm() - pc.points[i].norm()) < 1e-12);
  }
  CHECK(code_of([&] { apply_rotation(pc, Mat3::diag(1, 1, -1)); }) == ErrorCode::NotRotation);
}

TEST_CASE("augment contracts") {
  const auto pc = random_cloud(30, 8);
  CHECK(augment(pc, 1, {0.0, 1.0, 1.0}).points == pc.points);
  const auto doubled = augment(pc, 1, {0.0, 2.0, 2.0});
  for (int i = 0; i < 29; ++i) {
    const double d0 = (pc.points[i] - pc.points[i + 1]).norm();
    const double d1 = (doubled.points[i] - doubled.points[i + 1]).norm();
    CHECK(d1 == doctest::Approx(2.0 * d0).epsilon(1e-12));
  }
  CHECK(augment(pc, 5).points == augment(pc, 5).points);
  const auto shifted = augment(pc, 5, {0.2, 1.0, 1.0});
  const Vec3 t = shifted.points[0] - pc.points[0];
  CHECK(std::abs(t.x) <= 0.2);
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK((shifted.points[i] - pc.points[i] - t).norm() < 1e-12);
  CHECK(code_of([&] { augment(pc, 1, {0.0, 1.5, 0.67}); }) == ErrorCode::BadSpec);
}

TEST_CASE("add_noise contracts") {
  const auto pc = random_cloud(30, 8);
  CHECK(add_noise(pc, 0.0, 0, 1).points == pc.points);
  const auto out = add_noise(pc, 0.0, 5, 1);
  CHECK(out.size() == 35);
  for (std::size_t i = 30; i < 35; ++i) CHECK(out.points[i].norm() <= 1.0);

  PointCloud zeros;
  zeros.points.assign(1000000 / 3 + 1, Vec3{});
  const auto noisy = add_noise(zeros, 0.01, 0, 42);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& p : noisy.points)
    for (int c = 0; c < 3; ++c) {
      sum += p[c];
      sq += p[c] * p[c];
      ++n;
    }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(sd >= 0.0099);
  CHECK(sd <= 0.0101);
}

TEST_CASE("generated shapes satisfy their surface equations") {
  const auto sphere = generate_shape(default_shape_spec(ShapeFamily::sphere, 500), 1);
  for (const auto& p : sphere.points) CHECK(std::abs(p.norm() - 1.0) < 1e-9);
  CHECK(sphere.label == 0);

  ShapeSpec box{ShapeFamily::box, {1.0, 1.0, 1.0}, 500};
  for (const auto& p : sample_shape_raw(box, 2).points) {
    const double m = std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)});
    CHECK(m == 1.0);
  }

  ShapeSpec torus{ShapeFamily::torus, {1.0, 0.25}, 500};
  for (const auto& p : sample_shape_raw(torus, 3).points) {
    const double rho = std::hypot(p.x, p.y);
    CHECK(std::abs(std::hypot(rho - 1.0, p.z) - 0.25) < 1e-9);
  }

  for (int f = 0; f < kNumShapeFamilies; ++f) {
    const auto spec = default_shape_spec(static_cast<ShapeFamily>(f), 256);
    const auto pc = generate_shape(spec, 10 + f);
    CHECK(pc.size() == 256);
    double r = 0.0;
    for (const auto& p : pc.points) r = std::max(r, p.norm());
    CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pc.points == generate_shape(spec, 10 + f).points);
    CHECK(pc.label == f);
  }
}

TEST_CASE("shape spec validation") {
  CHECK(code_of([] { ShapeSpec{ShapeFamily::torus, {1.0}, 100}.validate(); }) == ErrorCode::BadSpec);
  CHECK(code_of([] { ShapeSpec{ShapeFamily::sphere, {-1.0}, 100}.validate(); }) == ErrorCode::BadSpec);
  CHECK(code_of([] { ShapeSpec{ShapeFamily::sphere, {1.0}, 8}.validate(); }) == ErrorCode::BadSpec);
  CHECK(family_from_name("helix") == ShapeFamily::helix);
  CHECK(!family_from_name("teapot"));
}

TEST_CASE("synthetic families are separable by a sorted-distance histogram") {
  // Nearest-centroid on a histogram of distances to the centroid.
  const int bins = 16, per_class = 20;
  auto features = [&](const PointCloud& pc) {
    Vec3 c;
    for (const auto& p : pc.points) c += p;
    c *= 1.0 / pc.size();
    std::vector<double> h(bins, 0.0);
    for (const auto& p : pc.points) h[std::min(bins - 1, static_cast<int>((p - c).norm() * bins / 1.2))] += 1.0;
    for (auto& v : h) v /= pc.size();
    return h;
  };
  std::vector<std::vector<double>> centroid(kNumShapeFamilies, std::vector<double>(bins, 0.0));
  for (int f = 0; f < kNumShapeFamilies; ++f)
    for (int i = 0; i < per_class; ++i) {
      const auto h = features(generate_shape(default_shape_spec(static_cast<ShapeFamily>(f), 512), 1000 * f + i));
      for (int b = 0; b < bins; ++b) centroid[f][b] += h[b] / per_class;
    }
  int correct = 0, total = 0;
  for (int f = 0; f < kNumShapeFamilies; ++f)
    for (int i = 0; i < per_class; ++i) {
      const auto h = features(generate_shape(default_shape_spec(static_cast<ShapeFamily>(f), 512), 777777 + 1000 * f + i));
      int best = 0;
      double best_d = INFINITY;
      for (int g = 0; g < kNumShapeFamilies; ++g) {
        double d = 0.0;
        for (int b = 0; b < bins; ++b) d += (h[b] - centroid[g][b]) * (h[b] - centroid[g][b]);
        if (d < best_d) { best_d = d; best = g; }
      }
      correct += best == f;
      ++total;
    }
  CHECK(static_cast<double>(correct) / total > 0.5);
}
