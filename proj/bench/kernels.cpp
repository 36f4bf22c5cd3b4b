// Serial vs OpenMP kernels on a 4096 point torus.
#include <benchmark/benchmark.h>

#include <numeric>

#include "riframe/cloud.hpp"
#include "riframe/descriptors.hpp"
#include "riframe/frames.hpp"

using namespace riframe;

namespace {

const PointCloud& cloud() {
  static const PointCloud pc = generate_shape(default_shape_spec(ShapeFamily::torus, 4096), 1);
  return pc;
}

std::vector<int> all_indices() {
  std::vector<int> q(cloud().size());
  std::iota(q.begin(), q.end(), 0);
  return q;
}

void BM_knn_serial(benchmark::State& st) {
  const auto q = all_indices();
  for (auto _ : st) benchmark::DoNotOptimize(knn_query_serial(cloud().points, q, 32));
}
void BM_knn_omp(benchmark::State& st) {
  const auto q = all_indices();
  for (auto _ : st) benchmark::DoNotOptimize(knn_query(cloud().points, q, 32));
}

void BM_fps_serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(farthest_point_indices(cloud().points, 512, 3));
}
void BM_fps_omp(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(farthest_point_indices_parallel(cloud().points, 512, 3));
}

void BM_lrf_serial(benchmark::State& st) {
  const auto nb = knn(cloud(), 32);
  const Frame g = grf(cloud().points);
  for (auto _ : st) benchmark::DoNotOptimize(compute_lrfs_serial(cloud().points, nb, g, {}, nullptr));
}
void BM_lrf_omp(benchmark::State& st) {
  const auto nb = knn(cloud(), 32);
  const Frame g = grf(cloud().points);
  for (auto _ : st) benchmark::DoNotOptimize(compute_lrfs(cloud().points, nb, g, {}, nullptr));
}

void BM_desc_serial(benchmark::State& st) {
  const auto nb = knn(cloud(), 32);
  const auto fr = compute_lrfs(cloud().points, nb, grf(cloud().points));
  for (auto _ : st) benchmark::DoNotOptimize(local_descriptors_serial(cloud().points, nb, fr));
}
void BM_desc_omp(benchmark::State& st) {
  const auto nb = knn(cloud(), 32);
  const auto fr = compute_lrfs(cloud().points, nb, grf(cloud().points));
  for (auto _ : st) benchmark::DoNotOptimize(local_descriptors(cloud().points, nb, fr));
}

void BM_angles_serial(benchmark::State& st) {
  const auto nb = knn(cloud(), 32);
  auto fr = compute_lrfs(cloud().points, nb, grf(cloud().points));
  fr.resize(512);
  for (auto _ : st) benchmark::DoNotOptimize(pairwise_angles_serial(fr));
}
void BM_angles_omp(benchmark::State& st) {
  const auto nb = knn(cloud(), 32);
  auto fr = compute_lrfs(cloud().points, nb, grf(cloud().points));
  fr.resize(512);
  for (auto _ : st) benchmark::DoNotOptimize(pairwise_angles(fr));
}

}  // namespace

BENCHMARK(BM_knn_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_fps_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fps_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_lrf_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lrf_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_desc_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_desc_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_angles_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_angles_omp)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
