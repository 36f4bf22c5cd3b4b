#include "riframe/descriptors.hpp"

#include "riframe/cloud_io.hpp"
#include "riframe/error.hpp"

namespace riframe {

namespace {

void fill_row(std::span<const Vec3> points, const NeighborIndex& nbrs, std::span<const Frame> frames, std::size_t q,
              double* out) {
  const int i = nbrs.query[q];
  const auto row = nbrs.row(q);
  for (int j = 0; j < nbrs.k; ++j) {
    const Vec3 d = row_times(points[row[j]] - points[i], frames[q].basis);
    out[3 * j + 0] = d.x;
    out[3 * j + 1] = d.y;
    out[3 * j + 2] = d.z;
  }
}

void check_frames(const NeighborIndex& nbrs, std::span<const Frame> frames) {
  if (frames.size() != nbrs.num_queries())
    throw Error(ErrorCode::ShapeMismatch, "frames (" + std::to_string(frames.size()) + ") vs queries (" +
                                              std::to_string(nbrs.num_queries()) + ")");
}

}  // namespace

std::vector<double> local_descriptors_serial(std::span<const Vec3> points, const NeighborIndex& nbrs,
                                             std::span<const Frame> frames) {
  check_frames(nbrs, frames);
  const std::size_t stride = static_cast<std::size_t>(nbrs.k) * 3;
  std::vector<double> out(nbrs.num_queries() * stride);
  for (std::size_t q = 0; q < nbrs.num_queries(); ++q) fill_row(points, nbrs, frames, q, out.data() + q * stride);
  return out;
}

std::vector<double> local_descriptors(std::span<const Vec3> points, const NeighborIndex& nbrs,
                                      std::span<const Frame> frames) {
  check_frames(nbrs, frames);
  const std::size_t stride = static_cast<std::size_t>(nbrs.k) * 3;
  std::vector<double> out(nbrs.num_queries() * stride);
  const long nq = static_cast<long>(nbrs.num_queries());
#pragma omp parallel for schedule(static)
  for (long q = 0; q < nq; ++q) fill_row(points, nbrs, frames, q, out.data() + q * stride);
  return out;
}

std::vector<double> global_descriptors(std::span<const Vec3> points, const Frame& g) {
  std::vector<double> out;
  out.reserve(points.size() * 3);
  for (const auto& p : points) {
    const Vec3 c = row_times(p - g.origin, g.basis);
    out.insert(out.end(), {c.x, c.y, c.z});
  }
  return out;
}

DescriptorSet extract_descriptors(const PointCloud& pc, int k, const FrameOptions& opt) {
  pc.validate();
  DescriptorSet d;
  d.n = static_cast<int>(pc.size());
  d.k = k;
  d.global_frame = grf(pc.points, opt);
  const NeighborIndex nbrs = knn(pc, k);
  d.frames = compute_lrfs(pc.points, nbrs, d.global_frame, opt, &d.fallback_frames);
  d.local = local_descriptors(pc.points, nbrs, d.frames);
  d.global = global_descriptors(pc.points, d.global_frame);
  return d;
}

std::vector<std::uint8_t> encode_descriptors(const DescriptorSet& d) {
  std::vector<std::uint8_t> out;
  out.reserve(21 + (d.local.size() + d.global.size()) * 4);
  out.insert(out.end(), {'R', 'I', 'D', 'S'});
  le::put_u8(out, kDescriptorFormatVersion);
  le::put_u64(out, static_cast<std::uint64_t>(d.n));
  le::put_u64(out, static_cast<std::uint64_t>(d.k));
  for (double v : d.local) le::put_f32(out, static_cast<float>(v));
  for (double v : d.global) le::put_f32(out, static_cast<float>(v));
  return out;
}

DescriptorSet decode_descriptors(const std::vector<std::uint8_t>& bytes) {
  le::Reader r(bytes);
  r.expect_magic("RIDS");
  const auto version = r.u8();
  if (version != kDescriptorFormatVersion)
    throw Error(ErrorCode::ParseError, "unsupported RIDS version " + std::to_string(version));
  DescriptorSet d;
  const auto n = r.u64();
  const auto k = r.u64();
  const std::uint64_t values = n * k * 3 + n * 3;
  if (values > r.remaining() / 4) r.need(values * 4);
  d.n = static_cast<int>(n);
  d.k = static_cast<int>(k);
  d.local.resize(n * k * 3);
  d.global.resize(n * 3);
  for (auto& v : d.local) v = r.f32();
  for (auto& v : d.global) v = r.f32();
  if (r.remaining() != 0) throw Error(ErrorCode::ParseError, "trailing bytes after RIDS body");
  return d;
}

void write_descriptors(const DescriptorSet& d, const std::filesystem::path& path) {
  write_file_bytes(path, encode_descriptors(d));
}

}  // namespace riframe
