#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "riframe/cloud.hpp"
#include "riframe/frames.hpp"

namespace riframe {

/// Rotation-invariant inputs for one cloud.
///   local:  n * k * 3, row (i, j) = (p_j - p_i)^T M_i
///   global: n * 3,     row i      = (p_i - p_m)^T M_g
struct DescriptorSet {
  int n = 0;
  int k = 0;
  std::vector<double> local;
  std::vector<double> global;
  std::vector<Frame> frames;
  Frame global_frame;
  int fallback_frames = 0;
};

std::vector<double> local_descriptors_serial(std::span<const Vec3> points, const NeighborIndex& nbrs,
                                             std::span<const Frame> frames);
/// OpenMP version, identical output.
std::vector<double> local_descriptors(std::span<const Vec3> points, const NeighborIndex& nbrs,
                                      std::span<const Frame> frames);

std::vector<double> global_descriptors(std::span<const Vec3> points, const Frame& g);

/// Full extraction for every point of the cloud with neighborhood size k.
DescriptorSet extract_descriptors(const PointCloud& pc, int k, const FrameOptions& opt = {});

// Binary layout (little-endian):
//   "RIDS" | u8 version (1) | u64 n | u64 k | n*k*3 f32 local | n*3 f32 global
inline constexpr std::uint8_t kDescriptorFormatVersion = 1;

std::vector<std::uint8_t> encode_descriptors(const DescriptorSet& d);
/// Restores n, k, local and global (as f32-rounded doubles); frames are not stored.
DescriptorSet decode_descriptors(const std::vector<std::uint8_t>& bytes);
void write_descriptors(const DescriptorSet& d, const std::filesystem::path& path);

}  // namespace riframe
