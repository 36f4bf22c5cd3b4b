#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riframe/cloud.hpp"

namespace riframe {

// Binary layout (little-endian):
//   "RIPC" | u8 version (1) | u8 flags (bit 0: label present) | u64 count |
//   count * 3 f32 | [u16 label]
inline constexpr std::uint8_t kCloudFormatVersion = 1;

enum class CloudFormat { ascii, binary };

/// Format by extension: ".ripc" is binary, anything else ASCII.
CloudFormat format_for(const std::filesystem::path& path);

PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const PointCloud& pc, const std::filesystem::path& path);

PointCloud parse_ascii_cloud(const std::string& text);
std::string format_ascii_cloud(const PointCloud& pc);
PointCloud decode_binary_cloud(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_binary_cloud(const PointCloud& pc);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

struct ManifestEntry {
  std::string path;
  int label = 0;
  std::uint64_t seed = 0;
};

/// JSON Lines, one {"path", "label", "seed"} object per line.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

// Little-endian helpers shared by the other binary formats.
namespace le {
void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v);
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);

/// Bounds-checked reader; throws TruncatedFile on overrun.
class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  void expect_magic(const char (&magic)[5]);
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const;

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};
}  // namespace le

}  // namespace riframe
