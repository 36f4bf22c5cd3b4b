#include "riframe/cloud_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "riframe/error.hpp"

namespace riframe {

namespace le {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void Reader::need(std::size_t n) const {
  if (remaining() < n)
    throw Error(ErrorCode::TruncatedFile, "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                                              ", have " + std::to_string(remaining()));
}
std::uint8_t Reader::u8() {
  need(1);
  return bytes_[pos_++];
}
std::uint16_t Reader::u16() {
  need(2);
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(bytes_[pos_++]) << (8 * i);
  return v;
}
std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}
std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}
float Reader::f32() { return std::bit_cast<float>(u32()); }

void Reader::expect_magic(const char (&magic)[5]) {
  if (remaining() < 4 || std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
    throw Error(ErrorCode::MagicMismatch, std::string("expected magic ") + magic);
  pos_ += 4;
}

}  // namespace le

CloudFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".ripc" ? CloudFormat::binary : CloudFormat::ascii;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

PointCloud parse_ascii_cloud(const std::string& text) {
  PointCloud pc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Vec3 p;
    std::string extra;
    if (!(ls >> p.x >> p.y >> p.z) || (ls >> extra))
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected 'x y z'");
    if (!p.finite()) throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": non-finite value");
    pc.points.push_back(p);
  }
  if (pc.points.empty()) throw Error(ErrorCode::ParseError, "no points found");
  return pc;
}

std::string format_ascii_cloud(const PointCloud& pc) {
  std::string out;
  char buf[96];
  for (const auto& p : pc.points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    out += buf;
  }
  return out;
}

std::vector<std::uint8_t> encode_binary_cloud(const PointCloud& pc) {
  std::vector<std::uint8_t> out;
  out.reserve(14 + pc.size() * 12 + 2);
  out.insert(out.end(), {'R', 'I', 'P', 'C'});
  le::put_u8(out, kCloudFormatVersion);
  le::put_u8(out, pc.label ? 1 : 0);
  le::put_u64(out, pc.size());
  for (const auto& p : pc.points) {
    le::put_f32(out, static_cast<float>(p.x));
    le::put_f32(out, static_cast<float>(p.y));
    le::put_f32(out, static_cast<float>(p.z));
  }
  if (pc.label) le::put_u16(out, static_cast<std::uint16_t>(*pc.label));
  return out;
}

PointCloud decode_binary_cloud(const std::vector<std::uint8_t>& bytes) {
  le::Reader r(bytes);
  r.expect_magic("RIPC");
  const auto version = r.u8();
  if (version != kCloudFormatVersion)
    throw Error(ErrorCode::ParseError, "unsupported RIPC version " + std::to_string(version));
  const auto flags = r.u8();
  const auto count = r.u64();
  if (count == 0) throw Error(ErrorCode::ParseError, "RIPC file has zero points");
  if (count > r.remaining() / 12) r.need(count * 12);
  PointCloud pc;
  pc.points.resize(count);
  for (auto& p : pc.points) {
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
  }
  if (flags & 1u) pc.label = r.u16();
  if (r.remaining() != 0) throw Error(ErrorCode::ParseError, "trailing bytes after RIPC body");
  return pc;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (format_for(path) == CloudFormat::binary) return decode_binary_cloud(bytes);
  return parse_ascii_cloud(std::string(bytes.begin(), bytes.end()));
}

void write_cloud(const PointCloud& pc, const std::filesystem::path& path) {
  pc.validate();
  if (format_for(path) == CloudFormat::binary) {
    write_file_bytes(path, encode_binary_cloud(pc));
  } else {
    const auto text = format_ascii_cloud(pc);
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::DatasetMissing, "cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("path").get<std::string>(), j.at("label").get<int>(), j.at("seed").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::string text;
  for (const auto& e : entries) {
    nlohmann::json j = {{"path", e.path}, {"label", e.label}, {"seed", e.seed}};
    text += j.dump() + "\n";
  }
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace riframe
