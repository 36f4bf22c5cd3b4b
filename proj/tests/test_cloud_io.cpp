#include <filesystem>
#include <random>

#include "doctest.h"
#include "riframe/cloud_io.hpp"
#include "riframe/error.hpp"

using namespace riframe;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "riframe_test_io";
  fs::create_directories(dir);
  return dir;
}

PointCloud f32_cloud(int n) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-1, 1);
  PointCloud pc;
  for (int i = 0; i < n; ++i) pc.points.push_back({u(rng), u(rng), u(rng)});
  return pc;
}

}  // namespace

TEST_CASE("binary round trip is bit exact, with and without label") {
  auto pc = f32_cloud(257);
  const auto path = temp_dir() / "a.ripc";
  write_cloud(pc, path);
  auto back = read_cloud(path);
  CHECK(back.points == pc.points);
  CHECK(!back.label);

  pc.label = 6;
  write_cloud(pc, path);
  back = read_cloud(path);
  CHECK(back.label == 6);
  CHECK(encode_binary_cloud(back) == read_file_bytes(path));
}

TEST_CASE("binary header layout") {
  PointCloud pc;
  pc.points = {{1, 2, 3}};
  pc.label = 2;
  const auto bytes = encode_binary_cloud(pc);
  REQUIRE(bytes.size() == 4 + 1 + 1 + 8 + 12 + 2);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "RIPC");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 1);
  CHECK(bytes[6] == 1);
  for (int i = 7; i < 14; ++i) CHECK(bytes[i] == 0);
  CHECK(bytes[14 + 12] == 2);
}

TEST_CASE("binary errors: truncation, magic, trailing bytes") {
  auto bytes = encode_binary_cloud(f32_cloud(10));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  try {
    decode_binary_cloud(truncated);
    FAIL("expected TruncatedFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedFile);
  }
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_binary_cloud(bad);
    FAIL("expected MagicMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MagicMismatch);
  }
  auto huge = bytes;
  huge[13] = 0x7f;  // absurd count
  try {
    decode_binary_cloud(huge);
    FAIL("expected TruncatedFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedFile);
  }
}

TEST_CASE("ascii parsing and round trip") {
  const auto pc = parse_ascii_cloud("# header\n1.0 2.0 3.0\n\n  -4 5e-1 6\n");
  REQUIRE(pc.size() == 2);
  CHECK(pc.points[0] == Vec3{1, 2, 3});
  CHECK(pc.points[1] == Vec3{-4, 0.5, 6});

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  PointCloud cloud;
  for (int i = 0; i < 100; ++i) cloud.points.push_back({g(rng), g(rng), g(rng)});
  const auto path = temp_dir() / "b.xyz";
  write_cloud(cloud, path);
  const auto back = read_cloud(path);
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) CHECK((back.points[i] - cloud.points[i]).norm() < 1e-9);
}

TEST_CASE("ascii errors carry the line number") {
  try {
    parse_ascii_cloud("1 2 3\n4 5\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_ascii_cloud("1 2 3 4\n"), Error);
  CHECK_THROWS_AS(read_cloud(temp_dir() / "missing.xyz"), Error);
}

TEST_CASE("manifest round trip") {
  const std::vector<ManifestEntry> entries = {{"train/a.ripc", 3, 99}, {"train/b.ripc", 0, 18446744073709551615ull}};
  const auto path = temp_dir() / "m.jsonl";
  write_manifest(entries, path);
  const auto back = read_manifest(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].seed == 18446744073709551615ull);
  CHECK(back[0].path == "train/a.ripc");
  CHECK(back[0].label == 3);
}
