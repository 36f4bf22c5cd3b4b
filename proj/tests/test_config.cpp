#include <doctest.h>

#include <set>

#include "riframe/config.hpp"
#include "riframe/error.hpp"

using namespace riframe;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::BadSpec;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults are the desk preset") {
  const TrainConfig c;
  CHECK(c.model.n_points == 1024);
  CHECK(c.batch_train == 32);
  CHECK(c.batch_eval == 16);
  CHECK(c.epochs == 60);
  CHECK(c.model.t_alpha == 15.0);
  CHECK(c.model.t == 0.017);
  CHECK(c.classes * c.train_per_class == 2400);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("parse sets values, skips comments and blank lines") {
  const auto c = parse_config(
      "# comment\n"
      "\n"
      "  epochs = 7   # trailing\n"
      "lr=0.5\n"
      "augment = true\n"
      "protocol = so3so3\n"
      "widths1 = 4, 8\n"
      "noise_sigmas = 0,0.5\n"
      "strategy = b\n"
      "offset_norm = plain\n"
      "disambiguate = off\n");
  CHECK(c.epochs == 7);
  CHECK(c.lr == 0.5);
  CHECK(c.augment);
  CHECK(c.protocol == Protocol::so3so3);
  CHECK(c.model.widths1 == std::vector<int>{4, 8});
  CHECK(c.noise_sigmas == std::vector<double>{0.0, 0.5});
  CHECK(c.model.frames.strategy == DisambiguationStrategy::b_negate_random);
  CHECK(c.model.offset_norm == net::OffsetNorm::plain);
  CHECK_FALSE(c.model.frames.disambiguate);
}

TEST_CASE("unknown keys and malformed lines are config errors") {
  CHECK(code_of([] { parse_config("epochz = 3\n"); }) == ErrorCode::ConfigError);
  CHECK(message_of([] { parse_config("seed = 1\nepochz = 3\n"); }).find("line 2") != std::string::npos);
  CHECK(message_of([] { parse_config("epochz = 3\n"); }).find("epochz") != std::string::npos);
  CHECK(code_of([] { parse_config("epochs 3\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("epochs = three\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("epochs = 3x\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("augment = maybe\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("protocol = zy\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("widths1 = \n"); }) == ErrorCode::ConfigError);
}

TEST_CASE("validation rejects non-positive and inconsistent values") {
  CHECK(code_of([] { parse_config("epochs = 0\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("lr = -1\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("classes = 9\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("raw_points = 512\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("d = 15\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("k1 = 64\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("noise_sigmas = 0,-1\n"); }) == ErrorCode::ConfigError);
}

TEST_CASE("classes keeps the model head in sync") {
  const auto c = parse_config("classes = 4\n");
  CHECK(c.classes == 4);
  CHECK(c.model.classes == 4);
}

TEST_CASE("format_config round trips through parse_config") {
  TrainConfig c;
  c.epochs = 3;
  c.protocol = Protocol::zso3;
  c.model.widths2 = {8, 24};
  c.noise_sigmas = {0.0, 0.125};
  c.model.use_e_ca = false;
  const auto back = parse_config(format_config(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("every key appears in the json form") {
  const auto j = to_json(TrainConfig{});
  const auto keys = config_keys();
  CHECK(j.size() == keys.size());
  for (const auto& k : keys) CHECK(j.contains(k));
  CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
}

TEST_CASE("config hash is 16 hex digits and sensitive to every key") {
  const TrainConfig base;
  const auto h = config_hash(base);
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(config_hash(base) == h);
  TrainConfig other = base;
  other.seed = 2;
  CHECK(config_hash(other) != h);
  other = base;
  other.model.lambda = 0.5;
  CHECK(config_hash(other) != h);
  other = base;
  other.model.sequential_attn = true;
  CHECK(config_hash(other) != h);
}

TEST_CASE("fnv1a 64 reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("protocol rotations") {
  CHECK(protocol_from_name("zz") == Protocol::zz);
  CHECK(protocol_name(Protocol::zso3) == "zso3");
  CHECK(train_rotation(Protocol::zz) == RotationMode::z_axis);
  CHECK(train_rotation(Protocol::zso3) == RotationMode::z_axis);
  CHECK(train_rotation(Protocol::so3so3) == RotationMode::full_so3);
  CHECK(test_rotation(Protocol::zz) == RotationMode::z_axis);
  CHECK(test_rotation(Protocol::zso3) == RotationMode::full_so3);
  CHECK(test_rotation(Protocol::so3so3) == RotationMode::full_so3);
}
