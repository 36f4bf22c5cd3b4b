#include "riframe/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "riframe/error.hpp"

namespace riframe {

namespace {

[[noreturn]] void fail(const std::string& m) { throw Error(ErrorCode::ConfigError, m); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) fail(key + ": not a number: '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(key + ": expected true/false, got '" + v + "'");
}

template <class N>
std::vector<N> parse_list(const std::string& key, const std::string& v) {
  std::vector<N> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<N>(key, trim(item)));
  if (out.empty()) fail(key + ": empty list");
  return out;
}

template <class N>
std::string join(const std::vector<N>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += nlohmann::json(v[i]).dump();
  }
  return out;
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<nlohmann::json(const TrainConfig&)> get;
};

#define FIELD_NUM(key, type, expr)                                                                   \
  {key, Field{[](TrainConfig& c, const std::string& v) { expr = parse_number<type>(key, v); },       \
              [](const TrainConfig& c) { return nlohmann::json(expr); }}}
#define FIELD_BOOL(key, expr)                                                                        \
  {key, Field{[](TrainConfig& c, const std::string& v) { expr = parse_bool(key, v); },               \
              [](const TrainConfig& c) { return nlohmann::json(static_cast<bool>(expr)); }}}
#define FIELD_LIST(key, type, expr)                                                                  \
  {key, Field{[](TrainConfig& c, const std::string& v) { expr = parse_list<type>(key, v); },         \
              [](const TrainConfig& c) { return nlohmann::json(join(expr)); }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      FIELD_NUM("seed", std::uint64_t, c.seed),
      FIELD_NUM("classes", int, c.classes),
      FIELD_NUM("train_per_class", int, c.train_per_class),
      FIELD_NUM("val_per_class", int, c.val_per_class),
      FIELD_NUM("test_per_class", int, c.test_per_class),
      FIELD_NUM("raw_points", int, c.raw_points),
      FIELD_NUM("shape_jitter", double, c.shape_jitter),
      FIELD_NUM("surface_noise", double, c.surface_noise),
      FIELD_NUM("batch_train", int, c.batch_train),
      FIELD_NUM("batch_eval", int, c.batch_eval),
      FIELD_NUM("epochs", int, c.epochs),
      FIELD_NUM("lr", double, c.lr),
      FIELD_NUM("momentum", double, c.momentum),
      FIELD_NUM("weight_decay", double, c.weight_decay),
      FIELD_NUM("clip_norm", double, c.clip_norm),
      FIELD_BOOL("augment", c.augment),
      {"protocol", Field{[](TrainConfig& c, const std::string& v) { c.protocol = protocol_from_name(v); },
                         [](const TrainConfig& c) { return nlohmann::json(std::string(protocol_name(c.protocol))); }}},
      FIELD_NUM("threads", int, c.threads),
      FIELD_LIST("noise_sigmas", double, c.noise_sigmas),
      FIELD_LIST("outlier_counts", int, c.outlier_counts),
      FIELD_NUM("n_points", int, c.model.n_points),
      FIELD_NUM("k_lrf", int, c.model.k_lrf),
      FIELD_NUM("k1", int, c.model.k1),
      FIELD_NUM("n1", int, c.model.n1),
      FIELD_NUM("n2", int, c.model.n2),
      FIELD_NUM("k2", int, c.model.k2),
      FIELD_LIST("widths1", int, c.model.widths1),
      FIELD_LIST("widths2", int, c.model.widths2),
      FIELD_NUM("d", int, c.model.d),
      FIELD_NUM("proj", int, c.model.proj),
      FIELD_NUM("head", int, c.model.head),
      FIELD_NUM("blocks", int, c.model.blocks),
      FIELD_NUM("t_alpha", double, c.model.t_alpha),
      FIELD_NUM("t", double, c.model.t),
      FIELD_NUM("lambda", double, c.model.lambda),
      {"offset_norm",
       Field{[](TrainConfig& c, const std::string& v) {
               if (v == "pct") c.model.offset_norm = net::OffsetNorm::pct;
               else if (v == "plain") c.model.offset_norm = net::OffsetNorm::plain;
               else fail("offset_norm: expected pct or plain, got '" + v + "'");
             },
             [](const TrainConfig& c) {
               return nlohmann::json(c.model.offset_norm == net::OffsetNorm::pct ? "pct" : "plain");
             }}},
      {"strategy", Field{[](TrainConfig& c, const std::string& v) {
                           const auto s = strategy_from_name(v);
                           if (!s) fail("strategy: expected a, b, c or d, got '" + v + "'");
                           c.model.frames.strategy = *s;
                         },
                         [](const TrainConfig& c) {
                           return nlohmann::json(std::string(strategy_name(c.model.frames.strategy)));
                         }}},
      FIELD_BOOL("disambiguate", c.model.frames.disambiguate),
      FIELD_BOOL("regularize_equal_weights", c.model.frames.regularize_equal_weights),
      FIELD_BOOL("use_e_sa", c.model.use_e_sa),
      FIELD_BOOL("use_e_ca", c.model.use_e_ca),
      FIELD_BOOL("sa_on_global", c.model.sa_on_global),
      FIELD_BOOL("sequential_attn", c.model.sequential_attn),
      FIELD_BOOL("reg_local", c.model.reg_local),
      FIELD_BOOL("reg_global", c.model.reg_global),
  };
  return table;
}

#undef FIELD_NUM
#undef FIELD_BOOL
#undef FIELD_LIST

}  // namespace

std::string_view protocol_name(Protocol p) {
  switch (p) {
    case Protocol::zz: return "zz";
    case Protocol::zso3: return "zso3";
    case Protocol::so3so3: return "so3so3";
  }
  return "?";
}

Protocol protocol_from_name(std::string_view name) {
  if (name == "zz") return Protocol::zz;
  if (name == "zso3") return Protocol::zso3;
  if (name == "so3so3") return Protocol::so3so3;
  fail("protocol: expected zz, zso3 or so3so3, got '" + std::string(name) + "'");
}

RotationMode train_rotation(Protocol p) { return p == Protocol::so3so3 ? RotationMode::full_so3 : RotationMode::z_axis; }
RotationMode test_rotation(Protocol p) { return p == Protocol::zz ? RotationMode::z_axis : RotationMode::full_so3; }

void TrainConfig::validate() const {
  if (classes < 2 || classes > kNumShapeFamilies)
    fail("classes must be in [2, " + std::to_string(kNumShapeFamilies) + "]");
  if (train_per_class < 1 || val_per_class < 0 || test_per_class < 1) fail("split sizes must be positive");
  if (raw_points < model.n_points) fail("raw_points must be >= n_points");
  if (!(shape_jitter >= 0.0 && shape_jitter < 1.0)) fail("shape_jitter must be in [0, 1)");
  if (!(surface_noise >= 0.0)) fail("surface_noise must be >= 0");
  if (batch_train < 1 || batch_eval < 1 || epochs < 1 || threads < 1) fail("batch sizes, epochs, threads must be >= 1");
  if (!(lr > 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0) || !(clip_norm > 0.0))
    fail("bad optimizer settings");
  for (double s : noise_sigmas)
    if (!(s >= 0.0)) fail("noise_sigmas must be >= 0");
  for (int o : outlier_counts)
    if (o < 0) fail("outlier_counts must be >= 0");
  if (model.classes != classes) fail("internal: model classes out of sync");
  try {
    model.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) fail("unknown key '" + key + "'");
  it->second.set(cfg, value);
  if (key == "classes") cfg.model.classes = cfg.classes;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const Error& e) {
      fail("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, f] : fields()) j[k] = f.get(cfg);
  return j;
}

std::string format_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : fields()) {
    const auto v = f.get(cfg);
    out += k + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const TrainConfig& cfg) { return fnv1a_hex(to_json(cfg).dump()); }

}  // namespace riframe
