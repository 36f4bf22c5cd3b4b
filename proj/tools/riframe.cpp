// riframe {gen-data|extract|verify|train|eval|bench}
//
// Exit codes: 0 ok, 1 usage, 2 verification failure, 3 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "riframe/config.hpp"
#include "riframe/error.hpp"
#include "riframe/harness.hpp"
#include "riframe/verify.hpp"

namespace fs = std::filesystem;
using namespace riframe;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> set;
  // Ablations.
  bool no_e_sa = false, no_e_ca = false, sa_on_global = false, sequential_attn = false;
  bool no_reg_local = false, no_reg_global = false;
};

void add_common(CLI::App* cmd, Common& c, bool ablations) {
  cmd->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--set", c.set, "override one config key, key=value")->take_all();
  if (!ablations) return;
  cmd->add_flag("--no-e-sa", c.no_e_sa, "drop the angle term from self-attention");
  cmd->add_flag("--no-e-ca", c.no_e_ca, "drop the angle term from cross-attention");
  cmd->add_flag("--sa-on-global", c.sa_on_global, "self-attention on the global branch");
  cmd->add_flag("--sequential-attn", c.sequential_attn, "self then cross attention instead of fused");
  cmd->add_flag("--no-reg-local", c.no_reg_local, "drop the local registration loss");
  cmd->add_flag("--no-reg-global", c.no_reg_global, "drop the global registration loss");
}

TrainConfig resolve(const Common& c) {
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : load_config(c.config);
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  auto& m = cfg.model;
  if (c.no_e_sa) m.use_e_sa = false;
  if (c.no_e_ca) m.use_e_ca = false;
  if (c.sa_on_global) m.sa_on_global = true;
  if (c.sequential_attn) m.sequential_attn = true;
  if (c.no_reg_local) m.reg_local = false;
  if (c.no_reg_global) m.reg_global = false;
  cfg.validate();
  return cfg;
}

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation-invariant point cloud classification toolkit"};
  app.require_subcommand(1);

  Common c;

  auto* gen = app.add_subcommand("gen-data", "write the synthetic dataset");
  add_common(gen, c, false);
  gen->add_option("--out", c.out, "dataset directory")->required();

  std::string input;
  auto* ext = app.add_subcommand("extract", "write the descriptor file of one cloud");
  add_common(ext, c, false);
  ext->add_option("input", input, "point cloud (.ripc or ASCII)")->required();
  ext->add_option("--out", c.out, "descriptor file")->required();

  std::string level = "fast";
  bool no_disambig = false;
  auto* ver = app.add_subcommand("verify", "run the property suites");
  add_common(ver, c, true);
  ver->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  ver->add_flag("--no-disambig", no_disambig, "disable sign disambiguation of the frames");
  ver->add_option("--out", c.out, "report directory");

  std::string data;
  auto* tr = app.add_subcommand("train", "train a classifier");
  add_common(tr, c, true);
  tr->add_option("--data", data, "dataset directory")->required();
  tr->add_option("--out", c.out, "run directory")->required();

  std::string checkpoint;
  std::vector<std::string> protocols;
  bool sweeps = false;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, c, true);
  ev->add_option("--checkpoint", checkpoint, "model.rimw")->required();
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--protocol", protocols, "zz, zso3, so3so3 (default all)")
      ->check(CLI::IsMember({"zz", "zso3", "so3so3"}));
  ev->add_flag("--sweeps", sweeps, "noise and outlier curves for the first protocol");
  ev->add_option("--out", c.out, "report directory")->required();

  int repeats = 15;
  auto* be = app.add_subcommand("bench", "time the geometric kernels");
  add_common(be, c, false);
  be->add_option("--repeats", repeats, "timed repeats per kernel")->check(CLI::PositiveNumber);
  be->add_option("--out", c.out, "report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const TrainConfig cfg = resolve(c);
    if (*gen) {
      std::cout << harness::gen_data(cfg, c.out).dump(2) << '\n';
    } else if (*ext) {
      const auto rep = harness::extract(cfg, input, c.out);
      std::cout << rep.dump(2) << '\n';
    } else if (*ver) {
      TrainConfig vc = cfg;
      if (no_disambig) vc.model.frames.disambiguate = false;
      const auto results =
          verify::run_all(level == "full" ? verify::Level::full : verify::Level::fast, vc.model, vc.seed);
      nlohmann::json rep = harness::report_header("verify", vc);
      rep["level"] = level;
      rep["suites"] = nlohmann::json::array();
      std::vector<std::string> failed;
      for (const auto& r : results) {
        std::printf("%-34s max %-10s tol %-10s n %-7ld %6.2f s  %s\n", r.name.c_str(), fmt_sci(r.max_residual).c_str(),
                    fmt_sci(r.tolerance).c_str(), r.count, r.seconds, r.passed() ? "PASS" : "FAIL");
        rep["suites"].push_back(verify::to_json(r));
        if (!r.passed()) failed.push_back(r.name);
      }
      rep["passed"] = failed.empty();
      if (!c.out.empty()) harness::write_json(fs::path(c.out) / "verify.json", rep);
      if (!failed.empty()) {
        std::string list;
        for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
        std::cerr << to_string(ErrorCode::VerificationFailed) << ": " << list << '\n';
        return 2;
      }
    } else if (*tr) {
      harness::train(cfg, data, c.out, &std::cout);
    } else if (*ev) {
      harness::EvalOptions opt;
      if (!protocols.empty()) {
        opt.protocols.clear();
        for (const auto& p : protocols) opt.protocols.push_back(protocol_from_name(p));
      }
      opt.sweeps = sweeps;
      harness::evaluate(cfg, checkpoint, data, c.out, opt, &std::cout);
    } else if (*be) {
      const auto rep = harness::bench(cfg, repeats, &std::cout);
      if (!c.out.empty()) harness::write_json(fs::path(c.out) / "bench.json", rep);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigError ? 1 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
