#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "riframe/cloud_io.hpp"
#include "riframe/descriptors.hpp"
#include "riframe/error.hpp"
#include "riframe/harness.hpp"
#include "riframe/verify.hpp"

using namespace riframe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("riframe_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TrainConfig tiny() {
  TrainConfig c;
  c.classes = 3;
  c.model.classes = 3;
  c.train_per_class = 6;
  c.val_per_class = 2;
  c.test_per_class = 3;
  c.raw_points = 400;
  c.epochs = 6;
  c.batch_train = 6;
  c.batch_eval = 4;
  c.lr = 0.05;
  auto& m = c.model;
  m.n_points = 256;
  m.k_lrf = 16;
  m.k1 = 8;
  m.n1 = 32;
  m.n2 = 8;
  m.k2 = 4;
  m.widths1 = {8, 8};
  m.widths2 = {8, 16};
  m.d = 4;
  m.proj = 8;
  m.head = 8;
  m.blocks = 1;
  c.noise_sigmas = {0.0, 0.05};
  c.outlier_counts = {0, 8};
  c.validate();
  return c;
}

std::vector<std::uint8_t> bytes(const fs::path& p) { return read_file_bytes(p); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::BadSpec;
}

// One trained tiny model shared by the eval cases.
struct Trained {
  TempDir dir{"trained"};
  TrainConfig cfg = tiny();
  nlohmann::json report;
  Trained() {
    harness::gen_data(cfg, dir.path / "data");
    report = harness::train(cfg, dir.path / "data", dir.path / "run", nullptr);
  }
};

Trained& trained() {
  static Trained t;
  return t;
}

}  // namespace

TEST_CASE("samples are deterministic, labeled and sized") {
  const auto c = tiny();
  const auto a = harness::make_sample(c, harness::Split::train, 1, 3);
  const auto b = harness::make_sample(c, harness::Split::train, 1, 3);
  CHECK(a.points == b.points);
  CHECK(a.size() == 256);
  CHECK(a.label == 1);
  CHECK(harness::make_sample(c, harness::Split::train, 1, 4).points != a.points);
  CHECK(harness::make_sample(c, harness::Split::test, 1, 3).points != a.points);
  CHECK(harness::sample_seed(c, harness::Split::val, 0, 0) != harness::sample_seed(c, harness::Split::test, 0, 0));
}

TEST_CASE("gen-data writes balanced manifests and is byte-identical on rerun") {
  TempDir d("gen");
  const auto c = tiny();
  const auto rep = harness::gen_data(c, d.path / "a");
  harness::gen_data(c, d.path / "b");
  CHECK(rep["schema"] == harness::kReportSchema);
  CHECK(rep["config_hash"] == config_hash(c));
  CHECK(rep["counts"]["train"] == 18);
  CHECK(rep["counts"]["val"] == 6);
  CHECK(rep["counts"]["test"] == 9);

  const auto train = read_manifest(d.path / "a" / "train.jsonl");
  REQUIRE(train.size() == 18);
  std::map<int, int> per_label;
  for (const auto& e : train) ++per_label[e.label];
  CHECK(per_label == std::map<int, int>{{0, 6}, {1, 6}, {2, 6}});

  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(d.path / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), d.path / "a");
    CHECK(bytes(entry.path()) == bytes(d.path / "b" / rel));
    ++files;
  }
  CHECK(files == 33 + 4);  // clouds + three manifests + dataset.json
}

TEST_CASE("default dataset size is 2400 training clouds") {
  const TrainConfig c;
  CHECK(c.classes * c.train_per_class == 2400);
}

TEST_CASE("missing dataset pieces raise DatasetMissing") {
  TempDir d("missing");
  CHECK(code_of([&] { harness::load_split(d.path, harness::Split::train); }) == ErrorCode::DatasetMissing);
  CHECK(code_of([&] { harness::train(tiny(), d.path, d.path / "run", nullptr); }) == ErrorCode::DatasetMissing);
  write_manifest({{"train/nope.ripc", 0, 1}}, d.path / "train.jsonl");
  CHECK(code_of([&] { harness::load_split(d.path, harness::Split::train); }) == ErrorCode::DatasetMissing);
}

TEST_CASE("training logs every loss term, improves, and keeps a checkpoint") {
  const auto& t = trained();
  const auto& ep = t.report["epochs"];
  REQUIRE(ep.size() == 6);
  for (const auto& e : ep) {
    CHECK(e.contains("ce"));
    CHECK(e.contains("reg_local"));
    CHECK(e.contains("reg_global"));
    CHECK(e["reg_local"].get<double>() > 0.0);
    CHECK(e["reg_global"].get<double>() > 0.0);
  }
  CHECK(ep[5]["loss"].get<double>() < ep[0]["loss"].get<double>());
  CHECK(t.report["config_hash"] == config_hash(t.cfg));
  CHECK(fs::exists(t.dir.path / "run" / "model.rimw"));
  CHECK(fs::exists(t.dir.path / "run" / "train.json"));
  const auto header = net::read_checkpoint_header(t.dir.path / "run" / "model.rimw");
  CHECK(header["config_hash"] == config_hash(t.cfg));
  CHECK(header["epoch"] == t.report["best_epoch"]);
  const double acc = t.report["test_accuracy"];
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("training is deterministic on one thread") {
  const auto& t = trained();
  TempDir d("determinism");
  const auto again = harness::train(t.cfg, t.dir.path / "data", d.path, nullptr);
  for (std::size_t e = 0; e < again["epochs"].size(); ++e)
    CHECK(again["epochs"][e]["loss"] == t.report["epochs"][e]["loss"]);
  CHECK(again["test_accuracy"] == t.report["test_accuracy"]);
  CHECK(bytes(d.path / "model.rimw") == bytes(t.dir.path / "run" / "model.rimw"));
}

TEST_CASE("lambda = 0 trains on cross entropy alone") {
  const auto& t = trained();
  TempDir d("lambda0");
  auto c = t.cfg;
  c.epochs = 2;
  c.model.lambda = 0.0;
  const auto rep = harness::train(c, t.dir.path / "data", d.path, nullptr);
  for (const auto& e : rep["epochs"]) CHECK(e["loss"].get<double>() == e["ce"].get<double>());
}

TEST_CASE("a diverging run raises NonFiniteLoss") {
  const auto& t = trained();
  TempDir d("diverge");
  auto c = t.cfg;
  c.lr = 1e30;
  c.clip_norm = 1e30;
  c.model.lambda = 0.0;
  std::string what;
  try {
    harness::train(c, t.dir.path / "data", d.path, nullptr);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    what = e.what();
  }
  CHECK(what.find("epoch") != std::string::npos);
  CHECK(what.find("step") != std::string::npos);
}

TEST_CASE("eval reports every protocol, and the clean sweep point equals clean accuracy") {
  const auto& t = trained();
  TempDir d("eval");
  harness::EvalOptions opt;
  opt.sweeps = true;
  const auto rep = harness::evaluate(t.cfg, t.dir.path / "run" / "model.rimw", t.dir.path / "data", d.path, opt, nullptr);
  CHECK(rep["config_hash"] == config_hash(t.cfg));
  for (const char* p : {"zz", "zso3", "so3so3"}) CHECK(rep["accuracy"].contains(p));
  const double clean = rep["accuracy"]["zz"];
  const auto& sw = rep["sweeps"];
  REQUIRE(sw.size() == 4);
  CHECK(sw[0]["kind"] == "sigma");
  CHECK(sw[0]["value"] == 0.0);
  CHECK(sw[0]["accuracy"].get<double>() == clean);
  CHECK(sw[2]["kind"] == "outliers");
  CHECK(sw[2]["accuracy"].get<double>() == clean);
  CHECK(rep["accuracy"]["zz"] == t.report["test_accuracy"]);

  std::ifstream csv(d.path / "sweeps.csv");
  std::string header, row;
  std::getline(csv, header);
  CHECK(header == "schema,protocol,kind,value,accuracy,count");
  int rows = 0;
  while (std::getline(csv, row)) {
    CHECK(row.rfind(harness::kSweepSchema, 0) == 0);
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(fs::exists(d.path / "eval.json"));
}

TEST_CASE("eval rejects a checkpoint from a different model") {
  const auto& t = trained();
  TempDir d("mismatch");
  auto c = t.cfg;
  c.model.head = 12;
  CHECK(code_of([&] {
          harness::evaluate(c, t.dir.path / "run" / "model.rimw", t.dir.path / "data", d.path, {}, nullptr);
        }) == ErrorCode::CheckpointMismatch);
}

TEST_CASE("extract is deterministic, rotation stable, and fails on a bad path") {
  TempDir d("extract");
  const auto c = tiny();
  PointCloud pc = verify::generic_shape(2, 301, 9);
  write_cloud(pc, d.path / "in.ripc");
  write_cloud(apply_rotation(pc, random_rotation(4, RotationMode::full_so3)), d.path / "rot.ripc");
  const auto rep = harness::extract(c, d.path / "in.ripc", d.path / "a.rids");
  harness::extract(c, d.path / "in.ripc", d.path / "b.rids");
  harness::extract(c, d.path / "rot.ripc", d.path / "r.rids");
  CHECK(rep["n"] == 301);
  CHECK(rep["k"] == c.model.k_lrf);
  CHECK(bytes(d.path / "a.rids") == bytes(d.path / "b.rids"));
  const auto a = decode_descriptors(bytes(d.path / "a.rids"));
  const auto r = decode_descriptors(bytes(d.path / "r.rids"));
  REQUIRE(a.local.size() == r.local.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.local.size(); ++i) worst = std::max(worst, std::abs(a.local[i] - r.local[i]));
  for (std::size_t i = 0; i < a.global.size(); ++i) worst = std::max(worst, std::abs(a.global[i] - r.global[i]));
  // Both clouds pass through f32 storage, rounded independently.
  CHECK(worst < 1e-5);
  CHECK_THROWS_AS(harness::extract(c, d.path / "nope.ripc", d.path / "x.rids"), Error);
}

TEST_CASE("bench reports five kernels at three sizes") {
  const auto rep = harness::bench(tiny(), 1, nullptr);
  const auto& k = rep["kernels"];
  REQUIRE(k.size() == 3);
  CHECK(k[0]["n"] == 512);
  CHECK(k[1]["n"] == 1024);
  CHECK(k[2]["n"] == 2048);
  for (const auto& row : k)
    for (const char* key : {"lrf_ms", "grf_ms", "fps_ms", "knn_ms", "ait_ms"}) {
      CHECK(row.contains(key));
      CHECK(row[key].get<double>() > 0.0);
    }
  CHECK(rep["inference"]["instances_per_second"].get<double>() > 0.0);
  CHECK(rep["schema"] == harness::kReportSchema);
}
