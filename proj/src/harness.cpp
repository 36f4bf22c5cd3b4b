#include "riframe/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "riframe/cloud_io.hpp"
#include "riframe/descriptors.hpp"
#include "riframe/error.hpp"
#include "riframe/frames.hpp"

namespace riframe::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Rotation salts. Each protocol gets its own test rotations.
constexpr std::uint64_t kTrainSalt = 0x7472;
constexpr std::uint64_t kValSalt = 0x76616c;
std::uint64_t test_salt(Protocol p) { return 0x74657374 + static_cast<std::uint64_t>(p); }

int per_class(const TrainConfig& cfg, Split s) {
  switch (s) {
    case Split::train: return cfg.train_per_class;
    case Split::val: return cfg.val_per_class;
    case Split::test: return cfg.test_per_class;
  }
  return 0;
}

// Runs body(i) for i in [0, n) on cfg.threads threads; rethrows the first error.
template <class F>
void fan_out(int threads, int n, F&& body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(riframe_fan_out)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

// Median per-call time. One warmup call, then each sample loops the body for
// at least 20 ms so microsecond kernels are not lost in timer noise.
template <class F>
double median_seconds(int repeats, F&& body) {
  body();
  std::vector<double> t(static_cast<std::size_t>(repeats));
  for (auto& s : t) {
    const auto t0 = Clock::now();
    long calls = 0;
    do {
      body();
      ++calls;
    } while (since(t0) < 0.02);
    s = since(t0) / static_cast<double>(calls);
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

json report_header(const std::string& command, const TrainConfig& cfg) {
  json j;
  j["schema"] = kReportSchema;
  j["command"] = command;
  j["version"] = kVersion;
  j["config"] = to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  j["machine"] = {{"hardware_threads", std::thread::hardware_concurrency()},
                  {"omp_max_threads", omp_get_max_threads()},
                  {"compiler", __VERSION__}};
  return j;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::uint64_t sample_seed(const TrainConfig& cfg, Split split, int cls, int index) {
  return mix(mix(mix(cfg.seed, static_cast<std::uint64_t>(split)), static_cast<std::uint64_t>(cls)),
             static_cast<std::uint64_t>(index));
}

PointCloud make_sample(const TrainConfig& cfg, Split split, int cls, int index) {
  const std::uint64_t seed = sample_seed(cfg, split, cls, index);
  std::mt19937_64 rng(seed);
  auto spec = default_shape_spec(static_cast<ShapeFamily>(cls), cfg.raw_points);
  std::uniform_real_distribution<double> jitter(1.0 - cfg.shape_jitter, 1.0 + cfg.shape_jitter);
  for (double& p : spec.params) p *= jitter(rng);
  PointCloud raw = generate_shape(spec, rng());
  if (cfg.surface_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.surface_noise);
    for (Vec3& p : raw.points) p = {p.x + noise(rng), p.y + noise(rng), p.z + noise(rng)};
  }
  PointCloud out = farthest_point_sample(raw, cfg.model.n_points, rng());
  out.label = cls;
  out.seed = seed;
  return out;
}

json gen_data(const TrainConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto t0 = Clock::now();
  json rep = report_header("gen-data", cfg);
  json counts = json::object();
  for (Split split : {Split::train, Split::val, Split::test}) {
    const int per = per_class(cfg, split);
    const std::string name(split_name(split));
    fs::create_directories(out / name);
    std::vector<ManifestEntry> entries(static_cast<std::size_t>(cfg.classes) * per);
    fan_out(cfg.threads, static_cast<int>(entries.size()), [&](int job) {
      const int cls = job / per, idx = job % per;
      char file[64];
      std::snprintf(file, sizeof file, "%s_%04d.ripc", std::string(family_name(static_cast<ShapeFamily>(cls))).c_str(),
                    idx);
      const PointCloud pc = make_sample(cfg, split, cls, idx);
      write_cloud(pc, out / name / file);
      entries[job] = {name + "/" + file, cls, *pc.seed};
    });
    write_manifest(entries, out / (name + ".jsonl"));
    counts[name] = entries.size();
  }
  rep["counts"] = counts;
  rep["seconds"] = since(t0);
  json meta = rep;
  meta.erase("seconds");
  meta.erase("machine");
  write_json(out / "dataset.json", meta);
  return rep;
}

std::vector<Sample> load_split(const fs::path& data, Split split) {
  const fs::path manifest = data / (std::string(split_name(split)) + ".jsonl");
  if (!fs::exists(manifest)) throw Error(ErrorCode::DatasetMissing, "no manifest " + manifest.string());
  const auto entries = read_manifest(manifest);
  std::vector<Sample> out(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const fs::path p = data / entries[i].path;
    if (!fs::exists(p)) throw Error(ErrorCode::DatasetMissing, "missing cloud " + p.string());
    out[i].cloud = read_cloud(p);
    out[i].cloud.label = entries[i].label;
    out[i].seed = entries[i].seed;
  }
  return out;
}

std::vector<net::Prepared> prepare_samples(const TrainConfig& cfg, const std::vector<Sample>& samples,
                                           RotationMode mode, std::uint64_t salt, double sigma, int outliers) {
  std::vector<net::Prepared> out(samples.size());
  fan_out(cfg.threads, static_cast<int>(samples.size()), [&](int i) {
    const Sample& s = samples[i];
    PointCloud pc = apply_rotation(s.cloud, random_rotation(mix(s.seed, salt), mode));
    if (sigma > 0.0 || outliers > 0) pc = add_noise(pc, sigma, outliers, mix(s.seed, salt + 1));
    out[i] = net::prepare(pc, cfg.model, s.seed);
    out[i].label = s.cloud.label.value_or(-1);
  });
  return out;
}

double accuracy(ad::ParamStore<float>& store, const net::ModelConfig& model, const std::vector<net::Prepared>& data,
                int batch) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t s = 0; s < data.size(); s += batch) {
    std::vector<const net::Prepared*> b;
    for (std::size_t j = s; j < std::min(data.size(), s + batch); ++j) b.push_back(&data[j]);
    const auto lg = net::predict_logits(store, model, b);
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto row = lg.begin() + static_cast<std::ptrdiff_t>(j * model.classes);
      ok += (std::max_element(row, row + model.classes) - row) == b[j]->label;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

json train(const TrainConfig& cfg, const fs::path& data, const fs::path& out, std::ostream* log) {
  cfg.validate();
  const auto t0 = Clock::now();
  const auto train_set = load_split(data, Split::train);
  const auto val_set = load_split(data, Split::val);
  const auto test_set = load_split(data, Split::test);
  const RotationMode rot = train_rotation(cfg.protocol);

  // Inputs are rotation invariant, so without augmentation one draw serves every epoch.
  std::vector<net::Prepared> tr = prepare_samples(cfg, train_set, rot, kTrainSalt);
  const auto va = prepare_samples(cfg, val_set, rot, kValSalt);
  const double prep_seconds = since(t0);
  if (log) *log << "prepared " << tr.size() << " train, " << va.size() << " val clouds in " << fmt(prep_seconds, 1)
                << " s\n";

  ad::ParamStore<float> store;
  net::init_params(store, cfg.model, cfg.seed);
  fs::create_directories(out);
  const fs::path ckpt = out / "model.rimw";
  json header = {{"model", net::to_json(cfg.model)}, {"config_hash", config_hash(cfg)}};

  std::mt19937_64 rng(mix(cfg.seed, 0x73687566));
  std::vector<int> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  const int bs = cfg.batch_train;
  const long steps_per = static_cast<long>((tr.size() + bs - 1) / bs);
  const long total = steps_per * cfg.epochs;
  long step = 0;
  double best = -1.0;
  int best_epoch = -1;
  json epochs = json::array();
  const auto train_t0 = Clock::now();

  for (int e = 0; e < cfg.epochs; ++e) {
    const auto et = Clock::now();
    if (cfg.augment && e > 0) {
      std::vector<Sample> aug(train_set.size());
      for (std::size_t i = 0; i < aug.size(); ++i) {
        aug[i].cloud = augment(train_set[i].cloud, mix(train_set[i].seed, 0x617567 + e));
        aug[i].cloud.label = train_set[i].cloud.label;
        aug[i].seed = train_set[i].seed;
      }
      tr = prepare_samples(cfg, aug, rot, mix(kTrainSalt, e));
    }
    std::shuffle(order.begin(), order.end(), rng);
    double ce = 0, rl = 0, rg = 0, loss = 0;
    long nb = 0;
    for (std::size_t s = 0; s < order.size(); s += bs, ++step) {
      std::vector<const net::Prepared*> b;
      for (std::size_t j = s; j < std::min(order.size(), s + bs); ++j) b.push_back(&tr[order[j]]);
      const double lr = cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total));
      ad::Tape<float> tape;
      const auto f = net::forward(tape, store, cfg.model, b, true);
      const double l = tape.scalar(f.loss);
      if (!std::isfinite(l))
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(e) + " step " + std::to_string(step));
      tape.backward(f.loss);
      store.clip_grad_norm(static_cast<float>(cfg.clip_norm));
      store.sgd_step(static_cast<float>(lr), static_cast<float>(cfg.momentum), static_cast<float>(cfg.weight_decay));
      store.zero_grad();
      loss += l;
      ce += tape.scalar(f.ce);
      if (f.reg_local.id >= 0) rl += tape.scalar(f.reg_local);
      if (f.reg_global.id >= 0) rg += tape.scalar(f.reg_global);
      ++nb;
    }
    const double val_acc = va.empty() ? 0.0 : accuracy(store, cfg.model, va, cfg.batch_eval);
    // Without a validation split every epoch counts as the newest best.
    const bool improved = va.empty() || val_acc > best;
    if (improved) {
      best = val_acc;
      best_epoch = e;
      header["epoch"] = e;
      header["val_accuracy"] = val_acc;
      net::save_checkpoint(ckpt, store, header);
    }
    json row = {{"epoch", e},
                {"loss", loss / nb},
                {"ce", ce / nb},
                {"reg_local", rl / nb},
                {"reg_global", rg / nb},
                {"val_accuracy", val_acc},
                {"lr_end", cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total))},
                {"seconds", since(et)}};
    epochs.push_back(row);
    if (log) {
      *log << "epoch " << e + 1 << "/" << cfg.epochs << "  loss " << fmt(loss / nb, 4) << "  ce " << fmt(ce / nb, 4)
           << "  reg_local " << fmt(rl / nb, 4) << "  reg_global " << fmt(rg / nb, 4) << "  val " << fmt(val_acc, 4)
           << (improved ? " *" : "") << "  " << fmt(since(et), 1) << " s\n";
      log->flush();
    }
  }
  const double train_seconds = since(train_t0);

  net::load_checkpoint(ckpt, store);
  const auto te = prepare_samples(cfg, test_set, test_rotation(cfg.protocol), test_salt(cfg.protocol));
  const double test_acc = accuracy(store, cfg.model, te, cfg.batch_eval);
  if (log) *log << "best epoch " << best_epoch + 1 << "  test accuracy (" << protocol_name(cfg.protocol)
                << ") " << fmt(test_acc, 4) << "\n";

  json rep = report_header("train", cfg);
  rep["dataset"] = data.string();
  rep["checkpoint"] = ckpt.string();
  rep["protocol"] = protocol_name(cfg.protocol);
  rep["epochs"] = epochs;
  rep["best_epoch"] = best_epoch;
  rep["best_val_accuracy"] = best;
  rep["test_accuracy"] = test_acc;
  rep["timing"] = {{"prepare_seconds", prep_seconds}, {"train_seconds", train_seconds}, {"total_seconds", since(t0)}};
  write_json(out / "train.json", rep);
  return rep;
}

json evaluate(const TrainConfig& cfg, const fs::path& checkpoint, const fs::path& data, const fs::path& out,
              const EvalOptions& opt, std::ostream* log) {
  cfg.validate();
  const auto t0 = Clock::now();
  const json header = net::read_checkpoint_header(checkpoint);
  if (!header.contains("model") || header.at("model") != net::to_json(cfg.model))
    throw Error(ErrorCode::CheckpointMismatch, checkpoint.string() + " was trained with a different model config");
  ad::ParamStore<float> store;
  net::init_params(store, cfg.model, cfg.seed);
  net::load_checkpoint(checkpoint, store);
  const auto test_set = load_split(data, Split::test);

  json rep = report_header("eval", cfg);
  rep["checkpoint"] = checkpoint.string();
  rep["checkpoint_config_hash"] = header.value("config_hash", "");
  json acc = json::object();
  for (Protocol p : opt.protocols) {
    const auto te = prepare_samples(cfg, test_set, test_rotation(p), test_salt(p));
    const double a = accuracy(store, cfg.model, te, cfg.batch_eval);
    acc[std::string(protocol_name(p))] = a;
    if (log) *log << protocol_name(p) << "  accuracy " << fmt(a, 4) << "\n";
  }
  rep["accuracy"] = acc;

  if (opt.sweeps && !opt.protocols.empty()) {
    const Protocol p = opt.protocols.front();
    fs::create_directories(out);
    const fs::path csv = out / "sweeps.csv";
    std::ofstream f(csv);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + csv.string());
    f << "schema,protocol,kind,value,accuracy,count\n";
    json sweeps = json::array();
    auto point = [&](const char* kind, double value, double sigma, int outliers) {
      const auto te = prepare_samples(cfg, test_set, test_rotation(p), test_salt(p), sigma, outliers);
      const double a = accuracy(store, cfg.model, te, cfg.batch_eval);
      f << kSweepSchema << ',' << protocol_name(p) << ',' << kind << ',' << value << ',' << std::setprecision(10) << a
        << ',' << te.size() << '\n';
      sweeps.push_back({{"kind", kind}, {"value", value}, {"accuracy", a}});
      if (log) *log << protocol_name(p) << "  " << kind << " " << value << "  accuracy " << fmt(a, 4) << "\n";
    };
    for (double s : cfg.noise_sigmas) point("sigma", s, s, 0);
    for (int o : cfg.outlier_counts) point("outliers", o, 0.0, o);
    rep["sweeps"] = sweeps;
    rep["sweep_csv"] = csv.string();
  }
  rep["seconds"] = since(t0);
  write_json(out / "eval.json", rep);
  return rep;
}

namespace {

// Inputs for the kernels at one cloud size, kept alive while they are timed.
struct BenchCase {
  int n = 0, m = 0, c = 0, d = 0;
  PointCloud pc;
  std::vector<int> all;
  NeighborIndex nb;
  Frame g;
  std::vector<float> esa, eca, fv, gv;
  ad::ParamStore<float> store;
};

struct BenchJob {
  std::size_t row;
  const char* key;
  std::function<void()> body;
  std::vector<double> samples;
};

// Per-call seconds of each job. One warmup call each, then `repeats` rounds
// that visit every job once; a sample loops its body for at least 20 ms.
// Round-robin spreads each job's samples over the whole run, so a slow phase
// of the host does not land on all samples of one kernel.
void sample_interleaved(std::vector<BenchJob>& jobs, int repeats) {
  for (auto& j : jobs) j.body();
  for (int r = 0; r < repeats; ++r)
    for (auto& j : jobs) {
      const auto t0 = Clock::now();
      long calls = 0;
      do {
        j.body();
        ++calls;
      } while (since(t0) < 0.02);
      j.samples.push_back(since(t0) / static_cast<double>(calls));
    }
}

}  // namespace

json bench(const TrainConfig& cfg, int repeats, std::ostream* log) {
  cfg.validate();
  if (repeats < 1) throw Error(ErrorCode::BadSpec, "repeats must be >= 1");
  const auto t0 = Clock::now();
  const int k = 32;
  const FrameOptions& fopt = cfg.model.frames;
  json rep = report_header("bench", cfg);
  rep["repeats"] = repeats;
  rep["k"] = k;
  rep["estimator"] = "min";
  const std::vector<int> sizes{512, 1024, 2048};
  std::vector<std::unique_ptr<BenchCase>> cases;
  std::vector<BenchJob> jobs;
  const net::AttnOptions aopt{cfg.model.offset_norm, cfg.model.use_e_sa, cfg.model.use_e_ca};
  for (std::size_t row = 0; row < sizes.size(); ++row) {
    auto bc = std::make_unique<BenchCase>();
    BenchCase& b = *bc;
    b.n = sizes[row];
    b.pc = generate_shape(default_shape_spec(ShapeFamily::torus, b.n), cfg.seed);
    const auto& pts = b.pc.points;
    b.all.resize(pts.size());
    std::iota(b.all.begin(), b.all.end(), 0);
    b.nb = knn_query_serial(pts, b.all, k);
    b.g = grf(pts, fopt);

    // One attention block (self + fused) over n/8 tokens with real frame angles.
    b.m = b.n / 8;
    b.c = cfg.model.channels();
    b.d = cfg.model.d;
    const auto cent = farthest_point_indices(pts, b.m, cfg.seed);
    const NeighborIndex cnb = knn_query_serial(pts, cent, k);
    const auto frames = compute_lrfs_serial(pts, cnb, b.g, fopt, nullptr);
    std::vector<double> cross(static_cast<std::size_t>(b.m));
    for (int i = 0; i < b.m; ++i) cross[i] = relative_angle_deg(frames[i], b.g);
    const auto esa = net::angular_embedding(pairwise_angles_serial(frames), b.d, cfg.model.t_alpha);
    const auto eca = net::angular_embedding(cross, b.d, cfg.model.t_alpha);
    b.esa.assign(esa.begin(), esa.end());
    b.eca.assign(eca.begin(), eca.end());
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<float> gauss;
    b.fv.resize(static_cast<std::size_t>(b.m) * b.c);
    b.gv.resize(b.fv.size());
    for (auto& x : b.fv) x = gauss(rng);
    for (auto& x : b.gv) x = gauss(rng);
    net::init_params(b.store, cfg.model, cfg.seed);

    jobs.push_back({row, "lrf_ms", [&b, &fopt] {
                      auto fr = compute_lrfs_serial(b.pc.points, b.nb, b.g, fopt, nullptr);
                      if (fr.size() != b.pc.points.size()) std::abort();
                    }, {}});
    jobs.push_back({row, "grf_ms", [&b, &fopt] {
                      volatile double x = grf(b.pc.points, fopt).basis(0, 0);
                      (void)x;
                    }, {}});
    jobs.push_back({row, "fps_ms", [&b, &cfg] {
                      auto idx = farthest_point_indices(b.pc.points, b.n / 8, cfg.seed);
                      if (idx.empty()) std::abort();
                    }, {}});
    jobs.push_back({row, "knn_ms", [&b, k] {
                      auto q = knn_query_serial(b.pc.points, b.all, k);
                      if (q.indices.empty()) std::abort();
                    }, {}});
    jobs.push_back({row, "ait_ms", [&b, &aopt] {
                      ad::Tape<float> tape;
                      const ad::Var f = tape.constant({b.m, b.c}, b.fv), gg = tape.constant({b.m, b.c}, b.gv);
                      const ad::Var es = tape.constant({b.m, b.m, b.d}, b.esa), ec = tape.constant({b.m, b.d}, b.eca);
                      ad::Var x = net::ias(tape, b.store, "ait0.ias", f, es, 1, aopt);
                      x = net::afi(tape, b.store, "ait0.afi", x, gg, es, ec, 1, aopt);
                      volatile float v = tape.value(x)[0];
                      (void)v;
                    }, {}});
    cases.push_back(std::move(bc));
  }
  sample_interleaved(jobs, repeats);

  json rows = json::array();
  for (std::size_t row = 0; row < sizes.size(); ++row) rows.push_back({{"n", sizes[row]}, {"ait_tokens", sizes[row] / 8}});
  for (auto& j : jobs) {
    std::sort(j.samples.begin(), j.samples.end());
    rows[j.row][j.key] = 1e3 * j.samples.front();
    rows[j.row][std::string(j.key, std::strlen(j.key) - 3) + "_median_ms"] = 1e3 * j.samples[j.samples.size() / 2];
  }
  if (log)
    for (const auto& row : rows)
      *log << "N " << row["n"].get<int>() << "  lrf " << fmt(row["lrf_ms"], 3) << " ms  grf " << fmt(row["grf_ms"], 3)
           << " ms  fps " << fmt(row["fps_ms"], 3) << " ms  knn " << fmt(row["knn_ms"], 3) << " ms  ait("
           << row["ait_tokens"].get<int>() << ") " << fmt(row["ait_ms"], 3) << " ms\n";
  rep["kernels"] = rows;

  // Whole-model inference at the configured size: preparation plus forward.
  {
    const PointCloud pc = generate_shape(default_shape_spec(ShapeFamily::torus, cfg.model.n_points), cfg.seed);
    ad::ParamStore<float> store;
    net::init_params(store, cfg.model, cfg.seed);
    const double s = median_seconds(repeats, [&] {
      const net::Prepared p = net::prepare(pc, cfg.model, cfg.seed);
      const net::Prepared* b[1] = {&p};
      auto lg = net::predict_logits<float>(store, cfg.model, b);
      if (lg.empty()) std::abort();
    });
    rep["inference"] = {{"n_points", cfg.model.n_points}, {"ms_per_instance", 1e3 * s},
                        {"instances_per_second", 1.0 / s}};
    if (log) *log << "inference  " << fmt(1e3 * s, 2) << " ms/instance  " << fmt(1.0 / s, 1) << " instances/s\n";
  }
  rep["seconds"] = since(t0);
  return rep;
}

json extract(const TrainConfig& cfg, const fs::path& input, const fs::path& output) {
  const PointCloud pc = read_cloud(input);
  pc.validate();
  const DescriptorSet d = extract_descriptors(pc, cfg.model.k_lrf, cfg.model.frames);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  write_descriptors(d, output);
  json rep = report_header("extract", cfg);
  rep["input"] = input.string();
  rep["output"] = output.string();
  rep["n"] = d.n;
  rep["k"] = d.k;
  rep["fallback_frames"] = d.fallback_frames;
  return rep;
}

}  // namespace riframe::harness
