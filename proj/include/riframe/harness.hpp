#pragma once

// Experiment commands: dataset generation, training, evaluation, benchmarks
// and descriptor extraction. Each returns a JSON report carrying the
// resolved config and its hash.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "riframe/config.hpp"
#include "riframe/net.hpp"

namespace riframe::harness {

inline constexpr const char* kReportSchema = "riframe.report/1";
inline constexpr const char* kSweepSchema = "riframe.sweep/1";
inline constexpr const char* kVersion = "0.1.0";

enum class Split { train, val, test };
std::string_view split_name(Split s);

/// Report skeleton: schema, command, version, config, config_hash, machine.
nlohmann::json report_header(const std::string& command, const TrainConfig& cfg);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Deterministic sample `index` of class `cls`: jittered size parameters,
/// surface noise, then FPS from raw_points to n_points.
PointCloud make_sample(const TrainConfig& cfg, Split split, int cls, int index);
std::uint64_t sample_seed(const TrainConfig& cfg, Split split, int cls, int index);

/// Writes <out>/<split>/<family>_<index>.ripc and <out>/<split>.jsonl.
nlohmann::json gen_data(const TrainConfig& cfg, const std::filesystem::path& out);

struct Sample {
  PointCloud cloud;
  std::uint64_t seed = 0;
};
/// Throws DatasetMissing when the manifest or a listed cloud is absent.
std::vector<Sample> load_split(const std::filesystem::path& data, Split split);

/// Rotates each sample by a seeded rotation of `mode` (salted per use),
/// applies noise, and prepares network inputs. Fans out over cfg.threads.
std::vector<net::Prepared> prepare_samples(const TrainConfig& cfg, const std::vector<Sample>& samples, RotationMode mode,
                                           std::uint64_t salt, double sigma = 0.0, int outliers = 0);

double accuracy(ad::ParamStore<float>& store, const net::ModelConfig& model, const std::vector<net::Prepared>& data,
                int batch);

/// Trains under cfg.protocol, keeps the best validation checkpoint at
/// <out>/model.rimw and writes <out>/train.json. Progress lines go to `log`.
nlohmann::json train(const TrainConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& out,
                     std::ostream* log);

struct EvalOptions {
  std::vector<Protocol> protocols{Protocol::zz, Protocol::zso3, Protocol::so3so3};
  bool sweeps = false;  // sigma and outlier curves, written as CSV to out
};
/// Accuracy of a checkpoint under each protocol; CheckpointMismatch when the
/// checkpoint does not fit the configured model.
nlohmann::json evaluate(const TrainConfig& cfg, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& data, const std::filesystem::path& out, const EvalOptions& opt,
                        std::ostream* log);

/// Median timings of LRF, GRF, FPS, kNN and one attention block at
/// N in {512, 1024, 2048}, single threaded.
nlohmann::json bench(const TrainConfig& cfg, int repeats, std::ostream* log);

/// RIDS descriptors of one cloud with cfg.model.k_lrf neighbors.
nlohmann::json extract(const TrainConfig& cfg, const std::filesystem::path& input, const std::filesystem::path& output);

}  // namespace riframe::harness
