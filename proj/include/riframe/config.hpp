#pragma once

// Flat `key = value` experiment configuration. '#' starts a comment, blank
// lines are skipped, and unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "riframe/net.hpp"

namespace riframe {

enum class Protocol { zz, zso3, so3so3 };

std::string_view protocol_name(Protocol p);
/// Throws ConfigError.
Protocol protocol_from_name(std::string_view name);
/// Rotation family applied to training clouds (z for zz and zso3).
RotationMode train_rotation(Protocol p);
/// Rotation family applied to test clouds (z only for zz).
RotationMode test_rotation(Protocol p);

struct TrainConfig {
  std::uint64_t seed = 1;

  // Dataset.
  int classes = 8;
  int train_per_class = 300;
  int val_per_class = 50;
  int test_per_class = 100;
  int raw_points = 2048;   // surface samples before FPS down to model.n_points
  double shape_jitter = 0.25;   // each size parameter scaled by U(1 - j, 1 + j)
  double surface_noise = 0.005; // per-coordinate Gaussian sigma on the raw samples

  // Optimization.
  int batch_train = 32;
  int batch_eval = 16;
  int epochs = 60;
  double lr = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 5.0;
  bool augment = false;  // redraw rotation, scale and shift every epoch
  Protocol protocol = Protocol::zz;
  int threads = 1;  // data preparation fan-out; training stays on one thread

  // Robustness sweeps for eval.
  std::vector<double> noise_sigmas{0.0, 0.01, 0.02, 0.04};
  std::vector<int> outlier_counts{0, 16, 32, 64};

  net::ModelConfig model;

  /// Throws ConfigError.
  void validate() const;
};

/// Parses and validates; ConfigError names the line on failure.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
/// Sets one key from its text value. Throws ConfigError for unknown keys.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

nlohmann::json to_json(const TrainConfig& cfg);
/// Round-trippable `key = value` text, keys sorted.
std::string format_config(const TrainConfig& cfg);
/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const TrainConfig& cfg);
std::string fnv1a_hex(std::string_view bytes);

}  // namespace riframe
