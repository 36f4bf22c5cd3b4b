#pragma once

// Rotation-invariant point cloud classifier: two-stage set-abstraction
// encoders over local descriptors and canonical coordinates, stacked
// frame-aligned attention blocks, a registration loss tying the integrated
// features back to both shape codes, and a max-pool classification head.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "riframe/autodiff.hpp"
#include "riframe/cloud.hpp"
#include "riframe/frames.hpp"

namespace riframe::net {

using ad::ParamStore;
using ad::Tape;
using ad::Var;

enum class OffsetNorm { pct, plain };

struct ModelConfig {
  int n_points = 1024;
  int k_lrf = 32;  // LRF neighborhood
  int k1 = 16;     // stage-1 group: the k1 nearest of the LRF neighbors
  int n1 = 128;
  int n2 = 32;
  int k2 = 16;
  std::vector<int> widths1{16, 32};
  std::vector<int> widths2{32, 64};
  int d = 16;        // attention key width, even
  int proj = 16;     // registration projection width
  int head = 32;     // classifier hidden width
  int blocks = 2;
  int classes = 8;
  double t_alpha = 15.0;
  double t = 0.017;
  double lambda = 1.0;
  OffsetNorm offset_norm = OffsetNorm::pct;
  FrameOptions frames;

  // Ablations.
  bool use_e_sa = true;
  bool use_e_ca = true;
  bool sa_on_global = false;
  bool sequential_attn = false;
  bool reg_local = true;
  bool reg_global = true;

  int channels() const { return widths2.back(); }
  /// Throws BadSpec.
  void validate() const;

  static ModelConfig desk();
  static ModelConfig full_size();
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Per-cloud network inputs. Everything here is rotation invariant.
struct Prepared {
  int n1 = 0, k1 = 0, n2 = 0, k2 = 0;
  std::vector<double> local1;        // n1*k1 x 3
  std::vector<double> global1;       // n1*k1 x 6: (p_j - p_c, p_j) canonical
  std::vector<int> group2;           // n2*k2 indices into the n1 centroids
  std::vector<double> local2;        // n2*k2 x 3
  std::vector<double> global2;       // n2*k2 x 3
  std::vector<double> self_angles;   // n2 x n2 degrees
  std::vector<double> cross_angles;  // n2 degrees to the global frame
  std::vector<int> centroids1;       // point indices of stage-1 centroids
  std::vector<int> centroids2;       // positions in centroids1
  int fallback_frames = 0;
  int label = -1;
};

/// `fps_seed` picks the first stage-1 centroid; stage 2 uses fps_seed + 1.
Prepared prepare(const PointCloud& pc, const ModelConfig& cfg, std::uint64_t fps_seed);

/// e[2k] = sin(a / t_alpha / 10000^(2k/d)), e[2k+1] = cos(...). OddDimension for odd d.
std::vector<double> angular_embedding(std::span<const double> angles_deg, int d, double t_alpha);

void init_params(ParamStore<float>& store, const ModelConfig& cfg, std::uint64_t seed);
void init_params(ParamStore<double>& store, const ModelConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------- layers
// Features are 2-D (batch*n, C) tensors; `batch` splits the rows.

template <class T>
Var linear(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var x);
/// leaky_relu(layer_norm(linear(x))).
template <class T>
Var dense(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var x);
/// dense() for layers name.0 .. name.(layers-1).
template <class T>
Var mlp(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var x, int layers);

/// F = phi(F_in - norm(softmax(logits)) v) + F_in; logits is (batch, n, n).
template <class T>
Var attend(Tape<T>& tape, ParamStore<T>& store, const std::string& phi, Var f_in, Var logits, Var v, int batch,
           OffsetNorm norm);
/// Plain offset attention with logits q k^T.
template <class T>
Var offset_attention(Tape<T>& tape, ParamStore<T>& store, const std::string& phi, Var f_in, Var q, Var k, Var v,
                     int batch, OffsetNorm norm);

struct AttnOptions {
  OffsetNorm norm = OffsetNorm::pct;
  bool use_e_sa = true;
  bool use_e_ca = true;
};

/// Self-attention logits q k^T + q (e W^a)^T and values; e_sa is (batch*n, n, d).
template <class T>
std::pair<Var, Var> self_logits(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var e_sa,
                                int batch, bool use_e);
/// Cross-attention logits q (k + e W^a)^T with q from f, k and v from g; e_ca is (batch*n, d).
template <class T>
std::pair<Var, Var> cross_logits(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var g, Var e_ca,
                                 int batch, bool use_e);

template <class T>
Var ias(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var e_sa, int batch,
        const AttnOptions& opt);
template <class T>
Var iac(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var g, Var e_ca, int batch,
        const AttnOptions& opt);
template <class T>
Var afi(Tape<T>& tape, ParamStore<T>& store, const std::string& name, Var f, Var g, Var e_sa, Var e_ca, int batch,
        const AttnOptions& opt);

/// Row-stochastic map softmax_j(Phi1(Y)_i . Phi2(X)_j / t) over all rows.
template <class T>
Var correspondence_logits(Tape<T>& tape, ParamStore<T>& store, const std::string& phi_x, Var x, Var y, T t);
template <class T>
Var correspondence_map(Tape<T>& tape, ParamStore<T>& store, const std::string& phi_x, Var x, Var y, T t);
/// InfoNCE with same-index positives over every row of the batch.
template <class T>
Var registration_loss(Tape<T>& tape, ParamStore<T>& store, const std::string& phi_x, Var f, Var u, T t);

template <class T>
Var classify(Tape<T>& tape, ParamStore<T>& store, Var u, int batch);

// ---------------------------------------------------------------- model

template <class T>
struct Forward {
  Var fl, fg, u, logits;
  Var ce, reg_local, reg_global, loss;  // loss vars are id -1 without labels
};

template <class T>
Forward<T> forward(Tape<T>& tape, ParamStore<T>& store, const ModelConfig& cfg,
                   std::span<const Prepared* const> batch, bool with_loss);

/// Logits for each cloud, rows of `classes` entries.
template <class T>
std::vector<T> predict_logits(ParamStore<T>& store, const ModelConfig& cfg, std::span<const Prepared* const> batch);

// ---------------------------------------------------------------- checkpoint

/// "RIMW", u8 version, u32 header length, JSON header, f32 LE parameters.
void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store, const nlohmann::json& header);
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);
/// Fills `store`, whose names and shapes must match the file (CheckpointMismatch).
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore<float>& store);

}  // namespace riframe::net
