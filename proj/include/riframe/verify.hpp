#pragma once

// Property suites behind `riframe verify`. Each returns the worst residual
// seen against its tolerance.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "riframe/frames.hpp"
#include "riframe/net.hpp"

namespace riframe::verify {

struct SuiteResult {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  long count = 0;     // checks performed
  long failures = 0;  // checks over tolerance (shapes, for the invariance suites)
  double seconds = 0.0;
  bool passed() const { return failures == 0; }
};

nlohmann::json to_json(const SuiteResult& r);

/// Asymmetric test shape i: a jittered member of a family other than
/// plane_cross, stretched so no two PCA axes tie, and mirrored through x = 0 for odd i.
PointCloud generic_shape(int i, int n_points, std::uint64_t seed);

/// ||M(R p) - R M(p)||_F for local frames of random patches.
SuiteResult lrf_equivariance(int patches, int rotations, std::uint64_t seed, const FrameOptions& opt = {});
/// C(R p) = R C(p) R^T for the weighted local covariance.
SuiteResult covariance_conjugation(int patches, std::uint64_t seed);
/// Eigenvectors of R A R^T are R times those of A, up to sign.
SuiteResult eigvec_rotation(int matrices, std::uint64_t seed);
/// (R a) x (R b) = R (a x b).
SuiteResult cross_equivariance(int pairs, std::uint64_t seed);
/// Local and global descriptors of `shapes` generic shapes under random
/// rotations. Point counts are odd so a global sign vote cannot tie at N/2. `failures` counts shapes with any residual over 1e-7.
SuiteResult descriptor_invariance(int shapes, int rotations, std::uint64_t seed, const FrameOptions& opt = {});
/// Relative f64 logit change of a randomly initialized model, tolerance 1e-6.
SuiteResult logit_invariance(int shapes, int rotations, std::uint64_t seed, const net::ModelConfig& cfg);
/// Symmetry, zero diagonal and [0, 180] range of pairwise angles.
SuiteResult angle_metric(int frames, std::uint64_t seed);
/// Correspondence rows sum to 1 within 1e-9.
SuiteResult correspondence_rows(int trials, std::uint64_t seed);
/// Registration loss (B=2, N=4, C=8) against projections and an InfoNCE
/// double loop computed without the tape.
SuiteResult registration_oracle(int trials, std::uint64_t seed);
/// eig_sym3 against cyclic Jacobi: values and reconstruction within 1e-8.
SuiteResult eig_oracle(int matrices, std::uint64_t seed);
/// Central differences for every tape primitive and the composed
/// integration + cross entropy + registration graph; one result each.
std::vector<SuiteResult> gradient_suite(int trials, std::uint64_t seed);

enum class Level { fast, full };

/// Everything above at the level's sizes. Model and frame options come from `cfg`.
std::vector<SuiteResult> run_all(Level level, const net::ModelConfig& cfg, std::uint64_t seed);

}  // namespace riframe::verify
