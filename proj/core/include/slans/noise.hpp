#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "slans/fem.hpp"

namespace slans {

class DiscreteOperators;

/// Truncated spectral model of a two-component Q-Wiener process on (0,1)^2:
/// eigenfunctions e_ij = 2 sin(i pi x) sin(j pi y) and eigenvalues
/// 1 / (i + j)^2 for i, j = 1..truncation, identical for both components.
struct NoiseModel {
  int truncation = 10;
  std::uint64_t seed = 0;

  NoiseModel() = default;
  NoiseModel(int truncation_modes, std::uint64_t seed_value);

  static double eigenvalue(int i, int j) { return 1.0 / double((i + j) * (i + j)); }
  static double eigenfunction(int i, int j, double x, double y);

  int modes_per_component() const { return truncation * truncation; }
  int num_draws() const { return 2 * modes_per_component(); }
  /// Sum of the retained eigenvalues of one component.
  double trace_per_component() const;
  /// Truncated trace of Q for the pair (W_1, W_2).
  double trace() const { return 2.0 * trace_per_component(); }
};

/// One increment W(t_m) - W(t_{m-1}). Draws are laid out as
/// [component][i-1][j-1]; coefficients are sqrt(k lambda_ij) xi_ij.
struct WienerIncrement {
  int step = 0;
  double k = 0.0;
  std::vector<double> draws;
  std::vector<double> coefficients;

  /// ||dW||_K^2 with K identified with L^2 (orthonormal eigenfunctions).
  double norm_squared() const;
  /// FNV-1a hash of the draw bytes; used to verify common random numbers.
  std::uint64_t checksum() const;
};

/// Counter-based sampler: the draws for (seed, path, fine step) are a pure
/// function of those three integers, so paths and steps can be generated in
/// any order. With `substeps` > 1 each increment is the sum of that many
/// consecutive fine increments, which couples a coarse time grid to a fine
/// one on the same Brownian path.
class IncrementSampler {
 public:
  IncrementSampler(NoiseModel model, std::uint64_t path_id, int substeps = 1);

  const NoiseModel& model() const { return model_; }
  int substeps() const { return substeps_; }

  /// Increment over step m >= 1 of size k.
  WienerIncrement sample(int m, double k) const;

 private:
  void fine_draws(std::int64_t fine_step, std::vector<double>& out) const;

  NoiseModel model_;
  std::uint64_t path_id_;
  int substeps_;
};

/// Convenience for path 0 without substeps.
WienerIncrement sample_increment(const NoiseModel& model, int m, double k);

enum class NoiseRealization { kInterpolate, kProject };

/// Turns spectral increments into discrete velocity fields. Sine tables are
/// precomputed at the velocity nodes.
class NoiseRealizer {
 public:
  NoiseRealizer(std::shared_ptr<const MixedSpace> space, int truncation,
                NoiseRealization mode = NoiseRealization::kInterpolate,
                std::shared_ptr<const DiscreteOperators> ops = nullptr);

  Vector realize(const WienerIncrement& increment) const;

 private:
  std::shared_ptr<const MixedSpace> space_;
  int truncation_;
  NoiseRealization mode_;
  std::shared_ptr<const DiscreteOperators> ops_;
  std::vector<double> sin_x_;  // [node][i]
  std::vector<double> sin_y_;  // [node][j]
};

struct MomentReport {
  int r = 1;
  double k = 0.0;
  int samples = 0;
  double empirical = 0.0;       // mean of ||dW||^{2r}
  double standard_error = 0.0;
  double bound = 0.0;           // (2r-1)!! k^r (Tr Q)^r
  double first_moment = 0.0;    // k Tr Q, the exact value for r = 1
  bool within_bound = false;    // empirical <= bound + 3 SE
  bool matches_first_moment = false;  // r = 1: |empirical - k Tr Q| <= 3 SE
};

/// Monte Carlo check of E||W(t)-W(s)||^{2r} <= (2r-1)!! (t-s)^r (Tr Q)^r.
MomentReport check_moment_bound(const NoiseModel& model, double k, int r, int n_samples);

/// Raw draws of steps 1..num_steps as CSV (step, component, i, j, xi).
void write_draws_csv(const NoiseModel& model, std::uint64_t path_id, int num_steps,
                     const std::filesystem::path& path);

}  // namespace slans
