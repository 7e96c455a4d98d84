#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "slans/config.hpp"
#include "slans/mesh.hpp"
#include "slans/stepper.hpp"

namespace slans {

/// Monte Carlo sample mean with standard error sd / sqrt(N).
struct McEstimate {
  std::string name;
  double mean = 0.0;
  double standard_error = 0.0;
  int paths = 0;
  int failed_paths = 0;
  /// Set when more than 1% of the paths failed.
  bool flagged = false;
  std::vector<double> values;
};

/// Order-independent estimate: values are sorted before summation so the
/// result does not depend on which worker produced which sample.
McEstimate make_estimate(std::string name, std::vector<double> values, int failed_paths = 0);

struct Rung {
  int n = 0;
  double h = 0.0;
  double k = 0.0;
  double alpha = 0.0;
  int steps = 0;
  std::shared_ptr<const Mesh> mesh;
};

/// A refinement ladder of (k, h, alpha) triples under one coupling regime.
/// Meshes are nested: each rung refines the previous one.
struct RegimeSpec {
  Regime regime = Regime::kNone;
  double C = 1.0;  // alpha <= C h
  double L = 0.95; // sqrt(k)/h < L <= alpha
  std::vector<Rung> rungs;

  /// Builds `levels` rungs from the base config: h halves per rung, k is
  /// multiplied by `k_factor` (1/2 for alpha <= C h, 1/4 for fixed alpha when
  /// 0), alpha follows the config's alpha rule.
  static RegimeSpec ladder(const RunConfig& base, int levels, double k_factor = 0.0);

  /// Throws RegimeViolation if any rung breaks the regime's inequality.
  void validate() const;
};

/// The base config specialized to one rung (alpha frozen to the rung's value).
RunConfig rung_config(const RunConfig& base, const Rung& rung);

/// Runs `n_paths` jobs on a pool of `workers` threads (0: hardware
/// concurrency). Results must be written to per-path slots.
void parallel_paths(int n_paths, int workers, const std::function<void(int)>& job);

/// A priori statistics of the filtered velocity:
///   max_m ||U^m||_alpha^2, (k nu / 2) sum (||grad U||^2 + alpha^2 ||lap_h U||^2),
///   1/4 sum ||U^m - U^{m-1}||_alpha^2, and the fourth-moment analogues.
std::vector<McEstimate> estimate_energy_stats(const RunConfig& config, int n_paths,
                                              std::shared_ptr<const Mesh> mesh = nullptr);

/// max_m ||V^m||_L2 / ||U^m||_alpha (steps with ||U^m||_alpha < 1e-14 are
/// skipped) and k sum ||V^m||_L2^2.
std::vector<McEstimate> estimate_v_stats(const RunConfig& config, int n_paths,
                                         std::shared_ptr<const Mesh> mesh = nullptr);

struct ComparisonRow {
  Rung rung;
  McEstimate difference;     // k sum ||V_lans^m - v_nse^m||_L2^2
  McEstimate relative;       // difference / k sum ||v_nse^m||^2
  bool increments_match = true;  // both solvers consumed identical noise
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  bool non_increasing = false;
};

/// LANS-alpha against the reference NSE scheme on each rung, with common
/// random numbers per path. `nse_lans_form` switches the NSE transport term
/// to the LANS form (used with alpha = 0 as a consistency check).
ComparisonTable compare_lans_nse(const RunConfig& base, const RegimeSpec& ladder, int n_paths,
                                 bool nse_lans_form = false);

struct SelfConvergenceRow {
  Rung coarse;
  Rung fine;
  McEstimate difference;  // ||U_coarse - U_fine||_{L2(0,T;H1)} on coarse time nodes
};

struct SelfConvergenceTable {
  std::vector<SelfConvergenceRow> rows;
  bool decreasing = false;
};

/// Successive-refinement differences along a ladder. All rungs are driven by
/// the same Brownian path (coarse increments sum fine ones).
SelfConvergenceTable self_convergence(const RunConfig& base, const RegimeSpec& ladder, int n_paths);

/// Non-increasing sequence of estimates, tolerating `allowed_inversions`
/// increases each no larger than `se_multiple` combined standard errors.
bool non_increasing_within_se(const std::vector<McEstimate>& estimates, double se_multiple = 1.0,
                              int allowed_inversions = 1);

enum class PairKind { kTaylorHood, kEqualOrderP1 };

/// Discrete inf-sup constant: the square root of the smallest nonzero
/// eigenvalue of B K^{-1} B^T q = beta^2 M_p q on zero-mean pressures.
double infsup_constant(const MixedSpace& space);
std::vector<double> infsup_probe(const std::vector<int>& ns, PairKind pair = PairKind::kTaylorHood);

}  // namespace slans
