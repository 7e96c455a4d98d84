#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slans/fem.hpp"
#include "slans/noise.hpp"

namespace slans {

enum class AlphaRule { kConstant, kTimesH };
enum class DiffusionMode { kZero, kAdditive, kMultiplicative };
enum class SolverKind { kDirect, kIterative };
enum class Regime { kNone, kAlphaLeCh, kAlphaFixed };
enum class InitialCondition { kZero, kVortex };

/// Every physical and numerical parameter of a run. Plain key=value text in
/// four sections ([physics], [discretization], [noise], [run]).
struct RunConfig {
  // [physics]
  double nu = 1.0;
  double T = 1.0;
  AlphaRule alpha_rule = AlphaRule::kTimesH;
  double alpha = 1.0;     // used when alpha_rule = const
  double alpha_c = 1e-3;  // alpha = alpha_c * h_max when alpha_rule = c_times_h
  double f_x = 1.0;
  double f_y = 0.0;
  DiffusionMode g_mode = DiffusionMode::kAdditive;
  double g_scale = 1.0;
  InitialCondition initial = InitialCondition::kZero;
  double initial_scale = 1.0;

  // [discretization]
  int n = 48;
  double k = 1e-3;
  SolverKind solver = SolverKind::kDirect;
  double tol = 1e-12;
  int max_iter = 200;
  ConvectionForm convection = ConvectionForm::kSkew;

  // [noise]
  int noise_M = 10;
  std::uint64_t seed = 20240101;
  NoiseRealization noise_realization = NoiseRealization::kInterpolate;

  // [run]
  int paths = 1;
  int stride = 100;
  std::string out;
  Regime regime = Regime::kNone;
  double regime_C = 1.0;
  double regime_L = 0.95;
  int ladder_levels = 3;
  double ladder_k_factor = 0.0;  // 0: regime default (1/2 or 1/4 per rung)
  bool check_filter = false;
  int workers = 0;  // 0: hardware concurrency

  bool operator==(const RunConfig&) const = default;

  int num_steps() const;
  double h_max() const;  // realized mesh size of the structured mesh
  double resolved_alpha() const;
};

/// Parses config text; unknown keys, non-integer T/k, and regime violations
/// raise ConfigError / RegimeViolation. `applied_defaults` (optional) receives
/// the keys left at their defaults.
RunConfig parse_config(const std::string& text, std::vector<std::string>* applied_defaults = nullptr);
RunConfig load_config(const std::string& path, std::vector<std::string>* applied_defaults = nullptr);

/// Canonical text form; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);

/// FNV-1a hash of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Checks T = M k, alpha in (0,1], and the regime inequalities.
void validate_config(const RunConfig& config);

/// Checks one rung (k, h, alpha) against a regime; throws RegimeViolation
/// naming the violated inequality.
void validate_regime(Regime regime, double k, double h, double alpha, double C, double L);

const char* to_string(AlphaRule v);
const char* to_string(DiffusionMode v);
const char* to_string(SolverKind v);
const char* to_string(Regime v);
const char* to_string(InitialCondition v);
const char* to_string(ConvectionForm v);
const char* to_string(NoiseRealization v);

}  // namespace slans
