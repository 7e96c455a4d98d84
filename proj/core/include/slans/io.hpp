#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "slans/config.hpp"
#include "slans/experiments.hpp"
#include "slans/fem.hpp"
#include "slans/stepper.hpp"

namespace slans {

/// Shortest decimal that round-trips the double.
std::string format_double(double v);

/// Legacy ASCII VTK snapshot on quadratic triangles (cell type 22). Points
/// are the vertices followed by the edge midpoints; point data, in order:
/// vectors U, vectors V, scalars Pi, scalars Pi_tilde (pressures are P1 and
/// evaluated at midpoints by linear interpolation).
void write_state_vtk(const MixedSpace& space, const PathState& state, const std::string& config_hash,
                     const std::filesystem::path& path);

/// diagnostics.csv writer; one row per step.
class DiagnosticsCsv {
 public:
  DiagnosticsCsv(const std::filesystem::path& path, const std::string& config_hash);
  void write(const StepDiagnostics& d);

  static const char* header();

 private:
  std::ofstream out_;
};

/// estimates.csv: one row per (rung, statistic).
void write_estimates_csv(const std::filesystem::path& path, const std::string& config_hash,
                         const std::vector<std::pair<std::string, McEstimate>>& rows);

/// Refuses to reuse a directory whose manifest names another config hash;
/// creates the directory otherwise.
void prepare_output_dir(const std::filesystem::path& dir, const std::string& config_hash);

/// Appends one JSON object per line to manifest.jsonl.
class RunManifest {
 public:
  RunManifest(std::filesystem::path dir, const RunConfig& config, std::string command);

  /// Writes the opening record (config echo, hash, seed, version).
  void begin(double h_max, int velocity_dofs, int pressure_dofs);
  void phase(const std::string& name, double seconds);
  /// Writes the closing record with status and timings.
  void finish(bool ok, const std::string& message = "");

  const std::filesystem::path& path() const { return path_; }

 private:
  void append(const std::string& line);

  std::filesystem::path dir_;
  std::filesystem::path path_;
  RunConfig config_;
  std::string command_;
  std::string hash_;
};

/// Library version string (also used as the git-describe fallback).
const char* version_string();

}  // namespace slans
