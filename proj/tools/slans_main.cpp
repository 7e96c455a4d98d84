#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slans/config.hpp"
#include "slans/error.hpp"
#include "slans/experiments.hpp"
#include "slans/io.hpp"
#include "slans/mesh.hpp"
#include "slans/stepper.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slans;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<int> workers;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value config file (defaults when omitted)");
  cmd->add_option("--seed", c.seed, "override [noise] seed");
  cmd->add_option("--paths", c.paths, "override [run] paths")->check(CLI::PositiveNumber);
  cmd->add_option("--workers", c.workers, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", c.out, "output directory");
}

RunConfig resolve(const Common& c, std::vector<std::string>& defaults) {
  RunConfig cfg = c.config_path.empty() ? parse_config("", &defaults) : load_config(c.config_path, &defaults);
  auto overridden = [&](const char* key) { std::erase(defaults, std::string(key)); };
  if (c.seed) cfg.seed = *c.seed, overridden("seed");
  if (c.paths) cfg.paths = *c.paths, overridden("paths");
  if (c.workers) cfg.workers = *c.workers, overridden("workers");
  if (!c.out.empty()) cfg.out = c.out, overridden("out");
  validate_config(cfg);
  return cfg;
}

fs::path output_dir(const RunConfig& cfg, const std::string& command) {
  if (!cfg.out.empty()) return cfg.out;
  const char* root = std::getenv("SLANS_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "slans-out") / (command + "-" + config_hash(cfg));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string rung_label(const Rung& r) {
  return "n=" + std::to_string(r.n) + ";k=" + format_double(r.k) + ";alpha=" + format_double(r.alpha);
}

json estimate_json(const McEstimate& e) {
  return {{"statistic", e.name}, {"mean", e.mean},         {"standard_error", e.standard_error},
          {"paths", e.paths},    {"failed_paths", e.failed_paths}, {"flagged", e.flagged}};
}

std::string vtk_name(int m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "state_%06d.vtk", m);
  return buf;
}

int cmd_mesh(int n, bool dump, const std::string& out) {
  const Mesh mesh = triangulate_unit_square(n);
  json j{{"n", n},
         {"cells", mesh.num_cells()},
         {"vertices", mesh.num_vertices()},
         {"edges", mesh.num_edges()},
         {"boundary_edges", mesh.boundary_edges().size()},
         {"h_max", mesh.h_max()},
         {"h_min", mesh.h_min()}};
  if (dump) {
    fs::path dir = out;
    if (dir.empty()) {
      const char* root = std::getenv("SLANS_OUTPUT_ROOT");
      dir = fs::path(root && *root ? root : "slans-out") / ("mesh-n" + std::to_string(n));
    }
    fs::create_directories(dir);
    const fs::path file = dir / "mesh.vtk";
    write_mesh_vtk(mesh, file);
    j["vtk"] = file.string();
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_run(Model model, const Common& common) {
  std::vector<std::string> defaults;
  const RunConfig cfg = resolve(common, defaults);
  const std::string name = model == Model::kLans ? "run-lans" : "run-nse";
  const std::string hash = config_hash(cfg);
  const fs::path dir = output_dir(cfg, name);
  prepare_output_dir(dir, hash);
  RunManifest manifest(dir, cfg, model == Model::kLans ? "run lans" : "run nse");

  auto t0 = std::chrono::steady_clock::now();
  const PathContext ctx = PathContext::build(cfg);
  manifest.begin(ctx.mesh->h_max(), ctx.space->num_velocity_dofs(), ctx.space->num_pressure_dofs());
  manifest.phase("setup", seconds_since(t0));

  t0 = std::chrono::steady_clock::now();
  json paths = json::array();
  bool ok = true;
  std::string message;
  for (int p = 0; p < cfg.paths; ++p) {
    char sub[32];
    std::snprintf(sub, sizeof sub, "path_%03d", p);
    const fs::path pdir = cfg.paths == 1 ? dir : dir / sub;
    fs::create_directories(pdir);
    DiagnosticsCsv csv(pdir / "diagnostics.csv", hash);
    const PathState s0 =
        model == Model::kLans ? ctx.lans->initial_state(ctx.U0) : ctx.nse->initial_state(ctx.U0);
    write_state_vtk(*ctx.space, s0, hash, pdir / vtk_name(0));
    const StepObserver observer = [&](const PathState& s, const StepDiagnostics& d) {
      csv.write(d);
      if (s.step % cfg.stride == 0 || s.step == ctx.num_steps) write_state_vtk(*ctx.space, s, hash, pdir / vtk_name(s.step));
    };
    // States are streamed to disk by the observer; keep the in-memory copy thin.
    const Trajectory t = run_path(ctx, model, static_cast<std::uint64_t>(p), ctx.num_steps, observer);
    json pj{{"path", p}, {"completed", t.completed}, {"steps", t.diagnostics.size()}};
    if (!t.diagnostics.empty()) pj["final_norm_U_alpha"] = t.diagnostics.back().norm_U_alpha;
    if (!t.completed) {
      ok = false;
      pj["error"] = t.error;
      pj["failed_step"] = t.failed_step;
      if (message.empty()) message = "path " + std::to_string(p) + ": " + t.error;
    }
    paths.push_back(pj);
  }
  manifest.phase("integrate", seconds_since(t0));
  manifest.finish(ok, message);

  json j{{"out", dir.string()}, {"config_hash", hash}, {"steps", ctx.num_steps}, {"paths", paths},
         {"defaults_applied", defaults}};
  std::cout << j.dump(2) << '\n';
  if (!ok) throw StepFailure(message, -1);
  return 0;
}

RegimeSpec ladder_for(RunConfig& cfg, Regime required) {
  if (cfg.regime == Regime::kNone) cfg.regime = required;
  if (cfg.regime != required) {
    throw RegimeViolation(std::string("this command needs regime = ") + to_string(required) + ", config has " +
                          to_string(cfg.regime));
  }
  RegimeSpec spec = RegimeSpec::ladder(cfg, cfg.ladder_levels, cfg.ladder_k_factor);
  spec.validate();
  return spec;
}

int cmd_mc(const std::string& what, const Common& common) {
  std::vector<std::string> defaults;
  RunConfig cfg = resolve(common, defaults);
  const std::string name = "mc-" + what;
  std::vector<std::pair<std::string, McEstimate>> rows;
  json summary{{"command", "mc " + what}, {"defaults_applied", defaults}};

  std::optional<RegimeSpec> ladder;
  if (what == "compare") ladder = ladder_for(cfg, Regime::kAlphaLeCh);
  if (what == "selfconv") ladder = ladder_for(cfg, Regime::kAlphaFixed);
  if (what == "energy" && cfg.regime != Regime::kNone) {
    ladder = RegimeSpec::ladder(cfg, cfg.ladder_levels, cfg.ladder_k_factor);
    ladder->validate();
  }

  const std::string hash = config_hash(cfg);
  const fs::path dir = output_dir(cfg, name);
  prepare_output_dir(dir, hash);
  RunManifest manifest(dir, cfg, "mc " + what);
  const Mesh base_mesh = triangulate_unit_square(cfg.n);
  manifest.begin(base_mesh.h_max(), 0, 0);
  const auto t0 = std::chrono::steady_clock::now();

  try {
    if (what == "energy") {
      std::vector<Rung> rungs;
      if (ladder) {
        rungs = ladder->rungs;
      } else {
        Rung r;
        r.n = cfg.n;
        r.h = base_mesh.h_max();
        r.k = cfg.k;
        r.alpha = cfg.resolved_alpha();
        r.steps = cfg.num_steps();
        rungs.push_back(r);
      }
      for (const Rung& r : rungs) {
        const RunConfig rc = ladder ? rung_config(cfg, r) : cfg;
        auto stats = estimate_energy_stats(rc, cfg.paths, r.mesh);
        auto vstats = estimate_v_stats(rc, cfg.paths, r.mesh);
        stats.insert(stats.end(), vstats.begin(), vstats.end());
        for (auto& e : stats) rows.emplace_back(rung_label(r), e);
      }
    } else if (what == "compare") {
      const ComparisonTable table = compare_lans_nse(cfg, *ladder, cfg.paths);
      bool matched = true;
      for (const auto& row : table.rows) {
        rows.emplace_back(rung_label(row.rung), row.difference);
        rows.emplace_back(rung_label(row.rung), row.relative);
        matched = matched && row.increments_match;
      }
      summary["non_increasing"] = table.non_increasing;
      summary["increments_match"] = matched;
    } else {
      const SelfConvergenceTable table = self_convergence(cfg, *ladder, cfg.paths);
      for (const auto& row : table.rows) rows.emplace_back(rung_label(row.coarse) + "|" + rung_label(row.fine), row.difference);
      summary["decreasing"] = table.decreasing;
    }
  } catch (const Error& e) {
    manifest.finish(false, e.what());
    throw;
  }
  manifest.phase("estimate", seconds_since(t0));
  write_estimates_csv(dir / "estimates.csv", hash, rows);
  manifest.finish(true);

  json table = json::array();
  for (const auto& [label, e] : rows) {
    json r = estimate_json(e);
    r["label"] = label;
    table.push_back(r);
  }
  summary["out"] = dir.string();
  summary["config_hash"] = hash;
  summary["rows"] = table;
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_infsup(const std::vector<int>& ns, const std::string& pair, const std::string& out) {
  const PairKind kind = pair == "p1p1" ? PairKind::kEqualOrderP1 : PairKind::kTaylorHood;
  const std::vector<double> beta = infsup_probe(ns, kind);
  json j{{"pair", pair}, {"n", ns}, {"beta", beta}};
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "infsup.csv");
    if (!csv) throw IoError("cannot write " + (fs::path(out) / "infsup.csv").string());
    csv << "pair,n,beta\n";
    for (std::size_t i = 0; i < ns.size(); ++i) csv << pair << ',' << ns[i] << ',' << format_double(beta[i]) << '\n';
    j["csv"] = (fs::path(out) / "infsup.csv").string();
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic LANS-alpha finite element simulator"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  int mesh_n = 0;
  bool mesh_dump = false;
  std::string mesh_out;
  auto* mesh = app.add_subcommand("mesh", "build the structured unit-square mesh");
  mesh->add_option("--n", mesh_n, "cells per side")->required();
  mesh->add_flag("--dump", mesh_dump, "write mesh.vtk");
  mesh->add_option("--out", mesh_out, "output directory for --dump");

  Common run_opts;
  auto* run = app.add_subcommand("run", "integrate sample paths");
  run->require_subcommand(1);
  auto* run_lans = run->add_subcommand("lans", "stochastic LANS-alpha scheme");
  auto* run_nse = run->add_subcommand("nse", "reference stochastic Navier-Stokes scheme");
  add_common(run_lans, run_opts);
  add_common(run_nse, run_opts);

  Common mc_opts;
  auto* mc = app.add_subcommand("mc", "Monte Carlo experiments");
  mc->require_subcommand(1);
  auto* mc_energy = mc->add_subcommand("energy", "a priori energy statistics");
  auto* mc_compare = mc->add_subcommand("compare", "LANS-alpha against NSE down an alpha <= C h ladder");
  auto* mc_selfconv = mc->add_subcommand("selfconv", "fixed-alpha successive refinement differences");
  for (auto* c : {mc_energy, mc_compare, mc_selfconv}) add_common(c, mc_opts);

  std::vector<int> infsup_n{2, 4, 8};
  std::string infsup_pair = "taylor_hood";
  std::string infsup_out;
  auto* probe = app.add_subcommand("probe", "diagnostic probes");
  probe->require_subcommand(1);
  auto* infsup = probe->add_subcommand("infsup", "discrete inf-sup constant per mesh");
  infsup->add_option("--n", infsup_n, "mesh sizes")->delimiter(',');
  infsup->add_option("--pair", infsup_pair, "element pair")->check(CLI::IsMember({"taylor_hood", "p1p1"}));
  infsup->add_option("--out", infsup_out, "directory for infsup.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*mesh) return cmd_mesh(mesh_n, mesh_dump, mesh_out);
    if (*run_lans) return cmd_run(Model::kLans, run_opts);
    if (*run_nse) return cmd_run(Model::kNse, run_opts);
    if (*mc_energy) return cmd_mc("energy", mc_opts);
    if (*mc_compare) return cmd_mc("compare", mc_opts);
    if (*mc_selfconv) return cmd_mc("selfconv", mc_opts);
    if (*infsup) return cmd_infsup(infsup_n, infsup_pair, infsup_out);
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
