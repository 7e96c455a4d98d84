#include "slans/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

#include "slans/error.hpp"

namespace slans {
namespace {

struct PathValues {
  std::vector<double> values;
  bool ok = false;
};

std::vector<McEstimate> collect(const std::vector<std::string>& names, const std::vector<PathValues>& per_path) {
  std::vector<McEstimate> out;
  int failed = 0;
  for (const auto& p : per_path) failed += p.ok ? 0 : 1;
  for (std::size_t s = 0; s < names.size(); ++s) {
    std::vector<double> v;
    for (const auto& p : per_path) {
      if (p.ok) v.push_back(p.values[s]);
    }
    if (v.empty()) throw StepFailure("every Monte Carlo path failed", -1);
    out.push_back(make_estimate(names[s], std::move(v), failed));
  }
  return out;
}

}  // namespace

RunConfig rung_config(const RunConfig& base, const Rung& rung) {
  RunConfig c = base;
  c.n = rung.n;
  c.k = rung.k;
  c.alpha_rule = AlphaRule::kConstant;
  c.alpha = rung.alpha;
  return c;
}

McEstimate make_estimate(std::string name, std::vector<double> values, int failed_paths) {
  if (values.empty()) throw InvalidParameter("an estimate needs at least one sample");
  McEstimate e;
  e.name = std::move(name);
  e.paths = static_cast<int>(values.size());
  e.failed_paths = failed_paths;
  e.flagged = failed_paths > 0.01 * (e.paths + failed_paths);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  e.mean = sum / e.paths;
  if (e.paths > 1) {
    std::vector<double> dev(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) dev[i] = (sorted[i] - e.mean) * (sorted[i] - e.mean);
    std::sort(dev.begin(), dev.end());
    double ss = 0.0;
    for (double d : dev) ss += d;
    e.standard_error = std::sqrt(ss / (e.paths - 1)) / std::sqrt(double(e.paths));
  }
  e.values = std::move(values);
  return e;
}

RegimeSpec RegimeSpec::ladder(const RunConfig& base, int levels, double k_factor) {
  if (levels < 1) throw InvalidParameter("a ladder needs at least one rung");
  RegimeSpec spec;
  spec.regime = base.regime;
  spec.C = base.regime_C;
  spec.L = base.regime_L;
  if (k_factor <= 0.0) k_factor = base.regime == Regime::kAlphaFixed ? 0.25 : 0.5;
  auto mesh = std::make_shared<const Mesh>(triangulate_unit_square(base.n));
  int n = base.n;
  double k = base.k;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      mesh = std::make_shared<const Mesh>(refine_uniform(*mesh));
      n *= 2;
      k *= k_factor;
    }
    Rung r;
    r.n = n;
    r.h = mesh->h_max();
    r.k = k;
    r.alpha = base.alpha_rule == AlphaRule::kConstant ? base.alpha : base.alpha_c * r.h;
    RunConfig c = base;
    c.k = k;
    r.steps = c.num_steps();
    r.mesh = mesh;
    spec.rungs.push_back(std::move(r));
  }
  return spec;
}

void RegimeSpec::validate() const {
  for (std::size_t i = 0; i < rungs.size(); ++i) {
    try {
      validate_regime(regime, rungs[i].k, rungs[i].h, rungs[i].alpha, C, L);
    } catch (const RegimeViolation& e) {
      throw RegimeViolation("rung " + std::to_string(i) + " (n=" + std::to_string(rungs[i].n) + "): " + e.what());
    }
  }
}

void parallel_paths(int n_paths, int workers, const std::function<void(int)>& job) {
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n_paths);
  if (workers <= 1) {
    for (int p = 0; p < n_paths; ++p) job(p);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (int p = next++; p < n_paths; p = next++) {
        try {
          job(p);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<McEstimate> estimate_energy_stats(const RunConfig& config, int n_paths, std::shared_ptr<const Mesh> mesh) {
  if (n_paths < 1) throw InvalidParameter("n_paths must be >= 1");
  const PathContext ctx = mesh ? PathContext::build(config, mesh) : PathContext::build(config);
  const double k = ctx.options.k, nu = ctx.options.nu;
  std::vector<PathValues> per_path(n_paths);
  parallel_paths(n_paths, config.workers, [&](int p) {
    const Trajectory t = run_path(ctx, Model::kLans, static_cast<std::uint64_t>(p), ctx.num_steps);
    if (!t.completed) return;
    double max2 = 0.0, diss = 0.0, jump = 0.0, max4 = 0.0, wjump = 0.0, wdiss = 0.0;
    for (const auto& d : t.diagnostics) {
      max2 = std::max(max2, d.norm_U_alpha_sq);
      max4 = std::max(max4, d.norm_U_alpha_sq * d.norm_U_alpha_sq);
      diss += d.dissipation;
      jump += d.jump_alpha_sq;
      wjump += d.norm_U_alpha_sq * d.jump_alpha_sq;
      wdiss += d.norm_U_alpha_sq * d.dissipation;
    }
    per_path[p].values = {max2, 0.5 * k * nu * diss, 0.25 * jump, max4, 0.25 * wjump, 0.25 * k * nu * wdiss};
    per_path[p].ok = true;
  });
  return collect({"max_U_alpha_sq", "dissipation_sum", "jump_sum", "max_U_alpha_4", "weighted_jump_sum",
                  "weighted_dissipation_sum"},
                 per_path);
}

std::vector<McEstimate> estimate_v_stats(const RunConfig& config, int n_paths, std::shared_ptr<const Mesh> mesh) {
  if (n_paths < 1) throw InvalidParameter("n_paths must be >= 1");
  const PathContext ctx = mesh ? PathContext::build(config, mesh) : PathContext::build(config);
  const double k = ctx.options.k;
  std::vector<PathValues> per_path(n_paths);
  parallel_paths(n_paths, config.workers, [&](int p) {
    const Trajectory t = run_path(ctx, Model::kLans, static_cast<std::uint64_t>(p), ctx.num_steps);
    if (!t.completed) return;
    double ratio = 0.0, sum = 0.0;
    for (const auto& d : t.diagnostics) {
      if (d.norm_U_alpha >= 1e-14) ratio = std::max(ratio, d.norm_V_l2 / d.norm_U_alpha);
      sum += d.norm_V_l2 * d.norm_V_l2;
    }
    per_path[p].values = {ratio, k * sum};
    per_path[p].ok = true;
  });
  return collect({"max_V_over_U_alpha", "V_l2_time_sum"}, per_path);
}

bool non_increasing_within_se(const std::vector<McEstimate>& e, double se_multiple, int allowed_inversions) {
  int inversions = 0;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    if (e[i + 1].mean <= e[i].mean) continue;
    const double se = std::hypot(e[i].standard_error, e[i + 1].standard_error);
    if (e[i + 1].mean - e[i].mean > se_multiple * se || ++inversions > allowed_inversions) return false;
  }
  return true;
}

ComparisonTable compare_lans_nse(const RunConfig& base, const RegimeSpec& ladder, int n_paths, bool nse_lans_form) {
  if (n_paths < 1) throw InvalidParameter("n_paths must be >= 1");
  ladder.validate();
  ComparisonTable table;
  std::vector<McEstimate> diffs;
  for (const Rung& rung : ladder.rungs) {
    const RunConfig cfg = rung_config(base, rung);
    PathContext ctx = PathContext::build(cfg, rung.mesh);
    if (nse_lans_form) ctx.nse = std::make_shared<const NseStepper>(ctx.ops, ctx.options, true);
    const double k = ctx.options.k;
    std::vector<PathValues> per_path(n_paths);
    std::vector<char> matched(n_paths, 1);
    parallel_paths(n_paths, cfg.workers, [&](int p) {
      // Separate samplers per solver; the checksums confirm both consumed the
      // same increments.
      const IncrementSampler s_lans(ctx.noise, p), s_nse(ctx.noise, p);
      PathState a = ctx.lans->initial_state(ctx.U0);
      PathState b = ctx.nse->initial_state(ctx.U0);
      const Vector zero = Vector::Zero(ctx.space->num_velocity_dofs());
      double diff = 0.0, ref = 0.0;
      try {
        for (int m = 1; m <= ctx.num_steps; ++m) {
          const WienerIncrement ia = s_lans.sample(m, k), ib = s_nse.sample(m, k);
          if (ia.checksum() != ib.checksum()) matched[p] = 0;
          const bool noisy = static_cast<bool>(ctx.model.diffusion);
          a = ctx.lans->step(a, ctx.model, noisy ? ctx.realizer->realize(ia) : zero);
          b = ctx.nse->step(b, ctx.model, noisy ? ctx.realizer->realize(ib) : zero);
          const double d = ctx.ops->l2_norm(a.V - b.V);
          const double r = ctx.ops->l2_norm(b.V);
          diff += k * d * d;
          ref += k * r * r;
        }
      } catch (const StepFailure&) {
        return;
      }
      per_path[p].values = {diff, ref > 0.0 ? diff / ref : 0.0};
      per_path[p].ok = true;
    });
    auto est = collect({"lans_nse_difference", "lans_nse_relative"}, per_path);
    ComparisonRow row;
    row.rung = rung;
    row.difference = est[0];
    row.relative = est[1];
    row.increments_match = std::all_of(matched.begin(), matched.end(), [](char c) { return c != 0; });
    diffs.push_back(row.difference);
    table.rows.push_back(std::move(row));
  }
  table.non_increasing = non_increasing_within_se(diffs, 1.0, 1);
  return table;
}

SelfConvergenceTable self_convergence(const RunConfig& base, const RegimeSpec& ladder, int n_paths) {
  if (n_paths < 1) throw InvalidParameter("n_paths must be >= 1");
  if (ladder.rungs.size() < 2) throw InvalidParameter("self-convergence needs at least two rungs");
  ladder.validate();
  const std::size_t levels = ladder.rungs.size();
  const double k_fine = ladder.rungs.back().k;
  std::vector<int> substeps(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    const double r = ladder.rungs[l].k / k_fine;
    substeps[l] = static_cast<int>(std::lround(r));
    if (substeps[l] < 1 || std::abs(r - substeps[l]) > 1e-9 * r) {
      throw InvalidParameter("rung time steps must be integer multiples of the finest one");
    }
  }
  std::vector<PathContext> ctx;
  for (const Rung& rung : ladder.rungs) ctx.push_back(PathContext::build(rung_config(base, rung), rung.mesh));

  // per_path[p].values[l]: difference between rungs l and l+1.
  std::vector<PathValues> per_path(n_paths);
  parallel_paths(n_paths, base.workers, [&](int p) {
    std::vector<double> diffs(levels - 1, 0.0);
    std::vector<Vector> previous;  // rung l-1 states at its time nodes, on rung l-1's mesh
    for (std::size_t l = 0; l < levels; ++l) {
      const PathContext& c = ctx[l];
      std::vector<Vector> current;
      const int ratio = l > 0 ? substeps[l - 1] / substeps[l] : 1;
      const double k_coarse = l > 0 ? ladder.rungs[l - 1].k : 0.0;
      double sum = 0.0;
      const StepObserver observer = [&](const PathState& s, const StepDiagnostics&) {
        if (l + 1 < levels) current.push_back(s.U);
        if (l > 0 && s.step % ratio == 0) {
          const Vector& coarse = previous[s.step / ratio - 1];
          const Vector e = prolongate_velocity(*ctx[l - 1].space, *c.space, coarse) - s.U;
          const double h1 = c.ops->h1_norm(e);
          sum += k_coarse * h1 * h1;
        }
      };
      const Trajectory t = run_path(c, Model::kLans, static_cast<std::uint64_t>(p), c.num_steps, observer, substeps[l]);
      if (!t.completed) return;
      if (l > 0) diffs[l - 1] = std::sqrt(sum);
      previous = std::move(current);
    }
    per_path[p].values = diffs;
    per_path[p].ok = true;
  });

  SelfConvergenceTable table;
  std::vector<std::string> names;
  for (std::size_t l = 0; l + 1 < levels; ++l) names.push_back("selfconv_" + std::to_string(l));
  const auto est = collect(names, per_path);
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    SelfConvergenceRow row;
    row.coarse = ladder.rungs[l];
    row.fine = ladder.rungs[l + 1];
    row.difference = est[l];
    row.difference.name = "selfconv_n" + std::to_string(row.coarse.n) + "_n" + std::to_string(row.fine.n);
    table.rows.push_back(std::move(row));
  }
  // Every successive difference must drop, up to one combined standard error.
  table.decreasing = true;
  for (std::size_t i = 0; i + 1 < est.size(); ++i) {
    const double se = std::hypot(est[i].standard_error, est[i + 1].standard_error);
    if (!(est[i + 1].mean < est[i].mean || (se > 0.0 && est[i + 1].mean - est[i].mean <= se))) {
      table.decreasing = false;
    }
  }
  return table;
}

double infsup_constant(const MixedSpace& space) {
  const int nv = space.num_velocity_dofs(), np = space.num_pressure_dofs();
  std::vector<int> interior;
  for (int d = 0; d < nv; ++d) {
    if (!space.is_dirichlet(d)) interior.push_back(d);
  }
  const int ni = static_cast<int>(interior.size());
  if (ni == 0) return 0.0;
  const DenseMatrix K_full = DenseMatrix(assemble_stiffness(space));
  const DenseMatrix B_full = DenseMatrix(assemble_divergence(space));
  DenseMatrix K(ni, ni), B(np, ni);
  for (int j = 0; j < ni; ++j) {
    for (int i = 0; i < ni; ++i) K(i, j) = K_full(interior[i], interior[j]);
    B.col(j) = B_full.col(interior[j]);
  }
  const DenseMatrix S = B * Eigen::LLT<DenseMatrix>(K).solve(B.transpose());
  const DenseMatrix Mp = DenseMatrix(assemble_pressure_mass(space));
  // Orthonormal basis of the zero-mean pressures.
  const Vector mean = pressure_mean_weights(space);
  Eigen::HouseholderQR<DenseMatrix> qr(DenseMatrix(mean.normalized()));
  const DenseMatrix Q = qr.householderQ();
  const DenseMatrix Z = Q.rightCols(np - 1);
  const DenseMatrix Sz = Z.transpose() * S * Z;
  const DenseMatrix Mz = Z.transpose() * Mp * Z;
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> eig(0.5 * (Sz + Sz.transpose()), 0.5 * (Mz + Mz.transpose()),
                                                            Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  return std::sqrt(std::max(0.0, lmin));
}

std::vector<double> infsup_probe(const std::vector<int>& ns, PairKind pair) {
  std::vector<double> out;
  for (int n : ns) {
    auto mesh = std::make_shared<const Mesh>(triangulate_unit_square(n));
    auto space = pair == PairKind::kTaylorHood ? MixedSpace::taylor_hood(mesh) : MixedSpace::equal_order_p1(mesh);
    out.push_back(infsup_constant(*space));
  }
  return out;
}

}  // namespace slans
