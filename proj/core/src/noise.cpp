#include "slans/noise.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>

#include "slans/error.hpp"
#include "slans/operators.hpp"

namespace slans {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

NoiseModel::NoiseModel(int truncation_modes, std::uint64_t seed_value) : truncation(truncation_modes), seed(seed_value) {
  if (truncation < 1) throw InvalidParameter("noise truncation must be >= 1");
}

double NoiseModel::eigenfunction(int i, int j, double x, double y) {
  return 2.0 * std::sin(i * std::numbers::pi * x) * std::sin(j * std::numbers::pi * y);
}

double NoiseModel::trace_per_component() const {
  double sum = 0.0;
  for (int i = 1; i <= truncation; ++i) {
    for (int j = 1; j <= truncation; ++j) sum += eigenvalue(i, j);
  }
  return sum;
}

double WienerIncrement::norm_squared() const {
  double sum = 0.0;
  for (double c : coefficients) sum += c * c;
  return sum;
}

std::uint64_t WienerIncrement::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(draws.data());
  for (std::size_t i = 0; i < draws.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

IncrementSampler::IncrementSampler(NoiseModel model, std::uint64_t path_id, int substeps)
    : model_(model), path_id_(path_id), substeps_(substeps) {
  if (model_.truncation < 1) throw InvalidParameter("noise truncation must be >= 1");
  if (substeps < 1) throw InvalidParameter("substeps must be >= 1");
}

void IncrementSampler::fine_draws(std::int64_t fine_step, std::vector<double>& out) const {
  std::uint64_t key = splitmix64(model_.seed);
  key = splitmix64(key ^ path_id_);
  key = splitmix64(key ^ static_cast<std::uint64_t>(fine_step));
  std::mt19937_64 gen(key);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.resize(model_.num_draws());
  for (double& d : out) d = normal(gen);
}

WienerIncrement IncrementSampler::sample(int m, double k) const {
  if (m < 1) throw InvalidParameter("increment step index must be >= 1");
  if (!(k >= 0.0)) throw InvalidParameter("time step must be non-negative");
  WienerIncrement inc;
  inc.step = m;
  inc.k = k;
  if (substeps_ == 1) {
    fine_draws(m, inc.draws);
  } else {
    inc.draws.assign(model_.num_draws(), 0.0);
    std::vector<double> fine;
    const std::int64_t first = static_cast<std::int64_t>(m - 1) * substeps_ + 1;
    for (int s = 0; s < substeps_; ++s) {
      fine_draws(first + s, fine);
      for (std::size_t i = 0; i < fine.size(); ++i) inc.draws[i] += fine[i];
    }
    const double scale = 1.0 / std::sqrt(double(substeps_));
    for (double& d : inc.draws) d *= scale;
  }
  const int mt = model_.truncation;
  inc.coefficients.resize(inc.draws.size());
  const double sk = std::sqrt(k);
  for (int c = 0; c < 2; ++c) {
    for (int i = 1; i <= mt; ++i) {
      for (int j = 1; j <= mt; ++j) {
        const std::size_t idx = (static_cast<std::size_t>(c) * mt + (i - 1)) * mt + (j - 1);
        inc.coefficients[idx] = sk * std::sqrt(NoiseModel::eigenvalue(i, j)) * inc.draws[idx];
      }
    }
  }
  return inc;
}

WienerIncrement sample_increment(const NoiseModel& model, int m, double k) {
  return IncrementSampler(model, 0).sample(m, k);
}

NoiseRealizer::NoiseRealizer(std::shared_ptr<const MixedSpace> space, int truncation, NoiseRealization mode,
                             std::shared_ptr<const DiscreteOperators> ops)
    : space_(std::move(space)), truncation_(truncation), mode_(mode), ops_(std::move(ops)) {
  if (!space_) throw InvalidParameter("NoiseRealizer: null space");
  if (truncation < 1) throw InvalidParameter("noise truncation must be >= 1");
  if (mode == NoiseRealization::kProject && !ops_) {
    throw InvalidParameter("projected noise realization needs discrete operators");
  }
  const auto& nodes = space_->velocity_scalar().nodes();
  sin_x_.resize(nodes.size() * truncation);
  sin_y_.resize(nodes.size() * truncation);
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    for (int i = 1; i <= truncation; ++i) {
      sin_x_[n * truncation + i - 1] = std::sin(i * std::numbers::pi * nodes[n].x);
      sin_y_[n * truncation + i - 1] = std::sin(i * std::numbers::pi * nodes[n].y);
    }
  }
}

Vector NoiseRealizer::realize(const WienerIncrement& increment) const {
  const int mt = truncation_;
  if (increment.coefficients.size() != static_cast<std::size_t>(2 * mt * mt)) {
    throw DimensionMismatch("increment truncation does not match the realizer");
  }
  const int ns = space_->velocity_scalar().num_dofs();
  if (mode_ == NoiseRealization::kProject) {
    const auto field = [&](double x, double y) -> std::array<double, 2> {
      std::array<double, 2> v{0.0, 0.0};
      for (int c = 0; c < 2; ++c) {
        for (int i = 1; i <= mt; ++i) {
          const double sx = std::sin(i * std::numbers::pi * x);
          for (int j = 1; j <= mt; ++j) {
            v[c] += increment.coefficients[(static_cast<std::size_t>(c) * mt + i - 1) * mt + j - 1] * 2.0 * sx *
                    std::sin(j * std::numbers::pi * y);
          }
        }
      }
      return v;
    };
    return ops_->l2_project(field, ProjectionTarget::kVelocitySpace);
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> sx(sin_x_.data(), ns, mt);
  const Eigen::Map<const RowMat> sy(sin_y_.data(), ns, mt);
  Vector out(2 * ns);
  for (int c = 0; c < 2; ++c) {
    const Eigen::Map<const RowMat> coef(increment.coefficients.data() + static_cast<std::size_t>(c) * mt * mt, mt, mt);
    const RowMat t = sx * coef;
    out.segment(c * ns, ns) = 2.0 * t.cwiseProduct(sy).rowwise().sum();
  }
  zero_dirichlet(out, *space_);
  return out;
}

MomentReport check_moment_bound(const NoiseModel& model, double k, int r, int n_samples) {
  if (r < 1 || r > 3) throw InvalidParameter("moment order r must be 1, 2 or 3");
  if (n_samples < 2) throw InvalidParameter("moment check needs at least 2 samples");
  if (!(k > 0.0)) throw InvalidParameter("time step must be positive");
  const IncrementSampler sampler(model, 0);
  MomentReport rep;
  rep.r = r;
  rep.k = k;
  rep.samples = n_samples;
  double sum = 0.0, sum_sq = 0.0;
  for (int s = 1; s <= n_samples; ++s) {
    const double x = std::pow(sampler.sample(s, k).norm_squared(), r);
    sum += x;
    sum_sq += x * x;
  }
  const double n = n_samples;
  rep.empirical = sum / n;
  const double var = std::max(0.0, (sum_sq - n * rep.empirical * rep.empirical) / (n - 1.0));
  rep.standard_error = std::sqrt(var / n);
  double double_factorial = 1.0;
  for (int f = 2 * r - 1; f > 1; f -= 2) double_factorial *= f;
  rep.first_moment = k * model.trace();
  rep.bound = double_factorial * std::pow(rep.first_moment, r);
  rep.within_bound = rep.empirical <= rep.bound + 3.0 * rep.standard_error;
  rep.matches_first_moment = r == 1 && std::abs(rep.empirical - rep.first_moment) <= 3.0 * rep.standard_error;
  return rep;
}

void write_draws_csv(const NoiseModel& model, std::uint64_t path_id, int num_steps, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "step,component,i,j,xi\n" << std::setprecision(17);
  const IncrementSampler sampler(model, path_id);
  const int mt = model.truncation;
  for (int m = 1; m <= num_steps; ++m) {
    const WienerIncrement inc = sampler.sample(m, 1.0);
    for (int c = 0; c < 2; ++c) {
      for (int i = 1; i <= mt; ++i) {
        for (int j = 1; j <= mt; ++j) {
          out << m << ',' << c + 1 << ',' << i << ',' << j << ','
              << inc.draws[(static_cast<std::size_t>(c) * mt + i - 1) * mt + j - 1] << '\n';
        }
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace slans
