#include "slans/io.hpp"

#include <charconv>
#include <chrono>
#include <ctime>

#include "json.hpp"

#include "slans/error.hpp"

#ifndef SLANS_VERSION
#define SLANS_VERSION "0.0.0"
#endif
#ifndef SLANS_GIT_DESCRIBE
#define SLANS_GIT_DESCRIBE "unknown"
#endif

namespace slans {
namespace {

std::ofstream open_for_writing(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const char* version_string() { return SLANS_VERSION; }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_state_vtk(const MixedSpace& space, const PathState& state, const std::string& config_hash,
                     const std::filesystem::path& path) {
  const ScalarSpace& vs = space.velocity_scalar();
  if (vs.degree() != 2) throw InvalidParameter("VTK snapshots require the P2 velocity space");
  const Mesh& mesh = space.mesh();
  const int ns = vs.num_dofs(), nvert = static_cast<int>(mesh.num_vertices());
  for (const Vector* v : {&state.U, &state.V}) {
    if (v->size() != 2 * ns) throw SpaceMismatch("state velocity does not match the space");
  }
  for (const Vector* p : {&state.P, &state.P_tilde}) {
    if (p->size() != space.num_pressure_dofs()) throw SpaceMismatch("state pressure does not match the space");
  }
  std::ofstream out = open_for_writing(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "slans step " << state.step << " t=" << format_double(state.t) << " config=" << config_hash << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << ns << " double\n";
  for (const Point& p : vs.nodes()) out << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
  out << "CELLS " << mesh.num_cells() << ' ' << 7 * mesh.num_cells() << '\n';
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto d = vs.cell_dofs(c);
    out << 6;
    for (int i = 0; i < 6; ++i) out << ' ' << d[i];
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) out << "22\n";
  out << "POINT_DATA " << ns << '\n';
  for (const auto& [name, v] : {std::pair<const char*, const Vector*>{"U", &state.U}, {"V", &state.V}}) {
    out << "VECTORS " << name << " double\n";
    for (int i = 0; i < ns; ++i) out << format_double((*v)[i]) << ' ' << format_double((*v)[ns + i]) << " 0\n";
  }
  for (const auto& [name, p] : {std::pair<const char*, const Vector*>{"Pi", &state.P}, {"Pi_tilde", &state.P_tilde}}) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < nvert; ++i) out << format_double((*p)[i]) << '\n';
    for (const auto& e : mesh.edges()) out << format_double(0.5 * ((*p)[e[0]] + (*p)[e[1]])) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

const char* DiagnosticsCsv::header() {
  return "m,t,norm_U_alpha,norm_V_l2,norm_grad_U,norm_lap_U,div_residual_U,div_residual_V,solver_residual,"
         "solver_iterations,energy_defect,filter_residual,increment_norm_squared,increment_checksum,wall_time";
}

DiagnosticsCsv::DiagnosticsCsv(const std::filesystem::path& path, const std::string& config_hash)
    : out_(open_for_writing(path)) {
  out_ << "# config_hash=" << config_hash << '\n' << header() << '\n';
}

void DiagnosticsCsv::write(const StepDiagnostics& d) {
  out_ << d.m << ',' << format_double(d.t) << ',' << format_double(d.norm_U_alpha) << ','
       << format_double(d.norm_V_l2) << ',' << format_double(d.norm_grad_U) << ',' << format_double(d.norm_lap_U)
       << ',' << format_double(d.div_residual_U) << ',' << format_double(d.div_residual_V) << ','
       << format_double(d.solver_residual) << ',' << d.solver_iterations << ',' << format_double(d.energy_defect)
       << ',' << format_double(d.filter_residual) << ',' << format_double(d.increment_norm_squared) << ','
       << d.increment_checksum << ',' << format_double(d.wall_time) << '\n';
  if (!out_) throw IoError("failed writing diagnostics");
}

void write_estimates_csv(const std::filesystem::path& path, const std::string& config_hash,
                         const std::vector<std::pair<std::string, McEstimate>>& rows) {
  std::ofstream out = open_for_writing(path);
  out << "# config_hash=" << config_hash << '\n';
  out << "label,statistic,mean,standard_error,paths,failed_paths,flagged\n";
  for (const auto& [label, e] : rows) {
    out << label << ',' << e.name << ',' << format_double(e.mean) << ',' << format_double(e.standard_error) << ','
        << e.paths << ',' << e.failed_paths << ',' << (e.flagged ? "true" : "false") << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void prepare_output_dir(const std::filesystem::path& dir, const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / "manifest.jsonl";
  if (!std::filesystem::exists(manifest)) return;
  std::ifstream in(manifest);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("config_hash")) continue;
    const std::string other = j["config_hash"].get<std::string>();
    if (other != config_hash) {
      throw ConfigError("output directory " + dir.string() + " holds results of config " + other +
                        "; refusing to mix with config " + config_hash);
    }
  }
}

RunManifest::RunManifest(std::filesystem::path dir, const RunConfig& config, std::string command)
    : dir_(std::move(dir)), config_(config), command_(std::move(command)), hash_(config_hash(config)) {
  path_ = dir_ / "manifest.jsonl";
}

void RunManifest::append(const std::string& line) {
  std::filesystem::create_directories(dir_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to " + path_.string());
  out << line << '\n';
}

void RunManifest::begin(double h_max, int velocity_dofs, int pressure_dofs) {
  nlohmann::json j;
  j["event"] = "begin";
  j["time"] = timestamp();
  j["command"] = command_;
  j["config_hash"] = hash_;
  j["seed"] = config_.seed;
  j["version"] = version_string();
  j["git_describe"] = SLANS_GIT_DESCRIBE;
  j["config"] = render_config(config_);
  j["h_max"] = h_max;
  j["velocity_dofs"] = velocity_dofs;
  j["pressure_dofs"] = pressure_dofs;
  append(j.dump());
}

void RunManifest::phase(const std::string& name, double seconds) {
  nlohmann::json j;
  j["event"] = "phase";
  j["config_hash"] = hash_;
  j["name"] = name;
  j["seconds"] = seconds;
  append(j.dump());
}

void RunManifest::finish(bool ok, const std::string& message) {
  nlohmann::json j;
  j["event"] = "finish";
  j["time"] = timestamp();
  j["config_hash"] = hash_;
  j["ok"] = ok;
  if (!message.empty()) j["message"] = message;
  append(j.dump());
}

}  // namespace slans
