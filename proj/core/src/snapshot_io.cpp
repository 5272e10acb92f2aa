#include "nsms/snapshot_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nsms/errors.hpp"

namespace nsms {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string padded(const char* prefix, int step) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%08d.csv", prefix, step);
  return buf;
}

std::ofstream open_or_throw(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

}  // namespace

std::string snapshot_name(int step) { return padded("snap", step); }
std::string velocity_snapshot_name(int step) { return padded("vel", step); }

void write_diagnostics_header(std::ostream& os, int n_species) {
  os << "step,time,H,H_star,diss_Bww,diss_sqrtx,eps_norm";
  for (int i = 1; i <= n_species; ++i) os << ",mass_" << i;
  os << ",c_mass,kinetic_energy,max_div,min_rho,max_rho,advection_defect\n";
}

void write_diagnostics_row(std::ostream& os, const DiagnosticsRecord& r) {
  os << r.step << ',' << format_number(r.time) << ',' << format_number(r.H) << ','
     << format_number(r.H_star) << ',' << format_number(r.diss_bww) << ','
     << format_number(r.diss_sqrtx) << ',' << format_number(r.eps_norm);
  for (Eigen::Index i = 0; i < r.masses.size(); ++i) os << ',' << format_number(r.masses(i));
  os << ',' << format_number(r.c_mass) << ',' << format_number(r.kinetic_energy) << ','
     << format_number(r.max_div) << ',' << format_number(r.min_rho) << ','
     << format_number(r.max_rho) << ',' << format_number(r.advection_defect) << '\n';
}

std::string diagnostics_csv(const std::vector<DiagnosticsRecord>& history) {
  std::ostringstream os;
  if (history.empty()) return {};
  write_diagnostics_header(os, static_cast<int>(history.front().masses.size()));
  for (const auto& r : history) write_diagnostics_row(os, r);
  return os.str();
}

void write_species_snapshot(const std::filesystem::path& path, const SpeciesFieldState& state,
                            const Grid& grid) {
  std::ofstream out = open_or_throw(path);
  const auto n1 = state.rho.rows();
  out << (grid.dim() == 2 ? "z,y" : "z");
  for (Eigen::Index i = 1; i <= n1; ++i) out << ",rho_" << i;
  for (Eigen::Index i = 1; i <= n1; ++i) out << ",x_" << i;
  for (Eigen::Index i = 1; i < n1; ++i) out << ",w_" << i;
  out << '\n';
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const int k = grid.index(i, j);
      out << format_number(grid.center(0, i));
      if (grid.dim() == 2) out << ',' << format_number(grid.center(1, j));
      for (Eigen::Index s = 0; s < n1; ++s) out << ',' << format_number(state.rho(s, k));
      for (Eigen::Index s = 0; s < n1; ++s) out << ',' << format_number(state.x(s, k));
      for (Eigen::Index s = 0; s + 1 < n1; ++s) out << ',' << format_number(state.w(s, k));
      out << '\n';
    }
  }
}

void write_velocity_snapshot(const std::filesystem::path& path, const VelocityField& u,
                             const PressureField& p, const Grid& grid) {
  std::ofstream out = open_or_throw(path);
  const Eigen::MatrixXd c = velocity_at_centers(u, grid);
  out << "x,y,u,v,p\n";
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const int k = grid.index(i, j);
      out << format_number(grid.center(0, i)) << ','
          << format_number(grid.dim() == 2 ? grid.center(1, j) : 0.0) << ','
          << format_number(c(k, 0)) << ',' << format_number(grid.dim() == 2 ? c(k, 1) : 0.0)
          << ',' << format_number(p.p.size() ? p.p(k) : 0.0) << '\n';
    }
  }
}

}  // namespace nsms
