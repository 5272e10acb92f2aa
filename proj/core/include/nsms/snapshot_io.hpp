#pragma once

// Plain-text CSV output. Numbers are written in shortest round-trip form so
// that identical runs produce byte-identical files.

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "nsms/coupled.hpp"

namespace nsms {

std::string format_number(double value);

/// "snap_00000042.csv"
std::string snapshot_name(int step);
/// "vel_00000042.csv"
std::string velocity_snapshot_name(int step);

void write_diagnostics_header(std::ostream& os, int n_species);
void write_diagnostics_row(std::ostream& os, const DiagnosticsRecord& r);
std::string diagnostics_csv(const std::vector<DiagnosticsRecord>& history);

/// One row per cell: z[,y], rho_1..rho_{N+1}, x_1..x_{N+1}, w_1..w_N.
void write_species_snapshot(const std::filesystem::path& path, const SpeciesFieldState& state,
                            const Grid& grid);
/// One row per cell: x, y, u, v (interpolated to the center), p.
void write_velocity_snapshot(const std::filesystem::path& path, const VelocityField& u,
                             const PressureField& p, const Grid& grid);

}  // namespace nsms
