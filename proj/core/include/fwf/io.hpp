#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fwf/grid.hpp"

namespace fwf {

// Files written for a snapshot stem "dir/name": name.json (sidecar), name.bin, and
// name.csv when m*n <= 65536. Returns the written paths.
std::vector<std::filesystem::path> write_snapshot(const std::filesystem::path& stem,
                                                  const Coupling& rho);
Coupling read_snapshot(const std::filesystem::path& sidecar);

std::filesystem::path write_pressure_csv(const std::filesystem::path& file, const Grid1D& grid,
                                         const std::vector<double>& pi);

std::uint64_t fnv1a_file(const std::filesystem::path& file);
std::string hex64(std::uint64_t v);

// Stable, file-name friendly time label: 2.5 -> "2.5", 10 -> "10".
std::string time_label(double t);

}  // namespace fwf
