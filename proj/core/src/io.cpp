#include "fwf/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fwf {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "snapshot binaries are written in host order, which must be little endian");

std::vector<fs::path> write_snapshot(const fs::path& stem, const Coupling& rho) {
  std::vector<fs::path> out;
  const fs::path bin = fs::path(stem).concat(".bin");
  const fs::path side = fs::path(stem).concat(".json");
  {
    std::ofstream f(bin, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + bin.string());
    f.write(reinterpret_cast<const char*>(rho.r.data()),
            static_cast<std::streamsize>(rho.r.size() * sizeof(double)));
  }
  json j = {{"m", rho.m},
            {"n", rho.n},
            {"dtype", "f64"},
            {"endianness", "little"},
            {"layout", "row-major, species fastest"},
            {"binary", bin.filename().string()}};
  {
    std::ofstream f(side);
    if (!f) throw std::runtime_error("cannot write " + side.string());
    f << j.dump(2) << "\n";
  }
  out.push_back(side);
  out.push_back(bin);
  if (static_cast<long>(rho.m) * rho.n <= 65536) {
    const fs::path csv = fs::path(stem).concat(".csv");
    std::ofstream f(csv);
    char buf[32];
    for (int i = 0; i < rho.m; ++i) {
      for (int jj = 0; jj < rho.n; ++jj) {
        std::snprintf(buf, sizeof buf, "%.17g", rho(i, jj));
        f << (jj ? "," : "") << buf;
      }
      f << "\n";
    }
    out.push_back(csv);
  }
  return out;
}

Coupling read_snapshot(const fs::path& sidecar) {
  std::ifstream f(sidecar);
  if (!f) throw ValidationError("snapshot: cannot open " + sidecar.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError("snapshot: " + sidecar.string() + ": " + e.what());
  }
  try {
    if (j.at("dtype") != "f64" || j.at("endianness") != "little" ||
        j.at("layout") != "row-major, species fastest")
      throw ValidationError("snapshot: unsupported format in " + sidecar.string());
    const int m = j.at("m"), n = j.at("n");
    if (m < 1 || n < 1) throw ValidationError("snapshot: bad shape");
    fs::path bin = j.contains("binary") ? fs::path(j["binary"].get<std::string>())
                                        : fs::path(sidecar).replace_extension(".bin").filename();
    bin = sidecar.parent_path() / bin;
    Coupling c(m, n);
    std::ifstream b(bin, std::ios::binary);
    if (!b) throw ValidationError("snapshot: cannot open " + bin.string());
    b.read(reinterpret_cast<char*>(c.r.data()), static_cast<std::streamsize>(c.r.size() * sizeof(double)));
    if (b.gcount() != static_cast<std::streamsize>(c.r.size() * sizeof(double)))
      throw ValidationError("snapshot: " + bin.string() + " is truncated");
    return c;
  } catch (const json::exception& e) {
    throw ValidationError("snapshot: " + sidecar.string() + ": " + e.what());
  }
}

fs::path write_pressure_csv(const fs::path& file, const Grid1D& grid, const std::vector<double>& pi) {
  std::ofstream f(file);
  if (!f) throw std::runtime_error("cannot write " + file.string());
  f << "x,pi\n";
  char buf[64];
  for (int i = 0; i < grid.m; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", grid.x[i], pi[i]);
    f << buf << "\n";
  }
  return file;
}

std::uint64_t fnv1a_file(const fs::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + file.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 14];
  while (f) {
    f.read(buf, sizeof buf);
    for (std::streamsize k = 0; k < f.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string time_label(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", t);
  return buf;
}

}  // namespace fwf
