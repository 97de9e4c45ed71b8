#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pdeloop/numerics.hpp"
#include "pdeloop/spectral.hpp"

namespace pdeloop {

/// Uniform space-time grid. The horizon must be a whole number of steps.
struct Grid {
  int n_z = 201;
  double dt = 1e-3;
  double T = 1.0;

  int steps() const {
    validate();
    return static_cast<int>(std::llround(T / dt));
  }

  std::vector<double> nodes() const { return uniform_nodes(n_z); }
  double dz() const { return 1.0 / (n_z - 1); }

  void validate() const {
    if (n_z < 3) throw std::invalid_argument("Grid: n_z must be >= 3");
    if (!(dt > 0.0)) throw std::invalid_argument("Grid: dt must be > 0");
    if (!(T > 0.0)) throw std::invalid_argument("Grid: T must be > 0");
    const double m = T / dt;
    if (std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m))
      throw std::invalid_argument("Grid: T must be a multiple of dt");
  }
};

/// Time-indexed pair of profiles with per-sample norms.
struct Trajectory {
  std::string loop;    // "A" or "B"
  std::string solver;  // "spectral", "fd", "picard"
  std::vector<double> z;
  std::vector<double> t;
  std::vector<std::vector<double>> u1;
  std::vector<std::vector<double>> u2;
  std::vector<double> sup_u1;
  std::vector<double> sup_u2;
  std::vector<double> wnorm_u1;
  std::vector<double> wnorm_u2;
  /// Largest violation of the boundary identities seen at any stored sample.
  double max_boundary_residual = 0.0;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return t.size(); }

  void push(double time, std::vector<double> p1, std::vector<double> p2, const WeightFunction& eta) {
    sup_u1.push_back(sup_norm(p1));
    sup_u2.push_back(sup_norm(p2));
    wnorm_u1.push_back(weighted_sup_norm(p1, z, eta));
    wnorm_u2.push_back(weighted_sup_norm(p2, z, eta));
    t.push_back(time);
    u1.push_back(std::move(p1));
    u2.push_back(std::move(p2));
  }

  /// sup|u1| + sup|u2| per sample.
  std::vector<double> sum_sup() const {
    std::vector<double> s(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) s[j] = sup_u1[j] + sup_u2[j];
    return s;
  }
};

inline std::string format_real(double x) { return fmt::format("{:.16e}", x); }

/// Norm table: t,sup_u1,sup_u2,wnorm_u1,wnorm_u2.
inline std::string trajectory_csv(const Trajectory& tr) {
  std::string out = "t,sup_u1,sup_u2,wnorm_u1,wnorm_u2\n";
  for (std::size_t j = 0; j < tr.size(); ++j)
    out += fmt::format("{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n", tr.t[j], tr.sup_u1[j], tr.sup_u2[j],
                       tr.wnorm_u1[j], tr.wnorm_u2[j]);
  return out;
}

/// Full profiles: t,z,u1,u2 (one row per sample and node).
inline std::string profiles_csv(const Trajectory& tr) {
  std::string out = "t,z,u1,u2\n";
  for (std::size_t j = 0; j < tr.size(); ++j)
    for (std::size_t i = 0; i < tr.z.size(); ++i)
      out += fmt::format("{:.16e},{:.16e},{:.16e},{:.16e}\n", tr.t[j], tr.z[i], tr.u1[j][i], tr.u2[j][i]);
  return out;
}

namespace detail {
inline std::vector<std::vector<double>> parse_csv(const std::string& text, const std::string& expected_header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  std::string header;
  for (char ch : line)
    if (ch != ' ' && ch != '\r') header += ch;
  if (header != expected_header) throw std::runtime_error("csv: unexpected header '" + line + "'");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}
}  // namespace detail

/// Reads the norm table and, when given, the full-profile table back into a
/// Trajectory.
inline Trajectory load_trajectory_csv(const std::string& norms_csv, const std::string& profiles = {}) {
  Trajectory tr;
  for (const auto& r : detail::parse_csv(norms_csv, "t,sup_u1,sup_u2,wnorm_u1,wnorm_u2")) {
    if (r.size() != 5) throw std::runtime_error("csv: trajectory row must have 5 fields");
    tr.t.push_back(r[0]);
    tr.sup_u1.push_back(r[1]);
    tr.sup_u2.push_back(r[2]);
    tr.wnorm_u1.push_back(r[3]);
    tr.wnorm_u2.push_back(r[4]);
  }
  if (profiles.empty()) return tr;
  const auto rows = detail::parse_csv(profiles, "t,z,u1,u2");
  if (tr.t.empty() || rows.size() % tr.t.size() != 0)
    throw std::runtime_error("csv: profile rows do not match trajectory samples");
  const std::size_t nz = rows.size() / tr.t.size();
  tr.u1.assign(tr.t.size(), std::vector<double>(nz));
  tr.u2.assign(tr.t.size(), std::vector<double>(nz));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r.size() != 4) throw std::runtime_error("csv: profile row must have 4 fields");
    const std::size_t j = k / nz, i = k % nz;
    if (r[0] != tr.t[j]) throw std::runtime_error("csv: profile time does not match trajectory");
    if (j == 0) tr.z.push_back(r[1]);
    tr.u1[j][i] = r[2];
    tr.u2[j][i] = r[3];
  }
  return tr;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace pdeloop
