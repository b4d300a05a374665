#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gradflow/diagnostics.hpp"
#include "gradflow/errors.hpp"
#include "gradflow/grid.hpp"
#include "gradflow/schemes.hpp"

// CSV serialization. Every float is written with 17 significant digits so a
// write/read cycle reproduces the binary value.

namespace gradflow::io {

inline constexpr const char* kDiagnosticsHeader = "step,t,E_original,E_modified,aux,xi,xi_error,mass,dissipation,flags";
inline constexpr const char* kTableHeader = "dt,error,rate";

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError("not a number: '" + s + "'");
  return v;
}

inline unsigned parse_flags(const std::string& s) {
  unsigned flags = kNoFlags;
  for (const auto& name : split(s, '|')) {
    if (name == "QUADRATIC_DEGENERATE") {
      flags |= kQuadraticDegenerate;
    } else if (name == "FORCED_ROOT_FALLBACK") {
      flags |= kForcedRootFallback;
    } else if (!name.empty()) {
      throw IoError("unknown solver flag '" + name + "'");
    }
  }
  return flags;
}

inline void expect_header(std::istream& in, const std::string& header, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || line != header) throw IoError("unexpected header in " + path.string());
}

}  // namespace detail

inline void write_diagnostics(const std::vector<DiagnosticsRecord>& records, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << kDiagnosticsHeader << '\n';
  for (const auto& r : records) {
    out << r.step << ',' << fmt(r.t) << ',' << fmt(r.e_original) << ',' << fmt(r.e_modified) << ','
        << fmt(r.aux) << ',' << fmt(r.xi) << ',' << fmt(r.xi_error) << ',' << fmt(r.mass) << ','
        << fmt(r.dissipation) << ',' << flags_to_string(r.flags) << '\n';
  }
  detail::finish(out, path);
}

inline std::vector<DiagnosticsRecord> read_diagnostics(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::expect_header(in, kDiagnosticsHeader, path);
  std::vector<DiagnosticsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = detail::split(line);
    if (c.size() != 10) throw IoError("diagnostics row needs 10 columns: " + line);
    DiagnosticsRecord r;
    r.step = std::stol(c[0]);
    r.t = detail::parse_double(c[1]);
    r.e_original = detail::parse_double(c[2]);
    r.e_modified = detail::parse_double(c[3]);
    r.aux = detail::parse_double(c[4]);
    r.xi = detail::parse_double(c[5]);
    r.xi_error = detail::parse_double(c[6]);
    r.mass = detail::parse_double(c[7]);
    r.dissipation = detail::parse_double(c[8]);
    r.flags = detail::parse_flags(c[9]);
    out.push_back(r);
  }
  return out;
}

inline void write_snapshot(const RealField& phi, double t, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  const Grid& g = phi.grid();
  const std::size_t n = g.n();
  out << "# nx=" << n << " ny=" << n << " L=" << fmt(g.length()) << " t=" << fmt(t) << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << fmt(phi(i, j));
    out << '\n';
  }
  detail::finish(out, path);
}

struct Snapshot {
  RealField phi;
  double t = 0.0;
};

inline Snapshot read_snapshot(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string header;
  std::getline(in, header);
  std::size_t nx = 0;
  std::size_t ny = 0;
  char lbuf[64] = {0};
  char tbuf[64] = {0};
  if (std::sscanf(header.c_str(), "# nx=%zu ny=%zu L=%63s t=%63s", &nx, &ny, lbuf, tbuf) != 4 || nx != ny) {
    throw IoError("bad snapshot header in " + path.string());
  }
  Snapshot s{RealField(Grid(nx, detail::parse_double(lbuf))), detail::parse_double(tbuf)};
  std::string line;
  for (std::size_t i = 0; i < nx; ++i) {
    if (!std::getline(in, line)) throw IoError("snapshot truncated: " + path.string());
    const auto c = detail::split(line);
    if (c.size() != nx) throw IoError("snapshot row has wrong width: " + path.string());
    for (std::size_t j = 0; j < nx; ++j) s.phi(i, j) = detail::parse_double(c[j]);
  }
  return s;
}

inline void write_table(const ConvergenceTable& table, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << kTableHeader << '\n';
  for (const auto& r : table) out << fmt(r.dt) << ',' << fmt(r.error) << ',' << fmt(r.rate) << '\n';
  detail::finish(out, path);
}

inline ConvergenceTable read_table(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::expect_header(in, kTableHeader, path);
  ConvergenceTable out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = detail::split(line);
    if (c.size() != 3) throw IoError("table row needs 3 columns: " + line);
    out.push_back({detail::parse_double(c[0]), detail::parse_double(c[1]), detail::parse_double(c[2])});
  }
  return out;
}

/// Comparison table as CSV `dt,<name>,<name>,...`.
inline void write_comparison(const ComparisonTable& table, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "dt";
  for (const auto& n : table.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < table.dts.size(); ++i) {
    out << fmt(table.dts[i]);
    for (double e : table.errors[i]) out << ',' << fmt(e);
    out << '\n';
  }
  detail::finish(out, path);
}

}  // namespace gradflow::io
