#pragma once

// Trace CSV: fixed metric columns, then xbar_*/ybar_* coordinates, then the
// auxiliary inconsistency and tracking columns. Doubles use 17 significant
// digits so a parse returns the exact bits that were written.

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adast/algorithms.hpp"
#include "adast/metrics.hpp"

namespace adast {

inline constexpr std::string_view kTraceHeader =
    "k,grad_phi_sq,grad_xf_sq,consensus_x,consensus_y,zeta_v_inst,zeta_v_sup,"
    "zeta_u_inst,zeta_u_sup,avg_m_x,avg_m_y";

inline constexpr std::string_view kTraceTrailer = "zeta_hat_v,zeta_hat_u,global_m_x,global_m_y";

class TraceIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw TraceIoError("bad number in trace: '" + s + "'");
  return v;
}

inline std::string trace_header(Eigen::Index p, Eigen::Index d) {
  std::string h(kTraceHeader);
  for (Eigen::Index j = 0; j < p; ++j) h += ",xbar_" + std::to_string(j);
  for (Eigen::Index j = 0; j < d; ++j) h += ",ybar_" + std::to_string(j);
  h += ",";
  h += kTraceTrailer;
  return h;
}

inline void write_trace(std::ostream& os, const std::vector<TraceRecord>& records,
                        Eigen::Index p, Eigen::Index d) {
  os << trace_header(p, d) << '\n';
  for (const auto& r : records) {
    os << r.k;
    for (double v : {r.grad_phi_sq, r.grad_xf_sq, r.consensus_x, r.consensus_y, r.zeta_v_inst,
                     r.zeta_v_sup, r.zeta_u_inst, r.zeta_u_sup, r.avg_m_x, r.avg_m_y})
      os << ',' << format_double(v);
    for (Eigen::Index j = 0; j < r.xbar.size(); ++j) os << ',' << format_double(r.xbar(j));
    for (Eigen::Index j = 0; j < r.ybar.size(); ++j) os << ',' << format_double(r.ybar(j));
    for (double v : {r.zeta_hat_v, r.zeta_hat_u, r.global_m_x, r.global_m_y})
      os << ',' << format_double(v);
    os << '\n';
  }
}

inline void write_trace(const std::string& path, const std::vector<TraceRecord>& records,
                        Eigen::Index p, Eigen::Index d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceIoError("cannot open '" + path + "' for writing");
  write_trace(out, records, p, d);
  out.flush();
  if (!out) throw TraceIoError("write to '" + path + "' failed");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Parses a trace written by write_trace; columns are located by name.
inline std::vector<TraceRecord> read_trace(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw TraceIoError("empty trace file");
  const auto header = detail::split_csv_line(line);
  auto index_of = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw TraceIoError("trace is missing column '" + std::string(name) + "'");
  };
  std::vector<std::size_t> xcols, ycols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].rfind("xbar_", 0) == 0) xcols.push_back(i);
    if (header[i].rfind("ybar_", 0) == 0) ycols.push_back(i);
  }
  const std::size_t c_k = index_of("k"), c_phi = index_of("grad_phi_sq"),
                    c_gx = index_of("grad_xf_sq"), c_cx = index_of("consensus_x"),
                    c_cy = index_of("consensus_y"), c_vi = index_of("zeta_v_inst"),
                    c_vs = index_of("zeta_v_sup"), c_ui = index_of("zeta_u_inst"),
                    c_us = index_of("zeta_u_sup"), c_mx = index_of("avg_m_x"),
                    c_my = index_of("avg_m_y"), c_hv = index_of("zeta_hat_v"),
                    c_hu = index_of("zeta_hat_u"), c_gmx = index_of("global_m_x"),
                    c_gmy = index_of("global_m_y");

  std::vector<TraceRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw TraceIoError("ragged trace row: " + line);
    TraceRecord r;
    r.k = std::stoull(cells[c_k]);
    r.grad_phi_sq = parse_double(cells[c_phi]);
    r.grad_xf_sq = parse_double(cells[c_gx]);
    r.consensus_x = parse_double(cells[c_cx]);
    r.consensus_y = parse_double(cells[c_cy]);
    r.zeta_v_inst = parse_double(cells[c_vi]);
    r.zeta_v_sup = parse_double(cells[c_vs]);
    r.zeta_u_inst = parse_double(cells[c_ui]);
    r.zeta_u_sup = parse_double(cells[c_us]);
    r.avg_m_x = parse_double(cells[c_mx]);
    r.avg_m_y = parse_double(cells[c_my]);
    r.zeta_hat_v = parse_double(cells[c_hv]);
    r.zeta_hat_u = parse_double(cells[c_hu]);
    r.global_m_x = parse_double(cells[c_gmx]);
    r.global_m_y = parse_double(cells[c_gmy]);
    r.xbar.resize(static_cast<Eigen::Index>(xcols.size()));
    r.ybar.resize(static_cast<Eigen::Index>(ycols.size()));
    for (std::size_t j = 0; j < xcols.size(); ++j)
      r.xbar(static_cast<Eigen::Index>(j)) = parse_double(cells[xcols[j]]);
    for (std::size_t j = 0; j < ycols.size(); ++j)
      r.ybar(static_cast<Eigen::Index>(j)) = parse_double(cells[ycols[j]]);
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<TraceRecord> read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceIoError("cannot open '" + path + "'");
  return read_trace(in);
}

}  // namespace adast
