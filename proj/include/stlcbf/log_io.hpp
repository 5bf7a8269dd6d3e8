#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stlcbf/error.hpp"
#include "stlcbf/monitor.hpp"
#include "stlcbf/sim.hpp"

namespace stlcbf {

/// Shortest round-trippable rendering: 17 significant digits.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_header(Eigen::Index n, Eigen::Index m) {
  std::string h = "t";
  auto add = [&](const char* stem, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) h += "," + std::string(stem) + std::to_string(i);
  };
  add("x", n);
  add("xhat", n);
  add("z", n);
  add("u", m);
  h += ",h,hhat,e,rho,eta,rhat,flags";
  return h;
}

inline std::vector<std::string> split_header(const std::string& h) {
  std::vector<std::string> out;
  std::stringstream ss(h);
  std::string c;
  while (std::getline(ss, c, ',')) out.push_back(c);
  return out;
}

inline void write_csv(std::ostream& os, const TrajectoryLog& log) {
  STLCBF_THROW_UNLESS(!log.rows.empty(), SpecError, "empty trajectory log");
  const auto& r0 = log.rows.front();
  os << csv_header(r0.x.size(), r0.u.size()) << '\n';
  for (const auto& r : log.rows) {
    os << format_g17(r.t);
    for (const auto* v : {&r.x, &r.x_hat, &r.z, &r.u})
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << format_g17((*v)(i));
    for (double v : {r.h, r.hhat, r.e, r.rho, r.eta, r.r_hat}) os << ',' << format_g17(v);
    os << ',' << r.flags << '\n';
  }
}

/// Reads the `t` and `x<i>` columns of a log. Any CSV whose header has a `t`
/// column and `x0, x1, ...` columns is accepted.
inline SampledSignal read_state_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("CSV is empty");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  int t_col = -1;
  std::vector<int> x_cols;
  for (int k = 0; k < static_cast<int>(cols.size()); ++k) {
    if (cols[k] == "t") t_col = k;
  }
  for (int i = 0;; ++i) {
    int found = -1;
    for (int k = 0; k < static_cast<int>(cols.size()); ++k)
      if (cols[k] == "x" + std::to_string(i)) found = k;
    if (found < 0) break;
    x_cols.push_back(found);
  }
  if (t_col < 0 || x_cols.empty()) throw ConfigError("CSV header lacks t or x0 columns");

  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (cells.size() != cols.size())
      throw ConfigError("CSV line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(cols.size()));
    auto num = [&](int k) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[static_cast<std::size_t>(k)], &used);
        if (used != cells[static_cast<std::size_t>(k)].size()) throw std::invalid_argument("");
        return v;
      } catch (const std::exception&) {
        throw ConfigError("CSV line " + std::to_string(line_no) + ": bad number '" +
                          cells[static_cast<std::size_t>(k)] + "'");
      }
    };
    times.push_back(num(t_col));
    Eigen::VectorXd x(static_cast<Eigen::Index>(x_cols.size()));
    for (std::size_t i = 0; i < x_cols.size(); ++i) x(static_cast<Eigen::Index>(i)) = num(x_cols[i]);
    states.push_back(std::move(x));
  }
  try {
    return SampledSignal(std::move(times), std::move(states));
  } catch (const SpecError& e) {
    throw ConfigError(std::string("CSV trajectory invalid: ") + e.what());
  }
}

/// Reads a log written by write_csv back into rows.
inline TrajectoryLog read_log_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("CSV is empty");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  auto count = [&](const std::string& stem) {
    Eigen::Index k = 0;
    while (std::find(cols.begin(), cols.end(), stem + std::to_string(k)) != cols.end()) ++k;
    return k;
  };
  const auto n = count("x"), m = count("u");
  if (n == 0 || cols != split_header(csv_header(n, m)))
    throw ConfigError("CSV header is not a trajectory log header");
  TrajectoryLog log;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      try {
        v.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ConfigError("CSV line " + std::to_string(line_no) + ": bad number '" + c + "'");
      }
    }
    if (v.size() != cols.size())
      throw ConfigError("CSV line " + std::to_string(line_no) + " has the wrong field count");
    LogRow r;
    std::size_t k = 0;
    r.t = v[k++];
    for (auto* vec : {&r.x, &r.x_hat, &r.z}) {
      vec->resize(n);
      for (Eigen::Index i = 0; i < n; ++i) (*vec)(i) = v[k++];
    }
    r.u.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) r.u(i) = v[k++];
    r.h = v[k++], r.hhat = v[k++], r.e = v[k++], r.rho = v[k++], r.eta = v[k++];
    r.r_hat = v[k++];
    r.flags = static_cast<std::uint32_t>(v[k]);
    log.rows.push_back(std::move(r));
  }
  if (log.rows.empty()) throw ConfigError("CSV has no data rows");
  return log;
}

}  // namespace stlcbf
