#pragma once

// Weighted particle ensembles for the two players:
//   ParamMeasure     nu = sum_k alpha_k delta_{(a_k, b_k)}       (learner, network parameters)
//   CouplingMeasure  pi = sum_i sum_j omega_ij delta_{(z_i, zt_ij)} (adversary, data -> attack)
// The coupling is stored grouped by anchor z_i; anchors and group masses are fixed at
// construction, so the first marginal of pi always equals the data measure.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wada/errors.hpp"
#include "wada/util.hpp"

namespace wada {

inline constexpr double kMassTolerance = 1e-12;

struct ParamParticle {
  double a = 0.0;
  Vec b;
  double alpha = 0.0;

  Vec theta() const {
    Vec t;
    t.reserve(b.size() + 1);
    t.push_back(a);
    t.insert(t.end(), b.begin(), b.end());
    return t;
  }
  void set_theta(std::span<const double> t) {
    a = t[0];
    b.assign(t.begin() + 1, t.end());
  }
};

struct ParamMeasure {
  std::vector<ParamParticle> particles;
  Box theta_box;  // dimension 1 + input_dim, coordinate 0 bounds `a`

  std::size_t size() const noexcept { return particles.size(); }
  std::size_t input_dim() const noexcept { return theta_box.dim() == 0 ? 0 : theta_box.dim() - 1; }
  double total_mass() const {
    CompensatedSum s;
    for (const auto& p : particles) s.add(p.alpha);
    return s.value();
  }
};

struct Attack {
  Vec z;  // attacked point (x~, y~)
  double omega = 0.0;
};

class AttackGroup {
public:
  AttackGroup() = default;
  AttackGroup(Vec anchor, std::vector<Attack> atk, double group_mass)
      : attacks(std::move(atk)), anchor_(std::move(anchor)), group_mass_(group_mass) {}

  const Vec& anchor() const noexcept { return anchor_; }
  double group_mass() const noexcept { return group_mass_; }
  double attack_mass() const {
    CompensatedSum s;
    for (const auto& at : attacks) s.add(at.omega);
    return s.value();
  }

  std::vector<Attack> attacks;

private:
  Vec anchor_;
  double group_mass_ = 0.0;
};

struct CouplingMeasure {
  std::vector<AttackGroup> groups;
  Box z_box;  // dimension input_dim + 1, last coordinate is the label

  std::size_t z_dim() const noexcept { return z_box.dim(); }
  std::size_t input_dim() const noexcept { return z_box.dim() == 0 ? 0 : z_box.dim() - 1; }
  std::size_t atom_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.attacks.size();
    return n;
  }
};

/// Finite weighted point cloud; the common currency of the diagnostics.
struct DiscreteMeasure {
  std::vector<Vec> points;
  Vec masses;

  std::size_t size() const noexcept { return points.size(); }
  std::size_t dim() const noexcept { return points.empty() ? 0 : points.front().size(); }
  double total_mass() const { return compensated_sum(masses); }
};

struct MassResiduals {
  double group_max = 0.0;  // max_i |sum_j omega_ij - group_mass_i|
  double pi_total = 0.0;   // |sum_i group_mass_i - 1|
  double nu_total = 0.0;   // |sum_k alpha_k - 1|

  double worst() const noexcept { return std::max({group_max, pi_total, nu_total}); }
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const ParamMeasure& nu, double tol = kMassTolerance) {
  if (nu.particles.empty()) throw InvalidMeasure("parameter measure has no particles");
  const std::size_t d = nu.input_dim();
  for (std::size_t k = 0; k < nu.size(); ++k) {
    const auto& p = nu.particles[k];
    if (p.b.size() != d) throw DimensionMismatch("parameter particle " + std::to_string(k) + " has wrong dimension");
    if (!(p.alpha >= 0.0)) throw InvalidMeasure("parameter particle " + std::to_string(k) + " has negative mass");
    if (!nu.theta_box.contains(p.theta()))
      throw InvalidMeasure("parameter particle " + std::to_string(k) + " lies outside the parameter box");
  }
  if (std::abs(nu.total_mass() - 1.0) > tol) throw InvalidMeasure("parameter measure mass is not 1");
}

inline void validate(const CouplingMeasure& pi, double tol = kMassTolerance) {
  if (pi.groups.empty()) throw InvalidMeasure("coupling has no groups");
  CompensatedSum total;
  for (std::size_t i = 0; i < pi.groups.size(); ++i) {
    const auto& g = pi.groups[i];
    if (g.anchor().size() != pi.z_dim()) throw DimensionMismatch("anchor " + std::to_string(i) + " has wrong dimension");
    if (!(g.group_mass() >= 0.0)) throw InvalidMeasure("group " + std::to_string(i) + " has negative mass");
    for (const auto& at : g.attacks) {
      if (at.z.size() != pi.z_dim()) throw DimensionMismatch("attack in group " + std::to_string(i) + " has wrong dimension");
      if (!(at.omega >= 0.0)) throw InvalidMeasure("attack in group " + std::to_string(i) + " has negative mass");
      if (!pi.z_box.contains(at.z)) throw InvalidMeasure("attack in group " + std::to_string(i) + " lies outside the data box");
    }
    if (std::abs(g.attack_mass() - g.group_mass()) > tol)
      throw InvalidMeasure("group " + std::to_string(i) + " attack masses do not sum to the group mass");
    total.add(g.group_mass());
  }
  if (std::abs(total.value() - 1.0) > tol) throw InvalidMeasure("coupling mass is not 1");
}

// ---------------------------------------------------------------------------
// Operations

/// First marginal of pi: the anchors with their group masses.
inline DiscreteMeasure marginal_z(const CouplingMeasure& pi) {
  DiscreteMeasure m;
  m.points.reserve(pi.groups.size());
  m.masses.reserve(pi.groups.size());
  for (const auto& g : pi.groups) {
    m.points.push_back(g.anchor());
    m.masses.push_back(g.group_mass());
  }
  return m;
}

/// Conditional law of the attack given anchor `group`: omega_j / group_mass.
inline Vec conditional(const CouplingMeasure& pi, std::size_t group) {
  const auto& g = pi.groups.at(group);
  if (!(g.group_mass() > 0.0)) throw ZeroMassGroup(group);
  Vec w(g.attacks.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = g.attacks[j].omega / g.group_mass();
  return w;
}

inline MassResiduals mass_residuals(const CouplingMeasure& pi, const ParamMeasure& nu) {
  MassResiduals r;
  CompensatedSum total;
  for (const auto& g : pi.groups) {
    r.group_max = std::max(r.group_max, std::abs(g.attack_mass() - g.group_mass()));
    total.add(g.group_mass());
  }
  r.pi_total = std::abs(total.value() - 1.0);
  r.nu_total = std::abs(nu.total_mass() - 1.0);
  return r;
}

/// pi viewed as a measure on Z x Z, atoms (z_i, zt_ij).
inline DiscreteMeasure to_discrete(const CouplingMeasure& pi) {
  DiscreteMeasure m;
  m.points.reserve(pi.atom_count());
  m.masses.reserve(pi.atom_count());
  for (const auto& g : pi.groups)
    for (const auto& at : g.attacks) {
      Vec p = g.anchor();
      p.insert(p.end(), at.z.begin(), at.z.end());
      m.points.push_back(std::move(p));
      m.masses.push_back(at.omega);
    }
  return m;
}

inline DiscreteMeasure to_discrete(const ParamMeasure& nu) {
  DiscreteMeasure m;
  m.points.reserve(nu.size());
  m.masses.reserve(nu.size());
  for (const auto& p : nu.particles) {
    m.points.push_back(p.theta());
    m.masses.push_back(p.alpha);
  }
  return m;
}

/// Shannon entropy of each group's conditional weights, averaged over groups.
inline double mean_conditional_entropy(const CouplingMeasure& pi) {
  CompensatedSum acc;
  for (const auto& g : pi.groups) {
    double h = 0.0;
    for (const auto& at : g.attacks) {
      const double w = at.omega / g.group_mass();
      if (w > 0.0) h -= w * std::log(w);
    }
    acc.add(h);
  }
  return pi.groups.empty() ? 0.0 : acc.value() / static_cast<double>(pi.groups.size());
}

// ---------------------------------------------------------------------------
// CSV layout: header row, one row per particle, shortest round-trip decimal formatting.
//   coupling:  group_id,z_1..z_D,zt_1..zt_D,omega
//   params:    a,b_1..b_d,alpha

namespace csv {

inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& cell, std::size_t row, std::size_t column) {
  std::size_t b = cell.find_first_not_of(" \t\r");
  std::size_t e = cell.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw ParseError(row, column, "empty cell");
  double v = 0.0;
  auto res = std::from_chars(cell.data() + b, cell.data() + e + 1, v);
  if (res.ec != std::errc() || res.ptr != cell.data() + e + 1) throw ParseError(row, column, "not a number: '" + cell + "'");
  return v;
}

}  // namespace csv

inline void write_csv(std::ostream& os, const CouplingMeasure& pi) {
  const std::size_t dz = pi.z_dim();
  os << "group_id";
  for (std::size_t c = 0; c < dz; ++c) os << ",z_" << c + 1;
  for (std::size_t c = 0; c < dz; ++c) os << ",zt_" << c + 1;
  os << ",omega\n";
  for (std::size_t i = 0; i < pi.groups.size(); ++i) {
    const auto& g = pi.groups[i];
    for (const auto& at : g.attacks) {
      os << i;
      for (double v : g.anchor()) os << ',' << csv::format_double(v);
      for (double v : at.z) os << ',' << csv::format_double(v);
      os << ',' << csv::format_double(at.omega) << '\n';
    }
  }
}

inline void write_csv(std::ostream& os, const ParamMeasure& nu) {
  os << "a";
  for (std::size_t c = 0; c < nu.input_dim(); ++c) os << ",b_" << c + 1;
  os << ",alpha\n";
  for (const auto& p : nu.particles) {
    os << csv::format_double(p.a);
    for (double v : p.b) os << ',' << csv::format_double(v);
    os << ',' << csv::format_double(p.alpha) << '\n';
  }
}

/// Group masses are recovered as the per-group sums of omega.
inline CouplingMeasure read_coupling_csv(std::istream& is, const Box& z_box) {
  const std::size_t dz = z_box.dim();
  std::string line;
  if (!std::getline(is, line)) throw ParseError(0, 0, "missing header");
  if (csv::split(line).size() != 2 * dz + 2) throw ParseError(0, 0, "header does not match the data box dimension");
  struct Pending {
    Vec anchor;
    std::vector<Attack> attacks;
  };
  std::vector<Pending> pending;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = csv::split(line);
    if (cells.size() != 2 * dz + 2) throw ParseError(row, cells.size(), "wrong number of columns");
    const double gid = csv::parse_double(cells[0], row, 0);
    if (gid < 0 || gid != std::floor(gid)) throw ParseError(row, 0, "group_id must be a non-negative integer");
    const auto id = static_cast<std::size_t>(gid);
    if (id > pending.size()) throw ParseError(row, 0, "group ids must be contiguous and ascending");
    Vec anchor(dz), z(dz);
    for (std::size_t c = 0; c < dz; ++c) anchor[c] = csv::parse_double(cells[1 + c], row, 1 + c);
    for (std::size_t c = 0; c < dz; ++c) z[c] = csv::parse_double(cells[1 + dz + c], row, 1 + dz + c);
    const double omega = csv::parse_double(cells[1 + 2 * dz], row, 1 + 2 * dz);
    if (id == pending.size()) pending.push_back({anchor, {}});
    pending[id].attacks.push_back({std::move(z), omega});
  }
  CouplingMeasure pi;
  pi.z_box = z_box;
  for (auto& p : pending) {
    CompensatedSum m;
    for (const auto& at : p.attacks) m.add(at.omega);
    pi.groups.emplace_back(std::move(p.anchor), std::move(p.attacks), m.value());
  }
  return pi;
}

inline ParamMeasure read_param_csv(std::istream& is, const Box& theta_box) {
  const std::size_t dt = theta_box.dim();
  std::string line;
  if (!std::getline(is, line)) throw ParseError(0, 0, "missing header");
  if (csv::split(line).size() != dt + 1) throw ParseError(0, 0, "header does not match the parameter box dimension");
  ParamMeasure nu;
  nu.theta_box = theta_box;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = csv::split(line);
    if (cells.size() != dt + 1) throw ParseError(row, cells.size(), "wrong number of columns");
    ParamParticle p;
    p.a = csv::parse_double(cells[0], row, 0);
    p.b.resize(dt - 1);
    for (std::size_t c = 0; c + 1 < dt; ++c) p.b[c] = csv::parse_double(cells[1 + c], row, 1 + c);
    p.alpha = csv::parse_double(cells[dt], row, dt);
    nu.particles.push_back(std::move(p));
  }
  return nu;
}

}  // namespace wada
