#pragma once

// Synthetic datasets, CSV ingestion and the nested initialization sampler.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "wada/dynamics.hpp"
#include "wada/errors.hpp"
#include "wada/measures.hpp"
#include "wada/util.hpp"

namespace wada {

struct Dataset {
  std::vector<Vec> inputs;
  Vec labels;
  Box box;  // over Z = inputs x label

  std::size_t size() const noexcept { return inputs.size(); }
  std::size_t input_dim() const noexcept { return box.dim() == 0 ? 0 : box.dim() - 1; }

  Vec point(std::size_t i) const {
    Vec z = inputs[i];
    z.push_back(labels[i]);
    return z;
  }
};

/// Default data box: [-1.5, 1.5]^d x [0, 1].
inline Box default_data_box(std::size_t input_dim) {
  Vec lo(input_dim, -1.5), hi(input_dim, 1.5);
  lo.push_back(0.0);
  hi.push_back(1.0);
  return Box(std::move(lo), std::move(hi));
}

/// Default parameter box: [-4, 4]^(1 + d).
inline Box default_param_box(std::size_t input_dim) { return Box::cube(input_dim + 1, -4.0, 4.0); }

/// x ~ U[-1, 1], y = 0.5 sin(pi x) + 0.5 + noise, clipped to [0, 1].
inline Dataset gen_regression_1d(std::size_t n, double noise_std, std::uint64_t seed) {
  Dataset ds;
  ds.box = default_data_box(1);
  Rng rng = make_rng(seed, "data.regression_1d");
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = unif(rng);
    const double eps = noise(rng);
    const double y = 0.5 * std::sin(std::numbers::pi * x) + 0.5 + noise_std * eps;
    ds.inputs.push_back({x});
    ds.labels.push_back(std::clamp(y, 0.0, 1.0));
  }
  return ds;
}

/// Two interleaved half circles in the plane (labels 0 and 1, n/2 each),
/// shifted and scaled by 0.8 so the clean arcs sit inside [-1.5, 1.5]^2.
inline Dataset gen_two_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n % 2 != 0) throw OddCount(n);
  Dataset ds;
  ds.box = default_data_box(2);
  Rng rng = make_rng(seed, "data.two_moons");
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t half = n / 2;
  auto angle = [half](std::size_t k) {
    return half > 1 ? std::numbers::pi * static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
  };
  auto emit = [&](double x, double y, double label) {
    Vec p{(x - 0.5) * 0.8 + noise_std * noise(rng), (y - 0.25) * 0.8 + noise_std * noise(rng)};
    for (std::size_t c = 0; c < 2; ++c) p[c] = std::clamp(p[c], ds.box.lower[c], ds.box.upper[c]);
    ds.inputs.push_back(std::move(p));
    ds.labels.push_back(label);
  };
  for (std::size_t k = 0; k < half; ++k) emit(std::cos(angle(k)), std::sin(angle(k)), 0.0);
  for (std::size_t k = 0; k < half; ++k) emit(1.0 - std::cos(angle(k)), 0.5 - std::sin(angle(k)), 1.0);
  return ds;
}

/// Appends a constant input coordinate equal to 1 with a degenerate box [1, 1],
/// which gives the bias-free network an offset that no attack can move.
inline Dataset with_bias_feature(const Dataset& ds) {
  Dataset out;
  const std::size_t d = ds.input_dim();
  Vec lo(ds.box.lower.begin(), ds.box.lower.begin() + static_cast<std::ptrdiff_t>(d));
  Vec hi(ds.box.upper.begin(), ds.box.upper.begin() + static_cast<std::ptrdiff_t>(d));
  lo.push_back(1.0);
  hi.push_back(1.0);
  lo.push_back(ds.box.lower.back());
  hi.push_back(ds.box.upper.back());
  out.box = Box(std::move(lo), std::move(hi));
  out.labels = ds.labels;
  for (auto x : ds.inputs) {
    x.push_back(1.0);
    out.inputs.push_back(std::move(x));
  }
  return out;
}

/// Seeded shuffle, then the first `test_fraction` of the points become the test set.
inline std::pair<Dataset, Dataset> shuffle_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(seed, "data.split");
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(ds.size())));
  Dataset train{{}, {}, ds.box}, test{{}, {}, ds.box};
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto& dst = r < n_test ? test : train;
    dst.inputs.push_back(ds.inputs[idx[r]]);
    dst.labels.push_back(ds.labels[idx[r]]);
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// CSV: header x_1..x_d,y

inline void write_csv(std::ostream& os, const Dataset& ds) {
  for (std::size_t c = 0; c < ds.input_dim(); ++c) os << "x_" << c + 1 << ',';
  os << "y\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.inputs[i]) os << csv::format_double(v) << ',';
    os << csv::format_double(ds.labels[i]) << '\n';
  }
}

/// Rows are numbered from 1 (the header is row 0).
inline Dataset load_csv(std::istream& is, const Box& box) {
  const std::size_t d = box.dim() - 1;
  std::string line;
  if (!std::getline(is, line)) throw EmptyDataset();
  if (csv::split(line).size() != d + 1)
    throw ParseError(0, 0, "header has " + std::to_string(csv::split(line).size()) + " columns, expected " +
                               std::to_string(d + 1));
  Dataset ds;
  ds.box = box;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = csv::split(line);
    if (cells.size() != d + 1) throw ParseError(row, cells.size(), "wrong number of columns");
    Vec z(d + 1);
    for (std::size_t c = 0; c <= d; ++c) z[c] = csv::parse_double(cells[c], row, c);
    if (!box.contains(z)) throw OutOfBox(row);
    ds.labels.push_back(z.back());
    z.pop_back();
    ds.inputs.push_back(std::move(z));
  }
  if (ds.size() == 0) throw EmptyDataset();
  return ds;
}

inline Dataset load_csv(const std::string& path, const Box& box) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  return load_csv(in, box);
}

// ---------------------------------------------------------------------------
// Initialization

enum class ParamInitKind { uniform_box, gaussian_clipped };
enum class AttackInitKind { diagonal, conditional_noise };

struct InitSpec {
  ParamInitKind nu0 = ParamInitKind::uniform_box;
  double nu0_mean = 0.0;
  double nu0_std = 1.0;
  AttackInitKind pi0 = AttackInitKind::diagonal;
  double pi0_std = 0.1;
  std::size_t attacks_per_anchor = 1;  // N
  std::size_t param_particles = 64;    // M
  std::uint64_t seed = 0;
  Box theta_box;  // empty: default_param_box

  void validate() const {
    if (attacks_per_anchor < 1) throw InvalidConfig("attacks_per_anchor must be at least 1");
    if (param_particles < 1) throw InvalidConfig("param_particles must be at least 1");
    if (pi0 == AttackInitKind::conditional_noise && !(pi0_std >= 0.0)) throw InvalidConfig("pi0 std must be >= 0");
    if (nu0 == ParamInitKind::gaussian_clipped && !(nu0_std >= 0.0)) throw InvalidConfig("nu0 std must be >= 0");
  }
};

/// Anchors are the data points with mass 1/n. Attack j of anchor i is the j-th draw of the
/// anchor's own stream and parameter k the k-th draw of a single stream, so a state built
/// with fewer particles is a prefix of one built with more.
inline SolverState init_state(const Dataset& data, const InitSpec& spec) {
  spec.validate();
  if (data.size() == 0) throw EmptyDataset();
  SolverState s;
  s.pi.z_box = data.box;
  s.nu.theta_box = spec.theta_box.dim() == 0 ? default_param_box(data.input_dim()) : spec.theta_box;
  if (s.nu.theta_box.dim() != data.input_dim() + 1) throw DimensionMismatch("parameter box does not match the data");

  const double n = static_cast<double>(data.size());
  const double nn = static_cast<double>(spec.attacks_per_anchor);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec z = data.point(i);
    Rng rng = make_rng(spec.seed, "init.pi0", i);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Attack> attacks;
    attacks.reserve(spec.attacks_per_anchor);
    for (std::size_t j = 0; j < spec.attacks_per_anchor; ++j) {
      Vec zt = z;
      if (spec.pi0 == AttackInitKind::conditional_noise)
        for (auto& c : zt) c += spec.pi0_std * normal(rng);
      data.box.project(zt);
      attacks.push_back({std::move(zt), 1.0 / (n * nn)});
    }
    s.pi.groups.emplace_back(z, std::move(attacks), 1.0 / n);
  }

  Rng rng = make_rng(spec.seed, "init.nu0");
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& box = s.nu.theta_box;
  for (std::size_t k = 0; k < spec.param_particles; ++k) {
    Vec theta(box.dim());
    for (std::size_t c = 0; c < theta.size(); ++c) {
      if (spec.nu0 == ParamInitKind::uniform_box)
        theta[c] = std::uniform_real_distribution<double>(box.lower[c], box.upper[c])(rng);
      else
        theta[c] = spec.nu0_mean + spec.nu0_std * normal(rng);
    }
    box.project(theta);
    ParamParticle p;
    p.set_theta(theta);
    p.alpha = 1.0 / static_cast<double>(spec.param_particles);
    s.nu.particles.push_back(std::move(p));
  }
  return s;
}

}  // namespace wada
