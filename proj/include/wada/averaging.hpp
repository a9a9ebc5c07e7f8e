#pragma once

// Time averages of the measure trajectory, as a uniform mixture over absorbed snapshots.
// Three memory regimes:
//   full_mixture   every snapshot kept, snapshot s carries mass 1/S
//   weights_only   running mean of the weights, positions from the latest snapshot
//   rsr_capped     merge then residual systematic resampling down to a fixed support size;
//                  coupling groups are resampled one by one so the anchors keep their mass

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "wada/errors.hpp"
#include "wada/measures.hpp"
#include "wada/util.hpp"

namespace wada {

enum class AveragerKind { full_mixture, weights_only, rsr_capped };

struct AveragerSpec {
  AveragerKind kind = AveragerKind::full_mixture;
  std::size_t capacity = 0;  // M', rsr_capped only
  std::uint64_t seed = 0;
};

struct AveragedMeasures {
  ParamMeasure nu_bar;
  CouplingMeasure pi_bar;
  std::size_t snapshots_used = 0;
};

/// Residual systematic resampling: copy counts for `m` draws from `weights` using a
/// single uniform `u01` in [0,1). E[count_i] = m * w_i / sum(w), and sum(count) = m.
inline std::vector<std::size_t> rsr_counts(std::span<const double> weights, std::size_t m, double u01) {
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty() || m == 0) return counts;
  const double total = compensated_sum(weights);
  const double md = static_cast<double>(m);
  double u = u01 / md;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i] / total;
    const double c = std::max(0.0, std::floor((w - u) * md) + 1.0);
    counts[i] = static_cast<std::size_t>(c);
    assigned += counts[i];
    u += c / md - w;
  }
  // Rounding can leave the total one off; settle it on the heaviest atoms.
  while (assigned > m) {
    std::size_t j = 0;
    for (std::size_t i = 1; i < counts.size(); ++i)
      if (counts[i] > counts[j]) j = i;
    --counts[j];
    --assigned;
  }
  while (assigned < m) {
    std::size_t j = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double residual = md * weights[i] / total - static_cast<double>(counts[i]);
      if (residual > best) {
        best = residual;
        j = i;
      }
    }
    ++counts[j];
    ++assigned;
  }
  return counts;
}

/// Indices of the resampled atoms, in input order.
inline std::vector<std::size_t> rsr_select(std::span<const double> weights, std::size_t m, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto counts = rsr_counts(weights, m, unif(rng));
  std::vector<std::size_t> idx;
  idx.reserve(m);
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t c = 0; c < counts[i]; ++c) idx.push_back(i);
  return idx;
}

class Averager {
public:
  explicit Averager(AveragerSpec spec) : spec_(spec), rng_(make_rng(spec.seed, "averaging")) {
    if (spec_.kind == AveragerKind::rsr_capped && spec_.capacity == 0) throw CapacityZero();
  }

  const AveragerSpec& spec() const noexcept { return spec_; }
  std::size_t snapshots() const noexcept { return count_; }

  void absorb(const CouplingMeasure& pi, const ParamMeasure& nu, std::size_t step) {
    last_step_ = step;
    switch (spec_.kind) {
      case AveragerKind::full_mixture: absorb_mixture(pi, nu); break;
      case AveragerKind::weights_only: absorb_weights(pi, nu); break;
      case AveragerKind::rsr_capped: absorb_rsr(pi, nu); break;
    }
    ++count_;
  }

  AveragedMeasures finalize() const {
    if (count_ == 0) throw EmptyAverage();
    AveragedMeasures out{nu_, pi_, count_};
    if (spec_.kind == AveragerKind::rsr_capped) return out;
    // full_mixture and weights_only hold raw weight sums over the snapshots.
    const double inv = 1.0 / static_cast<double>(count_);
    for (auto& p : out.nu_bar.particles) p.alpha *= inv;
    for (auto& g : out.pi_bar.groups)
      for (auto& at : g.attacks) at.omega *= inv;
    return out;
  }

  std::size_t last_step() const noexcept { return last_step_; }

private:
  void absorb_mixture(const CouplingMeasure& pi, const ParamMeasure& nu) {
    if (count_ == 0) {
      pi_ = pi;
      nu_ = nu;
      return;
    }
    check_same_groups(pi);
    for (std::size_t i = 0; i < pi.groups.size(); ++i) {
      auto& dst = pi_.groups[i].attacks;
      dst.insert(dst.end(), pi.groups[i].attacks.begin(), pi.groups[i].attacks.end());
    }
    nu_.particles.insert(nu_.particles.end(), nu.particles.begin(), nu.particles.end());
  }

  void absorb_weights(const CouplingMeasure& pi, const ParamMeasure& nu) {
    if (count_ == 0) {
      pi_ = pi;
      nu_ = nu;
      return;
    }
    check_same_groups(pi);
    if (nu.size() != nu_.size()) throw InvalidMeasure("weights_only averaging needs a fixed particle count");
    for (std::size_t k = 0; k < nu.size(); ++k) {
      const double sum = nu_.particles[k].alpha + nu.particles[k].alpha;
      nu_.particles[k] = nu.particles[k];
      nu_.particles[k].alpha = sum;
    }
    for (std::size_t i = 0; i < pi.groups.size(); ++i) {
      auto& dst = pi_.groups[i].attacks;
      const auto& src = pi.groups[i].attacks;
      if (dst.size() != src.size()) throw InvalidMeasure("weights_only averaging needs a fixed attack count");
      for (std::size_t j = 0; j < src.size(); ++j) {
        dst[j].z = src[j].z;
        dst[j].omega += src[j].omega;
      }
    }
  }

  void absorb_rsr(const CouplingMeasure& pi, const ParamMeasure& nu) {
    if (count_ == 0) {
      pi_ = pi;
      nu_ = nu;
    } else {
      check_same_groups(pi);
      const double keep = static_cast<double>(count_) / static_cast<double>(count_ + 1);
      const double fresh = 1.0 / static_cast<double>(count_ + 1);
      for (auto& p : nu_.particles) p.alpha *= keep;
      for (auto p : nu.particles) {
        p.alpha *= fresh;
        nu_.particles.push_back(std::move(p));
      }
      for (std::size_t i = 0; i < pi.groups.size(); ++i) {
        auto& dst = pi_.groups[i].attacks;
        for (auto& at : dst) at.omega *= keep;
        for (auto at : pi.groups[i].attacks) {
          at.omega *= fresh;
          dst.push_back(std::move(at));
        }
      }
    }
    cap_params();
    for (auto& g : pi_.groups) cap_group(g);
  }

  void cap_params() {
    if (nu_.size() <= spec_.capacity) return;
    Vec w(nu_.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = nu_.particles[k].alpha;
    const auto idx = rsr_select(w, spec_.capacity, rng_);
    std::vector<ParamParticle> kept;
    kept.reserve(idx.size());
    const double mass = 1.0 / static_cast<double>(spec_.capacity);
    for (auto k : idx) {
      kept.push_back(nu_.particles[k]);
      kept.back().alpha = mass;
    }
    nu_.particles = std::move(kept);
  }

  void cap_group(AttackGroup& g) {
    if (g.attacks.size() <= spec_.capacity) return;
    Vec w(g.attacks.size());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = g.attacks[j].omega;
    const auto idx = rsr_select(w, spec_.capacity, rng_);
    std::vector<Attack> kept;
    kept.reserve(idx.size());
    const double mass = g.group_mass() / static_cast<double>(spec_.capacity);
    for (auto j : idx) {
      kept.push_back(g.attacks[j]);
      kept.back().omega = mass;
    }
    g.attacks = std::move(kept);
  }

  void check_same_groups(const CouplingMeasure& pi) const {
    if (pi.groups.size() != pi_.groups.size()) throw InvalidMeasure("snapshot has a different number of anchors");
  }

  AveragerSpec spec_;
  Rng rng_;
  std::size_t count_ = 0;
  std::size_t last_step_ = 0;
  CouplingMeasure pi_;
  ParamMeasure nu_;
};

}  // namespace wada
