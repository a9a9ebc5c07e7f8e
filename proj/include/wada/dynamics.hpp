#pragma once

// Wasserstein ascent-descent stepper.
//
// One step from (pi_t, nu_t) with learning rate eta_t:
//   attacks:     z~ <- P_Z(z~ + s grad U_pi),   omega <- omega exp(s kappa U_pi), renormalized per group
//   parameters:  th <- P_Th(th - (eta_t/K) grad U_nu),  alpha <- alpha exp(-(eta_t/K) kappa U_nu), renormalized
// where s = eta_t, or the fixed ascent_dt in strongly-concave mode (ascent block repeated K times).
// Every quantity of the new state is computed from the time-t measures (Jacobi update);
// the only exception is the repeated ascent block, whose later passes see the updated pi.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wada/averaging.hpp"
#include "wada/errors.hpp"
#include "wada/measures.hpp"
#include "wada/payoff.hpp"
#include "wada/util.hpp"

namespace wada {

enum class ScheduleKind { constant, inverse_t };

struct StepSchedule {
  ScheduleKind kind = ScheduleKind::inverse_t;
  double eta0 = 0.1;

  double eta(std::size_t t) const noexcept {
    return kind == ScheduleKind::constant ? eta0 : eta0 / static_cast<double>(t + 1);
  }
};

struct SolverConfig {
  StepSchedule schedule;
  double kappa = 0.25;
  std::size_t inner_repeats = 1;  // K
  bool ascent_uses_eta = true;    // false: strongly-concave mode
  double ascent_dt = 0.05;
  bool freeze_adversary = false;  // descent-only baseline: pi stays at its initial value
  std::size_t max_steps = 1000;
  std::size_t checkpoint_every = 10;
  std::size_t snapshot_every = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (!(schedule.eta0 > 0.0)) throw InvalidConfig("eta0 must be positive");
    if (!(kappa > 0.0)) throw InvalidConfig("kappa must be positive");
    if (inner_repeats < 1) throw InvalidConfig("inner_repeats (K) must be at least 1");
    if (!ascent_uses_eta && !(ascent_dt > 0.0)) throw InvalidConfig("ascent_dt must be positive");
    if (checkpoint_every < 1) throw InvalidConfig("checkpoint_every must be at least 1");
    if (snapshot_every < 1) throw InvalidConfig("snapshot_every must be at least 1");
  }

  std::size_t ascent_repeats() const noexcept {
    if (freeze_adversary) return 0;
    return ascent_uses_eta ? 1 : inner_repeats;
  }
  double ascent_step(std::size_t t) const noexcept { return ascent_uses_eta ? schedule.eta(t) : ascent_dt; }
  double descent_step(std::size_t t) const noexcept {
    return schedule.eta(t) / static_cast<double>(inner_repeats);
  }
};

struct SolverState {
  std::size_t t = 0;
  std::size_t ascent_steps = 0;  // ascent passes performed so far
  CouplingMeasure pi;
  ParamMeasure nu;
};

/// w_j exp(rate u_j), rescaled to `target_mass`. Shifted by max(u) for overflow safety,
/// which cancels in the normalization.
inline Vec reweight(std::span<const double> w, std::span<const double> u, double rate, double target_mass) {
  Vec out(w.size());
  if (w.empty()) return out;
  double shift = -std::numeric_limits<double>::infinity();
  for (double x : u) shift = std::max(shift, rate * x);
  CompensatedSum total;
  for (std::size_t j = 0; j < w.size(); ++j) {
    out[j] = w[j] * std::exp(rate * u[j] - shift);
    total.add(out[j]);
  }
  const double scale = target_mass / total.value();
  for (auto& x : out) x *= scale;
  return out;
}

/// Values and gradients of the first variations at every particle of the current state.
struct FirstVariationFields {
  std::vector<Vec> u_pi;                // [group][attack]
  std::vector<std::vector<Vec>> grad_pi;  // [group][attack] -> vector in Z
  Vec u_nu;                             // [particle]
  std::vector<Vec> grad_nu;             // [particle] -> vector in Theta
};

namespace detail {

inline void adversary_fields(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                             unsigned threads, std::vector<Vec>& values, std::vector<std::vector<Vec>>& grads) {
  values.resize(pi.groups.size());
  grads.resize(pi.groups.size());
  parallel_for(pi.groups.size(), threads, [&](std::size_t i) {
    const auto& g = pi.groups[i];
    values[i].resize(g.attacks.size());
    grads[i].resize(g.attacks.size());
    for (std::size_t j = 0; j < g.attacks.size(); ++j) {
      auto vg = u_pi_with_gradient(nu, model, g.anchor(), g.attacks[j].z);
      values[i][j] = vg.value;
      grads[i][j] = std::move(vg.gradient);
    }
  });
}

inline void learner_fields(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                           unsigned threads, Vec& values, std::vector<Vec>& grads) {
  const auto sens = risk_sensitivity(pi, nu, model, threads);
  values.resize(nu.size());
  grads.resize(nu.size());
  parallel_for(nu.size(), threads, [&](std::size_t k) {
    const Vec theta = nu.particles[k].theta();
    values[k] = u_nu(sens, model.activation, theta);
    grads[k] = grad_u_nu(sens, model.activation, theta);
  });
}

inline void check_finite(const SolverState& s) {
  for (std::size_t i = 0; i < s.pi.groups.size(); ++i)
    for (const auto& at : s.pi.groups[i].attacks)
      if (!std::isfinite(at.omega) || !all_finite(at.z))
        throw NonFinite("non-finite attack particle in group " + std::to_string(i) + " after step " +
                        std::to_string(s.t));
  for (std::size_t k = 0; k < s.nu.size(); ++k) {
    const auto& p = s.nu.particles[k];
    if (!std::isfinite(p.alpha) || !std::isfinite(p.a) || !all_finite(p.b))
      throw NonFinite("non-finite parameter particle " + std::to_string(k) + " after step " + std::to_string(s.t));
  }
}

}  // namespace detail

inline FirstVariationFields first_variation_fields(const SolverState& state, const PayoffModel& model,
                                                   unsigned threads = 1) {
  FirstVariationFields f;
  detail::adversary_fields(state.pi, state.nu, model, threads, f.u_pi, f.grad_pi);
  detail::learner_fields(state.pi, state.nu, model, threads, f.u_nu, f.grad_nu);
  return f;
}

/// One ascent pass on pi against a fixed nu with step `s`.
inline CouplingMeasure ascent_pass(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                                   double s, double kappa, unsigned threads = 1) {
  std::vector<Vec> values;
  std::vector<std::vector<Vec>> grads;
  detail::adversary_fields(pi, nu, model, threads, values, grads);
  CouplingMeasure next = pi;
  parallel_for(next.groups.size(), threads, [&](std::size_t i) {
    auto& g = next.groups[i];
    Vec w(g.attacks.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      auto& z = g.attacks[j].z;
      for (std::size_t c = 0; c < z.size(); ++c) z[c] += s * grads[i][j][c];
      next.z_box.project(z);
      w[j] = g.attacks[j].omega;
    }
    const Vec nw = reweight(w, values[i], s * kappa, g.group_mass());
    for (std::size_t j = 0; j < w.size(); ++j) g.attacks[j].omega = nw[j];
  });
  return next;
}

/// Descent update of nu from precomputed time-t learner fields.
inline ParamMeasure descent_pass(const ParamMeasure& nu, std::span<const double> values,
                                 const std::vector<Vec>& grads, double s, double kappa) {
  ParamMeasure next = nu;
  Vec w(nu.size());
  for (std::size_t k = 0; k < nu.size(); ++k) {
    Vec theta = nu.particles[k].theta();
    for (std::size_t c = 0; c < theta.size(); ++c) theta[c] -= s * grads[k][c];
    next.theta_box.project(theta);
    next.particles[k].set_theta(theta);
    w[k] = nu.particles[k].alpha;
  }
  const Vec nw = reweight(w, values, -s * kappa, 1.0);
  for (std::size_t k = 0; k < nu.size(); ++k) next.particles[k].alpha = nw[k];
  return next;
}

inline SolverState step(const SolverState& state, const PayoffModel& model, const SolverConfig& cfg) {
  Vec nu_values;
  std::vector<Vec> nu_grads;
  detail::learner_fields(state.pi, state.nu, model, cfg.threads, nu_values, nu_grads);

  SolverState next;
  next.t = state.t + 1;
  next.ascent_steps = state.ascent_steps;
  next.pi = state.pi;
  const double sa = cfg.ascent_step(state.t);
  for (std::size_t r = 0; r < cfg.ascent_repeats(); ++r) {
    next.pi = ascent_pass(next.pi, state.nu, model, sa, cfg.kappa, cfg.threads);
    ++next.ascent_steps;
  }
  next.nu = descent_pass(state.nu, nu_values, nu_grads, cfg.descent_step(state.t), cfg.kappa);
  detail::check_finite(next);
  return next;
}

/// Continuous-time right-hand side in the stepper's own clock (a step of size eta advances time by eta).
struct OdeRates {
  std::vector<std::vector<Vec>> attack_velocity;
  std::vector<Vec> omega_rate;
  std::vector<Vec> theta_velocity;
  Vec alpha_rate;
};

inline OdeRates ode_rhs(const SolverState& state, const PayoffModel& model, const SolverConfig& cfg) {
  const auto f = first_variation_fields(state, model, cfg.threads);
  const double k_inv = 1.0 / static_cast<double>(cfg.inner_repeats);
  OdeRates r;
  r.attack_velocity = f.grad_pi;
  r.omega_rate.resize(state.pi.groups.size());
  for (std::size_t i = 0; i < state.pi.groups.size(); ++i) {
    const auto& g = state.pi.groups[i];
    CompensatedSum mean;
    for (std::size_t j = 0; j < g.attacks.size(); ++j) mean.add(g.attacks[j].omega * f.u_pi[i][j]);
    const double m = mean.value() / g.group_mass();
    r.omega_rate[i].resize(g.attacks.size());
    for (std::size_t j = 0; j < g.attacks.size(); ++j)
      r.omega_rate[i][j] = cfg.kappa * g.attacks[j].omega * (f.u_pi[i][j] - m);
  }
  CompensatedSum mean;
  for (std::size_t k = 0; k < state.nu.size(); ++k) mean.add(state.nu.particles[k].alpha * f.u_nu[k]);
  const double m = mean.value();
  r.theta_velocity.resize(state.nu.size());
  r.alpha_rate.resize(state.nu.size());
  for (std::size_t k = 0; k < state.nu.size(); ++k) {
    r.theta_velocity[k] = f.grad_nu[k];
    for (auto& v : r.theta_velocity[k]) v *= -k_inv;
    r.alpha_rate[k] = -cfg.kappa * k_inv * state.nu.particles[k].alpha * (f.u_nu[k] - m);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Run loop

struct TraceRow {
  std::size_t step = 0;
  double payoff = 0.0;
  double mass_residual_pi = 0.0;
  double mass_residual_nu = 0.0;
  double entropy_mean = 0.0;
  double eta_t = 0.0;
};

struct Snapshot {
  std::size_t step = 0;
  CouplingMeasure pi;
  ParamMeasure nu;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<Snapshot> snapshots;
  SolverState final_state;
};

struct RunHooks {
  Averager* averager = nullptr;  // absorbs every checkpoint
  bool keep_snapshots = false;   // store full measures every snapshot_every steps
  std::function<void(const SolverState&, const Averager*)> on_checkpoint;
};

inline TraceRow checkpoint_row(const SolverState& s, const PayoffModel& model, const SolverConfig& cfg) {
  const auto res = mass_residuals(s.pi, s.nu);
  return {s.t,
          payoff(s.pi, s.nu, model, cfg.threads),
          std::max(res.group_max, res.pi_total),
          res.nu_total,
          mean_conditional_entropy(s.pi),
          cfg.schedule.eta(s.t)};
}

inline RunTrace run(SolverState initial, const PayoffModel& model, const SolverConfig& cfg, RunHooks hooks = {}) {
  cfg.validate();
  model.validate();
  RunTrace trace;
  SolverState state = std::move(initial);
  auto visit = [&](bool force) {
    const bool at_checkpoint = state.t % cfg.checkpoint_every == 0 || force;
    if (hooks.keep_snapshots && (state.t % cfg.snapshot_every == 0 || force))
      if (trace.snapshots.empty() || trace.snapshots.back().step != state.t)
        trace.snapshots.push_back({state.t, state.pi, state.nu});
    if (!at_checkpoint) return;
    if (!trace.rows.empty() && trace.rows.back().step == state.t) return;
    trace.rows.push_back(checkpoint_row(state, model, cfg));
    if (hooks.averager) hooks.averager->absorb(state.pi, state.nu, state.t);
    if (hooks.on_checkpoint) hooks.on_checkpoint(state, hooks.averager);
  };
  visit(false);
  const std::size_t end = state.t + cfg.max_steps;
  while (state.t < end) {
    state = step(state, model, cfg);
    visit(state.t == end);
  }
  trace.final_state = std::move(state);
  return trace;
}

// RunTrace CSV: step,payoff,mass_residual_pi,mass_residual_nu,entropy_mean,eta_t
inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "step,payoff,mass_residual_pi,mass_residual_nu,entropy_mean,eta_t\n";
  for (const auto& r : rows)
    os << r.step << ',' << csv::format_double(r.payoff) << ',' << csv::format_double(r.mass_residual_pi) << ','
       << csv::format_double(r.mass_residual_nu) << ',' << csv::format_double(r.entropy_mean) << ','
       << csv::format_double(r.eta_t) << '\n';
}

}  // namespace wada
