#pragma once

// Nash-gap estimation by approximate best responses, and PGD robustness evaluation.
//
// The adversary's problem decomposes over anchors because U is linear in pi and the
// constraint only fixes the first marginal: sup_pi U(pi, nu) = sum_i m_i max_z~ phi_i(z~),
// phi_i(z~) = l(h_nu(x~), y~) - c_a |z_i - z~|^2. The best response is one Dirac per anchor.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "wada/data.hpp"
#include "wada/dynamics.hpp"
#include "wada/errors.hpp"
#include "wada/measures.hpp"
#include "wada/payoff.hpp"
#include "wada/util.hpp"

namespace wada {

struct AdversaryOptions {
  std::size_t restarts = 8;      // uniform box samples per anchor, on top of the anchor itself
  std::size_t iterations = 200;  // ascent iterations per start
  bool reference_starts = true;  // also start from the best atom of the reference group
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct LearnerOptions {
  std::size_t epochs = 5;
  std::size_t iterations_per_epoch = 20;
  bool update_weights = false;  // weights stay frozen unless set
  double kappa = 0.25;          // weight step scale when update_weights is set
  unsigned threads = 1;
};

struct NashOptions {
  AdversaryOptions adversary;
  LearnerOptions learner;
};

struct NashGapReport {
  double payoff_at_solution = 0.0;
  double best_response_payoff_adv = 0.0;
  double best_response_payoff_learner = 0.0;
  double gap = 0.0;
  double r_a = 0.0;
  double r_m = 0.0;
  bool degenerate = false;  // |value| < 1e-12: r_a and r_m hold absolute gaps
};

struct PgdConfig {
  std::size_t steps = 20;
  double step_size = 0.04;
  double epsilon = 0.3;  // l-infinity radius around the clean input

  void validate() const {
    if (!(step_size >= 0.0)) throw InvalidConfig("PGD step size must be non-negative");
    if (!(epsilon >= 0.0)) throw InvalidConfig("PGD epsilon must be non-negative");
  }
};

template <typename Measure>
struct BestResponse {
  Measure measure;
  double payoff = 0.0;
};

namespace detail {

/// Monotone projected gradient ascent with backtracking from a unit step.
template <typename Objective, typename Gradient>
double projected_ascent(Vec& z, const Box& box, std::size_t iterations, Objective&& phi, Gradient&& grad) {
  box.project(z);
  double f = phi(z);
  for (std::size_t it = 0; it < iterations; ++it) {
    const Vec g = grad(z);
    if (norm(g) == 0.0) break;
    bool improved = false;
    for (double s = 1.0; s > 1e-12; s *= 0.5) {
      Vec cand = z;
      for (std::size_t c = 0; c < cand.size(); ++c) cand[c] += s * g[c];
      box.project(cand);
      const double fc = phi(cand);
      if (fc > f) {
        z = std::move(cand);
        f = fc;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return f;
}

}  // namespace detail

/// Best response of the adversary to nu_bar over couplings with the reference's first marginal.
inline BestResponse<CouplingMeasure> adversary_best_response(const ParamMeasure& nu_bar,
                                                             const CouplingMeasure& reference,
                                                             const PayoffModel& model,
                                                             const AdversaryOptions& opts = {}) {
  const Box& box = reference.z_box;
  BestResponse<CouplingMeasure> out;
  out.measure.z_box = box;
  std::vector<Vec> best_points(reference.groups.size());
  Vec best_values(reference.groups.size());
  parallel_for(reference.groups.size(), opts.threads, [&](std::size_t i) {
    const auto& g = reference.groups[i];
    auto phi = [&](const Vec& zt) { return u_pi(reference, nu_bar, model, g.anchor(), zt); };
    auto grad = [&](const Vec& zt) { return grad_u_pi(reference, nu_bar, model, g.anchor(), zt); };
    std::vector<Vec> starts{g.anchor()};
    if (opts.reference_starts && !g.attacks.empty()) {
      const Attack* top = &g.attacks.front();
      double top_val = -std::numeric_limits<double>::infinity();
      for (const auto& at : g.attacks) {
        const double v = phi(at.z);
        if (v > top_val) {
          top_val = v;
          top = &at;
        }
      }
      starts.push_back(top->z);
    }
    Rng rng = make_rng(opts.seed, "eval.adversary", i);
    for (std::size_t r = 0; r < opts.restarts; ++r) {
      Vec z(box.dim());
      for (std::size_t c = 0; c < z.size(); ++c)
        z[c] = std::uniform_real_distribution<double>(box.lower[c], box.upper[c])(rng);
      if (model.attack_target == AttackTarget::x_only) z.back() = g.anchor().back();
      starts.push_back(std::move(z));
    }
    double best = -std::numeric_limits<double>::infinity();
    for (auto& z : starts) {
      const double f = detail::projected_ascent(z, box, opts.iterations, phi, grad);
      if (f > best) {
        best = f;
        best_points[i] = z;
      }
    }
    best_values[i] = best;
  });
  CompensatedSum total;
  for (std::size_t i = 0; i < reference.groups.size(); ++i) {
    const auto& g = reference.groups[i];
    out.measure.groups.emplace_back(g.anchor(), std::vector<Attack>{{best_points[i], g.group_mass()}},
                                    g.group_mass());
    total.add(g.group_mass() * best_values[i]);
  }
  out.payoff = total.value();
  return out;
}

/// Same, with the data measure given as a dataset with uniform masses.
inline BestResponse<CouplingMeasure> adversary_best_response(const ParamMeasure& nu_bar, const Dataset& data,
                                                             const PayoffModel& model,
                                                             const AdversaryOptions& opts = {}) {
  InitSpec spec;
  spec.param_particles = 1;
  spec.theta_box = nu_bar.theta_box;
  auto state = init_state(data, spec);
  auto o = opts;
  o.reference_starts = false;
  return adversary_best_response(nu_bar, state.pi, model, o);
}

/// Descent-only refit of the learner against a fixed pi_bar: projected steps along
/// -grad U_nu with backtracking, accepted only when the payoff decreases.
inline BestResponse<ParamMeasure> learner_best_response(const CouplingMeasure& pi_bar, const ParamMeasure& nu_init,
                                                        const PayoffModel& model, const LearnerOptions& opts = {}) {
  ParamMeasure nu = nu_init;
  double f = payoff(pi_bar, nu, model, opts.threads);
  const std::size_t total = opts.epochs * opts.iterations_per_epoch;
  for (std::size_t it = 0; it < total; ++it) {
    const auto sens = risk_sensitivity(pi_bar, nu, model, opts.threads);
    std::vector<Vec> grads(nu.size());
    Vec values(nu.size());
    parallel_for(nu.size(), opts.threads, [&](std::size_t k) {
      const Vec theta = nu.particles[k].theta();
      grads[k] = grad_u_nu(sens, model.activation, theta);
      values[k] = u_nu(sens, model.activation, theta);
    });
    bool improved = false;
    for (double s = 1.0; s > 1e-12; s *= 0.5) {
      ParamMeasure cand = nu;
      for (std::size_t k = 0; k < nu.size(); ++k) {
        Vec theta = nu.particles[k].theta();
        for (std::size_t c = 0; c < theta.size(); ++c) theta[c] -= s * grads[k][c];
        cand.theta_box.project(theta);
        cand.particles[k].set_theta(theta);
      }
      if (opts.update_weights) {
        Vec w(nu.size());
        for (std::size_t k = 0; k < nu.size(); ++k) w[k] = nu.particles[k].alpha;
        const Vec nw = reweight(w, values, -s * opts.kappa, 1.0);
        for (std::size_t k = 0; k < nu.size(); ++k) cand.particles[k].alpha = nw[k];
      }
      const double fc = payoff(pi_bar, cand, model, opts.threads);
      if (fc < f) {
        nu = std::move(cand);
        f = fc;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return {std::move(nu), f};
}

inline NashGapReport nash_gap(const CouplingMeasure& pi_bar, const ParamMeasure& nu_bar, const PayoffModel& model,
                              const NashOptions& opts = {}) {
  NashGapReport r;
  r.payoff_at_solution = payoff(pi_bar, nu_bar, model, opts.learner.threads);
  r.best_response_payoff_adv = adversary_best_response(nu_bar, pi_bar, model, opts.adversary).payoff;
  r.best_response_payoff_learner = learner_best_response(pi_bar, nu_bar, model, opts.learner).payoff;
  const double adv_gain = r.best_response_payoff_adv - r.payoff_at_solution;
  const double learner_gain = r.payoff_at_solution - r.best_response_payoff_learner;
  r.gap = adv_gain + learner_gain;
  const double value = std::abs(r.payoff_at_solution);
  r.degenerate = value < 1e-12;
  r.r_a = r.degenerate ? adv_gain : adv_gain / value;
  r.r_m = r.degenerate ? learner_gain : learner_gain / value;
  return r;
}

// ---------------------------------------------------------------------------
// Robustness

/// Sign-gradient PGD on the inputs, each iterate clipped to the epsilon ball and the data box.
inline Dataset pgd_attack(const ParamMeasure& nu, const Dataset& data, const PayoffModel& model,
                          const PgdConfig& pgd) {
  pgd.validate();
  Dataset out = data;
  const std::size_t d = data.input_dim();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec& x0 = data.inputs[i];
    Vec& x = out.inputs[i];
    for (std::size_t s = 0; s < pgd.steps; ++s) {
      const double h = predict(nu, x, model.activation);
      const double dl = model.loss.d_prediction(h, data.labels[i]);
      const Vec dh = predict_input_gradient(nu, x, model.activation);
      for (std::size_t c = 0; c < d; ++c) {
        const double g = dl * dh[c];
        const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
        const double lo = std::max(x0[c] - pgd.epsilon, data.box.lower[c]);
        const double hi = std::min(x0[c] + pgd.epsilon, data.box.upper[c]);
        x[c] = std::clamp(x[c] + pgd.step_size * sign, lo, hi);
      }
    }
  }
  return out;
}

/// Fraction of points whose thresholded prediction matches the label; h >= threshold is class 1.
inline double accuracy(const ParamMeasure& nu, const Dataset& data, const Activation& act, double threshold = 0.5) {
  if (data.size() == 0) throw EmptyDataset();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool predicted = predict(nu, data.inputs[i], act) >= threshold;
    const bool actual = data.labels[i] >= 0.5;
    if (predicted == actual) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace wada
