#pragma once

// Payoff of the adversarial regression game with a mean-field shallow network
//   h_nu(x)  = sum_k alpha_k a_k f(b_k . x)
//   U(pi,nu) = sum_ij omega_ij [ l(h_nu(x~_ij), y~_ij) - c_a |z_i - z~_ij|^2 ]
// together with its first variations U_pi, U_nu and their Euclidean gradients.
// A point z is stored as (x_1..x_d, y); a parameter theta as (a, b_1..b_d).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "wada/errors.hpp"
#include "wada/measures.hpp"
#include "wada/util.hpp"

namespace wada {

enum class ActivationKind { sigmoid, relu, squared_relu };
enum class LossKind { squared, logistic };
enum class AttackTarget { full_z, x_only };

struct Activation {
  ActivationKind kind = ActivationKind::sigmoid;

  double value(double t) const noexcept {
    switch (kind) {
      case ActivationKind::sigmoid:
        return 1.0 / (1.0 + std::exp(-t));
      case ActivationKind::relu:
        return t > 0.0 ? t : 0.0;
      case ActivationKind::squared_relu:
        return t > 0.0 ? t * t : 0.0;
    }
    return 0.0;
  }

  struct ValueSlope {
    double value;
    double slope;
  };

  ValueSlope value_and_derivative(double t) const noexcept {
    switch (kind) {
      case ActivationKind::sigmoid: {
        const double f = 1.0 / (1.0 + std::exp(-t));
        return {f, f * (1.0 - f)};
      }
      case ActivationKind::relu:
        return t > 0.0 ? ValueSlope{t, 1.0} : ValueSlope{0.0, 0.0};
      case ActivationKind::squared_relu:
        return t > 0.0 ? ValueSlope{t * t, 2.0 * t} : ValueSlope{0.0, 0.0};
    }
    return {0.0, 0.0};
  }

  // relu'(0) := 0
  double derivative(double t) const noexcept {
    switch (kind) {
      case ActivationKind::sigmoid: {
        const double f = 1.0 / (1.0 + std::exp(-t));
        return f * (1.0 - f);
      }
      case ActivationKind::relu:
        return t > 0.0 ? 1.0 : 0.0;
      case ActivationKind::squared_relu:
        return t > 0.0 ? 2.0 * t : 0.0;
    }
    return 0.0;
  }
};

struct Loss {
  LossKind kind = LossKind::squared;
  static constexpr double kLogFloor = 1e-12;

  // l(y, y'): y is the prediction, y' the label.
  double value(double y, double label) const {
    switch (kind) {
      case LossKind::squared:
        return (y - label) * (y - label);
      case LossKind::logistic:
        check_label(label);
        return -std::log(std::max(std::abs(1.0 - label - y), kLogFloor));
    }
    return 0.0;
  }

  double d_prediction(double y, double label) const {
    switch (kind) {
      case LossKind::squared:
        return 2.0 * (y - label);
      case LossKind::logistic:
        return logistic_slope(y, label);
    }
    return 0.0;
  }

  double d_label(double y, double label) const {
    switch (kind) {
      case LossKind::squared:
        return 2.0 * (label - y);
      case LossKind::logistic:
        return logistic_slope(y, label);
    }
    return 0.0;
  }

private:
  static void check_label(double label) {
    if (!(label >= 0.0 && label <= 1.0))
      throw LogisticDomain("logistic loss needs labels in [0,1], got " + std::to_string(label));
  }
  // d/dy of -log|1 - y' - y| is 1/(1 - y' - y); zero inside the clamped band.
  static double logistic_slope(double y, double label) {
    check_label(label);
    const double u = 1.0 - label - y;
    return std::abs(u) > kLogFloor ? 1.0 / u : 0.0;
  }
};

struct PayoffModel {
  Activation activation;
  Loss loss;
  double c_a = 10.0;
  AttackTarget attack_target = AttackTarget::full_z;

  void validate() const {
    if (!(c_a > 0.0)) throw InvalidConfig("c_a must be positive");
  }
};

inline std::string_view to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::relu: return "relu";
    case ActivationKind::squared_relu: return "squared_relu";
  }
  return "?";
}
inline std::string_view to_string(LossKind k) { return k == LossKind::squared ? "squared" : "logistic"; }
inline std::string_view to_string(AttackTarget k) { return k == AttackTarget::full_z ? "full_z" : "x_only"; }

// ---------------------------------------------------------------------------
// Network evaluation

inline double predict(const ParamMeasure& nu, std::span<const double> x, const Activation& act) {
  if (x.size() != nu.input_dim()) throw DimensionMismatch("input has dimension " + std::to_string(x.size()) +
                                                          ", network expects " + std::to_string(nu.input_dim()));
  double h = 0.0;
  for (const auto& p : nu.particles) h += p.alpha * p.a * act.value(dot(p.b, x));
  return h;
}

inline double predict(const ParamMeasure& nu, std::span<const double> x, const PayoffModel& model) {
  return predict(nu, x, model.activation);
}

/// Gradient of h_nu with respect to its input.
inline Vec predict_input_gradient(const ParamMeasure& nu, std::span<const double> x, const Activation& act) {
  Vec g(x.size(), 0.0);
  for (const auto& p : nu.particles) {
    const double s = p.alpha * p.a * act.derivative(dot(p.b, x));
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += s * p.b[c];
  }
  return g;
}

namespace detail {

inline std::span<const double> input_of(std::span<const double> z) { return z.first(z.size() - 1); }
inline double label_of(std::span<const double> z) { return z.back(); }

inline void check_point(const CouplingMeasure& pi, std::span<const double> z) {
  if (z.size() != pi.z_dim()) throw DimensionMismatch("point has dimension " + std::to_string(z.size()) +
                                                      ", data box has " + std::to_string(pi.z_dim()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Payoff and adversary side

/// U(pi, nu), accumulated with compensated summation in a fixed order.
inline double payoff(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                     unsigned threads = 1) {
  std::vector<const Attack*> atoms;
  std::vector<const Vec*> anchors;
  for (const auto& g : pi.groups)
    for (const auto& at : g.attacks) {
      atoms.push_back(&at);
      anchors.push_back(&g.anchor());
    }
  Vec terms(atoms.size());
  parallel_for(atoms.size(), threads, [&](std::size_t p) {
    const auto& z = atoms[p]->z;
    const double h = predict(nu, detail::input_of(z), model.activation);
    terms[p] = atoms[p]->omega *
               (model.loss.value(h, detail::label_of(z)) - model.c_a * squared_distance(*anchors[p], z));
  });
  return compensated_sum(terms);
}

/// First variation in pi at (z, z~). Independent of pi for this payoff.
inline double u_pi(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                   std::span<const double> z, std::span<const double> z_tilde) {
  detail::check_point(pi, z);
  detail::check_point(pi, z_tilde);
  const double h = predict(nu, detail::input_of(z_tilde), model.activation);
  return model.loss.value(h, detail::label_of(z_tilde)) - model.c_a * squared_distance(z, z_tilde);
}

/// Gradient of U_pi in z~; the label component is zero when only inputs are attacked.
inline Vec grad_u_pi(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                     std::span<const double> z, std::span<const double> z_tilde) {
  detail::check_point(pi, z);
  detail::check_point(pi, z_tilde);
  const auto x = detail::input_of(z_tilde);
  const double y = detail::label_of(z_tilde);
  const double h = predict(nu, x, model.activation);
  const Vec dh = predict_input_gradient(nu, x, model.activation);
  const double dl = model.loss.d_prediction(h, y);
  Vec g(z_tilde.size());
  for (std::size_t c = 0; c < x.size(); ++c) g[c] = dl * dh[c] - 2.0 * model.c_a * (z_tilde[c] - z[c]);
  const std::size_t ly = z_tilde.size() - 1;
  g[ly] = model.attack_target == AttackTarget::x_only
              ? 0.0
              : model.loss.d_label(h, y) - 2.0 * model.c_a * (z_tilde[ly] - z[ly]);
  return g;
}

struct ValueAndGradient {
  double value = 0.0;
  Vec gradient;
};

/// U_pi and its z~-gradient from a single pass over the network; no dimension checks.
inline ValueAndGradient u_pi_with_gradient(const ParamMeasure& nu, const PayoffModel& model,
                                           std::span<const double> z, std::span<const double> z_tilde) {
  const std::size_t d = z_tilde.size() - 1;
  const auto x = z_tilde.first(d);
  const double y = z_tilde[d];
  double h = 0.0;
  Vec dh(d, 0.0);
  for (const auto& p : nu.particles) {
    const auto [f, df] = model.activation.value_and_derivative(dot(p.b, x));
    const double w = p.alpha * p.a;
    h += w * f;
    for (std::size_t c = 0; c < d; ++c) dh[c] += w * df * p.b[c];
  }
  ValueAndGradient out;
  out.value = model.loss.value(h, y) - model.c_a * squared_distance(z, z_tilde);
  const double dl = model.loss.d_prediction(h, y);
  out.gradient.resize(d + 1);
  for (std::size_t c = 0; c < d; ++c) out.gradient[c] = dl * dh[c] - 2.0 * model.c_a * (z_tilde[c] - z[c]);
  out.gradient[d] = model.attack_target == AttackTarget::x_only
                        ? 0.0
                        : model.loss.d_label(h, y) - 2.0 * model.c_a * (z_tilde[d] - z[d]);
  return out;
}

// ---------------------------------------------------------------------------
// Learner side

/// Attack inputs with their weights omega * dl/dy(h(x~), y~): everything U_nu needs from pi.
struct RiskSensitivity {
  std::vector<Vec> inputs;
  Vec weights;
};

inline RiskSensitivity risk_sensitivity(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                                        unsigned threads = 1) {
  RiskSensitivity s;
  std::vector<const Attack*> atoms;
  for (const auto& g : pi.groups)
    for (const auto& at : g.attacks) atoms.push_back(&at);
  s.inputs.resize(atoms.size());
  s.weights.resize(atoms.size());
  parallel_for(atoms.size(), threads, [&](std::size_t p) {
    const auto& z = atoms[p]->z;
    const auto x = detail::input_of(z);
    s.inputs[p].assign(x.begin(), x.end());
    const double h = predict(nu, x, model.activation);
    s.weights[p] = atoms[p]->omega * model.loss.d_prediction(h, detail::label_of(z));
  });
  return s;
}

inline double u_nu(const RiskSensitivity& s, const Activation& act, std::span<const double> theta) {
  const double a = theta[0];
  const auto b = theta.subspan(1);
  CompensatedSum acc;
  for (std::size_t p = 0; p < s.inputs.size(); ++p) acc.add(s.weights[p] * a * act.value(dot(b, s.inputs[p])));
  return acc.value();
}

inline Vec grad_u_nu(const RiskSensitivity& s, const Activation& act, std::span<const double> theta) {
  const double a = theta[0];
  const auto b = theta.subspan(1);
  Vec g(theta.size(), 0.0);
  for (std::size_t p = 0; p < s.inputs.size(); ++p) {
    const auto& x = s.inputs[p];
    const double t = dot(b, x);
    g[0] += s.weights[p] * act.value(t);
    const double sd = s.weights[p] * a * act.derivative(t);
    for (std::size_t c = 0; c < x.size(); ++c) g[1 + c] += sd * x[c];
  }
  return g;
}

/// First variation in nu at theta = (a, b).
inline double u_nu(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                   std::span<const double> theta) {
  if (theta.size() != nu.theta_box.dim()) throw DimensionMismatch("theta has wrong dimension");
  return u_nu(risk_sensitivity(pi, nu, model), model.activation, theta);
}

inline Vec grad_u_nu(const CouplingMeasure& pi, const ParamMeasure& nu, const PayoffModel& model,
                     std::span<const double> theta) {
  if (theta.size() != nu.theta_box.dim()) throw DimensionMismatch("theta has wrong dimension");
  return grad_u_nu(risk_sensitivity(pi, nu, model), model.activation, theta);
}

}  // namespace wada
