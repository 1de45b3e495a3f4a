#include "koopman_auv/plant.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace koopman_auv {

void PlantParams::validate() const {
  const double values[] = {m, x_vdot, x_vv, t_ded, rho, d, alpha1, alpha2, omega};
  for (double value : values) {
    if (!std::isfinite(value)) {
      throw std::invalid_argument("plant parameters must be finite");
    }
  }
  if (m <= 0.0) throw std::invalid_argument("plant mass m must be positive");
  if (rho <= 0.0) throw std::invalid_argument("water density rho must be positive");
  if (d <= 0.0) throw std::invalid_argument("propeller diameter d must be positive");
  if (effective_inertia() == 0.0) {
    throw std::invalid_argument("effective inertia m - x_vdot must be nonzero");
  }
  if (omega < 0.0 || omega >= 1.0) {
    throw std::invalid_argument("wake fraction omega must lie in [0, 1)");
  }
}

DerivedThrustCoefficients derive_thrust_coefficients(const PlantParams& params) {
  const double d3 = params.d * params.d * params.d;
  return {params.rho * d3 * params.d * params.alpha1, params.rho * d3 * params.alpha2};
}

double thrust(double s, double v, const PlantParams& params) {
  const auto coeff = derive_thrust_coefficients(params);
  const double advance = (1.0 - params.omega) * v;
  return coeff.t_ss * std::abs(s) * s + coeff.t_sva * std::abs(s) * advance;
}

double surge_derivative(double v, double s, const PlantParams& params, double x_e) {
  const double drag = params.x_vv * std::abs(v) * v;
  return (drag + (1.0 - params.t_ded) * thrust(s, v, params) + x_e) /
         params.effective_inertia();
}

double rk4_step(double v, double s, double dt, const PlantParams& params, double x_e) {
  const double k1 = surge_derivative(v, s, params, x_e);
  const double k2 = surge_derivative(v + 0.5 * dt * k1, s, params, x_e);
  const double k3 = surge_derivative(v + 0.5 * dt * k2, s, params, x_e);
  const double k4 = surge_derivative(v + dt * k3, s, params, x_e);
  return v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double euler_step(double v, double s, double dt, const PlantParams& params, double x_e) {
  return v + dt * surge_derivative(v, s, params, x_e);
}

double step(double v, double s, double dt, const PlantParams& params, Integrator method,
            double x_e) {
  return method == Integrator::kRk4 ? rk4_step(v, s, dt, params, x_e)
                                    : euler_step(v, s, dt, params, x_e);
}

std::vector<double> simulate(double v0, std::span<const double> inputs, double dt,
                             const PlantParams& params, Integrator method) {
  if (inputs.empty()) throw std::invalid_argument("simulate: input sequence is empty");
  if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (!std::isfinite(v0)) throw std::invalid_argument("simulate: initial speed is not finite");

  std::vector<double> trajectory;
  trajectory.reserve(inputs.size() + 1);
  trajectory.push_back(v0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!std::isfinite(inputs[k])) {
      throw std::invalid_argument("simulate: input " + std::to_string(k) + " is not finite");
    }
    trajectory.push_back(step(trajectory.back(), inputs[k], dt, params, method));
  }
  return trajectory;
}

}  // namespace koopman_auv
