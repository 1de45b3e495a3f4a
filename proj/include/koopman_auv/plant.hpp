#pragma once

#include <span>
#include <vector>

namespace koopman_auv {

/// Physical constants of the single-screw surge model. Defaults are the
/// reference vehicle used throughout the experiments.
struct PlantParams {
  double m = 146.471;          // vehicle mass [kg]
  double x_vdot = -4.876161;   // added inertia [kg]
  double x_vv = -6.2282;       // quadratic drag coefficient [kg/m]
  double t_ded = 0.1;          // thrust deduction number
  double rho = 1000.0;         // water density [kg/m^3]
  double d = 0.2;              // propeller diameter [m]
  double alpha1 = 0.2;         // thrust coefficient intercept
  double alpha2 = 0.1;         // thrust coefficient slope in advance ratio
  double omega = 0.1;          // wake fraction

  /// Throws std::invalid_argument when a physical invariant is broken.
  void validate() const;

  double effective_inertia() const { return m - x_vdot; }
};

struct DerivedThrustCoefficients {
  double t_ss = 0.0;   // coefficient of |s|s
  double t_sva = 0.0;  // coefficient of |s|Va
};

enum class Integrator { kRk4, kEuler };

DerivedThrustCoefficients derive_thrust_coefficients(const PlantParams& params);

/// Propeller thrust T(s, Va) with advance velocity Va = (1 - omega) v.
double thrust(double s, double v, const PlantParams& params);

/// Surge acceleration for speed v under propeller speed s and an external
/// force x_e.
double surge_derivative(double v, double s, const PlantParams& params,
                        double x_e = 0.0);

// Both steppers hold s constant over [t, t + dt].
double rk4_step(double v, double s, double dt, const PlantParams& params,
                double x_e = 0.0);
double euler_step(double v, double s, double dt, const PlantParams& params,
                  double x_e = 0.0);

double step(double v, double s, double dt, const PlantParams& params,
            Integrator method, double x_e = 0.0);

/// Returns [v0, v1, ..., v_L] for L = inputs.size(). Throws
/// std::invalid_argument on empty or non-finite input and dt <= 0.
std::vector<double> simulate(double v0, std::span<const double> inputs,
                             double dt, const PlantParams& params,
                             Integrator method = Integrator::kRk4);

}  // namespace koopman_auv
