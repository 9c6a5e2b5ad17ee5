#pragma once

#include <Eigen/Dense>

#include "spincov/algebra.hpp"

namespace spincov::oracle {

using algebra::Matrix3c;
using algebra::Vector8d;

/// Density matrix from a single-atom mean vector:
/// rho = 1/3 + sum_k lambda_bar_k lambda_k / 2.
/// With `validate`, eigenvalues must be >= -1e-9.
Matrix3c rho_from_lambda(const Vector8d& lambda_bar, bool validate = true);

/// Mean vector of a density matrix, lambda_bar_i = Tr[rho lambda_i].
Vector8d lambda_from_rho(const Matrix3c& rho);

/// Exact single-atom evolution under a static uniform field, via the closed
/// form of the spin-rotation unitary. `gamma` is the signed gyromagnetic
/// ratio in rad s^-1 mG^-1, `b_mG` the field in milligauss.
Matrix3c exact_field_evolution(const Matrix3c& rho, const Eigen::Vector3d& b_mG, double t_s,
                               double gamma);

/// Reference for one probe pulse: integrates the bilinear mean-field
/// equations for (collective atomic mean, pulse Stokes mean) with a classical
/// fourth-order Runge-Kutta scheme over the full pulse. The atomic right-hand
/// side is evaluated through commutators in the 3x3 matrix representation.
/// Couplings g1, g2 are the per-pulse rotation strengths; no scattering.
struct PulseOracleResult {
  Vector8d collective_atomic;
  Eigen::Vector3d stokes;
};
PulseOracleResult heisenberg_pulse_oracle(const Vector8d& collective_atomic,
                                          const Eigen::Vector3d& stokes, double g1, double g2,
                                          int fine_steps);

}  // namespace spincov::oracle
