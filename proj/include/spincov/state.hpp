#pragma once

#include <Eigen/Dense>

#include <utility>

#include "spincov/algebra.hpp"

namespace spincov::state {

using algebra::Matrix8d;
using algebra::Vector8d;

/// Coordinate layout of the joint phase-space vector: three classical field
/// components, eight collective atomic components, then three Stokes
/// components per live probe pulse.
struct Layout {
  int n_pulses = 0;

  static constexpr int kFieldDim = 3;
  static constexpr int kAtomDim = 8;
  static constexpr int kPulseDim = 3;

  int dim() const { return kFieldDim + kAtomDim + kPulseDim * n_pulses; }
  static constexpr int field_offset() { return 0; }
  static constexpr int atom_offset() { return kFieldDim; }
  int pulse_offset(int m) const { return kFieldDim + kAtomDim + kPulseDim * m; }
};

/// Joint first and second moments of field, atoms, and live pulses. Means
/// carry their natural units: milligauss for the field block, collective spin
/// for the atomic block, photon number for Stokes blocks.
struct SystemState {
  Layout layout;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double n_atoms = 0.0;  // mean atom number, constant over a run

  Eigen::VectorBlock<Eigen::VectorXd> field_mean() { return mean.segment(0, 3); }
  Eigen::VectorBlock<Eigen::VectorXd> atomic_mean() { return mean.segment(3, 8); }
  Eigen::VectorBlock<Eigen::VectorXd> pulse_mean(int m) {
    return mean.segment(layout.pulse_offset(m), 3);
  }
  Eigen::Vector3d field_mean() const { return mean.segment<3>(0); }
  Vector8d atomic_mean() const { return mean.segment<8>(3); }
  Eigen::Vector3d pulse_mean(int m) const { return mean.segment<3>(layout.pulse_offset(m)); }

  Eigen::Block<Eigen::MatrixXd> atomic_cov() { return cov.block(3, 3, 8, 8); }
  Matrix8d atomic_cov() const { return cov.block<8, 8>(3, 3); }
};

/// Collective ensemble description: mean atom number, atom-number variance,
/// and the single-atom mean vector all atoms share.
struct EnsembleSpec {
  double n_mean = 0.0;
  double n_var = 0.0;
  Vector8d lambda_bar = Vector8d::Zero();

  /// Single-atom mean of the stretched state along a coordinate axis,
  /// axis in {'x','y','z'}, sign in {+1,-1}.
  static EnsembleSpec pumped(char axis, int sign, double n_mean, double n_var);
};

/// One linearly polarized probe pulse at the input: sx_sign +1 for h, -1 for
/// v polarization.
struct LightSpec {
  double photons = 0.0;
  double sx_sign = 1.0;
};

/// Collective mean and covariance of the atomic block:
/// mean = N lambda_bar, cov = N Gamma_lambda + dN^2 lambda_bar lambda_bar^T.
std::pair<Vector8d, Matrix8d> initial_atomic_state(const EnsembleSpec& ens);

/// Direct sum of field, atomic, and (initially zero) pulse blocks.
SystemState initial_full_state(const EnsembleSpec& ens, const Eigen::Vector3d& b_mean_mG,
                               const Eigen::Matrix3d& b_cov_mG2);

/// Appends a fresh coherent pulse block: mean (sx_sign*photons/2, 0, 0),
/// covariance photons/4 on the diagonal. Returns the new pulse index.
int append_pulse(SystemState& st, const LightSpec& light);

/// Removes pulse block m from mean and covariance.
void drop_pulse(SystemState& st, int m);

struct UncertaintyCheck {
  double margin;  // (a Gamma a)(b Gamma b) - |<commutator>|^2 / 4
  double scale;   // normalization used for the relative test
  bool ok;
};

/// Robertson-Schrodinger check for directions a and b over the full state.
/// The commutator term is evaluated from the current means through the
/// structure constants (atomic block) and the Stokes triple (pulse blocks).
UncertaintyCheck check_uncertainty(const SystemState& st, const Eigen::VectorXd& a,
                                   const Eigen::VectorXd& b, double rel_tol = 1e-8);

/// Antisymmetric commutation matrix over all state coordinates.
Eigen::MatrixXd full_commutation_matrix(const SystemState& st);

}  // namespace spincov::state
