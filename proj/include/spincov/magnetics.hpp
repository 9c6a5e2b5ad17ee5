#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <functional>

#include "spincov/algebra.hpp"
#include "spincov/constants.hpp"
#include "spincov/state.hpp"

namespace spincov::magnetics {

using algebra::Matrix8d;
using algebra::Vector8d;
using Matrix8c = Eigen::Matrix<std::complex<double>, 8, 8>;

/// Static magnetic environment: mean field, shot-to-shot field covariance,
/// and a field-parallel gradient dephasing the ensemble across a Lorentzian
/// cloud profile of full width `cloud_fwhm_mm`.
struct FieldModel {
  Eigen::Vector3d b_mean_mG = Eigen::Vector3d::Zero();
  Eigen::Matrix3d b_cov_mG2 = Eigen::Matrix3d::Zero();
  double grad_parallel_mG_per_mm = 0.0;
  double cloud_fwhm_mm = 48.0;
  double gamma_rad_per_s_mG = constants::kDefaultGamma_rad_per_s_mG;  // signed

  /// Signed Larmor rate gamma * |B| in rad/s.
  double larmor_rad_per_s() const { return gamma_rad_per_s_mG * b_mean_mG.norm(); }

  /// Decay rate of the |a| = 1 sectors, w * |gamma * grad|, in 1/s.
  double dephasing_rate_per_s() const {
    return cloud_fwhm_mm * std::abs(gamma_rad_per_s_mG * grad_parallel_mG_per_mm);
  }
};

/// Precession generator for a unit field direction, with exact spectral
/// projectors onto the integer frequency sectors s in {-2,...,2}. The
/// atomic mean obeys d/dt mean = -gamma |B| A mean.
class FieldGenerator {
public:
  explicit FieldGenerator(const Eigen::Vector3d& unit_b);

  const Matrix8d& generator() const { return a_; }

  /// exp(-theta A), theta = gamma |B| t (signed).
  Matrix8d rotation(double theta) const;

  /// Per-sector decay sum_s r_{|s|} P_s for factors r indexed by |s|.
  Matrix8d sector_decay(const std::array<double, 3>& r_by_abs_s) const;

  /// Spectral projector onto the sector with eigenvalue i*s.
  const Matrix8c& projector(int s) const { return proj_[static_cast<std::size_t>(s + 2)]; }

  /// The generator assembled directly from the structure constants,
  /// A_ik = sum_beta b_beta f(lambda_i, f_beta, lambda_k).
  static Matrix8d generator_matrix(const Eigen::Vector3d& b);

private:
  Matrix8d a_;
  std::array<Matrix8c, 5> proj_;
};

/// 8x3 coupling of atomic means to field deviations:
/// column beta = A(e_beta) * atomic_mean.
Eigen::Matrix<double, 8, 3> field_coupling(const Vector8d& atomic_mean);

/// Rotates an atomic mean vector through the exact sector propagator.
/// Returns the rotated mean; `t_s` may be any length.
Vector8d coherent_rotation(const Vector8d& atomic_mean, const FieldModel& field, double t_s);

/// Per-sector dephasing factors D(t) = sum_s exp(-w |gamma a_s grad| t) P_s.
Matrix8d dephasing_factors(const FieldModel& field, double t_s);

/// Noise restoring the uncertainty principle after non-unitary dephasing:
/// |Sigma(after) - D Sigma(before) D^T| through singular values, where the
/// commutation matrices are evaluated from the atomic means right before and
/// after the dephasing map D.
Matrix8d dephasing_noise(const Vector8d& atomic_mean_before, const Matrix8d& d);

/// Observer hook: called after every substep that changes the state.
using StepObserver = std::function<void(const state::SystemState&, const char* phase)>;

/// Advances field, atoms, and any live pulse blocks through a dark interval
/// of length tau_s split into n_substeps. Atomic means follow the exact
/// sector propagator with dephasing; the covariance follows the small-step
/// path (midpoint field-to-atom coupling, per-sector decay, dephasing noise).
/// Each substep must satisfy |omega_0| * tau_sub <= 0.1.
void field_step(state::SystemState& st, const FieldModel& field, double tau_s, int n_substeps,
                const StepObserver& observer = nullptr);

}  // namespace spincov::magnetics
