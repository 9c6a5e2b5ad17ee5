#include "spincov/magnetics.hpp"

#include <cmath>
#include <sstream>

#include "spincov/errors.hpp"

namespace spincov::magnetics {

Matrix8d FieldGenerator::generator_matrix(const Eigen::Vector3d& b) {
  const auto& sc = algebra::StructureConstants::instance();
  Matrix8d a = Matrix8d::Zero();
  for (const auto& e : sc.atomic_entries()) {
    // Only entries whose middle index is an orientation component couple to
    // the field: A_ik = sum_beta b_beta f(lambda_i, f_beta, lambda_k).
    if (e.b <= algebra::kFz) a(e.a, e.c) += b(e.b) * e.value;
  }
  return a;
}

FieldGenerator::FieldGenerator(const Eigen::Vector3d& unit_b) {
  const double norm = unit_b.norm();
  if (!(norm > 0.0)) throw InvalidArgumentError("field direction must be nonzero");
  if (std::abs(norm - 1.0) > 1e-12)
    throw InvalidArgumentError("field direction must be a unit vector");
  a_ = generator_matrix(unit_b);

  // Exact spectral projectors by Lagrange interpolation over the known
  // eigenvalue set i*s, s in {-2,...,2}. The generator is real antisymmetric
  // with this spectrum for any unit direction.
  const std::complex<double> eye{0.0, 1.0};
  Matrix8c ac = a_.cast<std::complex<double>>();
  for (int s = -2; s <= 2; ++s) {
    Matrix8c p = Matrix8c::Identity();
    for (int r = -2; r <= 2; ++r) {
      if (r == s) continue;
      p = p * (ac - eye * static_cast<double>(r) * Matrix8c::Identity()) /
          (eye * static_cast<double>(s - r));
    }
    proj_[static_cast<std::size_t>(s + 2)] = p;
  }
}

Matrix8d FieldGenerator::rotation(double theta) const {
  Matrix8c sum = Matrix8c::Zero();
  for (int s = -2; s <= 2; ++s) {
    const std::complex<double> phase = std::exp(std::complex<double>(0.0, -s * theta));
    sum += phase * projector(s);
  }
  return sum.real();
}

Matrix8d FieldGenerator::sector_decay(const std::array<double, 3>& r_by_abs_s) const {
  Matrix8c sum = Matrix8c::Zero();
  for (int s = -2; s <= 2; ++s) sum += r_by_abs_s[static_cast<std::size_t>(std::abs(s))] * projector(s);
  return sum.real();
}

Eigen::Matrix<double, 8, 3> field_coupling(const Vector8d& atomic_mean) {
  static const std::array<Matrix8d, 3> axis_gen = {
      FieldGenerator::generator_matrix(Eigen::Vector3d::UnitX()),
      FieldGenerator::generator_matrix(Eigen::Vector3d::UnitY()),
      FieldGenerator::generator_matrix(Eigen::Vector3d::UnitZ()),
  };
  Eigen::Matrix<double, 8, 3> f;
  for (int beta = 0; beta < 3; ++beta)
    f.col(beta) = axis_gen[static_cast<std::size_t>(beta)] * atomic_mean;
  return f;
}

Vector8d coherent_rotation(const Vector8d& atomic_mean, const FieldModel& field, double t_s) {
  const double bnorm = field.b_mean_mG.norm();
  if (bnorm == 0.0) return atomic_mean;
  FieldGenerator gen(field.b_mean_mG / bnorm);
  return gen.rotation(field.larmor_rad_per_s() * t_s) * atomic_mean;
}

Matrix8d dephasing_factors(const FieldModel& field, double t_s) {
  const double bnorm = field.b_mean_mG.norm();
  const double rate = field.dephasing_rate_per_s();
  if (bnorm == 0.0 || rate == 0.0 || t_s == 0.0) return Matrix8d::Identity();
  FieldGenerator gen(field.b_mean_mG / bnorm);
  return gen.sector_decay({1.0, std::exp(-rate * t_s), std::exp(-2.0 * rate * t_s)});
}

namespace {

// PSD absolute value |M| = sqrt(M^T M) of a real antisymmetric deficit.
// Antisymmetry gives M^T M = -M*M, so a symmetric eigensolve replaces the SVD.
Matrix8d matrix_abs(const Matrix8d& m) {
  Eigen::SelfAdjointEigenSolver<Matrix8d> es(-(m * m));
  const Vector8d roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Matrix8d dephasing_noise(const Vector8d& atomic_mean_before, const Matrix8d& d) {
  const auto& sc = algebra::StructureConstants::instance();
  Matrix8d sigma_pre = sc.commutation_matrix(atomic_mean_before);
  Matrix8d sigma_post = sc.commutation_matrix(d * atomic_mean_before);
  Matrix8d deficit = sigma_post - d * sigma_pre * d.transpose();
  if (deficit.cwiseAbs().maxCoeff() == 0.0) return Matrix8d::Zero();
  return matrix_abs(deficit);
}

namespace {

// Substep propagator matrices. They depend only on the field model and the
// substep length, so repeated calls with the same parameters (every substep
// of a pulse, every interval of a periodic schedule) reuse the last set
// instead of redoing the spectral decomposition.
struct SubstepPlan {
  Matrix8d rot = Matrix8d::Identity();
  Matrix8d dec = Matrix8d::Identity();
  Matrix8d full = Matrix8d::Identity();
  Matrix8d half = Matrix8d::Identity();
  bool have_deph = false;
};

const SubstepPlan& substep_plan(const FieldModel& field, double tau_sub) {
  thread_local Eigen::Vector3d key_b{0.0, 0.0, 0.0};
  thread_local double key_gamma = 0.0, key_grad = 0.0, key_w = 0.0, key_tau = -1.0;
  thread_local SubstepPlan plan;
  thread_local bool warm = false;
  if (warm && key_tau == tau_sub && key_gamma == field.gamma_rad_per_s_mG &&
      key_grad == field.grad_parallel_mG_per_mm && key_w == field.cloud_fwhm_mm &&
      (key_b.array() == field.b_mean_mG.array()).all())
    return plan;

  plan = SubstepPlan{};
  const double bnorm = field.b_mean_mG.norm();
  if (bnorm > 0.0) {
    FieldGenerator gen(field.b_mean_mG / bnorm);
    const double theta = field.larmor_rad_per_s() * tau_sub;
    plan.rot = gen.rotation(theta);
    Matrix8d rot_half = gen.rotation(0.5 * theta);
    Matrix8d dec_half = Matrix8d::Identity();
    const double rate = field.dephasing_rate_per_s();
    plan.have_deph = rate > 0.0;
    if (plan.have_deph) {
      plan.dec =
          gen.sector_decay({1.0, std::exp(-rate * tau_sub), std::exp(-2.0 * rate * tau_sub)});
      dec_half = gen.sector_decay(
          {1.0, std::exp(-0.5 * rate * tau_sub), std::exp(-rate * tau_sub)});
    }
    plan.full = plan.dec * plan.rot;
    plan.half = dec_half * rot_half;
  }

  key_b = field.b_mean_mG;
  key_gamma = field.gamma_rad_per_s_mG;
  key_grad = field.grad_parallel_mG_per_mm;
  key_w = field.cloud_fwhm_mm;
  key_tau = tau_sub;
  warm = true;
  return plan;
}

}  // namespace

void field_step(state::SystemState& st, const FieldModel& field, double tau_s, int n_substeps,
                const StepObserver& observer) {
  if (!(tau_s >= 0.0)) throw InvalidArgumentError("interval length must be non-negative");
  if (n_substeps < 1) throw InvalidArgumentError("substep count must be >= 1");
  if (tau_s == 0.0) return;

  const double tau_sub = tau_s / n_substeps;
  const double omega0 = field.larmor_rad_per_s();
  if (std::abs(omega0) * tau_sub > 0.1 + 1e-12) {
    std::ostringstream msg;
    msg << "covariance substep too large: |omega0| * tau = " << std::abs(omega0) * tau_sub
        << " > 0.1; increase the substep count";
    throw StepTooLargeError(msg.str());
  }

  const int dim = st.layout.dim();
  const int a0 = state::Layout::atom_offset();
  const SubstepPlan& plan = substep_plan(field, tau_sub);
  const bool have_deph = plan.have_deph;
  const Matrix8d& rot = plan.rot;
  const Matrix8d& dec = plan.dec;
  const Matrix8d& full = plan.full;
  const Matrix8d& half = plan.half;

  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd work(dim, dim);
  for (int k = 0; k < n_substeps; ++k) {
    const Vector8d atom = st.atomic_mean();
    const Vector8d atom_mid = half * atom;
    const Vector8d atom_end = full * atom;

    m.block<8, 8>(a0, a0) = full;
    // Field deviations feed the atomic block through the coupling evaluated
    // at the substep midpoint, transported over the remaining half step.
    m.block<8, 3>(a0, 0) =
        -field.gamma_rad_per_s_mG * tau_sub * (half * field_coupling(atom_mid));

    work.noalias() = m * st.cov;
    st.cov.noalias() = work * m.transpose();
    if (have_deph) {
      const Vector8d rotated = rot * atom;
      st.cov.block<8, 8>(a0, a0) += dephasing_noise(rotated, dec);
    }
    st.mean.segment<8>(a0) = atom_end;
    work = st.cov.transpose();
    st.cov += work;
    st.cov *= 0.5;
    if (observer) observer(st, "field");
  }
}

}  // namespace spincov::magnetics
