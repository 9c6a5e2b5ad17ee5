#include "spincov/state.hpp"

#include <cmath>
#include <sstream>

#include "spincov/errors.hpp"

namespace spincov::state {

EnsembleSpec EnsembleSpec::pumped(char axis, int sign, double n_mean, double n_var) {
  if (sign != 1 && sign != -1) throw InvalidArgumentError("pump sign must be +1 or -1");
  int coord;
  switch (axis) {
    case 'x': coord = algebra::kFx; break;
    case 'y': coord = algebra::kFy; break;
    case 'z': coord = algebra::kFz; break;
    default: throw InvalidArgumentError("pump axis must be one of x, y, z");
  }
  const auto& lb = algebra::basis();
  Eigen::SelfAdjointEigenSolver<algebra::Matrix3c> es(lb[coord]);
  // Eigenvalues of an orientation component are {-1, 0, +1} in ascending
  // order; the stretched state is the corresponding extremal eigenvector.
  Eigen::Vector3cd psi = es.eigenvectors().col(sign > 0 ? 2 : 0);

  EnsembleSpec ens;
  ens.n_mean = n_mean;
  ens.n_var = n_var;
  for (int i = 0; i < 8; ++i) ens.lambda_bar(i) = (psi.adjoint() * lb[i] * psi)(0, 0).real();
  return ens;
}

std::pair<Vector8d, Matrix8d> initial_atomic_state(const EnsembleSpec& ens) {
  if (ens.n_mean < 0.0 || ens.n_var < 0.0)
    throw InvalidArgumentError("atom number mean and variance must be non-negative");
  Matrix8d gamma_single = algebra::single_atom_covariance(ens.lambda_bar);
  Vector8d mean = ens.n_mean * ens.lambda_bar;
  Matrix8d cov = ens.n_mean * gamma_single +
                 ens.n_var * (ens.lambda_bar * ens.lambda_bar.transpose());
  return {mean, cov};
}

SystemState initial_full_state(const EnsembleSpec& ens, const Eigen::Vector3d& b_mean_mG,
                               const Eigen::Matrix3d& b_cov_mG2) {
  if ((b_cov_mG2 - b_cov_mG2.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidArgumentError("field covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(b_cov_mG2);
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, b_cov_mG2.norm()))
    throw UnphysicalError("field covariance must be positive semidefinite");

  auto [atom_mean, atom_cov] = initial_atomic_state(ens);

  SystemState st;
  st.layout.n_pulses = 0;
  st.n_atoms = ens.n_mean;
  st.mean = Eigen::VectorXd::Zero(st.layout.dim());
  st.cov = Eigen::MatrixXd::Zero(st.layout.dim(), st.layout.dim());
  st.mean.segment<3>(0) = b_mean_mG;
  st.mean.segment<8>(3) = atom_mean;
  st.cov.block<3, 3>(0, 0) = b_cov_mG2;
  st.cov.block<8, 8>(3, 3) = atom_cov;
  return st;
}

int append_pulse(SystemState& st, const LightSpec& light) {
  if (light.photons < 0.0) throw InvalidArgumentError("photon number must be non-negative");
  if (light.sx_sign != 1.0 && light.sx_sign != -1.0)
    throw InvalidArgumentError("pulse polarization sign must be +1 or -1");
  const int old_dim = st.layout.dim();
  const int m = st.layout.n_pulses;

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(old_dim + 3);
  mean.head(old_dim) = st.mean;
  mean(old_dim + algebra::kSx) = light.sx_sign * light.photons / 2.0;

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(old_dim + 3, old_dim + 3);
  cov.topLeftCorner(old_dim, old_dim) = st.cov;
  cov.bottomRightCorner(3, 3) = (light.photons / 4.0) * Eigen::Matrix3d::Identity();

  st.mean = std::move(mean);
  st.cov = std::move(cov);
  st.layout.n_pulses = m + 1;
  return m;
}

void drop_pulse(SystemState& st, int m) {
  if (m < 0 || m >= st.layout.n_pulses) throw InvalidArgumentError("pulse index out of range");
  const int dim = st.layout.dim();
  const int off = st.layout.pulse_offset(m);
  const int tail = dim - off - 3;

  Eigen::VectorXd mean(dim - 3);
  mean.head(off) = st.mean.head(off);
  mean.tail(tail) = st.mean.tail(tail);

  Eigen::MatrixXd cov(dim - 3, dim - 3);
  cov.topLeftCorner(off, off) = st.cov.topLeftCorner(off, off);
  cov.topRightCorner(off, tail) = st.cov.topRightCorner(off, tail);
  cov.bottomLeftCorner(tail, off) = st.cov.bottomLeftCorner(tail, off);
  cov.bottomRightCorner(tail, tail) = st.cov.bottomRightCorner(tail, tail);

  st.mean = std::move(mean);
  st.cov = std::move(cov);
  st.layout.n_pulses -= 1;
}

Eigen::MatrixXd full_commutation_matrix(const SystemState& st) {
  const int dim = st.layout.dim();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(dim, dim);
  const auto& sc = algebra::StructureConstants::instance();

  const int a0 = Layout::atom_offset();
  sigma.block<8, 8>(a0, a0) = sc.commutation_matrix(st.atomic_mean());
  for (int m = 0; m < st.layout.n_pulses; ++m) {
    const int p0 = st.layout.pulse_offset(m);
    Eigen::Vector3d s = st.pulse_mean(m);
    for (const auto& e : sc.stokes_entries()) sigma(p0 + e.a, p0 + e.b) += e.value * s(e.c);
  }
  return sigma;
}

UncertaintyCheck check_uncertainty(const SystemState& st, const Eigen::VectorXd& a,
                                   const Eigen::VectorXd& b, double rel_tol) {
  const int dim = st.layout.dim();
  if (a.size() != dim || b.size() != dim)
    throw InvalidArgumentError("direction vectors must match the state dimension");

  const double var_a = a.dot(st.cov * a);
  const double var_b = b.dot(st.cov * b);
  Eigen::MatrixXd sigma = full_commutation_matrix(st);
  const double comm = a.dot(sigma * b);

  UncertaintyCheck out;
  out.margin = var_a * var_b - 0.25 * comm * comm;
  out.scale = std::abs(var_a * var_b) + 0.25 * comm * comm + 1e-300;
  out.ok = out.margin >= -rel_tol * out.scale;
  return out;
}

}  // namespace spincov::state
