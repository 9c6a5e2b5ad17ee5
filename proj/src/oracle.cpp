#include "spincov/oracle.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include "spincov/errors.hpp"

namespace spincov::oracle {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

Matrix3c rho_from_lambda(const Vector8d& lambda_bar, bool validate) {
  const auto& lb = algebra::basis();
  Matrix3c rho = Matrix3c::Identity() / 3.0;
  for (int k = 0; k < 8; ++k) rho += 0.5 * lambda_bar(k) * lb[k];
  if (validate) {
    Eigen::SelfAdjointEigenSolver<Matrix3c> es(rho);
    double lo = es.eigenvalues().minCoeff();
    if (lo < -1e-9) {
      std::ostringstream msg;
      msg << "mean vector maps to a non-positive density matrix (eigenvalue " << lo << ")";
      throw UnphysicalError(msg.str());
    }
  }
  return rho;
}

Vector8d lambda_from_rho(const Matrix3c& rho) {
  const auto& lb = algebra::basis();
  Vector8d out;
  for (int k = 0; k < 8; ++k) out(k) = (rho * lb[k]).trace().real();
  return out;
}

Matrix3c exact_field_evolution(const Matrix3c& rho, const Eigen::Vector3d& b_mG, double t_s,
                               double gamma) {
  const double norm = b_mG.norm();
  if (norm == 0.0) return rho;
  const auto& lb = algebra::basis();
  Eigen::Vector3d n = b_mG / norm;
  Matrix3c f_b = n(0) * lb[algebra::kFx] + n(1) * lb[algebra::kFy] + n(2) * lb[algebra::kFz];
  const double theta = gamma * norm * t_s;
  // f_b has eigenvalues {-1, 0, +1}, so f_b^3 = f_b and the exponential
  // truncates after the quadratic term.
  Matrix3c u = Matrix3c::Identity() + kI * std::sin(theta) * f_b +
               (std::cos(theta) - 1.0) * f_b * f_b;
  return u * rho * u.adjoint();
}

namespace {

struct MeanFieldState {
  Vector8d atom;
  Eigen::Vector3d stokes;
};

// Channels of the effective pulse Hamiltonian: a Stokes component paired with
// an atomic operator and a coupling strength.
struct Channel {
  int stokes_coord;
  int atomic_coord;
  double g;
};

MeanFieldState rhs(const MeanFieldState& v, const std::array<Channel, 3>& channels) {
  const auto& lb = algebra::basis();
  // Unnormalized "collective" matrix P = sum_k atom_k lambda_k / 2 turns
  // commutator traces into exact structure-constant contractions.
  Matrix3c p = Matrix3c::Zero();
  for (int k = 0; k < 8; ++k) p += 0.5 * v.atom(k) * lb[k];

  MeanFieldState d;
  d.atom.setZero();
  d.stokes.setZero();
  for (const auto& ch : channels) {
    if (ch.g == 0.0) continue;
    const Matrix3c& b = lb[ch.atomic_coord];
    for (int i = 0; i < 8; ++i) {
      Matrix3c comm = lb[i] * b - b * lb[i];
      d.atom(i) += ch.g * v.stokes(ch.stokes_coord) * (-kI * (p * comm).trace()).real();
    }
    Eigen::Vector3d axis = Eigen::Vector3d::Zero();
    axis(ch.stokes_coord) = 1.0;
    d.stokes += ch.g * v.atom(ch.atomic_coord) * axis.cross(v.stokes);
  }
  return d;
}

}  // namespace

PulseOracleResult heisenberg_pulse_oracle(const Vector8d& collective_atomic,
                                          const Eigen::Vector3d& stokes, double g1, double g2,
                                          int fine_steps) {
  if (fine_steps < 1) throw InvalidArgumentError("fine_steps must be >= 1");
  const std::array<Channel, 3> channels = {{
      {algebra::kSz, algebra::kFz, g1},
      {algebra::kSx, algebra::kJx, g2},
      {algebra::kSy, algebra::kJy, g2},
  }};

  MeanFieldState v{collective_atomic, stokes};
  const double h = 1.0 / fine_steps;
  for (int n = 0; n < fine_steps; ++n) {
    MeanFieldState k1 = rhs(v, channels);
    MeanFieldState v2{v.atom + 0.5 * h * k1.atom, v.stokes + 0.5 * h * k1.stokes};
    MeanFieldState k2 = rhs(v2, channels);
    MeanFieldState v3{v.atom + 0.5 * h * k2.atom, v.stokes + 0.5 * h * k2.stokes};
    MeanFieldState k3 = rhs(v3, channels);
    MeanFieldState v4{v.atom + h * k3.atom, v.stokes + h * k3.stokes};
    MeanFieldState k4 = rhs(v4, channels);
    v.atom += (h / 6.0) * (k1.atom + 2.0 * k2.atom + 2.0 * k3.atom + k4.atom);
    v.stokes += (h / 6.0) * (k1.stokes + 2.0 * k2.stokes + 2.0 * k3.stokes + k4.stokes);
  }
  return {v.atom, v.stokes};
}

}  // namespace spincov::oracle
