#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace spincov::algebra {

using Matrix3c = Eigen::Matrix3cd;
using Vector8d = Eigen::Matrix<double, 8, 1>;
using Matrix8d = Eigen::Matrix<double, 8, 8>;

/// Coordinate order of the single-atom operator basis: the three orientation
/// components first, then the five alignment components. Every 8-vector and
/// 8x8 block in the engine uses this order.
enum AtomicCoord : int {
  kFx = 0,
  kFy = 1,
  kFz = 2,
  kJx = 3,
  kJy = 4,
  kJk = 5,
  kJl = 6,
  kJm = 7,
};

/// Stokes coordinate order inside one probe-pulse block.
enum StokesCoord : int { kSx = 0, kSy = 1, kSz = 2 };

/// The eight traceless Hermitian spin-1 operators, normalized so that
/// Tr(lambda_i lambda_j) = 2 delta_ij.
struct LambdaBasis {
  std::array<Matrix3c, 8> mats;

  const Matrix3c& operator[](int i) const { return mats[static_cast<std::size_t>(i)]; }
};

/// Builds the basis from its 3x3 matrix representation.
LambdaBasis build_basis();

/// Shared immutable instance.
const LambdaBasis& basis();

struct StructureEntry {
  int a, b, c;
  double value;  // f_abc with [lambda_a, lambda_b] = i f_abc lambda_c
};

/// Totally antisymmetric structure constants of the atomic operator algebra,
/// plus the Stokes triple used by every pulse block. Stored sparse; validated
/// once against the matrix representation at first use.
class StructureConstants {
public:
  StructureConstants();

  static const StructureConstants& instance();

  double atomic(int a, int b, int c) const { return f_[a][b][c]; }
  /// epsilon_abc over (S_x, S_y, S_z) with epsilon(0,1,2) = +1.
  double stokes(int a, int b, int c) const { return eps_[a][b][c]; }

  /// Every nonzero atomic entry (all permutations).
  const std::vector<StructureEntry>& atomic_entries() const { return entries_; }
  const std::vector<StructureEntry>& stokes_entries() const { return stokes_entries_; }

  /// Sigma_ij = sum_k f_ijk mean_k, the antisymmetric commutation matrix of
  /// the collective atomic block.
  Matrix8d commutation_matrix(const Vector8d& mean) const;

private:
  double f_[8][8][8];
  double eps_[3][3][3];
  std::vector<StructureEntry> entries_;
  std::vector<StructureEntry> stokes_entries_;
};

/// Expansion coefficients of -i[lambda_a, lambda_b] in the lambda basis,
/// computed from the 3x3 representation. Throws if any commutator fails to
/// close in the algebra.
using CommutatorTable = std::array<std::array<Vector8d, 8>, 8>;
CommutatorTable commutator_table(const LambdaBasis& basis);

/// Covariance matrix of the operator basis in the single-atom state with mean
/// vector `lambda_bar`. With `validate` the corresponding density matrix must
/// have eigenvalues >= -1e-9.
Matrix8d single_atom_covariance(const Vector8d& lambda_bar, bool validate = true);

/// Minimum eigenvalue of the density matrix reconstructed from `lambda_bar`.
double density_min_eigenvalue(const Vector8d& lambda_bar);

}  // namespace spincov::algebra
