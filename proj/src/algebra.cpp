#include "spincov/algebra.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <sstream>

#include "spincov/errors.hpp"

namespace spincov::algebra {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt3 = 1.7320508075688772;

Matrix3c zero3() { return Matrix3c::Zero(); }

}  // namespace

LambdaBasis build_basis() {
  LambdaBasis b;
  const double s = 1.0 / kSqrt2;

  Matrix3c fx = zero3();
  fx(0, 1) = s;
  fx(1, 0) = s;
  fx(1, 2) = s;
  fx(2, 1) = s;

  Matrix3c fy = zero3();
  fy(0, 1) = -kI * s;
  fy(1, 0) = kI * s;
  fy(1, 2) = -kI * s;
  fy(2, 1) = kI * s;

  Matrix3c fz = zero3();
  fz(0, 0) = 1.0;
  fz(2, 2) = -1.0;

  // Alignment operators are quadratics of the orientation ones.
  Matrix3c jx = fx * fx - fy * fy;
  Matrix3c jy = fx * fy + fy * fx;
  Matrix3c jk = fx * fz + fz * fx;
  Matrix3c jl = fy * fz + fz * fy;
  Matrix3c jm = (2.0 * fz * fz - fx * fx - fy * fy) / kSqrt3;

  b.mats = {fx, fy, fz, jx, jy, jk, jl, jm};
  return b;
}

const LambdaBasis& basis() {
  static const LambdaBasis b = build_basis();
  return b;
}

namespace {

// Nonzero structure constants up to total antisymmetry.
struct SeedEntry {
  int a, b, c;
  double v;
};

constexpr SeedEntry kAtomicSeeds[] = {
    {kFx, kFy, kFz, 1.0},     {kJx, kJy, kFz, 2.0},    {kFx, kJl, kJm, kSqrt3},
    {kFy, kJm, kJk, kSqrt3},  {kFx, kJy, kJk, 1.0},    {kFx, kJl, kJx, 1.0},
    {kFy, kJk, kJx, 1.0},     {kFz, kJk, kJl, 1.0},    {kFy, kJl, kJy, 1.0},
};

template <typename Tensor>
void scatter_antisymmetric(Tensor& t, int a, int b, int c, double v,
                           std::vector<StructureEntry>* entries) {
  const int idx[6][3] = {{a, b, c}, {b, c, a}, {c, a, b}, {b, a, c}, {a, c, b}, {c, b, a}};
  const double sign[6] = {1, 1, 1, -1, -1, -1};
  for (int p = 0; p < 6; ++p) {
    t[idx[p][0]][idx[p][1]][idx[p][2]] = sign[p] * v;
    if (entries) entries->push_back({idx[p][0], idx[p][1], idx[p][2], sign[p] * v});
  }
}

}  // namespace

StructureConstants::StructureConstants() {
  for (auto& plane : f_)
    for (auto& row : plane)
      for (double& x : row) x = 0.0;
  for (auto& plane : eps_)
    for (auto& row : plane)
      for (double& x : row) x = 0.0;

  for (const auto& e : kAtomicSeeds) scatter_antisymmetric(f_, e.a, e.b, e.c, e.v, &entries_);
  scatter_antisymmetric(eps_, kSx, kSy, kSz, 1.0, &stokes_entries_);

  // Validate the sparse table against the matrix representation once.
  const LambdaBasis& lb = basis();
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      Matrix3c lhs = lb[a] * lb[b] - lb[b] * lb[a];
      Matrix3c rhs = zero3();
      for (int c = 0; c < 8; ++c) rhs += kI * f_[a][b][c] * lb[c];
      if ((lhs - rhs).cwiseAbs().maxCoeff() > 1e-12) {
        std::ostringstream msg;
        msg << "structure constants disagree with the matrix representation at (" << a << "," << b
            << ")";
        throw Error(ErrorCode::internal, msg.str());
      }
    }
  }
}

const StructureConstants& StructureConstants::instance() {
  static const StructureConstants f;
  return f;
}

Matrix8d StructureConstants::commutation_matrix(const Vector8d& mean) const {
  Matrix8d sigma = Matrix8d::Zero();
  for (const auto& e : entries_) sigma(e.a, e.b) += e.value * mean(e.c);
  return sigma;
}

CommutatorTable commutator_table(const LambdaBasis& lb) {
  CommutatorTable table;
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      Matrix3c comm = -kI * (lb[a] * lb[b] - lb[b] * lb[a]);
      Vector8d coeff;
      Matrix3c recon = zero3();
      for (int c = 0; c < 8; ++c) {
        coeff(c) = 0.5 * (lb[c].adjoint() * comm).trace().real();
        recon += coeff(c) * lb[c];
      }
      if ((comm - recon).cwiseAbs().maxCoeff() > 1e-12) {
        std::ostringstream msg;
        msg << "commutator (" << a << "," << b << ") does not close in the operator basis";
        throw Error(ErrorCode::internal, msg.str());
      }
      table[a][b] = coeff;
    }
  }
  return table;
}

namespace {

// M^(k)_ij = Tr[lambda_k {lambda_i, lambda_j}] / 4, cached.
const std::array<Matrix8d, 8>& anticommutator_moments() {
  static const std::array<Matrix8d, 8> m = [] {
    std::array<Matrix8d, 8> out;
    const LambdaBasis& lb = basis();
    for (int k = 0; k < 8; ++k) {
      out[k] = Matrix8d::Zero();
      for (int i = 0; i < 8; ++i) {
        for (int j = i; j < 8; ++j) {
          Matrix3c anti = lb[i] * lb[j] + lb[j] * lb[i];
          double v = 0.25 * (lb[k] * anti).trace().real();
          out[k](i, j) = v;
          out[k](j, i) = v;
        }
      }
    }
    return out;
  }();
  return m;
}

}  // namespace

double density_min_eigenvalue(const Vector8d& lambda_bar) {
  const LambdaBasis& lb = basis();
  Matrix3c rho = Matrix3c::Identity() / 3.0;
  for (int k = 0; k < 8; ++k) rho += 0.5 * lambda_bar(k) * lb[k];
  Eigen::SelfAdjointEigenSolver<Matrix3c> es(rho);
  return es.eigenvalues().minCoeff();
}

Matrix8d single_atom_covariance(const Vector8d& lambda_bar, bool validate) {
  if (validate) {
    double lo = density_min_eigenvalue(lambda_bar);
    if (lo < -1e-9) {
      std::ostringstream msg;
      msg << "mean vector is not a physical single-atom state (density eigenvalue " << lo << ")";
      throw UnphysicalError(msg.str());
    }
  }
  Matrix8d gamma = (2.0 / 3.0) * Matrix8d::Identity();
  gamma -= lambda_bar * lambda_bar.transpose();
  const auto& moments = anticommutator_moments();
  for (int k = 0; k < 8; ++k) gamma += lambda_bar(k) * moments[k];
  return gamma;
}

}  // namespace spincov::algebra
