#pragma once

#include <Eigen/Dense>

#include <vector>

#include "spincov/magnetics.hpp"
#include "spincov/state.hpp"

namespace spincov::lightmatter {

/// One probe pulse: arrival time, length, photon budget, and the coupling
/// strengths it exercises. `g1_rad` couples circular polarization to the
/// orientation coordinates, `g2_rad` couples linear polarization to the
/// alignment coordinates; both are angles per unit pulse. `eta_gamma` is the
/// per-photon spontaneous-scattering damage, `readdition_p` the probability a
/// scattered atom returns to the probed manifold fully depolarized, and
/// `transmission` the pulse-energy survival through the ensemble.
struct ProbePulse {
  double arrival_s = 0.0;
  double duration_s = 1e-6;
  double photons = 0.0;
  double sx_sign = 1.0;
  double g1_rad = 0.0;
  double g2_rad = 0.0;
  double eta_gamma = 0.0;
  double readdition_p = 1.0;
  double transmission = 1.0;
};

/// One coefficient of the quadratic drift dV_i/ds = sum_jk H^i_jk V_j V_k.
struct DriftEntry {
  int i, j, k;
  double v;
};

/// Assembles the sparse drift tensor for the pulse block at `pulse_index`,
/// coupling (S_z, F_z) with weight g1 and (S_x, J_x), (S_y, J_y) with g2.
std::vector<DriftEntry> build_drift(const state::Layout& layout, int pulse_index, double g1_rad,
                                    double g2_rad);

/// Evaluates the quadratic drift at a phase-space point.
Eigen::VectorXd drift(const std::vector<DriftEntry>& h, const Eigen::VectorXd& v);

/// Jacobian of the drift at a phase-space point:
/// A_ik = sum_j v_j (H^i_jk + H^i_kj).
Eigen::MatrixXd linearization(const std::vector<DriftEntry>& h, const Eigen::VectorXd& v, int dim);

/// Applies the photon-scattering damage of `fraction` of the pulse: means
/// contract (atoms by X, the pulse block by the transmission share), the
/// covariance is conjugated accordingly, and the single-atom replacement
/// noise plus depolarized readdition noise are added back.
void optical_decoherence(state::SystemState& st, const ProbePulse& pulse, int pulse_index,
                         double fraction);

/// Advances the full state through one pulse split into n_substeps. Each
/// substep takes a midpoint step of the bilinear dynamics (exact tangent map
/// for the covariance), applies its share of the scattering damage, and, when
/// `field` is given, its share of the dark-interval field dynamics.
void pulse_step(state::SystemState& st, const ProbePulse& pulse, int pulse_index, int n_substeps,
                const magnetics::FieldModel* field = nullptr,
                const magnetics::StepObserver& observer = nullptr);

/// Doubles the substep count from n_start until one more doubling changes
/// means and covariances by less than rel_tol (relative to their scale).
/// Returns the converged count; throws if 2^18 substeps are not enough.
int converged_substeps(const state::SystemState& st, const ProbePulse& pulse, int pulse_index,
                       const magnetics::FieldModel* field, int n_start, double rel_tol);

}  // namespace spincov::lightmatter
