#pragma once

#include "spincov/algebra.hpp"
#include "spincov/state.hpp"

namespace spincov::measurement {

/// What to read off a pulse after it leaves the ensemble. `component` is the
/// detected polarization coordinate; conditioning updates the covariance with
/// the information gain of the detection.
struct MeasurementSpec {
  int pulse_index = 0;
  algebra::StokesCoord component = algebra::kSy;
  bool condition = false;
  double pinv_tol = 1e-12;
};

struct MeasurementRecord {
  double time_s = 0.0;
  double s_det_mean = 0.0;
  double s_det_var = 0.0;
  double phi_mean_rad = 0.0;
  double phi_var_rad2 = 0.0;
  bool conditioning_skipped = false;
};

/// Detects one polarization component of a pulse block. The rotation angle
/// estimate divides by the input-side in-phase component `input_sx` (signed,
/// half the injected photon number). With `condition` set the covariance is
/// contracted by the rank-one information gain of the detection; the update
/// is skipped (and flagged) when the detected variance is degenerate. With
/// `drop_after` the pulse block is removed from the state, invalidating
/// higher pulse indices.
MeasurementRecord read_out(state::SystemState& st, const MeasurementSpec& spec, double input_sx,
                           double time_s, bool drop_after = true);

}  // namespace spincov::measurement
