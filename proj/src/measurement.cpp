#include "spincov/measurement.hpp"

#include <cmath>

#include "spincov/errors.hpp"

namespace spincov::measurement {

MeasurementRecord read_out(state::SystemState& st, const MeasurementSpec& spec, double input_sx,
                           double time_s, bool drop_after) {
  if (spec.pulse_index < 0 || spec.pulse_index >= st.layout.n_pulses)
    throw InvalidArgumentError("pulse index out of range");
  if (input_sx == 0.0)
    throw InvalidArgumentError("rotation-angle readout needs a nonzero input component");

  const int row = st.layout.pulse_offset(spec.pulse_index) + spec.component;

  MeasurementRecord rec;
  rec.time_s = time_s;
  rec.s_det_mean = st.mean(row);
  rec.s_det_var = st.cov(row, row);
  rec.phi_mean_rad = rec.s_det_mean / input_sx;
  rec.phi_var_rad2 = rec.s_det_var / (input_sx * input_sx);

  if (spec.condition) {
    const double gate = spec.pinv_tol * std::max(1.0, st.cov.diagonal().maxCoeff());
    if (rec.s_det_var > gate) {
      const Eigen::VectorXd c = st.cov.col(row);
      st.cov -= (c * c.transpose()) / rec.s_det_var;
      st.cov = 0.5 * (st.cov + st.cov.transpose()).eval();
      // The detected component is now certain; pin it exactly.
      st.cov.row(row).setZero();
      st.cov.col(row).setZero();
    } else {
      rec.conditioning_skipped = true;
    }
  }

  if (drop_after) state::drop_pulse(st, spec.pulse_index);
  return rec;
}

}  // namespace spincov::measurement
