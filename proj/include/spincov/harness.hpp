#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "spincov/lightmatter.hpp"
#include "spincov/magnetics.hpp"
#include "spincov/measurement.hpp"
#include "spincov/state.hpp"

namespace spincov::harness {

/// One scheduled probe: arrival time, input polarization sign, and whether it
/// is the second (v-polarized) member of an alternating pair.
struct PulseEvent {
  double arrival_s = 0.0;
  double sx_sign = 1.0;
  bool v_polarized = false;
};

/// Fully resolved experiment description. Usually produced by parse_config
/// from the JSON schema documented in the README; all members can also be
/// filled in directly.
struct ExperimentConfig {
  state::EnsembleSpec ensemble;
  magnetics::FieldModel field;
  double photons_per_pulse = 0.0;
  lightmatter::ProbePulse pulse_template;  // duration, couplings, damage terms
  std::vector<PulseEvent> schedule;        // sorted by arrival
  double total_s = 0.0;
  double period_s = 0.0;  // reference spacing for dark-interval substep scaling

  int pulse_substeps = 50;
  int dark_substeps = 100;
  bool auto_converge = false;
  double tolerance = 1e-6;
  bool uncertainty_audit = false;

  bool condition = false;
  bool keep_pulse_blocks = false;
  double pinv_tol = 1e-12;

  std::string canonical_json;  // sorted-key echo of the parsed input
  std::vector<std::string> warnings;
};

/// Parses and validates the JSON text form of an experiment. Unknown keys
/// are rejected except for documented ignore-with-warning fields.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

struct RunRecord {
  measurement::MeasurementRecord m;
  bool v_polarized = false;
};

struct RunResult {
  std::vector<RunRecord> records;
  double tau_gauss_s = std::numeric_limits<double>::infinity();
  int pulse_substeps_used = 0;
  int dark_substeps_used = 0;  // largest count used for any dark interval
  // Smallest relative Robertson-Schrodinger margin seen by the audit;
  // +inf when the audit is off.
  double min_uncertainty_margin = std::numeric_limits<double>::infinity();
  state::SystemState final_state;
  std::uint64_t config_hash = 0;
  std::vector<std::string> warnings;
};

/// Runs the scheduled experiment: dark evolution between pulses, a pulse
/// step with interleaved field dynamics for each probe, then a readout of
/// the detected polarization component. Fully deterministic.
RunResult run_experiment(const ExperimentConfig& cfg,
                         const magnetics::StepObserver& observer = nullptr);

/// Time for the mean shot-to-shot field spread to dephase the measured
/// rotation by pi: pi / (|gamma| sqrt(b^T Cov_B b)), +inf if undefined.
double tau_gauss_s(const magnetics::FieldModel& field);

/// Closed-form damped-precession model of the rotation-angle transient for
/// a spin of length f0 initially along `axis`, precessing about a static
/// mean field with an exponential transverse envelope.
struct FidModel {
  Eigen::Vector3d b_mG = Eigen::Vector3d::Zero();
  double decay_time_s = std::numeric_limits<double>::infinity();
  double g1_rad = 0.0;
  double f0 = 0.0;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitY();
  double gamma_rad_per_s_mG = constants::kDefaultGamma_rad_per_s_mG;
};
double analytic_fid_phi(const FidModel& m, double t_s);

/// CSV with header t_s,phi_mean_rad,phi_var_rad2,tau_gauss_s,flags and one
/// row per readout; flags is "-", "v", "cond_skipped", or a |-join.
std::string csv_string(const RunResult& result);
void write_csv(const std::string& path, const RunResult& result);

std::uint64_t fnv1a(const std::string& s);

}  // namespace spincov::harness
