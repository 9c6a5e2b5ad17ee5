#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "spincov/constants.hpp"
#include "spincov/errors.hpp"
#include "spincov/harness.hpp"

using namespace spincov;
using harness::ExperimentConfig;
using harness::RunResult;

namespace {

// Compact builder for config JSON so each test tweaks only what it needs.
std::string config_json(const std::string& field_extra, const std::string& schedule,
                        const std::string& couplings =
                            R"("g1_rad": 1.7e-7, "g2_rad": -7.5e-9, "scattering_per_photon": 1.1e-9)",
                        const std::string& atoms =
                            R"("number_mean": 6.17e6, "number_var": 6.87955e7, "pump_axis": "+y")",
                        const std::string& extra_sections = "") {
  std::ostringstream os;
  os << R"({
  "atoms": { )" << atoms
     << R"( },
  "light": { "photons_per_pulse": 7.2e6 },
  "field": {
    "mean_mG": [11.98, -4.38, -4.01],
    "cov_mG2": [[0.202, 0.0373, -0.048], [0.0373, 0.201, 0.016], [-0.048, 0.016, 0.019]])"
     << (field_extra.empty() ? "" : ",\n    " + field_extra) << R"(
  },
  "couplings": { )" << couplings
     << R"( },
  "schedule": { )" << schedule
     << " }" << (extra_sections.empty() ? "" : ",\n  " + extra_sections) << "\n}";
  return os.str();
}

const std::string kSingle360 =
    R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 360.0)";

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("reference config parses into the expected experiment") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      R"("coherence_time_us": 360.0, "cloud_fwhm_mm": 48.0, "g_factor": -0.5)", kSingle360));
  CHECK(cfg.ensemble.n_mean == doctest::Approx(6.17e6));
  CHECK(cfg.ensemble.n_var == doctest::Approx(6.87955e7));
  CHECK(cfg.ensemble.lambda_bar(algebra::kFy) == doctest::Approx(1.0));
  CHECK(cfg.photons_per_pulse == doctest::Approx(7.2e6));
  CHECK(cfg.field.b_mean_mG.x() == doctest::Approx(11.98));
  CHECK(cfg.field.b_cov_mG2(0, 1) == doctest::Approx(0.0373));
  CHECK(cfg.field.gamma_rad_per_s_mG ==
        doctest::Approx(-0.5 * 2.0 * constants::kPi * 1399.624493).epsilon(1e-12));
  // Coherence time input becomes the matching parallel gradient.
  const double grad = 1.0 / (360e-6 * 48.0 * std::abs(cfg.field.gamma_rad_per_s_mG));
  CHECK(cfg.field.grad_parallel_mG_per_mm == doctest::Approx(grad).epsilon(1e-12));
  CHECK(cfg.field.dephasing_rate_per_s() == doctest::Approx(1.0 / 360e-6).epsilon(1e-12));
  CHECK(cfg.pulse_template.g1_rad == doctest::Approx(1.7e-7));
  CHECK(cfg.pulse_template.g2_rad == doctest::Approx(-7.5e-9));
  CHECK(cfg.pulse_template.eta_gamma == doctest::Approx(1.1e-9));
  CHECK(cfg.pulse_template.duration_s == doctest::Approx(1e-6));
  // Pulses at 10, 20, ..., 350 us: the start defaults to one period.
  CHECK(cfg.schedule.size() == 35u);
  CHECK(cfg.schedule.front().arrival_s == doctest::Approx(10e-6));
  CHECK(cfg.schedule.back().arrival_s == doctest::Approx(350e-6));
  for (const harness::PulseEvent& e : cfg.schedule) {
    CHECK(e.sx_sign == 1.0);
    CHECK_FALSE(e.v_polarized);
  }
  CHECK(cfg.pulse_substeps == 50);
  CHECK(cfg.dark_substeps == 100);
  CHECK_FALSE(cfg.condition);
  CHECK(cfg.warnings.empty());
}

TEST_CASE("alternating schedules interleave the second polarization") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      "",
      R"("strategy": "alternating", "period_us": 20.0, "pair_gap_us": 3.0,
         "pulse_duration_us": 1.0, "total_us": 100.0)"));
  // Pairs at 20/23, 40/43, 60/63, 80/83.
  REQUIRE(cfg.schedule.size() == 8u);
  for (std::size_t i = 0; i < cfg.schedule.size(); i += 2) {
    CHECK(cfg.schedule[i].sx_sign == 1.0);
    CHECK_FALSE(cfg.schedule[i].v_polarized);
    CHECK(cfg.schedule[i + 1].sx_sign == -1.0);
    CHECK(cfg.schedule[i + 1].v_polarized);
    CHECK(cfg.schedule[i + 1].arrival_s ==
          doctest::Approx(cfg.schedule[i].arrival_s + 3e-6).epsilon(1e-12));
  }
}

TEST_CASE("config validation rejects malformed input") {
  // Unknown keys anywhere are hard errors naming the key.
  CHECK_THROWS_WITH_AS(
      harness::parse_config(config_json(R"("speling_mistake": 1.0)", kSingle360)),
      doctest::Contains("speling_mistake"), ParseError);
  CHECK_THROWS_AS(harness::parse_config("{ not json"), ParseError);
  CHECK_THROWS_AS(harness::parse_config("[1,2,3]"), ParseError);
  // Missing required sections.
  CHECK_THROWS_WITH_AS(harness::parse_config(R"({"atoms": {"number_mean": 1}})"),
                       doctest::Contains("light"), ParseError);
  // Gradient and coherence time are mutually exclusive.
  CHECK_THROWS_AS(harness::parse_config(config_json(
                      R"("coherence_time_us": 360.0, "gradient_parallel_mG_per_mm": 1e-5)",
                      kSingle360)),
                  ParseError);
  // Pulses must fit inside the period, pairs inside the schedule.
  CHECK_THROWS_AS(harness::parse_config(config_json(
                      "", R"("period_us": 1.0, "pulse_duration_us": 2.0, "total_us": 10.0)")),
                  ParseError);
  CHECK_THROWS_AS(
      harness::parse_config(config_json(
          "",
          R"("strategy": "alternating", "period_us": 10.0, "pair_gap_us": 9.5,
             "pulse_duration_us": 1.0, "total_us": 100.0)")),
      ParseError);
  CHECK_THROWS_AS(harness::parse_config(config_json(
                      "", R"("period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 100.0,
                             "pair_gap_us": 3.0)")),
                  ParseError);
  // Physical sanity of scalars.
  CHECK_THROWS_AS(harness::parse_config(config_json("", kSingle360,
                                                    R"("g1_rad": 1e-7,
                                                       "scattering_per_photon": -1.0)")),
                  ParseError);
  CHECK_THROWS_AS(harness::parse_config(config_json(
                      "", kSingle360, R"("g1_rad": 1e-7)",
                      R"("number_mean": 6.17e6, "pump_axis": "+q")")),
                  ParseError);
}

TEST_CASE("ignored transverse gradient raises a warning, not an error") {
  ExperimentConfig cfg = harness::parse_config(
      config_json(R"("gradient_perp_mG_per_mm": 1e-4)", kSingle360));
  REQUIRE(cfg.warnings.size() == 1u);
  CHECK(cfg.warnings.front().find("gradient_perp") != std::string::npos);
  RunResult r = harness::run_experiment(cfg);
  REQUIRE(r.warnings.size() == 1u);
}

TEST_CASE("runs are deterministic") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      R"("coherence_time_us": 360.0)",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 300.0)"));
  RunResult a = harness::run_experiment(cfg);
  RunResult b = harness::run_experiment(cfg);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(harness::csv_string(a) == harness::csv_string(b));
  CHECK(a.config_hash == b.config_hash);

  ExperimentConfig other = harness::parse_config(config_json(
      R"("coherence_time_us": 360.0)",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 290.0)"));
  CHECK(harness::run_experiment(other).config_hash != a.config_hash);
}

TEST_CASE("doubling the converged substep counts moves no result by more than 1e-4") {
  // The invariant applies to the converged protocol: refine the pulse steps
  // to the 1e-6 single-pulse criterion first, then double everything.
  auto make = [](const std::string& stepping) {
    return harness::parse_config(config_json(
        R"("coherence_time_us": 360.0)",
        R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 60.0)",
        R"("g1_rad": 1.7e-7, "g2_rad": -7.5e-9, "scattering_per_photon": 1.1e-9)",
        R"("number_mean": 6.17e6, "number_var": 6.87955e7, "pump_axis": "+y")", stepping));
  };
  RunResult converged = harness::run_experiment(make(
      R"("stepping": { "pulse_substeps": 50, "dark_substeps": 100, "auto_converge": true })"));
  std::ostringstream doubled;
  doubled << R"("stepping": { "pulse_substeps": )" << 2 * converged.pulse_substeps_used
          << R"(, "dark_substeps": 200 })";
  RunResult fine = harness::run_experiment(make(doubled.str()));
  REQUIRE(converged.records.size() == fine.records.size());
  REQUIRE(!converged.records.empty());
  CHECK(converged.pulse_substeps_used > 50);  // the default is not yet converged

  double phi_scale = 0.0, var_scale = 0.0;
  for (const harness::RunRecord& r : fine.records) {
    phi_scale = std::max(phi_scale, std::abs(r.m.phi_mean_rad));
    var_scale = std::max(var_scale, std::abs(r.m.phi_var_rad2));
  }
  for (std::size_t i = 0; i < converged.records.size(); ++i) {
    CHECK(std::abs(converged.records[i].m.phi_mean_rad - fine.records[i].m.phi_mean_rad) <=
          1e-4 * phi_scale);
    CHECK(std::abs(converged.records[i].m.phi_var_rad2 - fine.records[i].m.phi_var_rad2) <=
          1e-4 * var_scale);
  }
}

TEST_CASE("zero field freezes the rotation signal at its closed-form value") {
  // Longitudinal pump, no field, no damage: every pulse reads the same
  // rotation sin(g1 N) with pure photon shot noise 1/photons.
  ExperimentConfig cfg = harness::parse_config(config_json(
      "",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 150.0)",
      R"("g1_rad": 1.7e-7, "g2_rad": 0.0, "scattering_per_photon": 0.0)",
      R"("number_mean": 6.17e6, "number_var": 0.0, "pump_axis": "+z")",
      R"("stepping": { "pulse_substeps": 800, "dark_substeps": 100 })"));
  cfg.field.b_mean_mG.setZero();
  cfg.field.b_cov_mG2.setZero();
  cfg.field.grad_parallel_mG_per_mm = 0.0;

  RunResult r = harness::run_experiment(cfg);
  REQUIRE(r.records.size() == 14u);
  // Nothing moves the atoms, so every pulse is bitwise the same measurement.
  for (const harness::RunRecord& rec : r.records) {
    CHECK(rec.m.phi_mean_rad == r.records.front().m.phi_mean_rad);
    CHECK(rec.m.phi_var_rad2 == r.records.front().m.phi_var_rad2);
  }
  const double expect_phi = std::sin(1.7e-7 * 6.17e6);
  const double expect_var = 1.0 / 7.2e6;
  CHECK(r.records.front().m.phi_mean_rad == doctest::Approx(expect_phi).epsilon(1e-6));
  CHECK(r.records.front().m.phi_var_rad2 == doctest::Approx(expect_var).epsilon(1e-8));
  CHECK(r.tau_gauss_s == std::numeric_limits<double>::infinity());
}

TEST_CASE("transient means track the closed-form damped precession") {
  // Weak probing of a transversely pumped ensemble: the mean rotation angle
  // follows the analytic envelope-times-precession form evaluated at the
  // middle of each pulse window.
  ExperimentConfig cfg = harness::parse_config(config_json(
      R"("coherence_time_us": 360.0)",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 400.0)",
      R"("g1_rad": 1e-9, "g2_rad": 0.0, "scattering_per_photon": 0.0)",
      R"("number_mean": 6.17e6, "number_var": 0.0, "pump_axis": "+y")"));
  RunResult r = harness::run_experiment(cfg);
  REQUIRE(r.records.size() == 39u);

  harness::FidModel model;
  model.b_mG = cfg.field.b_mean_mG;
  model.decay_time_s = 360e-6;
  model.g1_rad = 1e-9;
  model.f0 = 6.17e6;
  model.axis = Eigen::Vector3d::UnitY();
  model.gamma_rad_per_s_mG = cfg.field.gamma_rad_per_s_mG;

  const double amplitude = 1e-9 * 6.17e6;
  for (const harness::RunRecord& rec : r.records) {
    const double t_eff = rec.m.time_s - 0.5 * cfg.pulse_template.duration_s;
    const double want = harness::analytic_fid_phi(model, t_eff);
    CHECK(std::abs(rec.m.phi_mean_rad - want) < 1e-3 * amplitude);
  }
}

TEST_CASE("closed-form transient has the right limits and symmetry") {
  harness::FidModel m;
  m.g1_rad = 1e-7;
  m.f0 = 1e6;
  m.axis = Eigen::Vector3d::UnitY();
  m.decay_time_s = 360e-6;
  REQUIRE(m.gamma_rad_per_s_mG < 0.0);

  // Field along the pump axis: nothing precesses into the light's axis.
  m.b_mG = Eigen::Vector3d(0, 20, 0);
  for (double t : {0.0, 1e-5, 1e-4, 1e-3})
    CHECK(std::abs(harness::analytic_fid_phi(m, t)) < 1e-15);
  // Field along z keeps a transverse pump transverse: still no signal.
  m.b_mG = Eigen::Vector3d(0, 0, 20);
  for (double t : {0.0, 1e-5, 1e-4}) CHECK(std::abs(harness::analytic_fid_phi(m, t)) < 1e-15);
  // Field along x turns the pump into the longitudinal axis periodically,
  // with the sense fixed by the sign of the gyromagnetic ratio.
  m.b_mG = Eigen::Vector3d(20, 0, 0);
  const double omega = std::abs(m.gamma_rad_per_s_mG) * 20.0;
  for (double t : {3e-6, 27e-6, 150e-6}) {
    const double want = m.g1_rad * m.f0 * std::exp(-t / 360e-6) * std::sin(omega * t);
    CHECK(harness::analytic_fid_phi(m, t) == doctest::Approx(want).epsilon(1e-12));
  }
  // Zero time means zero signal for any transverse geometry.
  m.b_mG = Eigen::Vector3d(7, -3, 2);
  CHECK(std::abs(harness::analytic_fid_phi(m, 0.0)) < 1e-15);
}

TEST_CASE("shot-to-shot field spread sets the dephasing time scale") {
  magnetics::FieldModel f;
  f.b_mean_mG = Eigen::Vector3d(11.98, -4.38, -4.01);
  f.b_cov_mG2 << 0.202, 0.0373, -0.048, 0.0373, 0.201, 0.016, -0.048, 0.016, 0.019;
  CHECK(harness::tau_gauss_s(f) == doctest::Approx(1.6285388233608722e-3).epsilon(1e-12));

  magnetics::FieldModel iso;
  iso.b_mean_mG = Eigen::Vector3d(0, 0, 10);
  iso.b_cov_mG2 = 0.09 * Eigen::Matrix3d::Identity();
  CHECK(harness::tau_gauss_s(iso) ==
        doctest::Approx(constants::kPi / (std::abs(iso.gamma_rad_per_s_mG) * 0.3))
            .epsilon(1e-12));

  magnetics::FieldModel quiet;
  quiet.b_mean_mG = Eigen::Vector3d(0, 0, 10);
  CHECK(harness::tau_gauss_s(quiet) == std::numeric_limits<double>::infinity());
}

TEST_CASE("csv output carries the documented columns and flags") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      "",
      R"("strategy": "alternating", "period_us": 20.0, "pair_gap_us": 3.0,
         "pulse_duration_us": 1.0, "total_us": 80.0)"));
  RunResult r = harness::run_experiment(cfg);
  REQUIRE(r.records.size() == 6u);
  std::string csv = harness::csv_string(r);

  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "t_s,phi_mean_rad,phi_var_rad2,tau_gauss_s,flags");
  int rows = 0, vflags = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
    if (line.size() >= 2 && line.substr(line.size() - 2) == ",v") ++vflags;
    if (rows == 1) {
      // Round-trip check on the first row's time: 21 us.
      CHECK(std::stod(line.substr(0, line.find(','))) == doctest::Approx(21e-6).epsilon(1e-12));
    }
  }
  CHECK(rows == 6);
  CHECK(vflags == 3);
  // Every non-v row ends in the placeholder flag.
  CHECK(csv.find(",-\n") != std::string::npos);
}

TEST_CASE("substep search and audit integrate with the full run") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      R"("coherence_time_us": 360.0)",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 40.0)",
      R"("g1_rad": 1.7e-7, "g2_rad": -7.5e-9, "scattering_per_photon": 1.1e-9)",
      R"("number_mean": 6.17e6, "number_var": 6.87955e7, "pump_axis": "+y")",
      R"("stepping": { "pulse_substeps": 8, "auto_converge": true, "tolerance": 1e-6,
                       "uncertainty_audit": true })"));
  RunResult r = harness::run_experiment(cfg);
  CHECK(r.pulse_substeps_used >= 8);
  CHECK(r.dark_substeps_used >= 100);
  CHECK(r.min_uncertainty_margin > -1e-8);
  CHECK(r.min_uncertainty_margin < std::numeric_limits<double>::infinity());

  // Audit off reports +inf and runs faster paths.
  ExperimentConfig quiet_cfg = harness::parse_config(config_json(
      R"("coherence_time_us": 360.0)",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 50.0)"));
  RunResult q = harness::run_experiment(quiet_cfg);
  CHECK(q.min_uncertainty_margin == std::numeric_limits<double>::infinity());
}

TEST_CASE("conditioning learns the longitudinal spin across repeated probes") {
  // Static atoms (no field): a transverse pump leaves var(F_z) = N/2, which
  // every pulse measures through g1. Conditioned readouts must tighten
  // monotonically toward the photon shot-noise floor; unconditioned ones
  // stay flat.
  auto make = [](const std::string& readout) {
    ExperimentConfig cfg = harness::parse_config(config_json(
        "",
        R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 80.0)",
        R"("g1_rad": 1.7e-7, "g2_rad": 0.0, "scattering_per_photon": 0.0)",
        R"("number_mean": 6.17e6, "number_var": 0.0, "pump_axis": "+y")", readout));
    cfg.field.b_mean_mG.setZero();
    cfg.field.b_cov_mG2.setZero();
    return cfg;
  };
  RunResult cond = harness::run_experiment(make(R"("readout": { "condition": true })"));
  RunResult plain = harness::run_experiment(make(R"("readout": { "condition": false })"));
  REQUIRE(cond.records.size() == 7u);
  REQUIRE(plain.records.size() == 7u);

  const double shot = 1.0 / 7.2e6;
  for (std::size_t i = 1; i < cond.records.size(); ++i) {
    CHECK(cond.records[i].m.phi_var_rad2 < cond.records[i - 1].m.phi_var_rad2);
    CHECK(cond.records[i].m.phi_var_rad2 < plain.records[i].m.phi_var_rad2);
    CHECK(cond.records[i].m.phi_var_rad2 > shot * (1.0 - 1e-9));
    CHECK(plain.records[i].m.phi_var_rad2 ==
          doctest::Approx(plain.records[0].m.phi_var_rad2).epsilon(1e-12));
  }
  // The first probe carries the full prior either way.
  CHECK(cond.records[0].m.phi_var_rad2 ==
        doctest::Approx(plain.records[0].m.phi_var_rad2).epsilon(1e-12));
  // Atomic noise dominates the prior here: var > shot noise alone.
  CHECK(plain.records[0].m.phi_var_rad2 > 1.5 * shot);
}

TEST_CASE("kept pulse blocks accumulate in the final state") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      "",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 60.0)",
      R"("g1_rad": 1.7e-7)", R"("number_mean": 6.17e6, "pump_axis": "+y")",
      R"("readout": { "condition": true, "keep_pulse_blocks": true })"));
  RunResult r = harness::run_experiment(cfg);
  REQUIRE(r.records.size() == 5u);
  CHECK(r.final_state.layout.n_pulses == 5);
  CHECK(r.final_state.mean.size() == 11 + 15);

  ExperimentConfig drop_cfg = harness::parse_config(config_json(
      "",
      R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 60.0)",
      R"("g1_rad": 1.7e-7)", R"("number_mean": 6.17e6, "pump_axis": "+y")"));
  RunResult d = harness::run_experiment(drop_cfg);
  CHECK(d.final_state.layout.n_pulses == 0);
  CHECK(d.final_state.mean.size() == 11);
}

TEST_CASE("an empty schedule still runs the dark evolution") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      "", R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0, "total_us": 5.0)"));
  CHECK(cfg.schedule.empty());
  RunResult r = harness::run_experiment(cfg);
  CHECK(r.records.empty());
  CHECK(r.tau_gauss_s > 0.0);
  std::string csv = harness::csv_string(r);
  CHECK(csv == "t_s,phi_mean_rad,phi_var_rad2,tau_gauss_s,flags\n");
}

TEST_CASE("record times sit at the end of each pulse window") {
  ExperimentConfig cfg = harness::parse_config(config_json(
      "", R"("strategy": "single", "period_us": 10.0, "pulse_duration_us": 1.0,
             "total_us": 45.0, "start_us": 7.0)"));
  RunResult r = harness::run_experiment(cfg);
  REQUIRE(r.records.size() == 4u);
  for (std::size_t i = 0; i < r.records.size(); ++i)
    CHECK(r.records[i].m.time_s == doctest::Approx(7e-6 + 10e-6 * i + 1e-6).epsilon(1e-12));
}

TEST_CASE("hash function is stable and collision-averse on small edits") {
  CHECK(harness::fnv1a("") == 14695981039346656037ULL);
  CHECK(harness::fnv1a("a") == harness::fnv1a("a"));
  CHECK(harness::fnv1a("a") != harness::fnv1a("b"));
  CHECK(harness::fnv1a("config one") != harness::fnv1a("config two"));
}

}  // TEST_SUITE
