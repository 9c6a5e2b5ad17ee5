#include "spincov/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spincov/constants.hpp"
#include "spincov/errors.hpp"

namespace spincov::harness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ParseError(msg); }

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) fail("unknown key \"" + where + "." + item.key() + "\"");
  }
}

double need_num(const json& j, const std::string& where, const char* key) {
  const json* v = find(j, key);
  if (!v || !v->is_number()) fail(where + "." + key + " must be a number");
  return v->get<double>();
}

double opt_num(const json& j, const std::string& where, const char* key, double def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_number()) fail(where + "." + key + " must be a number");
  return v->get<double>();
}

int opt_int(const json& j, const std::string& where, const char* key, int def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_number_integer()) fail(where + "." + key + " must be an integer");
  return v->get<int>();
}

bool opt_bool(const json& j, const std::string& where, const char* key, bool def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_boolean()) fail(where + "." + key + " must be a boolean");
  return v->get<bool>();
}

std::string opt_str(const json& j, const std::string& where, const char* key,
                    const std::string& def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_string()) fail(where + "." + key + " must be a string");
  return v->get<std::string>();
}

Eigen::Vector3d need_vec3(const json& j, const std::string& where, const char* key) {
  const json* v = find(j, key);
  if (!v || !v->is_array() || v->size() != 3)
    fail(where + "." + key + " must be an array of 3 numbers");
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (!(*v)[i].is_number()) fail(where + "." + key + " must be an array of 3 numbers");
    out(i) = (*v)[i].get<double>();
  }
  return out;
}

Eigen::Matrix3d opt_mat3(const json& j, const std::string& where, const char* key,
                         const Eigen::Matrix3d& def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_array() || v->size() != 3) fail(where + "." + key + " must be a 3x3 array");
  Eigen::Matrix3d out;
  for (int r = 0; r < 3; ++r) {
    if (!(*v)[r].is_array() || (*v)[r].size() != 3)
      fail(where + "." + key + " must be a 3x3 array");
    for (int c = 0; c < 3; ++c) {
      if (!(*v)[r][c].is_number()) fail(where + "." + key + " must be a 3x3 array");
      out(r, c) = (*v)[r][c].get<double>();
    }
  }
  return out;
}

const json& section(const json& j, const char* key, bool required) {
  static const json empty = json::object();
  const json* v = find(j, key);
  if (!v) {
    if (required) fail(std::string("missing required section \"") + key + "\"");
    return empty;
  }
  if (!v->is_object()) fail(std::string("section \"") + key + "\" must be an object");
  return *v;
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) fail("top-level config must be a JSON object");
  check_keys(j, "config",
             {"atoms", "light", "field", "couplings", "schedule", "stepping", "readout",
              "decoherence"});

  ExperimentConfig cfg;

  const json& atoms = section(j, "atoms", true);
  check_keys(atoms, "atoms", {"number_mean", "number_var", "pump_axis"});
  const double n_mean = need_num(atoms, "atoms", "number_mean");
  const double n_var = opt_num(atoms, "atoms", "number_var", 0.0);
  if (!(n_mean >= 0.0)) fail("atoms.number_mean must be non-negative");
  if (!(n_var >= 0.0)) fail("atoms.number_var must be non-negative");
  std::string axis = opt_str(atoms, "atoms", "pump_axis", "+y");
  if (axis.size() == 1) axis = "+" + axis;
  if (axis.size() != 2 || (axis[0] != '+' && axis[0] != '-') ||
      (axis[1] != 'x' && axis[1] != 'y' && axis[1] != 'z'))
    fail("atoms.pump_axis must be one of +x,-x,+y,-y,+z,-z");
  cfg.ensemble = state::EnsembleSpec::pumped(axis[1], axis[0] == '+' ? 1 : -1, n_mean, n_var);

  const json& light = section(j, "light", true);
  check_keys(light, "light", {"photons_per_pulse", "input_sx_sign"});
  cfg.photons_per_pulse = need_num(light, "light", "photons_per_pulse");
  if (!(cfg.photons_per_pulse >= 0.0)) fail("light.photons_per_pulse must be non-negative");
  const double sx_sign = opt_num(light, "light", "input_sx_sign", 1.0);
  if (sx_sign != 1.0 && sx_sign != -1.0) fail("light.input_sx_sign must be +1 or -1");

  const json& field = section(j, "field", true);
  check_keys(field, "field",
             {"mean_mG", "cov_mG2", "gradient_parallel_mG_per_mm", "gradient_perp_mG_per_mm",
              "coherence_time_us", "cloud_fwhm_mm", "g_factor"});
  cfg.field.b_mean_mG = need_vec3(field, "field", "mean_mG");
  cfg.field.b_cov_mG2 = opt_mat3(field, "field", "cov_mG2", Eigen::Matrix3d::Zero());
  cfg.field.cloud_fwhm_mm = opt_num(field, "field", "cloud_fwhm_mm", 48.0);
  if (!(cfg.field.cloud_fwhm_mm > 0.0)) fail("field.cloud_fwhm_mm must be positive");
  const double g_factor = opt_num(field, "field", "g_factor", constants::kDefaultGF);
  cfg.field.gamma_rad_per_s_mG = constants::gyromagnetic_ratio(g_factor);
  cfg.field.grad_parallel_mG_per_mm =
      opt_num(field, "field", "gradient_parallel_mG_per_mm", 0.0);
  if (find(field, "coherence_time_us")) {
    if (cfg.field.grad_parallel_mG_per_mm != 0.0)
      fail("field: give either gradient_parallel_mG_per_mm or coherence_time_us, not both");
    const double t_coh = need_num(field, "field", "coherence_time_us") * 1e-6;
    if (!(t_coh > 0.0)) fail("field.coherence_time_us must be positive");
    const double denom = cfg.field.cloud_fwhm_mm * std::abs(cfg.field.gamma_rad_per_s_mG);
    if (denom == 0.0) fail("field.coherence_time_us needs a nonzero g_factor");
    cfg.field.grad_parallel_mG_per_mm = 1.0 / (t_coh * denom);
  }
  if (find(field, "gradient_perp_mG_per_mm"))
    cfg.warnings.push_back(
        "field.gradient_perp_mG_per_mm is ignored: transverse gradients are outside this model");

  const json& couplings = section(j, "couplings", true);
  check_keys(couplings, "couplings", {"g1_rad", "g2_rad", "scattering_per_photon"});
  cfg.pulse_template.g1_rad = need_num(couplings, "couplings", "g1_rad");
  cfg.pulse_template.g2_rad = opt_num(couplings, "couplings", "g2_rad", 0.0);
  cfg.pulse_template.eta_gamma = opt_num(couplings, "couplings", "scattering_per_photon", 0.0);
  if (!(cfg.pulse_template.eta_gamma >= 0.0))
    fail("couplings.scattering_per_photon must be non-negative");

  const json& schedule = section(j, "schedule", true);
  check_keys(schedule, "schedule",
             {"strategy", "period_us", "pair_gap_us", "pulse_duration_us", "total_us",
              "start_us"});
  const std::string strategy = opt_str(schedule, "schedule", "strategy", "single");
  if (strategy != "single" && strategy != "alternating")
    fail("schedule.strategy must be \"single\" or \"alternating\"");
  const double period = need_num(schedule, "schedule", "period_us") * 1e-6;
  const double duration = need_num(schedule, "schedule", "pulse_duration_us") * 1e-6;
  const double total = need_num(schedule, "schedule", "total_us") * 1e-6;
  const double start = opt_num(schedule, "schedule", "start_us",
                               need_num(schedule, "schedule", "period_us")) *
                       1e-6;
  if (!(period > 0.0)) fail("schedule.period_us must be positive");
  if (!(duration > 0.0)) fail("schedule.pulse_duration_us must be positive");
  if (!(duration < period)) fail("schedule.pulse_duration_us must be shorter than the period");
  if (!(total >= 0.0)) fail("schedule.total_us must be non-negative");
  if (!(start >= 0.0)) fail("schedule.start_us must be non-negative");
  cfg.pulse_template.duration_s = duration;
  cfg.total_s = total;
  cfg.period_s = period;

  double pair_gap = 0.0;
  if (strategy == "alternating") {
    pair_gap = need_num(schedule, "schedule", "pair_gap_us") * 1e-6;
    if (!(pair_gap >= duration)) fail("schedule.pair_gap_us must cover the pulse duration");
    if (!(pair_gap + duration <= period))
      fail("schedule.pair_gap_us leaves no room before the next pair");
  } else if (find(schedule, "pair_gap_us")) {
    fail("schedule.pair_gap_us only applies to the alternating strategy");
  }
  const double t_end_slack = 1e-12;
  for (int k = 0;; ++k) {
    const double a = start + k * period;
    if (a + duration > total + t_end_slack) break;
    cfg.schedule.push_back({a, sx_sign, false});
    if (strategy == "alternating") {
      const double b = a + pair_gap;
      if (b + duration <= total + t_end_slack) cfg.schedule.push_back({b, -sx_sign, true});
    }
  }

  const json& stepping = section(j, "stepping", false);
  check_keys(stepping, "stepping",
             {"pulse_substeps", "dark_substeps", "auto_converge", "tolerance",
              "uncertainty_audit"});
  cfg.pulse_substeps = opt_int(stepping, "stepping", "pulse_substeps", 50);
  cfg.dark_substeps = opt_int(stepping, "stepping", "dark_substeps", 100);
  cfg.auto_converge = opt_bool(stepping, "stepping", "auto_converge", false);
  cfg.tolerance = opt_num(stepping, "stepping", "tolerance", 1e-6);
  cfg.uncertainty_audit = opt_bool(stepping, "stepping", "uncertainty_audit", false);
  if (cfg.pulse_substeps < 1) fail("stepping.pulse_substeps must be >= 1");
  if (cfg.dark_substeps < 1) fail("stepping.dark_substeps must be >= 1");
  if (!(cfg.tolerance > 0.0)) fail("stepping.tolerance must be positive");

  const json& readout = section(j, "readout", false);
  check_keys(readout, "readout", {"condition", "keep_pulse_blocks", "pinv_tol"});
  cfg.condition = opt_bool(readout, "readout", "condition", false);
  cfg.keep_pulse_blocks = opt_bool(readout, "readout", "keep_pulse_blocks", false);
  cfg.pinv_tol = opt_num(readout, "readout", "pinv_tol", 1e-12);

  const json& deco = section(j, "decoherence", false);
  check_keys(deco, "decoherence", {"readdition_p", "transmission"});
  cfg.pulse_template.readdition_p = opt_num(deco, "decoherence", "readdition_p", 1.0);
  cfg.pulse_template.transmission = opt_num(deco, "decoherence", "transmission", 1.0);

  cfg.canonical_json = j.dump();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

double tau_gauss_s(const magnetics::FieldModel& field) {
  const double bnorm = field.b_mean_mG.norm();
  const double gam = std::abs(field.gamma_rad_per_s_mG);
  if (bnorm == 0.0 || gam == 0.0) return std::numeric_limits<double>::infinity();
  const Eigen::Vector3d bhat = field.b_mean_mG / bnorm;
  const double var_par = bhat.dot(field.b_cov_mG2 * bhat);
  if (!(var_par > 0.0)) return std::numeric_limits<double>::infinity();
  return constants::kPi / (gam * std::sqrt(var_par));
}

double analytic_fid_phi(const FidModel& m, double t_s) {
  const Eigen::Vector3d f0v = m.f0 * m.axis.normalized();
  const double bnorm = m.b_mG.norm();
  if (bnorm == 0.0) return m.g1_rad * f0v.z();
  const Eigen::Vector3d bhat = m.b_mG / bnorm;
  const double theta = std::abs(m.gamma_rad_per_s_mG) * bnorm * t_s;
  const double env = std::exp(-t_s / m.decay_time_s);
  const double sgn = m.gamma_rad_per_s_mG < 0.0 ? 1.0 : -1.0;
  const Eigen::Vector3d par = bhat * bhat.dot(f0v);
  const Eigen::Vector3d f =
      par + env * (std::cos(theta) * (f0v - par) + sgn * std::sin(theta) * bhat.cross(f0v));
  return m.g1_rad * f.z();
}

RunResult run_experiment(const ExperimentConfig& cfg, const magnetics::StepObserver& observer) {
  if (!(cfg.photons_per_pulse >= 0.0))
    throw InvalidArgumentError("photon number must be non-negative");
  if (!(cfg.total_s >= 0.0)) throw InvalidArgumentError("total time must be non-negative");

  RunResult out;
  out.warnings = cfg.warnings;
  out.config_hash = fnv1a(cfg.canonical_json);
  out.tau_gauss_s = tau_gauss_s(cfg.field);

  state::SystemState st =
      state::initial_full_state(cfg.ensemble, cfg.field.b_mean_mG, cfg.field.b_cov_mG2);

  double min_margin = std::numeric_limits<double>::infinity();
  magnetics::StepObserver obs;
  if (cfg.uncertainty_audit || observer) {
    obs = [&](const state::SystemState& s, const char* phase) {
      if (cfg.uncertainty_audit) {
        const Eigen::MatrixXd c = state::full_commutation_matrix(s);
        const int d = s.layout.dim();
        for (int i = 0; i < d; ++i)
          for (int k = i + 1; k < d; ++k) {
            const double comm2 = 0.25 * c(i, k) * c(i, k);
            const double margin = s.cov(i, i) * s.cov(k, k) - comm2;
            const double scale = std::abs(s.cov(i, i) * s.cov(k, k)) + comm2 + 1e-300;
            min_margin = std::min(min_margin, margin / scale);
          }
      }
      if (observer) observer(s, phase);
    };
  }

  const double duration = cfg.pulse_template.duration_s;
  const double ref_gap =
      cfg.period_s > duration ? cfg.period_s - duration : std::max(cfg.total_s, 1e-30);
  auto dark_substeps_for = [&](double dt) {
    const double by_ref = std::ceil(cfg.dark_substeps * dt / ref_gap);
    const double by_rot = std::ceil(std::abs(cfg.field.larmor_rad_per_s()) * dt / 0.05);
    return static_cast<int>(std::max({by_ref, by_rot, 1.0}));
  };

  int n_pulse = cfg.pulse_substeps;
  if (cfg.auto_converge && !cfg.schedule.empty()) {
    state::SystemState probe = st;
    const PulseEvent& e0 = cfg.schedule.front();
    if (e0.arrival_s > 0.0)
      magnetics::field_step(probe, cfg.field, e0.arrival_s, dark_substeps_for(e0.arrival_s));
    lightmatter::ProbePulse p = cfg.pulse_template;
    p.arrival_s = e0.arrival_s;
    p.photons = cfg.photons_per_pulse;
    p.sx_sign = e0.sx_sign;
    const int idx = state::append_pulse(probe, {cfg.photons_per_pulse, e0.sx_sign});
    n_pulse = lightmatter::converged_substeps(probe, p, idx, &cfg.field, cfg.pulse_substeps,
                                              cfg.tolerance);
  }
  out.pulse_substeps_used = n_pulse;

  double t = 0.0;
  for (const PulseEvent& e : cfg.schedule) {
    const double dt = e.arrival_s - t;
    if (dt < -1e-12) throw InvalidArgumentError("pulse schedule overlaps or is unsorted");
    if (dt > 1e-15) {
      const int nd = dark_substeps_for(dt);
      magnetics::field_step(st, cfg.field, dt, nd, obs);
      out.dark_substeps_used = std::max(out.dark_substeps_used, nd);
    }
    lightmatter::ProbePulse p = cfg.pulse_template;
    p.arrival_s = e.arrival_s;
    p.photons = cfg.photons_per_pulse;
    p.sx_sign = e.sx_sign;
    const int idx = state::append_pulse(st, {cfg.photons_per_pulse, e.sx_sign});
    lightmatter::pulse_step(st, p, idx, n_pulse, &cfg.field, obs);

    measurement::MeasurementSpec mspec;
    mspec.pulse_index = idx;
    mspec.component = algebra::kSy;
    mspec.condition = cfg.condition;
    mspec.pinv_tol = cfg.pinv_tol;
    const double input_sx = 0.5 * e.sx_sign * cfg.photons_per_pulse;
    const measurement::MeasurementRecord rec = measurement::read_out(
        st, mspec, input_sx, e.arrival_s + duration, !cfg.keep_pulse_blocks);
    if (obs) obs(st, "readout");
    out.records.push_back({rec, e.v_polarized});
    t = e.arrival_s + duration;
  }
  if (cfg.total_s > t + 1e-15) {
    const int nd = dark_substeps_for(cfg.total_s - t);
    magnetics::field_step(st, cfg.field, cfg.total_s - t, nd, obs);
    out.dark_substeps_used = std::max(out.dark_substeps_used, nd);
  }

  out.min_uncertainty_margin = min_margin;
  out.final_state = std::move(st);
  return out;
}

std::string csv_string(const RunResult& result) {
  std::string out = "t_s,phi_mean_rad,phi_var_rad2,tau_gauss_s,flags\n";
  char buf[160];
  for (const RunRecord& rec : result.records) {
    std::string flags;
    if (rec.v_polarized) flags = "v";
    if (rec.m.conditioning_skipped) flags += flags.empty() ? "cond_skipped" : "|cond_skipped";
    if (flags.empty()) flags = "-";
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,", rec.m.time_s, rec.m.phi_mean_rad,
                  rec.m.phi_var_rad2, result.tau_gauss_s);
    out += buf;
    out += flags;
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const RunResult& result) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open output file: " + path);
  f << csv_string(result);
  f.flush();
  if (!f) throw IoError("failed writing output file: " + path);
}

}  // namespace spincov::harness
