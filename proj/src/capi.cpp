#include "spincov/spincov.h"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "spincov/errors.hpp"
#include "spincov/harness.hpp"
#include "spincov/lightmatter.hpp"
#include "spincov/magnetics.hpp"
#include "spincov/oracle.hpp"
#include "spincov/state.hpp"

using nlohmann::json;

struct spincov_config {
  json doc;
};

struct spincov_result {
  spincov::harness::RunResult run;
};

namespace {

thread_local std::string g_last_error;

constexpr const char* kVersion = "0.1.0";

spincov_status to_status(spincov::ErrorCode code) {
  using spincov::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument:
      return SPINCOV_ERR_INVALID_ARGUMENT;
    case ErrorCode::parse:
      return SPINCOV_ERR_PARSE;
    case ErrorCode::unphysical:
      return SPINCOV_ERR_UNPHYSICAL;
    case ErrorCode::step_too_large:
      return SPINCOV_ERR_STEP_TOO_LARGE;
    case ErrorCode::diverged:
      return SPINCOV_ERR_DIVERGED;
    case ErrorCode::io:
      return SPINCOV_ERR_IO;
    case ErrorCode::internal:
      return SPINCOV_ERR_INTERNAL;
  }
  return SPINCOV_ERR_INTERNAL;
}

template <class F>
spincov_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SPINCOV_OK;
  } catch (const spincov::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPINCOV_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SPINCOV_ERR_INTERNAL;
  }
}

spincov_status invalid(const char* msg) {
  g_last_error = msg;
  return SPINCOV_ERR_INVALID_ARGUMENT;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const std::size_t dot = path.find('.', pos);
    const std::size_t end = dot == std::string::npos ? path.size() : dot;
    parts.push_back(path.substr(pos, end - pos));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return parts;
}

json* navigate(json& root, const std::string& path, bool create) {
  json* cur = &root;
  for (const std::string& seg : split_path(path)) {
    if (seg.empty()) throw spincov::InvalidArgumentError("empty segment in path: " + path);
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(seg, &used);
        if (used != seg.size()) throw std::invalid_argument(seg);
      } catch (const std::exception&) {
        throw spincov::InvalidArgumentError("array index expected at \"" + seg + "\" in path: " +
                                            path);
      }
      if (idx >= cur->size())
        throw spincov::InvalidArgumentError("array index out of range in path: " + path);
      cur = &(*cur)[idx];
    } else if (cur->is_object()) {
      if (!cur->contains(seg)) {
        if (!create) throw spincov::InvalidArgumentError("no value at path: " + path);
        (*cur)[seg] = json();
      }
      cur = &(*cur)[seg];
    } else {
      throw spincov::InvalidArgumentError("path descends below a scalar: " + path);
    }
  }
  return cur;
}

}  // namespace

extern "C" {

const char* spincov_version(void) { return kVersion; }

const char* spincov_last_error(void) { return g_last_error.c_str(); }

spincov_status spincov_config_parse(const char* json_text, spincov_config** out) {
  if (!json_text || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    json doc;
    try {
      doc = json::parse(json_text);
    } catch (const json::exception& e) {
      throw spincov::ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw spincov::ParseError("top-level config must be a JSON object");
    *out = new spincov_config{std::move(doc)};
  });
}

spincov_status spincov_config_load(const char* path, spincov_config** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    std::ifstream f(path);
    if (!f) throw spincov::IoError(std::string("cannot open config file: ") + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    json doc;
    try {
      doc = json::parse(buf.str());
    } catch (const json::exception& e) {
      throw spincov::ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw spincov::ParseError("top-level config must be a JSON object");
    *out = new spincov_config{std::move(doc)};
  });
}

spincov_status spincov_config_set_number(spincov_config* cfg, const char* dotted_path,
                                         double value) {
  if (!cfg || !dotted_path) return invalid("null argument");
  return guarded([&] { *navigate(cfg->doc, dotted_path, /*create=*/true) = value; });
}

spincov_status spincov_config_get_number(const spincov_config* cfg, const char* dotted_path,
                                         double* out) {
  if (!cfg || !dotted_path || !out) return invalid("null argument");
  return guarded([&] {
    const json* v =
        navigate(const_cast<spincov_config*>(cfg)->doc, dotted_path, /*create=*/false);
    if (!v->is_number())
      throw spincov::InvalidArgumentError(std::string("value at path is not a number: ") +
                                          dotted_path);
    *out = v->get<double>();
  });
}

void spincov_config_free(spincov_config* cfg) { delete cfg; }

spincov_status spincov_run(const spincov_config* cfg, spincov_result** out) {
  if (!cfg || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    const spincov::harness::ExperimentConfig parsed =
        spincov::harness::parse_config(cfg->doc.dump());
    auto* res = new spincov_result{spincov::harness::run_experiment(parsed)};
    *out = res;
  });
}

size_t spincov_result_num_records(const spincov_result* res) {
  return res ? res->run.records.size() : 0;
}

spincov_status spincov_result_record(const spincov_result* res, size_t index,
                                     spincov_record* out) {
  if (!res || !out) return invalid("null argument");
  if (index >= res->run.records.size()) return invalid("record index out of range");
  const spincov::harness::RunRecord& r = res->run.records[index];
  out->t_s = r.m.time_s;
  out->phi_mean_rad = r.m.phi_mean_rad;
  out->phi_var_rad2 = r.m.phi_var_rad2;
  out->s_det_mean = r.m.s_det_mean;
  out->s_det_var = r.m.s_det_var;
  out->v_polarized = r.v_polarized ? 1 : 0;
  out->conditioning_skipped = r.m.conditioning_skipped ? 1 : 0;
  g_last_error.clear();
  return SPINCOV_OK;
}

double spincov_result_tau_gauss_s(const spincov_result* res) {
  return res ? res->run.tau_gauss_s : std::numeric_limits<double>::quiet_NaN();
}

spincov_status spincov_result_write_csv(const spincov_result* res, const char* path) {
  if (!res || !path) return invalid("null argument");
  return guarded([&] { spincov::harness::write_csv(path, res->run); });
}

spincov_status spincov_result_metadata_json(const spincov_result* res, char* buf, size_t buf_len,
                                            size_t* needed) {
  if (!res || !needed) return invalid("null argument");
  return guarded([&] {
    char hash[32];
    std::snprintf(hash, sizeof hash, "0x%016llx",
                  static_cast<unsigned long long>(res->run.config_hash));
    json meta = {
        {"config_hash", hash},
        {"num_records", res->run.records.size()},
        {"pulse_substeps_used", res->run.pulse_substeps_used},
        {"dark_substeps_used", res->run.dark_substeps_used},
        {"tau_gauss_s", res->run.tau_gauss_s},
        {"min_uncertainty_margin", res->run.min_uncertainty_margin},
        {"warnings", res->run.warnings},
    };
    const std::string text = meta.dump();
    *needed = text.size() + 1;
    if (!buf) return;
    if (buf_len < text.size() + 1)
      throw spincov::InvalidArgumentError("metadata buffer too small");
    std::memcpy(buf, text.c_str(), text.size() + 1);
  });
}

void spincov_result_free(spincov_result* res) { delete res; }

spincov_status spincov_analytic_fid(const double b_mG[3], double decay_time_s, double g1_rad,
                                    double f0, const double axis[3], double g_factor, double t_s,
                                    double* phi_out) {
  if (!b_mG || !axis || !phi_out) return invalid("null argument");
  return guarded([&] {
    spincov::harness::FidModel m;
    m.b_mG = Eigen::Vector3d(b_mG[0], b_mG[1], b_mG[2]);
    m.decay_time_s = decay_time_s;
    m.g1_rad = g1_rad;
    m.f0 = f0;
    m.axis = Eigen::Vector3d(axis[0], axis[1], axis[2]);
    if (m.axis.norm() == 0.0)
      throw spincov::InvalidArgumentError("orientation axis must be nonzero");
    m.gamma_rad_per_s_mG = spincov::constants::gyromagnetic_ratio(g_factor);
    *phi_out = spincov::harness::analytic_fid_phi(m, t_s);
  });
}

spincov_status spincov_tau_gauss(const double b_mG[3], const double b_cov_mG2[9], double g_factor,
                                 double* tau_out) {
  if (!b_mG || !b_cov_mG2 || !tau_out) return invalid("null argument");
  return guarded([&] {
    spincov::magnetics::FieldModel f;
    f.b_mean_mG = Eigen::Vector3d(b_mG[0], b_mG[1], b_mG[2]);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f.b_cov_mG2(r, c) = b_cov_mG2[3 * r + c];
    f.gamma_rad_per_s_mG = spincov::constants::gyromagnetic_ratio(g_factor);
    *tau_out = spincov::harness::tau_gauss_s(f);
  });
}

spincov_status spincov_oracle_check(const spincov_config* cfg, double* max_rel_err,
                                    char* report_buf, size_t buf_len) {
  if (!cfg || !max_rel_err) return invalid("null argument");
  return guarded([&] {
    namespace h = spincov::harness;
    namespace lm = spincov::lightmatter;
    namespace mg = spincov::magnetics;
    namespace st = spincov::state;
    namespace oc = spincov::oracle;

    const h::ExperimentConfig parsed = h::parse_config(cfg->doc.dump());
    std::ostringstream report;
    double worst = 0.0;

    st::SystemState initial =
        st::initial_full_state(parsed.ensemble, parsed.field.b_mean_mG, parsed.field.b_cov_mG2);

    if (parsed.ensemble.n_mean > 0.0 && parsed.field.b_mean_mG.norm() > 0.0) {
      // Mean spin over one dark period against the exact density-matrix
      // propagator; gradients off, since the reference has none.
      mg::FieldModel plain = parsed.field;
      plain.grad_parallel_mG_per_mm = 0.0;
      const double t_check = parsed.period_s > 0.0 ? parsed.period_s : 1e-5;
      const int n = std::max(
          100, static_cast<int>(std::ceil(std::abs(plain.larmor_rad_per_s()) * t_check / 0.05)));
      st::SystemState evolved = initial;
      mg::field_step(evolved, plain, t_check, n);
      const spincov::algebra::Vector8d engine = evolved.atomic_mean() / parsed.ensemble.n_mean;

      const auto rho0 = oc::rho_from_lambda(initial.atomic_mean() / parsed.ensemble.n_mean);
      const auto rho_t = oc::exact_field_evolution(rho0, plain.b_mean_mG, t_check,
                                                   plain.gamma_rad_per_s_mG);
      const spincov::algebra::Vector8d ref = oc::lambda_from_rho(rho_t);

      const double err = (engine - ref).cwiseAbs().maxCoeff() /
                         std::max(ref.cwiseAbs().maxCoeff(), 1e-30);
      worst = std::max(worst, err);
      report << "dark-interval mean vs density-matrix propagator: rel err " << err << "\n";
    } else {
      report << "dark-interval check skipped (no atoms or no field)\n";
    }

    if (parsed.photons_per_pulse > 0.0 && !parsed.schedule.empty()) {
      // First pulse against a fine classical integration of the bilinear
      // dynamics; scattering off, no interleaved field, means only.
      lm::ProbePulse p = parsed.pulse_template;
      p.photons = parsed.photons_per_pulse;
      p.sx_sign = parsed.schedule.front().sx_sign;
      p.eta_gamma = 0.0;
      p.transmission = 1.0;
      st::SystemState pulsed = initial;
      const int idx = st::append_pulse(pulsed, {parsed.photons_per_pulse, p.sx_sign});
      const spincov::algebra::Vector8d atom0 = pulsed.atomic_mean();
      const Eigen::Vector3d stokes0 = pulsed.pulse_mean(idx);
      lm::pulse_step(pulsed, p, idx, std::max(parsed.pulse_substeps, 1 << 14), nullptr);

      const oc::PulseOracleResult ref =
          oc::heisenberg_pulse_oracle(atom0, stokes0, p.g1_rad, p.g2_rad, 20000);
      const double atom_scale = std::max(atom0.cwiseAbs().maxCoeff(), 1.0);
      const double stokes_scale = std::max(stokes0.cwiseAbs().maxCoeff(), 1.0);
      const double err_atom =
          (spincov::algebra::Vector8d(pulsed.atomic_mean()) - ref.collective_atomic)
              .cwiseAbs()
              .maxCoeff() /
          atom_scale;
      const double err_stokes =
          (Eigen::Vector3d(pulsed.pulse_mean(idx)) - ref.stokes).cwiseAbs().maxCoeff() /
          stokes_scale;
      worst = std::max({worst, err_atom, err_stokes});
      report << "pulse atomic means vs fine reference integration: rel err " << err_atom << "\n";
      report << "pulse Stokes means vs fine reference integration: rel err " << err_stokes
             << "\n";
    } else {
      report << "pulse check skipped (no photons or empty schedule)\n";
    }

    *max_rel_err = worst;
    if (report_buf && buf_len > 0) {
      const std::string text = report.str();
      const size_t n = std::min(buf_len - 1, text.size());
      std::memcpy(report_buf, text.c_str(), n);
      report_buf[n] = '\0';
    }
  });
}

}  // extern "C"
