#include <spincov/spincov.h>

#include <CLI11.hpp>

#include <cstdio>
#include <future>
#include <string>
#include <thread>
#include <vector>

namespace {

struct SweepSpec {
  std::string param;
  double lo = 0.0;
  double hi = 0.0;
  int n = 1;
};

bool parse_sweep(const std::string& arg, SweepSpec& out) {
  const std::size_t eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) return false;
  out.param = arg.substr(0, eq);
  const std::string rhs = arg.substr(eq + 1);
  const std::size_t c1 = rhs.find(':');
  const std::size_t c2 = rhs.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos) return false;
  try {
    std::size_t used = 0;
    out.lo = std::stod(rhs.substr(0, c1));
    out.hi = std::stod(rhs.substr(c1 + 1, c2 - c1 - 1));
    const std::string nstr = rhs.substr(c2 + 1);
    out.n = std::stoi(nstr, &used);
    if (used != nstr.size()) return false;
  } catch (const std::exception&) {
    return false;
  }
  return out.n >= 1;
}

std::string sweep_filename(const std::string& out, int i) {
  const std::size_t slash = out.rfind('/');
  const std::size_t dot = out.rfind('.');
  if (dot == std::string::npos || dot == 0 ||
      (slash != std::string::npos && dot < slash + 2))
    return out + "." + std::to_string(i);
  return out.substr(0, dot) + "." + std::to_string(i) + out.substr(dot);
}

int fail(spincov_status st, const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, spincov_last_error());
  return static_cast<int>(st);
}

void print_record_row(std::FILE* f, const spincov_record& r, double tau_gauss_s) {
  std::string flags;
  if (r.v_polarized) flags = "v";
  if (r.conditioning_skipped) flags += flags.empty() ? "cond_skipped" : "|cond_skipped";
  if (flags.empty()) flags = "-";
  std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%s\n", r.t_s, r.phi_mean_rad, r.phi_var_rad2,
               tau_gauss_s, flags.c_str());
}

int run_single(const std::string& config_path, const std::string& out_path) {
  spincov_config* cfg = nullptr;
  if (spincov_status st = spincov_config_load(config_path.c_str(), &cfg))
    return fail(st, "loading config");
  spincov_result* res = nullptr;
  if (spincov_status st = spincov_run(cfg, &res)) {
    spincov_config_free(cfg);
    return fail(st, "running experiment");
  }

  int rc = 0;
  if (out_path.empty()) {
    std::fprintf(stdout, "t_s,phi_mean_rad,phi_var_rad2,tau_gauss_s,flags\n");
    const double tau = spincov_result_tau_gauss_s(res);
    for (size_t i = 0; i < spincov_result_num_records(res); ++i) {
      spincov_record rec;
      spincov_result_record(res, i, &rec);
      print_record_row(stdout, rec, tau);
    }
  } else if (spincov_status st = spincov_result_write_csv(res, out_path.c_str())) {
    rc = fail(st, "writing CSV");
  }

  if (rc == 0) {
    size_t needed = 0;
    if (spincov_result_metadata_json(res, nullptr, 0, &needed) == SPINCOV_OK && needed > 0) {
      std::string meta(needed, '\0');
      if (spincov_result_metadata_json(res, meta.data(), meta.size(), &needed) == SPINCOV_OK)
        std::fprintf(stderr, "%s\n", meta.c_str());
    }
  }

  spincov_result_free(res);
  spincov_config_free(cfg);
  return rc;
}

struct SweepOutcome {
  int index = 0;
  double value = 0.0;
  std::string path;
  std::string error;
  size_t records = 0;
};

SweepOutcome run_sweep_point(const std::string& config_path, const SweepSpec& spec, int i,
                             const std::string& out_path) {
  SweepOutcome o;
  o.index = i;
  o.value = spec.n == 1 ? spec.lo : spec.lo + i * (spec.hi - spec.lo) / (spec.n - 1);
  o.path = sweep_filename(out_path, i);

  spincov_config* cfg = nullptr;
  if (spincov_config_load(config_path.c_str(), &cfg)) {
    o.error = spincov_last_error();
    return o;
  }
  spincov_result* res = nullptr;
  if (spincov_config_set_number(cfg, spec.param.c_str(), o.value) ||
      spincov_run(cfg, &res)) {
    o.error = spincov_last_error();
    spincov_config_free(cfg);
    return o;
  }
  if (spincov_result_write_csv(res, o.path.c_str())) o.error = spincov_last_error();
  o.records = spincov_result_num_records(res);
  spincov_result_free(res);
  spincov_config_free(cfg);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Deterministic mean/variance simulator for pulsed polarization probing of an "
      "atomic ensemble in a static magnetic field"};
  std::string config_path;
  std::string out_path;
  std::string sweep_arg;
  bool oracle_check = false;
  double oracle_tol = 1e-8;

  app.add_option("config", config_path, "experiment description (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out,-o", out_path, "CSV output path (stdout when omitted)");
  app.add_flag("--oracle-check", oracle_check,
               "compare the engine against independent reference integrators and exit");
  app.add_option("--oracle-tol", oracle_tol, "pass threshold for --oracle-check")
      ->capture_default_str();
  app.add_option("--sweep", sweep_arg,
                 "run a linear parameter sweep, format dotted.path=lo:hi:n; writes one "
                 "CSV per point next to --out");
  app.set_version_flag("--version", spincov_version());
  CLI11_PARSE(app, argc, argv);

  if (oracle_check && !sweep_arg.empty()) {
    std::fprintf(stderr, "error: --oracle-check and --sweep are mutually exclusive\n");
    return 1;
  }

  if (oracle_check) {
    spincov_config* cfg = nullptr;
    if (spincov_status st = spincov_config_load(config_path.c_str(), &cfg))
      return fail(st, "loading config");
    double err = 0.0;
    char report[4096];
    const spincov_status st = spincov_oracle_check(cfg, &err, report, sizeof report);
    spincov_config_free(cfg);
    if (st) return fail(st, "oracle check");
    std::fputs(report, stdout);
    std::printf("max relative error: %.3g (threshold %.3g)\n", err, oracle_tol);
    return err <= oracle_tol ? 0 : 1;
  }

  if (!sweep_arg.empty()) {
    SweepSpec spec;
    if (!parse_sweep(sweep_arg, spec)) {
      std::fprintf(stderr, "error: bad --sweep format, expected dotted.path=lo:hi:n\n");
      return 1;
    }
    if (out_path.empty()) {
      std::fprintf(stderr, "error: --sweep needs --out as the per-point CSV name template\n");
      return 1;
    }
    const unsigned batch = std::max(1u, std::thread::hardware_concurrency());
    int failures = 0;
    for (int base = 0; base < spec.n; base += static_cast<int>(batch)) {
      std::vector<std::future<SweepOutcome>> futs;
      const int end = std::min(spec.n, base + static_cast<int>(batch));
      for (int i = base; i < end; ++i)
        futs.push_back(std::async(std::launch::async, run_sweep_point, config_path, spec, i,
                                  out_path));
      for (auto& f : futs) {
        const SweepOutcome o = f.get();
        if (o.error.empty()) {
          std::printf("sweep[%d] %s=%.17g -> %s (%zu records)\n", o.index, spec.param.c_str(),
                      o.value, o.path.c_str(), o.records);
        } else {
          std::fprintf(stderr, "sweep[%d] %s=%.17g failed: %s\n", o.index, spec.param.c_str(),
                       o.value, o.error.c_str());
          ++failures;
        }
      }
    }
    return failures == 0 ? 0 : 1;
  }

  return run_single(config_path, out_path);
}
