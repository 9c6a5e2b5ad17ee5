#include "spincov/lightmatter.hpp"

#include <cmath>
#include <sstream>

#include "spincov/algebra.hpp"
#include "spincov/errors.hpp"

namespace spincov::lightmatter {

namespace {

using algebra::StructureConstants;

struct Channel {
  algebra::StokesCoord stokes;
  algebra::AtomicCoord atom;
  double g;
};

void validate_pulse(const ProbePulse& pulse) {
  if (!(pulse.duration_s > 0.0)) throw InvalidArgumentError("pulse duration must be positive");
  if (!(pulse.photons >= 0.0)) throw InvalidArgumentError("photon number must be non-negative");
  if (!(pulse.eta_gamma >= 0.0))
    throw InvalidArgumentError("scattering damage per photon must be non-negative");
  if (!(pulse.readdition_p >= 0.0 && pulse.readdition_p <= 1.0))
    throw InvalidArgumentError("readdition probability must lie in [0, 1]");
  if (!(pulse.transmission > 0.0 && pulse.transmission <= 1.0))
    throw UnphysicalError("pulse transmission must lie in (0, 1]");
}

void drift_into(const std::vector<DriftEntry>& h, const Eigen::VectorXd& v, Eigen::VectorXd& b) {
  b.setZero();
  for (const auto& e : h) b(e.i) += e.v * v(e.j) * v(e.k);
}

void linearization_into(const std::vector<DriftEntry>& h, const Eigen::VectorXd& v,
                        Eigen::MatrixXd& a) {
  a.setZero();
  for (const auto& e : h) {
    a(e.i, e.k) += e.v * v(e.j);
    a(e.i, e.j) += e.v * v(e.k);
  }
}

}  // namespace

std::vector<DriftEntry> build_drift(const state::Layout& layout, int pulse_index, double g1_rad,
                                    double g2_rad) {
  const auto& sc = StructureConstants::instance();
  const int a0 = state::Layout::atom_offset();
  const int p0 = layout.pulse_offset(pulse_index);
  const std::array<Channel, 3> channels = {{
      {algebra::kSz, algebra::kFz, g1_rad},
      {algebra::kSx, algebra::kJx, g2_rad},
      {algebra::kSy, algebra::kJy, g2_rad},
  }};

  std::vector<DriftEntry> h;
  for (const auto& ch : channels) {
    if (ch.g == 0.0) continue;
    for (const auto& e : sc.atomic_entries())
      if (e.b == ch.atom) h.push_back({a0 + e.a, p0 + ch.stokes, a0 + e.c, ch.g * e.value});
    for (const auto& e : sc.stokes_entries())
      if (e.b == ch.stokes) h.push_back({p0 + e.a, a0 + ch.atom, p0 + e.c, ch.g * e.value});
  }
  return h;
}

Eigen::VectorXd drift(const std::vector<DriftEntry>& h, const Eigen::VectorXd& v) {
  Eigen::VectorXd b(v.size());
  drift_into(h, v, b);
  return b;
}

Eigen::MatrixXd linearization(const std::vector<DriftEntry>& h, const Eigen::VectorXd& v,
                              int dim) {
  Eigen::MatrixXd a(dim, dim);
  linearization_into(h, v, a);
  return a;
}

void optical_decoherence(state::SystemState& st, const ProbePulse& pulse, int pulse_index,
                         double fraction) {
  validate_pulse(pulse);
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidArgumentError("decoherence fraction must lie in [0, 1]");
  const double x = std::exp(-pulse.eta_gamma * pulse.photons * fraction);
  const double eps = std::pow(pulse.transmission, fraction);
  if (x == 1.0 && eps == 1.0) return;

  const int dim = st.layout.dim();
  const int a0 = state::Layout::atom_offset();
  const int p0 = st.layout.pulse_offset(pulse_index);
  const double n_atoms = st.n_atoms;

  Eigen::VectorXd scale = Eigen::VectorXd::Ones(dim);
  scale.segment<8>(a0).setConstant(x);
  scale.segment<3>(p0).setConstant(eps);

  // Photon count still in flight, for the light replacement noise below.
  const double photons_now = 2.0 * st.pulse_mean(pulse_index).norm();

  const algebra::Vector8d lambda_bar =
      n_atoms > 0.0 ? algebra::Vector8d(st.atomic_mean() / n_atoms) : algebra::Vector8d::Zero();

  st.mean.array() *= scale.array();
  st.cov.array().colwise() *= scale.array();
  st.cov.array().rowwise() *= scale.transpose().array();

  if (x < 1.0 && n_atoms > 0.0) {
    const algebra::Matrix8d gamma_single =
        algebra::single_atom_covariance(lambda_bar, /*validate=*/false);
    st.cov.block<8, 8>(a0, a0) +=
        x * (1.0 - x) * n_atoms * gamma_single +
        pulse.readdition_p * (1.0 - x) * (2.0 / 3.0) * n_atoms * algebra::Matrix8d::Identity();
  }
  if (eps < 1.0)
    st.cov.block<3, 3>(p0, p0) +=
        eps * (1.0 - eps) * 0.25 * photons_now * Eigen::Matrix3d::Identity();
}

void pulse_step(state::SystemState& st, const ProbePulse& pulse, int pulse_index, int n_substeps,
                const magnetics::FieldModel* field, const magnetics::StepObserver& observer) {
  validate_pulse(pulse);
  if (n_substeps < 1) throw InvalidArgumentError("substep count must be >= 1");
  if (pulse_index < 0 || pulse_index >= st.layout.n_pulses)
    throw InvalidArgumentError("pulse index out of range");

  const int dim = st.layout.dim();
  const double hsub = 1.0 / n_substeps;
  const double strength = (std::abs(pulse.g1_rad) + 2.0 * std::abs(pulse.g2_rad)) *
                          std::max(0.5 * pulse.photons, st.n_atoms) * hsub;
  if (strength > 0.75) {
    std::ostringstream msg;
    msg << "pulse substep too large: coupling strength per substep = " << strength
        << " > 0.75; increase the substep count";
    throw StepTooLargeError(msg.str());
  }

  const auto h = build_drift(st.layout, pulse_index, pulse.g1_rad, pulse.g2_rad);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd v0(dim), vmid(dim), dv(dim);
  Eigen::MatrixXd a0mat(dim, dim), amid(dim, dim), t(dim, dim), work(dim, dim);
  for (int k = 0; k < n_substeps; ++k) {
    v0 = st.mean;
    drift_into(h, v0, dv);
    vmid = v0 + 0.5 * hsub * dv;
    // Tangent map of the midpoint step; keeps the covariance transport at
    // the same order as the mean.
    linearization_into(h, v0, a0mat);
    linearization_into(h, vmid, amid);
    work.noalias() = amid * a0mat;
    t = eye + hsub * amid + (0.5 * hsub * hsub) * work;
    drift_into(h, vmid, dv);
    st.mean = v0 + hsub * dv;
    work.noalias() = t * st.cov;
    st.cov.noalias() = work * t.transpose();
    work = st.cov.transpose();
    st.cov += work;
    st.cov *= 0.5;
    optical_decoherence(st, pulse, pulse_index, hsub);
    if (field) magnetics::field_step(st, *field, pulse.duration_s * hsub, 1);
    if (observer) observer(st, "pulse");
  }
}

int converged_substeps(const state::SystemState& st, const ProbePulse& pulse, int pulse_index,
                       const magnetics::FieldModel* field, int n_start, double rel_tol) {
  if (n_start < 1) throw InvalidArgumentError("substep count must be >= 1");
  if (!(rel_tol > 0.0)) throw InvalidArgumentError("tolerance must be positive");
  constexpr int kMax = 1 << 18;

  auto run = [&](int n) {
    state::SystemState s = st;
    pulse_step(s, pulse, pulse_index, n, field);
    return s;
  };

  state::SystemState prev = run(n_start);
  for (int n = 2 * n_start; n <= kMax; n *= 2) {
    const state::SystemState cur = run(n);
    const double mean_scale = std::max(prev.mean.cwiseAbs().maxCoeff(), 1.0);
    const double cov_scale = std::max(prev.cov.cwiseAbs().maxCoeff(), 1.0);
    const double dm = (cur.mean - prev.mean).cwiseAbs().maxCoeff() / mean_scale;
    const double dc = (cur.cov - prev.cov).cwiseAbs().maxCoeff() / cov_scale;
    if (std::max(dm, dc) < rel_tol) return n;
    prev = cur;
  }
  throw DivergedError("pulse step did not converge within the substep budget");
}

}  // namespace spincov::lightmatter
