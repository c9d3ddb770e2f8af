#include "iterfilt/ifilter.hpp"

#include "iterfilt/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace iterfilt {

namespace {

double condition_number(const Eigen::MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || !std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::size_t tempering_count(const Tempering& t, std::size_t m) {
  std::size_t count = 0;
  for (auto r : t.restarts)
    if (r <= m) ++count;
  return count;
}

}  // namespace

Eigen::VectorXd solve_prediction_variance(const Eigen::MatrixXd& variance, const Eigen::VectorXd& rhs,
                                          std::size_t step, double condition_limit) {
  Eigen::MatrixXd v = 0.5 * (variance + variance.transpose());
  double cond = condition_number(v);
  if (!(cond <= condition_limit)) {
    const double jitter = 1e-10 * v.trace();
    if (jitter > 0.0 && std::isfinite(jitter)) v.diagonal().array() += jitter;
    cond = condition_number(v);
    if (!(cond <= condition_limit)) throw SingularVarianceError(step, cond);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) throw SingularVarianceError(step, cond);
  return llt.solve(rhs);
}

ScoreEstimate score_estimate(const ModelSpec& model, const ParamVector& theta, const ObservationSeries& data,
                             const KernelSpec& kernel, const PerturbationScales& scales, std::size_t particles,
                             const RngStream& rng, const ScoreOptions& options) {
  scales.validate();
  ScoreEstimate out;
  if (scales.sigma > scales.tau)
    out.warnings.push_back("sigma/tau = " + fmt(scales.sigma / scales.tau) +
                           " exceeds 1; the score approximation assumes sigma << tau");
  // Fewer than d+1 particles give a rank-deficient variance at every step.
  if (particles < std::max<std::size_t>(2, model.param_dim + 1))
    throw SingularVarianceError(1, std::numeric_limits<double>::infinity());

  const ModelSpec g = extend_model(model, kernel, scales, theta);
  out.filter = particle_filter(g, theta, data, particles, rng, FilterOptions{options.resampler, {}});

  const auto& means = out.filter.filter_means;
  const auto& vars = out.filter.prediction_variances;
  out.value = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.param_dim));
  out.terms.reserve(data.size());
  for (std::size_t n = 1; n <= data.size(); ++n) {
    Eigen::VectorXd term = solve_prediction_variance(vars[n], means[n] - means[n - 1], n, options.condition_limit);
    out.value += term;
    out.terms.push_back(std::move(term));
  }
  return out;
}

PowerLawSchedule PowerLawSchedule::from_delta(double delta, std::size_t particles_base) {
  if (!(delta > 0.0)) throw ConfigurationError("power-law schedule needs delta > 0");
  PowerLawSchedule s;
  s.particles_base = particles_base;
  s.gain_exponent = 1.0;
  s.tau_exponent = 0.5;
  s.sigma_exponent = 0.5 * (1.0 + delta);
  s.particles_exponent = delta + 0.5;
  return s;
}

void MifSchedule::validate() const {
  if (tempering.factor < 1.0 || !std::isfinite(tempering.factor))
    throw ConfigurationError("tempering factor must be >= 1");
  if (mode == ScheduleMode::practical) {
    const auto& p = practical;
    if (p.particles == 0) throw ConfigurationError("practical schedule needs particles > 0");
    if (!(p.tau0 > 0.0)) throw ConfigurationError("practical schedule needs tau0 > 0");
    if (!(p.sigma_ratio >= 0.0)) throw ConfigurationError("practical schedule needs sigma_ratio >= 0");
    if (!(p.cooling > 0.0 && p.cooling <= 1.0)) throw ConfigurationError("cooling factor must lie in (0,1]");
    if (!(p.gain0 >= 0.0)) throw ConfigurationError("gain must be >= 0");
    if (!(p.gain_decay > 0.0 && p.gain_decay <= 1.0)) throw ConfigurationError("gain decay must lie in (0,1]");
  } else {
    const auto& t = theoretical;
    if (t.particles_base == 0) throw ConfigurationError("power-law schedule needs particles_base > 0");
    if (!(t.tau0 > 0.0) || !(t.sigma0 >= 0.0) || !(t.gain0 >= 0.0))
      throw ConfigurationError("power-law schedule scales must be positive");
  }
}

IterationSettings MifSchedule::at(std::size_t m) const {
  const double heat = std::pow(tempering.factor, static_cast<double>(tempering_count(tempering, m)));
  IterationSettings s;
  if (mode == ScheduleMode::practical) {
    const auto& p = practical;
    const double md = static_cast<double>(m);
    s.gain = p.gain0 * std::pow(p.gain_decay, md);
    s.tau = p.tau0 * std::pow(p.cooling, md) * heat;
    s.sigma = p.sigma_ratio * s.tau;
    s.particles = p.particles;
  } else {
    const auto& t = theoretical;
    const double k = static_cast<double>(m + 1);
    s.gain = t.gain0 * std::pow(k, -t.gain_exponent);
    s.tau = t.tau0 * std::pow(k, -t.tau_exponent) * heat;
    s.sigma = t.sigma0 * std::pow(k, -t.sigma_exponent) * heat;
    s.particles = static_cast<std::size_t>(std::ceil(std::pow(k, t.particles_exponent))) * t.particles_base;
  }
  return s;
}

std::string_view to_string(ScheduleMode mode) {
  return mode == ScheduleMode::practical ? "practical" : "theoretical";
}

bool ScheduleReport::all_satisfied() const {
  for (const auto& c : checks)
    if (!c.satisfied) return false;
  return true;
}

const ConditionCheck* ScheduleReport::find(const std::string& condition) const {
  for (const auto& c : checks)
    if (c.condition == condition) return &c;
  return nullptr;
}

ScheduleReport check_schedule(const MifSchedule& schedule) {
  ScheduleReport report;
  report.mode = schedule.mode;
  auto add = [&](const char* name, bool ok, std::string detail) {
    report.checks.push_back({name, ok, std::move(detail)});
  };

  if (schedule.mode == ScheduleMode::theoretical) {
    const auto& t = schedule.theoretical;
    const double pa = t.gain_exponent, pt = t.tau_exponent, ps = t.sigma_exponent, pj = t.particles_exponent;
    add("tau_m -> 0", pt > 0.0, "tau_m ~ m^-" + fmt(pt) + ", needs exponent > 0");
    add("sigma_m/tau_m -> 0", ps - pt > 0.0 || t.sigma0 == 0.0,
        "sigma_m/tau_m ~ m^-(" + fmt(ps) + " - " + fmt(pt) + ") = m^-" + fmt(ps - pt) + ", needs exponent > 0");
    add("J_m tau_m -> infinity", pj - pt > 0.0,
        "J_m tau_m ~ m^(" + fmt(pj) + " - " + fmt(pt) + ") = m^" + fmt(pj - pt) + ", needs exponent > 0");
    add("sum a_m = infinity", pa <= 1.0 && t.gain0 > 0.0, "a_m ~ m^-" + fmt(pa) + ", diverges iff exponent <= 1");
    const double q = 2.0 * pa + pj - 2.0 * pt;
    add("sum a_m^2 / (J_m tau_m^2) < infinity", q > 1.0 || t.gain0 == 0.0,
        "summand ~ m^-(2*" + fmt(pa) + " + " + fmt(pj) + " - 2*" + fmt(pt) + ") = m^-" + fmt(q) +
            ", converges iff exponent > 1");
    add("a_m -> 0", pa > 0.0 || t.gain0 == 0.0, "a_m ~ m^-" + fmt(pa) + ", needs exponent > 0");
  } else {
    const auto& p = schedule.practical;
    add("tau_m -> 0", p.cooling < 1.0, "tau_m = tau_0 * " + fmt(p.cooling) + "^m");
    add("sigma_m/tau_m -> 0", p.sigma_ratio == 0.0, "sigma_m/tau_m is held at " + fmt(p.sigma_ratio));
    add("J_m tau_m -> infinity", false,
        "J_m is fixed at " + std::to_string(p.particles) + " while tau_m does not increase");
    add("sum a_m = infinity", p.gain_decay >= 1.0 && p.gain0 > 0.0,
        "a_m = " + fmt(p.gain0) + " * " + fmt(p.gain_decay) + "^m");
    add("sum a_m^2 / (J_m tau_m^2) < infinity", p.gain_decay < p.cooling || p.gain0 == 0.0,
        "summand ratio (gain_decay/cooling)^2 = " + fmt(std::pow(p.gain_decay / p.cooling, 2)) + ", needs < 1");
    add("a_m -> 0", p.gain_decay < 1.0 || p.gain0 == 0.0, "a_m = " + fmt(p.gain0) + " * " + fmt(p.gain_decay) + "^m");
  }
  if (!schedule.tempering.restarts.empty() && schedule.tempering.factor > 1.0)
    for (auto& c : report.checks) c.detail += " (finitely many tempering restarts do not change the limit)";
  return report;
}

MifResult mif_run(const ModelSpec& model, const ObservationSeries& data, const ParamVector& start,
                  const KernelSpec& kernel, const MifSchedule& schedule, const RngStream& rng,
                  const MifOptions& options) {
  model.validate();
  schedule.validate();
  if (start.size() != model.param_dim) throw DimensionError("start vector does not match the model parameters");

  MifResult result;
  result.schedule = schedule;
  Eigen::VectorXd theta = start.values();
  result.trajectory.push_back(theta);
  result.natural_trajectory.push_back(model.transform.from_unconstrained(theta));
  bool warned_divergence = false;

  for (std::size_t m = 0; m < schedule.iterations; ++m) {
    const IterationSettings s = schedule.at(m);
    ScoreEstimate est;
    try {
      est = score_estimate(model, ParamVector(theta), data, kernel, PerturbationScales{s.sigma, s.tau}, s.particles,
                           rng.derive("iteration", m), ScoreOptions{options.resampler, options.condition_limit});
    } catch (const NumericalError& e) {
      std::string kind = "numerical";
      if (dynamic_cast<const DegeneracyError*>(&e)) kind = "degeneracy";
      if (dynamic_cast<const SingularVarianceError*>(&e)) kind = "singular_variance";
      if (dynamic_cast<const ModelEvaluationError*>(&e)) kind = "model_evaluation";
      result.failure = MifFailure{m, e.step(), kind, e.what()};
      break;
    }
    for (auto& w : est.warnings) result.warnings.push_back("iteration " + std::to_string(m) + ": " + w);

    const Eigen::VectorXd next = theta + s.gain * est.value;
    result.settings.push_back(s);
    result.logliks.push_back(est.filter.loglik);
    result.scores.push_back(est.value);
    if (!next.allFinite()) {
      result.failure = MifFailure{m, 0, "non_finite_update", "parameter update produced a non-finite value"};
      break;
    }
    theta = next;
    result.trajectory.push_back(theta);
    result.natural_trajectory.push_back(model.transform.from_unconstrained(theta));
    if (!warned_divergence && theta.cwiseAbs().maxCoeff() > options.divergence_bound) {
      result.warnings.push_back("iterate exceeded the divergence bound at iteration " + std::to_string(m + 1));
      warned_divergence = true;
    }
  }
  return result;
}

}  // namespace iterfilt
