#pragma once

#include "iterfilt/kernel.hpp"
#include "iterfilt/model.hpp"
#include "iterfilt/smc.hpp"

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace iterfilt {

// ---------------------------------------------------------------------------
// Score estimation

struct ScoreOptions {
  Resampler resampler = Resampler::systematic;
  /// Prediction variances with a larger condition number are rejected.
  double condition_limit = 1e12;
};

/// Moment-based estimate of the log-likelihood gradient,
///
///   sum_{n=1}^N  (V^P_n)^{-1} (theta^F_n - theta^F_{n-1}),
///
/// computed from one particle filter pass over the extended model.
struct ScoreEstimate {
  Eigen::VectorXd value;
  std::vector<Eigen::VectorXd> terms;  ///< index n-1 holds the step-n term
  FilterResult filter;
  std::vector<std::string> warnings;
};

/// Requires J >= max(2, d_theta + 1). Throws SingularVarianceError naming
/// the step whose prediction variance cannot be inverted.
ScoreEstimate score_estimate(const ModelSpec& model, const ParamVector& theta, const ObservationSeries& data,
                             const KernelSpec& kernel, const PerturbationScales& scales, std::size_t particles,
                             const RngStream& rng, const ScoreOptions& options = {});

/// Solves V x = b for a Monte Carlo prediction variance. On a failed
/// factorization or excessive condition number a jitter of 1e-10 trace(V) is
/// added once; if that does not help, SingularVarianceError(step) is thrown.
Eigen::VectorXd solve_prediction_variance(const Eigen::MatrixXd& variance, const Eigen::VectorXd& rhs,
                                          std::size_t step, double condition_limit = 1e12);

// ---------------------------------------------------------------------------
// Schedules

enum class ScheduleMode { theoretical, practical };

/// Power-law family a_m = a_0 k^-pa, tau_m = tau_0 k^-pt, sigma_m = sigma_0 k^-ps,
/// J_m = ceil(k^pj) J_base, with k = m + 1 for the 0-based iteration m.
struct PowerLawSchedule {
  double gain0 = 1.0;
  double tau0 = 1.0;
  double sigma0 = 1.0;
  std::size_t particles_base = 100;
  double gain_exponent = 1.0;
  double tau_exponent = 0.5;
  double sigma_exponent = 0.75;
  double particles_exponent = 1.0;

  /// a_m = 1/m, tau_m^2 = 1/m, sigma_m^2 = m^-(1+delta), J_m = ceil(m^(delta+1/2)) J_base.
  static PowerLawSchedule from_delta(double delta, std::size_t particles_base = 100);
};

/// Fixed J, geometric cooling of tau with sigma / tau held constant, and
/// geometric gains a_m = gain0 * gain_decay^m.
struct PracticalSchedule {
  std::size_t particles = 1000;
  double tau0 = 0.5;
  double sigma_ratio = 0.1;
  double cooling = 0.95;
  double gain0 = 0.1;
  double gain_decay = 0.95;
};

/// Scheduled re-heating: from each restart iteration on, sigma and tau are
/// multiplied by `factor` (cumulatively).
struct Tempering {
  std::vector<std::size_t> restarts;
  double factor = 1.0;
};

/// Algorithmic settings in force at one iteration.
struct IterationSettings {
  double gain = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
  std::size_t particles = 0;
};

struct MifSchedule {
  ScheduleMode mode = ScheduleMode::practical;
  std::size_t iterations = 50;
  PowerLawSchedule theoretical;
  PracticalSchedule practical;
  Tempering tempering;

  void validate() const;
  /// Settings for the 0-based iteration m.
  IterationSettings at(std::size_t m) const;
};

struct ConditionCheck {
  std::string condition;
  bool satisfied = false;
  std::string detail;
};

/// Checks the stochastic-approximation rate conditions
///   tau_m -> 0, sigma_m / tau_m -> 0, J_m tau_m -> infinity,
///   sum a_m = infinity, sum a_m^2 / (J_m tau_m^2) < infinity
/// (plus a_m -> 0) for the schedule's sequence family. Informational only.
struct ScheduleReport {
  ScheduleMode mode = ScheduleMode::practical;
  std::vector<ConditionCheck> checks;

  bool all_satisfied() const;
  const ConditionCheck* find(const std::string& condition) const;
};

ScheduleReport check_schedule(const MifSchedule& schedule);

std::string_view to_string(ScheduleMode mode);

// ---------------------------------------------------------------------------
// Iterated filtering

struct MifOptions {
  Resampler resampler = Resampler::systematic;
  double condition_limit = 1e12;
  /// Iterates with a larger max-norm are reported as diverging.
  double divergence_bound = std::numeric_limits<double>::infinity();
};

struct MifFailure {
  std::size_t iteration = 0;
  std::size_t step = 0;
  std::string kind;  ///< "degeneracy", "singular_variance" or "model_evaluation"
  std::string message;
};

struct MifResult {
  std::vector<Eigen::VectorXd> trajectory;          ///< unconstrained, length M+1 on success
  std::vector<Eigen::VectorXd> natural_trajectory;  ///< same points, natural scale
  std::vector<double> logliks;                      ///< filter loglik of the extended model, per iteration
  std::vector<Eigen::VectorXd> scores;
  std::vector<IterationSettings> settings;
  MifSchedule schedule;
  std::optional<MifFailure> failure;
  std::vector<std::string> warnings;

  bool completed() const noexcept { return !failure.has_value(); }
};

/// theta_{m+1} = theta_m + a_m * score_estimate(theta_m; sigma_m, tau_m, J_m),
/// for m = 0..M-1. Iteration m draws from rng.derive("iteration", m).
/// Numerical failures stop the recursion; the partial trajectory is returned
/// with `failure` set.
MifResult mif_run(const ModelSpec& model, const ObservationSeries& data, const ParamVector& start,
                  const KernelSpec& kernel, const MifSchedule& schedule, const RngStream& rng,
                  const MifOptions& options = {});

}  // namespace iterfilt
