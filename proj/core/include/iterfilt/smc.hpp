#pragma once

#include "iterfilt/model.hpp"
#include "iterfilt/resample.hpp"
#include "iterfilt/rng.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace iterfilt {

enum class EnsembleStage { prediction, filtering };

/// The J particles of the filter at one stage of one step. Column j of
/// `states` is particle j; weights are kept on the log scale.
struct ParticleEnsemble {
  Eigen::MatrixXd states;
  std::vector<double> log_weights;
  EnsembleStage stage = EnsembleStage::filtering;

  std::size_t size() const noexcept { return static_cast<std::size_t>(states.cols()); }
};

struct FilterOptions {
  Resampler resampler = Resampler::systematic;
  /// Called after resampling at every step n = 0..N with the filtering
  /// ensemble (n = 0 is the initial draw).
  std::function<void(std::size_t n, const ParticleEnsemble& filtered)> observer;
};

/// Output of one particle filter pass.
///
/// For an extended (x, theta) model the parameter moments are filled in:
///   filter_means[n]         = (1/J) sum_j Theta^F_{n,j},   n = 0..N, with filter_means[0] = center
///   prediction_variances[n] = (1/(J-1)) sum_j (Theta^P_{n,j} - filter_means[n-1])(...)',  n = 1..N
/// prediction_variances[0] is unused. Variances need J >= 2 and are left
/// empty otherwise.
struct FilterResult {
  std::vector<double> cond_loglik;  ///< index n-1 holds log[(1/J) sum_j w(n,j)]
  double loglik = 0.0;
  std::vector<double> ess;  ///< index n-1 holds (sum w)^2 / sum w^2 at step n
  std::vector<Eigen::VectorXd> state_filter_means;  ///< n = 0..N, base state block only
  std::vector<Eigen::VectorXd> filter_means;
  std::vector<Eigen::MatrixXd> prediction_variances;

  bool has_parameter_moments() const noexcept { return !filter_means.empty(); }
};

/// Bootstrap particle filter: propagate, weight by the measurement density,
/// resample, at every step. `theta` is on the model's unconstrained scale.
///
/// Streams: particle j at step n draws from rng.derive("step", n).derive("particle", j);
/// the initial draw from rng.derive("init", j); resampling at step n from
/// rng.derive("step", n).derive("resample").
///
/// Throws DegeneracyError when every weight at a step is zero, and
/// ModelEvaluationError when a callback yields a non-finite value.
FilterResult particle_filter(const ModelSpec& model, const ParamVector& theta, const ObservationSeries& data,
                             std::size_t particles, const RngStream& rng, const FilterOptions& options = {});

/// log of (1/R) sum_r exp(values[r]).
double log_mean_exp(const std::vector<double>& values);

}  // namespace iterfilt
