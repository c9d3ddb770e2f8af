#include "iterfilt/smc.hpp"

#include "iterfilt/errors.hpp"
#include "iterfilt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iterfilt {

namespace {

bool column_finite(const Eigen::MatrixXd& m, Eigen::Index j) { return m.col(j).allFinite(); }

// Serial scan for the first flagged particle keeps the reported error
// independent of scheduling.
void raise_first(const std::vector<char>& bad, std::size_t step, const char* callback) {
  if (std::find(bad.begin(), bad.end(), 1) != bad.end()) throw ModelEvaluationError(step, callback);
}

}  // namespace

double log_mean_exp(const std::vector<double>& values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - mx);
  return mx + std::log(acc / static_cast<double>(values.size()));
}

FilterResult particle_filter(const ModelSpec& model, const ParamVector& theta, const ObservationSeries& data,
                             std::size_t particles, const RngStream& rng, const FilterOptions& options) {
  model.validate();
  if (particles == 0) throw ConfigurationError("particle filter needs at least one particle");
  if (theta.size() != model.param_dim) throw DimensionError("parameter vector does not match the model");
  if (data.dim() != model.obs_dim)
    throw DimensionError("data have dimension " + std::to_string(data.dim()) + ", model expects " +
                         std::to_string(model.obs_dim));

  const std::size_t J = particles;
  const std::size_t N = data.size();
  const std::size_t dz = model.state_dim;
  const auto Jx = static_cast<Eigen::Index>(J);
  const Eigen::VectorXd natural = model.transform.from_unconstrained(theta.values());
  const std::span<const double> th(natural.data(), model.param_dim);

  const auto& layout = model.extended;
  const std::size_t base_dim = layout ? layout->base_state_dim : dz;
  const auto bx = static_cast<Eigen::Index>(base_dim);

  FilterResult result;
  result.cond_loglik.reserve(N);
  result.ess.reserve(N);
  result.state_filter_means.reserve(N + 1);
  if (layout) {
    result.filter_means.reserve(N + 1);
    if (J >= 2) result.prediction_variances.reserve(N + 1);
  }

  ParticleEnsemble filtered{Eigen::MatrixXd(static_cast<Eigen::Index>(dz), Jx), std::vector<double>(J, 0.0),
                            EnsembleStage::filtering};
  ParticleEnsemble predicted{Eigen::MatrixXd(static_cast<Eigen::Index>(dz), Jx), std::vector<double>(J, 0.0),
                             EnsembleStage::prediction};
  std::vector<char> bad(J, 0);

  parallel_for(J, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      RngStream s = rng.derive("init", j);
      model.init(th, s, {filtered.states.col(c).data(), dz});
      bad[j] = column_finite(filtered.states, c) ? 0 : 1;
    }
  });
  raise_first(bad, 0, "init");

  auto record_means = [&](std::size_t n) {
    result.state_filter_means.push_back(filtered.states.topRows(bx).rowwise().mean());
    if (layout) {
      if (n == 0)
        result.filter_means.push_back(layout->center);
      else
        result.filter_means.push_back(
            filtered.states.middleRows(static_cast<Eigen::Index>(layout->param_offset),
                                       static_cast<Eigen::Index>(layout->param_dim))
                .rowwise()
                .mean());
    }
    if (options.observer) options.observer(n, filtered);
  };
  record_means(0);
  if (layout && J >= 2) result.prediction_variances.emplace_back();  // placeholder for n = 0

  std::vector<double> weights(J);
  for (std::size_t n = 1; n <= N; ++n) {
    const RngStream step = rng.derive("step", n);
    const double t_prev = data.grid().time(n - 1);
    const double t = data.grid().time(n);
    const bool observed = data.present(n);
    const auto y = data.y(n);

    parallel_for(J, [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        RngStream s = step.derive("particle", j);
        model.transition({filtered.states.col(c).data(), dz}, th, t_prev, t, s, {predicted.states.col(c).data(), dz});
        if (!column_finite(predicted.states, c)) {
          bad[j] = 1;
          continue;
        }
        bad[j] = 0;
        if (!observed) {
          predicted.log_weights[j] = 0.0;
          continue;
        }
        const double lw = model.log_measurement(y, {predicted.states.col(c).data(), dz}, th, t);
        // log(0) = -inf is a legitimate zero weight; NaN and +inf are not.
        if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) bad[j] = 2;
        predicted.log_weights[j] = lw;
      }
    });
    if (std::find(bad.begin(), bad.end(), 1) != bad.end()) throw ModelEvaluationError(n, "transition");
    if (std::find(bad.begin(), bad.end(), 2) != bad.end()) throw ModelEvaluationError(n, "measurement_density");

    if (layout && J >= 2) {
      const auto off = static_cast<Eigen::Index>(layout->param_offset);
      const auto dp = static_cast<Eigen::Index>(layout->param_dim);
      const Eigen::MatrixXd dev =
          predicted.states.middleRows(off, dp).colwise() - result.filter_means.back();
      result.prediction_variances.push_back((dev * dev.transpose()) / static_cast<double>(J - 1));
    }

    const double max_lw = *std::max_element(predicted.log_weights.begin(), predicted.log_weights.end());
    if (!std::isfinite(max_lw)) throw DegeneracyError(n, max_lw);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      weights[j] = std::exp(predicted.log_weights[j] - max_lw);
      sum += weights[j];
      sum_sq += weights[j] * weights[j];
    }
    result.cond_loglik.push_back(max_lw + std::log(sum / static_cast<double>(J)));
    result.ess.push_back(sum * sum / sum_sq);

    std::vector<std::size_t> ancestors;
    if (J == 1) {
      ancestors.assign(1, 0);
    } else {
      RngStream rs = step.derive("resample");
      try {
        ancestors = resample(options.resampler, weights, rs);
      } catch (const DegeneracyError&) {
        throw DegeneracyError(n, max_lw);
      }
    }
    for (std::size_t j = 0; j < J; ++j)
      filtered.states.col(static_cast<Eigen::Index>(j)) = predicted.states.col(static_cast<Eigen::Index>(ancestors[j]));
    record_means(n);
  }

  double total = 0.0;
  for (double c : result.cond_loglik) total += c;
  result.loglik = total;
  return result;
}

}  // namespace iterfilt
