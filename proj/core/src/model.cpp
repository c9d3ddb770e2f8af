#include "iterfilt/model.hpp"

#include "iterfilt/errors.hpp"

#include <boost/container/small_vector.hpp>

#include <cmath>

namespace iterfilt {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

TimeGrid::TimeGrid(double t0, std::vector<double> times) : t0_(t0), times_(std::move(times)) {
  if (times_.empty()) throw ConfigurationError("time grid needs at least one observation time");
  double prev = t0_;
  if (!std::isfinite(prev)) throw ConfigurationError("initial time is not finite");
  for (double t : times_) {
    if (!std::isfinite(t) || !(t > prev)) throw ConfigurationError("time grid must be strictly increasing");
    prev = t;
  }
}

TimeGrid TimeGrid::regular(double t0, double dt, std::size_t n) {
  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) times[i] = t0 + dt * static_cast<double>(i + 1);
  return TimeGrid(t0, std::move(times));
}

ParamVector::ParamVector(Eigen::VectorXd values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw DomainError("", "parameter vector has a non-finite component");
}

ParamVector::ParamVector(std::initializer_list<double> values)
    : ParamVector(Eigen::Map<const Eigen::VectorXd>(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

ObservationSeries::ObservationSeries(TimeGrid grid, Eigen::MatrixXd values, std::vector<bool> present)
    : grid_(std::move(grid)), values_(std::move(values)), present_(std::move(present)) {
  if (static_cast<std::size_t>(values_.cols()) != grid_.size())
    throw DimensionError("observation count " + std::to_string(values_.cols()) + " does not match time grid length " +
                         std::to_string(grid_.size()));
  if (present_.empty()) present_.assign(grid_.size(), true);
  if (present_.size() != grid_.size()) throw DimensionError("missing-value mask has the wrong length");
  for (std::size_t n = 0; n < grid_.size(); ++n)
    if (present_[n] && !values_.col(static_cast<Eigen::Index>(n)).allFinite())
      throw ConfigurationError("observation " + std::to_string(n + 1) + " is not finite");
}

std::span<const double> ObservationSeries::y(std::size_t n) const {
  return {values_.col(static_cast<Eigen::Index>(n - 1)).data(), dim()};
}

ObservationSeries ObservationSeries::head(std::size_t n) const {
  std::vector<double> times(grid_.times().begin(), grid_.times().begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<bool> present(present_.begin(), present_.begin() + static_cast<std::ptrdiff_t>(n));
  return ObservationSeries(TimeGrid(grid_.initial_time(), std::move(times)), values_.leftCols(static_cast<Eigen::Index>(n)),
                           std::move(present));
}

void ModelSpec::validate() const {
  if (state_dim == 0) throw DimensionError("model state dimension must be positive");
  if (transform.size() != param_dim)
    throw DimensionError("model transform has " + std::to_string(transform.size()) + " coordinates, expected " +
                         std::to_string(param_dim));
  if (!init || !transition) throw ConfigurationError("model needs init and transition samplers");
  if (!measurement_density && !log_measurement_density)
    throw ConfigurationError("model needs a measurement density");
  if (extended && extended->param_offset + extended->param_dim > state_dim)
    throw DimensionError("extended layout does not fit the state dimension");
}

double ModelSpec::log_measurement(std::span<const double> y, std::span<const double> x, std::span<const double> theta,
                                  double t) const {
  if (log_measurement_density) return log_measurement_density(y, x, theta, t);
  const double d = measurement_density(y, x, theta, t);
  // NaN propagates and is rejected by the caller; negative densities too.
  if (d < 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::log(d);
}

ModelSpec restrict_parameters(const ModelSpec& model, const Eigen::VectorXd& natural_values,
                              const std::vector<std::size_t>& free) {
  if (static_cast<std::size_t>(natural_values.size()) != model.param_dim)
    throw DimensionError("fixed parameter vector does not match the model");
  for (auto i : free)
    if (i >= model.param_dim) throw DimensionError("free parameter index out of range");

  using Buffer = boost::container::small_vector<double, 8>;
  const std::vector<double> base(natural_values.data(), natural_values.data() + natural_values.size());
  // Scatters the free coordinates into a copy of the fixed full vector.
  auto expand = [base, free](std::span<const double> theta) {
    Buffer full(base.begin(), base.end());
    for (std::size_t k = 0; k < free.size(); ++k) full[free[k]] = theta[k];
    return full;
  };

  ModelSpec out = model;
  out.param_dim = free.size();
  out.transform = model.transform.select(free);
  out.extended.reset();
  out.init = [f = model.init, expand](std::span<const double> theta, RngStream& rng, std::span<double> x0) {
    auto full = expand(theta);
    f(std::span<const double>(full.data(), full.size()), rng, x0);
  };
  out.transition = [f = model.transition, expand](std::span<const double> xp, std::span<const double> theta,
                                                  double t0, double t1, RngStream& rng, std::span<double> x) {
    auto full = expand(theta);
    f(xp, std::span<const double>(full.data(), full.size()), t0, t1, rng, x);
  };
  if (model.measurement_density)
    out.measurement_density = [f = model.measurement_density, expand](std::span<const double> y,
                                                                      std::span<const double> x,
                                                                      std::span<const double> theta, double t) {
      auto full = expand(theta);
      return f(y, x, std::span<const double>(full.data(), full.size()), t);
    };
  if (model.log_measurement_density)
    out.log_measurement_density = [f = model.log_measurement_density, expand](std::span<const double> y,
                                                                              std::span<const double> x,
                                                                              std::span<const double> theta,
                                                                              double t) {
      auto full = expand(theta);
      return f(y, x, std::span<const double>(full.data(), full.size()), t);
    };
  if (model.obs_sampler)
    out.obs_sampler = [f = model.obs_sampler, expand](std::span<const double> x, std::span<const double> theta,
                                                      double t, RngStream& rng, std::span<double> y) {
      auto full = expand(theta);
      f(x, std::span<const double>(full.data(), full.size()), t, rng, y);
    };
  return out;
}

Simulation simulate(const ModelSpec& model, const ParamVector& theta, const TimeGrid& grid, const RngStream& rng) {
  model.validate();
  if (!model.obs_sampler) throw ConfigurationError("simulation requires an observation sampler");
  if (theta.size() != model.param_dim) throw DimensionError("parameter vector does not match the model");

  const Eigen::VectorXd natural = model.transform.from_unconstrained(theta.values());
  const std::span<const double> th(natural.data(), model.param_dim);
  const std::size_t n_obs = grid.size();
  const auto dx = static_cast<Eigen::Index>(model.state_dim);

  Eigen::MatrixXd states = Eigen::MatrixXd::Zero(dx, static_cast<Eigen::Index>(n_obs + 1));
  Eigen::MatrixXd ys = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.obs_dim), static_cast<Eigen::Index>(n_obs));

  {
    RngStream s = rng.derive("init");
    model.init(th, s, {states.col(0).data(), model.state_dim});
    if (!all_finite({states.col(0).data(), model.state_dim})) throw ModelEvaluationError(0, "init");
  }
  for (std::size_t n = 1; n <= n_obs; ++n) {
    const auto c = static_cast<Eigen::Index>(n);
    RngStream s = rng.derive("transition", n);
    model.transition({states.col(c - 1).data(), model.state_dim}, th, grid.time(n - 1), grid.time(n), s,
                     {states.col(c).data(), model.state_dim});
    if (!all_finite({states.col(c).data(), model.state_dim})) throw ModelEvaluationError(n, "transition");
    RngStream o = rng.derive("observation", n);
    model.obs_sampler({states.col(c).data(), model.state_dim}, th, grid.time(n), o,
                      {ys.col(c - 1).data(), model.obs_dim});
    if (!all_finite({ys.col(c - 1).data(), model.obs_dim})) throw ModelEvaluationError(n, "obs_sampler");
  }
  return Simulation{std::move(states), ObservationSeries(grid, std::move(ys))};
}

}  // namespace iterfilt
