#pragma once

#include "iterfilt/rng.hpp"
#include "iterfilt/transform.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iterfilt {

/// Observation times t_1 < ... < t_N together with the initial time t_0 < t_1.
class TimeGrid {
 public:
  TimeGrid(double t0, std::vector<double> times);

  /// t_0, t_0 + dt, ..., t_0 + n dt.
  static TimeGrid regular(double t0, double dt, std::size_t n);

  /// N, the number of observation times.
  std::size_t size() const noexcept { return times_.size(); }
  double initial_time() const noexcept { return t0_; }
  /// t_n for n = 0..N.
  double time(std::size_t n) const { return n == 0 ? t0_ : times_.at(n - 1); }
  const std::vector<double>& times() const noexcept { return times_; }

 private:
  double t0_;
  std::vector<double> times_;
};

/// Parameter vector on the unconstrained scale. Every component is finite.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Eigen::VectorXd values);
  ParamVector(std::initializer_list<double> values);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

/// y_{1:N} on a time grid. Missing observations are allowed; a missing y_n
/// contributes a conditional likelihood factor of one.
class ObservationSeries {
 public:
  /// `values` is d_y x N; `present[n-1]` flags whether y_n was observed.
  ObservationSeries(TimeGrid grid, Eigen::MatrixXd values, std::vector<bool> present = {});

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return grid_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  /// y_n for n = 1..N.
  std::span<const double> y(std::size_t n) const;
  bool present(std::size_t n) const { return present_.at(n - 1); }

  /// First n observations, on the truncated grid.
  ObservationSeries head(std::size_t n) const;

 private:
  TimeGrid grid_;
  Eigen::MatrixXd values_;
  std::vector<bool> present_;
};

/// x_0 ~ f(x_0 | theta). Writes the draw into `x0`.
using InitSampler = std::function<void(std::span<const double> theta, RngStream& rng, std::span<double> x0)>;
/// x_n ~ f(x_n | x_{n-1}, theta) over [t_prev, t].
using TransitionSampler = std::function<void(std::span<const double> x_prev, std::span<const double> theta,
                                             double t_prev, double t, RngStream& rng, std::span<double> x)>;
/// f(y_n | x_n, theta).
using MeasurementDensity = std::function<double(std::span<const double> y, std::span<const double> x,
                                                std::span<const double> theta, double t)>;
/// log f(y_n | x_n, theta); optional, preferred over MeasurementDensity when set.
using LogMeasurementDensity = MeasurementDensity;
/// y_n ~ f(y_n | x_n, theta); only needed by simulate().
using ObservationSampler = std::function<void(std::span<const double> x, std::span<const double> theta, double t,
                                              RngStream& rng, std::span<double> y)>;

/// Layout of an extended model built by extend_model(): the state is
/// z = (x, theta) with the perturbed parameter in the trailing block.
struct ExtendedLayout {
  std::size_t base_state_dim = 0;
  std::size_t param_offset = 0;
  std::size_t param_dim = 0;
  Eigen::VectorXd center;  ///< theta, unconstrained scale
};

/// A partially observed Markov model given by plug-and-play callbacks.
///
/// Callbacks receive parameters on the natural scale and must be reentrant:
/// the filter calls them concurrently across particles.
struct ModelSpec {
  std::size_t state_dim = 0;
  std::size_t obs_dim = 0;
  std::size_t param_dim = 0;

  InitSampler init;
  TransitionSampler transition;
  MeasurementDensity measurement_density;
  LogMeasurementDensity log_measurement_density;
  ObservationSampler obs_sampler;

  ParamTransform transform;
  std::optional<ExtendedLayout> extended;

  /// Throws DimensionError / ConfigurationError if the spec is unusable.
  void validate() const;
  /// log f(y | x, theta), via whichever density callback is available.
  double log_measurement(std::span<const double> y, std::span<const double> x, std::span<const double> theta,
                         double t) const;
};

/// Fix some coordinates of a model's parameter vector at natural-scale
/// values; the returned model is parameterized by the remaining (`free`)
/// coordinates only, in the order given.
ModelSpec restrict_parameters(const ModelSpec& model, const Eigen::VectorXd& natural_values,
                              const std::vector<std::size_t>& free);

struct Simulation {
  Eigen::MatrixXd states;  ///< d_x x (N+1), column n is x_n
  ObservationSeries observations;
};

/// Draws x_{0:N} and y_{1:N} from the model at `theta` (unconstrained).
Simulation simulate(const ModelSpec& model, const ParamVector& theta, const TimeGrid& grid, const RngStream& rng);

}  // namespace iterfilt
