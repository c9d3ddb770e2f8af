#pragma once

#include "iterfilt/model.hpp"
#include "iterfilt/transform.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

/// Exact inference for linear-Gaussian state-space models, used as ground
/// truth for the Monte Carlo machinery.
namespace iterfilt::oracle {

/// x_0 ~ N(m0, P0),  x_n = A x_{n-1} + w_n,  w_n ~ N(0, Q),
///                   y_n = H x_n + v_n,      v_n ~ N(0, R).
struct LgssSpec {
  Eigen::MatrixXd A, Q, H, R;
  Eigen::VectorXd m0;
  Eigen::MatrixXd P0;

  std::size_t state_dim() const noexcept { return static_cast<std::size_t>(A.rows()); }
  std::size_t obs_dim() const noexcept { return static_cast<std::size_t>(H.rows()); }
  void validate() const;
};

enum class LgssTarget { A, Q, H, R, m0, P0 };

/// Binds one named parameter to one matrix entry. Off-diagonal entries of
/// the symmetric targets (Q, R, P0) are written to both (row, col) and
/// (col, row).
struct LgssBinding {
  std::string name;
  LgssTarget target = LgssTarget::A;
  std::size_t row = 0;
  std::size_t col = 0;
  TransformKind transform = TransformKind::identity;
};

/// An LgssSpec with some entries driven by a parameter vector.
class LgssModel {
 public:
  LgssModel(LgssSpec base, std::vector<LgssBinding> bindings);

  const LgssSpec& base() const noexcept { return base_; }
  const std::vector<LgssBinding>& bindings() const noexcept { return bindings_; }
  const ParamTransform& transform() const noexcept { return transform_; }
  std::size_t param_dim() const noexcept { return bindings_.size(); }

  LgssSpec at(const Eigen::VectorXd& unconstrained) const;
  LgssSpec at_natural(std::span<const double> natural) const;

 private:
  LgssSpec base_;
  std::vector<LgssBinding> bindings_;
  ParamTransform transform_;
};

struct ScalarLgssParams {
  double a = 0.8;
  double q = 1.0;
  double r = 1.0;
  double m0 = 0.0;
  double p0 = 1.0;
};

/// One-dimensional LGSS with coordinates a (identity), q (log), r (log),
/// m0 (identity) and p0 (log); `free` selects and orders the bound ones.
LgssModel scalar_lgss(const ScalarLgssParams& params, const std::vector<std::string>& free);

/// Simulator/density callbacks for an LgssModel, parameterized like it.
ModelSpec lgss_model_spec(const LgssModel& model);

struct KalmanResult {
  double loglik = 0.0;
  std::vector<Eigen::VectorXd> predicted_means;  ///< index n-1: E[x_n | y_{1:n-1}]
  std::vector<Eigen::MatrixXd> predicted_covs;
  std::vector<Eigen::VectorXd> filtered_means;  ///< index n-1: E[x_n | y_{1:n}]
  std::vector<Eigen::MatrixXd> filtered_covs;
};

/// Kalman filter. Throws NumericalError on a singular innovation covariance.
KalmanResult kalman_filter(const LgssSpec& spec, const ObservationSeries& data);
double kalman_loglik(const LgssSpec& spec, const ObservationSeries& data);
double kalman_loglik(const LgssModel& model, const ObservationSeries& data, const Eigen::VectorXd& theta);

struct FiniteDifferenceScore {
  Eigen::VectorXd score;       ///< step h_i = 1e-5 (1 + |theta_i|)
  Eigen::VectorXd score_half;  ///< step h_i / 2
  /// max_i |score_i - score_half_i| / max(1, |score_i|)
  double discrepancy = 0.0;
  bool consistent = false;  ///< discrepancy <= 1e-6
};

/// Central finite differences of the exact log-likelihood on the
/// unconstrained scale.
FiniteDifferenceScore kalman_score_checked(const LgssModel& model, const ObservationSeries& data,
                                           const Eigen::VectorXd& theta);
Eigen::VectorXd kalman_score(const LgssModel& model, const ObservationSeries& data, const Eigen::VectorXd& theta);

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct OptimizeOptions {
  double initial_step = 0.1;
  double tolerance = 1e-8;
  std::size_t max_evaluations = 200000;
};

struct OptimizeResult {
  Eigen::VectorXd argmax;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string warning;
};

/// Derivative-free maximization by coordinate line search with shrinking
/// steps; stops once the step falls below the tolerance.
OptimizeResult reference_optimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                  const Eigen::VectorXd& start, const std::optional<Bounds>& bounds = std::nullopt,
                                  const OptimizeOptions& options = {});

}  // namespace iterfilt::oracle
