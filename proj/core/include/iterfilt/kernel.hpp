#pragma once

#include "iterfilt/model.hpp"
#include "iterfilt/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <span>

namespace iterfilt {

/// Random-walk perturbation kernel: a mean-zero multivariate normal with
/// scale matrix Sigma, truncated to the Mahalanobis ball of radius c and
/// renormalized. The density is zero outside the ball and positive inside.
class KernelSpec {
 public:
  explicit KernelSpec(Eigen::MatrixXd scale, double truncation_radius = 6.0);

  static KernelSpec diagonal(const Eigen::VectorXd& diag, double truncation_radius = 6.0);
  static KernelSpec identity(std::size_t dim, double truncation_radius = 6.0);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(scale_.rows()); }
  const Eigen::MatrixXd& scale() const noexcept { return scale_; }
  double truncation_radius() const noexcept { return radius_; }
  /// Lower Cholesky factor L of Sigma.
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }

  /// P(chi^2_d <= c^2): the mass the untruncated normal puts inside the ball.
  double inside_mass() const noexcept { return inside_mass_; }
  /// Realized covariance is covariance_factor() * s^2 * Sigma.
  double covariance_factor() const noexcept { return covariance_factor_; }

 private:
  Eigen::MatrixXd scale_;
  Eigen::MatrixXd factor_;
  double radius_;
  double log_det_;
  double inside_mass_;
  double covariance_factor_;

  friend double kernel_log_density(const KernelSpec&, double, std::span<const double>);
};

/// Perturbation scales: sigma for the per-step random walk, tau for the
/// initial spread.
struct PerturbationScales {
  double sigma = 0.0;
  double tau = 1.0;

  void validate() const;
};

/// Draws u with pre-truncation covariance s^2 Sigma. s == 0 gives u == 0.
/// Rejection sampling, capped at 100 attempts.
void kernel_sample(const KernelSpec& spec, double s, RngStream& rng, std::span<double> out);
Eigen::VectorXd kernel_sample(const KernelSpec& spec, double s, RngStream& rng);

/// Normalized density of the scaled kernel at u. Requires s > 0.
double kernel_density(const KernelSpec& spec, double s, std::span<const double> u);
double kernel_log_density(const KernelSpec& spec, double s, std::span<const double> u);

/// Builds the model on z_n = (x_n, theta_n) in which theta performs a
/// kernel random walk started around `center`:
///
///   theta_0 = center + u_0,          u_0 ~ kernel(tau)
///   x_0     ~ f(x_0 | theta_0)
///   theta_n = theta_{n-1} + u_n,     u_n ~ kernel(sigma)
///   x_n     ~ f(x_n | x_{n-1}, theta_{n-1})
///   y_n     ~ f(y_n | x_n, theta_n)
///
/// theta lives on f's unconstrained scale; f's callbacks see it mapped back
/// through f.transform. Kernel draws use the child stream
/// rng.derive("perturbation"), so the x draws consume the same stream f
/// itself would have been given.
ModelSpec extend_model(const ModelSpec& f, const KernelSpec& kernel, const PerturbationScales& scales,
                       const ParamVector& center);

}  // namespace iterfilt
