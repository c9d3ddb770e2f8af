#include "iterfilt/kernel.hpp"

#include "iterfilt/errors.hpp"

#include <Eigen/Eigenvalues>
#include <boost/container/small_vector.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

namespace iterfilt {

namespace {

constexpr int kMaxRejections = 100;

using Buffer = boost::container::small_vector<double, 8>;

std::span<double> span_of(Buffer& b) { return {b.data(), b.size()}; }

}  // namespace

KernelSpec::KernelSpec(Eigen::MatrixXd scale, double truncation_radius)
    : scale_(std::move(scale)), radius_(truncation_radius) {
  if (scale_.rows() == 0 || scale_.rows() != scale_.cols())
    throw ConfigurationError("kernel scale matrix must be square and non-empty");
  if (!scale_.allFinite()) throw ConfigurationError("kernel scale matrix is not finite");
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) throw ConfigurationError("kernel truncation radius must be positive");
  const double asym = (scale_ - scale_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * (1.0 + scale_.cwiseAbs().maxCoeff()))
    throw ConfigurationError("kernel scale matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scale_, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw ConfigurationError("kernel scale matrix must be positive definite");

  Eigen::LLT<Eigen::MatrixXd> llt(scale_);
  factor_ = llt.matrixL();
  log_det_ = 2.0 * factor_.diagonal().array().log().sum();

  const double d = static_cast<double>(dim());
  const double r2 = radius_ * radius_;
  inside_mass_ = boost::math::gamma_p(d / 2.0, r2 / 2.0);
  // E[|z|^2 ; |z| <= c] = d P(chi^2_{d+2} <= c^2), split evenly over coordinates.
  covariance_factor_ = boost::math::gamma_p(d / 2.0 + 1.0, r2 / 2.0) / inside_mass_;
}

KernelSpec KernelSpec::diagonal(const Eigen::VectorXd& diag, double truncation_radius) {
  return KernelSpec(diag.asDiagonal().toDenseMatrix(), truncation_radius);
}

KernelSpec KernelSpec::identity(std::size_t dim, double truncation_radius) {
  const auto n = static_cast<Eigen::Index>(dim);
  return KernelSpec(Eigen::MatrixXd::Identity(n, n), truncation_radius);
}

void PerturbationScales::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigurationError("perturbation sigma must be >= 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigurationError("perturbation tau must be > 0");
}

void kernel_sample(const KernelSpec& spec, double s, RngStream& rng, std::span<double> out) {
  const std::size_t d = spec.dim();
  if (out.size() != d) throw DimensionError("kernel output has the wrong dimension");
  if (!(s >= 0.0)) throw ConfigurationError("kernel scale must be >= 0");
  if (s == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double r2 = spec.truncation_radius() * spec.truncation_radius();
  Buffer z(d);
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    double norm2 = 0.0;
    for (auto& v : z) {
      v = rng.normal();
      norm2 += v * v;
    }
    if (norm2 > r2) continue;
    const auto& L = spec.factor();
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k <= i; ++k) acc += L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * z[k];
      out[i] = s * acc;
    }
    return;
  }
  throw ConfigurationError("kernel rejection sampler exceeded its retry cap");
}

Eigen::VectorXd kernel_sample(const KernelSpec& spec, double s, RngStream& rng) {
  Eigen::VectorXd u(static_cast<Eigen::Index>(spec.dim()));
  kernel_sample(spec, s, rng, {u.data(), spec.dim()});
  return u;
}

double kernel_log_density(const KernelSpec& spec, double s, std::span<const double> u) {
  if (!(s > 0.0)) throw ConfigurationError("kernel density requires a positive scale");
  const std::size_t d = spec.dim();
  if (u.size() != d) throw DimensionError("kernel argument has the wrong dimension");
  // Mahalanobis norm of u / s via a forward solve against L.
  const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(d));
  const Eigen::VectorXd z = spec.factor().triangularView<Eigen::Lower>().solve(uv / s);
  const double m2 = z.squaredNorm();
  if (m2 > spec.truncation_radius() * spec.truncation_radius()) return -std::numeric_limits<double>::infinity();
  const double dd = static_cast<double>(d);
  return -0.5 * m2 - 0.5 * dd * std::log(2.0 * std::numbers::pi) - 0.5 * spec.log_det_ - dd * std::log(s) -
         std::log(spec.inside_mass());
}

double kernel_density(const KernelSpec& spec, double s, std::span<const double> u) {
  return std::exp(kernel_log_density(spec, s, u));
}

ModelSpec extend_model(const ModelSpec& f, const KernelSpec& kernel, const PerturbationScales& scales,
                       const ParamVector& center) {
  f.validate();
  scales.validate();
  if (kernel.dim() != f.param_dim) throw DimensionError("kernel dimension does not match the model parameters");
  if (center.size() != f.param_dim) throw DimensionError("perturbation center does not match the model parameters");

  const std::size_t dx = f.state_dim;
  const std::size_t dp = f.param_dim;

  ModelSpec g;
  g.state_dim = dx + dp;
  g.obs_dim = f.obs_dim;
  g.param_dim = dp;
  g.transform = ParamTransform::identity(f.transform.names());
  g.extended = ExtendedLayout{dx, dx, dp, center.values()};

  const Eigen::VectorXd c = center.values();
  const double sigma = scales.sigma;
  const double tau = scales.tau;
  const ParamTransform transform = f.transform;

  g.init = [f, kernel, c, tau, transform, dx, dp](std::span<const double>, RngStream& rng, std::span<double> z0) {
    auto theta = z0.subspan(dx, dp);
    RngStream perturb = rng.derive("perturbation");
    kernel_sample(kernel, tau, perturb, theta);
    for (std::size_t i = 0; i < dp; ++i) theta[i] += c[static_cast<Eigen::Index>(i)];
    Buffer natural(dp);
    transform.from_unconstrained(theta, span_of(natural));
    f.init(span_of(natural), rng, z0.first(dx));
  };

  g.transition = [f, kernel, sigma, transform, dx, dp](std::span<const double> zp, std::span<const double>,
                                                       double t0, double t1, RngStream& rng, std::span<double> z) {
    auto theta_prev = zp.subspan(dx, dp);
    auto theta = z.subspan(dx, dp);
    RngStream perturb = rng.derive("perturbation");
    kernel_sample(kernel, sigma, perturb, theta);
    for (std::size_t i = 0; i < dp; ++i) theta[i] += theta_prev[i];
    // x moves under the parameter value held over the previous interval.
    Buffer natural(dp);
    transform.from_unconstrained(theta_prev, span_of(natural));
    f.transition(zp.first(dx), span_of(natural), t0, t1, rng, z.first(dx));
  };

  g.log_measurement_density = [f, transform, dx, dp](std::span<const double> y, std::span<const double> z,
                                                     std::span<const double>, double t) {
    Buffer natural(dp);
    transform.from_unconstrained(z.subspan(dx, dp), span_of(natural));
    return f.log_measurement(y, z.first(dx), span_of(natural), t);
  };
  g.measurement_density = [g_log = g.log_measurement_density](std::span<const double> y, std::span<const double> z,
                                                              std::span<const double> theta, double t) {
    return std::exp(g_log(y, z, theta, t));
  };

  if (f.obs_sampler)
    g.obs_sampler = [f, transform, dx, dp](std::span<const double> z, std::span<const double>, double t,
                                           RngStream& rng, std::span<double> y) {
      Buffer natural(dp);
      transform.from_unconstrained(z.subspan(dx, dp), span_of(natural));
      f.obs_sampler(z.first(dx), span_of(natural), t, rng, y);
    };
  return g;
}

}  // namespace iterfilt
