#include "iterfilt/oracle.hpp"

#include "iterfilt/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace iterfilt::oracle {

namespace {

void require_psd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(name) + " must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw ConfigurationError(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw ConfigurationError(std::string(name) + " must be positive semidefinite");
}

Eigen::MatrixXd& target_matrix(LgssSpec& s, LgssTarget t) {
  switch (t) {
    case LgssTarget::A:
      return s.A;
    case LgssTarget::Q:
      return s.Q;
    case LgssTarget::H:
      return s.H;
    case LgssTarget::R:
      return s.R;
    case LgssTarget::P0:
      return s.P0;
    case LgssTarget::m0:
      break;
  }
  return s.A;
}

bool symmetric_target(LgssTarget t) { return t == LgssTarget::Q || t == LgssTarget::R || t == LgssTarget::P0; }

// Draw from N(0, cov) given a lower factor (possibly zero rows for a zero
// covariance).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd L = ldlt.matrixL();
  return ldlt.transpositionsP().transpose() * (L * d.asDiagonal());
}

}  // namespace

void LgssSpec::validate() const {
  const auto dx = A.rows();
  if (A.cols() != dx || Q.rows() != dx || H.cols() != dx || m0.size() != dx || P0.rows() != dx || R.rows() != H.rows())
    throw DimensionError("inconsistent LGSS dimensions");
  require_psd(Q, "Q");
  require_psd(R, "R");
  require_psd(P0, "P0");
}

LgssModel::LgssModel(LgssSpec base, std::vector<LgssBinding> bindings)
    : base_(std::move(base)), bindings_(std::move(bindings)) {
  base_.validate();
  std::vector<CoordinateTransform> coords;
  for (const auto& b : bindings_) {
    const auto r = static_cast<Eigen::Index>(b.row);
    const auto c = static_cast<Eigen::Index>(b.col);
    if (b.target == LgssTarget::m0) {
      if (r >= base_.m0.size()) throw DimensionError("binding '" + b.name + "' is out of range");
    } else {
      const auto& m = target_matrix(base_, b.target);
      if (r >= m.rows() || c >= m.cols()) throw DimensionError("binding '" + b.name + "' is out of range");
    }
    coords.push_back({b.name, b.transform});
  }
  transform_ = ParamTransform(std::move(coords));
}

LgssSpec LgssModel::at_natural(std::span<const double> natural) const {
  LgssSpec s = base_;
  for (std::size_t i = 0; i < bindings_.size(); ++i) {
    const auto& b = bindings_[i];
    const auto r = static_cast<Eigen::Index>(b.row);
    const auto c = static_cast<Eigen::Index>(b.col);
    if (b.target == LgssTarget::m0) {
      s.m0[r] = natural[i];
      continue;
    }
    auto& m = target_matrix(s, b.target);
    m(r, c) = natural[i];
    if (symmetric_target(b.target)) m(c, r) = natural[i];
  }
  return s;
}

LgssSpec LgssModel::at(const Eigen::VectorXd& unconstrained) const {
  const Eigen::VectorXd natural = transform_.from_unconstrained(unconstrained);
  return at_natural({natural.data(), static_cast<std::size_t>(natural.size())});
}

LgssModel scalar_lgss(const ScalarLgssParams& p, const std::vector<std::string>& free) {
  LgssSpec s;
  s.A = Eigen::MatrixXd::Constant(1, 1, p.a);
  s.Q = Eigen::MatrixXd::Constant(1, 1, p.q);
  s.H = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.R = Eigen::MatrixXd::Constant(1, 1, p.r);
  s.m0 = Eigen::VectorXd::Constant(1, p.m0);
  s.P0 = Eigen::MatrixXd::Constant(1, 1, p.p0);
  std::vector<LgssBinding> bindings;
  for (const auto& name : free) {
    if (name == "a")
      bindings.push_back({name, LgssTarget::A, 0, 0, TransformKind::identity});
    else if (name == "q")
      bindings.push_back({name, LgssTarget::Q, 0, 0, TransformKind::log});
    else if (name == "r")
      bindings.push_back({name, LgssTarget::R, 0, 0, TransformKind::log});
    else if (name == "m0")
      bindings.push_back({name, LgssTarget::m0, 0, 0, TransformKind::identity});
    else if (name == "p0")
      bindings.push_back({name, LgssTarget::P0, 0, 0, TransformKind::log});
    else
      throw ConfigurationError("unknown LGSS parameter '" + name + "'");
  }
  return LgssModel(std::move(s), std::move(bindings));
}

ModelSpec lgss_model_spec(const LgssModel& model) {
  ModelSpec spec;
  spec.state_dim = model.base().state_dim();
  spec.obs_dim = model.base().obs_dim();
  spec.param_dim = model.param_dim();
  spec.transform = model.transform();

  auto draw = [](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, RngStream& rng, std::span<double> out) {
    const Eigen::MatrixXd L = psd_factor(cov);
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    Eigen::Map<Eigen::VectorXd>(out.data(), mean.size()) = mean + L * z;
  };
  spec.init = [model, draw](std::span<const double> theta, RngStream& rng, std::span<double> x0) {
    const LgssSpec s = model.at_natural(theta);
    draw(s.m0, s.P0, rng, x0);
  };
  spec.transition = [model, draw](std::span<const double> xp, std::span<const double> theta, double, double,
                                  RngStream& rng, std::span<double> x) {
    const LgssSpec s = model.at_natural(theta);
    const Eigen::Map<const Eigen::VectorXd> prev(xp.data(), static_cast<Eigen::Index>(xp.size()));
    draw(s.A * prev, s.Q, rng, x);
  };
  spec.obs_sampler = [model, draw](std::span<const double> x, std::span<const double> theta, double, RngStream& rng,
                                   std::span<double> y) {
    const LgssSpec s = model.at_natural(theta);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    draw(s.H * xv, s.R, rng, y);
  };
  spec.log_measurement_density = [model](std::span<const double> y, std::span<const double> x,
                                         std::span<const double> theta, double) {
    const LgssSpec s = model.at_natural(theta);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::LLT<Eigen::MatrixXd> llt(s.R);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::VectorXd z = llt.matrixL().solve(yv - s.H * xv);
    const double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    return -0.5 * (z.squaredNorm() + logdet + static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi));
  };
  spec.measurement_density = [f = spec.log_measurement_density](std::span<const double> y, std::span<const double> x,
                                                                std::span<const double> theta, double t) {
    return std::exp(f(y, x, theta, t));
  };
  return spec;
}

KalmanResult kalman_filter(const LgssSpec& spec, const ObservationSeries& data) {
  spec.validate();
  if (data.dim() != spec.obs_dim()) throw DimensionError("data dimension does not match the LGSS observation matrix");
  KalmanResult out;
  Eigen::VectorXd m = spec.m0;
  Eigen::MatrixXd P = spec.P0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t n = 1; n <= data.size(); ++n) {
    m = spec.A * m;
    P = spec.A * P * spec.A.transpose() + spec.Q;
    P = 0.5 * (P + P.transpose());
    out.predicted_means.push_back(m);
    out.predicted_covs.push_back(P);
    if (data.present(n)) {
      const Eigen::Map<const Eigen::VectorXd> y(data.y(n).data(), static_cast<Eigen::Index>(data.dim()));
      const Eigen::VectorXd innov = y - spec.H * m;
      const Eigen::MatrixXd S = spec.H * P * spec.H.transpose() + spec.R;
      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success) throw NumericalError(n, "singular innovation covariance");
      const Eigen::MatrixXd L = llt.matrixL();
      const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(innov);
      out.loglik += -0.5 * (z.squaredNorm() + 2.0 * L.diagonal().array().log().sum() +
                            static_cast<double>(data.dim()) * log2pi);
      const Eigen::MatrixXd K = llt.solve(spec.H * P).transpose();
      m = m + K * innov;
      // Joseph form keeps P symmetric PSD.
      const Eigen::MatrixXd IKH = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - K * spec.H;
      P = IKH * P * IKH.transpose() + K * spec.R * K.transpose();
      P = 0.5 * (P + P.transpose());
    }
    out.filtered_means.push_back(m);
    out.filtered_covs.push_back(P);
  }
  return out;
}

double kalman_loglik(const LgssSpec& spec, const ObservationSeries& data) { return kalman_filter(spec, data).loglik; }

double kalman_loglik(const LgssModel& model, const ObservationSeries& data, const Eigen::VectorXd& theta) {
  return kalman_loglik(model.at(theta), data);
}

namespace {

Eigen::VectorXd central_difference(const LgssModel& model, const ObservationSeries& data, const Eigen::VectorXd& theta,
                                   double step_scale) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = step_scale * (1.0 + std::abs(theta[i]));
    Eigen::VectorXd up = theta, down = theta;
    up[i] += h;
    down[i] -= h;
    g[i] = (kalman_loglik(model, data, up) - kalman_loglik(model, data, down)) / (up[i] - down[i]);
  }
  return g;
}

}  // namespace

FiniteDifferenceScore kalman_score_checked(const LgssModel& model, const ObservationSeries& data,
                                           const Eigen::VectorXd& theta) {
  FiniteDifferenceScore out;
  out.score = central_difference(model, data, theta, 1e-5);
  out.score_half = central_difference(model, data, theta, 0.5e-5);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    worst = std::max(worst, std::abs(out.score[i] - out.score_half[i]) / std::max(1.0, std::abs(out.score[i])));
  out.discrepancy = worst;
  out.consistent = worst <= 1e-6;
  return out;
}

Eigen::VectorXd kalman_score(const LgssModel& model, const ObservationSeries& data, const Eigen::VectorXd& theta) {
  return kalman_score_checked(model, data, theta).score;
}

OptimizeResult reference_optimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                  const Eigen::VectorXd& start, const std::optional<Bounds>& bounds,
                                  const OptimizeOptions& options) {
  auto clamp = [&](Eigen::VectorXd x) {
    if (bounds) x = x.cwiseMax(bounds->lower).cwiseMin(bounds->upper);
    return x;
  };
  OptimizeResult out;
  Eigen::VectorXd x = clamp(start);
  double fx = objective(x);
  out.evaluations = 1;
  if (!std::isfinite(fx)) throw ConfigurationError("objective is not finite at the starting point");

  auto eval = [&](const Eigen::VectorXd& p) {
    ++out.evaluations;
    const double v = objective(p);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };

  double step = options.initial_step;
  while (step >= options.tolerance) {
    if (out.evaluations >= options.max_evaluations) {
      out.warning = "evaluation cap reached before the step fell below tolerance; returning best point found";
      break;
    }
    bool improved = false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      for (double dir : {1.0, -1.0}) {
        Eigen::VectorXd trial = x;
        trial[i] += dir * step;
        trial = clamp(trial);
        double ft = eval(trial);
        if (!(ft > fx)) continue;
        // Keep going in this direction with doubling steps while it pays.
        double stride = step;
        while (out.evaluations < options.max_evaluations) {
          stride *= 2.0;
          Eigen::VectorXd further = x;
          further[i] += dir * stride;
          further = clamp(further);
          const double ff = eval(further);
          if (!(ff > ft)) break;
          trial = further;
          ft = ff;
        }
        x = trial;
        fx = ft;
        improved = true;
        break;
      }
    }
    if (!improved) step *= 0.5;
  }
  out.argmax = x;
  out.value = fx;
  out.converged = out.warning.empty();
  return out;
}

}  // namespace iterfilt::oracle
