#include "iterfilt/models.hpp"

#include "iterfilt/errors.hpp"

#include <cmath>
#include <numbers>

namespace iterfilt::models {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double normal_logpdf(double y, double mean, double var) {
  const double z = y - mean;
  return -0.5 * z * z / var - 0.5 * std::log(var) - kHalfLog2Pi;
}

}  // namespace

ModelEntry scalar_lgss() {
  ModelSpec m;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.param_dim = 5;
  m.transform = ParamTransform({{"a", TransformKind::identity},
                                {"q", TransformKind::log},
                                {"r", TransformKind::log},
                                {"m0", TransformKind::identity},
                                {"p0", TransformKind::log}});
  // theta = (a, q, r, m0, p0)
  m.init = [](std::span<const double> th, RngStream& rng, std::span<double> x0) {
    x0[0] = th[3] + std::sqrt(th[4]) * rng.normal();
  };
  m.transition = [](std::span<const double> xp, std::span<const double> th, double, double, RngStream& rng,
                    std::span<double> x) { x[0] = th[0] * xp[0] + std::sqrt(th[1]) * rng.normal(); };
  m.log_measurement_density = [](std::span<const double> y, std::span<const double> x, std::span<const double> th,
                                 double) { return normal_logpdf(y[0], x[0], th[2]); };
  m.measurement_density = [f = m.log_measurement_density](std::span<const double> y, std::span<const double> x,
                                                          std::span<const double> th,
                                                          double t) { return std::exp(f(y, x, th, t)); };
  m.obs_sampler = [](std::span<const double> x, std::span<const double> th, double, RngStream& rng,
                     std::span<double> y) { y[0] = x[0] + std::sqrt(th[2]) * rng.normal(); };

  Eigen::VectorXd defaults(5);
  defaults << 0.8, 1.0, 1.0, 0.0, 1.0;
  return {std::move(m), std::move(defaults)};
}

ModelEntry ou_discretized() {
  ModelSpec m;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.param_dim = 4;
  m.transform = ParamTransform({{"lambda", TransformKind::log},
                                {"mu", TransformKind::identity},
                                {"sigma", TransformKind::log},
                                {"r", TransformKind::log}});
  // theta = (lambda, mu, sigma, r)
  m.init = [](std::span<const double> th, RngStream& rng, std::span<double> x0) {
    const double sd = th[2] / std::sqrt(2.0 * th[0]);
    x0[0] = th[1] + sd * rng.normal();
  };
  m.transition = [](std::span<const double> xp, std::span<const double> th, double t0, double t1, RngStream& rng,
                    std::span<double> x) {
    const double lambda = th[0];
    const double decay = std::exp(-lambda * (t1 - t0));
    const double var = th[2] * th[2] * (-std::expm1(-2.0 * lambda * (t1 - t0))) / (2.0 * lambda);
    x[0] = th[1] + (xp[0] - th[1]) * decay + std::sqrt(var) * rng.normal();
  };
  m.log_measurement_density = [](std::span<const double> y, std::span<const double> x, std::span<const double> th,
                                 double) { return normal_logpdf(y[0], x[0], th[3]); };
  m.measurement_density = [f = m.log_measurement_density](std::span<const double> y, std::span<const double> x,
                                                          std::span<const double> th,
                                                          double t) { return std::exp(f(y, x, th, t)); };
  m.obs_sampler = [](std::span<const double> x, std::span<const double> th, double, RngStream& rng,
                     std::span<double> y) { y[0] = x[0] + std::sqrt(th[3]) * rng.normal(); };

  Eigen::VectorXd defaults(4);
  defaults << 0.5, 0.0, 1.0, 0.25;
  return {std::move(m), std::move(defaults)};
}

ModelRegistry::ModelRegistry() {
  factories_["lgss"] = scalar_lgss;
  factories_["ou-discretized"] = ou_discretized;
}

ModelRegistry& ModelRegistry::global() {
  static ModelRegistry registry;
  return registry;
}

void ModelRegistry::add(const std::string& name, ModelFactory factory) { factories_[name] = std::move(factory); }

bool ModelRegistry::contains(const std::string& name) const { return factories_.count(name) > 0; }

ModelEntry ModelRegistry::make(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw ConfigurationError("unknown model '" + name + "'");
  return it->second();
}

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : factories_) out.push_back(name);
  return out;
}

}  // namespace iterfilt::models
