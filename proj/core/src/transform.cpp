#include "iterfilt/transform.hpp"

#include "iterfilt/errors.hpp"

#include <cmath>

namespace iterfilt {

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity:
      return "identity";
    case TransformKind::log:
      return "log";
    case TransformKind::logit:
      return "logit";
  }
  return "identity";
}

TransformKind parse_transform_kind(std::string_view name) {
  if (name == "identity") return TransformKind::identity;
  if (name == "log") return TransformKind::log;
  if (name == "logit") return TransformKind::logit;
  throw ConfigurationError("unknown parameter transform '" + std::string(name) + "'");
}

ParamTransform::ParamTransform(std::vector<CoordinateTransform> coordinates)
    : coordinates_(std::move(coordinates)) {}

ParamTransform ParamTransform::identity(const std::vector<std::string>& names) {
  std::vector<CoordinateTransform> coords;
  coords.reserve(names.size());
  for (const auto& n : names) coords.push_back({n, TransformKind::identity});
  return ParamTransform(std::move(coords));
}

std::vector<std::string> ParamTransform::names() const {
  std::vector<std::string> out;
  out.reserve(coordinates_.size());
  for (const auto& c : coordinates_) out.push_back(c.name);
  return out;
}

std::size_t ParamTransform::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < coordinates_.size(); ++i)
    if (coordinates_[i].name == name) return i;
  return coordinates_.size();
}

Eigen::VectorXd ParamTransform::to_unconstrained(const Eigen::VectorXd& natural) const {
  if (static_cast<std::size_t>(natural.size()) != size())
    throw DimensionError("parameter vector has " + std::to_string(natural.size()) +
                         " entries, transform expects " + std::to_string(size()));
  Eigen::VectorXd out(natural.size());
  for (std::size_t i = 0; i < size(); ++i) {
    const double v = natural[static_cast<Eigen::Index>(i)];
    const auto& c = coordinates_[i];
    if (!std::isfinite(v)) throw DomainError(c.name, "parameter '" + c.name + "' is not finite");
    switch (c.kind) {
      case TransformKind::identity:
        out[i] = v;
        break;
      case TransformKind::log:
        if (!(v > 0.0))
          throw DomainError(c.name, "parameter '" + c.name + "' must be positive for a log transform");
        out[i] = std::log(v);
        break;
      case TransformKind::logit:
        if (!(v > 0.0 && v < 1.0))
          throw DomainError(c.name, "parameter '" + c.name + "' must lie in (0,1) for a logit transform");
        out[i] = std::log(v) - std::log1p(-v);
        break;
    }
  }
  return out;
}

Eigen::VectorXd ParamTransform::from_unconstrained(const Eigen::VectorXd& unconstrained) const {
  if (static_cast<std::size_t>(unconstrained.size()) != size())
    throw DimensionError("parameter vector has " + std::to_string(unconstrained.size()) +
                         " entries, transform expects " + std::to_string(size()));
  Eigen::VectorXd out(unconstrained.size());
  from_unconstrained(std::span<const double>(unconstrained.data(), size()),
                     std::span<double>(out.data(), size()));
  return out;
}

void ParamTransform::from_unconstrained(std::span<const double> unconstrained,
                                        std::span<double> natural) const {
  for (std::size_t i = 0; i < coordinates_.size(); ++i) {
    const double u = unconstrained[i];
    switch (coordinates_[i].kind) {
      case TransformKind::identity:
        natural[i] = u;
        break;
      case TransformKind::log:
        natural[i] = std::exp(u);
        break;
      case TransformKind::logit:
        natural[i] = u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
        break;
    }
  }
}

ParamTransform ParamTransform::select(const std::vector<std::size_t>& indices) const {
  std::vector<CoordinateTransform> coords;
  coords.reserve(indices.size());
  for (auto i : indices) coords.push_back(coordinates_.at(i));
  return ParamTransform(std::move(coords));
}

}  // namespace iterfilt
