#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iterfilt {

enum class TransformKind { identity, log, logit };

std::string_view to_string(TransformKind kind);
/// Parses "identity", "log" or "logit"; throws ConfigurationError otherwise.
TransformKind parse_transform_kind(std::string_view name);

struct CoordinateTransform {
  std::string name;
  TransformKind kind = TransformKind::identity;
};

/// Per-coordinate monotone map between the natural parameter scale (what user
/// callbacks see) and the unconstrained scale on which all perturbation,
/// moment and update arithmetic is done.
class ParamTransform {
 public:
  ParamTransform() = default;
  explicit ParamTransform(std::vector<CoordinateTransform> coordinates);

  static ParamTransform identity(const std::vector<std::string>& names);

  std::size_t size() const noexcept { return coordinates_.size(); }
  const std::vector<CoordinateTransform>& coordinates() const noexcept { return coordinates_; }
  std::vector<std::string> names() const;
  /// Index of the named coordinate, or size() if absent.
  std::size_t index_of(std::string_view name) const;

  /// Throws DomainError naming the offending coordinate.
  Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& natural) const;
  Eigen::VectorXd from_unconstrained(const Eigen::VectorXd& unconstrained) const;

  /// Allocation-free inverse used on the per-particle path.
  void from_unconstrained(std::span<const double> unconstrained, std::span<double> natural) const;

  /// Subset of coordinates, in the given order.
  ParamTransform select(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<CoordinateTransform> coordinates_;
};

}  // namespace iterfilt
