#include "iterfilt/resample.hpp"

#include "iterfilt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace iterfilt {

namespace {

// Cumulative weights in extended precision; the last entry is the total.
std::vector<long double> cumulative(std::span<const double> weights) {
  if (weights.empty()) throw ConfigurationError("cannot resample an empty population");
  std::vector<long double> cum(weights.size());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) throw DegeneracyError(0, std::numeric_limits<double>::quiet_NaN());
    acc += w;
    cum[i] = acc;
  }
  if (!(acc > 0.0L)) throw DegeneracyError(0, -std::numeric_limits<double>::infinity());
  return cum;
}

}  // namespace

std::string_view to_string(Resampler r) { return r == Resampler::multinomial ? "multinomial" : "systematic"; }

Resampler parse_resampler(std::string_view name) {
  if (name == "multinomial") return Resampler::multinomial;
  if (name == "systematic") return Resampler::systematic;
  throw ConfigurationError("unknown resampler '" + std::string(name) + "'");
}

std::vector<std::size_t> multinomial_resample(std::span<const double> weights, RngStream& rng) {
  const auto cum = cumulative(weights);
  const long double total = cum.back();
  const std::size_t n = weights.size();
  std::vector<std::size_t> out(n);
  for (auto& k : out) {
    const long double target = static_cast<long double>(rng.uniform()) * total;
    // First index whose cumulative weight exceeds the target; zero-weight
    // slots have empty intervals and are never selected.
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    k = std::min(static_cast<std::size_t>(it - cum.begin()), n - 1);
    while (weights[k] == 0.0 && k > 0) --k;  // target landed exactly on a boundary of trailing zeros
  }
  return out;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double offset) {
  if (!(offset >= 0.0 && offset < 1.0)) throw ConfigurationError("systematic offset must lie in [0,1)");
  const auto cum = cumulative(weights);
  const std::size_t n = weights.size();
  const long double scale = static_cast<long double>(n) / cum.back();
  std::size_t last = n - 1;
  while (weights[last] == 0.0) --last;
  std::vector<std::size_t> out(n);
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const long double pos = static_cast<long double>(offset) + static_cast<long double>(k);
    while (i < last && !(pos < cum[i] * scale)) ++i;
    out[k] = i;
  }
  return out;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, RngStream& rng) {
  return systematic_resample(weights, rng.uniform());
}

std::vector<std::size_t> resample(Resampler scheme, std::span<const double> weights, RngStream& rng) {
  return scheme == Resampler::multinomial ? multinomial_resample(weights, rng) : systematic_resample(weights, rng);
}

std::vector<std::size_t> ancestor_counts(std::span<const std::size_t> ancestors, std::size_t n) {
  std::vector<std::size_t> counts(n, 0);
  for (auto a : ancestors) ++counts.at(a);
  return counts;
}

}  // namespace iterfilt
