#pragma once

// Shared fixtures and independent numerical oracles for the test suites.

#include "iterfilt/iterfilt.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace iterfilt::testing {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

/// E[z_1^2 | |z| <= c] for z ~ N(0, I_d): the second-moment shrink factor of
/// a radially truncated standard normal, by 1-D radial quadrature.
inline double truncated_second_moment(int d, double c) {
  auto radial = [d](double r, int extra) { return std::pow(r, d - 1 + extra) * std::exp(-0.5 * r * r); };
  const double mass = simpson([&](double r) { return radial(r, 0); }, 0.0, c);
  const double second = simpson([&](double r) { return radial(r, 2); }, 0.0, c);
  return second / mass / d;
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Systematic resampling counts by exact integer arithmetic: integer weights
// w, offset u = p / q. Position k, (u + k) / J, lies in slice i iff
// C_{i-1} / W <= (p + k q) / (q J) < C_i / W.
inline std::vector<std::size_t> systematic_counts_exact(const std::vector<std::uint64_t>& w, std::size_t J, std::uint64_t p,
                                                 std::uint64_t q) {
  const std::uint64_t W = std::accumulate(w.begin(), w.end(), std::uint64_t{0});
  std::vector<std::size_t> counts(w.size(), 0);
  std::uint64_t lo = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::uint64_t hi = lo + w[i];
    for (std::size_t k = 0; k < J; ++k) {
      const std::uint64_t pos = (p + k * q) * W;
      if (lo * q * J <= pos && pos < hi * q * J) ++counts[i];
    }
    lo = hi;
  }
  return counts;
}

/// Registry LGSS restricted to the named free coordinates.
inline ModelSpec lgss_model(const std::vector<std::string>& free, const oracle::ScalarLgssParams& p = {}) {
  auto entry = models::scalar_lgss();
  Eigen::VectorXd values(5);
  values << p.a, p.q, p.r, p.m0, p.p0;
  std::vector<std::size_t> idx;
  for (const auto& name : free) idx.push_back(entry.spec.transform.index_of(name));
  return restrict_parameters(entry.spec, values, idx);
}

/// y_{1:N} simulated from the scalar LGSS.
inline ObservationSeries lgss_data(std::size_t n, std::uint64_t seed, const oracle::ScalarLgssParams& p = {}) {
  auto entry = models::scalar_lgss();
  Eigen::VectorXd values(5);
  values << p.a, p.q, p.r, p.m0, p.p0;
  const ParamVector theta(entry.spec.transform.to_unconstrained(values));
  return simulate(entry.spec, theta, TimeGrid::regular(0.0, 1.0, n), RngStream(seed)).observations;
}

/// Unconstrained coordinates of the given natural values under `model`.
inline ParamVector unconstrained(const ModelSpec& model, std::initializer_list<double> natural) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(natural.size()));
  std::size_t i = 0;
  for (double x : natural) v[static_cast<Eigen::Index>(i++)] = x;
  return ParamVector(model.transform.to_unconstrained(v));
}

}  // namespace iterfilt::testing
