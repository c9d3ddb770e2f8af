#pragma once

#include "iterfilt/rng.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace iterfilt {

enum class Resampler { multinomial, systematic };

std::string_view to_string(Resampler r);
Resampler parse_resampler(std::string_view name);

/// J i.i.d. categorical draws with probabilities proportional to `weights`.
/// Throws DegeneracyError if no weight is positive.
std::vector<std::size_t> multinomial_resample(std::span<const double> weights, RngStream& rng);

/// Systematic resampling with one uniform offset u in [0,1): particle i is
/// chosen by the positions (u + k) / J, k = 0..J-1, that fall in its slice of
/// the cumulative normalized weights. Counts are floor or ceil of J * w_i.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, RngStream& rng);
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double offset);

std::vector<std::size_t> resample(Resampler scheme, std::span<const double> weights, RngStream& rng);

/// Number of times each index appears, for a population of size n.
std::vector<std::size_t> ancestor_counts(std::span<const std::size_t> ancestors, std::size_t n);

}  // namespace iterfilt
