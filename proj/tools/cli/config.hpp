#pragma once

#include "iterfilt/iterfilt.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iterfilt::cli {

struct TimeGridConfig {
  double t0 = 0.0;
  double dt = 1.0;
  std::size_t n = 100;
};

struct KernelConfig {
  std::vector<double> scale_diag;  ///< empty = identity
  double truncation = 6.0;
};

struct PracticalConfig {
  double tau0 = 0.5;
  double sigma_ratio = 0.1;
  double cooling = 0.95;
  double gain0 = 0.1;
  double gain_decay = 0.95;
};

struct TheoreticalConfig {
  double delta = 0.5;
  std::size_t particles_base = 100;
  double gain0 = 1.0;
  double tau0 = 1.0;
  double sigma0 = 1.0;
};

struct ScheduleConfig {
  ScheduleMode mode = ScheduleMode::practical;
  std::size_t iterations = 50;
  PracticalConfig practical;
  TheoreticalConfig theoretical;
  std::vector<std::size_t> restarts;
  double tempering_factor = 1.0;
  std::optional<double> divergence_bound;
};

struct ProfileConfig {
  std::string parameter;
  std::vector<double> grid;
};

/// Everything a command needs, after defaults and command-line overrides
/// have been applied. Serializes back to a config file that reproduces the
/// run.
struct RunConfig {
  std::string model;
  std::map<std::string, double> parameters;  ///< natural scale, every model coordinate
  std::vector<std::string> estimate;         ///< free coordinates, in order
  std::map<std::string, std::string> transforms;
  std::map<std::string, double> start;  ///< mif starting point (natural scale), estimate coordinates
  std::string data;
  TimeGridConfig time_grid;
  std::uint64_t seed = 1;
  std::size_t particles = 1000;
  std::size_t replicates = 1;
  Resampler resampler = Resampler::systematic;
  std::string output = "output";
  bool exact = false;
  KernelConfig kernel;
  PerturbationScales perturbation{0.01, 0.1};
  ScheduleConfig schedule;
  std::optional<ProfileConfig> profile;
};

/// Parses a config document. Unknown keys, wrong types and invalid values
/// raise ConfigurationError naming the offending key.
RunConfig parse_config(const nlohmann::json& doc);

/// Fills parameter defaults from the registry and checks cross-field
/// consistency. Call after command-line overrides.
void resolve(RunConfig& config, const models::ModelRegistry& registry);

nlohmann::json to_json(const RunConfig& config);

MifSchedule make_schedule(const RunConfig& config);

}  // namespace iterfilt::cli
