#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace iterfilt::cli {

using nlohmann::json;

namespace {

// Object accessor that remembers its path and rejects unread keys.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigurationError(where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(at(key), key_path(key));
  }

  void finish() const {
    for (const auto& [key, _] : node_.items())
      if (!seen_.count(key)) throw ConfigurationError("unknown config key '" + key_path(key) + "'");
  }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigurationError("'" + path + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigurationError("'" + path + "' must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigurationError("'" + path + "' must be a number");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigurationError("'" + path + "' must be a non-negative integer");
      return v.get<T>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
std::vector<T> read_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigurationError("'" + path + "' must be an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(Reader::convert<T>(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <class T>
std::map<std::string, T> read_map(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigurationError("'" + path + "' must be an object");
  std::map<std::string, T> out;
  for (const auto& [key, value] : v.items()) out[key] = Reader::convert<T>(value, path + "." + key);
  return out;
}

ScheduleMode parse_mode(const std::string& s) {
  if (s == "practical") return ScheduleMode::practical;
  if (s == "theoretical") return ScheduleMode::theoretical;
  throw ConfigurationError("unknown schedule mode '" + s + "' (expected practical or theoretical)");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigurationError(message);
}

}  // namespace

RunConfig parse_config(const json& doc) {
  RunConfig c;
  Reader r(doc, "");
  if (!r.has("model")) throw ConfigurationError("config is missing the required key 'model'");
  r.get("model", c.model);
  if (r.has("parameters")) c.parameters = read_map<double>(r.at("parameters"), "parameters");
  if (r.has("estimate")) c.estimate = read_array<std::string>(r.at("estimate"), "estimate");
  if (r.has("transforms")) c.transforms = read_map<std::string>(r.at("transforms"), "transforms");
  if (r.has("start")) c.start = read_map<double>(r.at("start"), "start");
  r.get("data", c.data);
  if (r.has("time_grid")) {
    Reader g(r.at("time_grid"), "time_grid");
    g.get("t0", c.time_grid.t0);
    g.get("dt", c.time_grid.dt);
    g.get("n", c.time_grid.n);
    g.finish();
  }
  r.get("seed", c.seed);
  r.get("particles", c.particles);
  r.get("replicates", c.replicates);
  if (r.has("resampler")) c.resampler = parse_resampler(Reader::convert<std::string>(r.at("resampler"), "resampler"));
  r.get("output", c.output);
  r.get("exact", c.exact);
  if (r.has("kernel")) {
    Reader k(r.at("kernel"), "kernel");
    if (k.has("scale_diag")) c.kernel.scale_diag = read_array<double>(k.at("scale_diag"), "kernel.scale_diag");
    k.get("truncation", c.kernel.truncation);
    k.finish();
  }
  if (r.has("perturbation")) {
    Reader p(r.at("perturbation"), "perturbation");
    p.get("sigma", c.perturbation.sigma);
    p.get("tau", c.perturbation.tau);
    p.finish();
  }
  if (r.has("schedule")) {
    Reader s(r.at("schedule"), "schedule");
    if (s.has("mode")) c.schedule.mode = parse_mode(Reader::convert<std::string>(s.at("mode"), "schedule.mode"));
    s.get("iterations", c.schedule.iterations);
    if (s.has("practical")) {
      Reader p(s.at("practical"), "schedule.practical");
      auto& q = c.schedule.practical;
      p.get("tau0", q.tau0);
      p.get("sigma_ratio", q.sigma_ratio);
      p.get("cooling", q.cooling);
      p.get("gain0", q.gain0);
      p.get("gain_decay", q.gain_decay);
      p.finish();
    }
    if (s.has("theoretical")) {
      Reader t(s.at("theoretical"), "schedule.theoretical");
      auto& q = c.schedule.theoretical;
      t.get("delta", q.delta);
      t.get("particles_base", q.particles_base);
      t.get("gain0", q.gain0);
      t.get("tau0", q.tau0);
      t.get("sigma0", q.sigma0);
      t.finish();
    }
    if (s.has("tempering")) {
      Reader t(s.at("tempering"), "schedule.tempering");
      if (t.has("restarts")) c.schedule.restarts = read_array<std::size_t>(t.at("restarts"), "schedule.tempering.restarts");
      t.get("factor", c.schedule.tempering_factor);
      t.finish();
    }
    if (s.has("divergence_bound") && !s.at("divergence_bound").is_null())
      c.schedule.divergence_bound = Reader::convert<double>(s.at("divergence_bound"), "schedule.divergence_bound");
    s.finish();
  }
  if (r.has("profile")) {
    Reader p(r.at("profile"), "profile");
    ProfileConfig pc;
    p.get("parameter", pc.parameter);
    if (p.has("grid")) pc.grid = read_array<double>(p.at("grid"), "profile.grid");
    p.finish();
    c.profile = pc;
  }
  r.finish();
  return c;
}

void resolve(RunConfig& c, const models::ModelRegistry& registry) {
  const models::ModelEntry entry = registry.make(c.model);
  const auto names = entry.spec.transform.names();
  auto known = [&](const std::string& name) {
    return std::find(names.begin(), names.end(), name) != names.end();
  };

  for (const auto& [name, _] : c.parameters)
    require(known(name), "'parameters." + name + "' is not a parameter of model '" + c.model + "'");
  for (std::size_t i = 0; i < names.size(); ++i)
    if (!c.parameters.count(names[i])) c.parameters[names[i]] = entry.defaults[static_cast<Eigen::Index>(i)];

  for (const auto& [name, kind] : c.transforms) {
    require(known(name), "'transforms." + name + "' is not a parameter of model '" + c.model + "'");
    parse_transform_kind(kind);
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    if (!c.transforms.count(names[i]))
      c.transforms[names[i]] = std::string(to_string(entry.spec.transform.coordinates()[i].kind));

  if (c.estimate.empty()) c.estimate = names;
  std::set<std::string> unique;
  for (const auto& name : c.estimate) {
    require(known(name), "'estimate' names unknown parameter '" + name + "'");
    require(unique.insert(name).second, "'estimate' lists '" + name + "' twice");
  }

  for (const auto& [name, _] : c.start)
    require(unique.count(name) > 0, "'start." + name + "' is not an estimated parameter");
  for (const auto& name : c.estimate)
    if (!c.start.count(name)) c.start[name] = c.parameters.at(name);

  if (c.kernel.scale_diag.empty()) c.kernel.scale_diag.assign(c.estimate.size(), 1.0);
  require(c.kernel.scale_diag.size() == c.estimate.size(),
          "'kernel.scale_diag' has " + std::to_string(c.kernel.scale_diag.size()) + " entries for " +
              std::to_string(c.estimate.size()) + " estimated parameters");
  for (double v : c.kernel.scale_diag) require(v > 0.0 && std::isfinite(v), "'kernel.scale_diag' entries must be > 0");
  require(c.kernel.truncation > 0.0, "'kernel.truncation' must be > 0");

  require(c.particles >= 1, "'particles' must be >= 1");
  require(c.replicates >= 1, "'replicates' must be >= 1");
  require(c.time_grid.n >= 1, "'time_grid.n' must be >= 1");
  require(c.time_grid.dt > 0.0, "'time_grid.dt' must be > 0");
  c.perturbation.validate();
  make_schedule(c).validate();
  if (c.profile) {
    require(known(c.profile->parameter), "'profile.parameter' names unknown parameter '" + c.profile->parameter + "'");
    require(!c.profile->grid.empty(), "'profile.grid' must not be empty");
  }
}

MifSchedule make_schedule(const RunConfig& c) {
  MifSchedule s;
  s.mode = c.schedule.mode;
  s.iterations = c.schedule.iterations;
  const auto& p = c.schedule.practical;
  s.practical = PracticalSchedule{c.particles, p.tau0, p.sigma_ratio, p.cooling, p.gain0, p.gain_decay};
  const auto& t = c.schedule.theoretical;
  s.theoretical = PowerLawSchedule::from_delta(t.delta, t.particles_base);
  s.theoretical.gain0 = t.gain0;
  s.theoretical.tau0 = t.tau0;
  s.theoretical.sigma0 = t.sigma0;
  s.tempering = Tempering{c.schedule.restarts, c.schedule.tempering_factor};
  return s;
}

json to_json(const RunConfig& c) {
  json j;
  j["model"] = c.model;
  j["parameters"] = c.parameters;
  j["estimate"] = c.estimate;
  j["transforms"] = c.transforms;
  j["start"] = c.start;
  j["data"] = c.data;
  j["time_grid"] = {{"t0", c.time_grid.t0}, {"dt", c.time_grid.dt}, {"n", c.time_grid.n}};
  j["seed"] = c.seed;
  j["particles"] = c.particles;
  j["replicates"] = c.replicates;
  j["resampler"] = std::string(to_string(c.resampler));
  j["output"] = c.output;
  j["exact"] = c.exact;
  j["kernel"] = {{"scale_diag", c.kernel.scale_diag}, {"truncation", c.kernel.truncation}};
  j["perturbation"] = {{"sigma", c.perturbation.sigma}, {"tau", c.perturbation.tau}};
  const auto& p = c.schedule.practical;
  const auto& t = c.schedule.theoretical;
  j["schedule"] = {
      {"mode", std::string(to_string(c.schedule.mode))},
      {"iterations", c.schedule.iterations},
      {"practical",
       {{"tau0", p.tau0}, {"sigma_ratio", p.sigma_ratio}, {"cooling", p.cooling}, {"gain0", p.gain0},
        {"gain_decay", p.gain_decay}}},
      {"theoretical",
       {{"delta", t.delta}, {"particles_base", t.particles_base}, {"gain0", t.gain0}, {"tau0", t.tau0},
        {"sigma0", t.sigma0}}},
      {"tempering", {{"restarts", c.schedule.restarts}, {"factor", c.schedule.tempering_factor}}},
      {"divergence_bound", c.schedule.divergence_bound ? json(*c.schedule.divergence_bound) : json(nullptr)},
  };
  if (c.profile) j["profile"] = {{"parameter", c.profile->parameter}, {"grid", c.profile->grid}};
  return j;
}

}  // namespace iterfilt::cli
