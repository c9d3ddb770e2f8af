#include "commands.hpp"

#include "config.hpp"
#include "io.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

namespace iterfilt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
  std::optional<std::size_t> replicates;
  std::optional<std::string> output;
  std::optional<std::string> resampler;
  bool exact = false;
};

// The model restricted to the estimated coordinates, with the configured
// transforms, and the parameter point given by `parameters`.
struct Problem {
  ModelSpec model;
  ParamVector theta;
};

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json vecs(const std::vector<Eigen::VectorXd>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(vec(v));
  return out;
}

Problem build_problem(const RunConfig& c, const std::map<std::string, double>& parameters) {
  models::ModelEntry entry = models::ModelRegistry::global().make(c.model);
  const auto names = entry.spec.transform.names();
  std::vector<CoordinateTransform> coords;
  Eigen::VectorXd full(static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    coords.push_back({names[i], parse_transform_kind(c.transforms.at(names[i]))});
    full[static_cast<Eigen::Index>(i)] = parameters.at(names[i]);
  }
  entry.spec.transform = ParamTransform(coords);
  // Fixed coordinates must still lie in their domains.
  entry.spec.transform.to_unconstrained(full);

  std::vector<std::size_t> free;
  Eigen::VectorXd natural(static_cast<Eigen::Index>(c.estimate.size()));
  for (std::size_t k = 0; k < c.estimate.size(); ++k) {
    free.push_back(entry.spec.transform.index_of(c.estimate[k]));
    natural[static_cast<Eigen::Index>(k)] = parameters.at(c.estimate[k]);
  }
  ModelSpec model = restrict_parameters(entry.spec, full, free);
  ParamVector theta(model.transform.to_unconstrained(natural));
  return {std::move(model), std::move(theta)};
}

KernelSpec build_kernel(const RunConfig& c) {
  return KernelSpec::diagonal(Eigen::Map<const Eigen::VectorXd>(c.kernel.scale_diag.data(),
                                                                 static_cast<Eigen::Index>(c.kernel.scale_diag.size())),
                              c.kernel.truncation);
}

oracle::LgssModel exact_model(const RunConfig& c, const std::map<std::string, double>& parameters) {
  if (c.model != "lgss") throw ConfigurationError("exact likelihoods are only available for the 'lgss' model");
  const oracle::ScalarLgssParams p{parameters.at("a"), parameters.at("q"), parameters.at("r"), parameters.at("m0"),
                                   parameters.at("p0")};
  const oracle::LgssModel base = oracle::scalar_lgss(p, c.estimate);
  auto bindings = base.bindings();
  for (auto& b : bindings) b.transform = parse_transform_kind(c.transforms.at(b.name));
  return oracle::LgssModel(base.base(), bindings);
}

ObservationSeries load_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigurationError("no data file given (use --data or the 'data' config key)");
  return read_series_csv(c.data, c.time_grid.t0);
}

json envelope(const std::string& command, const RunConfig& c) {
  return json{{"command", command}, {"config", to_json(c)}, {"seed", c.seed}, {"version", "0.1.0"}};
}

void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

std::vector<std::string> prefixed(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Runs tasks 0..n-1 concurrently; rethrows the failure of the lowest index
// so error reports do not depend on scheduling.
void run_tasks(std::size_t n, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      },
      1);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::vector<double> filter_logliks(const ModelSpec& model, const ParamVector& theta, const ObservationSeries& data,
                                   const RunConfig& c, const RngStream& root, std::vector<FilterResult>* keep) {
  std::vector<FilterResult> results(c.replicates);
  run_tasks(c.replicates, [&](std::size_t r) {
    results[r] =
        particle_filter(model, theta, data, c.particles, root.derive("replicate", r), FilterOptions{c.resampler, {}});
  });
  std::vector<double> ll;
  for (const auto& res : results) ll.push_back(res.loglik);
  if (keep) *keep = std::move(results);
  return ll;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c, c.parameters);
  const TimeGrid grid = TimeGrid::regular(c.time_grid.t0, c.time_grid.dt, c.time_grid.n);
  const Simulation sim = simulate(p.model, p.theta, grid, RngStream(c.seed).derive("simulate"));

  CsvTable obs([&] {
    auto h = prefixed("y", p.model.obs_dim);
    h.insert(h.begin(), "time");
    return h;
  }());
  for (std::size_t n = 1; n <= grid.size(); ++n) {
    std::vector<double> row{grid.time(n)};
    for (double v : sim.observations.y(n)) row.push_back(v);
    obs.add_row(row);
  }
  CsvTable states([&] {
    auto h = prefixed("x", p.model.state_dim);
    h.insert(h.begin(), "time");
    return h;
  }());
  for (std::size_t n = 0; n <= grid.size(); ++n) {
    std::vector<double> row{grid.time(n)};
    const auto col = sim.states.col(static_cast<Eigen::Index>(n));
    row.insert(row.end(), col.data(), col.data() + col.size());
    states.add_row(row);
  }
  const fs::path dir(c.output);
  write_atomic(dir / "observations.csv", obs.str());
  write_atomic(dir / "states.csv", states.str());
  json j = envelope("simulate", c);
  j["observations"] = "observations.csv";
  j["states"] = "states.csv";
  j["observation_rows"] = grid.size();
  j["state_rows"] = grid.size() + 1;
  write_json(dir / "simulate.json", j);
  out << "simulated " << grid.size() << " observations into " << dir.string() << "\n";
  return kExitOk;
}

int cmd_pfilter(const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c, c.parameters);
  const ObservationSeries data = load_data(c);
  std::vector<FilterResult> results;
  const auto ll = filter_logliks(p.model, p.theta, data, c, RngStream(c.seed), &results);
  const FilterResult& first = results.front();

  json j = envelope("pfilter", c);
  j["loglik"] = log_mean_exp(ll);
  j["replicate_logliks"] = ll;
  j["replicate_sd"] = sample_sd(ll);
  j["cond_loglik"] = first.cond_loglik;
  j["ess"] = first.ess;
  j["state_filter_means"] = vecs(first.state_filter_means);
  if (c.exact) {
    const double exact = oracle::kalman_loglik(exact_model(c, c.parameters), data, p.theta.values());
    j["exact_loglik"] = exact;
    j["exact_difference"] = log_mean_exp(ll) - exact;
  }

  auto header = prefixed("x", first.state_filter_means.front().size());
  for (auto& h : header) h += "_mean";
  header.insert(header.begin(), {"time", "cond_loglik", "ess"});
  CsvTable trace(header);
  for (std::size_t n = 1; n <= data.size(); ++n) {
    std::vector<double> row{data.grid().time(n), first.cond_loglik[n - 1], first.ess[n - 1]};
    const auto& m = first.state_filter_means[n];
    row.insert(row.end(), m.data(), m.data() + m.size());
    trace.add_row(row);
  }
  const fs::path dir(c.output);
  write_atomic(dir / "pfilter_trace.csv", trace.str());
  write_json(dir / "pfilter.json", j);
  out << "loglik " << format_number(log_mean_exp(ll)) << "\n";
  return kExitOk;
}

int cmd_mif(const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c, c.parameters);
  const ObservationSeries data = load_data(c);
  Eigen::VectorXd start_nat(static_cast<Eigen::Index>(c.estimate.size()));
  for (std::size_t k = 0; k < c.estimate.size(); ++k) start_nat[static_cast<Eigen::Index>(k)] = c.start.at(c.estimate[k]);
  const ParamVector start(p.model.transform.to_unconstrained(start_nat));
  const MifSchedule schedule = make_schedule(c);
  MifOptions opt;
  opt.resampler = c.resampler;
  if (c.schedule.divergence_bound) opt.divergence_bound = *c.schedule.divergence_bound;
  const MifResult r = mif_run(p.model, data, start, build_kernel(c), schedule, RngStream(c.seed).derive("mif"), opt);

  json j = envelope("mif", c);
  j["parameter_names"] = c.estimate;
  j["trajectory"] = vecs(r.trajectory);
  j["natural_trajectory"] = vecs(r.natural_trajectory);
  j["logliks"] = r.logliks;
  j["scores"] = vecs(r.scores);
  json settings = json::array();
  for (const auto& s : r.settings)
    settings.push_back({{"gain", s.gain}, {"sigma", s.sigma}, {"tau", s.tau}, {"particles", s.particles}});
  j["settings"] = settings;
  json checks = json::array();
  for (const auto& ck : check_schedule(schedule).checks)
    checks.push_back({{"condition", ck.condition}, {"satisfied", ck.satisfied}, {"detail", ck.detail}});
  j["schedule_checks"] = checks;
  j["completed"] = r.completed();
  j["warnings"] = r.warnings;
  if (r.failure)
    j["failure"] = {{"iteration", r.failure->iteration},
                    {"step", r.failure->step},
                    {"kind", r.failure->kind},
                    {"message", r.failure->message}};
  json final_point;
  for (std::size_t k = 0; k < c.estimate.size(); ++k)
    final_point[c.estimate[k]] = r.natural_trajectory.back()[static_cast<Eigen::Index>(k)];
  j["final"] = final_point;
  if (c.exact) {
    const oracle::LgssModel em = exact_model(c, c.parameters);
    std::vector<double> exact;
    for (const auto& th : r.trajectory) exact.push_back(oracle::kalman_loglik(em, data, th));
    j["exact_logliks"] = exact;
  }

  std::vector<std::string> header{"iteration", "gain", "sigma", "tau", "particles", "loglik"};
  for (const auto& name : c.estimate) header.push_back(name);
  for (const auto& name : c.estimate) header.push_back(name + "_unconstrained");
  CsvTable trace(header);
  const double na = std::nan("");
  for (std::size_t m = 0; m < r.trajectory.size(); ++m) {
    std::vector<double> row{static_cast<double>(m)};
    if (m < r.settings.size()) {
      const auto& s = r.settings[m];
      row.insert(row.end(), {s.gain, s.sigma, s.tau, static_cast<double>(s.particles), r.logliks[m]});
    } else {
      row.insert(row.end(), {na, na, na, na, na});
    }
    const auto& nat = r.natural_trajectory[m];
    const auto& unc = r.trajectory[m];
    row.insert(row.end(), nat.data(), nat.data() + nat.size());
    row.insert(row.end(), unc.data(), unc.data() + unc.size());
    trace.add_row(row);
  }
  const fs::path dir(c.output);
  write_atomic(dir / "mif_trace.csv", trace.str());
  write_json(dir / "mif.json", j);
  if (!r.completed()) {
    out << "mif stopped at iteration " << r.failure->iteration << ": " << r.failure->message << "\n";
    return kExitNumerical;
  }
  out << "mif completed " << r.trajectory.size() - 1 << " iterations\n";
  return kExitOk;
}

int cmd_score(const RunConfig& c, std::ostream& out) {
  const Problem p = build_problem(c, c.parameters);
  const ObservationSeries data = load_data(c);
  const KernelSpec kernel = build_kernel(c);
  const RngStream root = RngStream(c.seed).derive("score");
  std::vector<ScoreEstimate> est(c.replicates);
  run_tasks(c.replicates, [&](std::size_t r) {
    est[r] = score_estimate(p.model, p.theta, data, kernel, c.perturbation, c.particles, root.derive("replicate", r),
                            ScoreOptions{c.resampler});
  });

  const auto d = static_cast<Eigen::Index>(c.estimate.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& e : est) mean += e.value;
  mean /= static_cast<double>(c.replicates);
  Eigen::VectorXd sd = Eigen::VectorXd::Zero(d);
  if (c.replicates > 1) {
    for (const auto& e : est) sd += (e.value - mean).cwiseAbs2();
    sd = (sd / static_cast<double>(c.replicates - 1)).cwiseSqrt();
  }

  json j = envelope("score", c);
  j["parameter_names"] = c.estimate;
  j["score"] = vec(mean);
  j["score_sd"] = vec(sd);
  std::vector<Eigen::VectorXd> reps;
  for (const auto& e : est) reps.push_back(e.value);
  j["replicate_scores"] = vecs(reps);
  j["terms"] = vecs(est.front().terms);
  j["term_count"] = est.front().terms.size();
  j["loglik"] = est.front().filter.loglik;
  j["warnings"] = est.front().warnings;
  if (c.exact) {
    const auto fd = oracle::kalman_score_checked(exact_model(c, c.parameters), data, p.theta.values());
    j["exact_score"] = vec(fd.score);
    j["exact_score_consistent"] = fd.consistent;
    j["cosine_similarity"] = mean.dot(fd.score) / (mean.norm() * fd.score.norm());
  }
  write_json(fs::path(c.output) / "score.json", j);
  out << "score";
  for (Eigen::Index i = 0; i < d; ++i) out << " " << format_number(mean[i]);
  out << "\n";
  return kExitOk;
}

int cmd_profile(const RunConfig& c, std::ostream& out) {
  if (!c.profile) throw ConfigurationError("profile needs a 'profile' block with 'parameter' and 'grid'");
  const ObservationSeries data = load_data(c);
  const auto& prof = *c.profile;
  const std::size_t G = prof.grid.size();
  const std::size_t R = c.replicates;

  std::vector<Problem> problems;
  for (double v : prof.grid) {
    auto params = c.parameters;
    params[prof.parameter] = v;
    problems.push_back(build_problem(c, params));
  }
  // One task per (grid point, replicate); replicate r uses the same stream at
  // every grid point.
  std::vector<double> ll(G * R);
  const RngStream root = RngStream(c.seed).derive("profile");
  run_tasks(G * R, [&](std::size_t task) {
    const std::size_t g = task / R, r = task % R;
    ll[task] = particle_filter(problems[g].model, problems[g].theta, data, c.particles, root.derive("replicate", r),
                               FilterOptions{c.resampler, {}})
                   .loglik;
  });

  CsvTable table({prof.parameter, "loglik", "sd"});
  json rows = json::array();
  for (std::size_t g = 0; g < G; ++g) {
    const std::vector<double> reps(ll.begin() + static_cast<std::ptrdiff_t>(g * R),
                                   ll.begin() + static_cast<std::ptrdiff_t>((g + 1) * R));
    const double est = log_mean_exp(reps);
    const double sd = sample_sd(reps);
    table.add_row({prof.grid[g], est, sd});
    json row{{"value", prof.grid[g]}, {"loglik", est}, {"sd", sd}, {"replicate_logliks", reps}};
    if (c.exact) {
      auto params = c.parameters;
      params[prof.parameter] = prof.grid[g];
      row["exact_loglik"] = oracle::kalman_loglik(exact_model(c, params), data, problems[g].theta.values());
    }
    rows.push_back(row);
  }
  json j = envelope("profile", c);
  j["kind"] = "slice";
  j["rows"] = rows;
  const fs::path dir(c.output);
  write_atomic(dir / "profile.csv", table.str());
  write_json(dir / "profile.json", j);
  out << "profiled " << G << " grid points\n";
  return kExitOk;
}

RunConfig load_config(const Overrides& o) {
  json doc;
  const std::string text = read_text(o.config_path);
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigurationError("config '" + o.config_path + "' is not valid JSON: " + e.what());
  }
  RunConfig c = parse_config(doc);
  if (o.data) c.data = *o.data;
  if (o.seed) c.seed = *o.seed;
  if (o.particles) c.particles = *o.particles;
  if (o.replicates) c.replicates = *o.replicates;
  if (o.output) c.output = *o.output;
  if (o.resampler) c.resampler = parse_resampler(*o.resampler);
  if (o.exact) c.exact = true;
  resolve(c, models::ModelRegistry::global());
  return c;
}

std::size_t thread_limit() {
  const char* env = std::getenv("ITERFILT_THREADS");
  if (!env || !*env) return 0;
  std::size_t value = 0;
  const std::string s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigurationError("ITERFILT_THREADS must be a non-negative integer, got '" + s + "'");
  return value;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Particle filtering and iterated filtering for partially observed Markov models", "iterfilt"};
  Overrides o;
  app.add_option("--config", o.config_path, "JSON run configuration")->required();
  app.add_option("--data", o.data, "CSV time series (time,y1,...)");
  app.add_option("--seed", o.seed, "master random seed");
  app.add_option("--particles", o.particles, "particle count J");
  app.add_option("--replicates", o.replicates, "independent replicate runs");
  app.add_option("--output", o.output, "output directory");
  app.add_flag("--exact", o.exact, "also report exact Kalman results (lgss only)");
  app.add_option("--resampler", o.resampler, "multinomial or systematic")
      ->check(CLI::IsMember({"multinomial", "systematic"}));

  std::string command;
  const std::pair<const char*, const char*> subcommands[] = {
      {"simulate", "draw states and observations from the model"},
      {"pfilter", "particle filter log-likelihood estimate"},
      {"mif", "iterated filtering maximum likelihood search"},
      {"score", "score estimate from one perturbed filtering pass"},
      {"profile", "likelihood slice over a grid of one parameter"},
  };
  for (const auto& [name, help] : subcommands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&command, name = name] { command = name; });
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig c = load_config(o);
    const std::size_t threads = thread_limit();
    int code = kExitOk;
    with_thread_limit(threads, [&] {
      if (command == "simulate") code = cmd_simulate(c, out);
      else if (command == "pfilter") code = cmd_pfilter(c, out);
      else if (command == "mif") code = cmd_mif(c, out);
      else if (command == "score") code = cmd_score(c, out);
      else code = cmd_profile(c, out);
    });
    return code;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "numerical failure at step " << e.step() << ": " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace iterfilt::cli
