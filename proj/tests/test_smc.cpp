#include "doctest.h"
#include "support.hpp"

#include <algorithm>
#include <map>
#include <numeric>

using namespace iterfilt;
namespace it = iterfilt::testing;

namespace {

constexpr double kChi2Crit3 = 16.266;  // chi-square upper 0.001 quantile, 3 df
constexpr double kChi2Crit9 = 27.877;  // 9 df

// Measurement density constant in the state.
ModelSpec constant_density_model(double c) {
  ModelSpec m = it::lgss_model({"a"});
  m.log_measurement_density = nullptr;
  m.measurement_density = [c](std::span<const double>, std::span<const double>, std::span<const double>, double) {
    return c;
  };
  return m;
}

}  // namespace

TEST_CASE("resampler parsing") {
  CHECK(parse_resampler("systematic") == Resampler::systematic);
  CHECK(parse_resampler("multinomial") == Resampler::multinomial);
  CHECK(to_string(Resampler::systematic) == "systematic");
  CHECK_THROWS_AS(parse_resampler("stratified"), ConfigurationError);
}

TEST_CASE("multinomial resampling") {
  SUBCASE("equal weights give uniform ancestors") {
    const std::vector<double> w(4, 0.25);
    std::vector<double> counts(4, 0.0);
    const RngStream root(101);
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
      RngStream s = root.derive("rep", static_cast<std::uint64_t>(r));
      counts[multinomial_resample(w, s)[0]] += 1.0;
    }
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - reps / 4.0) * (c - reps / 4.0) / (reps / 4.0);
    CHECK(chi2 < kChi2Crit3);
  }

  SUBCASE("point mass") {
    RngStream s(1);
    const std::vector<double> w{1.0, 0.0, 0.0};
    const auto a = multinomial_resample(w, s);
    CHECK(a == std::vector<std::size_t>{0, 0, 0});
  }

  SUBCASE("count vectors follow the exact multinomial pmf") {
    const std::vector<double> p{0.5, 0.3, 0.2};
    std::map<std::vector<std::size_t>, double> observed;
    const RngStream root(202);
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
      RngStream s = root.derive("rep", static_cast<std::uint64_t>(r));
      observed[ancestor_counts(multinomial_resample(p, s), 3)] += 1.0;
    }
    // Enumerate all count vectors (c0, c1, c2) with c0 + c1 + c2 = 3.
    const double fact[] = {1, 1, 2, 6};
    double chi2 = 0.0;
    int cells = 0;
    for (std::size_t c0 = 0; c0 <= 3; ++c0)
      for (std::size_t c1 = 0; c0 + c1 <= 3; ++c1) {
        const std::size_t c2 = 3 - c0 - c1;
        const double pmf = fact[3] / (fact[c0] * fact[c1] * fact[c2]) * std::pow(p[0], c0) * std::pow(p[1], c1) *
                           std::pow(p[2], c2);
        const double e = pmf * reps;
        const double o = observed[{c0, c1, c2}];
        chi2 += (o - e) * (o - e) / e;
        ++cells;
      }
    CHECK(cells == 10);
    CHECK(chi2 < kChi2Crit9);
  }

  SUBCASE("degenerate weights are rejected") {
    RngStream s(1);
    CHECK_THROWS_AS(multinomial_resample(std::vector<double>{0.0, 0.0}, s), DegeneracyError);
    CHECK_THROWS_AS(multinomial_resample(std::vector<double>{1.0, -0.5}, s), DegeneracyError);
    CHECK_THROWS_AS(multinomial_resample(std::vector<double>{1.0, std::nan("")}, s), DegeneracyError);
  }
}

TEST_CASE("systematic resampling") {
  SUBCASE("equal weights copy every particle once") {
    RngStream s(4);
    for (int r = 0; r < 100; ++r) {
      const auto c = ancestor_counts(systematic_resample(std::vector<double>(7, 1.0), s), 7);
      REQUIRE(c == std::vector<std::size_t>(7, 1));
    }
  }

  SUBCASE("integral expectations give fixed counts on a u-grid") {
    for (int k = 0; k < 1000; ++k) {
      const double u = k / 1000.0;
      CHECK(ancestor_counts(systematic_resample(std::vector<double>{0.5, 0.5, 0.0, 0.0}, u), 4) ==
            std::vector<std::size_t>{2, 2, 0, 0});
      CHECK(ancestor_counts(systematic_resample(std::vector<double>{0.7, 0.2, 0.1, 0, 0, 0, 0, 0, 0, 0}, u), 10) ==
            std::vector<std::size_t>{7, 2, 1, 0, 0, 0, 0, 0, 0, 0});
    }
  }

  SUBCASE("counts match exact enumeration and the floor/ceil bounds") {
    RngStream rng(33);
    const std::uint64_t q = 1024;
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t J = 2 + static_cast<std::size_t>(rng.uniform() * 40);
      std::vector<std::uint64_t> wi(J);
      for (auto& w : wi) w = rng.uniform() < 0.2 ? 0 : 1 + static_cast<std::uint64_t>(rng.uniform() * 100);
      wi[static_cast<std::size_t>(rng.uniform() * J)] += 1;
      const std::vector<double> w(wi.begin(), wi.end());
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      const std::uint64_t p = static_cast<std::uint64_t>(rng.uniform() * q);
      const auto counts = ancestor_counts(systematic_resample(w, static_cast<double>(p) / q), J);
      REQUIRE(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == J);
      for (std::size_t i = 0; i < J; ++i) {
        const double e = static_cast<double>(J) * w[i] / total;
        const double got = static_cast<double>(counts[i]);
        REQUIRE(got >= std::floor(e - 1e-9));
        REQUIRE(got <= std::ceil(e + 1e-9));
      }
      REQUIRE(counts == it::systematic_counts_exact(wi, J, p, q));

      const auto drawn = ancestor_counts(systematic_resample(w, rng), J);
      REQUIRE(std::accumulate(drawn.begin(), drawn.end(), std::size_t{0}) == J);
    }
  }

  SUBCASE("zero-weight particles are never selected") {
    RngStream s(8);
    const std::vector<double> w{0.0, 1e-300, 0.0, 3.0, 0.0};
    for (int r = 0; r < 1000; ++r)
      for (auto a : systematic_resample(w, s)) REQUIRE((a == 1 || a == 3));
  }

  SUBCASE("degenerate weights are rejected") {
    RngStream s(1);
    CHECK_THROWS_AS(systematic_resample(std::vector<double>{0.0, 0.0}, s), DegeneracyError);
  }
}

TEST_CASE("log_mean_exp") {
  CHECK(log_mean_exp({std::log(2.0), std::log(4.0)}) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(log_mean_exp({-1000.0, -1000.0}) == doctest::Approx(-1000.0).epsilon(1e-15));
  CHECK(log_mean_exp({-5.0}) == -5.0);

  // Label permutation of the weights leaves the average unchanged.
  RngStream rng(12);
  std::vector<double> v(257);
  for (auto& x : v) x = 30.0 * (rng.uniform() - 0.5);
  const double base = log_mean_exp(v);
  std::shuffle(v.begin(), v.end(), rng);
  CHECK(log_mean_exp(v) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("filter with a state-independent measurement density") {
  const double c = 0.37;
  const auto data = it::lgss_data(20, 5);
  const ModelSpec m = constant_density_model(c);
  for (Resampler scheme : {Resampler::systematic, Resampler::multinomial}) {
    const auto res = particle_filter(m, ParamVector{0.8}, data, 64, RngStream(1), {scheme, {}});
    CHECK(res.loglik == doctest::Approx(20 * std::log(c)).epsilon(1e-13));
    for (double e : res.ess) CHECK(e == doctest::Approx(64.0).epsilon(1e-12));
  }
}

TEST_CASE("single-particle filter follows one simulated path") {
  const ModelSpec m = it::lgss_model({"a", "q", "r", "m0", "p0"});
  const ParamVector theta = it::unconstrained(m, {0.8, 1.0, 0.5, 0.2, 1.0});
  const auto data = it::lgss_data(15, 3);
  const RngStream rng(77);
  const auto res = particle_filter(m, theta, data, 1, rng);

  const Eigen::VectorXd natv = m.transform.from_unconstrained(theta.values());
  const std::span<const double> nat(natv.data(), 5);
  double x;
  RngStream s0 = rng.derive("init", 0);
  m.init(nat, s0, std::span<double>(&x, 1));
  double expected = 0.0;
  for (std::size_t n = 1; n <= data.size(); ++n) {
    RngStream s = rng.derive("step", n).derive("particle", 0);
    double next;
    m.transition(std::span<const double>(&x, 1), nat, data.grid().time(n - 1), data.grid().time(n), s,
                 std::span<double>(&next, 1));
    x = next;
    const double l = m.log_measurement(data.y(n), std::span<const double>(&x, 1), nat, data.grid().time(n));
    CHECK(res.cond_loglik[n - 1] == l);
    expected += l;
  }
  CHECK(res.loglik == doctest::Approx(expected).epsilon(1e-14));
  CHECK_FALSE(res.has_parameter_moments());
}

TEST_CASE("LGSS filter against the Kalman filter") {
  const auto data = it::lgss_data(50, 2024);
  const ModelSpec m = it::lgss_model({"a"});
  const double exact = oracle::kalman_loglik(oracle::scalar_lgss({}, {"a"}), data, Eigen::VectorXd::Constant(1, 0.8));

  SUBCASE("single run within one log unit") {
    const auto res = particle_filter(m, ParamVector{0.8}, data, 5000, RngStream(1));
    CHECK(std::abs(res.loglik - exact) < 1.0);
  }

  SUBCASE("likelihood ratio averages to one") {
    const int reps = 200;
    std::vector<double> ratio;
    for (int r = 0; r < reps; ++r) {
      const auto res = particle_filter(m, ParamVector{0.8}, data, 5000, RngStream(1000 + static_cast<std::uint64_t>(r)));
      ratio.push_back(std::exp(res.loglik - exact));
    }
    const double se = std::sqrt(it::variance(ratio) / reps);
    CHECK(std::abs(it::mean(ratio) - 1.0) <= 3.0 * se);
  }

  SUBCASE("filter means track the Kalman means") {
    const auto kal = oracle::kalman_filter(oracle::scalar_lgss({}, {"a"}).at(Eigen::VectorXd::Constant(1, 0.8)), data);
    const auto res = particle_filter(m, ParamVector{0.8}, data, 5000, RngStream(3));
    for (std::size_t n = 1; n <= 50; ++n) {
      const double sd = std::sqrt(kal.filtered_covs[n - 1](0, 0));
      CHECK(std::abs(res.state_filter_means[n][0] - kal.filtered_means[n - 1][0]) < 5.0 * sd / std::sqrt(5000.0) * 3.0);
    }
  }
}

TEST_CASE("missing observations contribute nothing") {
  auto full = it::lgss_data(12, 4);
  std::vector<bool> present(12, true);
  present[3] = present[7] = false;
  Eigen::MatrixXd values = full.values();
  values(0, 3) = values(0, 7) = std::nan("");
  const ObservationSeries data(full.grid(), values, present);
  const ModelSpec m = it::lgss_model({"a"});
  const auto res = particle_filter(m, ParamVector{0.8}, data, 2000, RngStream(6));
  CHECK(res.cond_loglik[3] == 0.0);
  CHECK(res.cond_loglik[7] == 0.0);
  CHECK(res.ess[3] == doctest::Approx(2000.0));
  const double exact = oracle::kalman_loglik(oracle::scalar_lgss({}, {"a"}), data, Eigen::VectorXd::Constant(1, 0.8));
  CHECK(std::abs(res.loglik - exact) < 1.0);
}

TEST_CASE("filter failure modes") {
  const auto data = it::lgss_data(6, 1);

  SUBCASE("all weights zero at one step") {
    ModelSpec m = it::lgss_model({"a"});
    m.log_measurement_density = [](std::span<const double>, std::span<const double>, std::span<const double>,
                                   double t) { return t == 4.0 ? -std::numeric_limits<double>::infinity() : 0.0; };
    try {
      particle_filter(m, ParamVector{0.8}, data, 50, RngStream(1));
      FAIL("expected DegeneracyError");
    } catch (const DegeneracyError& e) {
      CHECK(e.step() == 4);
      CHECK(e.max_log_weight() == -std::numeric_limits<double>::infinity());
    }
  }

  SUBCASE("NaN density") {
    ModelSpec m = it::lgss_model({"a"});
    m.log_measurement_density = [](std::span<const double>, std::span<const double>, std::span<const double>,
                                   double t) { return t == 2.0 ? std::nan("") : 0.0; };
    try {
      particle_filter(m, ParamVector{0.8}, data, 50, RngStream(1));
      FAIL("expected ModelEvaluationError");
    } catch (const ModelEvaluationError& e) {
      CHECK(e.step() == 2);
      CHECK(e.callback() == "measurement_density");
    }
  }

  SUBCASE("dimension and size checks") {
    const ModelSpec m = it::lgss_model({"a"});
    CHECK_THROWS_AS(particle_filter(m, ParamVector{0.8, 1.0}, data, 10, RngStream(1)), DimensionError);
    CHECK_THROWS_AS(particle_filter(m, ParamVector{0.8}, data, 0, RngStream(1)), ConfigurationError);
  }
}

TEST_CASE("extended-model moments") {
  const auto data = it::lgss_data(25, 8);
  const ModelSpec f = it::lgss_model({"a", "q"});
  const ParamVector center = it::unconstrained(f, {0.7, 1.2});
  const ModelSpec g = extend_model(f, KernelSpec::identity(2), {0.02, 0.2}, center);

  const auto res = particle_filter(g, center, data, 400, RngStream(10));
  REQUIRE(res.has_parameter_moments());
  CHECK(res.filter_means.size() == 26);
  CHECK(res.prediction_variances.size() == 26);
  CHECK(res.filter_means[0] == center.values());
  for (std::size_t n = 1; n <= 25; ++n) {
    const Eigen::MatrixXd& V = res.prediction_variances[n];
    CHECK((V - V.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * V.trace());
  }

  SUBCASE("filter means are the averages of the resampled parameter particles") {
    std::vector<Eigen::VectorXd> seen;
    FilterOptions o;
    o.observer = [&](std::size_t, const ParticleEnsemble& e) {
      CHECK(e.stage == EnsembleStage::filtering);
      seen.push_back(e.states.bottomRows(2).rowwise().mean());
    };
    const auto r2 = particle_filter(g, center, data, 400, RngStream(10), o);
    REQUIRE(seen.size() == 26);
    for (std::size_t n = 1; n <= 25; ++n) CHECK(seen[n] == r2.filter_means[n]);
    CHECK(r2.loglik == res.loglik);
  }

  SUBCASE("prediction variance at step 1 is the initial spread around the center") {
    // With sigma = 0 the step-1 predicted parameters are the initial draws.
    const ModelSpec g0 = extend_model(f, KernelSpec::identity(2), {0.0, 0.2}, center);
    const auto r = particle_filter(g0, center, data, 20000, RngStream(4));
    const double expected = 0.04 * KernelSpec::identity(2).covariance_factor();
    CHECK(r.prediction_variances[1](0, 0) == doctest::Approx(expected).epsilon(0.05));
    CHECK(r.prediction_variances[1](1, 1) == doctest::Approx(expected).epsilon(0.05));
    CHECK(std::abs(r.prediction_variances[1](0, 1)) < 0.05 * expected);
  }

  SUBCASE("no variances with one particle") {
    const auto r = particle_filter(g, center, data, 1, RngStream(4));
    CHECK(r.prediction_variances.empty());
    CHECK(r.filter_means.size() == 26);
  }
}

TEST_CASE("results do not depend on the thread count") {
  const auto data = it::lgss_data(30, 9);
  const ModelSpec f = it::lgss_model({"a", "q"});
  const ParamVector center = it::unconstrained(f, {0.7, 1.2});
  const ModelSpec g = extend_model(f, KernelSpec::identity(2), {0.02, 0.2}, center);
  auto run = [&](std::size_t threads) {
    FilterResult out;
    with_thread_limit(threads, [&] { out = particle_filter(g, center, data, 3000, RngStream(55)); });
    return out;
  };
  const auto a = run(1);
  const auto b = run(4);
  CHECK(a.loglik == b.loglik);
  CHECK(a.cond_loglik == b.cond_loglik);
  CHECK(a.filter_means == b.filter_means);
  CHECK(a.prediction_variances == b.prediction_variances);
}
