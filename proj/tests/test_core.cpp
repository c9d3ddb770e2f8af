#include "doctest.h"
#include "support.hpp"

#include <set>

using namespace iterfilt;
using iterfilt::testing::lgss_data;

namespace {

// x_n = x_{n-1}, y_n = x_n, x_0 = 3.
ModelSpec frozen_model() {
  ModelSpec m;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.param_dim = 1;
  m.transform = ParamTransform::identity({"unused"});
  m.init = [](std::span<const double>, RngStream&, std::span<double> x0) { x0[0] = 3.0; };
  m.transition = [](std::span<const double> xp, std::span<const double>, double, double, RngStream&,
                    std::span<double> x) { x[0] = xp[0]; };
  m.measurement_density = [](std::span<const double>, std::span<const double>, std::span<const double>, double) {
    return 1.0;
  };
  m.obs_sampler = [](std::span<const double> x, std::span<const double>, double, RngStream&, std::span<double> y) {
    y[0] = x[0];
  };
  return m;
}

}  // namespace

TEST_CASE("rng streams are addressed by path") {
  const RngStream root(42);
  auto a = root.derive("particle", 3);
  auto b = root.derive("particle", 3);
  auto c = root.derive("particle", 4);
  auto d = root.derive("particles", 3);
  std::vector<std::uint64_t> xa, xb, xc, xd;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a());
    xb.push_back(b());
    xc.push_back(c());
    xd.push_back(d());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  CHECK(xa != xd);
  CHECK(RngStream(42).key() == root.key());
  CHECK(RngStream(43).key() != root.key());

  SUBCASE("derivation does not advance the parent") {
    RngStream p(7);
    auto before = p.derive("x").key();
    (void)p();
    CHECK(p.derive("x").key() == before);
  }

  SUBCASE("uniform draws lie in [0,1) and sibling streams are uncorrelated") {
    const int n = 20000;
    RngStream s1 = root.derive("s", 1), s2 = root.derive("s", 2);
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
      const double u = s1.uniform(), v = s2.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sx += u;
      sy += v;
      sxy += u * v;
      sxx += u * u;
      syy += v * v;
    }
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double r = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
    CHECK(std::abs(r) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(sx / n == doctest::Approx(0.5).epsilon(0.01));
  }

  SUBCASE("distinct keys across many sibling paths") {
    std::set<std::uint64_t> keys;
    for (std::uint64_t j = 0; j < 5000; ++j) keys.insert(root.derive("step", 1).derive("particle", j).key());
    CHECK(keys.size() == 5000);
  }
}

TEST_CASE("parameter transforms") {
  ParamTransform t({{"a", TransformKind::identity}, {"q", TransformKind::log}, {"p", TransformKind::logit}});

  CHECK(ParamTransform::identity({"x", "y"}).to_unconstrained(Eigen::Vector2d(1.5, -2.0)) == Eigen::Vector2d(1.5, -2.0));
  const Eigen::VectorXd u = t.to_unconstrained(Eigen::Vector3d(0.3, 1.0, 0.5));
  CHECK(u[0] == 0.3);
  CHECK(u[1] == 0.0);
  CHECK(u[2] == 0.0);

  SUBCASE("domain violations name the coordinate") {
    try {
      t.to_unconstrained(Eigen::Vector3d(0.3, -1.0, 0.5));
      FAIL("expected DomainError");
    } catch (const DomainError& e) {
      CHECK(e.coordinate() == "q");
    }
    CHECK_THROWS_AS(t.to_unconstrained(Eigen::Vector3d(0.3, 1.0, 1.0)), DomainError);
    CHECK_THROWS_AS(t.to_unconstrained(Eigen::Vector2d(0.3, 1.0)), DimensionError);
  }

  SUBCASE("round trip over random in-domain points") {
    RngStream rng(11);
    for (int i = 0; i < 1000; ++i) {
      Eigen::Vector3d x(20.0 * (rng.uniform() - 0.5), std::exp(10.0 * (rng.uniform() - 0.5)),
                        0.001 + 0.998 * rng.uniform());
      const Eigen::VectorXd back = t.from_unconstrained(t.to_unconstrained(x));
      for (int k = 0; k < 3; ++k) REQUIRE(std::abs(back[k] - x[k]) <= 1e-12 * (1.0 + std::abs(x[k])));
    }
  }

  CHECK(parse_transform_kind("logit") == TransformKind::logit);
  CHECK_THROWS_AS(parse_transform_kind("sqrt"), ConfigurationError);
}

TEST_CASE("time grids and observation series validate their invariants") {
  CHECK_THROWS_AS(TimeGrid(0.0, {}), ConfigurationError);
  CHECK_THROWS_AS(TimeGrid(1.0, {1.0, 2.0}), ConfigurationError);
  CHECK_THROWS_AS(TimeGrid(0.0, {1.0, 3.0, 2.0}), ConfigurationError);
  const TimeGrid g = TimeGrid::regular(0.5, 0.25, 4);
  CHECK(g.size() == 4);
  CHECK(g.time(0) == 0.5);
  CHECK(g.time(4) == 1.5);

  Eigen::MatrixXd y(1, 4);
  y << 1, std::nan(""), 3, 4;
  CHECK_THROWS_AS(ObservationSeries(g, y), ConfigurationError);
  ObservationSeries ok(g, y, {true, false, true, true});
  CHECK_FALSE(ok.present(2));
  CHECK(ok.y(3)[0] == 3.0);
  CHECK(ok.head(2).size() == 2);
  CHECK_THROWS_AS(ObservationSeries(TimeGrid::regular(0, 1, 3), y), DimensionError);
  CHECK_THROWS_AS(ParamVector({1.0, std::numeric_limits<double>::infinity()}), DomainError);
}

TEST_CASE("simulate") {
  SUBCASE("degenerate dynamics") {
    const auto sim = simulate(frozen_model(), ParamVector{0.0}, TimeGrid::regular(0, 1, 5), RngStream(1));
    CHECK(sim.states.cols() == 6);
    CHECK((sim.states.array() == 3.0).all());
    CHECK((sim.observations.values().array() == 3.0).all());
  }

  SUBCASE("bit-identical reruns") {
    auto entry = models::scalar_lgss();
    const ParamVector theta(entry.spec.transform.to_unconstrained(entry.defaults));
    const auto grid = TimeGrid::regular(0, 1, 30);
    const auto s1 = simulate(entry.spec, theta, grid, RngStream(5));
    const auto s2 = simulate(entry.spec, theta, grid, RngStream(5));
    const auto s3 = simulate(entry.spec, theta, grid, RngStream(6));
    CHECK(s1.states == s2.states);
    CHECK(s1.observations.values() == s2.observations.values());
    CHECK(s1.states != s3.states);
  }

  SUBCASE("LGSS observations match stationary AR(1) moments") {
    // Oracle: y = x + v with x stationary AR(1). gamma_y(0) = sx2 + r,
    // gamma_y(k) = sx2 a^|k|; standard errors from the long-run variances.
    const double a = 0.8, q = 1.0, r = 1.0;
    const double sx2 = q / (1.0 - a * a);
    const std::size_t n = 50;
    oracle::ScalarLgssParams p{a, q, r, 0.0, sx2};  // start in stationarity
    const auto data = lgss_data(n, 42, p);
    std::vector<double> ys(data.values().data(), data.values().data() + n);
    const double nd = static_cast<double>(n);
    const double se_mean = std::sqrt((sx2 * (1 + a) / (1 - a) + r) / nd);
    const double g0 = sx2 + r;
    const double se_var = std::sqrt(2.0 / nd * (g0 * g0 + 2.0 * sx2 * sx2 * a * a / (1 - a * a)));
    CHECK(std::abs(iterfilt::testing::mean(ys)) <= 4.0 * se_mean);
    CHECK(std::abs(iterfilt::testing::variance(ys) - g0) <= 4.0 * se_var);
  }

  SUBCASE("non-finite callback output names the step and callback") {
    ModelSpec m = frozen_model();
    m.transition = [](std::span<const double> xp, std::span<const double>, double, double t, RngStream&,
                      std::span<double> x) { x[0] = t >= 3.0 ? std::nan("") : xp[0]; };
    try {
      simulate(m, ParamVector{0.0}, TimeGrid::regular(0, 1, 5), RngStream(1));
      FAIL("expected ModelEvaluationError");
    } catch (const ModelEvaluationError& e) {
      CHECK(e.step() == 3);
      CHECK(e.callback() == "transition");
    }
  }

  SUBCASE("missing observation sampler is a configuration error") {
    ModelSpec m = frozen_model();
    m.obs_sampler = nullptr;
    CHECK_THROWS_AS(simulate(m, ParamVector{0.0}, TimeGrid::regular(0, 1, 2), RngStream(1)), ConfigurationError);
  }
}

TEST_CASE("restrict_parameters fixes the non-free coordinates") {
  auto entry = models::scalar_lgss();
  Eigen::VectorXd values(5);
  values << 0.5, 2.0, 0.25, 1.0, 3.0;
  const ModelSpec m = restrict_parameters(entry.spec, values, {2, 0});  // (r, a)
  CHECK(m.param_dim == 2);
  CHECK(m.transform.names() == std::vector<std::string>{"r", "a"});

  // Measurement density sees r from the free vector.
  const double y = 0.3, x = 0.1;
  const double th[] = {0.25, 0.5};
  const double expected = -0.5 * (y - x) * (y - x) / 0.25 - 0.5 * std::log(2 * M_PI * 0.25);
  CHECK(m.log_measurement({&y, 1}, {&x, 1}, th, 1.0) == doctest::Approx(expected).epsilon(1e-14));

  // Init sees the fixed m0 = 1 and p0 = 3.
  std::vector<double> draws;
  for (std::uint64_t i = 0; i < 4000; ++i) {
    RngStream s = RngStream(3).derive("i", i);
    double x0;
    m.init(th, s, {&x0, 1});
    draws.push_back(x0);
  }
  CHECK(std::abs(iterfilt::testing::mean(draws) - 1.0) < 4.0 * std::sqrt(3.0 / 4000));
  CHECK_THROWS_AS(restrict_parameters(entry.spec, values, {7}), DimensionError);
}
