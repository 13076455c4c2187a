#include <catch2/catch_amalgamated.hpp>

#include "gsprep/fits.hpp"

#include <cmath>

using namespace gsprep;

namespace {

std::vector<double> range(int lo, int hi, int step = 1) {
  std::vector<double> out;
  for (int x = lo; x <= hi; x += step) out.push_back(x);
  return out;
}

}  // namespace

TEST_CASE("logistic roundtrip on noiseless data") {
  const double r0 = 0.1, gamma = 0.3;
  const auto l = range(1, 50);
  std::vector<double> r;
  for (double x : l) r.push_back(1.0 / (1.0 + (1.0 / r0 - 1.0) * std::exp(-gamma * x)));
  const LogisticFit fit = fit_logistic(l, r);
  CHECK(fit.r0 == Catch::Approx(r0).epsilon(1e-6));
  CHECK(fit.gamma == Catch::Approx(gamma).epsilon(1e-6));
  CHECK(fit.converged);
  CHECK(fit.residual_norm < 1e-8);
}

TEST_CASE("logistic fit rejects degenerate data") {
  const auto l = range(1, 10);
  CHECK_THROWS_AS(fit_logistic(l, std::vector<double>(10, 0.5)), Error);
  CHECK_THROWS_AS(fit_logistic({1, 2}, {0.1, 0.2}), Error);
}

TEST_CASE("logistic fit tolerates multiplicative noise") {
  // 1% multiplicative noise, 20 seeds; the median gamma error stays below 5%
  const double r0 = 0.05, gamma = 0.4;
  const auto l = range(1, 40, 2);
  std::vector<double> errors;
  for (int seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<double> r;
    for (double x : l) {
      const double clean = 1.0 / (1.0 + (1.0 / r0 - 1.0) * std::exp(-gamma * x));
      r.push_back(std::clamp(clean * (1.0 + 0.01 * rng.gaussian()), 1e-12, 1.0));
    }
    const LogisticFit fit = fit_logistic(l, r);
    errors.push_back(std::abs(fit.gamma - gamma) / gamma);
  }
  std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
  CHECK(errors[errors.size() / 2] < 0.05);
}

TEST_CASE("logistic multi-start never loses to its grid seeds") {
  const double r0 = 0.02, gamma = 0.25;
  const auto l = range(1, 60, 3);
  std::vector<double> r;
  for (double x : l) r.push_back(1.0 / (1.0 + (1.0 / r0 - 1.0) * std::exp(-gamma * x)));
  const LogisticFit fit = fit_logistic(l, r);
  // residual at the optimum is no worse than any grid start evaluated directly
  for (double u0 : {std::log(99.0), std::log(9.0)}) {
    for (double g0 : {0.05, 0.2, 0.5, 1.0}) {
      double cost = 0.0;
      for (size_t i = 0; i < l.size(); ++i) {
        const double f = 1.0 / (1.0 + std::exp(u0 - g0 * l[i]));
        cost += (f - r[i]) * (f - r[i]);
      }
      CHECK(fit.residual_norm <= std::sqrt(cost) + 1e-12);
    }
  }
}

TEST_CASE("tail roundtrip on noiseless data") {
  const double c = 1e-9, a = 1e-3, k = 0.01;
  const auto l = range(0, 2500, 50);
  std::vector<double> y;
  for (double x : l) y.push_back(c + a * std::exp(-k * x));
  const TailFit fit = fit_tail(l, y, 0, 2500);
  CHECK(fit.c == Catch::Approx(c).epsilon(1e-4));
  CHECK(fit.a == Catch::Approx(a).epsilon(1e-4));
  CHECK(fit.k == Catch::Approx(k).epsilon(1e-4));
  CHECK(fit.active_constraints.empty());
}

TEST_CASE("tail fit pins C at zero for a pure exponential") {
  const double a = 2e-4, k = 0.05;
  const auto l = range(0, 400, 10);
  std::vector<double> y;
  for (double x : l) y.push_back(a * std::exp(-k * x));
  const TailFit fit = fit_tail(l, y, 0, 400);
  CHECK(fit.c == 0.0);
  CHECK(fit.a == Catch::Approx(a).epsilon(1e-4));
  CHECK(fit.k == Catch::Approx(k).epsilon(1e-4));
  REQUIRE_FALSE(fit.active_constraints.empty());
  CHECK(fit.active_constraints[0] == "C");
}

TEST_CASE("tail fit respects nonnegativity") {
  // slowly increasing data: best effort fit must still return C, A, k >= 0
  const auto l = range(0, 100, 5);
  std::vector<double> y;
  for (double x : l) y.push_back(1e-6 + 1e-8 * x);
  const TailFit fit = fit_tail(l, y, 0, 100);
  CHECK(fit.c >= 0.0);
  CHECK(fit.a >= 0.0);
  CHECK(fit.k >= 0.0);
}

TEST_CASE("tail fit window handling") {
  const auto l = range(0, 100, 10);
  const std::vector<double> y(l.size(), 1.0);
  CHECK_THROWS_AS(fit_tail(l, y, 200, 300), Error);  // empty window
}

TEST_CASE("power-law exact cases") {
  std::vector<double> n = {8, 10, 12, 14, 16};
  std::vector<double> y;
  for (double x : n) y.push_back(2.0 * x * x * x);
  PowerLawFit fit = fit_powerlaw(n, y);
  CHECK(fit.beta == Catch::Approx(3.0).margin(1e-12));
  CHECK(fit.alpha == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(fit.r2_log == Catch::Approx(1.0).margin(1e-12));

  // reference row used by the resource tables
  y.clear();
  for (double x : n) y.push_back(1549.0 * std::pow(x, 1.521));
  fit = fit_powerlaw(n, y);
  CHECK(fit.beta == Catch::Approx(1.521).epsilon(1e-6));
  CHECK(fit.alpha == Catch::Approx(1549.0).epsilon(1e-6));
}

TEST_CASE("power-law with two points is exact but stderr is flagged") {
  const PowerLawFit fit = fit_powerlaw({2, 4}, {8, 64});
  CHECK(fit.beta == Catch::Approx(3.0).margin(1e-12));
  CHECK_FALSE(fit.stderr_defined);
}

TEST_CASE("power-law rejects nonpositive input") {
  CHECK_THROWS_AS(fit_powerlaw({1, 2, 3}, {1.0, -2.0, 3.0}), Error);
}

TEST_CASE("power-law scale equivariance") {
  Rng rng(301);
  std::vector<double> n = {8, 10, 12, 14, 16}, y;
  for (double x : n) y.push_back(3.0 * std::pow(x, 2.2) * (1.0 + 0.05 * rng.gaussian()));
  const PowerLawFit base = fit_powerlaw(n, y);
  std::vector<double> scaled = y;
  for (double& v : scaled) v *= 7.5;
  const PowerLawFit fit = fit_powerlaw(n, scaled);
  CHECK(fit.beta == Catch::Approx(base.beta).margin(1e-12));
  CHECK(fit.alpha == Catch::Approx(7.5 * base.alpha).epsilon(1e-12));
  CHECK(fit.beta_stderr == Catch::Approx(base.beta_stderr).margin(1e-12));
  CHECK(fit.r2_log == Catch::Approx(base.r2_log).margin(1e-12));
}

TEST_CASE("predict_delta_l closed form and edge cases") {
  TailFit tail;
  tail.c = 0.0;
  tail.a = 1e-3;
  tail.k = 0.01;
  const auto pred = predict_delta_l(tail, 8, 1e-6);
  CHECK(pred.reachable);
  CHECK(pred.layers == Catch::Approx(100.0 * std::log(1e-3 / 1.25e-7)).epsilon(1e-9));
  CHECK(pred.layers == Catch::Approx(898.7196821).epsilon(1e-6));

  // doubling eps decreases the prediction
  const auto pred2 = predict_delta_l(tail, 8, 2e-6);
  CHECK(pred2.layers < pred.layers);

  // floor above target: unreachable
  tail.c = 1.0;
  CHECK_FALSE(predict_delta_l(tail, 8, 1e-6).reachable);

  tail.c = 0.0;
  tail.k = 0.0;
  CHECK_THROWS_AS(predict_delta_l(tail, 8, 1e-6), Error);
}

TEST_CASE("fitters are deterministic") {
  const auto l = range(1, 40, 2);
  std::vector<double> r;
  for (double x : l) r.push_back(1.0 / (1.0 + 30.0 * std::exp(-0.2 * x)));
  const LogisticFit a = fit_logistic(l, r);
  const LogisticFit b = fit_logistic(l, r);
  CHECK(a.r0 == b.r0);
  CHECK(a.gamma == b.gamma);
}
