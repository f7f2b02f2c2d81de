#include <doctest.h>

#include <numbers>

#include "cramkit/simulate.hpp"
#include "fixtures.hpp"

using namespace cramkit;

namespace {

Policy sign_of_first(std::size_t p) {
  std::vector<double> slope(p, 0.0);
  slope[0] = 1.0;
  return Policy::cate_threshold(std::make_shared<const LinearCate>(0.0, slope));
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("PolyFunction evaluation") {
  const auto dgp = DGPSpec::polynomial_cate(3);
  const std::vector<double> x = {1.0, 2.0, -1.0};
  // 0.5 + 1 + 2 - 0.5 + 0.25
  CHECK(dgp.tau(x) == doctest::Approx(3.25));
  CHECK(dgp.mu0(x) == doctest::Approx(1.0 + 2.0 + 0.5));
  CHECK(dgp.tau.min_dim() == 3);
  CHECK_THROWS_AS(DGPSpec::polynomial_cate(2), Error);
}

TEST_CASE("generate_dataset: noiseless constant outcome") {
  auto dgp = DGPSpec::null_cate(2, 0.0);
  dgp.mu0 = PolyFunction::constant(5.0);
  const auto data = generate_dataset(dgp, 100, 3);
  for (double y : data.outcome()) CHECK(y == 5.0);
}

TEST_CASE("generate_dataset: treated fraction concentrates at the propensity") {
  const auto data = generate_dataset(DGPSpec::linear_cate(2), 100'000, 4);
  double treated = 0.0;
  for (int d : data.treatment()) treated += d;
  CHECK(std::abs(treated / 1e5 - 0.5) <= 0.01);
  for (double e : data.propensity()) CHECK(e == 0.5);
}

TEST_CASE("generate_dataset: IPW mean recovers E[tau] = 0") {
  const auto data = generate_dataset(DGPSpec::linear_cate(5), 100'000, 5);
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double k = ipw_kernel(data[i]);
    sum += k;
    sq += k * k;
  }
  const double mean = sum / 1e5;
  const double se = std::sqrt((sq / 1e5 - mean * mean) / 1e5);
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("generate_dataset: seeded determinism") {
  const auto dgp = DGPSpec::polynomial_cate(4);
  const auto a = generate_dataset(dgp, 50, 9);
  const auto b = generate_dataset(dgp, 50, 9);
  const auto c = generate_dataset(dgp, 50, 10);
  CHECK(a.outcome() == b.outcome());
  CHECK(a.covariates().values() == b.covariates().values());
  CHECK(a.outcome() != c.outcome());
}

TEST_CASE("oracle_delta: examples") {
  const auto dgp = DGPSpec::linear_cate(5);
  const auto pi = sign_of_first(5);
  CHECK(oracle_delta(dgp, pi, pi, 1000, 1) == 0.0);

  const OracleSample sample(dgp, 1'000'000, 2);
  const auto half_normal = sample.delta(pi, Policy::constant(0.0));
  const double expected = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  CHECK(expected == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(std::abs(half_normal.mean - expected) <= 3.0 * half_normal.std_error);

  auto constant = DGPSpec::null_cate(2);
  constant.tau = PolyFunction::constant(2.0);
  CHECK(oracle_delta(constant, Policy::constant(1.0), Policy::constant(0.0), 1000, 3) ==
        doctest::Approx(2.0));
}

TEST_CASE("oracle_value equals the baseline value plus the difference") {
  const auto dgp = DGPSpec::polynomial_cate(3);
  const auto pi = sign_of_first(3);
  const auto pi0 = Policy::constant(0.3);
  const OracleSample sample(dgp, 20000, 4);
  const double v = sample.value(pi).mean;
  const double v0 = sample.value(pi0).mean;
  CHECK(v - v0 == doctest::Approx(sample.delta(pi, pi0).mean).epsilon(1e-10));
  const auto pi0_values = evaluate_rows(pi0, sample.covariates());
  const auto [d, value] = sample.delta_and_value(pi, pi0_values);
  CHECK(d == doctest::Approx(sample.delta(pi, pi0).mean).epsilon(1e-12));
  CHECK(value == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("run_monte_carlo: constant learner is fully degenerate") {
  MCConfig config;
  config.dgp = DGPSpec::linear_cate(3);
  config.n = 100;
  config.batch_count = 10;
  config.learner = constant_learner(Policy::constant(0.0));
  config.replicates = 5;
  config.n_oracle = 1000;
  config.methods = {Method::cram, Method::split_80_20};
  const auto report = run_monte_carlo(config);
  for (const auto& m : report.methods) {
    CHECK(m.bias == 0.0);
    CHECK(m.mc_se == 0.0);
    CHECK(m.coverage == 1.0);
    CHECK(m.replicates == 5);
  }
}

TEST_CASE("run_monte_carlo: deterministic and thread-count independent") {
  MCConfig config;
  config.dgp = DGPSpec::linear_cate(3);
  config.n = 120;
  config.batch_count = 6;
  config.learner = make_slearner_ridge();
  config.replicates = 6;
  config.n_oracle = 5000;
  config.base_seed = 17;
  config.methods = {Method::cram, Method::cram_debiased, Method::split_60_40};
  config.threads = 1;
  const auto a = run_monte_carlo(config);
  config.threads = 3;
  const auto b = run_monte_carlo(config);
  REQUIRE(a.methods.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.methods[k].bias == b.methods[k].bias);
    CHECK(a.methods[k].mc_se == b.methods[k].mc_se);
    CHECK(a.methods[k].coverage == b.methods[k].coverage);
    for (std::size_t r = 0; r < 6; ++r) {
      CHECK(a.methods[k].records[r].estimate == b.methods[k].records[r].estimate);
    }
  }
  CHECK(a.at(Method::split_60_40).method == Method::split_60_40);
}

TEST_CASE("run_monte_carlo: replicate r uses the dataset seeded base + r") {
  MCConfig config;
  config.dgp = DGPSpec::linear_cate(2);
  config.n = 60;
  config.batch_count = 4;
  config.learner = make_mlearner_ridge();
  config.replicates = 3;
  config.n_oracle = 1000;
  config.base_seed = 100;
  const auto report = run_monte_carlo(config);
  const auto& rec = report.at(Method::cram).records;
  // Rerunning replicate 2 alone (base 102) reproduces its estimate. The truth
  // comes from a shared oracle sample keyed on the base seed, so only the
  // estimate is compared.
  config.base_seed = 102;
  config.replicates = 1;
  const auto single = run_monte_carlo(config);
  REQUIRE(rec.size() == 3);
  CHECK(single.at(Method::cram).records[0].estimate == rec[2].estimate);
  CHECK(single.at(Method::cram).records[0].se == rec[2].se);
}

TEST_CASE("run_monte_carlo: invalid configuration") {
  MCConfig config;
  config.learner = nullptr;
  CHECK_THROWS_AS(run_monte_carlo(config), Error);
  config.learner = make_slearner_ridge();
  config.replicates = 0;
  CHECK_THROWS_AS(run_monte_carlo(config), Error);
}

TEST_CASE("method names round-trip") {
  for (auto m : {Method::cram, Method::cram_debiased, Method::split_80_20, Method::split_60_40}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("bootstrap"), Error);
}

}  // TEST_SUITE
