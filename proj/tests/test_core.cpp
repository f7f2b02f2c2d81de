#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "cramkit/core.hpp"
#include "cramkit/simulate.hpp"

using namespace cramkit;

namespace {

Dataset toy_dataset(std::size_t n, std::size_t p = 2) {
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(p);
    for (std::size_t k = 0; k < p; ++k) x[k] = static_cast<double>(i) + 0.1 * static_cast<double>(k);
    obs.push_back({x, static_cast<int>(i % 2), static_cast<double>(i), 0.5});
  }
  return Dataset(obs);
}

std::filesystem::path write_temp(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << contents;
  return path;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected cramkit::Error");
  return ErrorKind::domain;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("partition_batches: exact division gives equal batches") {
  const auto data = toy_dataset(100);
  for (std::uint64_t seed : {0ull, 7ull, 12345ull}) {
    const auto plan = partition_batches(data, 20, seed);
    REQUIRE(plan.sizes.size() == 20);
    for (auto s : plan.sizes) CHECK(s == 5);
  }
}

TEST_CASE("partition_batches: remainder goes to the earliest batches") {
  const auto plan = partition_batches(toy_dataset(103), 20, 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(plan.sizes[j] == 6);
  for (std::size_t j = 3; j < 20; ++j) CHECK(plan.sizes[j] == 5);
}

TEST_CASE("partition_batches: invalid batch counts") {
  const auto data = toy_dataset(10);
  CHECK(kind_of([&] { partition_batches(data, 1, 0); }) == ErrorKind::invalid_batching);
  CHECK(kind_of([&] { partition_batches(data, 11, 0); }) == ErrorKind::invalid_batching);
  CHECK_NOTHROW(partition_batches(data, 10, 0));
}

TEST_CASE("partition_batches: burn-in and burn-out minima") {
  const auto data = toy_dataset(40);
  CHECK_NOTHROW(partition_batches(data, 4, 0, 10, 10));
  CHECK(kind_of([&] { partition_batches(data, 4, 0, 11, 0); }) == ErrorKind::configuration);
  CHECK(kind_of([&] { partition_batches(data, 4, 0, 0, 11); }) == ErrorKind::configuration);
  CHECK(kind_of([&] { partition_batches(data, 4, 0, 30, 11); }) == ErrorKind::configuration);
}

TEST_CASE("partition_batches: exact partition, seeded determinism") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + rng() % 200;
    const std::size_t T = 2 + rng() % (n - 1);
    const auto data = toy_dataset(n, 1);
    const auto a = partition_batches(data, T, trial);
    const auto b = partition_batches(data, T, trial);
    const auto c = partition_batches(data, T, trial + 1000);
    CHECK(a.assignment == b.assignment);
    CHECK(a.members == b.members);

    auto sa = a.sizes;
    auto sc = c.sizes;
    std::sort(sa.begin(), sa.end());
    std::sort(sc.begin(), sc.end());
    CHECK(sa == sc);
    CHECK(*std::max_element(a.sizes.begin(), a.sizes.end()) -
              *std::min_element(a.sizes.begin(), a.sizes.end()) <= 1);

    std::set<std::size_t> seen;
    for (std::size_t j = 1; j <= T; ++j) {
      CHECK(a.batch(j).size() == a.sizes[j - 1]);
      for (std::size_t i : a.batch(j)) {
        CHECK(a.assignment[i] == j);
        CHECK(seen.insert(i).second);
      }
    }
    CHECK(seen.size() == n);
    if (n > 20) CHECK(a.assignment != c.assignment);
  }
}

TEST_CASE("ipw_kernel: direct arithmetic") {
  CHECK(ipw_kernel(Observation{{}, 1, 2.0, 0.5}) == doctest::Approx(4.0));
  CHECK(ipw_kernel(Observation{{}, 0, 1.0, 0.5}) == doctest::Approx(-2.0));
  CHECK(ipw_kernel(Observation{{}, 1, 0.0, 0.3}) == 0.0);
}

TEST_CASE("ipw_kernel: overlap violation") {
  CHECK(kind_of([] { ipw_kernel(Observation{{}, 1, 1.0, 0.005}); }) == ErrorKind::overlap_violation);
  CHECK(kind_of([] { ipw_kernel(Observation{{}, 1, 1.0, 0.3}, OverlapConfig{0.4}); }) ==
        ErrorKind::overlap_violation);
  CHECK_NOTHROW(ipw_kernel(Observation{{}, 1, 1.0, 0.01}));
}

TEST_CASE("ipw_kernel: linear in y") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int k = 0; k < 200; ++k) {
    const int d = static_cast<int>(rng() % 2);
    const double y = u(rng);
    const double a = u(rng);
    const double e = 0.05 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng);
    CHECK(ipw_kernel(Observation{{}, d, a * y, e}) ==
          doctest::Approx(a * ipw_kernel(Observation{{}, d, y, e})).epsilon(1e-14));
  }
}

TEST_CASE("ipw_kernel: mean matches the average treatment effect of the DGP") {
  auto dgp = DGPSpec::linear_cate(3);
  dgp.tau.intercept = 0.7;  // E[tau(X)] = 0.7
  const auto data = generate_dataset(dgp, 200'000, 17);
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double k = ipw_kernel(data[i]);
    sum += k;
    sq += k * k;
  }
  const double n = static_cast<double>(data.size());
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - 0.7) <= 3.0 * se);
}

TEST_CASE("Dataset: validation") {
  CHECK(kind_of([] { Dataset(std::vector<Observation>{}); }) == ErrorKind::domain);
  CHECK(kind_of([] {
          Dataset(std::vector<Observation>{{{1.0}, 1, 0.0, 0.5}, {{1.0, 2.0}, 0, 0.0, 0.5}});
        }) == ErrorKind::shape);
  CHECK(kind_of([] {
          Dataset(std::vector<Observation>{{{1.0}, 1, 0.0, 0.5}, {{1.0}, 1, 0.0, 0.5}});
        }) == ErrorKind::domain);
  CHECK(kind_of([] {
          Dataset(std::vector<Observation>{{{1.0}, 1, 0.0, 0.5}, {{1.0}, 0, NAN, 0.5}});
        }) == ErrorKind::domain);
  CHECK(kind_of([] {
          Dataset(std::vector<Observation>{{{1.0}, 1, 0.0, 0.999}, {{1.0}, 0, 0.0, 0.5}});
        }) == ErrorKind::overlap_violation);
  CHECK(kind_of([] {
          Dataset(std::vector<Observation>{{{1.0}, 1, 0.0, 0.5}, {{1.0}, 0, 0.0, 0.5}},
                  OverlapConfig{0.0});
        }) == ErrorKind::configuration);
}

TEST_CASE("Dataset: standardize gives zero mean, unit variance columns") {
  const auto z = toy_dataset(50, 3).standardized();
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) mean += z.covariates()(i, k);
    mean /= 50.0;
    for (std::size_t i = 0; i < z.size(); ++i) ss += std::pow(z.covariates()(i, k) - mean, 2);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(ss / 49.0 == doctest::Approx(1.0));
  }
}

TEST_CASE("read_dataset_csv: four-row file with constant propensity") {
  const auto path = write_temp("cramkit_four_rows.csv", "y,d,x1,x2\n1.5,1,0.1,2\n0.5,0,-1,3\n2,1,4,5\n-1,0,2.5,-6\n");
  CsvOptions options;
  options.constant_propensity = 0.5;
  const auto data = read_dataset_csv(path, options);
  CHECK(data.size() == 4);
  CHECK(data.dim() == 2);
  for (double e : data.propensity()) CHECK(e == 0.5);
  CHECK(data[1].y == 0.5);
  CHECK(data[1].d == 0);
  CHECK(data[3].x[0] == 2.5);
  CHECK(data[3].x[1] == -6.0);
}

TEST_CASE("read_dataset_csv: explicit covariates and propensity column") {
  const auto path = write_temp("cramkit_cols.csv", "id,outcome,treat,ps,age\n1,3,1,0.4,50\n2,4,0,0.6,60\n");
  CsvOptions options;
  options.schema = {"outcome", "treat", "ps", {"age"}};
  const auto data = read_dataset_csv(path, options);
  CHECK(data.dim() == 1);
  CHECK(data[0].e == 0.4);
  CHECK(data[1].x[0] == 60.0);
}

TEST_CASE("read_dataset_csv: errors name the row and column") {
  CsvOptions options;
  options.constant_propensity = 0.5;

  auto expect = [&](const std::string& body, ErrorKind kind, const std::string& fragment,
                    const CsvOptions& opts) {
    const auto path = write_temp("cramkit_bad.csv", body);
    try {
      read_dataset_csv(path, opts);
      FAIL("expected an error for: " << body);
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };

  expect("y,d,x\n1,2,0\n0,0,1\n", ErrorKind::ingestion, "row 1, column 'd'", options);
  expect("y,d,x\n1,1,abc\n0,0,1\n", ErrorKind::ingestion, "column 'x'", options);
  expect("y,d,x\n1,1,0\n0,0,\n", ErrorKind::ingestion, "row 2", options);
  expect("y,x\n1,0\n", ErrorKind::ingestion, "missing column 'd'", options);
  expect("y,d,x\n", ErrorKind::ingestion, "zero data rows", options);

  CsvOptions with_e;
  with_e.schema.propensity = "e";
  expect("y,d,e\n1,1,0.0\n0,0,0.5\n", ErrorKind::overlap_violation, "row 1", with_e);
  expect("y,d,e\n1,1,1.5\n0,0,0.5\n", ErrorKind::overlap_violation, "column 'e'", with_e);

  CsvOptions no_e;
  expect("y,d\n1,1\n0,0\n", ErrorKind::ingestion, "propensity", no_e);
}

}  // TEST_SUITE
