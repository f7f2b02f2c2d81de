#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cramkit/cli.hpp"
#include "cramkit/cram.hpp"
#include "cramkit/report.hpp"
#include "cramkit/simulate.hpp"

using namespace cramkit;
using nlohmann::json;

#ifndef CRAMKIT_TEST_DATA
#define CRAMKIT_TEST_DATA "tests/data"
#endif

namespace {

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cramkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::string four_rows() { return std::string(CRAMKIT_TEST_DATA) + "/four_rows.csv"; }

/// Writes a simulated dataset as CSV and returns its path.
std::string simulated_csv(const std::string& name, std::size_t n, std::uint64_t seed) {
  const auto data = generate_dataset(DGPSpec::linear_cate(3), n, seed);
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream f(path);
  f.precision(17);
  f << "y,d,e,x1,x2,x3\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto obs = data[i];
    f << obs.y << ',' << obs.d << ',' << obs.e;
    for (double v : obs.x) f << ',' << v;
    f << '\n';
  }
  return path.string();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("cram: constant learner on the four-row fixture estimates 0") {
  const auto r = invoke({"cram", "--input", four_rows(), "--propensity", "0.5", "--batches", "2",
                         "--learner", "constant"});
  REQUIRE(r.status == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["estimate"].get<double>() == 0.0);
  CHECK(doc["variance"].get<double>() == 0.0);
  CHECK(doc["n"] == 4);
  CHECK(doc["T"] == 2);
  CHECK(doc.contains("metadata"));
}

TEST_CASE("cram: more batches than rows names invalid-batching") {
  const auto r = invoke({"cram", "--input", four_rows(), "--propensity", "0.5", "--batches", "5"});
  CHECK(r.status != 0);
  const auto doc = json::parse(r.err);
  CHECK(doc["error"]["kind"] == "invalid-batching");
  CHECK(doc["error"]["stage"] == "run");
}

TEST_CASE("cram: alpha 0.10 interval agrees with confidence_interval") {
  const auto path = simulated_csv("cramkit_cli_alpha.csv", 400, 3);
  const auto r = invoke({"cram", "--input", path, "--propensity-col", "e", "--alpha", "0.10",
                         "--batches", "10", "--seed", "4", "--no-metadata"});
  REQUIRE(r.status == 0);
  const auto doc = json::parse(r.out);
  CHECK_FALSE(doc.contains("metadata"));
  const double est = doc["estimate"];
  const double se = doc["se"];
  CHECK(doc["ci_upper"].get<double>() - est == doctest::Approx(1.644854 * se).epsilon(1e-6));
  const auto ci = confidence_interval(est, doc["variance"].get<double>(), 10, 0.10);
  CHECK(doc["ci_lower"].get<double>() == doctest::Approx(ci.lower).epsilon(1e-14));
  CHECK(doc["ci_upper"].get<double>() == doctest::Approx(ci.upper).epsilon(1e-14));
}

TEST_CASE("cram: policy-value estimand reports eta") {
  const auto path = simulated_csv("cramkit_cli_value.csv", 200, 5);
  const auto r = invoke({"cram", "--input", path, "--propensity-col", "e", "--batches", "5",
                         "--estimand", "value", "--no-metadata"});
  REQUIRE(r.status == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["estimand"] == "policy_value");
  CHECK(doc["eta"].size() == 5);
}

TEST_CASE("split: train fraction handling") {
  const auto path = simulated_csv("cramkit_cli_split.csv", 100, 6);
  const auto base = std::vector<std::string>{"split", "--input", path, "--propensity-col", "e"};

  auto r = invoke(base);
  REQUIRE(r.status == 0);
  auto doc = json::parse(r.out);
  CHECK(doc["train_fraction"].get<double>() == 0.8);
  CHECK(doc["n_train"] == 80);

  auto args = base;
  args.insert(args.end(), {"--train-fraction", "0.6"});
  r = invoke(args);
  REQUIRE(r.status == 0);
  CHECK(json::parse(r.out)["n_train"] == 60);

  args = base;
  args.insert(args.end(), {"--train-fraction", "1.0"});
  r = invoke(args);
  CHECK(r.status != 0);
  CHECK(json::parse(r.err)["error"]["kind"] == "configuration");
}

TEST_CASE("simulate: one replicate and two methods") {
  auto r = invoke({"simulate", "--replicates", "1", "--n", "100", "--batches", "5", "--n-oracle",
                   "1000", "--methods", "cram", "--no-metadata"});
  REQUIRE(r.status == 0);
  auto doc = json::parse(r.out);
  REQUIRE(doc["rows"].size() == 1);
  const double coverage = doc["rows"][0]["coverage"];
  CHECK((coverage == 0.0 || coverage == 1.0));

  r = invoke({"simulate", "--replicates", "2", "--n", "100", "--batches", "5", "--n-oracle", "1000",
              "--methods", "cram,split_80_20", "--format", "csv"});
  REQUIRE(r.status == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 3);
  CHECK(all[0] == "method,value,bias,abs_bias,mc_se,mean_est_se,coverage,replicates");
  CHECK(all[1].rfind("cram,", 0) == 0);
  CHECK(all[2].rfind("split_80_20,", 0) == 0);
}

TEST_CASE("diagnose: constant, alternating and stable learners") {
  const auto path = simulated_csv("cramkit_cli_diag.csv", 200, 7);
  const auto base = std::vector<std::string>{"diagnose", "--input", path, "--propensity-col", "e",
                                             "--batches", "10", "--no-metadata"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = invoke(args);
    REQUIRE(r.status == 0);
    return json::parse(r.out);
  };

  const auto constant = with({"--learner", "constant"});
  CHECK(constant["flag"] == false);
  for (double q : constant["q_t"]) CHECK(q == 0.0);

  const auto wild = with({"--learner", "alternating", "--bound", "1"});
  CHECK(wild["flag"] == true);

  const auto stable = with({"--learner", "slearner_ridge", "--stable"});
  CHECK(stable["flag"] == false);
}

TEST_CASE("config file supplies values and flags override them") {
  const auto path = simulated_csv("cramkit_cli_cfg.csv", 120, 8);
  const auto cfg = std::filesystem::temp_directory_path() / "cramkit_cli_cfg.json";
  std::ofstream(cfg) << json{{"batches", 4}, {"alpha", 0.2}, {"data", {{"propensity_column", "e"}}}}.dump();

  auto r = invoke({"cram", "--config", cfg.string(), "--input", path, "--no-metadata"});
  REQUIRE(r.status == 0);
  auto doc = json::parse(r.out);
  CHECK(doc["T"] == 4);
  CHECK(doc["alpha"].get<double>() == 0.2);

  r = invoke({"cram", "--config", cfg.string(), "--input", path, "--batches", "6", "--no-metadata"});
  REQUIRE(r.status == 0);
  CHECK(json::parse(r.out)["T"] == 6);

  std::ofstream(cfg) << R"({"batchez": 4})";
  r = invoke({"cram", "--config", cfg.string(), "--input", path});
  CHECK(r.status != 0);
  CHECK(json::parse(r.err)["error"]["kind"] == "configuration");
}

TEST_CASE("report JSON round-trips through a file written atomically") {
  const auto path = simulated_csv("cramkit_cli_out.csv", 100, 9);
  const auto out = std::filesystem::temp_directory_path() / "cramkit_cli_report.json";
  std::filesystem::remove(out);
  const auto r = invoke({"cram", "--input", path, "--propensity-col", "e", "--batches", "5",
                         "--output", out.string(), "--no-metadata"});
  REQUIRE(r.status == 0);
  CHECK(r.out.empty());
  std::ifstream f(out);
  const auto doc = json::parse(f);
  const auto again = json::parse(doc.dump());
  CHECK(doc == again);
  CHECK(doc["batch_sizes"].size() == 5);
  for (const auto& entry : std::filesystem::directory_iterator(out.parent_path())) {
    CHECK(entry.path().filename().string().find("cramkit_cli_report.json.tmp") == std::string::npos);
  }
}

TEST_CASE("parse_baseline") {
  CHECK(cli::parse_baseline("none")(std::vector<double>{}) == 0.0);
  CHECK(cli::parse_baseline("all")(std::vector<double>{}) == 1.0);
  CHECK(cli::parse_baseline("const:0.25")(std::vector<double>{}) == 0.25);
  CHECK_THROWS_AS(cli::parse_baseline("const:2"), Error);
  CHECK_THROWS_AS(cli::parse_baseline("some"), Error);
}

TEST_CASE("format_sig keeps six significant digits") {
  CHECK(format_sig(0.123456789) == "0.123457");
  CHECK(format_sig(1234567.0) == "1.23457e+06");
}

}  // TEST_SUITE
