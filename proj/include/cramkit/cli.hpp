#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cramkit/core.hpp"
#include "cramkit/learners.hpp"
#include "cramkit/policy.hpp"

namespace cramkit::cli {

/// Every setting a command can take. Defaults first, then the config file,
/// then command-line flags.
struct RunConfig {
  std::string command;

  std::string input;
  std::string output;
  std::string format = "json";
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::size_t batches = 20;
  bool debias = false;
  std::string estimand = "difference";
  std::string learner = "slearner_ridge";
  double lambda = RidgeLearner::default_lambda;
  bool exempt_intercept = false;
  std::string baseline = "none";
  bool stable = false;
  std::optional<double> stable_c;
  double stable_delta = 0.05;
  std::size_t threads = 0;
  bool metadata = true;

  // data
  std::string outcome = "y";
  std::string treatment = "d";
  std::string propensity_column;
  std::optional<double> propensity;
  std::vector<std::string> covariates;
  bool standardize = false;
  double overlap_c = 0.01;
  std::size_t burn_in = 0;
  std::size_t burn_out = 0;

  // split
  double train_fraction = 0.8;

  // simulate
  std::string dgp = "linear";
  std::size_t p = 5;
  std::size_t n = 500;
  double noise_sd = 1.0;
  std::size_t replicates = 100;
  std::vector<std::string> methods = {"cram", "split_80_20"};
  std::size_t n_oracle = 1'000'000;

  // diagnose
  std::optional<double> diag_delta;
  std::size_t t_min = 1;
  std::optional<double> bound;

  void validate() const;
};

/// Applies a JSON config document onto `config`. Unknown keys are rejected.
void apply_config_json(RunConfig& config, const nlohmann::json& doc);

/// none -> treat nobody, all -> treat everybody, const:P -> constant P.
Policy parse_baseline(const std::string& spec);

std::unique_ptr<Learner> make_learner(const RunConfig& config, const Policy& baseline);

/// Entry point shared by the executable and the tests. Returns the exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cramkit::cli
