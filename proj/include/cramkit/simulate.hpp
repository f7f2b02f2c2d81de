#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cramkit/core.hpp"
#include "cramkit/cram.hpp"
#include "cramkit/learners.hpp"
#include "cramkit/policy.hpp"

namespace cramkit {

enum class CovariateLaw { standard_normal, uniform };

/// coef * prod_k x[index_k]^power_k
struct PolyTerm {
  double coef = 0.0;
  std::vector<std::pair<std::size_t, int>> factors;
};

/// Polynomial in the covariates: intercept + sum of terms.
struct PolyFunction {
  double intercept = 0.0;
  std::vector<PolyTerm> terms;

  double operator()(std::span<const double> x) const;
  /// Largest covariate index referenced plus one.
  std::size_t min_dim() const;

  static PolyFunction linear(double intercept, const std::vector<double>& coefs);
  static PolyFunction constant(double value) { return {value, {}}; }
};

/// Synthetic randomized experiment with known potential-outcome means:
/// Y = mu0(X) + D tau(X) + eps, eps ~ N(0, noise_sd^2), D ~ Bernoulli(propensity).
struct DGPSpec {
  std::size_t p = 5;
  CovariateLaw covariate_law = CovariateLaw::standard_normal;
  PolyFunction mu0;
  PolyFunction tau;
  double noise_sd = 1.0;
  double propensity = 0.5;
  OverlapConfig overlap;

  void validate() const;

  /// tau(x) = x1, mu0(x) = x2.
  static DGPSpec linear_cate(std::size_t p = 5, double noise_sd = 1.0);
  /// Degree-3 CATE with interactions; needs p >= 3.
  static DGPSpec polynomial_cate(std::size_t p = 5, double noise_sd = 1.0);
  /// tau = 0, mu0(x) = x2.
  static DGPSpec null_cate(std::size_t p = 5, double noise_sd = 1.0);
};

/// Draws one covariate matrix from the DGP's law.
CovariateMatrix draw_covariates(const DGPSpec& dgp, std::size_t n, std::uint64_t seed);

Dataset generate_dataset(const DGPSpec& dgp, std::size_t n, std::uint64_t seed);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Fresh covariate draws with tau and mu0 precomputed; the ground truth for
/// policy values and value differences.
class OracleSample {
 public:
  OracleSample(const DGPSpec& dgp, std::size_t n_oracle, std::uint64_t seed);

  std::size_t size() const noexcept { return tau_.size(); }
  const CovariateMatrix& covariates() const noexcept { return x_; }

  /// Mean of tau(x) (pi(x) - pi0(x)).
  MonteCarloEstimate delta(const Policy& pi, const Policy& pi0) const;
  /// Mean of mu0(x) + tau(x) pi(x).
  MonteCarloEstimate value(const Policy& pi) const;
  /// Both quantities in one pass, with pi0 pre-evaluated on this sample.
  std::pair<double, double> delta_and_value(const Policy& pi, std::span<const double> pi0_values) const;

 private:
  CovariateMatrix x_;
  std::vector<double> tau_;
  std::vector<double> mu0_;
};

double oracle_delta(const DGPSpec& dgp, const Policy& pi, const Policy& pi0,
                    std::size_t n_oracle = 1'000'000, std::uint64_t seed = 0);
double oracle_value(const DGPSpec& dgp, const Policy& pi, std::size_t n_oracle = 1'000'000,
                    std::uint64_t seed = 0);

enum class Method { cram, cram_debiased, split_80_20, split_60_40 };

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct MCConfig {
  DGPSpec dgp;
  std::size_t n = 500;
  std::size_t batch_count = 20;
  /// Prototype; each replicate works on its own clone.
  std::shared_ptr<const Learner> learner;
  Policy baseline = Policy::constant(0.0);
  std::size_t replicates = 100;
  std::uint64_t base_seed = 0;
  std::vector<Method> methods = {Method::cram};
  double alpha = 0.05;
  std::size_t n_oracle = 1'000'000;
  /// 0 means one worker per hardware thread.
  std::size_t threads = 0;

  void validate() const;
};

/// Outcome of one method on one replicate.
struct ReplicateRecord {
  double estimate = 0.0;
  double truth = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double value = 0.0;
  bool covered = false;
};

struct MethodSummary {
  Method method = Method::cram;
  /// Mean oracle value of the learned policy.
  double value = 0.0;
  /// Mean of estimate - truth.
  double bias = 0.0;
  double abs_bias = 0.0;
  /// Standard error of the bias estimate, sd(estimate - truth) / sqrt(R).
  double bias_se = 0.0;
  /// Root-mean-square of estimate - truth.
  double mc_se = 0.0;
  double mean_est_se = 0.0;
  double coverage = 0.0;
  std::size_t replicates = 0;
  std::vector<ReplicateRecord> records;
};

struct MCReport {
  std::vector<MethodSummary> methods;

  const MethodSummary& at(Method method) const;
};

/// Replicate r draws its dataset with seed base_seed + r and runs every
/// configured method on it. Results do not depend on the thread count.
MCReport run_monte_carlo(const MCConfig& config);

}  // namespace cramkit
