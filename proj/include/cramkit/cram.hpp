#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cramkit/core.hpp"
#include "cramkit/learners.hpp"
#include "cramkit/policy.hpp"

namespace cramkit {

enum class Estimand { value_difference, policy_value };

struct CramOptions {
  std::size_t batch_count = 20;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  /// Keep the last batch out of learning; the final policy is pi_{T-1}.
  bool debias_final = false;
  Estimand estimand = Estimand::value_difference;
  std::size_t burn_in_min = 0;
  std::size_t burn_out_min = 0;

  void validate() const;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

struct CramResult {
  Estimand estimand = Estimand::value_difference;
  /// Crammed value difference, or crammed policy value for Estimand::policy_value.
  double delta_hat = 0.0;
  /// v_hat^2_T (or its policy-value analogue); the estimator's variance is v_hat_sq / T.
  double v_hat_sq = 0.0;
  double se = 0.0;
  ConfidenceInterval ci;
  double alpha = 0.05;
  Policy final_policy = Policy::constant(0.0);
  PolicySequence policy_sequence;
  std::vector<double> per_step_deltas;
  /// Q_hat_t for t = 1..T over the dataset's covariates.
  std::vector<double> q_t_series;
  /// Per-batch baseline value estimates; filled for Estimand::policy_value.
  std::vector<double> eta;
  BatchPlan plan;
  double treated_fraction = 0.0;
};

struct SplitResult {
  double delta_hat = 0.0;
  double se = 0.0;
  ConfidenceInterval ci;
  double alpha = 0.05;
  Policy final_policy = Policy::constant(0.0);
  double train_fraction = 0.8;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double treated_fraction = 0.0;
};

/// Standard-normal quantile function; absolute error below 1e-12 on (0, 1).
double normal_quantile(double p);

/// (1/|B|) sum_{i in B} ipw_kernel(i) * (pi_t(x_i) - pi_{t-1}(x_i)).
double gamma_tj(const Policy& pi_t, const Policy& pi_tm1, const Dataset& data,
                std::span<const std::size_t> batch);

/// Equal-weight mean of gamma_tj over batches t+1..T.
double delta_hat_step(std::size_t t, const PolicySequence& policies, const BatchPlan& plan,
                      const Dataset& data);

/// Batch-j aggregate sum_{t<j} gamma_tj / (T - t).
double gamma_j_of_T(std::size_t j, const PolicySequence& policies, const BatchPlan& plan,
                    const Dataset& data);

/// Crammed variance estimator T * sum_{j=2}^T V_hat(g_Tj) / |B_j|, where
/// V_hat is the sample variance of g_Tj over batches j..T. A window holding a
/// single observation contributes 0.
double variance_hat(const PolicySequence& policies, const BatchPlan& plan, const Dataset& data);

/// delta_hat -/+ z_{1-alpha/2} * sqrt(v_hat_sq / T).
ConfidenceInterval confidence_interval(double delta_hat, double v_hat_sq, std::size_t batch_count,
                                       double alpha);

/// IPW estimate of the baseline's value on one batch.
double eta_j(const Dataset& data, std::span<const std::size_t> batch, const Policy& baseline);

/// Learn-and-evaluate pass over a random T-way partition.
CramResult cram_run(const Dataset& data, Learner& learner, const Policy& baseline,
                    const CramOptions& options);

/// As cram_run, but estimates the final policy's value rather than its
/// difference from the baseline.
CramResult cram_value_run(const Dataset& data, Learner& learner, const Policy& baseline,
                          CramOptions options);

/// Learns on a seeded random train split and evaluates on the remainder.
/// The train count is floor(train_fraction * n + 0.5).
SplitResult sample_split_run(const Dataset& data, Learner& learner, const Policy& baseline,
                             double train_fraction, std::uint64_t seed, double alpha);

}  // namespace cramkit
