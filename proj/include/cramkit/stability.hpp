#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cramkit/core.hpp"
#include "cramkit/learners.hpp"
#include "cramkit/policy.hpp"

namespace cramkit {

struct StabilityParams {
  double C = 1.0;
  double delta = 0.05;

  void validate() const;

  /// delta = 0.05 and C = ceil(0.8 T)^(1 + delta), so the wrapped learner
  /// passes its candidates through unchanged for the first 80% of batches.
  static StabilityParams defaults_for(std::size_t batch_count, double delta = 0.05);
};

/// min(C t^(-1-delta), 1).
double acceptance_prob(std::size_t t, const StabilityParams& params);

/// Blends each candidate policy of the inner learner with the previous
/// output: pi_t = p_t * candidate_t + (1 - p_t) * pi_{t-1}, pi_0 = baseline.
/// The blend is deterministic; no accept/reject draw is made.
class StableLearner final : public Learner {
 public:
  StableLearner(std::unique_ptr<Learner> inner, StabilityParams params, Policy baseline);

  void update(const Dataset& data, std::span<const std::size_t> rows) override;
  Policy emit_policy() const override { return current_; }
  void reset() override;
  std::unique_ptr<Learner> clone() const override;
  std::string name() const override { return "stable(" + inner_->name() + ")"; }

  const StabilityParams& params() const noexcept { return params_; }
  std::size_t steps() const noexcept { return step_; }

 private:
  std::unique_ptr<Learner> inner_;
  StabilityParams params_;
  Policy baseline_;
  Policy current_;
  std::size_t step_ = 0;
};

std::unique_ptr<Learner> stable_wrap(std::unique_ptr<Learner> inner, StabilityParams params,
                                     Policy baseline);

struct StabilityDiagnostics {
  /// Q_hat_t for t = 1..len-1.
  std::vector<double> q_t;
  /// t^(1+delta) * Q_hat_t.
  std::vector<double> t_power_q;
  bool flag = false;
  double delta = 0.0;
  std::size_t t_min = 1;
  double bound = 0.0;
};

/// Flags when t^(1+delta) Q_hat_t exceeds `bound` for some t >= t_min.
StabilityDiagnostics diagnose_stability(const PolicySequence& policies,
                                        const CovariateMatrix& reference, double delta,
                                        std::size_t t_min, double bound);

}  // namespace cramkit
