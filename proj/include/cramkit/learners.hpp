#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cramkit/core.hpp"
#include "cramkit/policy.hpp"

namespace cramkit {

/// Policy learning algorithm fed cumulatively, one batch at a time.
///
/// After update() has been called on batches 1..t the learner must emit the
/// policy it would produce from the union of those batches. Learners are
/// single-owner and mutated sequentially; emitted policies are immutable.
class Learner {
 public:
  virtual ~Learner() = default;

  /// Absorbs the given rows of `data` into the learner state.
  virtual void update(const Dataset& data, std::span<const std::size_t> rows) = 0;
  /// Policy learned from everything seen since the last reset().
  virtual Policy emit_policy() const = 0;
  virtual void reset() = 0;
  /// Fresh, reset copy with the same configuration.
  virtual std::unique_ptr<Learner> clone() const = 0;
  virtual std::string name() const = 0;
};

enum class FeatureMap {
  /// phi(x, d) = [1, x, d, d*x]; tau_hat(x) = f(x, 1) - f(x, 0).
  s_learner,
  /// phi(x) = [1, x] regressed on the IPW pseudo-outcome; tau_hat = fitted value.
  m_learner,
};

/// Sufficient statistics of a ridge regression: Gram matrix and moment vector.
class RidgeState {
 public:
  RidgeState(FeatureMap map, std::size_t covariate_dim, double lambda,
             bool exempt_intercept = false);

  FeatureMap feature_map() const noexcept { return map_; }
  std::size_t covariate_dim() const noexcept { return p_; }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(gram_.rows()); }
  double lambda() const noexcept { return lambda_; }
  bool exempt_intercept() const noexcept { return exempt_intercept_; }
  std::size_t count() const noexcept { return count_; }

  const Eigen::MatrixXd& gram() const noexcept { return gram_; }
  const Eigen::VectorXd& moments() const noexcept { return moments_; }

  /// Adds phi phi^T and phi * response for every row. The response is y for
  /// the S-learner and the IPW pseudo-outcome for the M-learner.
  void accumulate(const Dataset& data, std::span<const std::size_t> rows);

  /// (G + lambda I)^{-1} m by Cholesky. Throws a numerical error when the
  /// regularised system is not positive definite.
  Eigen::VectorXd coefficients() const;

  /// Linear CATE implied by the current coefficients.
  std::shared_ptr<const LinearCate> cate_model() const;

 private:
  FeatureMap map_;
  std::size_t p_;
  double lambda_;
  bool exempt_intercept_;
  std::size_t count_ = 0;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd moments_;
};

/// Feature vector of one observation under the given map.
Eigen::VectorXd ridge_features(FeatureMap map, std::span<const double> x, int d);

/// Ridge S- or M-learner emitting the threshold policy 1{tau_hat(x) > 0}.
class RidgeLearner final : public Learner {
 public:
  static constexpr double default_lambda = 0.1;

  RidgeLearner(FeatureMap map, double lambda = default_lambda, bool exempt_intercept = false);

  void update(const Dataset& data, std::span<const std::size_t> rows) override;
  Policy emit_policy() const override;
  void reset() override { state_.reset(); }
  std::unique_ptr<Learner> clone() const override;
  std::string name() const override;

  /// Throws not-fitted before the first update.
  const RidgeState& state() const;

 private:
  FeatureMap map_;
  double lambda_;
  bool exempt_intercept_;
  std::unique_ptr<RidgeState> state_;
};

std::unique_ptr<Learner> make_slearner_ridge(double lambda = RidgeLearner::default_lambda,
                                             bool exempt_intercept = false);
std::unique_ptr<Learner> make_mlearner_ridge(double lambda = RidgeLearner::default_lambda,
                                             bool exempt_intercept = false);

/// Threshold policy 1{tau_hat(x) > 0} over a ridge state.
Policy emit_threshold_policy(const RidgeState& state);

/// Ignores data and always emits the same policy.
class ConstantLearner final : public Learner {
 public:
  explicit ConstantLearner(Policy policy) : policy_(std::move(policy)) {}

  void update(const Dataset&, std::span<const std::size_t>) override {}
  Policy emit_policy() const override { return policy_; }
  void reset() override {}
  std::unique_ptr<Learner> clone() const override;
  std::string name() const override { return "constant"; }

 private:
  Policy policy_;
};

std::unique_ptr<Learner> constant_learner(Policy policy);

/// Adversarial fixture: alternates treat-none / treat-all on every update.
class AlternatingLearner final : public Learner {
 public:
  void update(const Dataset&, std::span<const std::size_t>) override { ++updates_; }
  Policy emit_policy() const override;
  void reset() override { updates_ = 0; }
  std::unique_ptr<Learner> clone() const override;
  std::string name() const override { return "alternating"; }

 private:
  std::size_t updates_ = 0;
};

}  // namespace cramkit
