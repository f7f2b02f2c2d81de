#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cramkit/core.hpp"

namespace cramkit {

/// Estimated conditional average treatment effect x -> tau_hat(x).
class CateModel {
 public:
  virtual ~CateModel() = default;
  virtual double predict(std::span<const double> x) const = 0;
  virtual std::size_t dim() const = 0;
  /// S-expression used in audit output.
  virtual std::string describe() const = 0;
};

/// tau_hat(x) = intercept + slope . x
class LinearCate final : public CateModel {
 public:
  LinearCate(double intercept, std::vector<double> slope);

  double predict(std::span<const double> x) const override;
  std::size_t dim() const override { return slope_.size(); }
  std::string describe() const override;

  double intercept() const noexcept { return intercept_; }
  const std::vector<double>& slope() const noexcept { return slope_; }

 private:
  double intercept_;
  std::vector<double> slope_;
};

/// Immutable map from covariates to a treatment probability in [0, 1].
/// Cheap to copy: copies share the same node.
class Policy {
 public:
  enum class Kind { constant, cate_threshold, mixture };

  static Policy constant(double prob);
  /// Treats iff tau_hat(x) > threshold; ties go to control.
  static Policy cate_threshold(std::shared_ptr<const CateModel> model, double threshold = 0.0);

  double operator()(std::span<const double> x) const;
  double evaluate(std::span<const double> x) const { return (*this)(x); }

  Kind kind() const noexcept;
  /// Required covariate dimension; 0 when the policy accepts any dimension.
  std::size_t dim() const noexcept;
  /// Nesting depth of mixture nodes (0 for a leaf).
  std::size_t depth() const noexcept;
  /// True when both handles refer to the same node.
  bool same_node(const Policy& other) const noexcept { return node_ == other.node_; }

  /// S-expression form, e.g. (mixture 0.25 (constant 1) (constant 0)).
  std::string to_string() const;

  struct Node;

 private:
  explicit Policy(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  friend Policy mix_policies(double p, const Policy& newer, const Policy& older);

  std::shared_ptr<const Node> node_;
};

/// p * newer + (1 - p) * older. Degenerate weights return the operand itself.
Policy mix_policies(double p, const Policy& newer, const Policy& older);

/// Mean absolute difference of two policies over the rows of a reference sample.
double l1_policy_distance(const Policy& a, const Policy& b, const CovariateMatrix& reference);

/// Evaluates a policy on every row of a matrix.
std::vector<double> evaluate_rows(const Policy& policy, const CovariateMatrix& x);

/// pi_0, pi_1, ..., pi_T.
using PolicySequence = std::vector<Policy>;

}  // namespace cramkit
