#include "cramkit/learners.hpp"

#include <cmath>
#include <sstream>

namespace cramkit {

Eigen::VectorXd ridge_features(FeatureMap map, std::span<const double> x, int d) {
  const auto p = static_cast<Eigen::Index>(x.size());
  if (map == FeatureMap::m_learner) {
    Eigen::VectorXd phi(p + 1);
    phi(0) = 1.0;
    for (Eigen::Index k = 0; k < p; ++k) phi(1 + k) = x[static_cast<std::size_t>(k)];
    return phi;
  }
  Eigen::VectorXd phi(2 * p + 2);
  phi(0) = 1.0;
  for (Eigen::Index k = 0; k < p; ++k) phi(1 + k) = x[static_cast<std::size_t>(k)];
  phi(p + 1) = d;
  for (Eigen::Index k = 0; k < p; ++k) phi(p + 2 + k) = d * x[static_cast<std::size_t>(k)];
  return phi;
}

namespace {

Eigen::Index feature_count(FeatureMap map, std::size_t p) {
  const auto q = static_cast<Eigen::Index>(p);
  return map == FeatureMap::m_learner ? q + 1 : 2 * q + 2;
}

}  // namespace

RidgeState::RidgeState(FeatureMap map, std::size_t covariate_dim, double lambda,
                       bool exempt_intercept)
    : map_(map),
      p_(covariate_dim),
      lambda_(lambda),
      exempt_intercept_(exempt_intercept),
      gram_(Eigen::MatrixXd::Zero(feature_count(map, covariate_dim), feature_count(map, covariate_dim))),
      moments_(Eigen::VectorXd::Zero(feature_count(map, covariate_dim))) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::domain, "ridge penalty must be finite and >= 0");
  }
}

void RidgeState::accumulate(const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw Error(ErrorKind::domain, "ridge update needs a nonempty batch");
  if (data.dim() != p_) {
    throw Error(ErrorKind::shape, "batch has " + std::to_string(data.dim()) +
                                      " covariates, learner was built for " + std::to_string(p_));
  }
  const auto q = gram_.rows();
  Eigen::MatrixXd phis(q, static_cast<Eigen::Index>(rows.size()));
  Eigen::VectorXd response(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto obs = data[rows[r]];
    const auto col = static_cast<Eigen::Index>(r);
    phis.col(col) = ridge_features(map_, obs.x, obs.d);
    response(col) = map_ == FeatureMap::m_learner ? ipw_kernel(obs, data.overlap()) : obs.y;
  }
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(phis);
  gram_ = gram_.selfadjointView<Eigen::Lower>();
  moments_ += phis * response;
  count_ += rows.size();
}

Eigen::VectorXd RidgeState::coefficients() const {
  Eigen::MatrixXd system = gram_;
  system.diagonal().array() += lambda_;
  if (exempt_intercept_) system(0, 0) -= lambda_;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
    std::ostringstream os;
    os << "regularised ridge system is singular (lambda=" << lambda_
       << ", reciprocal condition estimate=" << (llt.info() == Eigen::Success ? llt.rcond() : 0.0)
       << ")";
    throw Error(ErrorKind::numerical, os.str());
  }
  return llt.solve(moments_);
}

std::shared_ptr<const LinearCate> RidgeState::cate_model() const {
  const Eigen::VectorXd beta = coefficients();
  const auto p = static_cast<Eigen::Index>(p_);
  std::vector<double> slope(p_);
  double intercept = 0.0;
  if (map_ == FeatureMap::s_learner) {
    // f(x,1) - f(x,0) keeps only the d and d*x terms.
    intercept = beta(p + 1);
    for (Eigen::Index k = 0; k < p; ++k) slope[static_cast<std::size_t>(k)] = beta(p + 2 + k);
  } else {
    intercept = beta(0);
    for (Eigen::Index k = 0; k < p; ++k) slope[static_cast<std::size_t>(k)] = beta(1 + k);
  }
  return std::make_shared<const LinearCate>(intercept, std::move(slope));
}

Policy emit_threshold_policy(const RidgeState& state) {
  if (state.count() == 0) throw Error(ErrorKind::not_fitted, "ridge learner has seen no data");
  return Policy::cate_threshold(state.cate_model(), 0.0);
}

RidgeLearner::RidgeLearner(FeatureMap map, double lambda, bool exempt_intercept)
    : map_(map), lambda_(lambda), exempt_intercept_(exempt_intercept) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::domain, "ridge penalty must be finite and >= 0");
  }
}

void RidgeLearner::update(const Dataset& data, std::span<const std::size_t> rows) {
  if (!state_) state_ = std::make_unique<RidgeState>(map_, data.dim(), lambda_, exempt_intercept_);
  state_->accumulate(data, rows);
}

Policy RidgeLearner::emit_policy() const { return emit_threshold_policy(state()); }

const RidgeState& RidgeLearner::state() const {
  if (!state_) throw Error(ErrorKind::not_fitted, "ridge learner has seen no data");
  return *state_;
}

std::unique_ptr<Learner> RidgeLearner::clone() const {
  return std::make_unique<RidgeLearner>(map_, lambda_, exempt_intercept_);
}

std::string RidgeLearner::name() const {
  return map_ == FeatureMap::s_learner ? "slearner_ridge" : "mlearner_ridge";
}

std::unique_ptr<Learner> make_slearner_ridge(double lambda, bool exempt_intercept) {
  return std::make_unique<RidgeLearner>(FeatureMap::s_learner, lambda, exempt_intercept);
}

std::unique_ptr<Learner> make_mlearner_ridge(double lambda, bool exempt_intercept) {
  return std::make_unique<RidgeLearner>(FeatureMap::m_learner, lambda, exempt_intercept);
}

std::unique_ptr<Learner> ConstantLearner::clone() const {
  return std::make_unique<ConstantLearner>(policy_);
}

std::unique_ptr<Learner> constant_learner(Policy policy) {
  return std::make_unique<ConstantLearner>(std::move(policy));
}

Policy AlternatingLearner::emit_policy() const {
  return Policy::constant(updates_ % 2 == 1 ? 1.0 : 0.0);
}

std::unique_ptr<Learner> AlternatingLearner::clone() const {
  return std::make_unique<AlternatingLearner>();
}

}  // namespace cramkit
