#include "cramkit/stability.hpp"

#include <algorithm>
#include <cmath>

namespace cramkit {

void StabilityParams::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw Error(ErrorKind::domain, "stability constant C must be > 0");
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorKind::domain, "stability exponent delta must be > 0");
  }
}

StabilityParams StabilityParams::defaults_for(std::size_t batch_count, double delta) {
  const double free_steps = std::ceil(0.8 * static_cast<double>(batch_count));
  // Nudged up by a relative 1e-14 so C * t^(-1-delta) does not round to just below 1
  // at t = ceil(0.8 T).
  const double C = std::pow(std::max(free_steps, 1.0), 1.0 + delta) * (1.0 + 1e-14);
  StabilityParams params{C, delta};
  params.validate();
  return params;
}

double acceptance_prob(std::size_t t, const StabilityParams& params) {
  params.validate();
  if (t < 1) throw Error(ErrorKind::domain, "acceptance probability needs t >= 1");
  return std::min(params.C * std::pow(static_cast<double>(t), -1.0 - params.delta), 1.0);
}

StableLearner::StableLearner(std::unique_ptr<Learner> inner, StabilityParams params, Policy baseline)
    : inner_(std::move(inner)), params_(params), baseline_(baseline), current_(std::move(baseline)) {
  if (!inner_) throw Error(ErrorKind::domain, "stable wrapper needs an inner learner");
  params_.validate();
}

void StableLearner::update(const Dataset& data, std::span<const std::size_t> rows) {
  inner_->update(data, rows);
  ++step_;
  current_ = mix_policies(acceptance_prob(step_, params_), inner_->emit_policy(), current_);
}

void StableLearner::reset() {
  inner_->reset();
  current_ = baseline_;
  step_ = 0;
}

std::unique_ptr<Learner> StableLearner::clone() const {
  return std::make_unique<StableLearner>(inner_->clone(), params_, baseline_);
}

std::unique_ptr<Learner> stable_wrap(std::unique_ptr<Learner> inner, StabilityParams params,
                                     Policy baseline) {
  return std::make_unique<StableLearner>(std::move(inner), params, std::move(baseline));
}

StabilityDiagnostics diagnose_stability(const PolicySequence& policies,
                                        const CovariateMatrix& reference, double delta,
                                        std::size_t t_min, double bound) {
  if (policies.size() < 2) throw Error(ErrorKind::domain, "diagnostics need at least two policies");
  if (reference.empty()) throw Error(ErrorKind::domain, "reference sample is empty");
  StabilityDiagnostics out;
  out.delta = delta;
  out.t_min = t_min;
  out.bound = bound;
  for (std::size_t t = 1; t < policies.size(); ++t) {
    const double q = l1_policy_distance(policies[t], policies[t - 1], reference);
    const double scaled = std::pow(static_cast<double>(t), 1.0 + delta) * q;
    out.q_t.push_back(q);
    out.t_power_q.push_back(scaled);
    if (t >= t_min && scaled > bound) out.flag = true;
  }
  return out;
}

}  // namespace cramkit
