#include "cramkit/cram.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace cramkit {

void CramOptions::validate() const {
  if (batch_count < 2) {
    throw Error(ErrorKind::invalid_batching, "batch count must be at least 2");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::configuration, "alpha must lie in (0, 1)");
  }
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::domain, "normal quantile needs p in [0, 1]");
  }
  // 1 - p is exact here, and the lower tail keeps the Halley residual accurate.
  if (p > 0.5) return -normal_quantile(1.0 - p);
  // Acklam's rational approximation (relative error ~1e-9) ...
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // ... polished by one Halley step against erfc.
  const double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

namespace {

std::vector<double> kernels(const Dataset& data) {
  std::vector<double> k(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) k[i] = ipw_kernel(data[i], data.overlap());
  return k;
}

/// Per-observation IPW kernel of the baseline's value.
double eta_kernel(const ObservationView& obs, double baseline_prob, const OverlapConfig& overlap) {
  const double k = ipw_kernel(obs, overlap);
  return obs.d == 1 ? k * baseline_prob : -k * (1.0 - baseline_prob);
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

void check_plan(const BatchPlan& plan, const Dataset& data) {
  if (plan.batch_count < 2 || plan.members.size() != plan.batch_count ||
      plan.assignment.size() != data.size()) {
    throw Error(ErrorKind::invalid_batching, "batch plan does not match the dataset");
  }
}

/// Policy values on every observation, cached per step, plus the kernels.
/// All crammed quantities are linear combinations of these two tables.
struct EvaluationTable {
  const BatchPlan& plan;
  std::vector<double> kernel;
  std::vector<std::vector<double>> values;  // values[t][i] = pi_t(x_i)

  EvaluationTable(const BatchPlan& p, const Dataset& data, const PolicySequence& policies,
                  std::size_t count)
      : plan(p), kernel(kernels(data)) {
    values.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
      values.push_back(evaluate_rows(policies[t], data.covariates()));
    }
  }

  std::size_t T() const { return plan.batch_count; }

  double gamma(std::size_t t, std::size_t j) const {
    const auto batch = plan.batch(j);
    double acc = 0.0;
    for (std::size_t i : batch) acc += kernel[i] * (values[t][i] - values[t - 1][i]);
    return acc / static_cast<double>(batch.size());
  }

  double step(std::size_t t) const {
    double acc = 0.0;
    for (std::size_t j = t + 1; j <= T(); ++j) acc += gamma(t, j);
    return acc / static_cast<double>(T() - t);
  }

  /// Advances w from W_{j-1} to W_j on every observation.
  void advance_weight(std::vector<double>& w, std::size_t j) const {
    const double scale = 1.0 / static_cast<double>(T() - j + 1);
    const auto& now = values[j - 1];
    const auto& before = values[j - 2];
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += (now[i] - before[i]) * scale;
  }

  /// T * sum_j V_hat(kernel * W_j + extra / T) / |B_j| over j = first..T.
  double variance(std::size_t first, std::span<const double> extra) const {
    std::vector<double> w(kernel.size(), 0.0);
    std::vector<double> window;
    window.reserve(kernel.size());
    const double inv_t = 1.0 / static_cast<double>(T());
    double acc = 0.0;
    for (std::size_t j = 2; j <= first; ++j) advance_weight(w, j);
    for (std::size_t j = first; j <= T(); ++j) {
      if (j > first && j >= 2) advance_weight(w, j);
      window.clear();
      for (std::size_t i = 0; i < kernel.size(); ++i) {
        if (plan.assignment[i] < j) continue;
        double g = kernel[i] * w[i];
        if (!extra.empty()) g += extra[i] * inv_t;
        window.push_back(g);
      }
      acc += sample_variance(window) / static_cast<double>(plan.sizes[j - 1]);
    }
    return static_cast<double>(T()) * acc;
  }
};

void check_sequence(const PolicySequence& policies, std::size_t needed) {
  if (policies.size() < needed) {
    throw Error(ErrorKind::index, "policy sequence holds " + std::to_string(policies.size()) +
                                      " policies, need " + std::to_string(needed));
  }
}

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

double gamma_tj(const Policy& pi_t, const Policy& pi_tm1, const Dataset& data,
                std::span<const std::size_t> batch) {
  if (batch.empty()) throw Error(ErrorKind::domain, "batch is empty");
  double acc = 0.0;
  for (std::size_t i : batch) {
    const auto obs = data[i];
    acc += ipw_kernel(obs, data.overlap()) * (pi_t(obs.x) - pi_tm1(obs.x));
  }
  return acc / static_cast<double>(batch.size());
}

double delta_hat_step(std::size_t t, const PolicySequence& policies, const BatchPlan& plan,
                      const Dataset& data) {
  check_plan(plan, data);
  const std::size_t T = plan.batch_count;
  if (t < 1 || t > T - 1) {
    throw Error(ErrorKind::index, "step " + std::to_string(t) + " outside [1, " +
                                      std::to_string(T - 1) + "]");
  }
  check_sequence(policies, t + 1);
  double acc = 0.0;
  for (std::size_t j = t + 1; j <= T; ++j) {
    acc += gamma_tj(policies[t], policies[t - 1], data, plan.batch(j));
  }
  return acc / static_cast<double>(T - t);
}

double gamma_j_of_T(std::size_t j, const PolicySequence& policies, const BatchPlan& plan,
                    const Dataset& data) {
  check_plan(plan, data);
  const std::size_t T = plan.batch_count;
  if (j < 2 || j > T) {
    throw Error(ErrorKind::index, "batch " + std::to_string(j) + " outside [2, " +
                                      std::to_string(T) + "]");
  }
  check_sequence(policies, j);
  const auto batch = plan.batch(j);
  double acc = 0.0;
  for (std::size_t i : batch) {
    const auto obs = data[i];
    // W_j(x) built incrementally: W_j = W_{j-1} + (pi_{j-1} - pi_{j-2}) / (T - j + 1).
    double w = 0.0;
    double previous = policies[0](obs.x);
    for (std::size_t t = 1; t < j; ++t) {
      const double current = policies[t](obs.x);
      w += (current - previous) / static_cast<double>(T - t);
      previous = current;
    }
    acc += ipw_kernel(obs, data.overlap()) * w;
  }
  return acc / static_cast<double>(batch.size());
}

double variance_hat(const PolicySequence& policies, const BatchPlan& plan, const Dataset& data) {
  check_plan(plan, data);
  check_sequence(policies, plan.batch_count);
  const EvaluationTable table(plan, data, policies, plan.batch_count);
  return table.variance(2, {});
}

ConfidenceInterval confidence_interval(double delta_hat, double v_hat_sq, std::size_t batch_count,
                                       double alpha) {
  if (!(v_hat_sq >= 0.0)) throw Error(ErrorKind::domain, "variance must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::domain, "alpha must lie in (0, 1)");
  if (batch_count == 0) throw Error(ErrorKind::domain, "batch count must be positive");
  const double half = normal_quantile(1.0 - alpha / 2.0) *
                      std::sqrt(v_hat_sq / static_cast<double>(batch_count));
  return {delta_hat - half, delta_hat + half};
}

double eta_j(const Dataset& data, std::span<const std::size_t> batch, const Policy& baseline) {
  if (batch.empty()) throw Error(ErrorKind::domain, "batch is empty");
  double acc = 0.0;
  for (std::size_t i : batch) {
    const auto obs = data[i];
    acc += eta_kernel(obs, baseline(obs.x), data.overlap());
  }
  return acc / static_cast<double>(batch.size());
}

namespace {

struct LearnedSequence {
  BatchPlan plan;
  PolicySequence policies;
};

LearnedSequence learn_sequence(const Dataset& data, Learner& learner, const Policy& baseline,
                               const CramOptions& options) {
  options.validate();
  LearnedSequence out{partition_batches(data, options.batch_count, options.seed,
                                        options.burn_in_min, options.burn_out_min),
                      {baseline}};
  const std::size_t T = options.batch_count;
  const std::size_t last_learned = options.debias_final ? T - 1 : T;
  learner.reset();
  for (std::size_t t = 1; t <= last_learned; ++t) {
    try {
      learner.update(data, out.plan.batch(t));
      out.policies.push_back(learner.emit_policy());
    } catch (const Error& e) {
      throw Error(e.kind(), "learner failed at step " + std::to_string(t) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::numerical,
                  "learner failed at step " + std::to_string(t) + ": " + e.what());
    }
  }
  // With debiasing the last batch is evaluation-only, so pi_T := pi_{T-1}.
  if (options.debias_final) out.policies.push_back(out.policies.back());
  return out;
}

CramResult assemble(const Dataset& data, LearnedSequence learned, const CramOptions& options,
                    bool value_estimand) {
  const std::size_t T = options.batch_count;
  const EvaluationTable table(learned.plan, data, learned.policies, T + 1);

  CramResult result;
  result.estimand = value_estimand ? Estimand::policy_value : Estimand::value_difference;
  result.alpha = options.alpha;
  result.per_step_deltas.reserve(T - 1);
  double delta = 0.0;
  for (std::size_t t = 1; t <= T - 1; ++t) {
    result.per_step_deltas.push_back(table.step(t));
    delta += result.per_step_deltas.back();
  }

  result.q_t_series.reserve(T);
  for (std::size_t t = 1; t <= T; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      acc += std::abs(table.values[t][i] - table.values[t - 1][i]);
    }
    result.q_t_series.push_back(acc / static_cast<double>(data.size()));
  }

  if (value_estimand) {
    std::vector<double> eta_kernels(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      eta_kernels[i] = eta_kernel(data[i], table.values[0][i], data.overlap());
    }
    double eta_sum = 0.0;
    for (std::size_t j = 1; j <= T; ++j) {
      double acc = 0.0;
      for (std::size_t i : learned.plan.batch(j)) acc += eta_kernels[i];
      result.eta.push_back(acc / static_cast<double>(learned.plan.sizes[j - 1]));
      eta_sum += result.eta.back();
    }
    result.delta_hat = delta + eta_sum / static_cast<double>(T);
    result.v_hat_sq = table.variance(1, eta_kernels);
  } else {
    result.delta_hat = delta;
    result.v_hat_sq = table.variance(2, {});
  }

  result.se = std::sqrt(result.v_hat_sq / static_cast<double>(T));
  result.ci = confidence_interval(result.delta_hat, result.v_hat_sq, T, options.alpha);
  result.treated_fraction = mean_of(table.values[T]);
  result.final_policy = learned.policies[T];
  result.policy_sequence = std::move(learned.policies);
  result.plan = std::move(learned.plan);
  return result;
}

}  // namespace

CramResult cram_run(const Dataset& data, Learner& learner, const Policy& baseline,
                    const CramOptions& options) {
  if (options.estimand == Estimand::policy_value) {
    return cram_value_run(data, learner, baseline, options);
  }
  return assemble(data, learn_sequence(data, learner, baseline, options), options, false);
}

CramResult cram_value_run(const Dataset& data, Learner& learner, const Policy& baseline,
                          CramOptions options) {
  options.estimand = Estimand::policy_value;
  return assemble(data, learn_sequence(data, learner, baseline, options), options, true);
}

SplitResult sample_split_run(const Dataset& data, Learner& learner, const Policy& baseline,
                             double train_fraction, std::uint64_t seed, double alpha) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::configuration, "train fraction must lie in (0, 1)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::configuration, "alpha must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
  if (n_train == 0 || n_train >= n) {
    throw Error(ErrorKind::configuration, "sample split leaves an empty train or test set (n=" +
                                              std::to_string(n) + ", train=" +
                                              std::to_string(n_train) + ")");
  }
  const auto perm = seeded_permutation(n, seed);
  const std::span<const std::size_t> train(perm.data(), n_train);
  const std::span<const std::size_t> test(perm.data() + n_train, n - n_train);

  learner.reset();
  learner.update(data, train);
  const Policy learned = learner.emit_policy();

  std::vector<double> terms;
  terms.reserve(test.size());
  for (std::size_t i : test) {
    const auto obs = data[i];
    terms.push_back(ipw_kernel(obs, data.overlap()) * (learned(obs.x) - baseline(obs.x)));
  }

  SplitResult result;
  result.delta_hat = mean_of(terms);
  result.se = std::sqrt(sample_variance(terms) / static_cast<double>(terms.size()));
  const double z = normal_quantile(1.0 - alpha / 2.0);
  result.ci = {result.delta_hat - z * result.se, result.delta_hat + z * result.se};
  result.alpha = alpha;
  result.final_policy = learned;
  result.train_fraction = train_fraction;
  result.n_train = n_train;
  result.n_test = n - n_train;
  result.treated_fraction = mean_of(evaluate_rows(learned, data.covariates()));
  return result;
}

}  // namespace cramkit
