#include "cramkit/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace cramkit {

double PolyFunction::operator()(std::span<const double> x) const {
  double acc = intercept;
  for (const auto& term : terms) {
    double prod = term.coef;
    for (const auto& [k, power] : term.factors) {
      for (int r = 0; r < power; ++r) prod *= x[k];
    }
    acc += prod;
  }
  return acc;
}

std::size_t PolyFunction::min_dim() const {
  std::size_t need = 0;
  for (const auto& term : terms) {
    for (const auto& factor : term.factors) need = std::max(need, factor.first + 1);
  }
  return need;
}

PolyFunction PolyFunction::linear(double intercept, const std::vector<double>& coefs) {
  PolyFunction f{intercept, {}};
  for (std::size_t k = 0; k < coefs.size(); ++k) {
    if (coefs[k] != 0.0) f.terms.push_back({coefs[k], {{k, 1}}});
  }
  return f;
}

void DGPSpec::validate() const {
  if (p == 0) throw Error(ErrorKind::configuration, "DGP needs at least one covariate");
  if (mu0.min_dim() > p || tau.min_dim() > p) {
    throw Error(ErrorKind::configuration, "DGP mean functions reference covariates beyond p");
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw Error(ErrorKind::configuration, "DGP noise sd must be >= 0");
  }
  overlap.validate();
  if (!overlap.admits(propensity)) {
    throw Error(ErrorKind::overlap_violation, "DGP propensity violates the overlap bound");
  }
}

DGPSpec DGPSpec::linear_cate(std::size_t p, double noise_sd) {
  DGPSpec dgp;
  dgp.p = p;
  dgp.tau = {0.0, {{1.0, {{0, 1}}}}};
  dgp.mu0 = p >= 2 ? PolyFunction{0.0, {{1.0, {{1, 1}}}}} : PolyFunction::constant(0.0);
  dgp.noise_sd = noise_sd;
  dgp.validate();
  return dgp;
}

DGPSpec DGPSpec::polynomial_cate(std::size_t p, double noise_sd) {
  if (p < 3) throw Error(ErrorKind::configuration, "polynomial DGP needs p >= 3");
  DGPSpec dgp;
  dgp.p = p;
  // 0.5 + x1 + x1 x2 - 0.5 x3^2 + 0.25 x1^3
  dgp.tau = {0.5,
             {{1.0, {{0, 1}}}, {1.0, {{0, 1}, {1, 1}}}, {-0.5, {{2, 2}}}, {0.25, {{0, 3}}}}};
  dgp.mu0 = {1.0, {{1.0, {{1, 1}}}, {0.5, {{2, 2}}}}};
  dgp.noise_sd = noise_sd;
  dgp.validate();
  return dgp;
}

DGPSpec DGPSpec::null_cate(std::size_t p, double noise_sd) {
  DGPSpec dgp = linear_cate(p, noise_sd);
  dgp.tau = PolyFunction::constant(0.0);
  return dgp;
}

namespace {

double draw_covariate(CovariateLaw law, std::mt19937_64& rng) {
  if (law == CovariateLaw::standard_normal) return std::normal_distribution<double>(0.0, 1.0)(rng);
  return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

CovariateMatrix draw_covariates(const DGPSpec& dgp, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CovariateMatrix x(n, dgp.p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dgp.p; ++k) x(i, k) = draw_covariate(dgp.covariate_law, rng);
  }
  return x;
}

Dataset generate_dataset(const DGPSpec& dgp, std::size_t n, std::uint64_t seed) {
  dgp.validate();
  if (n == 0) throw Error(ErrorKind::domain, "sample size must be >= 1");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution treat(dgp.propensity);
  std::normal_distribution<double> noise;
  CovariateMatrix x(n, dgp.p);
  std::vector<int> d(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dgp.p; ++k) x(i, k) = draw_covariate(dgp.covariate_law, rng);
    d[i] = treat(rng) ? 1 : 0;
    const auto row = x.row(i);
    y[i] = dgp.mu0(row) + (d[i] == 1 ? dgp.tau(row) : 0.0) + dgp.noise_sd * noise(rng);
  }
  return {std::move(x), std::move(d), std::move(y), std::vector<double>(n, dgp.propensity),
          dgp.overlap};
}

OracleSample::OracleSample(const DGPSpec& dgp, std::size_t n_oracle, std::uint64_t seed)
    : x_(draw_covariates(dgp, n_oracle, seed)), tau_(n_oracle), mu0_(n_oracle) {
  if (n_oracle == 0) throw Error(ErrorKind::domain, "oracle sample size must be >= 1");
  for (std::size_t i = 0; i < n_oracle; ++i) {
    tau_[i] = dgp.tau(x_.row(i));
    mu0_[i] = dgp.mu0(x_.row(i));
  }
}

namespace {

MonteCarloEstimate summarize(std::span<const double> terms) {
  const auto n = static_cast<double>(terms.size());
  double mean = 0.0;
  for (double v : terms) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : terms) ss += (v - mean) * (v - mean);
  const double se = terms.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return {mean, se};
}

}  // namespace

MonteCarloEstimate OracleSample::delta(const Policy& pi, const Policy& pi0) const {
  if (pi.same_node(pi0)) return {0.0, 0.0};
  std::vector<double> terms(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto x = x_.row(i);
    terms[i] = tau_[i] * (pi(x) - pi0(x));
  }
  return summarize(terms);
}

MonteCarloEstimate OracleSample::value(const Policy& pi) const {
  std::vector<double> terms(size());
  for (std::size_t i = 0; i < size(); ++i) terms[i] = mu0_[i] + tau_[i] * pi(x_.row(i));
  return summarize(terms);
}

std::pair<double, double> OracleSample::delta_and_value(const Policy& pi,
                                                        std::span<const double> pi0_values) const {
  if (pi0_values.size() != size()) throw Error(ErrorKind::shape, "baseline values do not match the oracle sample");
  double delta = 0.0;
  double value = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const double prob = pi(x_.row(i));
    delta += tau_[i] * (prob - pi0_values[i]);
    value += mu0_[i] + tau_[i] * prob;
  }
  const auto n = static_cast<double>(size());
  return {delta / n, value / n};
}

double oracle_delta(const DGPSpec& dgp, const Policy& pi, const Policy& pi0, std::size_t n_oracle,
                    std::uint64_t seed) {
  if (pi.same_node(pi0)) return 0.0;
  return OracleSample(dgp, n_oracle, seed).delta(pi, pi0).mean;
}

double oracle_value(const DGPSpec& dgp, const Policy& pi, std::size_t n_oracle, std::uint64_t seed) {
  return OracleSample(dgp, n_oracle, seed).value(pi).mean;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::cram: return "cram";
    case Method::cram_debiased: return "cram_debiased";
    case Method::split_80_20: return "split_80_20";
    case Method::split_60_40: return "split_60_40";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::cram, Method::cram_debiased, Method::split_80_20, Method::split_60_40}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorKind::configuration, "unknown method '" + name + "'");
}

void MCConfig::validate() const {
  dgp.validate();
  if (replicates < 1) throw Error(ErrorKind::configuration, "replicates must be >= 1");
  if (!learner) throw Error(ErrorKind::configuration, "Monte Carlo config needs a learner");
  if (methods.empty()) throw Error(ErrorKind::configuration, "Monte Carlo config needs a method");
  if (n_oracle < 1) throw Error(ErrorKind::configuration, "oracle sample size must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::configuration, "alpha must lie in (0, 1)");
  if (batch_count < 2 || batch_count > n) {
    throw Error(ErrorKind::invalid_batching, "batch count must lie in [2, n]");
  }
}

const MethodSummary& MCReport::at(Method method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw Error(ErrorKind::index, "report has no row for method " + to_string(method));
}

namespace {

ReplicateRecord run_method(Method method, const Dataset& data, const MCConfig& config,
                           std::uint64_t seed, const OracleSample& oracle,
                           std::span<const double> baseline_values) {
  auto learner = config.learner->clone();
  ReplicateRecord rec;
  Policy learned = config.baseline;
  if (method == Method::cram || method == Method::cram_debiased) {
    CramOptions options;
    options.batch_count = config.batch_count;
    options.seed = seed;
    options.alpha = config.alpha;
    options.debias_final = method == Method::cram_debiased;
    const auto result = cram_run(data, *learner, config.baseline, options);
    rec.estimate = result.delta_hat;
    rec.se = result.se;
    rec.ci_lower = result.ci.lower;
    rec.ci_upper = result.ci.upper;
    learned = result.final_policy;
  } else {
    const double fraction = method == Method::split_80_20 ? 0.8 : 0.6;
    const auto result = sample_split_run(data, *learner, config.baseline, fraction, seed, config.alpha);
    rec.estimate = result.delta_hat;
    rec.se = result.se;
    rec.ci_lower = result.ci.lower;
    rec.ci_upper = result.ci.upper;
    learned = result.final_policy;
  }
  if (learned.same_node(config.baseline)) {
    rec.truth = 0.0;
    rec.value = oracle.value(learned).mean;
  } else {
    std::tie(rec.truth, rec.value) = oracle.delta_and_value(learned, baseline_values);
  }
  rec.covered = rec.ci_lower <= rec.truth && rec.truth <= rec.ci_upper;
  return rec;
}

}  // namespace

MCReport run_monte_carlo(const MCConfig& config) {
  config.validate();
  const OracleSample oracle(config.dgp, config.n_oracle, splitmix64(config.base_seed ^ 0x0AC1Eull));
  const auto baseline_values = evaluate_rows(config.baseline, oracle.covariates());

  const std::size_t R = config.replicates;
  const std::size_t M = config.methods.size();
  std::vector<ReplicateRecord> records(R * M);

  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::size_t failed_at = R;

  auto worker = [&] {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= R) return;
      std::size_t m = 0;
      try {
        const std::uint64_t seed = config.base_seed + r;
        const Dataset data = generate_dataset(config.dgp, config.n, seed);
        for (; m < M; ++m) {
          records[r * M + m] =
              run_method(config.methods[m], data, config, splitmix64(seed), oracle, baseline_values);
        }
      } catch (const std::exception& e) {
        const std::lock_guard lock(failure_mutex);
        if (r < failed_at) {
          failed_at = r;
          const ErrorKind kind = [&] {
            if (const auto* err = dynamic_cast<const Error*>(&e)) return err->kind();
            return ErrorKind::numerical;
          }();
          failure = std::make_exception_ptr(
              Error(kind, "replicate " + std::to_string(r) + ", method " +
                              (m < M ? to_string(config.methods[m]) : std::string("data")) +
                              ": " + e.what()));
        }
        next.store(R);
        return;
      }
    }
  };

  std::size_t threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, R);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  MCReport report;
  for (std::size_t m = 0; m < M; ++m) {
    MethodSummary s;
    s.method = config.methods[m];
    s.replicates = R;
    double err_sum = 0.0;
    double err_sq = 0.0;
    std::size_t covered = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& rec = records[r * M + m];
      const double err = rec.estimate - rec.truth;
      err_sum += err;
      err_sq += err * err;
      s.value += rec.value;
      s.mean_est_se += rec.se;
      covered += rec.covered ? 1 : 0;
      s.records.push_back(rec);
    }
    const auto n = static_cast<double>(R);
    s.bias = err_sum / n;
    s.abs_bias = std::abs(s.bias);
    s.mc_se = std::sqrt(err_sq / n);
    const double err_var = R > 1 ? std::max(0.0, (err_sq - n * s.bias * s.bias) / (n - 1.0)) : 0.0;
    s.bias_se = std::sqrt(err_var / n);
    s.value /= n;
    s.mean_est_se /= n;
    s.coverage = static_cast<double>(covered) / n;
    report.methods.push_back(std::move(s));
  }
  return report;
}

}  // namespace cramkit
