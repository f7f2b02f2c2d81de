#pragma once

// Random instances shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "cramkit/core.hpp"
#include "cramkit/learners.hpp"
#include "cramkit/policy.hpp"
#include "oracle.hpp"

namespace fixtures {

using namespace cramkit;

inline std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

/// Random policy of mixed kinds over p covariates.
inline Policy random_policy(std::mt19937_64& rng, std::size_t p, int depth = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const int kind = static_cast<int>(rng() % (depth < 3 ? 3 : 2));
  if (kind == 0) return Policy::constant(u(rng));
  if (kind == 1) {
    std::vector<double> slope(p);
    for (auto& s : slope) s = z(rng);
    return Policy::cate_threshold(std::make_shared<const LinearCate>(z(rng), slope), z(rng) * 0.1);
  }
  return mix_policies(u(rng), random_policy(rng, p, depth + 1), random_policy(rng, p, depth + 1));
}

inline PolicySequence random_sequence(std::mt19937_64& rng, std::size_t length, std::size_t p) {
  PolicySequence seq;
  for (std::size_t t = 0; t < length; ++t) seq.push_back(random_policy(rng, p));
  return seq;
}

inline CovariateMatrix random_reference(std::mt19937_64& rng, std::size_t rows, std::size_t p) {
  std::normal_distribution<double> z(0.0, 1.0);
  CovariateMatrix x(rows, p);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < p; ++k) x(i, k) = z(rng);
  }
  return x;
}

/// Random experiment with heterogeneous propensities; both arms present.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t p) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (;;) {
    std::vector<Observation> obs(n);
    bool treated = false;
    bool control = false;
    for (auto& o : obs) {
      o.x.resize(p);
      for (auto& v : o.x) v = z(rng);
      o.e = u(rng);
      o.d = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < o.e ? 1 : 0;
      o.y = o.x[0] + o.d * (0.5 + o.x[p - 1]) + z(rng);
      treated = treated || o.d == 1;
      control = control || o.d == 0;
    }
    if (treated && control) return Dataset(obs);
  }
}

/// Batch plan with arbitrary (mixed) sizes, at least one row per batch.
inline BatchPlan random_plan(std::mt19937_64& rng, std::size_t n, std::size_t T) {
  std::vector<std::size_t> cuts(n - 1);
  std::iota(cuts.begin(), cuts.end(), 1);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(T - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  BatchPlan plan;
  plan.batch_count = T;
  plan.assignment.assign(n, 0);
  plan.members.resize(T);
  std::size_t start = 0;
  for (std::size_t j = 0; j < T; ++j) {
    const std::size_t end = j + 1 < T ? cuts[j] : n;
    for (std::size_t k = start; k < end; ++k) {
      plan.members[j].push_back(perm[k]);
      plan.assignment[perm[k]] = j + 1;
    }
    plan.sizes.push_back(end - start);
    start = end;
  }
  return plan;
}

inline std::vector<oracle::Row> oracle_rows(const Dataset& data) {
  std::vector<oracle::Row> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto obs = data[i];
    rows.push_back({std::vector<double>(obs.x.begin(), obs.x.end()), obs.d, obs.y, obs.e});
  }
  return rows;
}

inline oracle::PolicyFn oracle_policies(const PolicySequence& seq) {
  return [&seq](std::size_t t, const std::vector<double>& x) { return seq.at(t)(x); };
}

/// Emits a scripted policy sequence, one per update, ignoring the data.
class ScriptedLearner final : public Learner {
 public:
  explicit ScriptedLearner(PolicySequence script) : script_(std::move(script)) {}

  void update(const Dataset&, std::span<const std::size_t>) override { ++step_; }
  Policy emit_policy() const override {
    return script_.at(std::min(step_, script_.size() - 1));
  }
  void reset() override { step_ = 0; }
  std::unique_ptr<Learner> clone() const override {
    return std::make_unique<ScriptedLearner>(script_);
  }
  std::string name() const override { return "scripted"; }

 private:
  PolicySequence script_;
  std::size_t step_ = 0;
};

}  // namespace fixtures
