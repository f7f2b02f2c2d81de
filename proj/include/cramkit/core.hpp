#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cramkit/error.hpp"

namespace cramkit {

/// Minimum allowed distance of a propensity score from {0, 1}.
struct OverlapConfig {
  double c = 0.01;

  void validate() const;
  bool admits(double e) const noexcept { return e >= c && e <= 1.0 - c; }
};

/// Dense row-major covariate matrix. Rows are observations.
class CovariateMatrix {
 public:
  CovariateMatrix() = default;
  CovariateMatrix(std::size_t rows, std::size_t cols);
  CovariateMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  double operator()(std::size_t i, std::size_t k) const { return values_[i * cols_ + k]; }
  double& operator()(std::size_t i, std::size_t k) { return values_[i * cols_ + k]; }

  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// One experimental record.
struct Observation {
  std::vector<double> x;
  int d = 0;
  double y = 0.0;
  double e = 0.5;
};

/// Borrowed view of one row of a Dataset.
struct ObservationView {
  std::span<const double> x;
  int d;
  double y;
  double e;
};

/// Immutable i.i.d. sample. Storage is columnar; covariates are row-major.
class Dataset {
 public:
  /// Validates dimensions, treatment values, finiteness, overlap and that
  /// both arms are present.
  Dataset(const std::vector<Observation>& observations, OverlapConfig overlap = {});
  Dataset(CovariateMatrix x, std::vector<int> d, std::vector<double> y, std::vector<double> e,
          OverlapConfig overlap = {});

  std::size_t size() const noexcept { return d_.size(); }
  std::size_t dim() const noexcept { return x_.cols(); }

  ObservationView operator[](std::size_t i) const { return {x_.row(i), d_[i], y_[i], e_[i]}; }

  const CovariateMatrix& covariates() const noexcept { return x_; }
  const std::vector<int>& treatment() const noexcept { return d_; }
  const std::vector<double>& outcome() const noexcept { return y_; }
  const std::vector<double>& propensity() const noexcept { return e_; }
  const OverlapConfig& overlap() const noexcept { return overlap_; }

  /// Copy with every covariate column centred and scaled to unit variance.
  /// Constant columns are centred only.
  Dataset standardized() const;

  /// Copy restricted to the given rows, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  void validate() const;

  CovariateMatrix x_;
  std::vector<int> d_;
  std::vector<double> y_;
  std::vector<double> e_;
  OverlapConfig overlap_;
};

/// Random T-way partition of a dataset.
struct BatchPlan {
  std::size_t batch_count = 0;
  /// assignment[i] is the 1-based batch id of observation i.
  std::vector<std::size_t> assignment;
  std::vector<std::size_t> sizes;
  std::uint64_t seed = 0;
  /// members[j-1] lists the observation indices of batch j, in shuffled order.
  std::vector<std::vector<std::size_t>> members;

  std::span<const std::size_t> batch(std::size_t j) const { return members.at(j - 1); }
};

/// Seeded Fisher-Yates shuffle sliced into T contiguous blocks. The first
/// n mod T batches receive one extra observation.
BatchPlan partition_batches(const Dataset& data, std::size_t batch_count, std::uint64_t seed,
                            std::size_t burn_in_min = 0, std::size_t burn_out_min = 0);

/// Seeded uniform permutation of 0..n-1 (Fisher-Yates over mt19937_64).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Inverse-probability-weighted pseudo-outcome y d / e - y (1 - d) / (1 - e).
double ipw_kernel(const ObservationView& obs, const OverlapConfig& overlap = {});
double ipw_kernel(const Observation& obs, const OverlapConfig& overlap = {});

/// Column roles for CSV ingestion.
struct CsvSchema {
  std::string outcome = "y";
  std::string treatment = "d";
  std::optional<std::string> propensity;
  /// Empty means every remaining column is a covariate.
  std::vector<std::string> covariates;
};

struct CsvOptions {
  CsvSchema schema;
  std::optional<double> constant_propensity;
  OverlapConfig overlap;
  bool standardize = false;
};

Dataset read_dataset_csv(const std::filesystem::path& path, const CsvOptions& options);

}  // namespace cramkit
