#include "cramkit/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace cramkit {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_batching: return "invalid-batching";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::overlap_violation: return "overlap-violation";
    case ErrorKind::ingestion: return "ingestion";
    case ErrorKind::shape: return "shape";
    case ErrorKind::domain: return "domain";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::not_fitted: return "not-fitted";
    case ErrorKind::index: return "index";
  }
  return "unknown";
}

void OverlapConfig::validate() const {
  if (!(c > 0.0 && c <= 0.5)) {
    throw Error(ErrorKind::configuration,
                "overlap constant must lie in (0, 0.5], got " + std::to_string(c));
  }
}

CovariateMatrix::CovariateMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

CovariateMatrix::CovariateMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw Error(ErrorKind::shape, "covariate buffer holds " + std::to_string(values_.size()) +
                                      " values, expected " + std::to_string(rows * cols));
  }
}

namespace {

CovariateMatrix stack_rows(const std::vector<Observation>& obs) {
  if (obs.empty()) throw Error(ErrorKind::domain, "dataset must be nonempty");
  const std::size_t p = obs.front().x.size();
  std::vector<double> values;
  values.reserve(obs.size() * p);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].x.size() != p) {
      throw Error(ErrorKind::shape, "observation " + std::to_string(i) + " has " +
                                        std::to_string(obs[i].x.size()) +
                                        " covariates, expected " + std::to_string(p));
    }
    values.insert(values.end(), obs[i].x.begin(), obs[i].x.end());
  }
  return {obs.size(), p, std::move(values)};
}

template <typename T, typename F>
std::vector<T> project(const std::vector<Observation>& obs, F f) {
  std::vector<T> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.push_back(f(o));
  return out;
}

void check_overlap(double e, const OverlapConfig& overlap) {
  if (!overlap.admits(e)) {
    throw Error(ErrorKind::overlap_violation,
                "propensity " + std::to_string(e) + " outside [" + std::to_string(overlap.c) +
                    ", " + std::to_string(1.0 - overlap.c) + "]");
  }
}

}  // namespace

Dataset::Dataset(const std::vector<Observation>& observations, OverlapConfig overlap)
    : Dataset(stack_rows(observations),
              project<int>(observations, [](const Observation& o) { return o.d; }),
              project<double>(observations, [](const Observation& o) { return o.y; }),
              project<double>(observations, [](const Observation& o) { return o.e; }), overlap) {}

Dataset::Dataset(CovariateMatrix x, std::vector<int> d, std::vector<double> y,
                 std::vector<double> e, OverlapConfig overlap)
    : x_(std::move(x)), d_(std::move(d)), y_(std::move(y)), e_(std::move(e)), overlap_(overlap) {
  validate();
}

void Dataset::validate() const {
  overlap_.validate();
  const std::size_t n = d_.size();
  if (n == 0) throw Error(ErrorKind::domain, "dataset must be nonempty");
  if (y_.size() != n || e_.size() != n || x_.rows() != n) {
    throw Error(ErrorKind::shape, "dataset columns have inconsistent lengths");
  }
  bool treated = false;
  bool control = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (d_[i] != 0 && d_[i] != 1) {
      throw Error(ErrorKind::domain, "treatment of observation " + std::to_string(i) +
                                         " is " + std::to_string(d_[i]) + ", expected 0 or 1");
    }
    (d_[i] == 1 ? treated : control) = true;
    if (!std::isfinite(y_[i])) {
      throw Error(ErrorKind::domain, "outcome of observation " + std::to_string(i) + " is not finite");
    }
    for (double v : x_.row(i)) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::domain,
                    "covariate of observation " + std::to_string(i) + " is not finite");
      }
    }
    if (!overlap_.admits(e_[i])) {
      throw Error(ErrorKind::overlap_violation,
                  "propensity " + std::to_string(e_[i]) + " of observation " + std::to_string(i) +
                      " outside [" + std::to_string(overlap_.c) + ", " +
                      std::to_string(1.0 - overlap_.c) + "]");
    }
  }
  if (!treated || !control) {
    throw Error(ErrorKind::domain, "dataset needs at least one treated and one control unit");
  }
}

Dataset Dataset::standardized() const {
  const std::size_t n = size();
  const std::size_t p = dim();
  CovariateMatrix z = x_;
  for (std::size_t k = 0; k < p; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x_(i, k);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x_(i, k) - mean) * (x_(i, k) - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z(i, k) = sd > 0.0 ? (x_(i, k) - mean) / sd : x_(i, k) - mean;
    }
  }
  return {std::move(z), d_, y_, e_, overlap_};
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const std::size_t p = dim();
  std::vector<double> values;
  values.reserve(rows.size() * p);
  std::vector<int> d;
  std::vector<double> y;
  std::vector<double> e;
  for (std::size_t i : rows) {
    if (i >= size()) throw Error(ErrorKind::index, "row " + std::to_string(i) + " out of range");
    auto r = x_.row(i);
    values.insert(values.end(), r.begin(), r.end());
    d.push_back(d_[i]);
    y.push_back(y_[i]);
    e.push_back(e_[i]);
  }
  return {CovariateMatrix(rows.size(), p, std::move(values)), std::move(d), std::move(y),
          std::move(e), overlap_};
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Explicit Fisher-Yates: std::shuffle's draw sequence is implementation-defined.
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  return perm;
}

BatchPlan partition_batches(const Dataset& data, std::size_t batch_count, std::uint64_t seed,
                            std::size_t burn_in_min, std::size_t burn_out_min) {
  const std::size_t n = data.size();
  if (batch_count < 2 || batch_count > n) {
    throw Error(ErrorKind::invalid_batching, "batch count " + std::to_string(batch_count) +
                                                 " must lie in [2, n=" + std::to_string(n) + "]");
  }
  if (burn_in_min + burn_out_min > n) {
    throw Error(ErrorKind::configuration, "burn-in plus burn-out minima exceed n");
  }
  BatchPlan plan;
  plan.batch_count = batch_count;
  plan.seed = seed;
  plan.sizes.assign(batch_count, n / batch_count);
  for (std::size_t j = 0; j < n % batch_count; ++j) ++plan.sizes[j];
  if (plan.sizes.front() < burn_in_min) {
    throw Error(ErrorKind::configuration, "first batch holds " + std::to_string(plan.sizes.front()) +
                                              " observations, burn-in requires " +
                                              std::to_string(burn_in_min));
  }
  if (plan.sizes.back() < burn_out_min) {
    throw Error(ErrorKind::configuration, "last batch holds " + std::to_string(plan.sizes.back()) +
                                              " observations, burn-out requires " +
                                              std::to_string(burn_out_min));
  }

  const auto perm = seeded_permutation(n, seed);
  plan.assignment.assign(n, 0);
  plan.members.resize(batch_count);
  std::size_t pos = 0;
  for (std::size_t j = 0; j < batch_count; ++j) {
    plan.members[j].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                           perm.begin() + static_cast<std::ptrdiff_t>(pos + plan.sizes[j]));
    for (std::size_t i : plan.members[j]) plan.assignment[i] = j + 1;
    pos += plan.sizes[j];
  }
  return plan;
}

double ipw_kernel(const ObservationView& obs, const OverlapConfig& overlap) {
  check_overlap(obs.e, overlap);
  return obs.d == 1 ? obs.y / obs.e : -obs.y / (1.0 - obs.e);
}

double ipw_kernel(const Observation& obs, const OverlapConfig& overlap) {
  return ipw_kernel(ObservationView{obs.x, obs.d, obs.y, obs.e}, overlap);
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

[[noreturn]] void ingest_fail(std::size_t row, const std::string& column, const std::string& what) {
  throw Error(ErrorKind::ingestion,
              "row " + std::to_string(row) + ", column '" + column + "': " + what);
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  if (cell.empty()) ingest_fail(row, column, "missing value");
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) ingest_fail(row, column, "non-numeric value '" + cell + "'");
  if (!std::isfinite(value)) ingest_fail(row, column, "non-finite value '" + cell + "'");
  return value;
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ingestion, "cannot open '" + path.string() + "'");

  const auto& schema = options.schema;
  if (!schema.propensity && !options.constant_propensity) {
    throw Error(ErrorKind::ingestion, "either a propensity column or a constant propensity is required");
  }

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ingestion, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);

  auto column_index = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::ingestion, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t y_col = column_index(schema.outcome);
  const std::size_t d_col = column_index(schema.treatment);
  std::optional<std::size_t> e_col;
  if (schema.propensity) e_col = column_index(*schema.propensity);

  std::vector<std::size_t> x_cols;
  if (!schema.covariates.empty()) {
    for (const auto& name : schema.covariates) x_cols.push_back(column_index(name));
  } else {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (k != y_col && k != d_col && (!e_col || k != *e_col)) x_cols.push_back(k);
    }
  }

  std::vector<double> xs;
  std::vector<int> d;
  std::vector<double> y;
  std::vector<double> e;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::ingestion, "row " + std::to_string(row) + ": expected " +
                                            std::to_string(header.size()) + " cells, found " +
                                            std::to_string(cells.size()));
    }
    y.push_back(parse_cell(cells[y_col], row, header[y_col]));
    const double dv = parse_cell(cells[d_col], row, header[d_col]);
    if (dv != 0.0 && dv != 1.0) ingest_fail(row, header[d_col], "treatment must be 0 or 1, got '" + cells[d_col] + "'");
    d.push_back(static_cast<int>(dv));
    double ev = options.constant_propensity.value_or(0.0);
    if (e_col) ev = parse_cell(cells[*e_col], row, header[*e_col]);
    if (!options.overlap.admits(ev)) {
      throw Error(ErrorKind::overlap_violation,
                  "row " + std::to_string(row) + ", column '" +
                      (e_col ? header[*e_col] : std::string("<constant>")) + "': propensity " +
                      std::to_string(ev) + " outside [" + std::to_string(options.overlap.c) +
                      ", " + std::to_string(1.0 - options.overlap.c) + "]");
    }
    e.push_back(ev);
    for (std::size_t k : x_cols) xs.push_back(parse_cell(cells[k], row, header[k]));
  }
  if (d.empty()) throw Error(ErrorKind::ingestion, "file '" + path.string() + "' has zero data rows");

  const std::size_t n = d.size();
  Dataset data(CovariateMatrix(n, x_cols.size(), std::move(xs)), std::move(d), std::move(y),
               std::move(e), options.overlap);
  return options.standardize ? data.standardized() : data;
}

}  // namespace cramkit
