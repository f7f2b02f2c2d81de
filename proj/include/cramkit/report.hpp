#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "cramkit/cram.hpp"
#include "cramkit/simulate.hpp"
#include "cramkit/stability.hpp"

namespace cramkit {

/// Structured report of one crammed run. Numbers keep full double precision.
nlohmann::json cram_report(const CramResult& result, std::size_t n);
nlohmann::json split_report(const SplitResult& result, std::size_t n, std::uint64_t seed);
nlohmann::json mc_report(const MCReport& report);
nlohmann::json diagnostics_report(const StabilityDiagnostics& diagnostics);

/// Flat table, one row per method:
/// method,value,bias,abs_bias,mc_se,mean_est_se,coverage,replicates
std::string mc_report_csv(const MCReport& report);

/// Header row plus one value row for every scalar field of a JSON report.
std::string flat_csv(const nlohmann::json& report);

/// Value improvement of cram over a split method, raw and relative to |split|.
struct ValueImprovement {
  double raw = 0.0;
  double ratio = 0.0;
};
std::optional<ValueImprovement> value_improvement(const MCReport& report);

/// Writes through a temporary sibling file and renames it into place.
void write_atomically(const std::filesystem::path& path, const std::string& contents);

std::string format_sig(double value, int digits = 6);

}  // namespace cramkit
