#include "cramkit/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace cramkit {

using nlohmann::json;

namespace {

std::string estimand_name(Estimand e) {
  return e == Estimand::policy_value ? "policy_value" : "value_difference";
}

}  // namespace

json cram_report(const CramResult& result, std::size_t n) {
  const std::size_t T = result.plan.batch_count;
  json report = {
      {"estimand", estimand_name(result.estimand)},
      {"estimate", result.delta_hat},
      {"variance", result.v_hat_sq},
      {"se", result.se},
      {"ci_lower", result.ci.lower},
      {"ci_upper", result.ci.upper},
      {"alpha", result.alpha},
      {"T", T},
      {"batch_sizes", result.plan.sizes},
      {"n", n},
      {"seed", result.plan.seed},
      {"per_step_deltas", result.per_step_deltas},
      {"q_t", result.q_t_series},
      {"treated_fraction_under_final_policy", result.treated_fraction},
      {"final_policy", result.final_policy.to_string()},
  };
  if (result.estimand == Estimand::policy_value) report["eta"] = result.eta;
  return report;
}

json split_report(const SplitResult& result, std::size_t n, std::uint64_t seed) {
  return {
      {"estimand", "value_difference"},
      {"method", "sample_split"},
      {"estimate", result.delta_hat},
      {"se", result.se},
      {"ci_lower", result.ci.lower},
      {"ci_upper", result.ci.upper},
      {"alpha", result.alpha},
      {"train_fraction", result.train_fraction},
      {"n_train", result.n_train},
      {"n_test", result.n_test},
      {"n", n},
      {"seed", seed},
      {"treated_fraction_under_final_policy", result.treated_fraction},
      {"final_policy", result.final_policy.to_string()},
  };
}

std::optional<ValueImprovement> value_improvement(const MCReport& report) {
  const MethodSummary* cram = nullptr;
  const MethodSummary* split = nullptr;
  for (const auto& m : report.methods) {
    if (m.method == Method::cram && !cram) cram = &m;
    if ((m.method == Method::split_80_20 || m.method == Method::split_60_40) && !split) split = &m;
  }
  if (!cram || !split) return std::nullopt;
  ValueImprovement out;
  out.raw = cram->value - split->value;
  out.ratio = split->value != 0.0 ? out.raw / std::abs(split->value) : 0.0;
  return out;
}

json mc_report(const MCReport& report) {
  json rows = json::array();
  for (const auto& m : report.methods) {
    rows.push_back({
        {"method", to_string(m.method)},
        {"value", m.value},
        {"bias", m.bias},
        {"abs_bias", m.abs_bias},
        {"bias_se", m.bias_se},
        {"mc_se", m.mc_se},
        {"mean_est_se", m.mean_est_se},
        {"coverage", m.coverage},
        {"replicates", m.replicates},
    });
  }
  json out = {{"rows", rows}};
  if (const auto imp = value_improvement(report)) {
    out["value_improvement"] = {{"raw", imp->raw}, {"ratio_to_abs_split", imp->ratio}};
  }
  return out;
}

json diagnostics_report(const StabilityDiagnostics& d) {
  return {
      {"q_t", d.q_t},
      {"t_power_q", d.t_power_q},
      {"flag", d.flag},
      {"delta", d.delta},
      {"t_min", d.t_min},
      {"bound", d.bound},
  };
}

std::string format_sig(double value, int digits) {
  std::ostringstream os;
  os.precision(digits);
  os << value;
  return os.str();
}

std::string mc_report_csv(const MCReport& report) {
  std::string out = "method,value,bias,abs_bias,mc_se,mean_est_se,coverage,replicates\n";
  for (const auto& m : report.methods) {
    out += to_string(m.method) + ',' + format_sig(m.value) + ',' + format_sig(m.bias) + ',' +
           format_sig(m.abs_bias) + ',' + format_sig(m.mc_se) + ',' + format_sig(m.mean_est_se) +
           ',' + format_sig(m.coverage) + ',' + std::to_string(m.replicates) + '\n';
  }
  return out;
}

std::string flat_csv(const json& report) {
  std::string header;
  std::string row;
  for (const auto& [key, value] : report.items()) {
    std::string cell;
    if (value.is_number_float()) {
      cell = format_sig(value.get<double>());
    } else if (value.is_number() || value.is_boolean()) {
      cell = value.dump();
    } else if (value.is_string()) {
      cell = value.get<std::string>();
      if (cell.find_first_of(",\"") != std::string::npos) {
        std::string quoted = "\"";
        for (char c : cell) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
        cell = quoted + '"';
      }
    } else {
      continue;
    }
    if (!header.empty()) {
      header += ',';
      row += ',';
    }
    header += key;
    row += cell;
  }
  return header + '\n' + row + '\n';
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move report into '" + path.string() + "': " + ec.message());
  }
}

}  // namespace cramkit
