#include "cramkit/cli.hpp"

#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "cramkit/cram.hpp"
#include "cramkit/report.hpp"
#include "cramkit/simulate.hpp"
#include "cramkit/stability.hpp"

namespace cramkit::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorKind::configuration, what);
}

template <typename T>
void take(const json& section, const char* key, T& target) {
  if (!section.contains(key)) return;
  try {
    target = section.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(std::string("config key '") + key + "' has the wrong type");
  }
}

template <typename T>
void take(const json& section, const char* key, std::optional<T>& target) {
  if (!section.contains(key)) return;
  if (section.at(key).is_null()) {
    target.reset();
    return;
  }
  T value{};
  take(section, key, value);
  target = value;
}

void reject_unknown(const json& section, const std::string& where,
                    std::initializer_list<const char*> known) {
  if (!section.is_object()) config_error("config section '" + where + "' must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : section.items()) {
    if (!allowed.count(key)) config_error("unknown config key '" + where + key + "'");
  }
}

}  // namespace

void apply_config_json(RunConfig& c, const json& doc) {
  reject_unknown(doc, "", {"input", "output", "format", "seed", "alpha", "batches", "debias",
                           "estimand", "learner", "lambda", "exempt_intercept", "baseline",
                           "threads", "metadata", "stable", "data", "split", "simulate",
                           "diagnose"});
  take(doc, "input", c.input);
  take(doc, "output", c.output);
  take(doc, "format", c.format);
  take(doc, "seed", c.seed);
  take(doc, "alpha", c.alpha);
  take(doc, "batches", c.batches);
  take(doc, "debias", c.debias);
  take(doc, "estimand", c.estimand);
  take(doc, "learner", c.learner);
  take(doc, "lambda", c.lambda);
  take(doc, "exempt_intercept", c.exempt_intercept);
  take(doc, "baseline", c.baseline);
  take(doc, "threads", c.threads);
  take(doc, "metadata", c.metadata);

  if (doc.contains("stable")) {
    const auto& s = doc.at("stable");
    reject_unknown(s, "stable.", {"enabled", "c", "delta"});
    take(s, "enabled", c.stable);
    take(s, "c", c.stable_c);
    take(s, "delta", c.stable_delta);
  }
  if (doc.contains("data")) {
    const auto& d = doc.at("data");
    reject_unknown(d, "data.", {"input", "outcome", "treatment", "propensity_column", "propensity",
                                "covariates", "standardize", "overlap_c", "burn_in", "burn_out"});
    take(d, "input", c.input);
    take(d, "outcome", c.outcome);
    take(d, "treatment", c.treatment);
    take(d, "propensity_column", c.propensity_column);
    take(d, "propensity", c.propensity);
    take(d, "covariates", c.covariates);
    take(d, "standardize", c.standardize);
    take(d, "overlap_c", c.overlap_c);
    take(d, "burn_in", c.burn_in);
    take(d, "burn_out", c.burn_out);
  }
  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    reject_unknown(s, "split.", {"train_fraction"});
    take(s, "train_fraction", c.train_fraction);
  }
  if (doc.contains("simulate")) {
    const auto& s = doc.at("simulate");
    reject_unknown(s, "simulate.", {"dgp", "p", "n", "noise_sd", "replicates", "methods", "n_oracle"});
    take(s, "dgp", c.dgp);
    take(s, "p", c.p);
    take(s, "n", c.n);
    take(s, "noise_sd", c.noise_sd);
    take(s, "replicates", c.replicates);
    take(s, "methods", c.methods);
    take(s, "n_oracle", c.n_oracle);
  }
  if (doc.contains("diagnose")) {
    const auto& s = doc.at("diagnose");
    reject_unknown(s, "diagnose.", {"delta", "t_min", "bound"});
    take(s, "delta", c.diag_delta);
    take(s, "t_min", c.t_min);
    take(s, "bound", c.bound);
  }
}

void RunConfig::validate() const {
  if (format != "json" && format != "csv") config_error("format must be json or csv");
  if (!(alpha > 0.0 && alpha < 1.0)) config_error("alpha must lie in (0, 1)");
  if (batches < 2) throw Error(ErrorKind::invalid_batching, "batch count must be at least 2");
  if (estimand != "difference" && estimand != "value") config_error("estimand must be difference or value");
  if (!(lambda >= 0.0)) config_error("lambda must be >= 0");
  if (stable_c && !(*stable_c > 0.0)) config_error("stable-c must be > 0");
  if (!(stable_delta > 0.0)) config_error("stable-delta must be > 0");
  if (!(overlap_c > 0.0 && overlap_c <= 0.5)) config_error("overlap constant must lie in (0, 0.5]");
  if (command == "cram" || command == "split" || command == "diagnose") {
    if (input.empty()) config_error("command '" + command + "' needs --input");
    if (!std::filesystem::exists(input)) {
      throw Error(ErrorKind::ingestion, "input file '" + input + "' does not exist");
    }
  }
  if (command == "split" && !(train_fraction > 0.0 && train_fraction < 1.0)) {
    config_error("train fraction must lie in (0, 1); the test set would be empty");
  }
  if (command == "simulate") {
    if (replicates < 1) config_error("replicates must be >= 1");
    if (methods.empty()) config_error("at least one method is required");
    for (const auto& m : methods) parse_method(m);
  }
}

Policy parse_baseline(const std::string& spec) {
  if (spec == "none") return Policy::constant(0.0);
  if (spec == "all") return Policy::constant(1.0);
  if (spec.rfind("const:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double p = std::stod(spec.substr(6), &used);
      if (used == spec.size() - 6) return Policy::constant(p);
    } catch (const std::logic_error&) {
    }
  }
  config_error("baseline must be none, all or const:P with P in [0, 1], got '" + spec + "'");
}

std::unique_ptr<Learner> make_learner(const RunConfig& c, const Policy& baseline) {
  std::unique_ptr<Learner> learner;
  if (c.learner == "slearner_ridge") {
    learner = make_slearner_ridge(c.lambda, c.exempt_intercept);
  } else if (c.learner == "mlearner_ridge") {
    learner = make_mlearner_ridge(c.lambda, c.exempt_intercept);
  } else if (c.learner == "constant") {
    learner = constant_learner(baseline);
  } else if (c.learner == "alternating") {
    learner = std::make_unique<AlternatingLearner>();
  } else {
    config_error("unknown learner '" + c.learner + "'");
  }
  if (c.stable) {
    auto params = StabilityParams::defaults_for(c.batches, c.stable_delta);
    if (c.stable_c) params.C = *c.stable_c;
    learner = stable_wrap(std::move(learner), params, baseline);
  }
  return learner;
}

namespace {

StabilityParams stability_params(const RunConfig& c) {
  auto params = StabilityParams::defaults_for(c.batches, c.stable_delta);
  if (c.stable_c) params.C = *c.stable_c;
  return params;
}

Dataset load_dataset(const RunConfig& c) {
  CsvOptions options;
  options.schema.outcome = c.outcome;
  options.schema.treatment = c.treatment;
  if (!c.propensity_column.empty()) options.schema.propensity = c.propensity_column;
  options.schema.covariates = c.covariates;
  options.constant_propensity = c.propensity;
  options.overlap.c = c.overlap_c;
  options.standardize = c.standardize;
  return read_dataset_csv(c.input, options);
}

CramOptions cram_options(const RunConfig& c) {
  CramOptions o;
  o.batch_count = c.batches;
  o.seed = c.seed;
  o.alpha = c.alpha;
  o.debias_final = c.debias;
  o.estimand = c.estimand == "value" ? Estimand::policy_value : Estimand::value_difference;
  o.burn_in_min = c.burn_in;
  o.burn_out_min = c.burn_out;
  return o;
}

json run_settings(const RunConfig& c, const Learner& learner) {
  json s = {{"learner", learner.name()}, {"lambda", c.lambda}, {"baseline", c.baseline},
            {"debias_final", c.debias}};
  if (c.stable) {
    const auto params = stability_params(c);
    s["stability"] = {{"C", params.C}, {"delta", params.delta}};
  }
  return s;
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string render(const RunConfig& c, json report, const std::string& csv_override = {}) {
  if (c.format == "csv") return csv_override.empty() ? flat_csv(report) : csv_override;
  if (c.metadata) report["metadata"] = {{"tool", "cramkit"}, {"version", kVersion}, {"generated_at", now_utc()}};
  return report.dump(2) + "\n";
}

json command_cram(const RunConfig& c) {
  const Dataset data = load_dataset(c);
  const Policy baseline = parse_baseline(c.baseline);
  auto learner = make_learner(c, baseline);
  const auto result = cram_run(data, *learner, baseline, cram_options(c));
  json report = cram_report(result, data.size());
  report["settings"] = run_settings(c, *learner);
  if (c.stable) {
    const auto params = stability_params(c);
    report["stability"] = diagnostics_report(
        diagnose_stability(result.policy_sequence, data.covariates(), params.delta, 1, params.C));
  }
  return report;
}

json command_split(const RunConfig& c) {
  const Dataset data = load_dataset(c);
  const Policy baseline = parse_baseline(c.baseline);
  auto learner = make_learner(c, baseline);
  const auto result = sample_split_run(data, *learner, baseline, c.train_fraction, c.seed, c.alpha);
  json report = split_report(result, data.size(), c.seed);
  report["settings"] = run_settings(c, *learner);
  return report;
}

MCReport command_simulate(const RunConfig& c) {
  MCConfig mc;
  if (c.dgp == "linear") {
    mc.dgp = DGPSpec::linear_cate(c.p, c.noise_sd);
  } else if (c.dgp == "polynomial") {
    mc.dgp = DGPSpec::polynomial_cate(c.p, c.noise_sd);
  } else if (c.dgp == "null") {
    mc.dgp = DGPSpec::null_cate(c.p, c.noise_sd);
  } else {
    config_error("unknown dgp '" + c.dgp + "'");
  }
  if (c.propensity) mc.dgp.propensity = *c.propensity;
  mc.dgp.overlap.c = c.overlap_c;
  mc.n = c.n;
  mc.batch_count = c.batches;
  mc.baseline = parse_baseline(c.baseline);
  mc.learner = make_learner(c, mc.baseline);
  mc.replicates = c.replicates;
  mc.base_seed = c.seed;
  mc.methods.clear();
  for (const auto& m : c.methods) mc.methods.push_back(parse_method(m));
  mc.alpha = c.alpha;
  mc.n_oracle = c.n_oracle;
  mc.threads = c.threads;
  return run_monte_carlo(mc);
}

json command_diagnose(const RunConfig& c) {
  const Dataset data = load_dataset(c);
  const Policy baseline = parse_baseline(c.baseline);
  auto learner = make_learner(c, baseline);
  const auto result = cram_run(data, *learner, baseline, cram_options(c));
  const auto params = stability_params(c);
  const double delta = c.diag_delta.value_or(params.delta);
  const double bound = c.bound.value_or(params.C);
  json report = diagnostics_report(
      diagnose_stability(result.policy_sequence, data.covariates(), delta, c.t_min, bound));
  report["T"] = c.batches;
  report["n"] = data.size();
  report["seed"] = c.seed;
  report["settings"] = run_settings(c, *learner);
  return report;
}

std::optional<std::string> find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return std::string(argv[i + 1]);
    if (std::strncmp(argv[i], "--config=", 9) == 0) return std::string(argv[i] + 9);
  }
  return std::nullopt;
}

void add_shared_flags(CLI::App& app, RunConfig& c) {
  app.add_option("--config", "Config file (JSON); flags override its values");
  app.add_option("--input", c.input, "Input CSV dataset");
  app.add_option("--output", c.output, "Report path (stdout when omitted)");
  app.add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("--alpha", c.alpha, "One minus the confidence level");
  app.add_option("--batches", c.batches, "Number of batches T");
  app.add_flag("--debias", c.debias, "Keep the last batch out of learning");
  app.add_option("--learner", c.learner, "slearner_ridge | mlearner_ridge | constant | alternating");
  app.add_option("--lambda", c.lambda, "Ridge penalty");
  app.add_flag("--exempt-intercept", c.exempt_intercept, "Do not penalise the ridge intercept");
  app.add_option("--baseline", c.baseline, "none | all | const:P");
  app.add_flag("--stable", c.stable, "Wrap the learner in the stabilising mixture");
  app.add_option("--stable-c", c.stable_c, "Stabiliser constant C");
  app.add_option("--stable-delta", c.stable_delta, "Stabiliser exponent delta");
  app.add_option("--threads", c.threads, "Worker threads (0 = all cores)")->envname("CRAMKIT_THREADS");
  app.add_flag("!--no-metadata", c.metadata, "Omit the timestamped metadata block");
  app.add_option("--outcome-col", c.outcome, "Outcome column name");
  app.add_option("--treatment-col", c.treatment, "Treatment column name");
  app.add_option("--propensity-col", c.propensity_column, "Propensity column name");
  app.add_option("--propensity", c.propensity, "Constant known propensity");
  app.add_option("--covariates", c.covariates, "Covariate columns (default: all others)")->delimiter(',');
  app.add_flag("--standardize", c.standardize, "Standardise covariate columns");
  app.add_option("--overlap-c", c.overlap_c, "Overlap constant c");
  app.add_option("--burn-in", c.burn_in, "Minimum size of the first batch");
  app.add_option("--burn-out", c.burn_out, "Minimum size of the last batch");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  std::string stage = "config";
  try {
    if (const auto path = find_config_path(argc, argv)) {
      std::ifstream in(*path);
      if (!in) config_error("cannot open config file '" + *path + "'");
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        config_error("config file '" + *path + "' is not valid JSON: " + e.what());
      }
      apply_config_json(config, doc);
    }

    CLI::App app{"cramkit: simultaneous policy learning and evaluation"};
    app.require_subcommand(1);
    auto* cram = app.add_subcommand("cram", "Learn and evaluate a policy on one dataset");
    auto* split = app.add_subcommand("split", "Sample-splitting baseline");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on a synthetic DGP");
    auto* diagnose = app.add_subcommand("diagnose", "Policy stabilisation diagnostics");
    for (auto* sub : {cram, split, simulate, diagnose}) add_shared_flags(*sub, config);
    cram->add_option("--estimand", config.estimand, "difference | value");
    split->add_option("--train-fraction", config.train_fraction, "Share of rows used for learning");
    simulate->add_option("--dgp", config.dgp, "linear | polynomial | null");
    simulate->add_option("--p", config.p, "Covariate dimension");
    simulate->add_option("--n", config.n, "Sample size per replicate");
    simulate->add_option("--noise-sd", config.noise_sd, "Outcome noise standard deviation");
    simulate->add_option("--replicates", config.replicates, "Monte Carlo replicates");
    simulate->add_option("--methods", config.methods, "cram,cram_debiased,split_80_20,split_60_40")
        ->delimiter(',');
    simulate->add_option("--n-oracle", config.n_oracle, "Oracle covariate draws");
    diagnose->add_option("--diag-delta", config.diag_delta, "Exponent delta of the diagnostic");
    diagnose->add_option("--t-min", config.t_min, "First step checked against the bound");
    diagnose->add_option("--bound", config.bound, "Bound K on t^(1+delta) Q_t");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err);
    }
    config.command = app.get_subcommands().front()->get_name();
    config.validate();

    stage = "run";
    std::string text;
    if (config.command == "cram") {
      text = render(config, command_cram(config));
    } else if (config.command == "split") {
      text = render(config, command_split(config));
    } else if (config.command == "simulate") {
      const auto report = command_simulate(config);
      json doc = mc_report(report);
      doc["config"] = {{"dgp", config.dgp}, {"p", config.p}, {"n", config.n},
                       {"T", config.batches}, {"learner", config.learner},
                       {"replicates", config.replicates}, {"seed", config.seed},
                       {"alpha", config.alpha}, {"n_oracle", config.n_oracle}};
      text = render(config, doc, mc_report_csv(report));
    } else {
      text = render(config, command_diagnose(config));
    }

    stage = "write";
    if (config.output.empty()) {
      out << text;
    } else {
      write_atomically(config.output, text);
    }
    return 0;
  } catch (const Error& e) {
    err << json{{"error", {{"stage", stage}, {"kind", to_string(e.kind())}, {"message", e.what()}}}}.dump()
        << "\n";
  } catch (const std::exception& e) {
    err << json{{"error", {{"stage", stage}, {"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
  }
  return 1;
}

}  // namespace cramkit::cli
