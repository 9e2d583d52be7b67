// epm: rule checking, scenario generation, pipeline runs and latency bench.
//
// Exit codes: 0 success, 1 usage, 2 input error, 3 invariant failure.

#include "epm/engine.hpp"
#include "epm/fusion.hpp"
#include "epm/harness.hpp"
#include "epm/rule.hpp"
#include "epm/scenario.hpp"
#include "epm/wire.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitInvariant = 3;

struct InputError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct InvariantError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct GlobalOptions
{
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> lateness_ms;
  std::optional<double> tau;
};

std::vector<epm::Rule> load_rules(const std::string & path)
{
  if (path.empty()) {
    return epm::builtin_rules();
  }
  return epm::load_rule_file(path);
}

std::ofstream open_out(const std::string & path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write '" + path + "'");
  }
  return out;
}

std::ifstream open_in(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open '" + path + "'");
  }
  return in;
}

// Writes to `path`, or stdout for "" and "-".
template<typename Fn>
void with_output(const std::string & path, Fn fn)
{
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  auto out = open_out(path);
  fn(out);
}

epm::PipelineConfig pipeline_config(const GlobalOptions & global, const std::string & trust_path,
                                    const std::string & priorities_path)
{
  epm::PipelineConfig config;
  if (!trust_path.empty()) {
    config.trust = epm::load_trust_registry(trust_path);
  }
  if (!priorities_path.empty()) {
    config.priorities = epm::load_priority_config(priorities_path);
  }
  if (global.lateness_ms) {
    if (*global.lateness_ms < 0) {
      throw InputError("--lateness must be non-negative");
    }
    config.engine.lateness_ms = *global.lateness_ms;
  }
  if (global.tau) {
    if (!(*global.tau >= 0.0 && *global.tau <= 1.0)) {
      throw InputError("--tau must lie in [0, 1]");
    }
    config.trust.acceptance_threshold = *global.tau;
  }
  return config;
}

int cmd_check(const std::string & path)
{
  const auto rules = epm::load_rule_file(path);
  std::size_t errors = 0;
  for (const auto & rule : rules) {
    const auto diagnostics = epm::validate_rule(rule);
    for (const auto & d : diagnostics) {
      const bool is_error = d.severity == epm::Diagnostic::Severity::Error;
      errors += is_error ? 1 : 0;
      std::cerr << path << ": " << rule.rule_id << ": " << (is_error ? "error" : "warning") << ": " << d.message
                << '\n';
    }
    std::cout << rule.rule_id << '\t' << rule.complex_type << '\t' << (epm::has_errors(diagnostics) ? "invalid" : "ok")
              << '\n';
  }
  return errors == 0 ? kExitOk : kExitInput;
}

int cmd_gen(const GlobalOptions & global, const std::string & spec_path, const std::string & rules_path,
            const std::string & stream_path, const std::string & manifest_path)
{
  auto spec = epm::load_scenario_spec(spec_path);
  if (global.seed) {
    spec.seed = *global.seed;
  }
  std::string resolved_rules = rules_path;
  if (resolved_rules.empty() && spec.rules_path) {
    const std::filesystem::path p(*spec.rules_path);
    resolved_rules = p.is_absolute() ? p.string() : (std::filesystem::path(spec_path).parent_path() / p).string();
  }
  const auto rules = load_rules(resolved_rules);
  const auto scenario = epm::generate(spec, rules);

  if (spec.noise.vocabulary == epm::NoiseVocabulary::Disjoint) {
    std::set<std::string> planted;
    for (const auto & g : scenario.groups) {
      for (const auto & e : g.events) {
        planted.insert(e.id);
      }
    }
    std::vector<epm::MicroEvent> noise;
    for (const auto & e : scenario.events) {
      if (!planted.contains(e.id)) {
        noise.push_back(e);
      }
    }
    if (!epm::noise_is_pure(noise, rules)) {
      throw InvariantError("noise event satisfies a binding predicate");
    }
  }
  with_output(stream_path, [&](std::ostream & out) { epm::write_micro_events(out, scenario.events); });
  if (!manifest_path.empty()) {
    auto out = open_out(manifest_path);
    epm::write_manifest(out, scenario.manifest);
  }
  std::cerr << "events " << scenario.events.size() << " (noise " << scenario.noise_events << "), groups "
            << scenario.groups.size() << ", expected matches " << scenario.manifest.size() << '\n';
  return kExitOk;
}

std::vector<epm::RawRecord> read_records(const std::string & path)
{
  auto in = open_in(path);
  std::vector<epm::RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line.front() == '#') {
      continue;
    }
    try {
      records.push_back(epm::decode_record(line));
    } catch (const epm::WireError & err) {
      throw InputError(path + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return records;
}

int cmd_run(const GlobalOptions & global, const std::string & stream_path, const std::string & rules_path,
            const std::string & trust_path, const std::string & priorities_path, const std::string & report_path,
            const std::string & fingerprints_path, const std::string & manifest_path, const std::string & secure_path)
{
  const auto rules = load_rules(rules_path);
  const auto config = pipeline_config(global, trust_path, priorities_path);
  const auto records = read_records(stream_path);

  auto pipeline = epm::make_pipeline(rules, config);
  epm::Manifest correlated;
  pipeline.on_complex_event([&](const epm::ComplexEvent & ce) {
    correlated.push_back({ce.rule_id, epm::make_fingerprint(ce.constituents)});
  });
  std::vector<epm::SecureEvent> secure;
  const auto start = std::chrono::steady_clock::now();
  for (const auto & r : records) {
    auto out = pipeline.process(r);
    secure.insert(secure.end(), std::make_move_iterator(out.begin()), std::make_move_iterator(out.end()));
  }
  const double elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  correlated = epm::normalize(std::move(correlated));

  const auto & c = pipeline.counters();
  nlohmann::ordered_json report;
  report["inputs"] = c.inputs;
  report["accepted_inputs"] = c.accepted_inputs;
  report["syntactic_rejections"] = c.syntactic_rejections;
  report["engine_ingested"] = c.engine_ingested;
  report["complex_events"] = c.complex_events;
  report["secure_events"] = c.secure_events;
  report["trust_rejections"] = c.trust_rejections;
  report["dropped_late"] = pipeline.engine().dropped_late();
  report["conserved"] = c.conserved();
  report["throughput_eps"] = elapsed_s > 0.0 ? static_cast<double>(records.size()) / elapsed_s : 0.0;
  if (!manifest_path.empty()) {
    auto in = open_in(manifest_path);
    const auto expected = epm::read_manifest(in);
    epm::RunReport scored;
    for (const auto & s : secure) {
      scored.detected.push_back({s.inner.rule_id, epm::make_fingerprint(s.inner.constituents)});
    }
    epm::score(scored, expected);
    report["n_expected"] = scored.n_expected;
    report["n_detected"] = scored.n_detected;
    report["n_false_positive"] = scored.n_false_positive;
    report["precision"] = scored.precision;
    report["recall"] = scored.recall;
  }
  nlohmann::ordered_json rejections = nlohmann::ordered_json::array();
  for (const auto & r : pipeline.rejections()) {
    nlohmann::ordered_json j;
    j["stage"] = std::string(epm::to_string(r.stage));
    j["id"] = r.offending_id;
    j["reason"] = r.reason;
    if (r.trust) {
      j["trust"] = *r.trust;
    }
    rejections.push_back(std::move(j));
  }
  report["rejections"] = std::move(rejections);

  with_output(report_path, [&](std::ostream & out) { out << report.dump(2) << '\n'; });
  if (!fingerprints_path.empty()) {
    with_output(fingerprints_path, [&](std::ostream & out) { epm::write_manifest(out, correlated); });
  }
  if (!secure_path.empty()) {
    with_output(secure_path, [&](std::ostream & out) {
      for (const auto & s : secure) {
        out << epm::encode_secure_event(s) << '\n';
      }
    });
  }
  if (!c.conserved()) {
    throw InvariantError("fusion counters are not conserved");
  }
  return kExitOk;
}

int cmd_oracle(const std::string & stream_path, const std::string & rules_path, const std::string & out_path)
{
  const auto rules = load_rules(rules_path);
  auto in = open_in(stream_path);
  const auto events = epm::read_micro_events(in);
  const auto manifest = epm::oracle_manifest(events, rules);
  with_output(out_path, [&](std::ostream & out) { epm::write_manifest(out, manifest); });
  return kExitOk;
}

std::vector<double> parse_rates(const std::string & text)
{
  std::vector<double> rates;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto v = epm::parse_double(item);
    if (!v || !(*v >= 0.0)) {
      throw InputError("bad noise rate '" + item + "'");
    }
    rates.push_back(*v);
  }
  if (rates.empty()) {
    throw InputError("--rates is empty");
  }
  return rates;
}

struct BenchOptions
{
  std::string rates{"0,100,200,400,800"};
  std::size_t reps{5};
  std::string out;
  std::string summary;
  std::string spec;
  std::string rules;
  std::string trust;
  std::string priorities;
  double duration_s{20.0};
  std::size_t groups{20};
  std::string vocabulary{"adversarial"};
  bool max_speed{false};
};

int cmd_bench(const GlobalOptions & global, const BenchOptions & opt)
{
  const auto rules = load_rules(opt.rules);
  epm::LatencyConfig config;
  if (!opt.spec.empty()) {
    config.base = epm::load_scenario_spec(opt.spec);
  } else {
    config.base.duration_s = opt.duration_s;
    config.base.round_robin_groups = opt.groups;
    const auto vocabulary = epm::parse_noise_vocabulary(opt.vocabulary);
    if (!vocabulary) {
      throw InputError("unknown vocabulary '" + opt.vocabulary + "'");
    }
    config.base.noise.vocabulary = *vocabulary;
  }
  if (global.seed) {
    config.base.seed = *global.seed;
  }
  config.rates = parse_rates(opt.rates);
  config.repetitions = opt.reps;
  config.pipeline = pipeline_config(global, opt.trust, opt.priorities);
  config.on_report = [](const epm::RunReport & r) {
    std::cerr << "rate " << epm::format_double(r.noise_rate) << " rep " << r.repetition << ": mean "
              << epm::format_double(r.mean_delay_ms) << " ms, p99 " << epm::format_double(r.p99_delay_ms)
              << " ms, recall " << epm::format_double(r.recall) << (r.pacing_overrun ? " OVERRUN" : "") << '\n';
  };

  std::vector<epm::RunReport> reports;
  if (opt.max_speed) {
    for (const double rate : config.rates) {
      for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
        auto spec = config.base;
        spec.noise.rate_per_s = rate;
        spec.seed = config.base.seed + rep;
        auto report = epm::run_accuracy(epm::generate(spec, rules), rules, config.pipeline);
        report.noise_rate = rate;
        report.repetition = rep;
        config.on_report(report);
        reports.push_back(std::move(report));
      }
    }
  } else {
    reports = epm::run_latency(config, rules);
  }

  with_output(opt.out, [&](std::ostream & out) { epm::write_latency_csv(out, reports); });
  const auto summary = epm::summarize(reports);
  if (!opt.summary.empty()) {
    with_output(opt.summary, [&](std::ostream & out) { epm::write_summary_csv(out, summary); });
  }
  if (summary.size() >= 2) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto & s : summary) {
      xs.push_back(s.noise_rate);
      ys.push_back(s.mean_delay_ms);
    }
    const auto fit = epm::fit_line(xs, ys);
    std::cerr << "fit: slope " << epm::format_double(fit.slope) << " ms per event/s, R^2 "
              << epm::format_double(fit.r_squared) << '\n';
  }
  for (const auto & r : reports) {
    if (!r.counters.conserved()) {
      throw InvariantError("fusion counters are not conserved");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Event processing and fusion harness"};
  app.require_subcommand(1);

  GlobalOptions global;
  std::uint64_t seed = 0;
  std::int64_t lateness = 0;
  double tau = 0.0;
  auto * seed_opt = app.add_option("--seed", seed, "Scenario seed override");
  auto * lateness_opt = app.add_option("--lateness", lateness, "Out-of-order slack in milliseconds");
  auto * tau_opt = app.add_option("--tau", tau, "Trust acceptance threshold");
  app.fallthrough();

  std::string check_path;
  auto * check = app.add_subcommand("check", "Parse and validate a rule file");
  check->add_option("ruleset", check_path)->required();

  std::string gen_spec;
  std::string gen_rules;
  std::string gen_out;
  std::string gen_manifest;
  auto * gen = app.add_subcommand("gen", "Generate a scenario stream and its manifest");
  gen->add_option("spec", gen_spec)->required();
  gen->add_option("--rules", gen_rules, "Rule file (default: spec 'rules' key, else built-in rules)");
  gen->add_option("-o,--output", gen_out, "Stream file (default stdout)");
  gen->add_option("-m,--manifest", gen_manifest, "Manifest file");

  std::string run_stream;
  std::string run_rules;
  std::string run_trust;
  std::string run_priorities;
  std::string run_report;
  std::string run_fingerprints;
  std::string run_manifest;
  std::string run_secure;
  auto * run = app.add_subcommand("run", "Run a stream through the fusion pipeline");
  run->add_option("stream", run_stream)->required();
  run->add_option("--rules", run_rules, "Rule file (default: built-in rules)");
  run->add_option("--trust", run_trust, "Trust registry");
  run->add_option("--priorities", run_priorities, "Keyword priorities");
  run->add_option("-o,--output", run_report, "JSON report (default stdout)");
  run->add_option("--fingerprints", run_fingerprints, "Correlated fingerprints in manifest format");
  run->add_option("--manifest", run_manifest, "Expected manifest for precision and recall");
  run->add_option("--secure", run_secure, "Secure events in record format");

  BenchOptions bench_opt;
  auto * bench = app.add_subcommand("bench", "Mean fusion delay against noise rate");
  bench->add_option("--rates", bench_opt.rates, "Comma-separated noise rates (events/s)")->capture_default_str();
  bench->add_option("--reps", bench_opt.reps, "Repetitions per rate")->capture_default_str()->check(
    CLI::PositiveNumber);
  bench->add_option("-o,--output", bench_opt.out, "Per-run CSV (default stdout)");
  bench->add_option("--summary", bench_opt.summary, "Per-rate summary CSV");
  bench->add_option("--spec", bench_opt.spec, "Scenario template (overrides --duration/--groups/--vocabulary)");
  bench->add_option("--rules", bench_opt.rules, "Rule file (default: built-in rules)");
  bench->add_option("--trust", bench_opt.trust, "Trust registry");
  bench->add_option("--priorities", bench_opt.priorities, "Keyword priorities");
  bench->add_option("--duration", bench_opt.duration_s, "Run duration in seconds")->capture_default_str()->check(
    CLI::PositiveNumber);
  bench->add_option("--groups", bench_opt.groups, "Planted groups per run")->capture_default_str();
  bench->add_option("--vocabulary", bench_opt.vocabulary, "Noise vocabulary")
    ->capture_default_str()
    ->check(CLI::IsMember({"disjoint", "adversarial"}));
  bench->add_flag("--max-speed", bench_opt.max_speed, "Skip real-time pacing (no delays measured)");

  std::string oracle_stream;
  std::string oracle_rules;
  std::string oracle_out;
  auto * oracle = app.add_subcommand("oracle", "Brute-force expected matches for a stream");
  oracle->add_option("stream", oracle_stream)->required();
  oracle->add_option("--rules", oracle_rules, "Rule file (default: built-in rules)");
  oracle->add_option("-o,--output", oracle_out, "Manifest file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (seed_opt->count() > 0) {
    global.seed = seed;
  }
  if (lateness_opt->count() > 0) {
    global.lateness_ms = lateness;
  }
  if (tau_opt->count() > 0) {
    global.tau = tau;
  }

  try {
    if (*check) {
      return cmd_check(check_path);
    }
    if (*gen) {
      return cmd_gen(global, gen_spec, gen_rules, gen_out, gen_manifest);
    }
    if (*run) {
      return cmd_run(global, run_stream, run_rules, run_trust, run_priorities, run_report, run_fingerprints,
                     run_manifest, run_secure);
    }
    if (*bench) {
      return cmd_bench(global, bench_opt);
    }
    if (*oracle) {
      return cmd_oracle(oracle_stream, oracle_rules, oracle_out);
    }
  } catch (const InvariantError & err) {
    std::cerr << "epm: invariant violated: " << err.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception & err) {
    std::cerr << "epm: " << err.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}
