// Acceptance suite: one PASS/FAIL line per criterion.
//
//   epm_acceptance            run all criteria
//   epm_acceptance 1 3 7      run a subset

#include "epm/harness.hpp"
#include "epm/rule.hpp"
#include "epm/scenario.hpp"
#include "epm/wire.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace
{

using Clock = std::chrono::steady_clock;

struct Outcome
{
  bool pass{false};
  std::string detail;
};

// Every fusion run in this binary reports its counters here.
struct ConservationAudit
{
  std::size_t runs{0};
  std::size_t violations{0};
  std::size_t syntactic_rejections{0};
  std::size_t trust_rejections{0};

  void record(const epm::FusionCounters & c)
  {
    ++runs;
    violations += c.conserved() ? 0 : 1;
    syntactic_rejections += c.syntactic_rejections;
    trust_rejections += c.trust_rejections;
  }
};

ConservationAudit g_audit;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const std::vector<epm::Rule> & corpus()
{
  static const auto rules = epm::builtin_rules();
  return rules;
}

Outcome corpus_parse()
{
  const auto start = Clock::now();
  const auto rules = epm::parse_rule_file(epm::builtin_rules_text());
  std::set<std::string> types;
  std::size_t errors = 0;
  std::size_t round_trips = 0;
  for (const auto & r : rules) {
    types.insert(r.complex_type);
    errors += epm::has_errors(epm::validate_rule(r)) ? 1 : 0;
    const auto text = epm::pretty_print(r);
    const auto back = epm::parse_rule(text, r.complex_type, r.rule_id);
    round_trips += epm::structurally_equal(r, back) && epm::pretty_print(back) == text ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = rules.size() == 5 && types.size() == 5 && errors == 0 && round_trips == 5 && elapsed < 1.0;
  o.detail = std::to_string(rules.size()) + " rules, " + std::to_string(errors) + " with errors, " +
             std::to_string(round_trips) + " round-trips, " + fmt(elapsed * 1000) + " ms";
  return o;
}

epm::ScenarioSpec accuracy_spec(std::uint64_t seed, double rate, epm::NoiseVocabulary vocabulary)
{
  epm::ScenarioSpec spec;
  spec.seed = seed;
  spec.duration_s = 60;
  spec.round_robin_groups = 20;  // four of each complex type
  spec.noise.rate_per_s = rate;
  spec.noise.vocabulary = vocabulary;
  return spec;
}

std::vector<epm::MicroEvent> noise_of(const epm::Scenario & s)
{
  std::set<std::string> planted;
  for (const auto & g : s.groups) {
    for (const auto & e : g.events) {
      planted.insert(e.id);
    }
  }
  std::vector<epm::MicroEvent> noise;
  for (const auto & e : s.events) {
    if (!planted.contains(e.id)) {
      noise.push_back(e);
    }
  }
  return noise;
}

Outcome accuracy()
{
  std::size_t runs = 0;
  std::size_t perfect = 0;
  std::size_t impure = 0;
  std::size_t expected = 0;
  std::size_t events = 0;
  std::string first_failure;
  for (const double rate : {0.0, 50.0, 200.0, 1000.0}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto scenario = epm::generate(accuracy_spec(seed, rate, epm::NoiseVocabulary::Disjoint), corpus());
      std::set<std::string> planted_types;
      for (const auto & g : scenario.groups) {
        planted_types.insert(g.target_rule_id);
      }
      impure += epm::noise_is_pure(noise_of(scenario), corpus()) ? 0 : 1;
      const auto report = epm::run_accuracy(scenario, corpus());
      g_audit.record(report.counters);
      ++runs;
      expected += report.n_expected;
      events += report.n_events;
      const bool ok = report.precision == 1.0 && report.recall == 1.0 && scenario.groups.size() >= 20 &&
                      planted_types.size() == 5;
      perfect += ok ? 1 : 0;
      if (!ok && first_failure.empty()) {
        first_failure = "; first failure rate " + fmt(rate) + " seed " + std::to_string(seed) + ": precision " +
                        fmt(report.precision) + " recall " + fmt(report.recall);
      }
    }
  }
  Outcome o;
  o.pass = perfect == runs && impure == 0;
  o.detail = std::to_string(perfect) + "/" + std::to_string(runs) + " runs exact, " + std::to_string(expected) +
             " expected matches over " + std::to_string(events) + " events, " + std::to_string(impure) +
             " impure noise streams" + first_failure;
  return o;
}

Outcome oracle_equivalence()
{
  const auto rules = epm::test::stress_rules();
  std::mt19937_64 rng(0x5eed);
  const std::int64_t lateness = epm::EngineConfig{}.lateness_ms;
  std::size_t equal = 0;
  std::size_t matches = 0;
  std::size_t events = 0;
  std::size_t max_events = 0;
  const int traces = 200;
  for (int i = 0; i < traces; ++i) {
    const auto trace = epm::test::random_trace(rng, rules, 500);
    const auto expected = epm::oracle_manifest(trace, rules);
    const auto arrivals = epm::test::arrival_order(trace, lateness, rng);
    const auto streamed = epm::test::stream_manifest(arrivals, rules);
    equal += streamed == expected ? 1 : 0;
    matches += expected.size();
    events += trace.size();
    max_events = std::max(max_events, trace.size());
  }
  Outcome o;
  o.pass = equal == static_cast<std::size_t>(traces) && max_events <= 500;
  o.detail = std::to_string(equal) + "/" + std::to_string(traces) + " traces equal, " + std::to_string(events) +
             " events (max " + std::to_string(max_events) + "), " + std::to_string(matches) + " matches";
  return o;
}

Outcome latency_trend()
{
  epm::LatencyConfig config;
  config.base.duration_s = 10;
  config.base.round_robin_groups = 20;
  config.base.noise.vocabulary = epm::NoiseVocabulary::Adversarial;
  config.base.seed = 100;
  config.rates = {0, 100, 200, 400, 800};
  config.repetitions = 5;
  config.on_report = [](const epm::RunReport & r) {
    std::cout << "  rate " << r.noise_rate << " rep " << r.repetition << ": mean " << fmt(r.mean_delay_ms)
              << " ms, p99 " << fmt(r.p99_delay_ms) << " ms, recall " << r.recall
              << (r.pacing_overrun ? ", pacing overrun" : "") << std::endl;
  };
  const auto reports = epm::run_latency(config, corpus());
  for (const auto & r : reports) {
    g_audit.record(r.counters);
  }
  const auto summary = epm::summarize(reports);

  std::ostringstream csv;
  epm::write_summary_csv(csv, summary);
  std::cout << csv.str();

  std::vector<double> xs;
  std::vector<double> ys;
  bool non_decreasing = true;
  double min_recall = 1.0;
  bool overrun = false;
  for (std::size_t i = 0; i < summary.size(); ++i) {
    xs.push_back(summary[i].noise_rate);
    ys.push_back(summary[i].mean_delay_ms);
    if (i > 0 && summary[i].mean_delay_ms < summary[i - 1].mean_delay_ms) {
      non_decreasing = false;
    }
    min_recall = std::min(min_recall, summary[i].min_recall);
    overrun = overrun || summary[i].any_overrun;
  }
  const auto fit = epm::fit_line(xs, ys);
  Outcome o;
  o.pass = reports.size() == 25 && non_decreasing && fit.r_squared >= 0.8 && min_recall == 1.0;
  o.detail = std::string(non_decreasing ? "non-decreasing" : "NOT monotone") + ", R^2 " + fmt(fit.r_squared) +
             ", slope " + fmt(fit.slope * 1000) + " us per event/s, min recall " + fmt(min_recall) +
             (overrun ? ", pacing overrun flagged" : "");
  return o;
}

Outcome noise_tolerance()
{
  std::size_t runs = 0;
  std::size_t false_positives = 0;
  std::size_t missed = 0;
  std::size_t noise_matches = 0;
  for (const auto vocabulary : {epm::NoiseVocabulary::Disjoint, epm::NoiseVocabulary::Adversarial}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto quiet_spec = accuracy_spec(seed, 0, vocabulary);
      if (vocabulary == epm::NoiseVocabulary::Adversarial) {
        quiet_spec.duration_s = 20;  // decoys join against each other in every window
      }
      auto noisy_spec = quiet_spec;
      noisy_spec.noise.rate_per_s = 1000;
      const auto quiet = epm::generate(quiet_spec, corpus());
      const auto noisy = epm::generate(noisy_spec, corpus());
      for (const auto * s : {&quiet, &noisy}) {
        const auto report = epm::run_accuracy(*s, corpus());
        g_audit.record(report.counters);
        ++runs;
        false_positives += report.n_false_positive;
        missed += report.n_expected - report.n_true_positive;
      }
      // Noise only lengthens the stream; it must not add expected matches.
      noise_matches += noisy.manifest == quiet.manifest ? 0 : 1;
    }
  }
  Outcome o;
  o.pass = false_positives == 0 && missed == 0 && noise_matches == 0;
  o.detail = std::to_string(runs) + " runs at rates 0 and 1000, " + std::to_string(false_positives) +
             " false positives, " + std::to_string(missed) + " missed, " + std::to_string(noise_matches) +
             " manifests changed by noise";
  return o;
}

Outcome conservation()
{
  // A run that exercises both rejection paths.
  std::mt19937_64 rng(66);
  epm::PipelineConfig config;
  for (int i = 0; i < 64; ++i) {
    config.trust.set("noise-" + std::string(i < 10 ? "0" : "") + std::to_string(i), epm::test::uniform(rng, 0, 1));
  }
  config.trust.default_weight = 0.3;
  epm::ScenarioSpec spec = accuracy_spec(5, 100, epm::NoiseVocabulary::Adversarial);
  spec.round_robin_groups = 60;
  const auto scenario = epm::generate(spec, corpus());
  auto pipeline = epm::make_pipeline(corpus(), config);
  for (std::size_t i = 0; i < scenario.events.size(); ++i) {
    auto record = epm::to_record(scenario.events[i]);
    if (i % 97 == 0) {
      record.set("lat", "123");
    }
    pipeline.process(record);
  }
  g_audit.record(pipeline.counters());

  Outcome o;
  o.pass = g_audit.violations == 0 && g_audit.runs > 0;
  o.detail = std::to_string(g_audit.runs - g_audit.violations) + "/" + std::to_string(g_audit.runs) +
             " runs conserved (" + std::to_string(g_audit.syntactic_rejections) + " syntactic and " +
             std::to_string(g_audit.trust_rejections) + " trust rejections seen)";
  return o;
}

Outcome geo_time()
{
  std::mt19937_64 rng(20140101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double lat1 = epm::test::uniform(rng, -90, 90);
    const double lon1 = epm::test::uniform(rng, -180, 180);
    const double lat2 = epm::test::uniform(rng, -90, 90);
    const double lon2 = epm::test::uniform(rng, -180, 180);
    epm::MicroEvent a;
    epm::MicroEvent b;
    a.position = epm::GeoPoint(lat1, lon1);
    b.position = epm::GeoPoint(lat2, lon2);
    const double want = epm::test::chord_distance_km(lat1, lon1, lat2, lon2);
    const double got = epm::distance_gps(a, b);
    worst = std::max(worst, want == 0.0 ? std::abs(got) : std::abs(got - want) / want);
  }
  std::size_t time_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    epm::MicroEvent a;
    epm::MicroEvent b;
    a.timestamp_ms = static_cast<std::int64_t>(rng() % 4'000'000'000'000ULL);
    b.timestamp_ms = static_cast<std::int64_t>(rng() % 4'000'000'000'000ULL);
    const double d = epm::time_diff(a, b);
    const auto exact = static_cast<double>(std::max(a.timestamp_ms, b.timestamp_ms) -
                                           std::min(a.timestamp_ms, b.timestamp_ms)) / 1000.0;
    time_failures += d == epm::time_diff(b, a) && d == exact ? 0 : 1;
  }
  Outcome o;
  o.pass = worst <= 1e-9 && time_failures == 0;
  o.detail = "worst relative distance error " + fmt(worst) + " over 1000 pairs, " + std::to_string(time_failures) +
             " time_diff mismatches";
  return o;
}

Outcome parser_fuzz()
{
  std::mt19937_64 rng(0xf022);
  std::vector<std::string> seeds;
  for (const auto & r : corpus()) {
    seeds.push_back(r.source_text);
    seeds.push_back(epm::pretty_print(r));
  }
  static const std::string tokens[] = {"(", ")", "[", "]", "and", "or", "every", "Event", "=", "<", ">=", "\"",
                                       ".", "timeDiff", "where", "timer:within(", " min", "-", "9e999", "\xff"};
  std::size_t cases = 0;
  std::size_t diagnostics = 0;
  std::size_t accepted = 0;
  std::size_t bad_position = 0;
  std::size_t other_exceptions = 0;
  const auto start = Clock::now();
  while (seconds_since(start) < 60.0) {
    std::string text;
    switch (rng() % 3) {
      case 0: {  // arbitrary bytes
        text.resize(rng() % 300);
        for (auto & c : text) {
          c = static_cast<char>(rng() & 0xff);
        }
        break;
      }
      case 1: {  // byte-level mutation of a valid rule
        text = seeds[rng() % seeds.size()];
        for (int k = 1 + static_cast<int>(rng() % 8); k > 0 && !text.empty(); --k) {
          const std::size_t at = rng() % text.size();
          switch (rng() % 3) {
            case 0: text[at] = static_cast<char>(rng() & 0xff); break;
            case 1: text.erase(at, 1 + rng() % 10); break;
            default: text.insert(at, 1, static_cast<char>(rng() & 0xff)); break;
          }
        }
        break;
      }
      default: {  // token soup and deep nesting
        const std::size_t n = rng() % 400;
        for (std::size_t k = 0; k < n; ++k) {
          text += tokens[rng() % std::size(tokens)];
          if (rng() % 3 == 0) {
            text += ' ';
          }
        }
        break;
      }
    }
    ++cases;
    try {
      const auto rule = epm::parse_rule(text, "Fuzz");
      (void)epm::validate_rule(rule);
      ++accepted;
    } catch (const epm::RuleError & err) {
      ++diagnostics;
      bad_position += err.position() <= text.size() ? 0 : 1;
    } catch (...) {
      ++other_exceptions;
    }
  }
  Outcome o;
  o.pass = other_exceptions == 0 && bad_position == 0 && cases > 0;
  o.detail = std::to_string(cases) + " inputs in 60 s, " + std::to_string(diagnostics) + " positioned diagnostics, " +
             std::to_string(accepted) + " accepted, " + std::to_string(bad_position) + " positions out of range, " +
             std::to_string(other_exceptions) + " other exceptions";
  return o;
}

}  // namespace

int main(int argc, char ** argv)
{
  struct Criterion
  {
    int number;
    const char * name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
    {1, "corpus parse", corpus_parse},
    {2, "accuracy under noise", accuracy},
    {3, "oracle equivalence", oracle_equivalence},
    {4, "latency trend", latency_trend},
    {5, "noise tolerance", noise_tolerance},
    {6, "fusion funnel conservation", conservation},
    {7, "geo/time primitives", geo_time},
    {8, "parser robustness", parser_fuzz},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    selected.insert(std::atoi(argv[i]));
  }

  int failures = 0;
  for (const auto & c : criteria) {
    if (!selected.empty() && !selected.contains(c.number)) {
      continue;
    }
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception & err) {
      o = {false, std::string("exception: ") + err.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name << "): " << o.detail
              << " [" << fmt(seconds_since(start)) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
