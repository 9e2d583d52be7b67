#ifndef EPM_HARNESS_HPP_
#define EPM_HARNESS_HPP_

#include "epm/fusion.hpp"
#include "epm/scenario.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace epm
{

struct LatencySample
{
  std::string rule_id;
  Fingerprint fingerprint;
  double delay_ms{0.0};  // last constituent arrival -> complex event emission, steady clock
};

struct RunReport
{
  double noise_rate{0.0};
  std::size_t repetition{0};
  std::uint64_t seed{0};
  std::size_t n_events{0};
  std::size_t n_expected{0};
  std::size_t n_detected{0};  // distinct (rule, fingerprint) pairs emitted as secure events
  std::size_t n_true_positive{0};
  std::size_t n_false_positive{0};
  double precision{1.0};
  double recall{1.0};
  double mean_delay_ms{0.0};
  double p99_delay_ms{0.0};
  double throughput_eps{0.0};
  bool paced{false};
  bool pacing_overrun{false};
  double max_pacing_lag_ms{0.0};
  FusionCounters counters;
  std::vector<LatencySample> samples;
  Manifest detected;  // sorted
};

/// Fills the precision/recall fields from detected and expected sets.
void score(RunReport & report, const Manifest & expected);

/// Builds a pipeline with every rule registered, one rule set per complex type.
FusionPipeline make_pipeline(std::span<const Rule> rules, const PipelineConfig & config);

/// Streams `events` through a fresh pipeline as fast as possible.
RunReport run_accuracy(std::span<const MicroEvent> events, const Manifest & expected, std::span<const Rule> rules,
                       const PipelineConfig & config = {});
RunReport run_accuracy(const Scenario & scenario, std::span<const Rule> rules, const PipelineConfig & config = {});

struct PacingOptions
{
  std::size_t queue_capacity{1 << 16};
  /// A release later than this behind its schedule marks the run as overrun.
  std::chrono::milliseconds overrun_tolerance{100};
};

/**
 * Releases events on their event-time schedule from a producer thread and
 * processes them on a consumer thread through a bounded queue. Queue wait
 * counts toward delay.
 */
RunReport run_paced(const Scenario & scenario, std::span<const Rule> rules, const PipelineConfig & config = {},
                    const PacingOptions & pacing = {});

struct LatencyConfig
{
  ScenarioSpec base;  // noise rate and seed are overridden per run
  std::vector<double> rates;
  std::size_t repetitions{5};
  PipelineConfig pipeline;
  PacingOptions pacing;
  std::function<void(const RunReport &)> on_report;
};

/// One paced run per (rate, repetition). Repetition r uses seed base.seed + r.
std::vector<RunReport> run_latency(const LatencyConfig & config, std::span<const Rule> rules);

struct RateSummary
{
  double noise_rate{0.0};
  std::size_t runs{0};
  double mean_delay_ms{0.0};
  double std_delay_ms{0.0};
  double mean_p99_delay_ms{0.0};
  double min_recall{1.0};
  bool any_overrun{false};
};

/// Per-rate mean and sample standard deviation of the run means, rates ascending.
std::vector<RateSummary> summarize(std::span<const RunReport> reports);

struct LinearFit
{
  double slope{0.0};
  double intercept{0.0};
  double r_squared{0.0};
};

/// Ordinary least squares. r_squared is 1 when ys has zero variance and the
/// fit is exact.
LinearFit fit_line(std::span<const double> xs, std::span<const double> ys);

/// `noise_rate,mean_delay_ms,p99_delay_ms,recall`, one row per run.
void write_latency_csv(std::ostream & out, std::span<const RunReport> reports);
/// `noise_rate,runs,mean_delay_ms,std_delay_ms,mean_p99_delay_ms,min_recall,overrun`.
void write_summary_csv(std::ostream & out, std::span<const RateSummary> summary);

}  // namespace epm

#endif  // EPM_HARNESS_HPP_
