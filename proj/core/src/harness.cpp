#include "epm/harness.hpp"
#include "epm/wire.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <thread>

namespace epm
{

namespace
{

using SteadyClock = std::chrono::steady_clock;

double ms_between(SteadyClock::time_point from, SteadyClock::time_point to)
{
  return std::chrono::duration<double, std::milli>(to - from).count();
}

struct Arrival
{
  MicroEvent event;
  SteadyClock::time_point arrived;
};

class BoundedQueue
{
public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  void push(Arrival item)
  {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  void close()
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

  std::optional<Arrival> pop()
  {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) {
      return std::nullopt;
    }
    Arrival item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<Arrival> items_;
  bool closed_{false};
};

void finish_delays(RunReport & report)
{
  if (report.samples.empty()) {
    return;
  }
  std::vector<double> delays;
  delays.reserve(report.samples.size());
  for (const auto & s : report.samples) {
    delays.push_back(s.delay_ms);
  }
  std::sort(delays.begin(), delays.end());
  report.mean_delay_ms = std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(delays.size());
  // Nearest rank.
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(delays.size())));
  report.p99_delay_ms = delays[std::max<std::size_t>(rank, 1) - 1];
}

void record_detected(RunReport & report, const std::vector<SecureEvent> & out)
{
  for (const auto & s : out) {
    report.detected.push_back({s.inner.rule_id, make_fingerprint(s.inner.constituents)});
  }
}

}  // namespace

void score(RunReport & report, const Manifest & expected)
{
  report.detected = normalize(std::move(report.detected));
  std::vector<ManifestEntry> hits;
  std::set_intersection(report.detected.begin(), report.detected.end(), expected.begin(), expected.end(),
                        std::back_inserter(hits));
  report.n_expected = expected.size();
  report.n_detected = report.detected.size();
  report.n_true_positive = hits.size();
  report.n_false_positive = report.n_detected - report.n_true_positive;
  report.precision =
    report.n_detected == 0 ? 1.0 : static_cast<double>(report.n_true_positive) / static_cast<double>(report.n_detected);
  report.recall =
    report.n_expected == 0 ? 1.0 : static_cast<double>(report.n_true_positive) / static_cast<double>(report.n_expected);
}

FusionPipeline make_pipeline(std::span<const Rule> rules, const PipelineConfig & config)
{
  FusionPipeline pipeline(config);
  for (const auto & set : group_by_type(std::vector<Rule>(rules.begin(), rules.end()))) {
    pipeline.register_ruleset(set);
  }
  return pipeline;
}

RunReport run_accuracy(std::span<const MicroEvent> events, const Manifest & expected, std::span<const Rule> rules,
                       const PipelineConfig & config)
{
  auto pipeline = make_pipeline(rules, config);
  RunReport report;
  report.n_events = events.size();
  const auto start = SteadyClock::now();
  for (const auto & e : events) {
    record_detected(report, pipeline.process(e));
  }
  const double elapsed_ms = ms_between(start, SteadyClock::now());
  report.throughput_eps = elapsed_ms > 0.0 ? static_cast<double>(events.size()) * 1000.0 / elapsed_ms : 0.0;
  report.counters = pipeline.counters();
  score(report, expected);
  return report;
}

RunReport run_accuracy(const Scenario & scenario, std::span<const Rule> rules, const PipelineConfig & config)
{
  return run_accuracy(scenario.events, scenario.manifest, rules, config);
}

RunReport run_paced(const Scenario & scenario, std::span<const Rule> rules, const PipelineConfig & config,
                    const PacingOptions & pacing)
{
  auto pipeline = make_pipeline(rules, config);
  RunReport report;
  report.paced = true;
  report.n_events = scenario.events.size();
  if (scenario.events.empty()) {
    score(report, scenario.manifest);
    return report;
  }

  BoundedQueue queue(pacing.queue_capacity);
  const std::int64_t t0 = scenario.events.front().timestamp_ms;
  double max_lag_ms = 0.0;

  const auto start = SteadyClock::now();
  std::thread producer([&] {
    for (const auto & e : scenario.events) {
      const auto due = start + std::chrono::milliseconds(e.timestamp_ms - t0);
      std::this_thread::sleep_until(due);
      const auto now = SteadyClock::now();
      max_lag_ms = std::max(max_lag_ms, ms_between(due, now));
      queue.push({e, now});
    }
    queue.close();
  });

  while (auto item = queue.pop()) {
    const auto out = pipeline.process(std::move(item->event));
    if (out.empty()) {
      continue;
    }
    // The event that completes a match is the last constituent to arrive.
    const auto emitted = SteadyClock::now();
    for (const auto & s : out) {
      report.samples.push_back({s.inner.rule_id, make_fingerprint(s.inner.constituents),
                                ms_between(item->arrived, emitted)});
    }
    record_detected(report, out);
  }
  producer.join();
  const double elapsed_ms = ms_between(start, SteadyClock::now());

  report.max_pacing_lag_ms = max_lag_ms;
  report.pacing_overrun = max_lag_ms > static_cast<double>(pacing.overrun_tolerance.count());
  report.throughput_eps = elapsed_ms > 0.0 ? static_cast<double>(report.n_events) * 1000.0 / elapsed_ms : 0.0;
  report.counters = pipeline.counters();
  finish_delays(report);
  score(report, scenario.manifest);
  return report;
}

std::vector<RunReport> run_latency(const LatencyConfig & config, std::span<const Rule> rules)
{
  if (config.rates.empty()) {
    throw std::invalid_argument("no noise rates given");
  }
  if (config.repetitions == 0) {
    throw std::invalid_argument("repetitions must be positive");
  }
  std::vector<RunReport> reports;
  for (const double rate : config.rates) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
      throw std::invalid_argument("noise rate must be finite and non-negative");
    }
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      ScenarioSpec spec = config.base;
      spec.noise.rate_per_s = rate;
      spec.seed = config.base.seed + rep;
      spec.noise.seed.reset();
      const auto scenario = generate(spec, rules, config.pipeline.engine.units);
      auto report = run_paced(scenario, rules, config.pipeline, config.pacing);
      report.noise_rate = rate;
      report.repetition = rep;
      report.seed = spec.seed;
      if (config.on_report) {
        config.on_report(report);
      }
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

std::vector<RateSummary> summarize(std::span<const RunReport> reports)
{
  std::map<double, std::vector<const RunReport *>> by_rate;
  for (const auto & r : reports) {
    by_rate[r.noise_rate].push_back(&r);
  }
  std::vector<RateSummary> out;
  for (const auto & [rate, runs] : by_rate) {
    RateSummary s;
    s.noise_rate = rate;
    s.runs = runs.size();
    for (const auto * r : runs) {
      s.mean_delay_ms += r->mean_delay_ms;
      s.mean_p99_delay_ms += r->p99_delay_ms;
      s.min_recall = std::min(s.min_recall, r->recall);
      s.any_overrun = s.any_overrun || r->pacing_overrun;
    }
    const auto n = static_cast<double>(runs.size());
    s.mean_delay_ms /= n;
    s.mean_p99_delay_ms /= n;
    if (runs.size() > 1) {
      double ss = 0.0;
      for (const auto * r : runs) {
        ss += (r->mean_delay_ms - s.mean_delay_ms) * (r->mean_delay_ms - s.mean_delay_ms);
      }
      s.std_delay_ms = std::sqrt(ss / (n - 1.0));
    }
    out.push_back(s);
  }
  return out;
}

LinearFit fit_line(std::span<const double> xs, std::span<const double> ys)
{
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("fit_line needs at least two paired points");
  }
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) {
    throw std::invalid_argument("fit_line needs at least two distinct x values");
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

void write_latency_csv(std::ostream & out, std::span<const RunReport> reports)
{
  out << "noise_rate,mean_delay_ms,p99_delay_ms,recall\n";
  for (const auto & r : reports) {
    out << format_double(r.noise_rate) << ',' << format_double(r.mean_delay_ms) << ','
        << format_double(r.p99_delay_ms) << ',' << format_double(r.recall) << '\n';
  }
}

void write_summary_csv(std::ostream & out, std::span<const RateSummary> summary)
{
  out << "noise_rate,runs,mean_delay_ms,std_delay_ms,mean_p99_delay_ms,min_recall,overrun\n";
  for (const auto & s : summary) {
    out << format_double(s.noise_rate) << ',' << s.runs << ',' << format_double(s.mean_delay_ms) << ','
        << format_double(s.std_delay_ms) << ',' << format_double(s.mean_p99_delay_ms) << ','
        << format_double(s.min_recall) << ',' << (s.any_overrun ? 1 : 0) << '\n';
  }
}

}  // namespace epm
