#include "epm/harness.hpp"
#include "epm/rule.hpp"
#include "epm/scenario.hpp"
#include "epm/wire.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

namespace
{

const std::vector<epm::Rule> & corpus()
{
  static const auto rules = epm::builtin_rules();
  return rules;
}

epm::Scenario scenario(double rate, epm::NoiseVocabulary vocabulary, double duration_s)
{
  epm::ScenarioSpec spec;
  spec.seed = 7;
  spec.duration_s = duration_s;
  spec.round_robin_groups = 20;
  spec.noise.rate_per_s = rate;
  spec.noise.vocabulary = vocabulary;
  return epm::generate(spec, corpus());
}

void BM_Haversine(benchmark::State & state)
{
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lat(-90, 90);
  std::uniform_real_distribution<double> lon(-180, 180);
  std::vector<epm::MicroEvent> events(1024);
  for (auto & e : events) {
    e.position = epm::GeoPoint(lat(rng), lon(rng));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(epm::distance_gps(events[i & 1023], events[(i * 7 + 3) & 1023]));
    ++i;
  }
}
BENCHMARK(BM_Haversine);

void BM_ParseCorpus(benchmark::State & state)
{
  const std::string text(epm::builtin_rules_text());
  for (auto _ : state) {
    benchmark::DoNotOptimize(epm::parse_rule_file(text));
  }
}
BENCHMARK(BM_ParseCorpus);

void BM_DecodeRecord(benchmark::State & state)
{
  const auto s = scenario(200, epm::NoiseVocabulary::Disjoint, 5);
  std::vector<std::string> lines;
  for (const auto & e : s.events) {
    lines.push_back(epm::encode_micro_event(e));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(epm::decode_micro_event(lines[i++ % lines.size()]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DecodeRecord);

// Unpaced pipeline throughput; the argument is the noise rate in events/s.
void BM_IngestDisjoint(benchmark::State & state)
{
  const auto s = scenario(static_cast<double>(state.range(0)), epm::NoiseVocabulary::Disjoint, 20);
  for (auto _ : state) {
    auto pipeline = epm::make_pipeline(corpus(), {});
    for (const auto & e : s.events) {
      benchmark::DoNotOptimize(pipeline.process(e));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.events.size()));
}
BENCHMARK(BM_IngestDisjoint)->Arg(0)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_IngestAdversarial(benchmark::State & state)
{
  const auto s = scenario(static_cast<double>(state.range(0)), epm::NoiseVocabulary::Adversarial, 10);
  for (auto _ : state) {
    auto pipeline = epm::make_pipeline(corpus(), {});
    for (const auto & e : s.events) {
      benchmark::DoNotOptimize(pipeline.process(e));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.events.size()));
}
BENCHMARK(BM_IngestAdversarial)->Arg(0)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
