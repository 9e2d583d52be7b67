#include "epm/scenario.hpp"
#include "epm/wire.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

namespace
{

const std::vector<epm::Rule> & rules()
{
  static const auto r = epm::builtin_rules();
  return r;
}

const epm::Rule & rule_named(const std::string & id)
{
  for (const auto & r : rules()) {
    if (r.rule_id == id) {
      return r;
    }
  }
  throw std::logic_error("no rule " + id);
}

epm::ScenarioSpec one_robbery(double rate)
{
  epm::ScenarioSpec spec;
  spec.duration_s = 60;
  spec.groups.push_back({"armed-robbery", 5.0, std::nullopt});
  spec.noise.rate_per_s = rate;
  return spec;
}

std::string serialize(const epm::Scenario & s)
{
  std::ostringstream out;
  epm::write_micro_events(out, s.events);
  epm::write_manifest(out, s.manifest);
  return out.str();
}

std::int64_t int_attr(const epm::MicroEvent & e, const std::string & key)
{
  return std::get<std::int64_t>(e.attributes.at(key));
}

std::string str_attr(const epm::MicroEvent & e, const std::string & key)
{
  return std::get<std::string>(e.attributes.at(key));
}

}  // namespace

TEST(Generate, SingleGroupWithoutNoise)
{
  const auto s = epm::generate(one_robbery(0), rules());
  EXPECT_EQ(s.events.size(), 2u);
  EXPECT_EQ(s.noise_events, 0u);
  ASSERT_EQ(s.manifest.size(), 1u);
  EXPECT_EQ(s.manifest[0].rule_id, "armed-robbery");
}

TEST(Generate, DisjointNoiseAddsNoMatches)
{
  const auto quiet = epm::generate(one_robbery(0), rules());
  const auto noisy = epm::generate(one_robbery(50), rules());
  // Poisson(3000): five standard deviations is about 274.
  EXPECT_NEAR(static_cast<double>(noisy.noise_events), 3000.0, 274.0);
  EXPECT_EQ(noisy.events.size(), noisy.noise_events + 2);
  EXPECT_EQ(noisy.manifest, quiet.manifest);
  std::vector<epm::MicroEvent> noise;
  for (const auto & e : noisy.events) {
    if (e.id.front() == 'n') {
      noise.push_back(e);
    }
  }
  EXPECT_EQ(noise.size(), noisy.noise_events);
  EXPECT_TRUE(epm::noise_is_pure(noise, rules()));
}

TEST(Generate, DeterministicBytes)
{
  auto spec = one_robbery(200);
  spec.round_robin_groups = 10;
  spec.noise.vocabulary = epm::NoiseVocabulary::Adversarial;
  EXPECT_EQ(serialize(epm::generate(spec, rules())), serialize(epm::generate(spec, rules())));
  auto other = spec;
  other.seed = 2;
  EXPECT_NE(serialize(epm::generate(spec, rules())), serialize(epm::generate(other, rules())));
}

TEST(Generate, SortedByEventTime)
{
  auto spec = one_robbery(100);
  spec.round_robin_groups = 25;
  const auto s = epm::generate(spec, rules());
  EXPECT_TRUE(std::is_sorted(s.events.begin(), s.events.end(), [](const auto & a, const auto & b) {
    return a.timestamp_ms < b.timestamp_ms;
  }));
  std::set<std::string> ids;
  for (const auto & e : s.events) {
    EXPECT_TRUE(ids.insert(e.id).second) << e.id;
  }
}

TEST(Generate, ManifestIsTheOracleNotThePlantList)
{
  auto spec = one_robbery(0);
  // Two robberies planted at the same spot a second apart cross-match.
  spec.groups = {{"armed-robbery", 5.0, epm::GeoPoint(43.7230, 10.3966)},
                 {"armed-robbery", 6.0, epm::GeoPoint(43.7230, 10.3966)}};
  const auto s = epm::generate(spec, rules());
  EXPECT_EQ(s.groups.size(), 2u);
  EXPECT_EQ(s.manifest, epm::oracle_manifest(s.events, rules()));
  EXPECT_GT(s.manifest.size(), 2u);
}

TEST(Generate, AdversarialDecoysCarryLiteralsButNeverMatch)
{
  auto spec = one_robbery(300);
  spec.round_robin_groups = 10;
  spec.noise.vocabulary = epm::NoiseVocabulary::Adversarial;
  const auto s = epm::generate(spec, rules());
  std::vector<epm::MicroEvent> planted;
  std::vector<epm::MicroEvent> noise;
  std::set<std::string> planted_ids;
  for (const auto & g : s.groups) {
    planted.insert(planted.end(), g.events.begin(), g.events.end());
    for (const auto & e : g.events) {
      planted_ids.insert(e.id);
    }
  }
  for (const auto & e : s.events) {
    if (!planted_ids.contains(e.id)) {
      noise.push_back(e);
    }
  }
  EXPECT_FALSE(epm::noise_is_pure(noise, rules()));
  EXPECT_EQ(s.manifest, epm::oracle_manifest(planted, rules()));
}

TEST(Generate, UnknownRule)
{
  auto spec = one_robbery(0);
  spec.groups.push_back({"no-such-rule", 1.0, std::nullopt});
  EXPECT_THROW(epm::generate(spec, rules()), epm::ScenarioError);
}

TEST(Plant, DemonstrationUsesRuleLiterals)
{
  std::mt19937_64 rng(1);
  const auto g = epm::plant_group_for(rule_named("demonstration"), 0, epm::GeoPoint(43.7230, 10.3966), rng);
  ASSERT_EQ(g.events.size(), 2u);
  EXPECT_EQ(int_attr(g.events[0], "people"), 81);
  const std::set<std::string> banners = {"banner", "svastika", "sickle and hammer"};
  EXPECT_TRUE(banners.contains(str_attr(g.events[1], "object")));
  EXPECT_EQ(epm::brute_force_matches(g.events, rule_named("demonstration")).size(), 1u);
}

TEST(Plant, Melee)
{
  std::mt19937_64 rng(2);
  const auto g = epm::plant_group_for(rule_named("melee"), 0, epm::GeoPoint(43.7230, 10.3966), rng);
  EXPECT_EQ(int_attr(g.events[0], "people"), 11);
  const auto object = str_attr(g.events[1], "object");
  EXPECT_TRUE(object == "bar" || object == "knife");
}

TEST(Plant, ContradictionIsAnError)
{
  auto r = rule_named("melee");
  r.bindings[0].predicate = epm::make_and(epm::make_num_cmp("people", epm::CompareOp::Greater, 10),
                                          epm::make_num_cmp("people", epm::CompareOp::Less, 5));
  std::mt19937_64 rng(3);
  EXPECT_THROW(epm::plant_group_for(r, 0, epm::GeoPoint(43.7230, 10.3966), rng), epm::ScenarioError);
}

TEST(Plant, AlwaysSatisfiesItsRule)
{
  auto all = epm::test::stress_rules();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) {
    const auto & r = all[epm::test::pick(rng, all.size())];
    const epm::GeoPoint anchor(epm::test::uniform(rng, -60, 60), epm::test::uniform(rng, -170, 170));
    const auto g = epm::plant_group_for(r, 1'700'000'000'000, anchor, rng, "g" + std::to_string(i));
    EXPECT_FALSE(epm::brute_force_matches(g.events, r).empty()) << r.rule_id << " at " << i;
  }
}

TEST(Plant, RandomRulesWithSatisfiablePredicates)
{
  std::mt19937_64 rng(8);
  int planted = 0;
  for (int i = 0; i < 300; ++i) {
    const auto r = epm::test::random_rule(rng);
    if (epm::has_errors(epm::validate_rule(r))) {
      continue;
    }
    const auto g = epm::plant_group_for(r, 1'700'000'000'000, epm::GeoPoint(43.7230, 10.3966), rng);
    EXPECT_FALSE(epm::brute_force_matches(g.events, r).empty()) << epm::pretty_print(r);
    ++planted;
  }
  EXPECT_GT(planted, 50);
}

TEST(SpecFile, ParseAndFormat)
{
  std::istringstream in(
    "# demo\nseed = 9\nduration_s = 30\nnoise_rate = 12.5\nnoise_vocabulary = adversarial\nnoise_seed = 4\n"
    "region = 43.72 43.73 10.39 10.40\ngroup = melee 3\ngroup = demonstration 4.5 43.7230 10.3966\n"
    "round_robin_groups = 6\nrules = surveillance.rules\n");
  const auto spec = epm::parse_scenario_spec(in);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(spec.duration_s, 30.0);
  EXPECT_EQ(spec.noise.rate_per_s, 12.5);
  EXPECT_EQ(spec.noise.vocabulary, epm::NoiseVocabulary::Adversarial);
  EXPECT_EQ(spec.noise.seed, 4u);
  ASSERT_EQ(spec.groups.size(), 2u);
  EXPECT_EQ(spec.groups[1].anchor_position, epm::GeoPoint(43.7230, 10.3966));
  EXPECT_EQ(spec.round_robin_groups, 6u);
  EXPECT_EQ(spec.rules_path, "surveillance.rules");

  std::istringstream again(epm::format_scenario_spec(spec));
  EXPECT_EQ(epm::format_scenario_spec(epm::parse_scenario_spec(again)), epm::format_scenario_spec(spec));
}

TEST(SpecFile, Errors)
{
  for (const char * text : {"colour = red\n", "seed = -1\n", "duration_s = 0\n", "noise_rate = fast\n",
                            "group = melee\n", "region = 1 2 3\n", "noise_vocabulary = loud\n", "just words\n",
                            "region = 10 0 0 1\n", "region = 0 95 0 1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(epm::parse_scenario_spec(in), epm::ScenarioError) << text;
  }
}

TEST(ManifestFile, RoundTrip)
{
  const auto s = epm::generate(one_robbery(0), rules());
  std::stringstream io;
  epm::write_manifest(io, s.manifest);
  EXPECT_EQ(io.str(), "armed-robbery\tp0000-event1,p0000-event2\n");
  EXPECT_EQ(epm::read_manifest(io), s.manifest);
  std::istringstream bad("no tab here\n");
  EXPECT_THROW(epm::read_manifest(bad), epm::ScenarioError);
}
