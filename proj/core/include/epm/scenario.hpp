#ifndef EPM_SCENARIO_HPP_
#define EPM_SCENARIO_HPP_

#include "epm/engine.hpp"
#include "epm/event.hpp"
#include "epm/rule.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace epm
{

class ScenarioError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct GeoBox
{
  double lat_min{0.0};
  double lat_max{0.0};
  double lon_min{0.0};
  double lon_max{0.0};
};

/// A few hundred metres around the Miracles Square, Pisa.
GeoBox miracles_square_region();

enum class NoiseVocabulary
{
  /// Attribute values never satisfy any binding of any rule.
  Disjoint,
  /// Attribute values reuse rule literals; positions sit on a lattice far
  /// from the planted area with cells wider than every distance threshold,
  /// so decoys fill window buffers without completing matches.
  Adversarial,
};

std::string_view to_string(NoiseVocabulary vocabulary);
std::optional<NoiseVocabulary> parse_noise_vocabulary(std::string_view name);

struct NoiseModel
{
  double rate_per_s{0.0};  // Poisson arrivals in event time
  NoiseVocabulary vocabulary{NoiseVocabulary::Disjoint};
  GeoBox region{miracles_square_region()};
  std::optional<std::uint64_t> seed;  // defaults to one derived from the scenario seed
};

/// Where and when to plant one group. Without a position the anchor is
/// drawn uniformly from the noise region.
struct GroupPlan
{
  std::string rule_id;
  double anchor_s{0.0};
  std::optional<GeoPoint> anchor_position;
};

struct ScenarioSpec
{
  double duration_s{60.0};
  std::vector<GroupPlan> groups;
  /// Additional groups spread evenly over the run, cycling through the
  /// rules in order.
  std::size_t round_robin_groups{0};
  NoiseModel noise;
  std::uint64_t seed{1};
  std::int64_t base_time_ms{1'700'000'000'000};
  /// Rule file named by the spec, if any (relative paths are resolved
  /// against the spec file by the loader).
  std::optional<std::string> rules_path;
};

/// `key = value` lines, `#` comments. See docs/formats.md.
ScenarioSpec parse_scenario_spec(std::istream & in);
ScenarioSpec load_scenario_spec(const std::string & path);
std::string format_scenario_spec(const ScenarioSpec & spec);

struct PlantedGroup
{
  std::string target_rule_id;
  std::vector<MicroEvent> events;
  std::int64_t anchor_time_ms{0};
};

struct ManifestEntry
{
  std::string rule_id;
  Fingerprint fingerprint;

  friend auto operator<=>(const ManifestEntry &, const ManifestEntry &) = default;
};

/// Sorted, duplicate-free list of expected (rule, fingerprint) pairs.
using Manifest = std::vector<ManifestEntry>;

/// `rule_id<TAB>id1,id2,...` per line, sorted.
void write_manifest(std::ostream & out, const Manifest & manifest);
Manifest read_manifest(std::istream & in);
Manifest normalize(Manifest manifest);

/// Ground truth for `events` under `rules`, from brute_force_matches.
Manifest oracle_manifest(std::span<const MicroEvent> events, std::span<const Rule> rules, const UnitScale & units = {});

struct Scenario
{
  std::vector<MicroEvent> events;  // sorted by event time, ties by id
  std::vector<PlantedGroup> groups;
  Manifest manifest;
  std::size_t noise_events{0};
};

/// Deterministic in (spec, rules). Throws ScenarioError if a group names an
/// unknown rule or a rule cannot be satisfied.
Scenario generate(const ScenarioSpec & spec, std::span<const Rule> rules, const UnitScale & units = {});

/// One event per binding, each built from that binding's own literals, with
/// timestamps and positions packed tightly enough to satisfy the window and
/// every pairwise constraint.
PlantedGroup plant_group_for(const Rule & rule, std::int64_t anchor_time_ms, const GeoPoint & anchor_position,
                             std::mt19937_64 & rng, const std::string & id_prefix = "p",
                             const UnitScale & units = {});

/// True if no event satisfies any binding predicate of any rule.
bool noise_is_pure(std::span<const MicroEvent> events, std::span<const Rule> rules);

}  // namespace epm

#endif  // EPM_SCENARIO_HPP_
