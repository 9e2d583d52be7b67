#ifndef EPM_TESTS_ORACLES_HPP_
#define EPM_TESTS_ORACLES_HPP_

#include "epm/engine.hpp"
#include "epm/rule.hpp"
#include "epm/scenario.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace epm::test
{

/// Great-circle distance from the chord between unit vectors, in long
/// double. Shares nothing with the library's haversine.
double chord_distance_km(double lat1, double lon1, double lat2, double lon2);

double uniform(std::mt19937_64 & rng, double lo, double hi);
std::size_t pick(std::mt19937_64 & rng, std::size_t n);

/// Random predicate over a small attribute vocabulary.
PredicatePtr random_predicate(std::mt19937_64 & rng, int depth);
/// Random well-formed rule with 2 to 4 bindings.
Rule random_rule(std::mt19937_64 & rng);

/// Built-in rules plus a three-binding rule.
std::vector<Rule> stress_rules();

/// At most `max_events` events: generator output with lattice decoys, plus
/// clones of planted events pushed to just inside or just outside the time
/// and distance thresholds.
std::vector<MicroEvent> random_trace(std::mt19937_64 & rng, std::span<const Rule> rules, std::size_t max_events);

/// Sorted by timestamp plus a uniform delay in [0, lateness_ms), so no event
/// arrives behind the engine's lateness horizon.
std::vector<MicroEvent> arrival_order(std::vector<MicroEvent> events, std::int64_t lateness_ms,
                                      std::mt19937_64 & rng);

/// Fingerprints the streaming engine emits when fed `arrivals` in order,
/// sorted, duplicates kept.
Manifest stream_manifest(std::span<const MicroEvent> arrivals, std::span<const Rule> rules,
                         const EngineConfig & config = {});

}  // namespace epm::test

#endif  // EPM_TESTS_ORACLES_HPP_
