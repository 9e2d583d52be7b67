#ifndef EPM_ENGINE_HPP_
#define EPM_ENGINE_HPP_

#include "epm/event.hpp"
#include "epm/rule.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace epm
{

/// Canonical sorted tuple of constituent ids.
using Fingerprint = std::vector<std::string>;

std::string fingerprint_key(const Fingerprint & fp);
Fingerprint make_fingerprint(std::span<const EventPtr> events);

struct Match
{
  std::string rule_id;
  std::vector<std::string> binding_names;
  std::vector<EventPtr> assignment;  // parallel to binding_names
  Fingerprint fingerprint;
};

class EngineError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct EngineConfig
{
  /// Event-time slack for out-of-order arrivals.
  std::int64_t lateness_ms{10'000};
  UnitScale units;
};

struct ListenerHandle
{
  std::string rule_id;
  friend bool operator==(const ListenerHandle &, const ListenerHandle &) = default;
};

struct ListenerStats
{
  std::size_t buffered{0};
  std::size_t emitted{0};
  std::size_t dropped_late{0};
  std::int64_t oldest_buffered_ms{0};
  std::int64_t watermark_ms{0};
};

/**
 * Runtime embodiment of one rule. Buffers, per binding, the events that
 * satisfy that binding's predicate and joins every new event against the
 * other buffers.
 *
 * A buffer never holds events older than (max event time seen - window -
 * lateness). Events arriving behind that horizon are counted as dropped.
 */
class Listener
{
public:
  Listener(Rule rule, const EngineConfig & config);
  Listener(const Listener &) = delete;
  Listener & operator=(const Listener &) = delete;

  const Rule & rule() const { return rule_; }

  void ingest(const EventPtr & event, std::vector<Match> & out);
  ListenerStats stats() const;

private:
  using Buffer = std::deque<EventPtr>;  // sorted by timestamp

  void evict(std::int64_t horizon);
  void extend(std::size_t depth, std::int64_t lo, std::int64_t hi, std::vector<EventPtr> & chosen,
              std::vector<Match> & out);
  bool admissible(std::size_t binding, const MicroEvent & candidate, const std::vector<EventPtr> & chosen) const;
  void emit(const std::vector<EventPtr> & chosen, std::vector<Match> & out);

  Rule rule_;
  UnitScale units_;
  std::int64_t window_ms_;
  std::int64_t lateness_ms_;
  std::vector<std::string> binding_names_;
  // pair_checks_[a][b]: constraints between bindings a and b, timeDiff first.
  std::vector<std::vector<std::vector<const PairConstraint *>>> pair_checks_;
  std::vector<Buffer> buffers_;
  std::vector<std::size_t> join_order_;
  std::unordered_set<std::string> emitted_;
  std::multimap<std::int64_t, std::string> emitted_expiry_;  // min constituent ts -> key
  std::int64_t max_seen_ms_{0};
  bool seen_any_{false};
  std::size_t emitted_total_{0};
  std::size_t dropped_late_{0};
};

/**
 * Event processor: one listener per active rule. Single writer; rulesets
 * may be registered or removed between ingests.
 */
class CorrelationEngine
{
public:
  explicit CorrelationEngine(EngineConfig config = {});

  /// Throws EngineError if a rule has validation errors or its id is
  /// already registered. Nothing is registered on failure.
  std::vector<ListenerHandle> register_ruleset(const RuleSet & rules);
  bool deregister(const ListenerHandle & handle);
  std::size_t deregister_ruleset(const std::string & name);

  std::vector<Match> ingest(const MicroEvent & event);
  std::vector<Match> ingest(EventPtr event);

  std::size_t listener_count() const { return listeners_.size(); }
  std::vector<ListenerHandle> listeners() const;
  const Listener * find(const std::string & rule_id) const;
  std::size_t dropped_late() const;
  const EngineConfig & config() const { return config_; }

private:
  struct Entry
  {
    std::string ruleset;
    std::unique_ptr<Listener> listener;
  };

  EngineConfig config_;
  std::vector<Entry> listeners_;
};

/// Exhaustive k-tuple enumeration over `trace`; the reference result for
/// the streaming engine. Returns matches sorted by fingerprint.
std::vector<Match> brute_force_matches(std::span<const MicroEvent> trace, const Rule & rule,
                                       const UnitScale & units = {});

}  // namespace epm

#endif  // EPM_ENGINE_HPP_
