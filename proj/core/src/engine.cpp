#include "epm/engine.hpp"

#include <algorithm>
#include <limits>

namespace epm
{

std::string fingerprint_key(const Fingerprint & fp)
{
  std::string key;
  for (const auto & id : fp) {
    if (!key.empty()) {
      key.push_back(',');
    }
    key += id;
  }
  return key;
}

Fingerprint make_fingerprint(std::span<const EventPtr> events)
{
  Fingerprint fp;
  fp.reserve(events.size());
  for (const auto & e : events) {
    fp.push_back(e->id);
  }
  std::sort(fp.begin(), fp.end());
  return fp;
}

Listener::Listener(Rule rule, const EngineConfig & config)
    : rule_(std::move(rule)),
      units_(config.units),
      window_ms_(rule_.window_ms()),
      lateness_ms_(config.lateness_ms)
{
  const std::size_t k = rule_.bindings.size();
  for (const auto & b : rule_.bindings) {
    binding_names_.push_back(b.name);
  }
  pair_checks_.assign(k, std::vector<std::vector<const PairConstraint *>>(k));
  for (const auto & c : rule_.post_filter.constraints) {
    const int a = rule_.binding_index(c.left);
    const int b = rule_.binding_index(c.right);
    if (a < 0 || b < 0 || a == b) {
      throw EngineError("rule '" + rule_.rule_id + "' has an invalid post-filter");
    }
    pair_checks_[a][b].push_back(&c);
    pair_checks_[b][a].push_back(&c);
  }
  for (auto & row : pair_checks_) {
    for (auto & checks : row) {
      std::stable_partition(checks.begin(), checks.end(),
                            [](const PairConstraint * c) { return c->metric == PairMetric::TimeDiff; });
    }
  }
  buffers_.resize(k);
  join_order_.reserve(k);
}

void Listener::ingest(const EventPtr & event, std::vector<Match> & out)
{
  const std::int64_t ts = event->timestamp_ms;
  if (seen_any_ && ts < max_seen_ms_ - window_ms_ - lateness_ms_) {
    ++dropped_late_;
    return;
  }
  if (!seen_any_ || ts > max_seen_ms_) {
    max_seen_ms_ = ts;
    seen_any_ = true;
    evict(max_seen_ms_ - window_ms_ - lateness_ms_);
  }

  const std::size_t k = rule_.bindings.size();
  std::vector<bool> satisfied(k, false);
  bool any = false;
  for (std::size_t i = 0; i < k; ++i) {
    satisfied[i] = evaluate(*rule_.bindings[i].predicate, event->attributes);
    any = any || satisfied[i];
  }
  if (!any) {
    return;
  }

  // Join the new event, fixed in each binding it satisfies, against the
  // other buffers.
  std::vector<EventPtr> chosen(k);
  for (std::size_t fixed = 0; fixed < k; ++fixed) {
    if (!satisfied[fixed]) {
      continue;
    }
    join_order_.clear();
    join_order_.push_back(fixed);
    for (std::size_t j = 0; j < k; ++j) {
      if (j != fixed) {
        join_order_.push_back(j);
      }
    }
    std::fill(chosen.begin(), chosen.end(), nullptr);
    chosen[fixed] = event;
    extend(1, ts, ts, chosen, out);
  }

  for (std::size_t i = 0; i < k; ++i) {
    if (!satisfied[i]) {
      continue;
    }
    auto & buf = buffers_[i];
    auto pos = buf.end();
    while (pos != buf.begin() && (*std::prev(pos))->timestamp_ms > ts) {
      --pos;
    }
    buf.insert(pos, event);
  }
}

void Listener::extend(std::size_t depth, std::int64_t lo, std::int64_t hi, std::vector<EventPtr> & chosen,
                      std::vector<Match> & out)
{
  if (depth == join_order_.size()) {
    emit(chosen, out);
    return;
  }
  const std::size_t binding = join_order_[depth];
  const Buffer & buf = buffers_[binding];

  // Any candidate must keep the span of the partial assignment within the
  // window: ts in [hi - window, lo + window].
  const std::int64_t from = hi - window_ms_;
  const std::int64_t to = lo + window_ms_;
  auto it = std::lower_bound(buf.begin(), buf.end(), from,
                             [](const EventPtr & e, std::int64_t t) { return e->timestamp_ms < t; });
  for (; it != buf.end() && (*it)->timestamp_ms <= to; ++it) {
    const EventPtr & candidate = *it;
    if (!admissible(binding, *candidate, chosen)) {
      continue;
    }
    chosen[binding] = candidate;
    extend(depth + 1, std::min(lo, candidate->timestamp_ms), std::max(hi, candidate->timestamp_ms), chosen, out);
    chosen[binding] = nullptr;
  }
}

bool Listener::admissible(std::size_t binding, const MicroEvent & candidate,
                          const std::vector<EventPtr> & chosen) const
{
  for (std::size_t other = 0; other < chosen.size(); ++other) {
    const EventPtr & assigned = chosen[other];
    if (!assigned) {
      continue;
    }
    if (assigned->id == candidate.id) {
      return false;
    }
    for (const PairConstraint * c : pair_checks_[binding][other]) {
      if (!satisfies(*c, candidate, *assigned, units_)) {
        return false;
      }
    }
  }
  return true;
}

void Listener::emit(const std::vector<EventPtr> & chosen, std::vector<Match> & out)
{
  Fingerprint fp = make_fingerprint(chosen);
  std::string key = fingerprint_key(fp);
  if (emitted_.contains(key)) {
    return;
  }
  std::int64_t min_ts = std::numeric_limits<std::int64_t>::max();
  for (const auto & e : chosen) {
    min_ts = std::min(min_ts, e->timestamp_ms);
  }
  emitted_expiry_.emplace(min_ts, key);
  emitted_.insert(std::move(key));
  ++emitted_total_;
  out.push_back(Match{rule_.rule_id, binding_names_, chosen, std::move(fp)});
}

void Listener::evict(std::int64_t horizon)
{
  for (auto & buf : buffers_) {
    while (!buf.empty() && buf.front()->timestamp_ms < horizon) {
      buf.pop_front();
    }
  }
  auto end = emitted_expiry_.lower_bound(horizon);
  for (auto it = emitted_expiry_.begin(); it != end; ++it) {
    emitted_.erase(it->second);
  }
  emitted_expiry_.erase(emitted_expiry_.begin(), end);
}

ListenerStats Listener::stats() const
{
  ListenerStats s;
  s.emitted = emitted_total_;
  s.dropped_late = dropped_late_;
  s.watermark_ms = seen_any_ ? max_seen_ms_ - window_ms_ - lateness_ms_ : 0;
  s.oldest_buffered_ms = std::numeric_limits<std::int64_t>::max();
  for (const auto & buf : buffers_) {
    s.buffered += buf.size();
    if (!buf.empty()) {
      s.oldest_buffered_ms = std::min(s.oldest_buffered_ms, buf.front()->timestamp_ms);
    }
  }
  if (s.buffered == 0) {
    s.oldest_buffered_ms = 0;
  }
  return s;
}

CorrelationEngine::CorrelationEngine(EngineConfig config) : config_(config) {}

std::vector<ListenerHandle> CorrelationEngine::register_ruleset(const RuleSet & rules)
{
  if (!rules.active) {
    return {};
  }
  std::set<std::string> ids;
  for (const auto & entry : listeners_) {
    ids.insert(entry.listener->rule().rule_id);
  }
  for (const auto & rule : rules.rules) {
    if (rule.complex_type != rules.rules.front().complex_type) {
      throw EngineError("ruleset '" + rules.name + "' mixes complex-event types");
    }
    if (!ids.insert(rule.rule_id).second) {
      throw EngineError("rule id '" + rule.rule_id + "' is already registered");
    }
    const auto diagnostics = validate_rule(rule, config_.units);
    if (has_errors(diagnostics)) {
      std::string msg = "rule '" + rule.rule_id + "' is invalid:";
      for (const auto & d : diagnostics) {
        if (d.severity == Diagnostic::Severity::Error) {
          msg += " " + d.message + ";";
        }
      }
      throw EngineError(msg);
    }
  }

  std::vector<ListenerHandle> handles;
  for (const auto & rule : rules.rules) {
    listeners_.push_back(Entry{rules.name, std::make_unique<Listener>(rule, config_)});
    handles.push_back(ListenerHandle{rule.rule_id});
  }
  return handles;
}

bool CorrelationEngine::deregister(const ListenerHandle & handle)
{
  const auto it = std::find_if(listeners_.begin(), listeners_.end(), [&](const Entry & e) {
    return e.listener->rule().rule_id == handle.rule_id;
  });
  if (it == listeners_.end()) {
    return false;
  }
  listeners_.erase(it);
  return true;
}

std::size_t CorrelationEngine::deregister_ruleset(const std::string & name)
{
  const auto before = listeners_.size();
  std::erase_if(listeners_, [&](const Entry & e) { return e.ruleset == name; });
  return before - listeners_.size();
}

std::vector<Match> CorrelationEngine::ingest(const MicroEvent & event)
{
  return ingest(std::make_shared<const MicroEvent>(event));
}

std::vector<Match> CorrelationEngine::ingest(EventPtr event)
{
  std::vector<Match> out;
  for (auto & entry : listeners_) {
    entry.listener->ingest(event, out);
  }
  return out;
}

std::vector<ListenerHandle> CorrelationEngine::listeners() const
{
  std::vector<ListenerHandle> handles;
  for (const auto & entry : listeners_) {
    handles.push_back({entry.listener->rule().rule_id});
  }
  return handles;
}

const Listener * CorrelationEngine::find(const std::string & rule_id) const
{
  for (const auto & entry : listeners_) {
    if (entry.listener->rule().rule_id == rule_id) {
      return entry.listener.get();
    }
  }
  return nullptr;
}

std::size_t CorrelationEngine::dropped_late() const
{
  std::size_t total = 0;
  for (const auto & entry : listeners_) {
    total += entry.listener->stats().dropped_late;
  }
  return total;
}

namespace
{

struct BruteForce
{
  const Rule & rule;
  const UnitScale & units;
  std::vector<std::vector<EventPtr>> candidates;
  std::vector<EventPtr> chosen;
  std::map<Fingerprint, Match> found;

  void enumerate(std::size_t depth)
  {
    if (depth == candidates.size()) {
      check();
      return;
    }
    // Prune prefixes no completion can rescue; check() still tests everything.
    auto first = candidates[depth].begin();
    auto last = candidates[depth].end();
    if (depth > 0) {
      const std::int64_t anchor = chosen[0]->timestamp_ms;
      const auto by_ts = [](const EventPtr & e, std::int64_t t) { return e->timestamp_ms < t; };
      first = std::lower_bound(first, last, anchor - rule.window_ms(), by_ts);
      last = std::lower_bound(first, last, anchor + rule.window_ms() + 1, by_ts);
    }
    for (auto it = first; it != last; ++it) {
      const auto & e = *it;
      bool viable = true;
      for (std::size_t i = 0; i < depth && viable; ++i) {
        const auto gap = chosen[i]->timestamp_ms - e->timestamp_ms;
        viable = chosen[i]->id != e->id && (gap < 0 ? -gap : gap) <= rule.window_ms();
      }
      if (viable) {
        chosen[depth] = e;
        enumerate(depth + 1);
      }
    }
  }

  void check()
  {
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      for (std::size_t j = i + 1; j < chosen.size(); ++j) {
        if (chosen[i]->id == chosen[j]->id) {
          return;
        }
      }
    }
    if (time_span(chosen).width_ms() > rule.window_ms()) {
      return;
    }
    for (const auto & c : rule.post_filter.constraints) {
      const auto & a = *chosen[rule.binding_index(c.left)];
      const auto & b = *chosen[rule.binding_index(c.right)];
      if (!satisfies(c, a, b, units)) {
        return;
      }
    }
    Fingerprint fp = make_fingerprint(chosen);
    if (!found.contains(fp)) {
      std::vector<std::string> names;
      for (const auto & b : rule.bindings) {
        names.push_back(b.name);
      }
      found.emplace(fp, Match{rule.rule_id, std::move(names), chosen, fp});
    }
  }
};

}  // namespace

std::vector<Match> brute_force_matches(std::span<const MicroEvent> trace, const Rule & rule, const UnitScale & units)
{
  BruteForce bf{rule, units, {}, std::vector<EventPtr>(rule.bindings.size()), {}};
  std::vector<EventPtr> events;
  events.reserve(trace.size());
  for (const auto & e : trace) {
    events.push_back(std::make_shared<const MicroEvent>(e));
  }
  // Per-member predicate filtering before the cross product; the leaf test
  // covers everything that relates members to each other.
  for (const auto & b : rule.bindings) {
    auto & list = bf.candidates.emplace_back();
    for (const auto & e : events) {
      if (evaluate(*b.predicate, e->attributes)) {
        list.push_back(e);
      }
    }
    std::stable_sort(list.begin(), list.end(),
                     [](const EventPtr & x, const EventPtr & y) { return x->timestamp_ms < y->timestamp_ms; });
  }
  bf.enumerate(0);

  std::vector<Match> out;
  out.reserve(bf.found.size());
  for (auto & [fp, match] : bf.found) {
    out.push_back(std::move(match));
  }
  return out;
}

}  // namespace epm
