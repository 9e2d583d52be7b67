#include "epm/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace epm
{

namespace
{

std::string to_lower(std::string_view s)
{
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool contains_word(std::string_view haystack, std::string_view word)
{
  std::size_t pos = haystack.find(word);
  while (pos != std::string_view::npos) {
    const bool start_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool end_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (start_ok && end_ok) {
      return true;
    }
    pos = haystack.find(word, pos + 1);
  }
  return false;
}

bool valid_identifier(std::string_view id)
{
  if (id.empty() || id.size() > 256) {
    return false;
  }
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-' || c == '.' || c == ':' ||
           c == '@' || c == '/';
  });
}

RejectionRecord reject(std::string reason, std::string id)
{
  return RejectionRecord{RejectionRecord::Stage::Syntactic, std::move(reason), std::move(id), std::nullopt};
}

// Splits a config line into (key, numeric value) where the value is the last
// whitespace-separated token; the key may contain spaces.
std::optional<std::pair<std::string, std::string>> split_config_line(std::string line)
{
  if (const auto hash = line.find('#'); hash != std::string::npos) {
    line.erase(hash);
  }
  const auto last = line.find_last_not_of(" \t\r");
  if (last == std::string::npos) {
    return std::nullopt;
  }
  line.erase(last + 1);
  const auto sep = line.find_last_of(" \t");
  if (sep == std::string::npos) {
    throw std::invalid_argument("expected '<key> <value>' in '" + line + "'");
  }
  std::string key = line.substr(0, sep);
  const auto key_end = key.find_last_not_of(" \t");
  key.erase(key_end == std::string::npos ? 0 : key_end + 1);
  const auto key_start = key.find_first_not_of(" \t");
  key.erase(0, key_start == std::string::npos ? key.size() : key_start);
  return std::make_pair(key, line.substr(sep + 1));
}

template<typename Parse>
auto load_file(const std::string & path, Parse parse)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  return parse(in);
}

}  // namespace

void PriorityConfig::set(std::string keyword, int priority)
{
  if (keyword.empty()) {
    throw std::invalid_argument("empty keyword");
  }
  if (priority < 0) {
    throw std::invalid_argument("negative priority for keyword '" + keyword + "'");
  }
  keyword_priorities[to_lower(keyword)] = priority;
}

PriorityConfig parse_priority_config(std::istream & in)
{
  PriorityConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      const auto kv = split_config_line(line);
      if (!kv) {
        continue;
      }
      const auto value = parse_int(kv->second);
      if (!value || *value < 0 || *value > 1'000'000) {
        throw std::invalid_argument("priority must be a small non-negative integer");
      }
      if (kv->first == "*") {
        config.default_priority = static_cast<int>(*value);
      } else {
        config.set(kv->first, static_cast<int>(*value));
      }
    } catch (const std::invalid_argument & err) {
      throw std::invalid_argument("priority config line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return config;
}

PriorityConfig load_priority_config(const std::string & path) { return load_file(path, parse_priority_config); }

double TrustRegistry::weight_of(std::string_view source_id) const
{
  const auto it = source_weights.find(source_id);
  return it == source_weights.end() ? default_weight : it->second;
}

void TrustRegistry::set(std::string source_id, double weight)
{
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw std::invalid_argument("weight for '" + source_id + "' outside [0, 1]");
  }
  source_weights[std::move(source_id)] = weight;
}

TrustRegistry parse_trust_registry(std::istream & in)
{
  TrustRegistry registry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      const auto kv = split_config_line(line);
      if (!kv) {
        continue;
      }
      const auto value = parse_double(kv->second);
      if (!value) {
        throw std::invalid_argument("weight is not a number");
      }
      if (kv->first == "*") {
        if (!(*value >= 0.0 && *value <= 1.0)) {
          throw std::invalid_argument("default weight outside [0, 1]");
        }
        registry.default_weight = *value;
      } else {
        registry.set(kv->first, *value);
      }
    } catch (const std::invalid_argument & err) {
      throw std::invalid_argument("trust registry line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return registry;
}

TrustRegistry load_trust_registry(const std::string & path) { return load_file(path, parse_trust_registry); }

std::string_view to_string(RejectionRecord::Stage stage)
{
  return stage == RejectionRecord::Stage::Syntactic ? "syntactic" : "trust";
}

std::int64_t system_now_ms()
{
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
    .count();
}

int keyword_priority(const MicroEvent & event, const PriorityConfig & config)
{
  if (config.keyword_priorities.empty()) {
    return config.default_priority;
  }
  std::vector<std::string> haystacks;
  haystacks.push_back(to_lower(event.text));
  for (const auto & [name, value] : event.attributes) {
    if (const auto * s = std::get_if<std::string>(&value)) {
      haystacks.push_back(to_lower(*s));
    }
  }
  std::optional<int> best;
  for (const auto & [keyword, priority] : config.keyword_priorities) {
    if (best && priority <= *best) {
      continue;
    }
    for (const auto & h : haystacks) {
      if (contains_word(h, keyword)) {
        best = priority;
        break;
      }
    }
  }
  return std::max(best.value_or(config.default_priority), config.default_priority);
}

std::variant<MicroEvent, RejectionRecord> syntactic_check(MicroEvent event, const PriorityConfig & priorities,
                                                          const SyntacticCheckConfig & config)
{
  if (!valid_identifier(event.id)) {
    return reject("invalid id", event.id);
  }
  if (!valid_identifier(event.source_id)) {
    return reject("invalid source", event.id);
  }
  if (event.timestamp_ms <= 0) {
    return reject("ts_ms before epoch", event.id);
  }
  const std::int64_t now = config.now_ms ? config.now_ms() : system_now_ms();
  if (event.timestamp_ms > now + config.clock_skew_ms) {
    return reject("ts_ms in the future", event.id);
  }
  event.priority = keyword_priority(event, priorities);
  return event;
}

std::variant<MicroEvent, RejectionRecord> syntactic_check(const RawRecord & record, const PriorityConfig & priorities,
                                                          const SyntacticCheckConfig & config)
{
  auto converted = to_micro_event(record);
  if (auto * err = std::get_if<FieldError>(&converted)) {
    return reject(err->reason, std::string(record.get("id").value_or("")));
  }
  return syntactic_check(std::get<MicroEvent>(std::move(converted)), priorities, config);
}

ComplexEvent merge(const Match & match, const Rule & rule, std::int64_t detection_time_ms)
{
  ComplexEvent ce;
  ce.complex_type = rule.complex_type;
  ce.rule_id = match.rule_id;
  ce.binding_names = match.binding_names;
  ce.constituents = match.assignment;
  ce.detection_time_ms = detection_time_ms;
  ce.event_time_span = time_span(ce.constituents);
  ce.centroid = centroid(std::span<const EventPtr>(ce.constituents));
  for (const auto & e : ce.constituents) {
    ce.priority = std::max(ce.priority, e->priority);
  }
  return ce;
}

std::variant<SecureEvent, RejectionRecord> trust_analysis(const ComplexEvent & event, const TrustRegistry & registry)
{
  std::vector<SourceWeight> trace;
  double sum = 0.0;
  for (const auto & source : event.distinct_sources()) {
    const double w = registry.weight_of(source);
    trace.push_back({source, w});
    sum += w;
  }
  const double trust = trace.empty() ? 0.0 : sum / static_cast<double>(trace.size());
  if (trust >= registry.acceptance_threshold) {
    return SecureEvent{event, trust, std::move(trace)};
  }
  std::string id = event.rule_id + ":";
  for (const auto & cid : make_fingerprint(event.constituents)) {
    id += cid + ",";
  }
  id.pop_back();
  return RejectionRecord{RejectionRecord::Stage::Trust,
                         "trust " + format_double(trust) + " below threshold " +
                           format_double(registry.acceptance_threshold),
                         std::move(id), trust};
}

bool FusionCounters::conserved() const
{
  return accepted_inputs == engine_ingested && complex_events == secure_events + trust_rejections &&
         inputs == accepted_inputs + syntactic_rejections;
}

FusionPipeline::FusionPipeline(PipelineConfig config)
    : config_(std::move(config)),
      engine_(config_.engine),
      steady_origin_(std::chrono::steady_clock::now()),
      wall_origin_ms_(system_now_ms())
{
}

std::vector<ListenerHandle> FusionPipeline::register_ruleset(const RuleSet & rules)
{
  auto handles = engine_.register_ruleset(rules);
  for (const auto & h : handles) {
    for (const auto & r : rules.rules) {
      if (r.rule_id == h.rule_id) {
        rules_.insert_or_assign(r.rule_id, r);
      }
    }
  }
  return handles;
}

bool FusionPipeline::deregister(const ListenerHandle & handle)
{
  rules_.erase(handle.rule_id);
  return engine_.deregister(handle);
}

std::vector<SecureEvent> FusionPipeline::process(const RawRecord & record)
{
  return accept(syntactic_check(record, config_.priorities, config_.syntactic));
}

std::vector<SecureEvent> FusionPipeline::process(MicroEvent event)
{
  return accept(syntactic_check(std::move(event), config_.priorities, config_.syntactic));
}

std::vector<SecureEvent> FusionPipeline::accept(std::variant<MicroEvent, RejectionRecord> checked)
{
  ++counters_.inputs;
  if (auto * rejection = std::get_if<RejectionRecord>(&checked)) {
    ++counters_.syntactic_rejections;
    rejections_.push_back(std::move(*rejection));
    return {};
  }
  ++counters_.accepted_inputs;

  auto event = std::make_shared<const MicroEvent>(std::get<MicroEvent>(std::move(checked)));
  ++counters_.engine_ingested;
  const auto matches = engine_.ingest(event);

  std::vector<SecureEvent> out;
  for (const auto & match : matches) {
    const auto rule = rules_.find(match.rule_id);
    const ComplexEvent ce = merge(match, rule->second, wall_now_ms());
    ++counters_.complex_events;
    if (complex_hook_) {
      complex_hook_(ce);
    }
    auto trusted = trust_analysis(ce, config_.trust);
    if (auto * secure = std::get_if<SecureEvent>(&trusted)) {
      ++counters_.secure_events;
      out.push_back(std::move(*secure));
    } else {
      ++counters_.trust_rejections;
      rejections_.push_back(std::get<RejectionRecord>(std::move(trusted)));
    }
  }
  return out;
}

std::int64_t FusionPipeline::wall_now_ms() const
{
  const auto elapsed = std::chrono::steady_clock::now() - steady_origin_;
  return wall_origin_ms_ + std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
}

}  // namespace epm
