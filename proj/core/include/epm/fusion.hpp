#ifndef EPM_FUSION_HPP_
#define EPM_FUSION_HPP_

#include "epm/engine.hpp"
#include "epm/event.hpp"
#include "epm/wire.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace epm
{

/// Keyword -> priority. Keywords are lowercase; matching is whole-word and
/// case-insensitive over the event text and string attribute values.
struct PriorityConfig
{
  std::map<std::string, int, std::less<>> keyword_priorities;
  int default_priority{0};

  /// Lowercases the keyword. Throws std::invalid_argument on an empty
  /// keyword or a negative priority.
  void set(std::string keyword, int priority);
};

/// `keyword priority` per line, `#` comments. The keyword `*` sets the
/// default priority. Multi-word keywords are written with the priority last.
PriorityConfig parse_priority_config(std::istream & in);
PriorityConfig load_priority_config(const std::string & path);

struct TrustRegistry
{
  std::map<std::string, double, std::less<>> source_weights;
  double default_weight{0.5};
  double acceptance_threshold{0.5};

  double weight_of(std::string_view source_id) const;
  /// Throws std::invalid_argument if the weight is outside [0, 1].
  void set(std::string source_id, double weight);
};

/// `source_id weight` per line, `#` comments. `*` sets the default weight.
TrustRegistry parse_trust_registry(std::istream & in);
TrustRegistry load_trust_registry(const std::string & path);

struct RejectionRecord
{
  enum class Stage
  {
    Syntactic,
    Trust,
  };

  Stage stage{Stage::Syntactic};
  std::string reason;
  std::string offending_id;
  std::optional<double> trust;  // set for trust rejections
};

std::string_view to_string(RejectionRecord::Stage stage);

struct SyntacticCheckConfig
{
  std::int64_t clock_skew_ms{60'000};
  /// Wall clock used for the future-timestamp bound. Defaults to the
  /// system clock.
  std::function<std::int64_t()> now_ms;
};

std::int64_t system_now_ms();

/// Priority of an event under `config`: the highest priority of any
/// keyword found, never below the default.
int keyword_priority(const MicroEvent & event, const PriorityConfig & config);

/// Validates a typed event (id, timestamp bounds, source) and assigns its
/// priority.
std::variant<MicroEvent, RejectionRecord> syntactic_check(MicroEvent event, const PriorityConfig & priorities,
                                                          const SyntacticCheckConfig & config = {});
/// Same, starting from an unvalidated wire record.
std::variant<MicroEvent, RejectionRecord> syntactic_check(const RawRecord & record,
                                                          const PriorityConfig & priorities,
                                                          const SyntacticCheckConfig & config = {});

ComplexEvent merge(const Match & match, const Rule & rule, std::int64_t detection_time_ms);

/// Trust is the mean weight of the distinct constituent sources.
std::variant<SecureEvent, RejectionRecord> trust_analysis(const ComplexEvent & event, const TrustRegistry & registry);

struct FusionCounters
{
  std::size_t inputs{0};
  std::size_t accepted_inputs{0};
  std::size_t syntactic_rejections{0};
  std::size_t engine_ingested{0};
  std::size_t complex_events{0};
  std::size_t secure_events{0};
  std::size_t trust_rejections{0};

  /// accepted = ingested, complex = secure + trust rejections,
  /// inputs = accepted + syntactic rejections.
  bool conserved() const;
};

struct PipelineConfig
{
  EngineConfig engine;
  PriorityConfig priorities;
  TrustRegistry trust;
  SyntacticCheckConfig syntactic;
};

/**
 * Syntactic check, event merging and trust analysis, in that order. Single
 * writer: configuration changes must not overlap with process().
 */
class FusionPipeline
{
public:
  using ComplexEventHook = std::function<void(const ComplexEvent &)>;

  explicit FusionPipeline(PipelineConfig config = {});

  std::vector<ListenerHandle> register_ruleset(const RuleSet & rules);
  bool deregister(const ListenerHandle & handle);
  void set_priorities(PriorityConfig priorities) { config_.priorities = std::move(priorities); }
  void set_trust(TrustRegistry trust) { config_.trust = std::move(trust); }

  std::vector<SecureEvent> process(const RawRecord & record);
  std::vector<SecureEvent> process(MicroEvent event);

  /// Called once per complex event, right after merging.
  void on_complex_event(ComplexEventHook hook) { complex_hook_ = std::move(hook); }

  const FusionCounters & counters() const { return counters_; }
  const std::vector<RejectionRecord> & rejections() const { return rejections_; }
  void clear_rejections() { rejections_.clear(); }
  const CorrelationEngine & engine() const { return engine_; }
  const PipelineConfig & config() const { return config_; }

private:
  std::vector<SecureEvent> accept(std::variant<MicroEvent, RejectionRecord> checked);
  std::int64_t wall_now_ms() const;

  PipelineConfig config_;
  CorrelationEngine engine_;
  std::map<std::string, Rule, std::less<>> rules_;
  FusionCounters counters_;
  std::vector<RejectionRecord> rejections_;
  ComplexEventHook complex_hook_;
  std::chrono::steady_clock::time_point steady_origin_;
  std::int64_t wall_origin_ms_;
};

}  // namespace epm

#endif  // EPM_FUSION_HPP_
