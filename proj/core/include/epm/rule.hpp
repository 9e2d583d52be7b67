#ifndef EPM_RULE_HPP_
#define EPM_RULE_HPP_

#include "epm/event.hpp"
#include "epm/predicate.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace epm
{

struct EventBinding
{
  std::string name;
  PredicatePtr predicate;
};

enum class PairMetric
{
  TimeDiff,     // event1.timeDiff(event2) < threshold  (time units)
  DistanceGps,  // event1.distanceGPS(event2) < threshold  (distance units)
};

std::string_view to_string(PairMetric metric);

struct PairConstraint
{
  PairMetric metric{PairMetric::TimeDiff};
  std::string left;
  std::string right;
  double threshold{0.0};
};

/// Whether `a` and `b` satisfy one pairwise constraint. This is the single
/// definition of constraint semantics used by the engine and the oracle.
bool satisfies(const PairConstraint & constraint, const MicroEvent & a, const MicroEvent & b,
               const UnitScale & units);

/// Conjunction of pairwise constraints applied after predicates and window.
struct PostFilter
{
  std::vector<PairConstraint> constraints;
};

/**
 * One compiled correlation rule. A rule identifies exactly one complex-event
 * type. `window_minutes` bounds the event-time span of a match.
 */
struct Rule
{
  std::string rule_id;
  std::string complex_type;
  std::vector<EventBinding> bindings;
  std::int64_t window_minutes{0};
  PostFilter post_filter;
  bool every{true};
  std::string source_text;

  std::int64_t window_ms() const { return window_minutes * 60'000; }
  /// Index of the binding called `name`, or -1.
  int binding_index(std::string_view name) const;
};

/// Compares the pattern structure only; id, type and source text are
/// metadata.
bool structurally_equal(const Rule & a, const Rule & b);

struct RuleSet
{
  std::string name;
  std::vector<Rule> rules;
  bool active{true};
};

/// Groups rules by complex type, one set per type, in first-seen order.
std::vector<RuleSet> group_by_type(std::vector<Rule> rules);

class RuleError : public std::runtime_error
{
public:
  enum class Kind
  {
    Lexical,
    Syntax,
    Semantic,
  };

  RuleError(Kind kind, std::size_t position, std::string message, std::vector<std::string> expected = {});

  Kind kind() const { return kind_; }
  /// Byte offset into the rule text.
  std::size_t position() const { return position_; }
  const std::vector<std::string> & expected() const { return expected_; }

private:
  Kind kind_;
  std::size_t position_;
  std::vector<std::string> expected_;
};

/// Parses one rule statement. Throws RuleError on lexical, syntax or
/// structural semantic problems (unknown or duplicate bindings, bad window,
/// non-positive thresholds).
Rule parse_rule(std::string_view text, std::string complex_type, std::string rule_id = {});

/// Canonical single-spaced form; parse_rule(pretty_print(r)) is
/// structurally equal to r.
std::string pretty_print(const Rule & rule);
std::string pretty_print(const Predicate & predicate);

struct Diagnostic
{
  enum class Severity
  {
    Warning,
    Error,
  };
  enum class Code
  {
    TooFewBindings,
    DuplicateBinding,
    UnknownBinding,
    SelfConstraint,
    NonPositiveWindow,
    NonPositiveThreshold,
    UnsatisfiablePredicate,
    RedundantTimeConstraint,
    PredicateTooComplex,
  };

  Severity severity{Severity::Error};
  Code code{Code::UnknownBinding};
  std::string message;
};

/// Empty iff the rule is sound. Errors make a rule unusable; warnings flag
/// constraints that can never bind.
std::vector<Diagnostic> validate_rule(const Rule & rule, const UnitScale & units = {});
bool has_errors(const std::vector<Diagnostic> & diagnostics);

/**
 * Ruleset text format: blocks separated by blank lines. Each block holds
 * `# key: value` metadata lines (`id`, `type`; other keys are kept as
 * commentary) and one rule statement, which may span several lines. Blocks
 * with no statement are comments.
 */
std::vector<Rule> parse_rule_file(std::string_view text);
std::vector<Rule> load_rule_file(const std::string & path);

/// Rules shipped with the library (the surveillance scenario corpus).
std::vector<Rule> builtin_rules();
std::string_view builtin_rules_text();

}  // namespace epm

#endif  // EPM_RULE_HPP_
