#ifndef EPM_PREDICATE_HPP_
#define EPM_PREDICATE_HPP_

#include "epm/event.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace epm
{

enum class CompareOp
{
  Less,
  Greater,
  LessEqual,
  GreaterEqual,
  Equal,
};

std::string_view to_string(CompareOp op);

struct Predicate;
using PredicatePtr = std::shared_ptr<const Predicate>;

/// `name("literal")`: attribute `name` holds exactly this string.
struct FnEq
{
  std::string name;
  std::string literal;
};

/// `name > 10`: attribute `name` holds an integer satisfying the comparison.
struct NumCmp
{
  std::string name;
  CompareOp op{CompareOp::Equal};
  std::int64_t value{0};
};

struct Conjunction
{
  PredicatePtr left;
  PredicatePtr right;
};

struct Disjunction
{
  PredicatePtr left;
  PredicatePtr right;
};

struct Predicate
{
  std::variant<FnEq, NumCmp, Conjunction, Disjunction> node;
};

PredicatePtr make_fn_eq(std::string name, std::string literal);
PredicatePtr make_num_cmp(std::string name, CompareOp op, std::int64_t value);
PredicatePtr make_and(PredicatePtr left, PredicatePtr right);
PredicatePtr make_or(PredicatePtr left, PredicatePtr right);

/// A missing attribute, or one of the wrong kind, fails the leaf.
bool evaluate(const Predicate & predicate, const Attributes & attrs);

bool structurally_equal(const Predicate & a, const Predicate & b);

/// Leaves of one disjunct of the disjunctive normal form.
using Conjunct = std::vector<std::variant<FnEq, NumCmp>>;

/// Expands to DNF. Returns nullopt if more than `limit` disjuncts would be
/// produced.
std::optional<std::vector<Conjunct>> to_dnf(const Predicate & predicate, std::size_t limit = 4096);

/// Smallest attribute map satisfying every leaf of the conjunct, or nullopt
/// if the leaves contradict each other. Integer constraints are resolved to
/// the lowest admissible value when a lower bound exists, otherwise the
/// highest.
std::optional<Attributes> witness(const Conjunct & conjunct);

enum class Satisfiability
{
  Satisfiable,
  Unsatisfiable,
  Unknown,  // DNF too large to check
};

Satisfiability check_satisfiable(const Predicate & predicate);

/// Every string literal and integer bound mentioned by the predicate.
void collect_literals(const Predicate & predicate, std::vector<FnEq> & strings, std::vector<NumCmp> & numbers);

}  // namespace epm

#endif  // EPM_PREDICATE_HPP_
