#include "epm/predicate.hpp"

#include <limits>
#include <map>

namespace epm
{

namespace
{

template<class... Ts>
struct Overloaded : Ts...
{
  using Ts::operator()...;
};
template<class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool compare(std::int64_t lhs, CompareOp op, std::int64_t rhs)
{
  switch (op) {
    case CompareOp::Less: return lhs < rhs;
    case CompareOp::Greater: return lhs > rhs;
    case CompareOp::LessEqual: return lhs <= rhs;
    case CompareOp::GreaterEqual: return lhs >= rhs;
    case CompareOp::Equal: return lhs == rhs;
  }
  return false;
}

// Integer interval or exact string requirement for one attribute name.
struct Constraint
{
  std::optional<std::string> text;
  bool numeric{false};
  std::int64_t lo{std::numeric_limits<std::int64_t>::min()};
  std::int64_t hi{std::numeric_limits<std::int64_t>::max()};
  bool empty{false};
};

void narrow(Constraint & c, CompareOp op, std::int64_t v)
{
  constexpr auto kMin = std::numeric_limits<std::int64_t>::min();
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  switch (op) {
    case CompareOp::Less:
      if (v == kMin) {
        c.empty = true;
      } else {
        c.hi = std::min(c.hi, v - 1);
      }
      break;
    case CompareOp::LessEqual: c.hi = std::min(c.hi, v); break;
    case CompareOp::Greater:
      if (v == kMax) {
        c.empty = true;
      } else {
        c.lo = std::max(c.lo, v + 1);
      }
      break;
    case CompareOp::GreaterEqual: c.lo = std::max(c.lo, v); break;
    case CompareOp::Equal:
      c.lo = std::max(c.lo, v);
      c.hi = std::min(c.hi, v);
      break;
  }
  if (c.lo > c.hi) {
    c.empty = true;
  }
}

}  // namespace

std::string_view to_string(CompareOp op)
{
  switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::Greater: return ">";
    case CompareOp::LessEqual: return "<=";
    case CompareOp::GreaterEqual: return ">=";
    case CompareOp::Equal: return "=";
  }
  return "?";
}

PredicatePtr make_fn_eq(std::string name, std::string literal)
{
  return std::make_shared<const Predicate>(Predicate{FnEq{std::move(name), std::move(literal)}});
}

PredicatePtr make_num_cmp(std::string name, CompareOp op, std::int64_t value)
{
  return std::make_shared<const Predicate>(Predicate{NumCmp{std::move(name), op, value}});
}

PredicatePtr make_and(PredicatePtr left, PredicatePtr right)
{
  return std::make_shared<const Predicate>(Predicate{Conjunction{std::move(left), std::move(right)}});
}

PredicatePtr make_or(PredicatePtr left, PredicatePtr right)
{
  return std::make_shared<const Predicate>(Predicate{Disjunction{std::move(left), std::move(right)}});
}

bool evaluate(const Predicate & predicate, const Attributes & attrs)
{
  return std::visit(
    Overloaded{
      [&](const FnEq & leaf) {
        const auto it = attrs.find(leaf.name);
        if (it == attrs.end()) {
          return false;
        }
        const auto * s = std::get_if<std::string>(&it->second);
        return s != nullptr && *s == leaf.literal;
      },
      [&](const NumCmp & leaf) {
        const auto it = attrs.find(leaf.name);
        if (it == attrs.end()) {
          return false;
        }
        const auto * n = std::get_if<std::int64_t>(&it->second);
        return n != nullptr && compare(*n, leaf.op, leaf.value);
      },
      [&](const Conjunction & node) { return evaluate(*node.left, attrs) && evaluate(*node.right, attrs); },
      [&](const Disjunction & node) { return evaluate(*node.left, attrs) || evaluate(*node.right, attrs); },
    },
    predicate.node);
}

bool structurally_equal(const Predicate & a, const Predicate & b)
{
  if (a.node.index() != b.node.index()) {
    return false;
  }
  return std::visit(
    Overloaded{
      [&](const FnEq & x) {
        const auto & y = std::get<FnEq>(b.node);
        return x.name == y.name && x.literal == y.literal;
      },
      [&](const NumCmp & x) {
        const auto & y = std::get<NumCmp>(b.node);
        return x.name == y.name && x.op == y.op && x.value == y.value;
      },
      [&](const Conjunction & x) {
        const auto & y = std::get<Conjunction>(b.node);
        return structurally_equal(*x.left, *y.left) && structurally_equal(*x.right, *y.right);
      },
      [&](const Disjunction & x) {
        const auto & y = std::get<Disjunction>(b.node);
        return structurally_equal(*x.left, *y.left) && structurally_equal(*x.right, *y.right);
      },
    },
    a.node);
}

std::optional<std::vector<Conjunct>> to_dnf(const Predicate & predicate, std::size_t limit)
{
  return std::visit(
    Overloaded{
      [](const FnEq & leaf) -> std::optional<std::vector<Conjunct>> {
        return std::vector<Conjunct>{Conjunct{leaf}};
      },
      [](const NumCmp & leaf) -> std::optional<std::vector<Conjunct>> {
        return std::vector<Conjunct>{Conjunct{leaf}};
      },
      [&](const Disjunction & node) -> std::optional<std::vector<Conjunct>> {
        auto left = to_dnf(*node.left, limit);
        auto right = to_dnf(*node.right, limit);
        if (!left || !right || left->size() + right->size() > limit) {
          return std::nullopt;
        }
        left->insert(left->end(), right->begin(), right->end());
        return left;
      },
      [&](const Conjunction & node) -> std::optional<std::vector<Conjunct>> {
        auto left = to_dnf(*node.left, limit);
        auto right = to_dnf(*node.right, limit);
        if (!left || !right || left->size() * right->size() > limit) {
          return std::nullopt;
        }
        std::size_t leaves_left = 0;
        std::size_t leaves_right = 0;
        for (const auto & c : *left) {
          leaves_left += c.size();
        }
        for (const auto & c : *right) {
          leaves_right += c.size();
        }
        if (left->size() * leaves_right + right->size() * leaves_left > limit * 16) {
          return std::nullopt;
        }
        std::vector<Conjunct> out;
        out.reserve(left->size() * right->size());
        for (const auto & l : *left) {
          for (const auto & r : *right) {
            Conjunct c = l;
            c.insert(c.end(), r.begin(), r.end());
            out.push_back(std::move(c));
          }
        }
        return out;
      },
    },
    predicate.node);
}

std::optional<Attributes> witness(const Conjunct & conjunct)
{
  std::map<std::string, Constraint, std::less<>> by_name;
  for (const auto & leaf : conjunct) {
    if (const auto * eq = std::get_if<FnEq>(&leaf)) {
      auto & c = by_name[eq->name];
      if (c.numeric || (c.text && *c.text != eq->literal)) {
        return std::nullopt;
      }
      c.text = eq->literal;
    } else {
      const auto & cmp = std::get<NumCmp>(leaf);
      auto & c = by_name[cmp.name];
      if (c.text) {
        return std::nullopt;
      }
      c.numeric = true;
      narrow(c, cmp.op, cmp.value);
      if (c.empty) {
        return std::nullopt;
      }
    }
  }

  Attributes attrs;
  for (auto & [name, c] : by_name) {
    if (c.text) {
      attrs.emplace(name, *c.text);
    } else if (c.lo != std::numeric_limits<std::int64_t>::min()) {
      attrs.emplace(name, c.lo);
    } else if (c.hi != std::numeric_limits<std::int64_t>::max()) {
      attrs.emplace(name, c.hi);
    } else {
      attrs.emplace(name, std::int64_t{0});
    }
  }
  return attrs;
}

Satisfiability check_satisfiable(const Predicate & predicate)
{
  const auto dnf = to_dnf(predicate);
  if (!dnf) {
    return Satisfiability::Unknown;
  }
  for (const auto & c : *dnf) {
    if (witness(c)) {
      return Satisfiability::Satisfiable;
    }
  }
  return Satisfiability::Unsatisfiable;
}

void collect_literals(const Predicate & predicate, std::vector<FnEq> & strings, std::vector<NumCmp> & numbers)
{
  std::visit(
    Overloaded{
      [&](const FnEq & leaf) { strings.push_back(leaf); },
      [&](const NumCmp & leaf) { numbers.push_back(leaf); },
      [&](const Conjunction & node) {
        collect_literals(*node.left, strings, numbers);
        collect_literals(*node.right, strings, numbers);
      },
      [&](const Disjunction & node) {
        collect_literals(*node.left, strings, numbers);
        collect_literals(*node.right, strings, numbers);
      },
    },
    predicate.node);
}

}  // namespace epm
