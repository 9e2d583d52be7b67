#include "epm/rule.hpp"
#include "epm/wire.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace epm
{

namespace
{

enum class Side
{
  Left,
  Right,
};

bool is_binary(const Predicate & p)
{
  return std::holds_alternative<Conjunction>(p.node) || std::holds_alternative<Disjunction>(p.node);
}

void print_predicate(const Predicate & p, std::string & out);

// A compound child is parenthesized unless it is the left operand of the
// same operator, which matches the parser's left associativity.
void print_child(const Predicate & child, std::size_t parent_index, Side side, std::string & out)
{
  const bool bare = !is_binary(child) || (child.node.index() == parent_index && side == Side::Left);
  if (!bare) {
    out.push_back('(');
  }
  print_predicate(child, out);
  if (!bare) {
    out.push_back(')');
  }
}

void print_predicate(const Predicate & p, std::string & out)
{
  if (const auto * eq = std::get_if<FnEq>(&p.node)) {
    out += eq->name + "(\"" + eq->literal + "\")";
  } else if (const auto * cmp = std::get_if<NumCmp>(&p.node)) {
    out += cmp->name + " " + std::string(to_string(cmp->op)) + " " + std::to_string(cmp->value);
  } else if (const auto * conj = std::get_if<Conjunction>(&p.node)) {
    print_child(*conj->left, p.node.index(), Side::Left, out);
    out += " and ";
    print_child(*conj->right, p.node.index(), Side::Right, out);
  } else {
    const auto & disj = std::get<Disjunction>(p.node);
    print_child(*disj.left, p.node.index(), Side::Left, out);
    out += " or ";
    print_child(*disj.right, p.node.index(), Side::Right, out);
  }
}

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

std::string_view to_string(PairMetric metric)
{
  return metric == PairMetric::TimeDiff ? "timeDiff" : "distanceGPS";
}

bool satisfies(const PairConstraint & constraint, const MicroEvent & a, const MicroEvent & b,
               const UnitScale & units)
{
  if (constraint.metric == PairMetric::TimeDiff) {
    const std::int64_t d = a.timestamp_ms > b.timestamp_ms ? a.timestamp_ms - b.timestamp_ms
                                                           : b.timestamp_ms - a.timestamp_ms;
    return static_cast<double>(d) / units.ms_per_time_unit < constraint.threshold;
  }
  return distance_gps(a, b) / units.km_per_distance_unit < constraint.threshold;
}

int Rule::binding_index(std::string_view name) const
{
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    if (bindings[i].name == name) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

bool structurally_equal(const Rule & a, const Rule & b)
{
  if (a.every != b.every || a.window_minutes != b.window_minutes || a.bindings.size() != b.bindings.size() ||
      a.post_filter.constraints.size() != b.post_filter.constraints.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.bindings.size(); ++i) {
    if (a.bindings[i].name != b.bindings[i].name ||
        !structurally_equal(*a.bindings[i].predicate, *b.bindings[i].predicate)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.post_filter.constraints.size(); ++i) {
    const auto & x = a.post_filter.constraints[i];
    const auto & y = b.post_filter.constraints[i];
    if (x.metric != y.metric || x.left != y.left || x.right != y.right || x.threshold != y.threshold) {
      return false;
    }
  }
  return true;
}

std::vector<RuleSet> group_by_type(std::vector<Rule> rules)
{
  std::vector<RuleSet> sets;
  std::map<std::string, std::size_t> index;
  for (auto & rule : rules) {
    auto [it, inserted] = index.emplace(rule.complex_type, sets.size());
    if (inserted) {
      sets.push_back(RuleSet{rule.complex_type, {}, true});
    }
    sets[it->second].rules.push_back(std::move(rule));
  }
  return sets;
}

std::string pretty_print(const Predicate & predicate)
{
  std::string out;
  print_predicate(predicate, out);
  return out;
}

std::string pretty_print(const Rule & rule)
{
  std::string out = "select * from pattern [";
  if (rule.every) {
    out += "every ";
  }
  out.push_back('(');
  for (std::size_t i = 0; i < rule.bindings.size(); ++i) {
    if (i != 0) {
      out += " and ";
    }
    out += rule.bindings[i].name + " = Event(" + pretty_print(*rule.bindings[i].predicate) + ")";
  }
  out += ") where timer:within(" + std::to_string(rule.window_minutes) + " min)]";
  if (!rule.post_filter.constraints.empty()) {
    out += " where (";
    bool first = true;
    for (const auto & c : rule.post_filter.constraints) {
      if (!first) {
        out += " and ";
      }
      first = false;
      out += c.left + "." + std::string(to_string(c.metric)) + "(" + c.right + ") < " + format_double(c.threshold);
    }
    out.push_back(')');
  }
  return out;
}

std::vector<Diagnostic> validate_rule(const Rule & rule, const UnitScale & units)
{
  using Sev = Diagnostic::Severity;
  using Code = Diagnostic::Code;
  std::vector<Diagnostic> out;

  std::set<std::string, std::less<>> names;
  for (const auto & b : rule.bindings) {
    if (!names.insert(b.name).second) {
      out.push_back({Sev::Error, Code::DuplicateBinding, "duplicate binding name '" + b.name + "'"});
    }
  }
  if (rule.bindings.size() < 2) {
    out.push_back({Sev::Error, Code::TooFewBindings, "a rule needs at least two event bindings"});
  }
  if (rule.window_minutes <= 0) {
    out.push_back({Sev::Error, Code::NonPositiveWindow, "window must be positive"});
  }

  const double window_units = static_cast<double>(rule.window_ms()) / units.ms_per_time_unit;
  for (const auto & c : rule.post_filter.constraints) {
    for (const auto * name : {&c.left, &c.right}) {
      if (!names.contains(*name)) {
        out.push_back({Sev::Error, Code::UnknownBinding, "unknown binding '" + *name + "' in post-filter"});
      }
    }
    if (c.left == c.right) {
      out.push_back({Sev::Error, Code::SelfConstraint, "constraint relates '" + c.left + "' to itself"});
    }
    if (!(c.threshold > 0.0)) {
      out.push_back({Sev::Error, Code::NonPositiveThreshold, "threshold must be positive"});
    }
    if (c.metric == PairMetric::TimeDiff && rule.window_minutes > 0 && c.threshold >= window_units) {
      out.push_back({Sev::Warning, Code::RedundantTimeConstraint,
                     "timeDiff threshold " + format_double(c.threshold) + " is not tighter than the " +
                       std::to_string(rule.window_minutes) + " min window"});
    }
  }

  for (const auto & b : rule.bindings) {
    if (!b.predicate) {
      out.push_back({Sev::Error, Code::UnsatisfiablePredicate, "binding '" + b.name + "' has no predicate"});
      continue;
    }
    switch (check_satisfiable(*b.predicate)) {
      case Satisfiability::Satisfiable: break;
      case Satisfiability::Unsatisfiable:
        out.push_back({Sev::Error, Code::UnsatisfiablePredicate,
                       "predicate of binding '" + b.name + "' can never be satisfied"});
        break;
      case Satisfiability::Unknown:
        out.push_back({Sev::Warning, Code::PredicateTooComplex,
                       "predicate of binding '" + b.name + "' is too complex to check for satisfiability"});
        break;
    }
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic> & diagnostics)
{
  for (const auto & d : diagnostics) {
    if (d.severity == Diagnostic::Severity::Error) {
      return true;
    }
  }
  return false;
}

std::vector<Rule> parse_rule_file(std::string_view text)
{
  std::vector<Rule> rules;
  std::set<std::string> ids;

  std::map<std::string, std::string> meta;
  std::string statement;
  std::size_t statement_line = 0;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (statement.empty()) {
      meta.clear();
      return;
    }
    const auto type = meta.find("type");
    if (type == meta.end() || type->second.empty()) {
      throw RuleError(RuleError::Kind::Semantic, 0,
                      "rule at line " + std::to_string(statement_line) + " has no '# type:' line");
    }
    std::string id = meta.contains("id") ? meta["id"] : "rule-" + std::to_string(rules.size() + 1);
    if (!ids.insert(id).second) {
      throw RuleError(RuleError::Kind::Semantic, 0, "duplicate rule id '" + id + "'");
    }
    try {
      rules.push_back(parse_rule(statement, type->second, id));
    } catch (const RuleError & err) {
      throw RuleError(err.kind(), err.position(),
                      "rule '" + id + "' (line " + std::to_string(statement_line) + "): " + err.what(),
                      err.expected());
    }
    meta.clear();
    statement.clear();
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    const std::string_view line = trim(text.substr(pos, end - pos));
    ++line_no;
    if (line.empty()) {
      flush();
    } else if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      const std::size_t colon = body.find(':');
      if (colon != std::string_view::npos) {
        const std::string key(trim(body.substr(0, colon)));
        if (key == "id" || key == "type") {
          meta[key] = std::string(trim(body.substr(colon + 1)));
        }
      }
    } else {
      if (statement.empty()) {
        statement_line = line_no;
      } else {
        statement.push_back(' ');
      }
      statement += line;
    }
    if (end == text.size()) {
      break;
    }
    pos = end + 1;
  }
  flush();
  return rules;
}

std::vector<Rule> load_rule_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open rule file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rule_file(buf.str());
}

std::vector<Rule> builtin_rules() { return parse_rule_file(builtin_rules_text()); }

}  // namespace epm
