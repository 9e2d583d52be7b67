#include "epm/rule.hpp"
#include "epm/wire.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

namespace epm
{

namespace
{

enum class Tok
{
  Ident,
  String,
  Number,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Star,
  Equal,
  Less,
  Greater,
  LessEqual,
  GreaterEqual,
  Colon,
  Dot,
  Minus,
  End,
};

struct Token
{
  Tok kind{Tok::End};
  std::string text;
  std::size_t pos{0};
};

constexpr std::array<std::string_view, 8> kReserved = {
  "select", "from", "pattern", "every", "and", "or", "where", "Event",
};

constexpr std::size_t kMaxDepth = 64;
constexpr std::size_t kMaxLeaves = 1024;
constexpr std::int64_t kMaxWindowMinutes = 1'000'000'000;

bool is_reserved(std::string_view word)
{
  for (auto r : kReserved) {
    if (r == word) {
      return true;
    }
  }
  return false;
}

bool is_alpha(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string describe(const Token & t)
{
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::String: return "string \"" + t.text + "\"";
    case Tok::Ident: return "'" + t.text + "'";
    default: return "'" + t.text + "'";
  }
}

std::vector<Token> lex(std::string_view src)
{
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_alpha(c)) {
      while (i < src.size() && (is_alpha(src[i]) || is_digit(src[i]))) {
        ++i;
      }
      out.push_back({Tok::Ident, std::string(src.substr(start, i - start)), start});
      continue;
    }
    if (is_digit(c)) {
      while (i < src.size() && is_digit(src[i])) {
        ++i;
      }
      if (i + 1 < src.size() && src[i] == '.' && is_digit(src[i + 1])) {
        ++i;
        while (i < src.size() && is_digit(src[i])) {
          ++i;
        }
      }
      if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < src.size() && (src[j] == '+' || src[j] == '-')) {
          ++j;
        }
        if (j < src.size() && is_digit(src[j])) {
          i = j;
          while (i < src.size() && is_digit(src[i])) {
            ++i;
          }
        }
      }
      out.push_back({Tok::Number, std::string(src.substr(start, i - start)), start});
      continue;
    }
    if (c == '"') {
      const std::size_t close = src.find('"', i + 1);
      if (close == std::string_view::npos) {
        throw RuleError(RuleError::Kind::Lexical, start, "unterminated string literal");
      }
      out.push_back({Tok::String, std::string(src.substr(i + 1, close - i - 1)), start});
      i = close + 1;
      continue;
    }
    auto single = [&](Tok kind) {
      out.push_back({kind, std::string(1, c), start});
      ++i;
    };
    switch (c) {
      case '(': single(Tok::LParen); break;
      case ')': single(Tok::RParen); break;
      case '[': single(Tok::LBracket); break;
      case ']': single(Tok::RBracket); break;
      case '*': single(Tok::Star); break;
      case '=': single(Tok::Equal); break;
      case ':': single(Tok::Colon); break;
      case '.': single(Tok::Dot); break;
      case '-': single(Tok::Minus); break;
      case '<':
      case '>':
        if (i + 1 < src.size() && src[i + 1] == '=') {
          out.push_back({c == '<' ? Tok::LessEqual : Tok::GreaterEqual, std::string(src.substr(i, 2)), start});
          i += 2;
        } else {
          single(c == '<' ? Tok::Less : Tok::Greater);
        }
        break;
      default: {
        std::string shown;
        const auto byte = static_cast<unsigned char>(c);
        if (byte >= 0x20 && byte < 0x7f) {
          shown = std::string("'") + c + "'";
        } else {
          static constexpr char kHex[] = "0123456789abcdef";
          shown = std::string("byte 0x") + kHex[byte >> 4] + kHex[byte & 0xf];
        }
        throw RuleError(RuleError::Kind::Lexical, start, "unexpected character " + shown);
      }
    }
  }
  out.push_back({Tok::End, "", src.size()});
  return out;
}

class Parser
{
public:
  explicit Parser(std::string_view src) : tokens_(lex(src)) {}

  Rule parse_statement()
  {
    Rule rule;
    expect_word("select");
    expect(Tok::Star, "'*'");
    expect_word("from");
    expect_word("pattern");
    expect(Tok::LBracket, "'['");
    if (peek_word("every")) {
      advance();
      rule.every = true;
    } else {
      rule.every = false;
    }

    std::optional<std::int64_t> window;
    std::size_t window_pos = 0;
    auto take_window = [&] {
      const std::size_t pos = peek().pos;
      const auto minutes = parse_within();
      if (window) {
        throw RuleError(RuleError::Kind::Syntax, pos, "duplicate timer:within clause");
      }
      window = minutes;
      window_pos = pos;
    };

    if (peek().kind == Tok::LParen) {
      advance();
      parse_bindings(rule);
      if (peek_word("where")) {
        take_window();
      }
      expect(Tok::RParen, "')'", {"'and'", "'where'"});
      if (peek_word("where")) {
        take_window();
      }
    } else {
      parse_bindings(rule);
      if (peek_word("where")) {
        take_window();
      }
    }
    if (!window) {
      fail({"'where'"});
    }
    expect(Tok::RBracket, "']'");

    rule.window_minutes = *window;
    if (rule.window_minutes <= 0) {
      throw RuleError(RuleError::Kind::Semantic, window_pos, "window must be positive");
    }
    if (rule.window_minutes > kMaxWindowMinutes) {
      throw RuleError(RuleError::Kind::Semantic, window_pos, "window too large");
    }

    if (peek_word("where")) {
      advance();
      parse_post_conjunction(rule.post_filter, 0);
    }
    if (peek().kind != Tok::End) {
      fail({"'where'", "end of input"});
    }

    check_semantics(rule);
    return rule;
  }

private:
  const Token & peek() const { return tokens_[index_]; }
  const Token & advance() { return tokens_[index_ < tokens_.size() - 1 ? index_++ : index_]; }

  bool peek_word(std::string_view word) const
  {
    return peek().kind == Tok::Ident && peek().text == word;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const
  {
    std::string msg = "expected ";
    if (expected.size() > 1) {
      msg += "one of ";
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i != 0) {
        msg += ", ";
      }
      msg += expected[i];
    }
    msg += " but found " + describe(peek());
    throw RuleError(RuleError::Kind::Syntax, peek().pos, msg, std::move(expected));
  }

  const Token & expect(Tok kind, std::string what, std::vector<std::string> also = {})
  {
    if (peek().kind != kind) {
      also.insert(also.begin(), std::move(what));
      fail(std::move(also));
    }
    return advance();
  }

  void expect_word(std::string_view word)
  {
    if (!peek_word(word)) {
      fail({"'" + std::string(word) + "'"});
    }
    advance();
  }

  const Token & expect_identifier(std::string what)
  {
    if (peek().kind != Tok::Ident || is_reserved(peek().text)) {
      fail({std::move(what)});
    }
    return advance();
  }

  std::int64_t expect_integer()
  {
    const Token & t = expect(Tok::Number, "integer");
    const auto value = parse_int(t.text);
    if (!value) {
      throw RuleError(RuleError::Kind::Syntax, t.pos, "expected integer but found '" + t.text + "'", {"integer"});
    }
    return *value;
  }

  std::int64_t parse_within()
  {
    expect_word("where");
    expect_word("timer");
    expect(Tok::Colon, "':'");
    expect_word("within");
    expect(Tok::LParen, "'('");
    const std::int64_t minutes = expect_integer();
    expect_word("min");
    expect(Tok::RParen, "')'");
    return minutes;
  }

  void parse_bindings(Rule & rule)
  {
    parse_binding(rule);
    while (peek_word("and")) {
      advance();
      parse_binding(rule);
    }
  }

  void parse_binding(Rule & rule)
  {
    const Token & name = expect_identifier("binding name");
    binding_pos_.push_back(name.pos);
    expect(Tok::Equal, "'='");
    expect_word("Event");
    expect(Tok::LParen, "'('");
    leaves_ = 0;
    auto predicate = parse_disjunction(1);
    expect(Tok::RParen, "')'", {"'and'", "'or'"});
    rule.bindings.push_back({name.text, std::move(predicate)});
  }

  void enter(std::size_t depth) const
  {
    if (depth > kMaxDepth) {
      throw RuleError(RuleError::Kind::Syntax, peek().pos, "nesting too deep");
    }
  }

  PredicatePtr parse_disjunction(std::size_t depth)
  {
    enter(depth);
    auto left = parse_conjunction(depth);
    while (peek_word("or")) {
      advance();
      left = make_or(std::move(left), parse_conjunction(depth));
    }
    return left;
  }

  PredicatePtr parse_conjunction(std::size_t depth)
  {
    auto left = parse_atom(depth);
    while (peek_word("and")) {
      advance();
      left = make_and(std::move(left), parse_atom(depth));
    }
    return left;
  }

  PredicatePtr parse_atom(std::size_t depth)
  {
    if (peek().kind == Tok::LParen) {
      advance();
      auto inner = parse_disjunction(depth + 1);
      expect(Tok::RParen, "')'", {"'and'", "'or'"});
      return inner;
    }
    const Token & name = expect_identifier("predicate");
    if (++leaves_ > kMaxLeaves) {
      throw RuleError(RuleError::Kind::Syntax, name.pos, "predicate too large");
    }
    switch (peek().kind) {
      case Tok::LParen: {
        advance();
        const Token & literal = expect(Tok::String, "string literal");
        expect(Tok::RParen, "')'");
        return make_fn_eq(name.text, literal.text);
      }
      case Tok::Less:
      case Tok::Greater:
      case Tok::LessEqual:
      case Tok::GreaterEqual:
      case Tok::Equal: {
        const Tok op = advance().kind;
        bool negative = false;
        if (peek().kind == Tok::Minus) {
          advance();
          negative = true;
        }
        const std::size_t pos = peek().pos;
        std::int64_t value = expect_integer();
        if (negative) {
          if (value == std::numeric_limits<std::int64_t>::min()) {
            throw RuleError(RuleError::Kind::Syntax, pos, "integer out of range");
          }
          value = -value;
        }
        return make_num_cmp(name.text, to_compare_op(op), value);
      }
      default: fail({"'('", "comparison operator"});
    }
  }

  static CompareOp to_compare_op(Tok t)
  {
    switch (t) {
      case Tok::Less: return CompareOp::Less;
      case Tok::Greater: return CompareOp::Greater;
      case Tok::LessEqual: return CompareOp::LessEqual;
      case Tok::GreaterEqual: return CompareOp::GreaterEqual;
      default: return CompareOp::Equal;
    }
  }

  void parse_post_conjunction(PostFilter & filter, std::size_t depth)
  {
    enter(depth);
    parse_post_atom(filter, depth);
    while (peek_word("and")) {
      advance();
      parse_post_atom(filter, depth);
    }
  }

  void parse_post_atom(PostFilter & filter, std::size_t depth)
  {
    if (peek().kind == Tok::LParen) {
      advance();
      parse_post_conjunction(filter, depth + 1);
      expect(Tok::RParen, "')'", {"'and'"});
      return;
    }
    const Token & left = expect_identifier("binding name");
    expect(Tok::Dot, "'.'");
    PairMetric metric{};
    if (peek_word("timeDiff")) {
      metric = PairMetric::TimeDiff;
    } else if (peek_word("distanceGPS")) {
      metric = PairMetric::DistanceGps;
    } else {
      fail({"'timeDiff'", "'distanceGPS'"});
    }
    advance();
    expect(Tok::LParen, "'('");
    const Token & right = expect_identifier("binding name");
    expect(Tok::RParen, "')'");
    expect(Tok::Less, "'<'");
    const Token & number = expect(Tok::Number, "number");
    const auto threshold = parse_double(number.text);
    if (!threshold || !std::isfinite(*threshold)) {
      throw RuleError(RuleError::Kind::Syntax, number.pos, "threshold out of range");
    }
    filter.constraints.push_back({metric, left.text, right.text, *threshold});
    constraint_pos_.push_back({left.pos, right.pos, number.pos});
  }

  void check_semantics(const Rule & rule) const
  {
    std::set<std::string, std::less<>> names;
    for (std::size_t i = 0; i < rule.bindings.size(); ++i) {
      if (!names.insert(rule.bindings[i].name).second) {
        throw RuleError(RuleError::Kind::Semantic, binding_pos_[i],
                        "duplicate binding name '" + rule.bindings[i].name + "'");
      }
    }
    if (rule.bindings.size() < 2) {
      throw RuleError(RuleError::Kind::Semantic, binding_pos_.front(), "a rule needs at least two event bindings");
    }
    for (std::size_t i = 0; i < rule.post_filter.constraints.size(); ++i) {
      const auto & c = rule.post_filter.constraints[i];
      const auto & pos = constraint_pos_[i];
      if (!names.contains(c.left)) {
        throw RuleError(RuleError::Kind::Semantic, pos.left, "unknown binding '" + c.left + "'");
      }
      if (!names.contains(c.right)) {
        throw RuleError(RuleError::Kind::Semantic, pos.right, "unknown binding '" + c.right + "'");
      }
      if (c.left == c.right) {
        throw RuleError(RuleError::Kind::Semantic, pos.right, "constraint relates '" + c.left + "' to itself");
      }
      if (!(c.threshold > 0.0)) {
        throw RuleError(RuleError::Kind::Semantic, pos.threshold, "threshold must be positive");
      }
    }
  }

  struct ConstraintPos
  {
    std::size_t left;
    std::size_t right;
    std::size_t threshold;
  };

  std::vector<Token> tokens_;
  std::size_t index_{0};
  std::size_t leaves_{0};
  std::vector<std::size_t> binding_pos_;
  std::vector<ConstraintPos> constraint_pos_;
};

std::string format_message(RuleError::Kind kind, std::size_t position, const std::string & message)
{
  const char * label = kind == RuleError::Kind::Lexical  ? "lexical error"
                       : kind == RuleError::Kind::Syntax ? "syntax error"
                                                         : "semantic error";
  return std::string(label) + " at " + std::to_string(position) + ": " + message;
}

}  // namespace

RuleError::RuleError(Kind kind, std::size_t position, std::string message, std::vector<std::string> expected)
    : std::runtime_error(format_message(kind, position, message)),
      kind_(kind),
      position_(position),
      expected_(std::move(expected))
{
}

Rule parse_rule(std::string_view text, std::string complex_type, std::string rule_id)
{
  Parser parser(text);
  Rule rule = parser.parse_statement();
  rule.complex_type = std::move(complex_type);
  rule.rule_id = std::move(rule_id);
  rule.source_text = std::string(text);
  return rule;
}

}  // namespace epm
