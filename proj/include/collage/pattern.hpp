#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "collage/error.hpp"
#include "collage/graph.hpp"

namespace collage {

using Literal = std::variant<std::int64_t, double, std::string>;

struct Equals {
  Literal value;
  bool operator==(const Equals&) const = default;
};
struct OneOf {
  std::vector<Literal> values;
  bool operator==(const OneOf&) const = default;
};
struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;  // inclusive
  bool operator==(const IntRange&) const = default;
};

struct AttrConstraint {
  std::string key;
  std::variant<Equals, OneOf, IntRange> predicate;
  bool operator==(const AttrConstraint&) const = default;
};

namespace detail {

inline bool literal_equals(const Literal& lit, const AttrValue& attr) {
  if (const auto* s = std::get_if<std::string>(&lit)) {
    const auto* a = std::get_if<std::string>(&attr);
    return a && *a == *s;
  }
  double lhs = std::holds_alternative<std::int64_t>(lit) ? static_cast<double>(std::get<std::int64_t>(lit))
                                                         : std::get<double>(lit);
  if (const auto* i = std::get_if<std::int64_t>(&attr)) {
    if (const auto* li = std::get_if<std::int64_t>(&lit)) return *li == *i;
    return lhs == static_cast<double>(*i);
  }
  if (const auto* d = std::get_if<double>(&attr)) return lhs == *d;
  return false;
}

}  // namespace detail

inline bool satisfies(const AttrConstraint& c, const AttrMap& attrs) {
  auto it = attrs.find(c.key);
  if (it == attrs.end()) return false;
  const AttrValue& value = it->second;
  return std::visit(
      [&](const auto& pred) -> bool {
        using P = std::decay_t<decltype(pred)>;
        if constexpr (std::is_same_v<P, Equals>) {
          return detail::literal_equals(pred.value, value);
        } else if constexpr (std::is_same_v<P, OneOf>) {
          for (const auto& v : pred.values)
            if (detail::literal_equals(v, value)) return true;
          return false;
        } else {
          const auto* i = std::get_if<std::int64_t>(&value);
          return i && pred.lo <= *i && *i <= pred.hi;
        }
      },
      c.predicate);
}

/// One node of a pattern tree. `kRef` re-uses the graph node bound by an
/// earlier `$label:`-tagged operator, which lets a tree express shared
/// producers (diamonds).
struct PatternNode {
  enum class Kind { kOp, kWildcard, kRef };

  Kind kind = Kind::kWildcard;
  std::string op;
  std::string label;  // kOp: optional binding label; kRef: referenced label
  std::vector<PatternNode> args;
  std::vector<AttrConstraint> constraints;

  static PatternNode wildcard() { return {}; }
  static PatternNode ref(std::string label) {
    PatternNode n;
    n.kind = Kind::kRef;
    n.label = std::move(label);
    return n;
  }
  static PatternNode op_node(std::string op, std::vector<PatternNode> args = {},
                             std::vector<AttrConstraint> constraints = {}) {
    PatternNode n;
    n.kind = Kind::kOp;
    n.op = std::move(op);
    n.args = std::move(args);
    n.constraints = std::move(constraints);
    return n;
  }

  bool operator==(const PatternNode&) const = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline std::string format_literal(const Literal& lit) {
  if (const auto* i = std::get_if<std::int64_t>(&lit)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&lit)) return format_double(*d);
  return quote(std::get<std::string>(lit));
}

inline std::string format_constraint(const AttrConstraint& c) {
  return std::visit(
      [&](const auto& pred) -> std::string {
        using P = std::decay_t<decltype(pred)>;
        if constexpr (std::is_same_v<P, Equals>) {
          return c.key + "=" + format_literal(pred.value);
        } else if constexpr (std::is_same_v<P, OneOf>) {
          std::string s = c.key + " in [";
          for (std::size_t i = 0; i < pred.values.size(); ++i) s += (i ? ", " : "") + format_literal(pred.values[i]);
          return s + "]";
        } else {
          return c.key + " in " + std::to_string(pred.lo) + ".." + std::to_string(pred.hi);
        }
      },
      c.predicate);
}

inline void format_node(const PatternNode& n, std::string& out) {
  switch (n.kind) {
    case PatternNode::Kind::kWildcard: out += "*"; return;
    case PatternNode::Kind::kRef: out += "$" + n.label; return;
    case PatternNode::Kind::kOp: break;
  }
  if (!n.label.empty()) out += "$" + n.label + ":";
  out += n.op + "(";
  for (std::size_t i = 0; i < n.args.size(); ++i) {
    if (i) out += ", ";
    format_node(n.args[i], out);
  }
  out += ")";
  if (!n.constraints.empty()) {
    out += "{";
    for (std::size_t i = 0; i < n.constraints.size(); ++i) {
      if (i) out += ", ";
      out += format_constraint(n.constraints[i]);
    }
    out += "}";
  }
}

}  // namespace detail

/// A validated pattern: the root is an operator, labels are unique and every
/// reference points at a label defined earlier in pre-order.
class Pattern {
 public:
  explicit Pattern(PatternNode root) : root_(std::move(root)) {
    if (root_.kind != PatternNode::Kind::kOp)
      throw Error(ErrorCode::kValidation, "pattern root must be an operator, not a wildcard or reference");
    std::set<std::string> labels;
    validate(root_, labels);
  }

  const PatternNode& root() const { return root_; }
  const std::string& root_op() const { return root_.op; }

  /// Number of operator nodes (the nodes a match binds).
  std::size_t op_count() const { return count_ops(root_); }

  std::string text() const {
    std::string out;
    detail::format_node(root_, out);
    return out;
  }

  bool operator==(const Pattern& other) const { return root_ == other.root_; }

 private:
  static std::size_t count_ops(const PatternNode& n) {
    if (n.kind != PatternNode::Kind::kOp) return 0;
    std::size_t c = 1;
    for (const auto& a : n.args) c += count_ops(a);
    return c;
  }

  static void validate(const PatternNode& n, std::set<std::string>& labels) {
    switch (n.kind) {
      case PatternNode::Kind::kWildcard: return;
      case PatternNode::Kind::kRef:
        if (!labels.count(n.label))
          throw Error(ErrorCode::kValidation, "reference $" + n.label + " precedes its definition");
        return;
      case PatternNode::Kind::kOp: break;
    }
    if (n.op.empty()) throw Error(ErrorCode::kValidation, "operator pattern with empty op kind");
    if (!n.label.empty() && !labels.insert(n.label).second)
      throw Error(ErrorCode::kValidation, "duplicate pattern label $" + n.label);
    for (const auto& c : n.constraints) {
      if (c.key.empty()) throw Error(ErrorCode::kValidation, "attribute constraint with empty key");
      if (const auto* r = std::get_if<IntRange>(&c.predicate); r && r->lo > r->hi)
        throw Error(ErrorCode::kValidation, "empty integer range for attribute '" + c.key + "'");
    }
    for (const auto& a : n.args) validate(a, labels);
  }

  PatternNode root_;
};

namespace detail {

class PatternParser {
 public:
  explicit PatternParser(std::string_view text, int line_offset = 0) : text_(text), line_offset_(line_offset) {}

  Pattern parse() {
    skip_ws();
    if (peek() == '*') fail_validation("pattern root must be an operator, not a wildcard");
    auto root = parse_arg();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    try {
      return Pattern(std::move(root));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), line(), 1);
    }
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  int line() const {
    int l = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) l += text_[i] == '\n';
    return l + line_offset_;
  }
  int column() const {
    const auto before = text_.substr(0, pos_);
    const auto nl = before.rfind('\n');
    return static_cast<int>(nl == std::string_view::npos ? pos_ : pos_ - nl - 1) + 1;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::kParse, "pattern syntax error: " + msg, line(), column());
  }
  [[noreturn]] void fail_validation(const std::string& msg) const {
    throw Error(ErrorCode::kValidation, msg, line(), column());
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'" + (peek() ? std::string(", found '") + peek() + "'" : ", found end of input"));
    ++pos_;
  }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

  std::string ident() {
    skip_ws();
    if (!ident_start(peek())) fail("expected identifier");
    std::size_t start = pos_;
    while (ident_char(peek())) {
      // ".." terminates an identifier (range syntax)
      if (peek() == '.' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '.') break;
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string label() {
    ++pos_;  // '$'
    std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
    if (pos_ == start) fail("expected label after '$'");
    return std::string(text_.substr(start, pos_ - start));
  }

  PatternNode parse_arg() {
    skip_ws();
    if (peek() == '*') {
      ++pos_;
      return PatternNode::wildcard();
    }
    std::string lbl;
    if (peek() == '$') {
      lbl = label();
      skip_ws();
      if (peek() != ':') return PatternNode::ref(std::move(lbl));
      ++pos_;
    }
    auto node = parse_op();
    node.label = std::move(lbl);
    return node;
  }

  PatternNode parse_op() {
    PatternNode node = PatternNode::op_node(ident());
    expect('(');
    skip_ws();
    if (peek() != ')') {
      node.args.push_back(parse_arg());
      skip_ws();
      while (peek() == ',') {
        ++pos_;
        node.args.push_back(parse_arg());
        skip_ws();
      }
    }
    expect(')');
    skip_ws();
    if (peek() == '{') {
      ++pos_;
      node.constraints.push_back(parse_constraint());
      skip_ws();
      while (peek() == ',') {
        ++pos_;
        node.constraints.push_back(parse_constraint());
        skip_ws();
      }
      expect('}');
    }
    return node;
  }

  AttrConstraint parse_constraint() {
    AttrConstraint c;
    c.key = ident();
    skip_ws();
    if (peek() == '=') {
      ++pos_;
      c.predicate = Equals{parse_literal()};
      return c;
    }
    std::size_t save = pos_;
    if (ident_start(peek()) && ident() == "in") {
      skip_ws();
      if (peek() == '[') {
        ++pos_;
        OneOf one;
        one.values.push_back(parse_literal());
        skip_ws();
        while (peek() == ',') {
          ++pos_;
          one.values.push_back(parse_literal());
          skip_ws();
        }
        expect(']');
        c.predicate = std::move(one);
        return c;
      }
      auto lo = parse_literal();
      skip_ws();
      if (text_.substr(pos_, 2) != "..") fail("expected '..' in integer range");
      pos_ += 2;
      auto hi = parse_literal();
      if (!std::holds_alternative<std::int64_t>(lo) || !std::holds_alternative<std::int64_t>(hi))
        fail("integer range bounds must be integers");
      if (std::get<std::int64_t>(lo) > std::get<std::int64_t>(hi))
        fail_validation("empty integer range for attribute '" + c.key + "'");
      c.predicate = IntRange{std::get<std::int64_t>(lo), std::get<std::int64_t>(hi)};
      return c;
    }
    pos_ = save;
    fail("unknown constraint predicate for attribute '" + c.key + "'");
  }

  Literal parse_literal() {
    skip_ws();
    const char c = peek();
    if (c == '"') {
      ++pos_;
      std::string s;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
        s += text_[pos_++];
      }
      if (pos_ >= text_.size()) fail("unterminated string literal");
      ++pos_;
      return s;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+') {
      std::size_t start = pos_;
      if (c == '-' || c == '+') ++pos_;
      bool is_float = false;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      if (peek() == '.' && pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
        is_float = true;
        ++pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
      if (peek() == 'e' || peek() == 'E') {
        is_float = true;
        ++pos_;
        if (peek() == '-' || peek() == '+') ++pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
      std::string num(text_.substr(start, pos_ - start));
      if (num.front() == '+') num.erase(0, 1);
      try {
        if (is_float) return std::stod(num);
        return static_cast<std::int64_t>(std::stoll(num));
      } catch (const std::exception&) {
        fail("bad numeric literal '" + num + "'");
      }
    }
    if (ident_start(c)) return ident();
    fail("expected literal");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_offset_ = 0;
};

}  // namespace detail

inline Pattern parse_pattern(std::string_view text) { return detail::PatternParser(text).parse(); }

namespace detail {

/// Removes a trailing `#` comment, ignoring `#` inside string literals.
inline std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (in_string && line[i] == '\\') {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace detail

/// Pattern file: one pattern per line; `#` starts a comment.
inline std::vector<Pattern> parse_pattern_file(std::string_view text) {
  std::vector<Pattern> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    auto body = detail::strip_comment(line);
    if (body.find_first_not_of(" \t\r") != std::string_view::npos)
      out.push_back(detail::PatternParser(body, line_no).parse());
    ++line_no;
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace collage
