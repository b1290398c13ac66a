#pragma once

// A deliberately small Jinja dialect: `{{ expr }}`, `{% for x in xs %}`,
// `{% if %}/{% elif %}/{% else %}`, `-` whitespace control and the string
// methods strip/lstrip/rstrip. Rendering follows Jinja with trim_blocks and
// lstrip_blocks enabled and keep_trailing_newline disabled. Undefined names are
// errors; unsupported syntax (filters, set, macros, comments) fails at parse time.

#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rolebench/error.hpp"

namespace rolebench::tmpl {

struct Value;
using List = std::vector<Value>;
using Map = std::map<std::string, Value, std::less<>>;

struct Value {
  std::variant<std::monostate, bool, std::int64_t, std::string, std::shared_ptr<const List>, std::shared_ptr<const Map>>
      data;

  Value() = default;
  Value(std::nullptr_t) {}
  Value(bool b) : data(b) {}
  Value(int i) : data(static_cast<std::int64_t>(i)) {}
  Value(std::int64_t i) : data(i) {}
  Value(std::size_t i) : data(static_cast<std::int64_t>(i)) {}
  Value(const char* s) : data(std::string(s)) {}
  Value(std::string s) : data(std::move(s)) {}
  Value(List l) : data(std::make_shared<const List>(std::move(l))) {}
  Value(Map m) : data(std::make_shared<const Map>(std::move(m))) {}

  bool is_none() const { return std::holds_alternative<std::monostate>(data); }
  const std::string* str() const { return std::get_if<std::string>(&data); }
  const std::int64_t* integer() const { return std::get_if<std::int64_t>(&data); }
  const List* list() const {
    auto p = std::get_if<std::shared_ptr<const List>>(&data);
    return p ? p->get() : nullptr;
  }
  const Map* map() const {
    auto p = std::get_if<std::shared_ptr<const Map>>(&data);
    return p ? p->get() : nullptr;
  }

  bool truthy() const {
    return std::visit(
        [](const auto& v) -> bool {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::monostate>) return false;
          else if constexpr (std::is_same_v<T, bool>) return v;
          else if constexpr (std::is_same_v<T, std::int64_t>) return v != 0;
          else if constexpr (std::is_same_v<T, std::string>) return !v.empty();
          else return v && !v->empty();
        },
        data);
  }

  std::string to_output() const {
    return std::visit(
        [](const auto& v) -> std::string {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::monostate>) return "None";
          else if constexpr (std::is_same_v<T, bool>) return v ? "True" : "False";
          else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
          else if constexpr (std::is_same_v<T, std::string>) return v;
          else throw TemplateError("cannot print a list or mapping");
        },
        data);
  }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.data.index() != b.data.index()) return false;
    if (auto l = a.list()) {
      const auto* r = b.list();
      if (l->size() != r->size()) return false;
      for (std::size_t i = 0; i < l->size(); ++i)
        if (!((*l)[i] == (*r)[i])) return false;
      return true;
    }
    if (a.map()) return a.map() == b.map();
    return a.data == b.data;
  }
};

namespace detail {

// ---------------------------------------------------------------- expressions

struct Expr {
  enum class Kind { literal, name, attribute, index, method, negate, logical_not, binary, tuple };
  Kind kind;
  Value literal;
  std::string text;  // name, attribute, method or operator
  std::vector<std::unique_ptr<Expr>> args;
};

using ExprPtr = std::unique_ptr<Expr>;

inline ExprPtr make_expr(Expr::Kind kind, std::string text = {}) {
  auto e = std::make_unique<Expr>();
  e->kind = kind;
  e->text = std::move(text);
  return e;
}

struct Token {
  enum class Kind { name, integer, string, op, end };
  Kind kind;
  std::string text;
};

inline std::vector<Token> lex_expression(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      out.push_back({Token::Kind::name, std::string(src.substr(i, j - i))});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Token::Kind::integer, std::string(src.substr(i, j - i))});
      i = j;
    } else if (c == '"' || c == '\'') {
      std::string s;
      std::size_t j = i + 1;
      for (; j < src.size() && src[j] != c; ++j) {
        if (src[j] == '\\' && j + 1 < src.size()) {
          ++j;
          s += src[j] == 'n' ? '\n' : src[j];
        } else {
          s += src[j];
        }
      }
      if (j >= src.size()) throw TemplateError("unterminated string literal in '" + std::string(src) + "'");
      out.push_back({Token::Kind::string, std::move(s)});
      i = j + 1;
    } else {
      static constexpr std::string_view two[] = {"==", "!=", "<=", ">=", "//"};
      bool matched = false;
      for (auto op : two) {
        if (src.substr(i, 2) == op) {
          out.push_back({Token::Kind::op, std::string(op)});
          i += 2;
          matched = true;
          break;
        }
      }
      if (matched) continue;
      if (std::string_view("+-*%<>().,[]").find(c) == std::string_view::npos)
        throw TemplateError(std::string("unsupported character '") + c + "' in expression '" + std::string(src) + "'");
      out.push_back({Token::Kind::op, std::string(1, c)});
      ++i;
    }
  }
  out.push_back({Token::Kind::end, {}});
  return out;
}

class ExprParser {
 public:
  explicit ExprParser(std::string_view src) : src_(src), tokens_(lex_expression(src)) {}

  ExprPtr parse_all() {
    auto e = parse_or();
    if (peek().kind != Token::Kind::end) fail("unexpected '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  bool accept_op(std::string_view op) {
    if (peek().kind == Token::Kind::op && peek().text == op) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_name(std::string_view name) {
    if (peek().kind == Token::Kind::name && peek().text == name) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_op(std::string_view op) {
    if (!accept_op(op)) fail("expected '" + std::string(op) + "'");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw TemplateError(what + " in expression '" + std::string(src_) + "'");
  }

  ExprPtr binary(std::string op, ExprPtr lhs, ExprPtr rhs) {
    auto e = make_expr(Expr::Kind::binary, std::move(op));
    e->args.push_back(std::move(lhs));
    e->args.push_back(std::move(rhs));
    return e;
  }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (accept_name("or")) lhs = binary("or", std::move(lhs), parse_and());
    return lhs;
  }
  ExprPtr parse_and() {
    auto lhs = parse_not();
    while (accept_name("and")) lhs = binary("and", std::move(lhs), parse_not());
    return lhs;
  }
  ExprPtr parse_not() {
    if (accept_name("not")) {
      auto e = make_expr(Expr::Kind::logical_not);
      e->args.push_back(parse_not());
      return e;
    }
    return parse_comparison();
  }
  ExprPtr parse_comparison() {
    auto lhs = parse_additive();
    while (true) {
      if (peek().kind == Token::Kind::op &&
          (peek().text == "==" || peek().text == "!=" || peek().text == "<" || peek().text == ">" ||
           peek().text == "<=" || peek().text == ">=")) {
        auto op = tokens_[pos_++].text;
        lhs = binary(op, std::move(lhs), parse_additive());
      } else if (accept_name("in")) {
        lhs = binary("in", std::move(lhs), parse_additive());
      } else if (peek().kind == Token::Kind::name && peek().text == "not" && peek(1).text == "in") {
        pos_ += 2;
        lhs = binary("not in", std::move(lhs), parse_additive());
      } else {
        return lhs;
      }
    }
  }
  ExprPtr parse_additive() {
    auto lhs = parse_multiplicative();
    while (peek().kind == Token::Kind::op && (peek().text == "+" || peek().text == "-")) {
      auto op = tokens_[pos_++].text;
      lhs = binary(op, std::move(lhs), parse_multiplicative());
    }
    return lhs;
  }
  ExprPtr parse_multiplicative() {
    auto lhs = parse_unary();
    while (peek().kind == Token::Kind::op && (peek().text == "*" || peek().text == "//" || peek().text == "%")) {
      auto op = tokens_[pos_++].text;
      lhs = binary(op, std::move(lhs), parse_unary());
    }
    return lhs;
  }
  ExprPtr parse_unary() {
    if (accept_op("-")) {
      auto e = make_expr(Expr::Kind::negate);
      e->args.push_back(parse_unary());
      return e;
    }
    return parse_postfix();
  }
  ExprPtr parse_postfix() {
    auto e = parse_primary();
    while (true) {
      if (accept_op(".")) {
        if (peek().kind != Token::Kind::name) fail("expected attribute name");
        auto name = tokens_[pos_++].text;
        if (accept_op("(")) {
          expect_op(")");
          if (name != "strip" && name != "lstrip" && name != "rstrip") fail("unsupported method '" + name + "'");
          auto m = make_expr(Expr::Kind::method, name);
          m->args.push_back(std::move(e));
          e = std::move(m);
        } else {
          auto a = make_expr(Expr::Kind::attribute, name);
          a->args.push_back(std::move(e));
          e = std::move(a);
        }
      } else if (accept_op("[")) {
        auto idx = make_expr(Expr::Kind::index);
        idx->args.push_back(std::move(e));
        idx->args.push_back(parse_or());
        expect_op("]");
        e = std::move(idx);
      } else {
        return e;
      }
    }
  }
  ExprPtr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Token::Kind::integer: {
        auto e = make_expr(Expr::Kind::literal);
        e->literal = Value(static_cast<std::int64_t>(std::stoll(t.text)));
        ++pos_;
        return e;
      }
      case Token::Kind::string: {
        auto e = make_expr(Expr::Kind::literal);
        e->literal = Value(t.text);
        ++pos_;
        return e;
      }
      case Token::Kind::name: {
        ++pos_;
        auto e = make_expr(Expr::Kind::literal);
        if (t.text == "true" || t.text == "True") {
          e->literal = Value(true);
        } else if (t.text == "false" || t.text == "False") {
          e->literal = Value(false);
        } else if (t.text == "none" || t.text == "None") {
          e->literal = Value();
        } else {
          e = make_expr(Expr::Kind::name, t.text);
        }
        return e;
      }
      case Token::Kind::op:
        if (accept_op("(")) {
          auto first = parse_or();
          if (!accept_op(",")) {
            expect_op(")");
            return first;
          }
          auto tuple = make_expr(Expr::Kind::tuple);
          tuple->args.push_back(std::move(first));
          while (!accept_op(")")) {
            tuple->args.push_back(parse_or());
            if (!accept_op(",")) {
              expect_op(")");
              break;
            }
          }
          return tuple;
        }
        if (t.text == "|") fail("filters are not supported");
        fail("unexpected '" + t.text + "'");
      case Token::Kind::end:
        fail("unexpected end of expression");
    }
    fail("unreachable");
  }

  std::string_view src_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

// ------------------------------------------------------------------ statements

struct Node {
  enum class Kind { text, output, for_loop, conditional };
  Kind kind;
  std::string text;                  // text, or loop variable for for_loop
  ExprPtr expr;                      // output value or loop iterable
  std::vector<Node> body;            // for_loop body
  std::vector<std::pair<ExprPtr, std::vector<Node>>> branches;  // if/elif; null condition = else
};

struct Segment {
  enum class Kind { text, output, block };
  Kind kind;
  std::string content;
  bool strip_before = false;
  bool strip_after = false;
};

inline bool is_inline_space(char c) { return c == ' ' || c == '\t'; }

inline std::vector<Segment> split_segments(std::string_view src) {
  std::vector<Segment> out;
  std::size_t pos = 0;
  while (pos < src.size()) {
    const std::size_t open = src.find('{', pos);
    if (open == std::string_view::npos || open + 1 >= src.size()) {
      out.push_back({Segment::Kind::text, std::string(src.substr(pos))});
      break;
    }
    const char next = src[open + 1];
    if (next == '#') throw TemplateError("template comments are not supported");
    if (next != '{' && next != '%') {
      out.push_back({Segment::Kind::text, std::string(src.substr(pos, open + 1 - pos))});
      pos = open + 1;
      continue;
    }
    if (open > pos) out.push_back({Segment::Kind::text, std::string(src.substr(pos, open - pos))});
    const std::string_view closer = next == '{' ? "}}" : "%}";
    const std::size_t close = src.find(closer, open + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated tag starting at offset " + std::to_string(open));
    std::string_view inner = src.substr(open + 2, close - open - 2);
    Segment seg{next == '{' ? Segment::Kind::output : Segment::Kind::block, {}};
    if (!inner.empty() && inner.front() == '-') {
      seg.strip_before = true;
      inner.remove_prefix(1);
    }
    if (!inner.empty() && inner.back() == '-') {
      seg.strip_after = true;
      inner.remove_suffix(1);
    }
    while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.front()))) inner.remove_prefix(1);
    while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.back()))) inner.remove_suffix(1);
    seg.content = std::string(inner);
    out.push_back(std::move(seg));
    pos = close + 2;
  }
  return out;
}

/// Applies `-` markers, trim_blocks and lstrip_blocks to the text segments.
inline void apply_whitespace_control(std::vector<Segment>& segs) {
  auto rstrip_all = [](std::string& s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  };
  auto lstrip_all = [](std::string& s) {
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    s.erase(0, i);
  };
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].kind == Segment::Kind::text) continue;
    Segment* prev = i > 0 && segs[i - 1].kind == Segment::Kind::text ? &segs[i - 1] : nullptr;
    Segment* next = i + 1 < segs.size() && segs[i + 1].kind == Segment::Kind::text ? &segs[i + 1] : nullptr;
    if (segs[i].strip_before && prev) {
      rstrip_all(prev->content);
    } else if (segs[i].kind == Segment::Kind::block && prev) {
      // lstrip_blocks: drop indentation when the tag starts its line.
      auto& s = prev->content;
      std::size_t cut = s.size();
      while (cut > 0 && is_inline_space(s[cut - 1])) --cut;
      const bool at_line_start = cut == 0 ? i == 1 : s[cut - 1] == '\n';
      if (at_line_start) s.erase(cut);
    }
    if (segs[i].strip_after && next) {
      lstrip_all(next->content);
    } else if (segs[i].kind == Segment::Kind::block && next) {
      auto& s = next->content;
      if (s.rfind("\r\n", 0) == 0) s.erase(0, 2);
      else if (!s.empty() && s.front() == '\n') s.erase(0, 1);
    }
  }
}

class StatementParser {
 public:
  explicit StatementParser(std::vector<Segment> segs) : segs_(std::move(segs)) {}

  std::vector<Node> parse_document() {
    auto nodes = parse_until({});
    if (pos_ < segs_.size()) throw TemplateError("unexpected '{% " + segs_[pos_].content + " %}'");
    return nodes;
  }

 private:
  static std::string keyword(const std::string& stmt) {
    const auto end = stmt.find_first_of(" \t\n");
    return stmt.substr(0, end);
  }
  static std::string rest(const std::string& stmt) {
    const auto end = stmt.find_first_of(" \t\n");
    return end == std::string::npos ? std::string{} : stmt.substr(end + 1);
  }

  std::vector<Node> parse_until(std::initializer_list<std::string_view> stops) {
    std::vector<Node> nodes;
    while (pos_ < segs_.size()) {
      const Segment& seg = segs_[pos_];
      if (seg.kind == Segment::Kind::text) {
        if (!seg.content.empty()) nodes.push_back(Node{Node::Kind::text, seg.content, nullptr, {}, {}});
        ++pos_;
        continue;
      }
      if (seg.kind == Segment::Kind::output) {
        nodes.push_back(Node{Node::Kind::output, {}, ExprParser(seg.content).parse_all(), {}, {}});
        ++pos_;
        continue;
      }
      const auto kw = keyword(seg.content);
      for (auto stop : stops)
        if (kw == stop) return nodes;
      if (kw == "for") {
        nodes.push_back(parse_for());
      } else if (kw == "if") {
        nodes.push_back(parse_if());
      } else {
        throw TemplateError("unsupported or misplaced statement '{% " + seg.content + " %}'");
      }
    }
    if (stops.size() != 0) throw TemplateError("missing '{% " + std::string(*stops.begin()) + " %}'");
    return nodes;
  }

  Node parse_for() {
    const std::string spec = rest(segs_[pos_].content);
    ++pos_;
    const auto in_pos = spec.find(" in ");
    if (in_pos == std::string::npos) throw TemplateError("malformed for statement '" + spec + "'");
    std::string var = spec.substr(0, in_pos);
    while (!var.empty() && std::isspace(static_cast<unsigned char>(var.back()))) var.pop_back();
    for (char c : var)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') throw TemplateError("bad loop variable '" + var + "'");
    Node node{Node::Kind::for_loop, var, ExprParser(spec.substr(in_pos + 4)).parse_all(), {}, {}};
    node.body = parse_until({"endfor"});
    if (!rest(segs_[pos_].content).empty()) throw TemplateError("unexpected text after endfor");
    ++pos_;
    return node;
  }

  Node parse_if() {
    Node node{Node::Kind::conditional, {}, nullptr, {}, {}};
    ExprPtr cond = ExprParser(rest(segs_[pos_].content)).parse_all();
    ++pos_;
    while (true) {
      auto body = parse_until({"endif", "elif", "else"});
      node.branches.emplace_back(std::move(cond), std::move(body));
      const auto kw = keyword(segs_[pos_].content);
      if (kw == "endif") {
        ++pos_;
        return node;
      }
      if (kw == "elif") {
        cond = ExprParser(rest(segs_[pos_].content)).parse_all();
        ++pos_;
        continue;
      }
      ++pos_;  // else
      node.branches.emplace_back(nullptr, parse_until({"endif"}));
      ++pos_;
      return node;
    }
  }

  std::vector<Segment> segs_;
  std::size_t pos_ = 0;
};

// ------------------------------------------------------------------ evaluation

class Scope {
 public:
  explicit Scope(const Map& globals) { frames_.push_back(&globals); }

  void push(const Map& frame) { frames_.push_back(&frame); }
  void pop() { frames_.pop_back(); }

  const Value& lookup(const std::string& name) const {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      auto found = (*it)->find(name);
      if (found != (*it)->end()) return found->second;
    }
    throw TemplateError("undefined variable '" + name + "'");
  }

 private:
  std::vector<const Map*> frames_;
};

inline std::int64_t as_int(const Value& v, const std::string& op) {
  if (auto i = v.integer()) return *i;
  if (auto b = std::get_if<bool>(&v.data)) return *b ? 1 : 0;
  throw TemplateError("operator '" + op + "' needs integers");
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  if (b == 0) throw TemplateError("division by zero");
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - b * floor_div(a, b); }

inline bool contains(const Value& haystack, const Value& needle) {
  if (auto l = haystack.list()) {
    for (const auto& v : *l)
      if (v == needle) return true;
    return false;
  }
  if (auto s = haystack.str()) {
    if (auto n = needle.str()) return s->find(*n) != std::string::npos;
    throw TemplateError("'in <string>' needs a string operand");
  }
  if (auto m = haystack.map()) {
    if (auto n = needle.str()) return m->count(*n) > 0;
  }
  throw TemplateError("'in' needs a list, string or mapping");
}

inline Value evaluate(const Expr& e, const Scope& scope) {
  switch (e.kind) {
    case Expr::Kind::literal:
      return e.literal;
    case Expr::Kind::name:
      return scope.lookup(e.text);
    case Expr::Kind::attribute: {
      const Value base = evaluate(*e.args[0], scope);
      const Map* m = base.map();
      if (!m) throw TemplateError("cannot read attribute '" + e.text + "' of a non-mapping");
      auto it = m->find(e.text);
      if (it == m->end()) throw TemplateError("undefined attribute '" + e.text + "'");
      return it->second;
    }
    case Expr::Kind::index: {
      const Value base = evaluate(*e.args[0], scope);
      const Value key = evaluate(*e.args[1], scope);
      if (auto l = base.list()) {
        auto i = as_int(key, "[]");
        if (i < 0) i += static_cast<std::int64_t>(l->size());
        if (i < 0 || i >= static_cast<std::int64_t>(l->size())) throw TemplateError("index out of range");
        return (*l)[static_cast<std::size_t>(i)];
      }
      if (auto m = base.map()) {
        auto k = key.str();
        if (!k) throw TemplateError("mapping keys must be strings");
        auto it = m->find(*k);
        if (it == m->end()) throw TemplateError("undefined key '" + *k + "'");
        return it->second;
      }
      throw TemplateError("value is not subscriptable");
    }
    case Expr::Kind::method: {
      const Value base = evaluate(*e.args[0], scope);
      const std::string* s = base.str();
      if (!s) throw TemplateError("method '" + e.text + "' needs a string");
      std::size_t b = 0, end = s->size();
      if (e.text != "rstrip")
        while (b < end && std::isspace(static_cast<unsigned char>((*s)[b]))) ++b;
      if (e.text != "lstrip")
        while (end > b && std::isspace(static_cast<unsigned char>((*s)[end - 1]))) --end;
      return Value(s->substr(b, end - b));
    }
    case Expr::Kind::negate:
      return Value(-as_int(evaluate(*e.args[0], scope), "-"));
    case Expr::Kind::logical_not:
      return Value(!evaluate(*e.args[0], scope).truthy());
    case Expr::Kind::tuple: {
      List items;
      for (const auto& a : e.args) items.push_back(evaluate(*a, scope));
      return Value(std::move(items));
    }
    case Expr::Kind::binary: {
      const auto& op = e.text;
      if (op == "and") {
        Value lhs = evaluate(*e.args[0], scope);
        return lhs.truthy() ? evaluate(*e.args[1], scope) : lhs;
      }
      if (op == "or") {
        Value lhs = evaluate(*e.args[0], scope);
        return lhs.truthy() ? lhs : evaluate(*e.args[1], scope);
      }
      const Value lhs = evaluate(*e.args[0], scope);
      const Value rhs = evaluate(*e.args[1], scope);
      if (op == "==") return Value(lhs == rhs);
      if (op == "!=") return Value(!(lhs == rhs));
      if (op == "in") return Value(contains(rhs, lhs));
      if (op == "not in") return Value(!contains(rhs, lhs));
      if (op == "+" && lhs.str() && rhs.str()) return Value(*lhs.str() + *rhs.str());
      if (op == "<" || op == ">" || op == "<=" || op == ">=") {
        int cmp;
        if (lhs.str() && rhs.str()) {
          cmp = lhs.str()->compare(*rhs.str());
        } else {
          const auto a = as_int(lhs, op), b = as_int(rhs, op);
          cmp = a < b ? -1 : (a > b ? 1 : 0);
        }
        if (op == "<") return Value(cmp < 0);
        if (op == ">") return Value(cmp > 0);
        if (op == "<=") return Value(cmp <= 0);
        return Value(cmp >= 0);
      }
      const auto a = as_int(lhs, op), b = as_int(rhs, op);
      if (op == "+") return Value(a + b);
      if (op == "-") return Value(a - b);
      if (op == "*") return Value(a * b);
      if (op == "//") return Value(floor_div(a, b));
      if (op == "%") return Value(floor_mod(a, b));
      throw TemplateError("unknown operator '" + op + "'");
    }
  }
  throw TemplateError("unreachable");
}

inline void render_nodes(const std::vector<Node>& nodes, Scope& scope, std::string& out) {
  for (const auto& node : nodes) {
    switch (node.kind) {
      case Node::Kind::text:
        out += node.text;
        break;
      case Node::Kind::output:
        out += evaluate(*node.expr, scope).to_output();
        break;
      case Node::Kind::conditional:
        for (const auto& [cond, body] : node.branches) {
          if (!cond || evaluate(*cond, scope).truthy()) {
            render_nodes(body, scope, out);
            break;
          }
        }
        break;
      case Node::Kind::for_loop: {
        const Value iterable = evaluate(*node.expr, scope);
        const List* items = iterable.list();
        if (!items) throw TemplateError("for loop over a non-list");
        const std::size_t n = items->size();
        for (std::size_t i = 0; i < n; ++i) {
          Map frame;
          frame.emplace(node.text, (*items)[i]);
          frame.emplace("loop", Value(Map{{"index", Value(i + 1)},
                                          {"index0", Value(i)},
                                          {"first", Value(i == 0)},
                                          {"last", Value(i + 1 == n)},
                                          {"length", Value(n)}}));
          scope.push(frame);
          render_nodes(node.body, scope, out);
          scope.pop();
        }
        break;
      }
    }
  }
}

}  // namespace detail

class Template {
 public:
  /// Parses `source`; syntax outside the supported dialect throws TemplateError.
  explicit Template(std::string_view source, std::string name = "<template>") : name_(std::move(name)) {
    if (!source.empty() && source.back() == '\n') {
      source.remove_suffix(1);
      if (!source.empty() && source.back() == '\r') source.remove_suffix(1);
    }
    try {
      auto segs = detail::split_segments(source);
      detail::apply_whitespace_control(segs);
      nodes_ = detail::StatementParser(std::move(segs)).parse_document();
    } catch (const TemplateError& e) {
      throw TemplateError(name_ + ": " + e.what());
    }
  }

  std::string render(const Map& context) const {
    std::string out;
    detail::Scope scope(context);
    try {
      detail::render_nodes(nodes_, scope, out);
    } catch (const TemplateError& e) {
      throw TemplateError(name_ + ": " + e.what());
    }
    return out;
  }

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  std::vector<detail::Node> nodes_;
};

}  // namespace rolebench::tmpl
