#include "dyntamp/pddl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace dyntamp::pddl {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_sym_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
         c == '?' || c == '*' || c == ':' || c == '.';
}

struct Token {
  enum Kind { kLParen, kRParen, kSymbol, kEnd } kind;
  std::string text;
  int line, col;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](char c) {
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == ';') {  // comment to end of line
      while (i < text.size() && text[i] != '\n') advance(text[i++]);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(c);
      ++i;
      continue;
    }
    if (c == '(') {
      out.push_back({Token::kLParen, "(", line, col});
      advance(c);
      ++i;
      continue;
    }
    if (c == ')') {
      out.push_back({Token::kRParen, ")", line, col});
      advance(c);
      ++i;
      continue;
    }
    if (is_sym_char(c)) {
      int l = line, co = col;
      std::string sym;
      while (i < text.size() && is_sym_char(text[i])) {
        sym.push_back(text[i]);
        advance(text[i]);
        ++i;
      }
      out.push_back({Token::kSymbol, sym, l, co});
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }
  out.push_back({Token::kEnd, "", line, col});
  return out;
}

// Generic s-expression node; the parser builds these and the interpreters
// below walk them with positions available for error reporting.
struct Node {
  bool is_list = false;
  std::string sym;
  std::vector<Node> children;
  int line = 0, col = 0;

  bool is_sym(const std::string& s) const { return !is_list && lower(sym) == s; }
};

struct Cursor {
  const std::vector<Token>& toks;
  size_t pos = 0;
  const Token& peek() const { return toks[pos]; }
  Token take() { return toks[pos++]; }
};

Node parse_node(Cursor& c) {
  const Token& t = c.peek();
  if (t.kind == Token::kSymbol) {
    Token tok = c.take();
    Node n;
    n.sym = tok.text;
    n.line = tok.line;
    n.col = tok.col;
    return n;
  }
  if (t.kind == Token::kLParen) {
    Token open = c.take();
    Node n;
    n.is_list = true;
    n.line = open.line;
    n.col = open.col;
    while (true) {
      const Token& nt = c.peek();
      if (nt.kind == Token::kRParen) {
        c.take();
        return n;
      }
      if (nt.kind == Token::kEnd)
        throw ParseError("unbalanced '(': missing ')'", open.line, open.col);
      n.children.push_back(parse_node(c));
    }
  }
  throw ParseError(t.kind == Token::kRParen ? "unexpected ')'" : "unexpected end of input",
                   t.line, t.col);
}

Node parse_root(std::string_view text) {
  auto toks = tokenize(text);
  Cursor c{toks};
  Node root = parse_node(c);
  if (c.peek().kind != Token::kEnd)
    throw ParseError("trailing content after top-level form", c.peek().line, c.peek().col);
  return root;
}

[[noreturn]] void fail(const Node& n, const std::string& msg) {
  throw ParseError(msg, n.line, n.col);
}

const Node& child(const Node& n, size_t i, const std::string& what) {
  if (!n.is_list || n.children.size() <= i) fail(n, "expected " + what);
  return n.children[i];
}

std::string sym_of(const Node& n, const std::string& what) {
  if (n.is_list) fail(n, "expected " + what + ", found list");
  return n.sym;
}

// "a b - t c - t2" style typed lists
std::vector<std::pair<std::string, std::string>> parse_typed_list(
    const Node& list, size_t from, bool vars_required) {
  std::vector<std::pair<std::string, std::string>> out;
  std::vector<std::string> pending;
  for (size_t i = from; i < list.children.size(); ++i) {
    const Node& item = list.children[i];
    std::string s = sym_of(item, "identifier");
    if (s == "-") {
      if (pending.empty()) fail(item, "dangling '-' in typed list");
      if (i + 1 >= list.children.size()) fail(item, "missing type after '-'");
      std::string type = sym_of(list.children[i + 1], "type name");
      ++i;
      for (auto& name : pending) out.emplace_back(name, type);
      pending.clear();
      continue;
    }
    if (vars_required && s[0] != '?')
      fail(item, "expected variable starting with '?', got '" + s + "'");
    pending.push_back(s);
  }
  if (!pending.empty())
    fail(list, "untyped names in typed list (expected '- <type>')");
  return out;
}

struct LiteralContext {
  const Domain& domain;
  const ActionSchema* schema;  // null for problem propositions
  bool in_effect;
};

void validate_literal(const Node& node, const Literal& lit, const LiteralContext& ctx) {
  const PredicateSchema* p = ctx.domain.find_predicate(lit.pred);
  if (!p) fail(node, "undeclared predicate '" + lit.pred + "'");
  if (p->params.size() != lit.args.size())
    fail(node, "arity mismatch for '" + lit.pred + "': declared " +
                   std::to_string(p->params.size()) + ", used " +
                   std::to_string(lit.args.size()));
  for (size_t i = 0; i < lit.args.size(); ++i) {
    const std::string& a = lit.args[i];
    const std::string& slot_type = p->params[i].second;
    if (a == "?*") {
      if (!(ctx.in_effect && lit.negated))
        fail(node, "wildcard '?*' is only allowed in negated effects");
      continue;
    }
    if (a[0] == '?') {
      if (!ctx.schema) fail(node, "non-grounded literal: variable '" + a + "'");
      auto it = std::find_if(ctx.schema->params.begin(), ctx.schema->params.end(),
                             [&](const auto& pr) { return pr.first == a; });
      if (it == ctx.schema->params.end())
        fail(node, "undeclared parameter '" + a + "' in action '" + ctx.schema->name + "'");
      if (it->second != slot_type)
        fail(node, "type mismatch: parameter '" + a + "' is '" + it->second +
                       "', predicate '" + lit.pred + "' expects '" + slot_type + "'");
      continue;
    }
    auto ct = ctx.domain.constant_type(a);
    if (!ct) fail(node, "undeclared constant '" + a + "'");
    if (*ct != slot_type)
      fail(node, "type mismatch: constant '" + a + "' is '" + *ct +
                     "', predicate '" + lit.pred + "' expects '" + slot_type + "'");
  }
}

Literal parse_atom(const Node& node) {
  if (!node.is_list || node.children.empty())
    fail(node, "expected a predicate application");
  Literal lit;
  lit.pred = sym_of(node.children[0], "predicate name");
  for (size_t i = 1; i < node.children.size(); ++i)
    lit.args.push_back(sym_of(node.children[i], "argument"));
  return lit;
}

// literal | (not literal) | (and expr*) | (at start expr); collects into out
void parse_condition(const Node& node, const LiteralContext& ctx, bool at_start,
                     bool negated, std::vector<Literal>* out) {
  if (!node.is_list) fail(node, "expected a condition");
  if (node.children.empty()) return;  // () — empty condition
  const Node& head = node.children[0];
  if (head.is_sym("and")) {
    if (negated) fail(node, "negated conjunctions are not supported");
    for (size_t i = 1; i < node.children.size(); ++i)
      parse_condition(node.children[i], ctx, at_start, false, out);
    return;
  }
  if (head.is_sym("not")) {
    if (node.children.size() != 2) fail(node, "'not' takes exactly one literal");
    if (negated) fail(node, "double negation is not supported");
    parse_condition(node.children[1], ctx, at_start, true, out);
    return;
  }
  if (head.is_sym("at") && node.children.size() >= 2 &&
      node.children[1].is_sym("start")) {
    if (ctx.in_effect) fail(node, "'at start' is not allowed in effects");
    if (node.children.size() != 3) fail(node, "'at start' takes exactly one condition");
    parse_condition(node.children[2], ctx, true, negated, out);
    return;
  }
  Literal lit = parse_atom(node);
  lit.negated = negated;
  lit.at_start = at_start;
  validate_literal(node, lit, ctx);
  out->push_back(lit);
}

}  // namespace

std::string Proposition::str() const {
  std::string s = "(" + pred;
  for (const auto& a : args) s += " " + a;
  return s + ")";
}

const PredicateSchema* Domain::find_predicate(const std::string& n) const {
  for (const auto& p : predicates)
    if (p.name == n) return &p;
  return nullptr;
}

const ActionSchema* Domain::find_action(const std::string& n) const {
  for (const auto& a : actions)
    if (a.name == n) return &a;
  return nullptr;
}

std::optional<std::string> Domain::constant_type(const std::string& n) const {
  for (const auto& [name, type] : constants)
    if (name == n) return type;
  return std::nullopt;
}

std::vector<std::string> Domain::constants_of_type(const std::string& type) const {
  std::vector<std::string> out;
  for (const auto& [name, t] : constants)
    if (t == type) out.push_back(name);
  return out;
}

std::string GroundedAction::display() const {
  std::string s = schema + "(";
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) s += ",";
    s += args[i];
  }
  return s + ")";
}

Domain parse_domain(std::string_view text) {
  Node root = parse_root(text);
  if (!root.is_list || root.children.empty() || !root.children[0].is_sym("define"))
    fail(root, "expected (define (domain ...) ...)");
  const Node& head = child(root, 1, "(domain NAME)");
  if (!head.is_list || head.children.size() != 2 || !head.children[0].is_sym("domain"))
    fail(head, "expected (domain NAME)");

  Domain d;
  d.name = sym_of(head.children[1], "domain name");

  // First pass: declarations (so action bodies can reference them in order)
  for (size_t i = 2; i < root.children.size(); ++i) {
    const Node& sec = root.children[i];
    if (!sec.is_list || sec.children.empty())
      fail(sec, "expected a domain section");
    std::string key = lower(sym_of(sec.children[0], "section keyword"));
    if (key == ":requirements") {
      for (size_t j = 1; j < sec.children.size(); ++j)
        d.requirements.push_back(sym_of(sec.children[j], "requirement"));
    } else if (key == ":types") {
      for (size_t j = 1; j < sec.children.size(); ++j) {
        std::string t = sym_of(sec.children[j], "type name");
        if (t == "-") fail(sec.children[j], "type hierarchies are not supported");
        d.types.push_back(t);
      }
    } else if (key == ":constants") {
      auto typed = parse_typed_list(sec, 1, /*vars_required=*/false);
      for (auto& [name, type] : typed) {
        if (std::find(d.types.begin(), d.types.end(), type) == d.types.end())
          fail(sec, "undeclared type '" + type + "' for constant '" + name + "'");
        d.constants.emplace_back(name, type);
      }
    } else if (key == ":predicates") {
      for (size_t j = 1; j < sec.children.size(); ++j) {
        const Node& pn = sec.children[j];
        if (!pn.is_list || pn.children.empty())
          fail(pn, "expected (name ?var - type ...)");
        PredicateSchema ps;
        ps.name = sym_of(pn.children[0], "predicate name");
        ps.params = parse_typed_list(pn, 1, /*vars_required=*/true);
        for (auto& [v, t] : ps.params) {
          if (std::find(d.types.begin(), d.types.end(), t) == d.types.end())
            fail(pn, "undeclared type '" + t + "' in predicate '" + ps.name + "'");
          int count = 0;
          for (auto& [v2, t2] : ps.params)
            if (v2 == v) ++count;
          if (count > 1) fail(pn, "duplicate variable '" + v + "' in predicate '" + ps.name + "'");
        }
        d.predicates.push_back(std::move(ps));
      }
    } else if (key == ":action") {
      // handled in second pass
    } else {
      fail(sec, "unknown section keyword '" + key + "'");
    }
  }

  // Second pass: actions
  for (size_t i = 2; i < root.children.size(); ++i) {
    const Node& sec = root.children[i];
    std::string key = lower(sym_of(sec.children[0], "section keyword"));
    if (key != ":action") continue;
    if (sec.children.size() < 2) fail(sec, "expected action name");
    ActionSchema a;
    a.name = sym_of(sec.children[1], "action name");
    size_t j = 2;
    const Node* params = nullptr;
    const Node* pre = nullptr;
    const Node* eff = nullptr;
    while (j < sec.children.size()) {
      std::string kw = lower(sym_of(sec.children[j], "action keyword"));
      if (j + 1 >= sec.children.size()) fail(sec.children[j], "missing body for " + kw);
      const Node& body = sec.children[j + 1];
      if (kw == ":parameters") params = &body;
      else if (kw == ":precondition") pre = &body;
      else if (kw == ":effect") eff = &body;
      else fail(sec.children[j], "unknown action keyword '" + kw + "'");
      j += 2;
    }
    if (params) {
      if (!params->is_list) fail(*params, "expected parameter list");
      a.params = parse_typed_list(*params, 0, /*vars_required=*/true);
      for (auto& [v, t] : a.params)
        if (std::find(d.types.begin(), d.types.end(), t) == d.types.end())
          fail(*params, "undeclared type '" + t + "' in action '" + a.name + "'");
    }
    LiteralContext pre_ctx{d, &a, /*in_effect=*/false};
    LiteralContext eff_ctx{d, &a, /*in_effect=*/true};
    if (pre) parse_condition(*pre, pre_ctx, false, false, &a.preconditions);
    if (eff) parse_condition(*eff, eff_ctx, false, false, &a.effects);
    d.actions.push_back(std::move(a));
  }
  return d;
}

std::pair<std::set<Proposition>, std::set<Proposition>> parse_problem(
    std::string_view text, const Domain& domain) {
  Node root = parse_root(text);
  if (!root.is_list || root.children.empty() || !root.children[0].is_sym("define"))
    fail(root, "expected (define (problem ...) ...)");
  const Node& head = child(root, 1, "(problem NAME)");
  if (!head.is_list || head.children.size() != 2 || !head.children[0].is_sym("problem"))
    fail(head, "expected (problem NAME)");

  std::set<Proposition> init, goal;
  LiteralContext ctx{domain, nullptr, /*in_effect=*/false};

  auto ground_prop = [&](const Node& node) -> Proposition {
    Literal lit = parse_atom(node);
    for (const auto& a : lit.args)
      if (!a.empty() && a[0] == '?')
        fail(node, "non-grounded literal: variable '" + a + "'");
    validate_literal(node, lit, ctx);
    return Proposition{lit.pred, lit.args};
  };

  for (size_t i = 2; i < root.children.size(); ++i) {
    const Node& sec = root.children[i];
    if (!sec.is_list || sec.children.empty()) fail(sec, "expected a problem section");
    std::string key = lower(sym_of(sec.children[0], "section keyword"));
    if (key == ":domain") {
      std::string dn = sym_of(child(sec, 1, "domain name"), "domain name");
      if (dn != domain.name)
        fail(sec, "problem references domain '" + dn + "', loaded domain is '" +
                      domain.name + "'");
    } else if (key == ":init") {
      for (size_t j = 1; j < sec.children.size(); ++j)
        init.insert(ground_prop(sec.children[j]));
    } else if (key == ":goal") {
      const Node& g = child(sec, 1, "goal expression");
      if (!g.is_list) fail(g, "expected goal expression");
      if (!g.children.empty() && g.children[0].is_sym("and")) {
        for (size_t j = 1; j < g.children.size(); ++j)
          goal.insert(ground_prop(g.children[j]));
      } else if (!g.children.empty()) {
        goal.insert(ground_prop(g));
      }
    } else {
      fail(sec, "unknown section keyword '" + key + "'");
    }
  }
  return {init, goal};
}

std::vector<GroundedAction> ground_actions(const Domain& domain) {
  std::vector<GroundedAction> out;
  for (const auto& schema : domain.actions) {
    // candidate constants per parameter
    std::vector<std::vector<std::string>> pools;
    for (const auto& [v, t] : schema.params) pools.push_back(domain.constants_of_type(t));
    bool empty_pool = std::any_of(pools.begin(), pools.end(),
                                  [](const auto& p) { return p.empty(); });
    if (empty_pool) continue;

    std::vector<size_t> idx(pools.size(), 0);
    while (true) {
      std::map<std::string, std::string> bind;
      std::vector<std::string> args;
      for (size_t i = 0; i < pools.size(); ++i) {
        bind[schema.params[i].first] = pools[i][idx[i]];
        args.push_back(pools[i][idx[i]]);
      }

      GroundedAction ga;
      ga.schema = schema.name;
      ga.args = args;

      auto ground_args = [&](const Literal& lit,
                             std::vector<std::vector<std::string>>* expansions) {
        // Expand wildcard slots over all constants of the slot's type.
        const PredicateSchema* p = domain.find_predicate(lit.pred);
        std::vector<std::vector<std::string>> slots;
        for (size_t i = 0; i < lit.args.size(); ++i) {
          const std::string& a = lit.args[i];
          if (a == "?*") {
            slots.push_back(domain.constants_of_type(p->params[i].second));
          } else if (a[0] == '?') {
            slots.push_back({bind.at(a)});
          } else {
            slots.push_back({a});
          }
        }
        std::vector<std::vector<std::string>> acc = {{}};
        for (const auto& slot : slots) {
          std::vector<std::vector<std::string>> next;
          for (const auto& prefix : acc)
            for (const auto& v : slot) {
              auto row = prefix;
              row.push_back(v);
              next.push_back(std::move(row));
            }
          acc = std::move(next);
        }
        *expansions = std::move(acc);
      };

      auto emit = [&](const Literal& lit, std::vector<Proposition>* dst) {
        std::vector<std::vector<std::string>> expansions;
        ground_args(lit, &expansions);
        for (auto& e : expansions) dst->push_back(Proposition{lit.pred, std::move(e)});
      };

      for (const auto& lit : schema.preconditions)
        emit(lit, lit.negated ? &ga.pre_neg : &ga.pre_pos);
      for (const auto& lit : schema.effects)
        emit(lit, lit.negated ? &ga.del : &ga.add);

      auto finalize = [](std::vector<Proposition>* v) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
      };
      finalize(&ga.pre_pos);
      finalize(&ga.pre_neg);
      finalize(&ga.add);
      finalize(&ga.del);
      out.push_back(std::move(ga));

      // next combination
      size_t k = 0;
      while (k < idx.size()) {
        if (++idx[k] < pools[k].size()) break;
        idx[k] = 0;
        ++k;
      }
      if (k == idx.size()) break;
    }
  }
  return out;
}

std::string to_pddl(const Domain& d) {
  std::ostringstream os;
  os << "(define (domain " << d.name << ")\n";
  if (!d.requirements.empty()) {
    os << "  (:requirements";
    for (const auto& r : d.requirements) os << " " << r;
    os << ")\n";
  }
  if (!d.types.empty()) {
    os << "  (:types";
    for (const auto& t : d.types) os << " " << t;
    os << ")\n";
  }
  if (!d.constants.empty()) {
    os << "  (:constants\n";
    // group consecutive constants of the same type
    size_t i = 0;
    while (i < d.constants.size()) {
      size_t j = i;
      os << "   ";
      while (j < d.constants.size() && d.constants[j].second == d.constants[i].second) {
        os << " " << d.constants[j].first;
        ++j;
      }
      os << " - " << d.constants[i].second << "\n";
      i = j;
    }
    os << "  )\n";
  }
  if (!d.predicates.empty()) {
    os << "  (:predicates\n";
    for (const auto& p : d.predicates) {
      os << "    (" << p.name;
      for (const auto& [v, t] : p.params) os << " " << v << " - " << t;
      os << ")\n";
    }
    os << "  )\n";
  }
  auto emit_literal = [&](const Literal& lit) {
    std::string atom = "(" + lit.pred;
    for (const auto& a : lit.args) atom += " " + a;
    atom += ")";
    if (lit.negated) atom = "(not " + atom + ")";
    if (lit.at_start) atom = "(at start " + atom + ")";
    return atom;
  };
  for (const auto& a : d.actions) {
    os << "  (:action " << a.name << "\n";
    os << "    :parameters (";
    for (size_t i = 0; i < a.params.size(); ++i) {
      if (i) os << " ";
      os << a.params[i].first << " - " << a.params[i].second;
    }
    os << ")\n";
    os << "    :precondition ";
    if (a.preconditions.empty()) {
      os << "()";
    } else if (a.preconditions.size() == 1) {
      os << emit_literal(a.preconditions[0]);
    } else {
      os << "(and";
      for (const auto& lit : a.preconditions) os << " " << emit_literal(lit);
      os << ")";
    }
    os << "\n    :effect ";
    if (a.effects.empty()) {
      os << "()";
    } else if (a.effects.size() == 1) {
      os << emit_literal(a.effects[0]);
    } else {
      os << "(and";
      for (const auto& lit : a.effects) os << " " << emit_literal(lit);
      os << ")";
    }
    os << "\n  )\n";
  }
  os << ")\n";
  return os.str();
}

}  // namespace dyntamp::pddl
