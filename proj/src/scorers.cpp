#include "cdpg/scorers.hpp"

#include <algorithm>
#include <set>
#include <span>

#include "cdpg/errors.hpp"

namespace cdpg {

GrammarSymbols GrammarSymbols::resolve(const Vocab& v) {
  auto need = [&v](const char* name) -> TokenId {
    auto t = v.find(name);
    if (!t) throw ConfigError(std::string("grammar: vocab lacks token '") + name + "'");
    return *t;
  };
  return GrammarSymbols{need("NUM"), need("ID"),  need("+"), need("*"),
                        need("("),   need(")"),   need("="), need(";")};
}

LintRules LintRules::resolve(const Vocab& v, int style_cap) {
  LintRules r;
  r.style_cap = style_cap;
  r.semi = v.find(";");
  return r;
}

namespace {

// [c, x] with eos stripped: the string the code-style scorers judge.
std::vector<TokenId> concat_cx(const Context& c, const Sequence& x) {
  std::vector<TokenId> out(c.items.begin(), c.items.end());
  auto body = x.content();
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::set<TokenId> entity_set(const Vocab& v, std::span<const TokenId> toks) {
  std::set<TokenId> out;
  for (TokenId t : toks) {
    if (v.is_entity(t)) out.insert(t);
  }
  return out;
}

struct Parser {
  std::span<const TokenId> toks;
  const GrammarSymbols& g;
  std::size_t pos = 0;

  bool at(TokenId t) const { return pos < toks.size() && toks[pos] == t; }
  bool eat(TokenId t) {
    if (!at(t)) return false;
    ++pos;
    return true;
  }
  bool term() {
    if (eat(g.num) || eat(g.id)) return true;
    if (eat(g.lparen)) return expr() && eat(g.rparen);
    return false;
  }
  bool expr() {
    if (!term()) return false;
    while (at(g.plus) || at(g.star)) {
      ++pos;
      if (!term()) return false;
    }
    return true;
  }
  bool stmt() { return eat(g.id) && eat(g.eq) && expr() && eat(g.semi); }
  bool program() {  // one or more stmt, no trailing tokens
    if (!stmt()) return false;
    while (pos < toks.size()) {
      if (!stmt()) return false;
    }
    return true;
  }
};

}  // namespace

int digitize_score(const Vocab& v, const Context& c, const Sequence& x) {
  auto body = x.content();
  for (TokenId t : c.items) {
    auto digit = v.digit_for(t);
    if (!digit) continue;
    if (std::find(body.begin(), body.end(), *digit) == body.end()) return 0;
  }
  return 1;
}

int entity_consistency_score(const Vocab& v, const Context& c, const Sequence& x, int k) {
  std::set<TokenId> in_x = entity_set(v, x.content());
  if (static_cast<int>(in_x.size()) < k) return 0;
  std::set<TokenId> in_c = entity_set(v, c.items);
  return std::includes(in_c.begin(), in_c.end(), in_x.begin(), in_x.end()) ? 1 : 0;
}

int grammar_compilable_score(const GrammarSymbols& g, const Context& c, const Sequence& x) {
  std::vector<TokenId> toks = concat_cx(c, x);
  Parser p{toks, g};
  return p.program() ? 1 : 0;
}

int lint_violation_count(const LintRules& rules, const Context& c, const Sequence& x) {
  std::vector<TokenId> toks = concat_cx(c, x);
  int hits = 0;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    if (toks[i] == toks[i - 1]) ++hits;
    if (rules.semi && toks[i] == *rules.semi && toks[i - 1] == *rules.semi) ++hits;
  }
  if (static_cast<int>(toks.size()) > rules.style_cap) {
    hits += static_cast<int>(toks.size()) - rules.style_cap;
  }
  return hits;
}

int lint_clean_score(const LintRules& rules, const Context& c, const Sequence& x) {
  return lint_violation_count(rules, c, x) == 0 ? 1 : 0;
}

ConstraintScorer ConstraintScorer::digitize(const Vocab& v) {
  ConstraintScorer s;
  s.kind = Kind::Digitize;
  s.vocab = v;
  return s;
}

ConstraintScorer ConstraintScorer::entity_consistency(const Vocab& v, int k) {
  ConstraintScorer s;
  s.kind = Kind::EntityConsistency;
  s.vocab = v;
  s.min_entities = k;
  return s;
}

ConstraintScorer ConstraintScorer::grammar_compilable(const Vocab& v) {
  ConstraintScorer s;
  s.kind = Kind::GrammarCompilable;
  s.vocab = v;
  s.grammar = GrammarSymbols::resolve(v);
  return s;
}

ConstraintScorer ConstraintScorer::lint_clean(const Vocab& v, int style_cap) {
  ConstraintScorer s;
  s.kind = Kind::LintClean;
  s.vocab = v;
  s.lint = LintRules::resolve(v, style_cap);
  return s;
}

int ConstraintScorer::operator()(const Context& c, const Sequence& x) const {
  switch (kind) {
    case Kind::Digitize: return digitize_score(vocab, c, x);
    case Kind::EntityConsistency: return entity_consistency_score(vocab, c, x, min_entities);
    case Kind::GrammarCompilable: return grammar_compilable_score(grammar, c, x);
    case Kind::LintClean: return lint_clean_score(lint, c, x);
  }
  return 0;
}

Feature Feature::entity_count(const Vocab& v, double mu_bar) {
  Feature f;
  f.kind = Kind::EntityCount;
  f.vocab = v;
  f.mu_bar = mu_bar;
  return f;
}

Feature Feature::token_count(const Vocab& v, TokenId token, double mu_bar) {
  Feature f;
  f.kind = Kind::TokenCount;
  f.vocab = v;
  f.token = token;
  f.mu_bar = mu_bar;
  return f;
}

double Feature::operator()(const Context& c, const Sequence& x) const {
  return feature_value(*this, c, x);
}

double feature_value(const Feature& f, const Context&, const Sequence& x) {
  auto body = x.content();
  long n = 0;
  switch (f.kind) {
    case Feature::Kind::EntityCount:
      n = std::count_if(body.begin(), body.end(),
                        [&f](TokenId t) { return f.vocab.is_entity(t); });
      break;
    case Feature::Kind::TokenCount:
      n = std::count(body.begin(), body.end(), f.token);
      break;
  }
  return static_cast<double>(n);
}

}  // namespace cdpg
