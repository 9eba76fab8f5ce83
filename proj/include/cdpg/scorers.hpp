#pragma once

#include <optional>
#include <vector>

#include "cdpg/vocab.hpp"

namespace cdpg {

// Terminal ids for the toy statement grammar:
//   stmt := ID '=' expr ';'
//   expr := term (('+'|'*') term)*
//   term := NUM | ID | '(' expr ')'
// Resolved from token names at construction.
struct GrammarSymbols {
  TokenId num, id, plus, star, lparen, rparen, eq, semi;
  static GrammarSymbols resolve(const Vocab& v);  // throws ConfigError if missing
};

struct LintRules {
  int style_cap = 8;                 // max tokens in [c,x], inclusive
  std::optional<TokenId> semi;       // ';' if present in the vocab
  static LintRules resolve(const Vocab& v, int style_cap);
};

// --- scorer operations (pure, total over terminated sequences) ---

// 1 iff every numeral token in c has its mapped digit somewhere in x.
int digitize_score(const Vocab& v, const Context& c, const Sequence& x);

// 1 iff x mentions >= k distinct entity tokens and all of them occur in c.
int entity_consistency_score(const Vocab& v, const Context& c, const Sequence& x, int k = 4);

// 1 iff [c, x] (eos stripped) parses as one or more complete stmt.
int grammar_compilable_score(const GrammarSymbols& g, const Context& c, const Sequence& x);

// Rule hits over [c, x] (eos stripped): immediate token repeats, ';' following
// ';', and one hit per token beyond style_cap.
int lint_violation_count(const LintRules& rules, const Context& c, const Sequence& x);
int lint_clean_score(const LintRules& rules, const Context& c, const Sequence& x);

// --- value-object wrappers used by EBMs and the harness ---

struct ConstraintScorer {
  enum class Kind { Digitize, EntityConsistency, GrammarCompilable, LintClean };
  Kind kind = Kind::Digitize;
  Vocab vocab;
  int min_entities = 4;     // EntityConsistency
  GrammarSymbols grammar{}; // GrammarCompilable
  LintRules lint{};         // LintClean

  static ConstraintScorer digitize(const Vocab& v);
  static ConstraintScorer entity_consistency(const Vocab& v, int k = 4);
  static ConstraintScorer grammar_compilable(const Vocab& v);
  static ConstraintScorer lint_clean(const Vocab& v, int style_cap = 8);

  int operator()(const Context& c, const Sequence& x) const;
};

struct Feature {
  enum class Kind { EntityCount, TokenCount };
  Kind kind = Kind::TokenCount;
  Vocab vocab;
  TokenId token = 0;   // TokenCount
  double mu_bar = 0.0; // desired moment, carried with the feature

  static Feature entity_count(const Vocab& v, double mu_bar);
  static Feature token_count(const Vocab& v, TokenId token, double mu_bar);

  double operator()(const Context& c, const Sequence& x) const;
};

double feature_value(const Feature& f, const Context& c, const Sequence& x);

}  // namespace cdpg
