#pragma once

#include <span>
#include <vector>

#include "cdpg/scorers.hpp"

// Table-driven LL(1) parser for the toy statement grammar, independent of the
// recursive-descent implementation it cross-validates.
//
//   S  -> T S'          S' -> T S' | eps
//   T  -> ID = E ;
//   E  -> F E'          E' -> + F E' | * F E' | eps
//   F  -> NUM | ID | ( E )

namespace testutil {

inline bool ll1_reference_parse(const cdpg::GrammarSymbols& g,
                                std::span<const cdpg::TokenId> toks) {
  enum Sym : int {  // terminals are encoded as ~TokenId, nonterminals as enum
    S = 0, S2, T, E, E2, F
  };
  struct Entry { bool terminal; int value; };
  auto term = [](cdpg::TokenId t) { return Entry{true, t}; };
  auto nt = [](Sym s) { return Entry{false, s}; };

  std::vector<Entry> stack = {nt(S)};
  std::size_t pos = 0;
  auto la = [&]() -> int { return pos < toks.size() ? toks[pos] : -1; };

  while (!stack.empty()) {
    Entry top = stack.back();
    stack.pop_back();
    if (top.terminal) {
      if (la() != top.value) return false;
      ++pos;
      continue;
    }
    int a = la();
    switch (top.value) {
      case S:
        if (a == g.id) {
          stack.push_back(nt(S2));
          stack.push_back(nt(T));
        } else {
          return false;
        }
        break;
      case S2:
        if (a == g.id) {
          stack.push_back(nt(S2));
          stack.push_back(nt(T));
        } else if (a == -1) {
          // eps
        } else {
          return false;
        }
        break;
      case T:
        if (a == g.id) {
          stack.push_back(term(g.semi));
          stack.push_back(nt(E));
          stack.push_back(term(g.eq));
          stack.push_back(term(g.id));
        } else {
          return false;
        }
        break;
      case E:
        if (a == g.num || a == g.id || a == g.lparen) {
          stack.push_back(nt(E2));
          stack.push_back(nt(F));
        } else {
          return false;
        }
        break;
      case E2:
        if (a == g.plus || a == g.star) {
          stack.push_back(nt(E2));
          stack.push_back(nt(F));
          stack.push_back(term(a == g.plus ? g.plus : g.star));
        } else if (a == g.semi || a == g.rparen || a == -1) {
          // eps; the -1 case never accepts because T still expects ';'
        } else {
          return false;
        }
        break;
      case F:
        if (a == g.num) {
          stack.push_back(term(g.num));
        } else if (a == g.id) {
          stack.push_back(term(g.id));
        } else if (a == g.lparen) {
          stack.push_back(term(g.rparen));
          stack.push_back(nt(E));
          stack.push_back(term(g.lparen));
        } else {
          return false;
        }
        break;
    }
  }
  return pos == toks.size();
}

}  // namespace testutil
