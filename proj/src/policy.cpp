#include "cdpg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cdpg/errors.hpp"
#include "cdpg/kern/kernels.hpp"

namespace cdpg {

int ContextFeaturizer::feature_count(const Vocab& v) const {
  switch (mode) {
    case Mode::ById:
      if (id_capacity < 1) throw ConfigError("featurizer: id_capacity must be >= 1");
      return id_capacity;
    case Mode::ByNumeralSet: {
      std::size_t k = v.numeral_pairs.size();
      if (k > 20) throw ConfigError("featurizer: too many numeral pairs for set features");
      return 1 << k;
    }
    case Mode::ByEntitySet: {
      std::size_t k = v.entity_tokens.size();
      if (k > 20) throw ConfigError("featurizer: too many entity tokens for set features");
      return 1 << k;
    }
  }
  throw ConfigError("featurizer: bad mode");
}

int ContextFeaturizer::feature_index(const Vocab& v, const Context& c) const {
  auto has = [&c](TokenId t) {
    return std::find(c.items.begin(), c.items.end(), t) != c.items.end();
  };
  switch (mode) {
    case Mode::ById:
      if (c.id < 0 || c.id >= id_capacity) {
        throw std::out_of_range("featurizer: context id outside table");
      }
      return c.id;
    case Mode::ByNumeralSet: {
      int f = 0;
      for (std::size_t i = 0; i < v.numeral_pairs.size(); ++i) {
        if (has(v.numeral_pairs[i].first)) f |= 1 << i;
      }
      return f;
    }
    case Mode::ByEntitySet: {
      int f = 0;
      for (std::size_t i = 0; i < v.entity_tokens.size(); ++i) {
        if (has(v.entity_tokens[i])) f |= 1 << i;
      }
      return f;
    }
  }
  throw ConfigError("featurizer: bad mode");
}

Policy Policy::bigram(SequenceSpace space, ContextFeaturizer feat) {
  space.validate();
  Policy p;
  p.kind_ = PolicyKind::Bigram;
  p.space_ = std::move(space);
  p.feat_ = feat;
  const std::size_t v = static_cast<std::size_t>(p.space_.vocab.size());
  const std::size_t f = static_cast<std::size_t>(feat.feature_count(p.space_.vocab));
  p.logits_.assign(f * (v + 1) * v, 0.0);
  return p;
}

Policy Policy::prefix_tree(SequenceSpace space, std::vector<int> context_ids, uint64_t cap) {
  space.validate();
  if (space.num_sequences() > cap) {
    throw EnumCapError("prefix-tree policy: sequence space exceeds cap");
  }
  std::sort(context_ids.begin(), context_ids.end());
  if (std::adjacent_find(context_ids.begin(), context_ids.end()) != context_ids.end()) {
    throw std::invalid_argument("prefix-tree policy: duplicate context id");
  }
  Policy p;
  p.kind_ = PolicyKind::PrefixTree;
  p.space_ = std::move(space);
  p.context_ids_ = std::move(context_ids);
  p.decision_nodes_ = p.space_.num_decision_nodes();
  const std::size_t v = static_cast<std::size_t>(p.space_.vocab.size());
  p.logits_.assign(p.context_ids_.size() * p.decision_nodes_ * v, 0.0);
  return p;
}

int Policy::feature_of(const Context& c) const {
  if (kind_ != PolicyKind::Bigram) throw std::logic_error("feature_of: not a bigram policy");
  return feat_.feature_index(space_.vocab, c);
}

std::size_t Policy::bigram_row_base(int feature, TokenId prev) const {
  const std::size_t v = static_cast<std::size_t>(space_.vocab.size());
  const std::size_t slot = static_cast<std::size_t>(prev + 1);  // 0 = BOS
  return (static_cast<std::size_t>(feature) * (v + 1) + slot) * v;
}

int Policy::context_slot(int context_id) const {
  auto it = std::lower_bound(context_ids_.begin(), context_ids_.end(), context_id);
  if (it == context_ids_.end() || *it != context_id) {
    throw std::out_of_range("prefix-tree policy: unknown context id");
  }
  return static_cast<int>(it - context_ids_.begin());
}

std::size_t Policy::prefix_row_base(int slot, uint64_t node) const {
  const std::size_t v = static_cast<std::size_t>(space_.vocab.size());
  return (static_cast<std::size_t>(slot) * decision_nodes_ + node) * v;
}

std::span<const double> Policy::row(int feature_or_slot, TokenId prev, uint64_t node) const {
  const std::size_t v = static_cast<std::size_t>(space_.vocab.size());
  std::size_t base = kind_ == PolicyKind::Bigram ? bigram_row_base(feature_or_slot, prev)
                                                 : prefix_row_base(feature_or_slot, node);
  return std::span<const double>(logits_.data() + base, v);
}

namespace {

void require_in_space(const SequenceSpace& space, const Sequence& x) {
  if (!x.terminated) throw std::invalid_argument("policy: sequence not terminated");
  if (x.items.size() > static_cast<std::size_t>(space.max_len)) {
    throw std::invalid_argument("policy: sequence exceeds max_len");
  }
  if (!space.contains(x)) throw std::invalid_argument("policy: sequence outside space");
}

}  // namespace

double Policy::logprob(const Context& c, const Sequence& x) const {
  require_in_space(space_, x);
  const int fs = kind_ == PolicyKind::Bigram ? feature_of(c) : context_slot(c.id);
  const TokenId eos = space_.vocab.eos;
  double lp = 0.0;
  TokenId prev = -1;
  uint64_t node = 0;
  for (std::size_t pos = 0; pos < x.items.size(); ++pos) {
    TokenId tok = x.items[pos];
    if (pos == static_cast<std::size_t>(space_.max_len - 1)) break;  // forced eos
    lp += kern::log_softmax_at(row(fs, prev, node), static_cast<std::size_t>(tok));
    if (tok == eos) break;
    prev = tok;
    node = space_.child(node, space_.digit_of(tok));
  }
  return lp;
}

Sequence Policy::sample(const Context& c, RngStream& rng) const {
  const int fs = kind_ == PolicyKind::Bigram ? feature_of(c) : context_slot(c.id);
  const TokenId eos = space_.vocab.eos;
  const std::size_t v = static_cast<std::size_t>(space_.vocab.size());
  std::vector<double> probs(v);
  Sequence x;
  TokenId prev = -1;
  uint64_t node = 0;
  for (int pos = 0;; ++pos) {
    if (pos == space_.max_len - 1) {
      x.items.push_back(eos);
      break;
    }
    kern::softmax(row(fs, prev, node), probs);
    TokenId tok = static_cast<TokenId>(rng.categorical(probs));
    x.items.push_back(tok);
    if (tok == eos) break;
    prev = tok;
    node = space_.child(node, space_.digit_of(tok));
  }
  x.terminated = true;
  return x;
}

std::vector<double> Policy::grad_logprob(const Context& c, const Sequence& x) const {
  std::vector<double> g(logits_.size(), 0.0);
  accumulate_grad_logprob(c, x, 1.0, g);
  return g;
}

void Policy::accumulate_grad_logprob(const Context& c, const Sequence& x, double weight,
                                     std::span<double> acc) const {
  require_in_space(space_, x);
  const int fs = kind_ == PolicyKind::Bigram ? feature_of(c) : context_slot(c.id);
  const TokenId eos = space_.vocab.eos;
  const std::size_t v = static_cast<std::size_t>(space_.vocab.size());
  std::vector<double> probs(v);
  TokenId prev = -1;
  uint64_t node = 0;
  for (std::size_t pos = 0; pos < x.items.size(); ++pos) {
    TokenId tok = x.items[pos];
    if (pos == static_cast<std::size_t>(space_.max_len - 1)) break;
    std::size_t base = kind_ == PolicyKind::Bigram ? bigram_row_base(fs, prev)
                                                   : prefix_row_base(fs, node);
    kern::softmax(std::span<const double>(logits_.data() + base, v), probs);
    kern::axpy(-weight, probs, acc.subspan(base, v));
    acc[base + static_cast<std::size_t>(tok)] += weight;
    if (tok == eos) break;
    prev = tok;
    node = space_.child(node, space_.digit_of(tok));
  }
}

std::vector<double> Policy::enumerate_probs(const Context& c, uint64_t cap) const {
  const uint64_t n = space_.num_sequences();
  if (n > cap) throw EnumCapError("enumerate: sequence space exceeds cap");
  const int fs = kind_ == PolicyKind::Bigram ? feature_of(c) : context_slot(c.id);
  const TokenId eos = space_.vocab.eos;
  const int a = space_.alphabet_size();
  const std::size_t v = static_cast<std::size_t>(space_.vocab.size());
  std::vector<double> out(n, 0.0);
  // Per-depth scratch rows: siblings reuse a level's buffer only after the
  // parent has finished reading it.
  std::vector<std::vector<double>> scratch(static_cast<std::size_t>(space_.max_len),
                                           std::vector<double>(v));
  auto walk = [&](auto&& self, uint64_t node, int depth, double prob, TokenId prev) -> void {
    if (depth == space_.max_len - 1) {
      out[node] = prob;
      return;
    }
    std::vector<double>& probs = scratch[static_cast<std::size_t>(depth)];
    kern::softmax(row(fs, prev, node), probs);
    out[node] = prob * probs[static_cast<std::size_t>(eos)];
    for (int d = 0; d < a; ++d) {
      TokenId tok = space_.content_token(d);
      self(self, space_.child(node, d), depth + 1,
           prob * probs[static_cast<std::size_t>(tok)], tok);
    }
  };
  walk(walk, 0, 0, 1.0, -1);
  return out;
}

Policy Policy::prefix_tree_from_targets(
    SequenceSpace space, const std::vector<std::pair<int, std::vector<double>>>& targets_by_id,
    uint64_t cap) {
  std::vector<int> ids;
  ids.reserve(targets_by_id.size());
  for (const auto& [id, q] : targets_by_id) ids.push_back(id);
  Policy p = prefix_tree(std::move(space), std::move(ids), cap);
  const SequenceSpace& sp = p.space();
  const uint64_t n = sp.num_sequences();
  const uint64_t dn = p.decision_nodes();
  const int a = sp.alphabet_size();
  const TokenId eos = sp.vocab.eos;
  // Floor far enough below log(DBL_DENORM_MIN) that the resulting softmax
  // probability underflows to exactly zero: zero-mass targets stay zero-mass.
  auto flog = [](double x) { return std::max(std::log(x), -800.0); };
  for (const auto& [id, q] : targets_by_id) {
    if (q.size() != n) {
      throw std::invalid_argument("prefix_tree_from_targets: target table size mismatch");
    }
    const int slot = p.context_slot(id);
    std::vector<double> mass(q);
    for (uint64_t i = n; i-- > 0;) {
      if (i < dn) {
        for (int d = 0; d < a; ++d) mass[i] += mass[sp.child(i, d)];
      }
    }
    std::span<double> logits = p.params_mutable();
    for (uint64_t i = 0; i < dn; ++i) {
      std::size_t base = p.prefix_row_base(slot, i);
      if (mass[i] <= 0.0) continue;  // unreachable subtree, leave uniform
      logits[base + static_cast<std::size_t>(eos)] = flog(q[i] / mass[i]);
      for (int d = 0; d < a; ++d) {
        TokenId tok = sp.content_token(d);
        logits[base + static_cast<std::size_t>(tok)] = flog(mass[sp.child(i, d)] / mass[i]);
      }
    }
  }
  return p;
}

std::vector<std::pair<Sequence, double>> enumerate_space(const Policy& policy, const Context& c,
                                                         uint64_t cap) {
  std::vector<double> probs = policy.enumerate_probs(c, cap);
  std::vector<std::pair<Sequence, double>> table;
  table.reserve(probs.size());
  for (uint64_t i = 0; i < probs.size(); ++i) {
    table.emplace_back(policy.space().sequence_at(i), probs[i]);
  }
  return table;
}

}  // namespace cdpg
