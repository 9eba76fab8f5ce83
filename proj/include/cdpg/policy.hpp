#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cdpg/rng.hpp"
#include "cdpg/vocab.hpp"

namespace cdpg {

inline constexpr uint64_t kDefaultEnumCap = 2'000'000;

enum class PolicyKind { Bigram, PrefixTree };

// Deterministic context -> feature-index map. Lets a bigram policy trained on
// C_train generalize to held-out contexts that share the same feature.
struct ContextFeaturizer {
  enum class Mode { ById, ByNumeralSet, ByEntitySet };
  Mode mode = Mode::ById;
  int id_capacity = 1;  // ById only

  int feature_count(const Vocab& v) const;
  int feature_index(const Vocab& v, const Context& c) const;
};

// Conditional autoregressive softmax policy over a finite sequence space.
//
// Two parameterizations:
//  - Bigram: next-token logits indexed by (context feature, previous token),
//    position-independent. Generalizes across contexts via the featurizer.
//  - PrefixTree: logits indexed by (context id, exact prefix node); one free
//    softmax per prefix, so any full-support distribution over X is
//    representable exactly. Only for spaces within the enumeration cap.
//
// The terminator is forced at position max_len-1, so the policy is a proper
// distribution over the finite space X. Log-probs, gradients and sampling are
// pure given an rng stream; parameter updates go through params_mutable().
class Policy {
 public:
  static Policy bigram(SequenceSpace space, ContextFeaturizer feat);
  static Policy prefix_tree(SequenceSpace space, std::vector<int> context_ids,
                            uint64_t cap = kDefaultEnumCap);
  // Universality constructor: prefix-tree policy matching the given target
  // distribution (indexed by sequence index) exactly for each context.
  static Policy prefix_tree_from_targets(
      SequenceSpace space,
      const std::vector<std::pair<int, std::vector<double>>>& targets_by_id,
      uint64_t cap = kDefaultEnumCap);

  PolicyKind kind() const { return kind_; }
  const SequenceSpace& space() const { return space_; }
  const ContextFeaturizer& featurizer() const { return feat_; }
  const std::vector<int>& context_ids() const { return context_ids_; }

  std::size_t param_count() const { return logits_.size(); }
  std::span<const double> params() const { return logits_; }
  std::span<double> params_mutable() { return logits_; }

  double logprob(const Context& c, const Sequence& x) const;
  Sequence sample(const Context& c, RngStream& rng) const;

  // Analytic d(log pi)/d(theta): (indicator - softmax) on each visited row.
  std::vector<double> grad_logprob(const Context& c, const Sequence& x) const;
  void accumulate_grad_logprob(const Context& c, const Sequence& x, double weight,
                               std::span<double> acc) const;

  // Exact probability of every sequence in X, indexed by sequence index.
  std::vector<double> enumerate_probs(const Context& c, uint64_t cap = kDefaultEnumCap) const;

  // Row addressing (used by checkpointing, fitting, and tests).
  int vocab_size() const { return space_.vocab.size(); }
  int feature_of(const Context& c) const;  // Bigram
  std::size_t bigram_row_base(int feature, TokenId prev /* -1 for BOS */) const;
  int context_slot(int context_id) const;  // throws on unknown id
  std::size_t prefix_row_base(int slot, uint64_t node) const;
  uint64_t decision_nodes() const { return decision_nodes_; }

 private:
  Policy() = default;

  std::span<const double> row(int feature_or_slot, TokenId prev, uint64_t node) const;

  PolicyKind kind_ = PolicyKind::Bigram;
  SequenceSpace space_;
  ContextFeaturizer feat_;
  std::vector<int> context_ids_;  // PrefixTree: sorted registered ids
  uint64_t decision_nodes_ = 0;
  std::vector<double> logits_;
};

// Operation-level view of the enumeration table: every terminated sequence in
// X with its probability.
std::vector<std::pair<Sequence, double>> enumerate_space(const Policy& policy, const Context& c,
                                                         uint64_t cap = kDefaultEnumCap);

}  // namespace cdpg
