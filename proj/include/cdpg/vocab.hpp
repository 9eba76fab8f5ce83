#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cdpg {

using TokenId = int32_t;

// Token alphabet with a distinguished terminator. entity_tokens and
// numeral_pairs carry the task-specific token roles (entity-flagged subset,
// numeral->digit lookup).
struct Vocab {
  std::vector<std::string> tokens;
  TokenId eos = -1;
  std::vector<TokenId> entity_tokens;                    // sorted, unique
  std::vector<std::pair<TokenId, TokenId>> numeral_pairs;  // numeral -> digit

  static Vocab make(std::vector<std::string> names, const std::string& eos_name,
                    const std::vector<std::string>& entity_names = {},
                    const std::vector<std::pair<std::string, std::string>>& numerals = {});

  int size() const { return static_cast<int>(tokens.size()); }
  std::optional<TokenId> find(const std::string& name) const;
  const std::string& name(TokenId t) const { return tokens.at(static_cast<size_t>(t)); }
  bool is_entity(TokenId t) const;
  std::optional<TokenId> digit_for(TokenId numeral) const;

  void validate() const;  // throws std::invalid_argument on a broken invariant
};

struct Sequence {
  std::vector<TokenId> items;
  bool terminated = false;

  std::size_t content_size() const { return items.size() - (terminated ? 1u : 0u); }
  std::span<const TokenId> content() const {
    return std::span<const TokenId>(items.data(), content_size());
  }
  bool operator==(const Sequence&) const = default;
};

struct Context {
  std::vector<TokenId> items;
  int id = 0;
};

// Finite space of terminated sequences of length <= max_len (counting eos).
// Sequences are indexed by the prefix-tree node at which eos is emitted:
// node 0 is the empty prefix, child(i, d) = i*A + d + 1 over the A = |V|-1
// content tokens. The layout is breadth-first, so nodes of depth < max_len-1
// (the ones with a free next-token choice) occupy a contiguous index range.
struct SequenceSpace {
  Vocab vocab;
  int max_len = 0;

  void validate() const;

  int alphabet_size() const { return vocab.size() - 1; }
  // Content token for digit d in [0, A): vocab order with eos skipped.
  TokenId content_token(int digit) const;
  int digit_of(TokenId t) const;  // -1 for eos

  uint64_t num_sequences() const;   // sum_{t=0}^{max_len-1} A^t
  uint64_t num_decision_nodes() const;  // sum_{t=0}^{max_len-2} A^t

  uint64_t child(uint64_t node, int digit) const {
    return node * static_cast<uint64_t>(alphabet_size()) + static_cast<uint64_t>(digit) + 1;
  }

  uint64_t index_of(const Sequence& x) const;  // throws if x does not fit the space
  Sequence sequence_at(uint64_t index) const;

  bool contains(const Sequence& x) const;

  std::string render(const Sequence& x) const;  // space-joined token names
  std::string render(const Context& c) const;
};

}  // namespace cdpg
