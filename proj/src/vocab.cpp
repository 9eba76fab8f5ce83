#include "cdpg/vocab.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

namespace cdpg {

Vocab Vocab::make(std::vector<std::string> names, const std::string& eos_name,
                  const std::vector<std::string>& entity_names,
                  const std::vector<std::pair<std::string, std::string>>& numerals) {
  Vocab v;
  v.tokens = std::move(names);
  auto idx = [&v](const std::string& n) -> TokenId {
    auto t = v.find(n);
    if (!t) throw std::invalid_argument("vocab: unknown token name: " + n);
    return *t;
  };
  v.eos = idx(eos_name);
  for (const auto& e : entity_names) v.entity_tokens.push_back(idx(e));
  std::sort(v.entity_tokens.begin(), v.entity_tokens.end());
  for (const auto& [num, dig] : numerals) v.numeral_pairs.emplace_back(idx(num), idx(dig));
  v.validate();
  return v;
}

std::optional<TokenId> Vocab::find(const std::string& name) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == name) return static_cast<TokenId>(i);
  }
  return std::nullopt;
}

bool Vocab::is_entity(TokenId t) const {
  return std::binary_search(entity_tokens.begin(), entity_tokens.end(), t);
}

std::optional<TokenId> Vocab::digit_for(TokenId numeral) const {
  for (const auto& [num, dig] : numeral_pairs) {
    if (num == numeral) return dig;
  }
  return std::nullopt;
}

void Vocab::validate() const {
  if (tokens.empty()) throw std::invalid_argument("vocab: empty token list");
  std::set<std::string> uniq(tokens.begin(), tokens.end());
  if (uniq.size() != tokens.size()) throw std::invalid_argument("vocab: duplicate token names");
  if (eos < 0 || eos >= size()) throw std::invalid_argument("vocab: eos not a member");
  auto in_range = [this](TokenId t) { return t >= 0 && t < size(); };
  for (TokenId t : entity_tokens) {
    if (!in_range(t)) throw std::invalid_argument("vocab: entity token out of range");
  }
  std::set<TokenId> nkeys;
  for (const auto& [num, dig] : numeral_pairs) {
    if (!in_range(num) || !in_range(dig)) {
      throw std::invalid_argument("vocab: numeral pair token out of range");
    }
    if (!nkeys.insert(num).second) throw std::invalid_argument("vocab: duplicate numeral key");
  }
}

void SequenceSpace::validate() const {
  vocab.validate();
  if (max_len < 1) throw std::invalid_argument("space: max_len must be >= 1");
  if (vocab.size() < 2) throw std::invalid_argument("space: need at least one non-eos token");
}

TokenId SequenceSpace::content_token(int digit) const {
  TokenId t = static_cast<TokenId>(digit);
  if (t >= vocab.eos) t += 1;
  return t;
}

int SequenceSpace::digit_of(TokenId t) const {
  if (t == vocab.eos) return -1;
  return t < vocab.eos ? t : t - 1;
}

namespace {

// Saturating sum_{t=0}^{depth} A^t.
uint64_t geometric_nodes(uint64_t a, int depth) {
  const uint64_t kMax = std::numeric_limits<uint64_t>::max();
  uint64_t total = 0;
  uint64_t level = 1;
  for (int t = 0; t <= depth; ++t) {
    if (kMax - total < level) return kMax;
    total += level;
    if (t < depth) {
      if (level > kMax / a) return kMax;
      level *= a;
    }
  }
  return total;
}

}  // namespace

uint64_t SequenceSpace::num_sequences() const {
  return geometric_nodes(static_cast<uint64_t>(alphabet_size()), max_len - 1);
}

uint64_t SequenceSpace::num_decision_nodes() const {
  if (max_len < 2) return 0;
  return geometric_nodes(static_cast<uint64_t>(alphabet_size()), max_len - 2);
}

uint64_t SequenceSpace::index_of(const Sequence& x) const {
  if (!x.terminated) throw std::invalid_argument("index_of: sequence not terminated");
  if (x.items.empty() || x.items.back() != vocab.eos) {
    throw std::invalid_argument("index_of: terminated sequence must end in eos");
  }
  if (x.items.size() > static_cast<std::size_t>(max_len)) {
    throw std::invalid_argument("index_of: sequence exceeds max_len");
  }
  uint64_t node = 0;
  for (std::size_t i = 0; i + 1 < x.items.size(); ++i) {
    int d = digit_of(x.items[i]);
    if (d < 0) throw std::invalid_argument("index_of: eos inside sequence body");
    node = child(node, d);
  }
  return node;
}

Sequence SequenceSpace::sequence_at(uint64_t index) const {
  const uint64_t a = static_cast<uint64_t>(alphabet_size());
  Sequence x;
  while (index > 0) {
    uint64_t d = (index - 1) % a;
    index = (index - 1) / a;
    x.items.push_back(content_token(static_cast<int>(d)));
  }
  std::reverse(x.items.begin(), x.items.end());
  x.items.push_back(vocab.eos);
  x.terminated = true;
  return x;
}

bool SequenceSpace::contains(const Sequence& x) const {
  if (!x.terminated || x.items.empty() || x.items.back() != vocab.eos) return false;
  if (x.items.size() > static_cast<std::size_t>(max_len)) return false;
  for (std::size_t i = 0; i + 1 < x.items.size(); ++i) {
    TokenId t = x.items[i];
    if (t < 0 || t >= vocab.size() || t == vocab.eos) return false;
  }
  return true;
}

std::string SequenceSpace::render(const Sequence& x) const {
  std::string out;
  for (std::size_t i = 0; i < x.items.size(); ++i) {
    if (i) out += ' ';
    out += vocab.name(x.items[i]);
  }
  return out;
}

std::string SequenceSpace::render(const Context& c) const {
  std::string out;
  for (std::size_t i = 0; i < c.items.size(); ++i) {
    if (i) out += ' ';
    out += vocab.name(c.items[i]);
  }
  return out;
}

}  // namespace cdpg
