#include "cdpg/task.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "cdpg/ebm.hpp"
#include "cdpg/errors.hpp"

namespace cdpg {

namespace {

constexpr uint64_t kTagContexts = 0x10;
constexpr uint64_t kTagCorpus = 0x11;
constexpr uint64_t kTagRefs = 0x12;

Vocab make_vocab(const TaskSpec& task) {
  std::vector<std::string> names;
  std::vector<std::string> entities;
  std::vector<std::pair<std::string, std::string>> numerals;
  switch (task.kind) {
    case TaskKind::Digitize: {
      for (int i = 1; i <= task.num_letters; ++i) names.push_back("w" + std::to_string(i));
      for (int i = 1; i <= task.numerals; ++i) {
        std::string num = "N" + std::to_string(i);
        std::string dig = "D" + std::to_string(i);
        names.push_back(num);
        names.push_back(dig);
        numerals.emplace_back(num, dig);
      }
      break;
    }
    case TaskKind::EntitySumm: {
      for (int i = 1; i <= task.entities; ++i) {
        std::string e = "E" + std::to_string(i);
        names.push_back(e);
        entities.push_back(e);
      }
      for (int i = 1; i <= task.num_letters; ++i) names.push_back("w" + std::to_string(i));
      break;
    }
    case TaskKind::GrammarCompile:
    case TaskKind::LintStyle: {
      names = {"NUM", "ID", "+", "*", "(", ")", "=", ";"};
      break;
    }
  }
  names.push_back("eos");
  return Vocab::make(std::move(names), "eos", entities, numerals);
}

std::vector<TokenId> letter_tokens(const Vocab& v) {
  std::vector<TokenId> out;
  for (TokenId t = 0; t < v.size(); ++t) {
    if (!v.name(t).empty() && v.name(t)[0] == 'w') out.push_back(t);
  }
  return out;
}

// One synthetic context; uniqueness is enforced by the caller.
std::vector<TokenId> gen_context(const TaskSpec& task, const Vocab& v, RngStream& rng) {
  std::vector<TokenId> items;
  switch (task.kind) {
    case TaskKind::Digitize: {
      std::vector<TokenId> letters = letter_tokens(v);
      int len = task.context_len_min +
                static_cast<int>(rng.below(task.context_len_max - task.context_len_min + 1));
      int max_num = std::min({task.context_numerals_max, static_cast<int>(v.numeral_pairs.size()),
                              len});
      int min_num = std::min(task.context_numerals_min, max_num);
      int n_num = min_num + static_cast<int>(rng.below(max_num - min_num + 1));
      std::vector<TokenId> pool;
      for (const auto& [num, dig] : v.numeral_pairs) pool.push_back(num);
      rng.shuffle(pool);
      items.assign(pool.begin(), pool.begin() + n_num);
      while (static_cast<int>(items.size()) < len) {
        items.push_back(letters[rng.below(letters.size())]);
      }
      rng.shuffle(items);
      break;
    }
    case TaskKind::EntitySumm: {
      std::vector<TokenId> letters = letter_tokens(v);
      int max_ent = std::min(task.context_entities_max, static_cast<int>(v.entity_tokens.size()));
      int min_ent = std::min(task.context_entities_min, max_ent);
      int n_ent = min_ent + static_cast<int>(rng.below(max_ent - min_ent + 1));
      std::vector<TokenId> pool = v.entity_tokens;
      rng.shuffle(pool);
      items.assign(pool.begin(), pool.begin() + n_ent);
      int len = std::max(task.context_len_min, n_ent) +
                static_cast<int>(rng.below(task.context_len_max - task.context_len_min + 1));
      while (static_cast<int>(items.size()) < len && !letters.empty()) {
        items.push_back(letters[rng.below(letters.size())]);
      }
      rng.shuffle(items);
      break;
    }
    case TaskKind::GrammarCompile:
    case TaskKind::LintStyle: {
      // Statement prefixes: "ID =" optionally extended with "term op" pairs.
      TokenId id = *v.find("ID"), eq = *v.find("="), num = *v.find("NUM");
      TokenId plus = *v.find("+"), star = *v.find("*");
      items = {id, eq};
      int kmax = std::max(0, (task.context_len_max - 2) / 2);
      int k = static_cast<int>(rng.below(static_cast<uint64_t>(kmax) + 1));
      for (int i = 0; i < k; ++i) {
        items.push_back(rng.below(2) ? num : id);
        items.push_back(rng.below(2) ? plus : star);
      }
      break;
    }
  }
  return items;
}

// Ancestral "nature" sampler the base model is fitted to. Emits sequences
// that mostly violate the task constraint.
Sequence nature_sample(const TaskSpec& task, const SequenceSpace& space, RngStream& rng) {
  const Vocab& v = space.vocab;
  Sequence x;
  for (int pos = 0;; ++pos) {
    if (pos == space.max_len - 1) {
      x.items.push_back(v.eos);
      break;
    }
    if (rng.uniform01() < task.nature_eos_rate) {
      x.items.push_back(v.eos);
      break;
    }
    TokenId tok = 0;
    switch (task.kind) {
      case TaskKind::Digitize: {
        double u = rng.uniform01();
        std::vector<TokenId> letters = letter_tokens(v);
        if (u < task.nature_digit_rate) {
          tok = v.numeral_pairs[rng.below(v.numeral_pairs.size())].second;
        } else if (u < task.nature_digit_rate + 0.1) {
          tok = v.numeral_pairs[rng.below(v.numeral_pairs.size())].first;
        } else {
          tok = letters[rng.below(letters.size())];
        }
        break;
      }
      case TaskKind::EntitySumm: {
        std::vector<TokenId> letters = letter_tokens(v);
        if (rng.uniform01() < task.nature_entity_rate) {
          tok = v.entity_tokens[rng.below(v.entity_tokens.size())];
        } else {
          tok = letters[rng.below(letters.size())];
        }
        break;
      }
      case TaskKind::GrammarCompile:
      case TaskKind::LintStyle: {
        int a = space.alphabet_size();
        tok = space.content_token(static_cast<int>(rng.below(static_cast<uint64_t>(a))));
        break;
      }
    }
    x.items.push_back(tok);
  }
  x.terminated = true;
  return x;
}

// Maximum-likelihood fit with additive smoothing; logits are set to the log
// of the smoothed transition probabilities.
void fit_bigram(Policy& p, const TaskSpec& task, std::span<const Context> contexts,
                uint64_t seed) {
  const SequenceSpace& space = p.space();
  const std::size_t v = static_cast<std::size_t>(space.vocab.size());
  std::vector<double> counts(p.param_count(), 0.0);
  RngStream rng = RngStream::keyed(seed, kTagCorpus);
  for (int s = 0; s < task.corpus_sequences; ++s) {
    const Context& c = contexts[static_cast<std::size_t>(s) % contexts.size()];
    int f = p.feature_of(c);
    Sequence x = nature_sample(task, space, rng);
    TokenId prev = -1;
    for (std::size_t pos = 0; pos < x.items.size(); ++pos) {
      if (pos == static_cast<std::size_t>(space.max_len - 1)) break;  // forced eos
      counts[p.bigram_row_base(f, prev) + static_cast<std::size_t>(x.items[pos])] += 1.0;
      prev = x.items[pos];
    }
  }
  const double kappa = task.corpus_smoothing;
  std::span<double> logits = p.params_mutable();
  for (std::size_t base = 0; base < counts.size(); base += v) {
    double total = 0.0;
    for (std::size_t t = 0; t < v; ++t) total += counts[base + t];
    for (std::size_t t = 0; t < v; ++t) {
      logits[base + t] = std::log((counts[base + t] + kappa) / (total + kappa * v));
    }
  }
}

void fit_prefix_tree(Policy& p, const TaskSpec& task, std::span<const Context> contexts,
                     uint64_t seed) {
  const SequenceSpace& space = p.space();
  const std::size_t v = static_cast<std::size_t>(space.vocab.size());
  const int per_context =
      std::max(32, task.corpus_sequences / std::max(1, static_cast<int>(contexts.size())));
  std::vector<double> counts(p.param_count(), 0.0);
  for (const Context& c : contexts) {
    int slot = p.context_slot(c.id);
    RngStream rng = RngStream::keyed(seed, kTagCorpus, static_cast<uint64_t>(c.id));
    for (int s = 0; s < per_context; ++s) {
      Sequence x = nature_sample(task, space, rng);
      uint64_t node = 0;
      for (std::size_t pos = 0; pos < x.items.size(); ++pos) {
        if (pos == static_cast<std::size_t>(space.max_len - 1)) break;
        TokenId tok = x.items[pos];
        counts[p.prefix_row_base(slot, node) + static_cast<std::size_t>(tok)] += 1.0;
        if (tok == space.vocab.eos) break;
        node = space.child(node, space.digit_of(tok));
      }
    }
  }
  const double kappa = task.corpus_smoothing;
  std::span<double> logits = p.params_mutable();
  for (std::size_t base = 0; base < counts.size(); base += v) {
    double total = 0.0;
    for (std::size_t t = 0; t < v; ++t) total += counts[base + t];
    for (std::size_t t = 0; t < v; ++t) {
      logits[base + t] = std::log((counts[base + t] + kappa) / (total + kappa * v));
    }
  }
}

ConstraintScorer make_scorer(const TaskSpec& task, const Vocab& v) {
  switch (task.kind) {
    case TaskKind::Digitize: return ConstraintScorer::digitize(v);
    case TaskKind::EntitySumm: return ConstraintScorer::entity_consistency(v, task.min_entities_k);
    case TaskKind::GrammarCompile: return ConstraintScorer::grammar_compilable(v);
    case TaskKind::LintStyle: return ConstraintScorer::lint_clean(v, task.style_cap);
  }
  throw ConfigError("task: bad kind");
}

Sequence make_reference(const Policy& base, const Context& c, const SequenceSpace& space,
                        uint64_t seed) {
  RngStream rng = RngStream::keyed(seed, kTagRefs, static_cast<uint64_t>(c.id));
  for (int attempt = 0; attempt < 100; ++attempt) {
    Sequence x = base.sample(c, rng);
    if (x.content_size() > 0) return x;
  }
  // Base is eos-degenerate for this context; fall back to a one-token string.
  Sequence x;
  x.items = {space.content_token(0), space.vocab.eos};
  x.terminated = true;
  return x;
}

}  // namespace

TaskBundle build_task(const ExperimentConfig& cfg) {
  Vocab vocab = make_vocab(cfg.task);
  SequenceSpace space{vocab, cfg.max_len};
  space.validate();

  // Disjoint train/test contexts: unique token strings, ids in draw order.
  const int want = cfg.train_contexts + cfg.test_contexts;
  RngStream ctx_rng = RngStream::keyed(cfg.seed, kTagContexts);
  std::set<std::vector<TokenId>> seen;
  std::vector<Context> contexts;
  for (int attempt = 0; attempt < want * 200 && static_cast<int>(contexts.size()) < want;
       ++attempt) {
    std::vector<TokenId> items = gen_context(cfg.task, vocab, ctx_rng);
    if (!seen.insert(items).second) continue;
    contexts.push_back(Context{std::move(items), static_cast<int>(contexts.size())});
  }
  if (static_cast<int>(contexts.size()) < want) {
    throw ConfigError("task: context generator cannot produce " + std::to_string(want) +
                      " distinct contexts; widen the context ranges");
  }

  ContextFeaturizer feat;
  if (cfg.featurizer) {
    feat.mode = *cfg.featurizer;
  } else {
    switch (cfg.task.kind) {
      case TaskKind::Digitize: feat.mode = ContextFeaturizer::Mode::ByNumeralSet; break;
      case TaskKind::EntitySumm: feat.mode = ContextFeaturizer::Mode::ByEntitySet; break;
      default: feat.mode = ContextFeaturizer::Mode::ById; break;
    }
  }
  feat.id_capacity = want;

  Policy base = [&]() {
    if (cfg.policy_family == PolicyKind::Bigram) {
      Policy p = Policy::bigram(space, feat);
      fit_bigram(p, cfg.task, std::span<const Context>(contexts.data(), cfg.train_contexts),
                 cfg.seed);
      return p;
    }
    std::vector<int> ids;
    for (const Context& c : contexts) ids.push_back(c.id);
    Policy p = Policy::prefix_tree(space, std::move(ids));
    fit_prefix_tree(p, cfg.task, contexts, cfg.seed);
    return p;
  }();

  TaskBundle bundle{std::move(space), feat,           std::move(base), make_scorer(cfg.task, vocab),
                    std::nullopt,     {},             {},              {},
                    {},               std::vector<int>{}};

  if (cfg.objective.distributional) {
    if (cfg.objective.feature == "entity-count") {
      bundle.feature = Feature::entity_count(vocab, cfg.objective.mu_bar);
    } else if (cfg.objective.feature == "token-count") {
      auto tok = vocab.find(cfg.objective.feature_token);
      if (!tok) throw ConfigError("task: unknown feature token " + cfg.objective.feature_token);
      bundle.feature = Feature::token_count(vocab, *tok, cfg.objective.mu_bar);
    } else {
      throw ConfigError("task: unknown feature kind " + cfg.objective.feature);
    }
  }

  // Feasibility: drop contexts whose pointwise target is empty.
  std::vector<Context> kept;
  if (!cfg.objective.distributional && bundle.space.num_sequences() <= kDefaultEnumCap) {
    Ebm probe = Ebm::pointwise(bundle.base, bundle.scorer);
    for (Context& c : contexts) {
      if (exact_Z(probe, c).z_hat > 0.0) {
        kept.push_back(std::move(c));
      } else {
        bundle.infeasible_dropped.push_back(c.id);
      }
    }
  } else {
    kept = std::move(contexts);
  }
  int n_train = 0;
  for (Context& c : kept) {
    if (c.id < cfg.train_contexts) {
      bundle.c_train.push_back(std::move(c));
      ++n_train;
    } else {
      bundle.c_test.push_back(std::move(c));
    }
  }
  if (n_train == 0) throw ConfigError("task: every training context is infeasible");
  if (bundle.c_test.empty()) throw ConfigError("task: every test context is infeasible");

  for (const Context& c : bundle.c_train) {
    bundle.refs_train.push_back(make_reference(bundle.base, c, bundle.space, cfg.seed));
  }
  for (const Context& c : bundle.c_test) {
    bundle.refs_test.push_back(make_reference(bundle.base, c, bundle.space, cfg.seed));
  }
  return bundle;
}

}  // namespace cdpg
