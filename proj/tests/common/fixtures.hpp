#pragma once

#include <cmath>
#include <vector>

#include "cdpg/config.hpp"
#include "cdpg/ebm.hpp"
#include "cdpg/policy.hpp"

// Shared test fixtures.

namespace testutil {

using namespace cdpg;

// vocab {A, B, eos}, uniform bigram policy over a ById featurizer.
struct TinyUniform {
  SequenceSpace space;
  Policy policy;
  Context c;

  static TinyUniform make(int max_len = 3) {
    Vocab v = Vocab::make({"A", "B", "eos"}, "eos");
    SequenceSpace s{v, max_len};
    ContextFeaturizer f;
    f.mode = ContextFeaturizer::Mode::ById;
    f.id_capacity = 4;
    Policy p = Policy::bigram(s, f);
    return {s, std::move(p), Context{{0}, 0}};
  }
};

// The "contains A" space: vocab {A, B, N, eos} with numeral pair N -> A and
// the eos logit suppressed, so X collapses to the 4 equiprobable length-2
// strings over {A, B}. The context carries N, making the digitize scorer
// "x contains A"; exact Z = 3/4.
struct ContainsA {
  SequenceSpace space;
  Policy base;
  ConstraintScorer scorer;
  std::vector<Context> contexts;

  static ContainsA make() {
    Vocab v = Vocab::make({"A", "B", "N", "eos"}, "eos", {}, {{"N", "A"}});
    SequenceSpace s{v, 3};
    ContextFeaturizer f;
    f.mode = ContextFeaturizer::Mode::ByNumeralSet;
    Policy p = Policy::bigram(s, f);
    TokenId n_tok = *v.find("N");
    // Suppress eos and N everywhere: sampling walks only {A, B}.
    std::span<double> logits = p.params_mutable();
    const std::size_t vs = static_cast<std::size_t>(v.size());
    for (std::size_t base = 0; base < logits.size(); base += vs) {
      logits[base + static_cast<std::size_t>(v.eos)] = -1e9;
      logits[base + static_cast<std::size_t>(n_tok)] = -1e9;
    }
    ConstraintScorer b = ConstraintScorer::digitize(v);
    std::vector<Context> ctxs{Context{{n_tok}, 0}, Context{{n_tok, n_tok}, 1}};
    return {s, std::move(p), std::move(b), std::move(ctxs)};
  }
};

// Digitize fixture config used across trainer and acceptance tests:
// vocab of 6 tokens (w1 w2 w3 N1 D1 eos), max_len 4, prefix-tree policy.
inline ExperimentConfig digitize_prefix_cfg() {
  ExperimentConfig cfg;
  cfg.task.kind = TaskKind::Digitize;
  cfg.task.num_letters = 3;
  cfg.task.numerals = 1;
  cfg.task.context_len_min = 2;
  cfg.task.context_len_max = 3;
  cfg.task.context_numerals_min = 1;
  cfg.task.context_numerals_max = 1;
  cfg.task.corpus_sequences = 4000;
  cfg.task.nature_digit_rate = 0.008;
  cfg.task.corpus_smoothing = 0.25;
  cfg.max_len = 4;
  cfg.policy_family = PolicyKind::PrefixTree;
  cfg.trainer.algorithm = TrainerConfig::Algo::CDPG;
  cfg.trainer.contexts_per_iter = 8;
  cfg.trainer.samples_per_context = 32;
  cfg.trainer.alpha = 0.5;
  cfg.trainer.iterations = 2000;
  cfg.trainer.minibatch = 32;
  cfg.seed = 7;
  cfg.trainer.seed = 7;
  cfg.train_contexts = 8;
  cfg.test_contexts = 8;
  cfg.eval.n_contexts = 8;
  cfg.eval.m_samples = 64;
  cfg.out_dir = "/tmp/cdpg_fixture_out";
  return cfg;
}

inline Sequence seq(std::vector<TokenId> body_and_eos) {
  return Sequence{std::move(body_and_eos), true};
}

}  // namespace testutil
