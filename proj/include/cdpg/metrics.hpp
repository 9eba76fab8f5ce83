#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cdpg/ebm.hpp"

namespace cdpg {

struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;      // over per-context estimates
  int skipped_contexts = 0;    // contexts with Z_hat = 0
};

// Plug-in importance-sampled estimator of E_c KL(p_c, pi): draws N contexts
// from the pool (uniform, with replacement), M ancestral samples per context,
// forms Z_hat from those samples and averages
//   1/(Z_hat+eps) * P_c(x)/pi(x|c) * (-log Z_hat + log(P_c(x)/pi(x|c))).
// Contexts whose Z_hat is zero carry no signal and are skipped (counted).
KlEstimate estimate_kl_p_pi(const Ebm& ebm, const Policy& pi, std::span<const Context> pool,
                            int n_contexts, int m, double epsilon, RngStream& rng);

// Unbiased estimator of E_c KL(pi, a): mean of log(pi(x|c)/a(x|c)) over
// ancestral samples from pi.
KlEstimate estimate_kl_pi_a(const Policy& pi, const Policy& a, std::span<const Context> pool,
                            int n_contexts, int m, RngStream& rng);

// Monte-Carlo constraint satisfaction: mean of b over m samples per context.
double satisfaction_rate(const ConstraintScorer& b, const Policy& pi,
                         std::span<const Context> contexts, int m, RngStream& rng);

// Unique adjacent-token bigrams / total bigrams (eos excluded); sequences with
// fewer than two content tokens score 1 by convention.
double distinct2(const Sequence& x);

// Brevity-penalized geometric mean of clipped n-gram precisions, n = 1..4,
// with add-one smoothing on zero counts; orders longer than the hypothesis are
// skipped. Throws on an empty reference.
double bleu4_lite(const Sequence& hyp, const Sequence& ref);

// LCS-based F1. Throws on an empty reference.
double rouge_l(const Sequence& hyp, const Sequence& ref);

// |ENT(x) <intersect> ENT(c)| / |ENT(x)|; 1 when ENT(x) is empty (no
// hallucinated entities). recall_target likewise against a target summary.
double precision_source(const Vocab& v, const Sequence& x, const Context& c);
double recall_target(const Vocab& v, const Sequence& x, const Sequence& t);

// Population std / mean. Throws when the mean is zero.
double nstd_z(std::span<const double> zs);

struct ZipfRow {
  TokenId token = 0;
  uint64_t frequency = 0;
  int rank = 0;
};

// Descending-frequency token ranking over sample contents; ties broken by
// vocab order.
std::vector<ZipfRow> zipf_table(std::span<const Sequence> samples, const Vocab& v);

struct MetricsReport {
  int iteration = 0;
  KlEstimate kl_p_pi_est;
  KlEstimate kl_pi_a_est;
  std::optional<double> kl_p_pi_exact;
  std::optional<double> kl_pi_a_exact;
  double satisfaction = 0.0;
  double distinct2 = 0.0;
  double bleu4 = 0.0;
  double rougeL = 0.0;
  double precision_source = 0.0;
  double recall_target = 0.0;
  double mean_entities = 0.0;
  double nstd_z = 0.0;
  std::optional<double> feature_moment;  // exact E_pi[phi], distributional runs
  std::vector<ZipfRow> zipf;
};

}  // namespace cdpg
