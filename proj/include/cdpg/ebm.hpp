#pragma once

#include <map>
#include <span>
#include <vector>

#include "cdpg/policy.hpp"
#include "cdpg/scorers.hpp"

namespace cdpg {

struct PartitionEstimate {
  int context_id = 0;
  double z_hat = 0.0;
  uint64_t m = 0;  // sample count; |X| for exact estimates
  enum class Method { ImportanceSampled, Exact } method = Method::ImportanceSampled;
};

// Conditional energy-based model over the base policy a(x|c):
//   pointwise:      P_c(x) = a(x|c) * b(x,c)            (b binary)
//   distributional: P_c(x) = a(x|c) * exp(lambda_c * phi(x,c))
// Scores are handled in log space; log P_c(x) = -inf encodes a zero score.
// The base policy is not owned; the caller keeps it alive and frozen.
class Ebm {
 public:
  static Ebm pointwise(const Policy& base, ConstraintScorer b);
  static Ebm distributional(const Policy& base, Feature phi, double mu_bar);

  const Policy& base() const { return *base_; }
  bool is_distributional() const { return distributional_; }
  const ConstraintScorer& scorer() const { return scorer_; }
  const Feature& feature() const { return feature_; }
  double mu_bar() const { return mu_bar_; }

  double lambda_for(int context_id) const;  // throws std::out_of_range if absent
  void set_lambda(int context_id, double lambda) { lambda_[context_id] = lambda; }
  const std::map<int, double>& lambda_table() const { return lambda_; }
  void set_lambda_table(std::map<int, double> table) { lambda_ = std::move(table); }

  double log_score(const Context& c, const Sequence& x) const;
  double score(const Context& c, const Sequence& x) const;

 private:
  const Policy* base_ = nullptr;
  bool distributional_ = false;
  ConstraintScorer scorer_;
  Feature feature_;
  double mu_bar_ = 0.0;
  std::map<int, double> lambda_;
};

// Importance-sampled partition function: mean of P_c(x_j)/proposal(x_j|c) over
// M ancestral samples from the proposal. Unbiased for Z_c.
PartitionEstimate estimate_Z(const Ebm& ebm, const Context& c, const Policy& proposal, int m,
                             RngStream& rng);

// Same estimator over an already-drawn batch (the training loop reuses its
// per-context samples).
PartitionEstimate zhat_from_samples(const Ebm& ebm, const Context& c,
                                    std::span<const Sequence> xs,
                                    std::span<const double> proposal_logprobs);

// Exact partition function by enumeration.
PartitionEstimate exact_Z(const Ebm& ebm, const Context& c, uint64_t cap = kDefaultEnumCap);

// Root of the SNIS moment equation g(lambda) = mu_bar where
//   g(lambda) = sum_j w_j phi_j / sum_j w_j,  w_j = exp(log_w_j + lambda*phi_j).
// g is nondecreasing in lambda (its derivative is an SNIS variance), so the
// root is found by bisection on [-50, 50] with bracket expansion, to
// |g - mu_bar| <= 1e-9. log_w_j = -inf entries carry zero weight.
double solve_lambda_snis(std::span<const double> log_w, std::span<const double> phi,
                         double mu_bar);

// Evaluate g(lambda) on a weighted sample (exposed for the monotonicity tests).
double snis_moment(std::span<const double> log_w, std::span<const double> phi, double lambda);

// lambda_c from M ancestral proposal samples, matching E[phi] to ebm.mu_bar().
double estimate_lambda_snis(const Ebm& ebm, const Context& c, const Policy& proposal, int m,
                            RngStream& rng);

}  // namespace cdpg
