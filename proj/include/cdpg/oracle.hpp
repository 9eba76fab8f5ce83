#pragma once

#include <span>
#include <vector>

#include "cdpg/ebm.hpp"

// Exact enumeration oracles. Everything here is brute force over the finite
// sequence space and exists to make estimator and trainer claims checkable.

namespace cdpg {

struct ExactTarget {
  int context_id = 0;
  std::vector<double> probs;  // p_c(x), indexed by sequence index
  double z_exact = 0.0;
};

// Unnormalized score P_c(x) for every sequence in X.
std::vector<double> exact_score_table(const Ebm& ebm, const Context& c,
                                      uint64_t cap = kDefaultEnumCap);

// Normalized target p_c = P_c / Z_c. Throws EmptyTargetError when Z_c = 0.
ExactTarget exact_target(const Ebm& ebm, const Context& c, uint64_t cap = kDefaultEnumCap);

// -(1/|C|) sum_c sum_x p_c(x) grad log pi(x|c): the exact gradient of the
// expected cross-entropy objective.
std::vector<double> exact_loss_grad(const Ebm& ebm, const Policy& pi,
                                    std::span<const Context> contexts,
                                    uint64_t cap = kDefaultEnumCap);

// E_c KL(p_c, pi) and E_c KL(pi, a) by enumeration, averaged over contexts.
double exact_kl_p_pi(const Ebm& ebm, const Policy& pi, std::span<const Context> contexts,
                     uint64_t cap = kDefaultEnumCap);
double exact_kl_pi_a(const Policy& pi, const Policy& a, std::span<const Context> contexts,
                     uint64_t cap = kDefaultEnumCap);

// Moment-matched lambda_c computed on the full enumeration (the target the
// SNIS estimator approximates).
double exact_lambda(const Ebm& ebm, const Context& c, uint64_t cap = kDefaultEnumCap);

// E_{x ~ pi(.|c)} phi(x, c) by enumeration.
double exact_feature_moment(const Feature& phi, const Policy& pi, const Context& c,
                            uint64_t cap = kDefaultEnumCap);

}  // namespace cdpg
