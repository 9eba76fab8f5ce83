#include "cdpg/oracle.hpp"

#include <cmath>
#include <limits>

#include "cdpg/errors.hpp"
#include "cdpg/kern/kernels.hpp"

namespace cdpg {

std::vector<double> exact_score_table(const Ebm& ebm, const Context& c, uint64_t cap) {
  const Policy& base = ebm.base();
  std::vector<double> table = base.enumerate_probs(c, cap);
  for (uint64_t i = 0; i < table.size(); ++i) {
    if (table[i] == 0.0) continue;
    Sequence x = base.space().sequence_at(i);
    if (ebm.is_distributional()) {
      table[i] *= std::exp(ebm.lambda_for(c.id) * ebm.feature()(c, x));
    } else if (!ebm.scorer()(c, x)) {
      table[i] = 0.0;
    }
  }
  return table;
}

ExactTarget exact_target(const Ebm& ebm, const Context& c, uint64_t cap) {
  ExactTarget t;
  t.context_id = c.id;
  t.probs = exact_score_table(ebm, c, cap);
  t.z_exact = kern::reduce_sum(t.probs);
  if (t.z_exact <= 0.0) {
    throw EmptyTargetError("exact_target: Z_c = 0 (constraint infeasible for context " +
                           std::to_string(c.id) + ")");
  }
  kern::scale(t.probs, 1.0 / t.z_exact);
  return t;
}

std::vector<double> exact_loss_grad(const Ebm& ebm, const Policy& pi,
                                    std::span<const Context> contexts, uint64_t cap) {
  std::vector<double> g(pi.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(contexts.size());
  for (const Context& c : contexts) {
    ExactTarget t = exact_target(ebm, c, cap);
    for (uint64_t i = 0; i < t.probs.size(); ++i) {
      if (t.probs[i] == 0.0) continue;
      pi.accumulate_grad_logprob(c, pi.space().sequence_at(i), -t.probs[i] * inv_n, g);
    }
  }
  return g;
}

double exact_kl_p_pi(const Ebm& ebm, const Policy& pi, std::span<const Context> contexts,
                     uint64_t cap) {
  double total = 0.0;
  std::vector<double> terms;
  for (const Context& c : contexts) {
    ExactTarget t = exact_target(ebm, c, cap);
    std::vector<double> q = pi.enumerate_probs(c, cap);
    terms.assign(t.probs.size(), 0.0);
    for (uint64_t i = 0; i < t.probs.size(); ++i) {
      if (t.probs[i] > 0.0) {
        if (q[i] == 0.0) return std::numeric_limits<double>::infinity();  // support lost
        terms[i] = t.probs[i] * (std::log(t.probs[i]) - std::log(q[i]));
      }
    }
    total += kern::reduce_sum(terms);
  }
  return total / static_cast<double>(contexts.size());
}

double exact_kl_pi_a(const Policy& pi, const Policy& a, std::span<const Context> contexts,
                     uint64_t cap) {
  double total = 0.0;
  std::vector<double> terms;
  for (const Context& c : contexts) {
    std::vector<double> q = pi.enumerate_probs(c, cap);
    std::vector<double> p_a = a.enumerate_probs(c, cap);
    terms.assign(q.size(), 0.0);
    for (uint64_t i = 0; i < q.size(); ++i) {
      if (q[i] > 0.0) {
        if (p_a[i] == 0.0) return std::numeric_limits<double>::infinity();
        terms[i] = q[i] * (std::log(q[i]) - std::log(p_a[i]));
      }
    }
    total += kern::reduce_sum(terms);
  }
  return total / static_cast<double>(contexts.size());
}

double exact_lambda(const Ebm& ebm, const Context& c, uint64_t cap) {
  if (!ebm.is_distributional()) {
    throw std::logic_error("exact_lambda: pointwise EBM has no lambda");
  }
  const Policy& base = ebm.base();
  std::vector<double> probs = base.enumerate_probs(c, cap);
  std::vector<double> log_w(probs.size()), phi(probs.size());
  for (uint64_t i = 0; i < probs.size(); ++i) {
    log_w[i] = std::log(probs[i]);  // -inf for zero-probability sequences
    phi[i] = probs[i] > 0.0 ? ebm.feature()(c, base.space().sequence_at(i)) : 0.0;
  }
  return solve_lambda_snis(log_w, phi, ebm.mu_bar());
}

double exact_feature_moment(const Feature& phi, const Policy& pi, const Context& c,
                            uint64_t cap) {
  std::vector<double> probs = pi.enumerate_probs(c, cap);
  std::vector<double> vals(probs.size(), 0.0);
  for (uint64_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) vals[i] = phi(c, pi.space().sequence_at(i));
  }
  return kern::dot(probs, vals);
}

}  // namespace cdpg
