#include "cdpg/ebm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cdpg/errors.hpp"
#include "cdpg/kern/kernels.hpp"

namespace cdpg {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Ebm Ebm::pointwise(const Policy& base, ConstraintScorer b) {
  Ebm e;
  e.base_ = &base;
  e.distributional_ = false;
  e.scorer_ = std::move(b);
  return e;
}

Ebm Ebm::distributional(const Policy& base, Feature phi, double mu_bar) {
  Ebm e;
  e.base_ = &base;
  e.distributional_ = true;
  e.feature_ = std::move(phi);
  e.mu_bar_ = mu_bar;
  return e;
}

double Ebm::lambda_for(int context_id) const {
  auto it = lambda_.find(context_id);
  if (it == lambda_.end()) {
    throw std::out_of_range("ebm: no lambda entry for context " + std::to_string(context_id));
  }
  return it->second;
}

double Ebm::log_score(const Context& c, const Sequence& x) const {
  double base_lp = base_->logprob(c, x);
  if (!distributional_) {
    return scorer_(c, x) ? base_lp : kNegInf;
  }
  return base_lp + lambda_for(c.id) * feature_(c, x);
}

double Ebm::score(const Context& c, const Sequence& x) const {
  return std::exp(log_score(c, x));
}

PartitionEstimate estimate_Z(const Ebm& ebm, const Context& c, const Policy& proposal, int m,
                             RngStream& rng) {
  if (m < 1) throw std::invalid_argument("estimate_Z: m must be >= 1");
  double sum = 0.0;
  for (int j = 0; j < m; ++j) {
    Sequence x = proposal.sample(c, rng);
    double lw = ebm.log_score(c, x) - proposal.logprob(c, x);
    if (lw != kNegInf) sum += std::exp(lw);
  }
  return {c.id, sum / m, static_cast<uint64_t>(m), PartitionEstimate::Method::ImportanceSampled};
}

PartitionEstimate zhat_from_samples(const Ebm& ebm, const Context& c,
                                    std::span<const Sequence> xs,
                                    std::span<const double> proposal_logprobs) {
  if (xs.empty()) throw std::invalid_argument("zhat_from_samples: empty batch");
  double sum = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    double lw = ebm.log_score(c, xs[j]) - proposal_logprobs[j];
    if (lw != kNegInf) sum += std::exp(lw);
  }
  return {c.id, sum / static_cast<double>(xs.size()), xs.size(),
          PartitionEstimate::Method::ImportanceSampled};
}

PartitionEstimate exact_Z(const Ebm& ebm, const Context& c, uint64_t cap) {
  const Policy& base = ebm.base();
  std::vector<double> probs = base.enumerate_probs(c, cap);
  std::vector<double> scores(probs.size());
  for (uint64_t i = 0; i < probs.size(); ++i) {
    if (probs[i] == 0.0) {
      scores[i] = 0.0;
      continue;
    }
    Sequence x = base.space().sequence_at(i);
    if (ebm.is_distributional()) {
      scores[i] = probs[i] * std::exp(ebm.lambda_for(c.id) * ebm.feature()(c, x));
    } else {
      scores[i] = ebm.scorer()(c, x) ? probs[i] : 0.0;
    }
  }
  return {c.id, kern::reduce_sum(scores), probs.size(), PartitionEstimate::Method::Exact};
}

double snis_moment(std::span<const double> log_w, std::span<const double> phi, double lambda) {
  double m = kNegInf;
  for (std::size_t j = 0; j < log_w.size(); ++j) {
    if (log_w[j] == kNegInf) continue;
    m = std::max(m, log_w[j] + lambda * phi[j]);
  }
  if (m == kNegInf) throw std::invalid_argument("snis_moment: no positive-weight samples");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < log_w.size(); ++j) {
    if (log_w[j] == kNegInf) continue;
    double w = std::exp(log_w[j] + lambda * phi[j] - m);
    num += w * phi[j];
    den += w;
  }
  return num / den;
}

double solve_lambda_snis(std::span<const double> log_w, std::span<const double> phi,
                         double mu_bar) {
  if (log_w.size() != phi.size() || log_w.size() < 1) {
    throw std::invalid_argument("solve_lambda_snis: bad sample");
  }
  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = kNegInf;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    if (log_w[j] == kNegInf) continue;
    phi_min = std::min(phi_min, phi[j]);
    phi_max = std::max(phi_max, phi[j]);
  }
  if (phi_min > phi_max) throw std::invalid_argument("solve_lambda_snis: empty support");
  if (phi_min == phi_max) {
    // Degenerate moment: every achievable moment equals phi_min.
    if (std::abs(phi_min - mu_bar) <= 1e-12) return 0.0;
    throw UnattainableMomentError("snis: constant feature differs from target moment");
  }
  if (mu_bar <= phi_min || mu_bar >= phi_max) {
    throw UnattainableMomentError("snis: target moment outside achievable range");
  }

  const double tol = 1e-9;
  double lo = -50.0, hi = 50.0;
  // g is nondecreasing; expand the bracket until it straddles mu_bar.
  int expansions = 0;
  while (snis_moment(log_w, phi, lo) > mu_bar) {
    lo *= 2.0;
    if (++expansions > 20) throw UnattainableMomentError("snis: bracket not found (low side)");
  }
  expansions = 0;
  while (snis_moment(log_w, phi, hi) < mu_bar) {
    hi *= 2.0;
    if (++expansions > 20) throw UnattainableMomentError("snis: bracket not found (high side)");
  }
  double mid = 0.0;
  for (int it = 0; it < 500; ++it) {
    mid = 0.5 * (lo + hi);
    double g = snis_moment(log_w, phi, mid);
    if (std::abs(g - mu_bar) <= tol) return mid;
    if (g < mu_bar) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw UnattainableMomentError("snis: bisection did not reach tolerance");
}

double estimate_lambda_snis(const Ebm& ebm, const Context& c, const Policy& proposal, int m,
                            RngStream& rng) {
  if (!ebm.is_distributional()) {
    throw std::logic_error("estimate_lambda_snis: pointwise EBM has no lambda");
  }
  if (m < 2) throw std::invalid_argument("estimate_lambda_snis: need m >= 2");
  std::vector<double> log_w(m), phi(m);
  for (int j = 0; j < m; ++j) {
    Sequence x = proposal.sample(c, rng);
    log_w[j] = ebm.base().logprob(c, x) - proposal.logprob(c, x);
    phi[j] = ebm.feature()(c, x);
  }
  return solve_lambda_snis(log_w, phi, ebm.mu_bar());
}

}  // namespace cdpg
