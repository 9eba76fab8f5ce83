#include "cdpg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "cdpg/kern/kernels.hpp"

namespace cdpg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

KlEstimate summarize(const std::vector<double>& per_context, int skipped) {
  KlEstimate e;
  e.skipped_contexts = skipped;
  const std::size_t n = per_context.size();
  if (n == 0) throw std::runtime_error("kl estimate: all contexts degenerate");
  e.value = kern::reduce_sum(per_context) / static_cast<double>(n);
  if (n >= 2) {
    double ss = kern::sum_sq_dev(per_context, e.value);
    e.std_error = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return e;
}

}  // namespace

KlEstimate estimate_kl_p_pi(const Ebm& ebm, const Policy& pi, std::span<const Context> pool,
                            int n_contexts, int m, double epsilon, RngStream& rng) {
  if (pool.empty() || n_contexts < 1 || m < 1) {
    throw std::invalid_argument("estimate_kl_p_pi: bad arguments");
  }
  std::vector<double> per_context;
  int skipped = 0;
  std::vector<double> log_ratio(static_cast<std::size_t>(m));
  for (int i = 0; i < n_contexts; ++i) {
    const Context& c = pool[rng.below(pool.size())];
    double zsum = 0.0;
    for (int j = 0; j < m; ++j) {
      Sequence x = pi.sample(c, rng);
      log_ratio[j] = ebm.log_score(c, x) - pi.logprob(c, x);
      if (log_ratio[j] != kNegInf) zsum += std::exp(log_ratio[j]);
    }
    double z_hat = zsum / m;
    if (z_hat == 0.0) {
      ++skipped;
      continue;
    }
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      if (log_ratio[j] == kNegInf) continue;  // zero-score sample carries no mass
      acc += std::exp(log_ratio[j]) * (-std::log(z_hat) + log_ratio[j]);
    }
    per_context.push_back(acc / (m * (z_hat + epsilon)));
  }
  return summarize(per_context, skipped);
}

KlEstimate estimate_kl_pi_a(const Policy& pi, const Policy& a, std::span<const Context> pool,
                            int n_contexts, int m, RngStream& rng) {
  if (pool.empty() || n_contexts < 1 || m < 1) {
    throw std::invalid_argument("estimate_kl_pi_a: bad arguments");
  }
  std::vector<double> per_context(static_cast<std::size_t>(n_contexts));
  for (int i = 0; i < n_contexts; ++i) {
    const Context& c = pool[rng.below(pool.size())];
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      Sequence x = pi.sample(c, rng);
      acc += pi.logprob(c, x) - a.logprob(c, x);
    }
    per_context[static_cast<std::size_t>(i)] = acc / m;
  }
  return summarize(per_context, 0);
}

double satisfaction_rate(const ConstraintScorer& b, const Policy& pi,
                         std::span<const Context> contexts, int m, RngStream& rng) {
  if (contexts.empty() || m < 1) throw std::invalid_argument("satisfaction_rate: bad arguments");
  long hits = 0;
  for (const Context& c : contexts) {
    for (int j = 0; j < m; ++j) {
      hits += b(c, pi.sample(c, rng));
    }
  }
  return static_cast<double>(hits) / (static_cast<double>(contexts.size()) * m);
}

double distinct2(const Sequence& x) {
  auto body = x.content();
  if (body.size() < 2) return 1.0;
  std::set<std::pair<TokenId, TokenId>> uniq;
  for (std::size_t i = 0; i + 1 < body.size(); ++i) {
    uniq.emplace(body[i], body[i + 1]);
  }
  return static_cast<double>(uniq.size()) / static_cast<double>(body.size() - 1);
}

namespace {

// Clipped n-gram match count and total for one order.
std::pair<long, long> ngram_matches(std::span<const TokenId> hyp, std::span<const TokenId> ref,
                                    std::size_t n) {
  if (hyp.size() < n) return {0, 0};
  std::map<std::vector<TokenId>, long> ref_counts;
  for (std::size_t i = 0; i + n <= ref.size(); ++i) {
    ref_counts[std::vector<TokenId>(ref.begin() + i, ref.begin() + i + n)] += 1;
  }
  std::map<std::vector<TokenId>, long> hyp_counts;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
    hyp_counts[std::vector<TokenId>(hyp.begin() + i, hyp.begin() + i + n)] += 1;
  }
  long matches = 0;
  for (const auto& [gram, cnt] : hyp_counts) {
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) matches += std::min(cnt, it->second);
  }
  return {matches, static_cast<long>(hyp.size() - n + 1)};
}

}  // namespace

double bleu4_lite(const Sequence& hyp, const Sequence& ref) {
  auto h = hyp.content();
  auto r = ref.content();
  if (r.empty()) throw std::invalid_argument("bleu4_lite: empty reference");
  if (h.empty()) return 0.0;
  double log_prec = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto [matches, total] = ngram_matches(h, r, n);
    if (total == 0) continue;  // hypothesis shorter than n
    double p = matches > 0 ? static_cast<double>(matches) / static_cast<double>(total)
                           : 1.0 / static_cast<double>(total + 1);
    log_prec += std::log(p);
    ++orders;
  }
  double brevity = h.size() >= r.size()
                       ? 1.0
                       : std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(h.size()));
  return brevity * std::exp(log_prec / orders);
}

double rouge_l(const Sequence& hyp, const Sequence& ref) {
  auto h = hyp.content();
  auto r = ref.content();
  if (r.empty()) throw std::invalid_argument("rouge_l: empty reference");
  if (h.empty()) return 0.0;
  // Rolling-row LCS.
  std::vector<std::size_t> prev(r.size() + 1, 0), cur(r.size() + 1, 0);
  for (std::size_t i = 1; i <= h.size(); ++i) {
    for (std::size_t j = 1; j <= r.size(); ++j) {
      cur[j] = h[i - 1] == r[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  double lcs = static_cast<double>(prev[r.size()]);
  if (lcs == 0.0) return 0.0;
  double p = lcs / static_cast<double>(h.size());
  double rec = lcs / static_cast<double>(r.size());
  return 2.0 * p * rec / (p + rec);
}

namespace {

std::set<TokenId> entities_in(const Vocab& v, std::span<const TokenId> toks) {
  std::set<TokenId> out;
  for (TokenId t : toks) {
    if (v.is_entity(t)) out.insert(t);
  }
  return out;
}

double overlap_ratio(const std::set<TokenId>& num_side, const std::set<TokenId>& other) {
  if (num_side.empty()) return 1.0;
  std::size_t inter = 0;
  for (TokenId t : num_side) inter += other.count(t);
  return static_cast<double>(inter) / static_cast<double>(num_side.size());
}

}  // namespace

double precision_source(const Vocab& v, const Sequence& x, const Context& c) {
  return overlap_ratio(entities_in(v, x.content()), entities_in(v, c.items));
}

double recall_target(const Vocab& v, const Sequence& x, const Sequence& t) {
  return overlap_ratio(entities_in(v, t.content()), entities_in(v, x.content()));
}

double nstd_z(std::span<const double> zs) {
  if (zs.empty()) throw std::invalid_argument("nstd_z: empty input");
  double mean = kern::reduce_sum(zs) / static_cast<double>(zs.size());
  if (mean == 0.0) throw std::invalid_argument("nstd_z: zero mean");
  double var = kern::sum_sq_dev(zs, mean) / static_cast<double>(zs.size());
  return std::sqrt(var) / mean;
}

std::vector<ZipfRow> zipf_table(std::span<const Sequence> samples, const Vocab& v) {
  std::vector<uint64_t> counts(static_cast<std::size_t>(v.size()), 0);
  for (const Sequence& x : samples) {
    for (TokenId t : x.content()) counts[static_cast<std::size_t>(t)] += 1;
  }
  std::vector<ZipfRow> rows;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t] > 0) rows.push_back({static_cast<TokenId>(t), counts[t], 0});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ZipfRow& a, const ZipfRow& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.token < b.token;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = static_cast<int>(i + 1);
  return rows;
}

}  // namespace cdpg
