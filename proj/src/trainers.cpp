#include "cdpg/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cdpg/errors.hpp"
#include "cdpg/kern/kernels.hpp"
#include "cdpg/oracle.hpp"

namespace cdpg {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Stream tags: one independent rng stream per role, keyed (seed, iter, tag[, slot]).
constexpr uint64_t kTagContextDraw = 0xC1;
constexpr uint64_t kTagSampling = 0x5A;
constexpr uint64_t kTagShuffle = 0xF5;
}  // namespace

void TrainerConfig::validate() const {
  if (contexts_per_iter < 1) throw ConfigError("trainer: N must be >= 1");
  if (samples_per_context < 1) throw ConfigError("trainer: M must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("trainer: alpha must be > 0");
  if (!(epsilon > 0.0)) throw ConfigError("trainer: epsilon must be > 0");
  if (iterations < 0) throw ConfigError("trainer: iterations must be >= 0");
  if (minibatch < 1) throw ConfigError("trainer: minibatch must be >= 1");
}

void AdaptiveBetaState::update(double measured_kl) {
  double e = (measured_kl - kl_target) / kl_target;
  e = std::clamp(e, -clip, clip);
  beta *= 1.0 + k_beta * e;
  if (beta < 1e-6) beta = 1e-6;  // underflow guard
}

std::vector<std::span<const BufferEntry>> shuffle_and_minibatch(std::vector<BufferEntry>& buffer,
                                                                int minibatch_size,
                                                                RngStream& rng) {
  if (buffer.empty()) throw std::invalid_argument("shuffle_and_minibatch: empty buffer");
  if (minibatch_size < 1) throw std::invalid_argument("shuffle_and_minibatch: bad minibatch");
  rng.shuffle(buffer);
  std::vector<std::span<const BufferEntry>> batches;
  for (std::size_t start = 0; start < buffer.size(); start += minibatch_size) {
    std::size_t len = std::min<std::size_t>(minibatch_size, buffer.size() - start);
    batches.emplace_back(buffer.data() + start, len);
  }
  return batches;
}

Trainer::Trainer(TrainerConfig cfg, Policy initial_policy, Ebm ebm,
                 std::vector<Context> train_contexts)
    : cfg_(cfg), policy_(std::move(initial_policy)), ebm_(std::move(ebm)),
      pool_(std::move(train_contexts)) {
  cfg_.validate();
  if (pool_.empty()) throw ConfigError("trainer: empty context pool");
  using Algo = TrainerConfig::Algo;
  if ((cfg_.algorithm == Algo::Reinforce || cfg_.algorithm == Algo::Ziegler) &&
      ebm_.is_distributional()) {
    throw ConfigError("trainer: Reinforce/Ziegler require a pointwise scorer");
  }
  beta_.beta = cfg_.ziegler.beta_init;
  beta_.kl_target = cfg_.ziegler.kl_target;
  beta_.k_beta = cfg_.ziegler.k_beta;
  beta_.clip = cfg_.ziegler.clip_range;
}

double Trainer::dpg_running_mean() const {
  if (cfg_.dpg_use_ema) return dpg_ema_;
  return dpg_count_ ? dpg_sum_ / static_cast<double>(dpg_count_) : 0.0;
}

double Trainer::update_weight(const BufferEntry& e) const {
  using Algo = TrainerConfig::Algo;
  switch (cfg_.algorithm) {
    case Algo::CDPG: {
      if (e.log_score == kNegInf) return 0.0;
      double denom = e.z_hat + (cfg_.use_exact_z ? 0.0 : cfg_.epsilon);
      return std::exp(e.log_score - e.sampling_logprob) / denom;
    }
    case Algo::DPG: {
      if (e.log_score == kNegInf) return 0.0;
      return std::exp(e.log_score - e.sampling_logprob) / (dpg_running_mean() + cfg_.epsilon);
    }
    case Algo::Reinforce:
      return e.constraint;
    case Algo::Ziegler: {
      const Context& c = drawn_[static_cast<std::size_t>(e.context_slot)];
      double ratio = std::exp(policy_.logprob(c, e.x) - e.sampling_logprob);
      double reward = e.constraint - beta_.beta * (e.sampling_logprob - e.base_logprob);
      double clipped = std::clamp(ratio, 1.0 - cfg_.ziegler.clip_range,
                                  1.0 + cfg_.ziegler.clip_range) * reward;
      // PPO clipped objective: gradient flows only when the unclipped side is
      // the active minimum.
      return ratio * reward <= clipped ? ratio * reward : 0.0;
    }
  }
  return 0.0;
}

IterationStats Trainer::step() {
  ++iteration_;
  const int n = cfg_.contexts_per_iter;
  const int m = cfg_.samples_per_context;
  const bool distributional = ebm_.is_distributional();
  using Algo = TrainerConfig::Algo;

  IterationStats stats;
  stats.iteration = iteration_;

  RngStream ctx_rng = RngStream::keyed(cfg_.seed, static_cast<uint64_t>(iteration_),
                                       kTagContextDraw);
  drawn_.clear();
  for (int i = 0; i < n; ++i) {
    drawn_.push_back(pool_[ctx_rng.below(pool_.size())]);
  }

  buffer_.clear();
  buffer_.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  std::vector<Sequence> xs(static_cast<std::size_t>(m));
  std::vector<double> lps(static_cast<std::size_t>(m));
  std::vector<double> base_lps(static_cast<std::size_t>(m));
  std::vector<double> log_w(static_cast<std::size_t>(m));
  std::vector<double> phis(static_cast<std::size_t>(m));
  std::vector<double> first_iter_scores;

  double zhat_sum = 0.0;
  int zero_z = 0;
  for (int i = 0; i < n; ++i) {
    const Context& c = drawn_[static_cast<std::size_t>(i)];
    RngStream srng = RngStream::keyed(cfg_.seed, static_cast<uint64_t>(iteration_), kTagSampling,
                                      static_cast<uint64_t>(i));
    for (int j = 0; j < m; ++j) {
      xs[static_cast<std::size_t>(j)] = policy_.sample(c, srng);
      lps[static_cast<std::size_t>(j)] = policy_.logprob(c, xs[static_cast<std::size_t>(j)]);
      base_lps[static_cast<std::size_t>(j)] =
          ebm_.base().logprob(c, xs[static_cast<std::size_t>(j)]);
    }

    std::optional<double> lambda_c;
    if (distributional) {
      for (int j = 0; j < m; ++j) {
        log_w[static_cast<std::size_t>(j)] =
            base_lps[static_cast<std::size_t>(j)] - lps[static_cast<std::size_t>(j)];
        phis[static_cast<std::size_t>(j)] = ebm_.feature()(c, xs[static_cast<std::size_t>(j)]);
      }
      try {
        lambda_c = solve_lambda_snis(log_w, phis, ebm_.mu_bar());
      } catch (const UnattainableMomentError&) {
        // Batch cannot express the moment; keep the previous lambda (no tilt
        // when the context has never been seen).
        ++stats.lambda_fallbacks;
        auto it = ebm_.lambda_table().find(c.id);
        lambda_c = it != ebm_.lambda_table().end() ? it->second : 0.0;
      }
      ebm_.set_lambda(c.id, *lambda_c);
    }

    double z;
    if (cfg_.use_exact_z) {
      z = exact_Z(ebm_, c).z_hat;
    } else {
      z = zhat_from_samples(ebm_, c, xs, lps).z_hat;
    }
    zhat_sum += z;
    if (z == 0.0) ++zero_z;

    for (int j = 0; j < m; ++j) {
      BufferEntry e;
      e.context_slot = i;
      e.context_id = c.id;
      e.x = xs[static_cast<std::size_t>(j)];
      e.sampling_logprob = lps[static_cast<std::size_t>(j)];
      e.base_logprob = base_lps[static_cast<std::size_t>(j)];
      e.log_score = ebm_.log_score(c, e.x);
      e.constraint = distributional ? 0.0
                                    : static_cast<double>(ebm_.scorer()(c, e.x));
      e.z_hat = z;
      e.lambda_c = lambda_c;
      if (cfg_.algorithm == Algo::DPG) {
        // Importance-weighted score P_c(x)/pi(x|c): its running mean matches
        // the Z_c scale, so a constant-Z task reduces DPG to CDPG exactly.
        double score = e.log_score == kNegInf ? 0.0 : std::exp(e.log_score - e.sampling_logprob);
        if (cfg_.dpg_use_ema) {
          if (!dpg_ema_init_) {
            first_iter_scores.push_back(score);
          } else {
            dpg_ema_ = cfg_.dpg_ema_decay * dpg_ema_ + (1.0 - cfg_.dpg_ema_decay) * score;
          }
        } else {
          dpg_sum_ += score;
          dpg_count_ += 1;
        }
      }
      buffer_.push_back(std::move(e));
    }
  }
  if (cfg_.algorithm == Algo::DPG && cfg_.dpg_use_ema && !dpg_ema_init_) {
    dpg_ema_ = kern::reduce_sum(first_iter_scores) / static_cast<double>(first_iter_scores.size());
    dpg_ema_init_ = true;
  }

  stats.mean_zhat = zhat_sum / n;
  stats.frac_zero_z = static_cast<double>(zero_z) / n;
  stats.dpg_running_mean = dpg_running_mean();

  RngStream shuffle_rng = RngStream::keyed(cfg_.seed, static_cast<uint64_t>(iteration_),
                                           kTagShuffle);
  auto batches = shuffle_and_minibatch(buffer_, cfg_.minibatch, shuffle_rng);

  if (grad_.size() != policy_.param_count()) grad_.assign(policy_.param_count(), 0.0);
  double weight_sum = 0.0;
  for (auto batch : batches) {
    std::fill(grad_.begin(), grad_.end(), 0.0);
    for (const BufferEntry& e : batch) {
      double w = update_weight(e);
      if (!std::isfinite(w)) {
        throw std::runtime_error("trainer: non-finite update weight at iteration " +
                                 std::to_string(iteration_) + ", context " +
                                 std::to_string(e.context_id));
      }
      weight_sum += w;
      if (w != 0.0) {
        policy_.accumulate_grad_logprob(drawn_[static_cast<std::size_t>(e.context_slot)], e.x, w,
                                        grad_);
      }
    }
    kern::axpy(cfg_.alpha / static_cast<double>(batch.size()), grad_, policy_.params_mutable());
  }
  stats.mean_pseudoreward = weight_sum / static_cast<double>(buffer_.size());

  for (double p : policy_.params()) {
    if (!std::isfinite(p)) {
      throw std::runtime_error("trainer: non-finite parameter after update at iteration " +
                               std::to_string(iteration_));
    }
  }

  if (cfg_.algorithm == Algo::Ziegler) {
    double kl_sum = 0.0;
    for (const BufferEntry& e : buffer_) {
      const Context& c = drawn_[static_cast<std::size_t>(e.context_slot)];
      kl_sum += policy_.logprob(c, e.x) - e.base_logprob;
    }
    stats.measured_kl = kl_sum / static_cast<double>(buffer_.size());
    beta_.update(stats.measured_kl);
    stats.beta = beta_.beta;
  }

  return stats;
}

}  // namespace cdpg
