#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cdpg/ebm.hpp"

namespace cdpg {

struct TrainerConfig {
  enum class Algo { CDPG, DPG, Reinforce, Ziegler };
  Algo algorithm = Algo::CDPG;
  int contexts_per_iter = 32;    // N
  int samples_per_context = 64;  // M
  double alpha = 0.1;
  double epsilon = 1e-6;  // Z stabilizer
  int iterations = 2000;
  int minibatch = 32;
  uint64_t seed = 0;
  bool dpg_use_ema = false;  // DPG ablation: EMA instead of cumulative mean
  double dpg_ema_decay = 0.99;
  bool use_exact_z = false;  // testing hook: exact Z_c, no epsilon

  struct ZieglerConfig {
    double beta_init = 0.2;
    double kl_target = 6.0;
    double k_beta = 0.1;
    double clip_range = 0.2;
  };
  ZieglerConfig ziegler;

  void validate() const;  // throws ConfigError
};

// Proportional KL controller: beta <- beta * (1 + k_beta * clip(e)) with
// e = (measured - target) / target.
struct AdaptiveBetaState {
  double beta = 0.2;
  double kl_target = 6.0;
  double k_beta = 0.1;
  double clip = 0.2;

  void update(double measured_kl);
};

struct BufferEntry {
  int context_slot = 0;  // into the iteration's drawn contexts
  int context_id = 0;
  Sequence x;
  double sampling_logprob = 0.0;  // log pi(x|c) when x was drawn
  double base_logprob = 0.0;      // log a(x|c)
  double log_score = 0.0;         // log P_c(x); -inf when b = 0
  double constraint = 0.0;        // b(x,c) for pointwise objectives
  double z_hat = 0.0;
  std::optional<double> lambda_c;
};

struct IterationStats {
  int iteration = 0;
  double mean_zhat = 0.0;
  double frac_zero_z = 0.0;
  double mean_pseudoreward = 0.0;
  int lambda_fallbacks = 0;      // distributional: batches with unattainable moment
  double dpg_running_mean = 0.0; // DPG only
  double beta = 0.0;             // Ziegler only
  double measured_kl = 0.0;      // Ziegler only
};

// Fisher-Yates shuffle with the iteration stream, then contiguous minibatch
// views; the last batch may be short.
std::vector<std::span<const BufferEntry>> shuffle_and_minibatch(std::vector<BufferEntry>& buffer,
                                                                int minibatch_size,
                                                                RngStream& rng);

// One training run: owns the evolving policy pi (initialized from a copy of
// the base) and a conditional EBM referencing the frozen base. step() runs one
// outer-loop iteration of the configured algorithm.
//
// Importance ratios use the sampling-time pi(x|c) cached in the buffer;
// grad log pi is taken at the current parameters.
class Trainer {
 public:
  Trainer(TrainerConfig cfg, Policy initial_policy, Ebm ebm, std::vector<Context> train_contexts);

  IterationStats step();

  const TrainerConfig& config() const { return cfg_; }
  const Policy& policy() const { return policy_; }
  Policy& policy_mutable() { return policy_; }
  const Ebm& ebm() const { return ebm_; }
  int iteration() const { return iteration_; }
  const std::vector<Context>& contexts() const { return pool_; }

  // Introspection for tests.
  const std::vector<BufferEntry>& last_buffer() const { return buffer_; }
  const std::vector<Context>& last_drawn() const { return drawn_; }
  double dpg_running_mean() const;
  const AdaptiveBetaState& beta_state() const { return beta_; }

 private:
  double update_weight(const BufferEntry& e) const;

  TrainerConfig cfg_;
  Policy policy_;
  Ebm ebm_;
  std::vector<Context> pool_;
  int iteration_ = 0;

  std::vector<Context> drawn_;
  std::vector<BufferEntry> buffer_;
  std::vector<double> grad_;

  // DPG ablation running-mean state.
  double dpg_sum_ = 0.0;
  uint64_t dpg_count_ = 0;
  double dpg_ema_ = 0.0;
  bool dpg_ema_init_ = false;

  AdaptiveBetaState beta_;
};

}  // namespace cdpg
