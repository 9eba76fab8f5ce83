#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "cdpg/policy.hpp"
#include "cdpg/trainers.hpp"

namespace cdpg {

enum class TaskKind { Digitize, EntitySumm, GrammarCompile, LintStyle };

struct TaskSpec {
  TaskKind kind = TaskKind::Digitize;
  // vocab shape
  int num_letters = 2;
  int numerals = 2;   // digitize: numeral/digit pairs
  int entities = 8;   // entity-summ
  // context synthesis
  int context_len_min = 2;
  int context_len_max = 3;
  int context_numerals_min = 1;  // digitize; 0 allows vacuous contexts
  int context_numerals_max = 2;
  int context_entities_min = 4;
  int context_entities_max = 8;
  // objective knobs
  int min_entities_k = 4;
  int style_cap = 8;
  // base-model fit
  int corpus_sequences = 2000;
  double corpus_smoothing = 0.5;
  double nature_digit_rate = 0.02;
  double nature_entity_rate = 0.35;
  double nature_eos_rate = 0.25;
};

struct ObjectiveSpec {
  bool distributional = false;  // gated extension: exponential-family EBM
  std::string feature = "token-count";  // token-count | entity-count
  std::string feature_token;            // token name for token-count
  double mu_bar = 1.0;
};

struct EvalSpec {
  enum class On { Train, Test, Auto };
  int cadence = 50;  // iterations between metric passes
  int n_contexts = 16;
  int m_samples = 64;
  On on = On::Auto;
};

struct ExperimentConfig {
  TaskSpec task;
  int max_len = 4;
  PolicyKind policy_family = PolicyKind::PrefixTree;
  std::optional<ContextFeaturizer::Mode> featurizer;  // nullopt = per-task default
  TrainerConfig trainer;
  ObjectiveSpec objective;
  EvalSpec eval;
  uint64_t seed = 0;
  int train_contexts = 64;
  int test_contexts = 64;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  std::string out_dir = "out";

  std::string echo() const;  // canonical re-parseable text
  uint64_t hash() const;     // FNV-1a over echo()
  void validate() const;
};

// Flat "[section] key = value" text. Unknown keys are rejected. The scale
// knob multiplies train/test context counts and iterations, then drops out of
// the echoed config.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Key-value layer, exposed for sweep overrides ("section.key" -> value).
std::map<std::string, std::string> config_to_kv(const std::string& text);
ExperimentConfig config_from_kv(std::map<std::string, std::string> kv);

}  // namespace cdpg
