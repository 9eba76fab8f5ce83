#include "cdpg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cdpg/errors.hpp"
#include "cdpg/textio.hpp"

namespace cdpg {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad real for " + key + ": '" + v + "'");
  }
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad bool for " + key + ": '" + v + "'");
}

const char* task_name(TaskKind k) {
  switch (k) {
    case TaskKind::Digitize: return "digitize";
    case TaskKind::EntitySumm: return "entity-summ";
    case TaskKind::GrammarCompile: return "grammar-compile";
    case TaskKind::LintStyle: return "lint-style";
  }
  return "?";
}

TaskKind task_from(const std::string& s) {
  if (s == "digitize") return TaskKind::Digitize;
  if (s == "entity-summ") return TaskKind::EntitySumm;
  if (s == "grammar-compile") return TaskKind::GrammarCompile;
  if (s == "lint-style") return TaskKind::LintStyle;
  throw ConfigError("config: unknown task: " + s);
}

const char* algo_name(TrainerConfig::Algo a) {
  switch (a) {
    case TrainerConfig::Algo::CDPG: return "cdpg";
    case TrainerConfig::Algo::DPG: return "dpg";
    case TrainerConfig::Algo::Reinforce: return "reinforce";
    case TrainerConfig::Algo::Ziegler: return "ziegler";
  }
  return "?";
}

TrainerConfig::Algo algo_from(const std::string& s) {
  if (s == "cdpg") return TrainerConfig::Algo::CDPG;
  if (s == "dpg") return TrainerConfig::Algo::DPG;
  if (s == "reinforce") return TrainerConfig::Algo::Reinforce;
  if (s == "ziegler") return TrainerConfig::Algo::Ziegler;
  throw ConfigError("config: unknown algo: " + s);
}

const char* family_name(PolicyKind k) {
  return k == PolicyKind::Bigram ? "bigram" : "prefix-tree";
}

PolicyKind family_from(const std::string& s) {
  if (s == "bigram") return PolicyKind::Bigram;
  if (s == "prefix-tree") return PolicyKind::PrefixTree;
  throw ConfigError("config: unknown policy family: " + s);
}

const char* feat_name(ContextFeaturizer::Mode m) {
  switch (m) {
    case ContextFeaturizer::Mode::ById: return "by-id";
    case ContextFeaturizer::Mode::ByNumeralSet: return "by-numeral-set";
    case ContextFeaturizer::Mode::ByEntitySet: return "by-entity-set";
  }
  return "?";
}

ContextFeaturizer::Mode feat_from(const std::string& s) {
  if (s == "by-id") return ContextFeaturizer::Mode::ById;
  if (s == "by-numeral-set") return ContextFeaturizer::Mode::ByNumeralSet;
  if (s == "by-entity-set") return ContextFeaturizer::Mode::ByEntitySet;
  throw ConfigError("config: unknown featurizer: " + s);
}

const char* eval_on_name(EvalSpec::On o) {
  switch (o) {
    case EvalSpec::On::Train: return "train";
    case EvalSpec::On::Test: return "test";
    case EvalSpec::On::Auto: return "auto";
  }
  return "?";
}

EvalSpec::On eval_on_from(const std::string& s) {
  if (s == "train") return EvalSpec::On::Train;
  if (s == "test") return EvalSpec::On::Test;
  if (s == "auto") return EvalSpec::On::Auto;
  throw ConfigError("config: unknown eval_on: " + s);
}

}  // namespace

std::map<std::string, std::string> config_to_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: bad section at line " +
                                                std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
    }
    std::string key = trim(line.substr(0, eq));
    if (section.empty()) throw ConfigError("config: key outside a section: " + key);
    kv[section + "." + key] = trim(line.substr(eq + 1));
  }
  return kv;
}

ExperimentConfig config_from_kv(std::map<std::string, std::string> kv) {
  ExperimentConfig cfg;
  double scale = 1.0;
  auto take = [&kv](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return {};
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto set_int = [&](const std::string& key, int& dst) {
    if (std::string v = take(key); !v.empty()) dst = static_cast<int>(parse_int(key, v));
  };
  auto set_double = [&](const std::string& key, double& dst) {
    if (std::string v = take(key); !v.empty()) dst = parse_double(key, v);
  };
  auto set_bool = [&](const std::string& key, bool& dst) {
    if (std::string v = take(key); !v.empty()) dst = parse_bool(key, v);
  };

  if (std::string v = take("task.kind"); !v.empty()) cfg.task.kind = task_from(v);
  set_int("task.num_letters", cfg.task.num_letters);
  set_int("task.numerals", cfg.task.numerals);
  set_int("task.entities", cfg.task.entities);
  set_int("task.context_len_min", cfg.task.context_len_min);
  set_int("task.context_len_max", cfg.task.context_len_max);
  set_int("task.context_numerals_min", cfg.task.context_numerals_min);
  set_int("task.context_numerals_max", cfg.task.context_numerals_max);
  set_int("task.context_entities_min", cfg.task.context_entities_min);
  set_int("task.context_entities_max", cfg.task.context_entities_max);
  set_int("task.min_entities_k", cfg.task.min_entities_k);
  set_int("task.style_cap", cfg.task.style_cap);
  set_int("task.corpus_sequences", cfg.task.corpus_sequences);
  set_double("task.corpus_smoothing", cfg.task.corpus_smoothing);
  set_double("task.nature_digit_rate", cfg.task.nature_digit_rate);
  set_double("task.nature_entity_rate", cfg.task.nature_entity_rate);
  set_double("task.nature_eos_rate", cfg.task.nature_eos_rate);

  set_int("space.max_len", cfg.max_len);

  if (std::string v = take("policy.family"); !v.empty()) cfg.policy_family = family_from(v);
  if (std::string v = take("policy.featurizer"); !v.empty() && v != "auto") {
    cfg.featurizer = feat_from(v);
  }

  if (std::string v = take("trainer.algo"); !v.empty()) cfg.trainer.algorithm = algo_from(v);
  set_int("trainer.contexts_per_iter", cfg.trainer.contexts_per_iter);
  set_int("trainer.samples_per_context", cfg.trainer.samples_per_context);
  set_double("trainer.alpha", cfg.trainer.alpha);
  set_double("trainer.epsilon", cfg.trainer.epsilon);
  set_int("trainer.iterations", cfg.trainer.iterations);
  set_int("trainer.minibatch", cfg.trainer.minibatch);
  set_bool("trainer.dpg_use_ema", cfg.trainer.dpg_use_ema);
  set_double("trainer.dpg_ema_decay", cfg.trainer.dpg_ema_decay);
  set_double("trainer.beta_init", cfg.trainer.ziegler.beta_init);
  set_double("trainer.kl_target", cfg.trainer.ziegler.kl_target);
  set_double("trainer.k_beta", cfg.trainer.ziegler.k_beta);
  set_double("trainer.clip_range", cfg.trainer.ziegler.clip_range);

  set_bool("objective.distributional", cfg.objective.distributional);
  if (std::string v = take("objective.feature"); !v.empty()) cfg.objective.feature = v;
  if (std::string v = take("objective.feature_token"); !v.empty()) cfg.objective.feature_token = v;
  set_double("objective.mu_bar", cfg.objective.mu_bar);

  set_int("eval.cadence", cfg.eval.cadence);
  set_int("eval.contexts", cfg.eval.n_contexts);
  set_int("eval.samples_per_context", cfg.eval.m_samples);
  if (std::string v = take("eval.on"); !v.empty()) cfg.eval.on = eval_on_from(v);

  if (std::string v = take("run.seed"); !v.empty()) {
    cfg.seed = static_cast<uint64_t>(parse_int("run.seed", v));
  }
  set_int("run.train_contexts", cfg.train_contexts);
  set_int("run.test_contexts", cfg.test_contexts);
  set_int("run.checkpoint_every", cfg.checkpoint_every);
  if (std::string v = take("run.out"); !v.empty()) cfg.out_dir = v;
  set_double("run.scale", scale);

  if (!kv.empty()) throw ConfigError("config: unknown key: " + kv.begin()->first);

  if (scale != 1.0) {
    if (!(scale > 0.0)) throw ConfigError("config: scale must be > 0");
    auto scaled = [scale](int v) { return std::max(1, static_cast<int>(std::lround(v * scale))); };
    cfg.train_contexts = scaled(cfg.train_contexts);
    cfg.test_contexts = scaled(cfg.test_contexts);
    cfg.trainer.iterations = std::max(0, static_cast<int>(std::lround(cfg.trainer.iterations * scale)));
  }
  cfg.trainer.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  return config_from_kv(config_to_kv(text));
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void ExperimentConfig::validate() const {
  trainer.validate();
  if (max_len < 1) throw ConfigError("config: max_len must be >= 1");
  if (train_contexts < 1 || test_contexts < 1) throw ConfigError("config: context counts must be positive");
  if (eval.cadence < 1) throw ConfigError("config: eval cadence must be >= 1");
  if (eval.n_contexts < 1 || eval.m_samples < 1) throw ConfigError("config: eval counts must be positive");
  if (checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be >= 0");
  if (task.context_len_min < 1 || task.context_len_max < task.context_len_min) {
    throw ConfigError("config: bad context length range");
  }
  if ((task.kind == TaskKind::Digitize || task.kind == TaskKind::EntitySumm) &&
      task.num_letters < 1) {
    throw ConfigError("config: task needs num_letters >= 1");
  }
  if (objective.distributional && objective.feature == "token-count" &&
      objective.feature_token.empty()) {
    throw ConfigError("config: distributional token-count needs objective.feature_token");
  }
}

std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  out << "[task]\n";
  out << "kind = " << task_name(task.kind) << "\n";
  out << "num_letters = " << task.num_letters << "\n";
  out << "numerals = " << task.numerals << "\n";
  out << "entities = " << task.entities << "\n";
  out << "context_len_min = " << task.context_len_min << "\n";
  out << "context_len_max = " << task.context_len_max << "\n";
  out << "context_numerals_min = " << task.context_numerals_min << "\n";
  out << "context_numerals_max = " << task.context_numerals_max << "\n";
  out << "context_entities_min = " << task.context_entities_min << "\n";
  out << "context_entities_max = " << task.context_entities_max << "\n";
  out << "min_entities_k = " << task.min_entities_k << "\n";
  out << "style_cap = " << task.style_cap << "\n";
  out << "corpus_sequences = " << task.corpus_sequences << "\n";
  out << "corpus_smoothing = " << format_double(task.corpus_smoothing) << "\n";
  out << "nature_digit_rate = " << format_double(task.nature_digit_rate) << "\n";
  out << "nature_entity_rate = " << format_double(task.nature_entity_rate) << "\n";
  out << "nature_eos_rate = " << format_double(task.nature_eos_rate) << "\n";
  out << "\n[space]\n";
  out << "max_len = " << max_len << "\n";
  out << "\n[policy]\n";
  out << "family = " << family_name(policy_family) << "\n";
  out << "featurizer = " << (featurizer ? feat_name(*featurizer) : "auto") << "\n";
  out << "\n[trainer]\n";
  out << "algo = " << algo_name(trainer.algorithm) << "\n";
  out << "contexts_per_iter = " << trainer.contexts_per_iter << "\n";
  out << "samples_per_context = " << trainer.samples_per_context << "\n";
  out << "alpha = " << format_double(trainer.alpha) << "\n";
  out << "epsilon = " << format_double(trainer.epsilon) << "\n";
  out << "iterations = " << trainer.iterations << "\n";
  out << "minibatch = " << trainer.minibatch << "\n";
  out << "dpg_use_ema = " << (trainer.dpg_use_ema ? "true" : "false") << "\n";
  out << "dpg_ema_decay = " << format_double(trainer.dpg_ema_decay) << "\n";
  out << "beta_init = " << format_double(trainer.ziegler.beta_init) << "\n";
  out << "kl_target = " << format_double(trainer.ziegler.kl_target) << "\n";
  out << "k_beta = " << format_double(trainer.ziegler.k_beta) << "\n";
  out << "clip_range = " << format_double(trainer.ziegler.clip_range) << "\n";
  out << "\n[objective]\n";
  out << "distributional = " << (objective.distributional ? "true" : "false") << "\n";
  out << "feature = " << objective.feature << "\n";
  if (!objective.feature_token.empty()) out << "feature_token = " << objective.feature_token << "\n";
  out << "mu_bar = " << format_double(objective.mu_bar) << "\n";
  out << "\n[eval]\n";
  out << "cadence = " << eval.cadence << "\n";
  out << "contexts = " << eval.n_contexts << "\n";
  out << "samples_per_context = " << eval.m_samples << "\n";
  out << "on = " << eval_on_name(eval.on) << "\n";
  out << "\n[run]\n";
  out << "seed = " << seed << "\n";
  out << "train_contexts = " << train_contexts << "\n";
  out << "test_contexts = " << test_contexts << "\n";
  out << "checkpoint_every = " << checkpoint_every << "\n";
  out << "out = " << out_dir << "\n";
  return out.str();
}

uint64_t ExperimentConfig::hash() const {
  std::string text = echo();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace cdpg
