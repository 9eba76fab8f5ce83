#include "cdpg/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cdpg/checkpoint.hpp"
#include "cdpg/errors.hpp"
#include "cdpg/oracle.hpp"
#include "cdpg/textio.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace cdpg {

namespace {

constexpr uint64_t kTagMetricSamples = 0x20;
constexpr uint64_t kTagMetricKlP = 0x21;
constexpr uint64_t kTagMetricKlA = 0x22;
constexpr uint64_t kTagMetricZ = 0x23;

bool eval_on_train(const ExperimentConfig& cfg, const TaskBundle& task) {
  switch (cfg.eval.on) {
    case EvalSpec::On::Train: return true;
    case EvalSpec::On::Test: return false;
    case EvalSpec::On::Auto:
      // Prefix-tree policies and id-featurized bigrams cannot generalize to
      // held-out contexts; everything else is evaluated on C_test.
      return cfg.policy_family == PolicyKind::PrefixTree ||
             task.featurizer.mode == ContextFeaturizer::Mode::ById;
  }
  return true;
}

// Metrics EBM: pointwise objective as-is; distributional objective with the
// moment-matched lambda for every eval context (exact when enumerable, SNIS
// from the base otherwise).
Ebm metrics_ebm(const TaskBundle& task, std::span<const Context> pool, bool enumerable,
                uint64_t seed, int m_samples) {
  if (!task.feature) return Ebm::pointwise(task.base, task.scorer);
  Ebm e = Ebm::distributional(task.base, *task.feature, task.feature->mu_bar);
  for (const Context& c : pool) {
    if (enumerable) {
      e.set_lambda(c.id, exact_lambda(e, c));
    } else {
      RngStream rng = RngStream::keyed(seed, 0x2F, static_cast<uint64_t>(c.id));
      e.set_lambda(c.id, estimate_lambda_snis(e, c, task.base, m_samples, rng));
    }
  }
  return e;
}

}  // namespace

MetricsReport compute_metrics(const ExperimentConfig& cfg, const TaskBundle& task,
                              const Policy& pi, int iteration) {
  MetricsReport r;
  r.iteration = iteration;
  const bool on_train = eval_on_train(cfg, task);
  std::span<const Context> pool = on_train ? task.c_train : task.c_test;
  std::span<const Sequence> refs = on_train ? task.refs_train : task.refs_test;
  const bool enumerable = task.space.num_sequences() <= kDefaultEnumCap;
  const uint64_t it = static_cast<uint64_t>(iteration);

  Ebm ebm = metrics_ebm(task, pool, enumerable, cfg.seed, cfg.eval.m_samples);

  {
    RngStream rng = RngStream::keyed(cfg.seed, kTagMetricKlP, it);
    r.kl_p_pi_est = estimate_kl_p_pi(ebm, pi, pool, cfg.eval.n_contexts, cfg.eval.m_samples,
                                     cfg.trainer.epsilon, rng);
  }
  {
    RngStream rng = RngStream::keyed(cfg.seed, kTagMetricKlA, it);
    r.kl_pi_a_est = estimate_kl_pi_a(pi, task.base, pool, cfg.eval.n_contexts,
                                     cfg.eval.m_samples, rng);
  }
  if (enumerable) {
    r.kl_p_pi_exact = exact_kl_p_pi(ebm, pi, pool);
    r.kl_pi_a_exact = exact_kl_pi_a(pi, task.base, pool);
  }

  // One shared sample pass for the sample-level metrics.
  std::vector<Sequence> all_samples;
  double sat = 0.0, d2 = 0.0, bleu = 0.0, rouge = 0.0, prec = 0.0, rec = 0.0, ents = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    RngStream rng = RngStream::keyed(cfg.seed, kTagMetricSamples, it, static_cast<uint64_t>(i));
    for (int j = 0; j < cfg.eval.m_samples; ++j) {
      Sequence x = pi.sample(pool[i], rng);
      sat += task.scorer(pool[i], x);
      d2 += distinct2(x);
      bleu += bleu4_lite(x, refs[i]);
      rouge += rouge_l(x, refs[i]);
      prec += precision_source(task.space.vocab, x, pool[i]);
      rec += recall_target(task.space.vocab, x, refs[i]);
      for (TokenId t : x.content()) ents += task.space.vocab.is_entity(t) ? 1.0 : 0.0;
      ++count;
      all_samples.push_back(std::move(x));
    }
  }
  r.satisfaction = sat / count;
  r.distinct2 = d2 / count;
  r.bleu4 = bleu / count;
  r.rougeL = rouge / count;
  r.precision_source = prec / count;
  r.recall_target = rec / count;
  r.mean_entities = ents / count;
  r.zipf = zipf_table(all_samples, task.space.vocab);

  {
    std::vector<double> zs;
    zs.reserve(pool.size());
    if (enumerable) {
      for (const Context& c : pool) zs.push_back(exact_Z(ebm, c).z_hat);
    } else {
      RngStream rng = RngStream::keyed(cfg.seed, kTagMetricZ, it);
      for (const Context& c : pool) {
        zs.push_back(estimate_Z(ebm, c, pi, cfg.eval.m_samples, rng).z_hat);
      }
    }
    r.nstd_z = nstd_z(zs);
  }

  if (task.feature && enumerable) {
    double moment = 0.0;
    for (const Context& c : pool) moment += exact_feature_moment(*task.feature, pi, c);
    r.feature_moment = moment / static_cast<double>(pool.size());
  }
  return r;
}

RunLedger run_experiment(const ExperimentConfig& cfg) {
  TaskBundle task = build_task(cfg);
  Ebm ebm = task.feature ? Ebm::distributional(task.base, *task.feature, task.feature->mu_bar)
                         : Ebm::pointwise(task.base, task.scorer);
  TrainerConfig tc = cfg.trainer;
  tc.seed = cfg.seed;
  Trainer trainer(tc, task.base, ebm, task.c_train);

  RunLedger ledger;
  ledger.config_echo = cfg.echo();
  ledger.config_hash = cfg.hash();
  ledger.token_names = task.space.vocab.tokens;
  ledger.infeasible_dropped = task.infeasible_dropped;

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("run: cannot create output directory " + cfg.out_dir);

  ledger.rows.push_back({0, {}, compute_metrics(cfg, task, trainer.policy(), 0)});
  for (int it = 1; it <= tc.iterations; ++it) {
    IterationStats stats = trainer.step();
    LedgerRow row;
    row.iteration = it;
    row.stats = stats;
    if (it % cfg.eval.cadence == 0 || it == tc.iterations) {
      row.metrics = compute_metrics(cfg, task, trainer.policy(), it);
    }
    ledger.rows.push_back(std::move(row));
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it != tc.iterations) {
      std::string path = cfg.out_dir + "/checkpoint_" + std::to_string(it) + ".cdpg";
      save_policy_checkpoint(trainer.policy(), path);
      ledger.checkpoint_paths.push_back(path);
    }
  }
  std::string final_path = cfg.out_dir + "/checkpoint_final.cdpg";
  save_policy_checkpoint(trainer.policy(), final_path);
  ledger.checkpoint_paths.push_back(final_path);
  if (trainer.ebm().is_distributional() && !trainer.ebm().lambda_table().empty()) {
    std::string lpath = cfg.out_dir + "/lambda_final.cdpg";
    save_lambda_table(trainer.ebm().lambda_table(), lpath);
    ledger.checkpoint_paths.push_back(lpath);
  }

  for (auto it = ledger.rows.rbegin(); it != ledger.rows.rend(); ++it) {
    if (it->metrics) {
      ledger.final_metrics = *it->metrics;
      break;
    }
  }
  return ledger;
}

namespace {

const char* kCsvHeader =
    "iteration,kl_p_pi_est,kl_p_pi_exact,kl_pi_a_est,kl_pi_a_exact,satisfaction,distinct2,"
    "bleu4,rougeL,precision_source,recall_target,mean_entities,nstd_z";

std::string metrics_csv_row(int iteration, const MetricsReport& m) {
  std::ostringstream row;
  row << iteration << ',' << format_double(m.kl_p_pi_est.value) << ','
      << (m.kl_p_pi_exact ? format_double(*m.kl_p_pi_exact) : "") << ','
      << format_double(m.kl_pi_a_est.value) << ','
      << (m.kl_pi_a_exact ? format_double(*m.kl_pi_a_exact) : "") << ','
      << format_double(m.satisfaction) << ',' << format_double(m.distinct2) << ','
      << format_double(m.bleu4) << ',' << format_double(m.rougeL) << ','
      << format_double(m.precision_source) << ',' << format_double(m.recall_target) << ','
      << format_double(m.mean_entities) << ',' << format_double(m.nstd_z);
  return row.str();
}

nlohmann::json metrics_json(const MetricsReport& m) {
  nlohmann::json j;
  j["iteration"] = m.iteration;
  j["kl_p_pi_est"] = m.kl_p_pi_est.value;
  j["kl_p_pi_est_stderr"] = m.kl_p_pi_est.std_error;
  j["kl_p_pi_skipped_contexts"] = m.kl_p_pi_est.skipped_contexts;
  j["kl_pi_a_est"] = m.kl_pi_a_est.value;
  j["kl_pi_a_est_stderr"] = m.kl_pi_a_est.std_error;
  if (m.kl_p_pi_exact) j["kl_p_pi_exact"] = *m.kl_p_pi_exact;
  if (m.kl_pi_a_exact) j["kl_pi_a_exact"] = *m.kl_pi_a_exact;
  j["satisfaction"] = m.satisfaction;
  j["distinct2"] = m.distinct2;
  j["bleu4"] = m.bleu4;
  j["rougeL"] = m.rougeL;
  j["precision_source"] = m.precision_source;
  j["recall_target"] = m.recall_target;
  j["mean_entities"] = m.mean_entities;
  j["nstd_z"] = m.nstd_z;
  if (m.feature_moment) j["feature_moment"] = *m.feature_moment;
  return j;
}

}  // namespace

void emit(const RunLedger& ledger, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("emit: cannot create " + dir);

  {
    std::ofstream out(dir + "/metrics.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("emit: cannot write metrics.csv in " + dir);
    out << kCsvHeader << "\n";
    for (const LedgerRow& row : ledger.rows) {
      if (row.metrics) out << metrics_csv_row(row.iteration, *row.metrics) << "\n";
    }
  }
  {
    std::ofstream out(dir + "/zipf.csv", std::ios::trunc);
    out << "token,frequency,rank\n";
    for (const ZipfRow& z : ledger.final_metrics.zipf) {
      out << ledger.token_names.at(static_cast<std::size_t>(z.token)) << ',' << z.frequency << ','
          << z.rank << "\n";
    }
  }
  {
    std::ofstream out(dir + "/config.echo", std::ios::trunc);
    out << ledger.config_echo;
  }
  {
    nlohmann::json j;
    std::ostringstream hash_hex;
    hash_hex << std::hex << ledger.config_hash;
    j["config_hash"] = hash_hex.str();
    j["rows"] = ledger.rows.size();
    j["final"] = metrics_json(ledger.final_metrics);
    j["checkpoints"] = ledger.checkpoint_paths;
    j["infeasible_dropped"] = ledger.infeasible_dropped;
    std::ofstream out(dir + "/report.json", std::ios::trunc);
    out << j.dump(2) << "\n";
  }
}

namespace {

struct CliOverrides {
  int64_t seed = -1;
  std::string out;
  std::string algo;
  int iterations = -1;
  double scale = 1.0;
};

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& ov) {
  if (ov.seed >= 0) cfg.seed = static_cast<uint64_t>(ov.seed);
  // Output directory is the one knob with an environment override; --out
  // still wins over it.
  if (const char* env_out = std::getenv("CDPG_OUT"); env_out && *env_out) cfg.out_dir = env_out;
  if (!ov.out.empty()) cfg.out_dir = ov.out;
  if (!ov.algo.empty()) {
    std::map<std::string, std::string> kv = config_to_kv(cfg.echo());
    kv["trainer.algo"] = ov.algo;
    cfg = config_from_kv(std::move(kv));
  }
  if (ov.iterations >= 0) cfg.trainer.iterations = ov.iterations;
  if (ov.scale != 1.0) {
    if (!(ov.scale > 0.0)) throw ConfigError("cli: --scale must be > 0");
    auto scaled = [&ov](int v) {
      return std::max(1, static_cast<int>(std::lround(v * ov.scale)));
    };
    cfg.train_contexts = scaled(cfg.train_contexts);
    cfg.test_contexts = scaled(cfg.test_contexts);
    cfg.trainer.iterations =
        std::max(0, static_cast<int>(std::lround(cfg.trainer.iterations * ov.scale)));
  }
  cfg.trainer.seed = cfg.seed;
  cfg.validate();
}

int run_train(const std::string& config_path, const CliOverrides& ov) {
  ExperimentConfig cfg = parse_config_file(config_path);
  apply_overrides(cfg, ov);
  RunLedger ledger = run_experiment(cfg);
  emit(ledger, cfg.out_dir);
  const MetricsReport& m = ledger.final_metrics;
  std::cout << "train done: iterations=" << ledger.rows.back().iteration
            << " satisfaction=" << format_double(m.satisfaction);
  if (m.kl_p_pi_exact) std::cout << " kl_p_pi=" << format_double(*m.kl_p_pi_exact);
  if (m.kl_pi_a_exact) std::cout << " kl_pi_a=" << format_double(*m.kl_pi_a_exact);
  std::cout << " out=" << cfg.out_dir << "\n";
  return 0;
}

int run_eval(const std::string& config_path, const std::string& checkpoint_path,
             const CliOverrides& ov) {
  ExperimentConfig cfg = parse_config_file(config_path);
  apply_overrides(cfg, ov);
  cfg.eval.on = EvalSpec::On::Test;
  TaskBundle task = build_task(cfg);
  Policy pi = load_policy_checkpoint(checkpoint_path);
  if (pi.param_count() != task.base.param_count() || pi.kind() != task.base.kind()) {
    throw ConfigError("eval: checkpoint shape does not match the configured task");
  }
  MetricsReport m = compute_metrics(cfg, task, pi, 0);
  RunLedger ledger;
  ledger.config_echo = cfg.echo();
  ledger.config_hash = cfg.hash();
  ledger.token_names = task.space.vocab.tokens;
  ledger.infeasible_dropped = task.infeasible_dropped;
  ledger.rows.push_back({0, {}, m});
  ledger.final_metrics = m;
  emit(ledger, cfg.out_dir);
  std::cout << "eval done: satisfaction=" << format_double(m.satisfaction)
            << " kl_pi_a_est=" << format_double(m.kl_pi_a_est.value) << " out=" << cfg.out_dir
            << "\n";
  return 0;
}

int run_oracle(const std::string& config_path, const std::string& checkpoint_path, int top,
               const CliOverrides& ov) {
  ExperimentConfig cfg = parse_config_file(config_path);
  apply_overrides(cfg, ov);
  TaskBundle task = build_task(cfg);
  if (task.space.num_sequences() > kDefaultEnumCap) {
    throw EnumCapError("oracle: space exceeds the enumeration cap");
  }
  Policy pi = checkpoint_path.empty() ? task.base : load_policy_checkpoint(checkpoint_path);
  std::span<const Context> pool = task.c_train;
  Ebm ebm = metrics_ebm(task, pool, true, cfg.seed, cfg.eval.m_samples);
  std::cout << "context,z_exact,kl_p_pi,kl_pi_a\n";
  for (const Context& c : pool) {
    std::span<const Context> one(&c, 1);
    double z = exact_Z(ebm, c).z_hat;
    std::cout << c.id << ',' << format_double(z) << ','
              << format_double(exact_kl_p_pi(ebm, pi, one)) << ','
              << format_double(exact_kl_pi_a(pi, task.base, one)) << "\n";
  }
  if (top > 0 && !pool.empty()) {
    const Context& c = pool.front();
    ExactTarget t = exact_target(ebm, c);
    std::vector<uint64_t> order(t.probs.size());
    for (uint64_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&t](uint64_t a, uint64_t b) { return t.probs[a] > t.probs[b]; });
    std::cout << "# top " << top << " of p_c for context " << c.id << " ("
              << task.space.render(c) << ")\n";
    for (int k = 0; k < top && k < static_cast<int>(order.size()); ++k) {
      std::cout << "#   " << format_double(t.probs[order[static_cast<std::size_t>(k)]]) << "  "
                << task.space.render(task.space.sequence_at(order[static_cast<std::size_t>(k)]))
                << "\n";
    }
  }
  return 0;
}

int run_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              const CliOverrides& ov) {
  ExperimentConfig base_cfg = parse_config_file(config_path);
  apply_overrides(base_cfg, ov);
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const std::string& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep: --set expects key=v1,v2");
    std::string key = s.substr(0, eq);
    std::vector<std::string> values;
    std::istringstream vs(s.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) values.push_back(v);
    if (values.empty()) throw ConfigError("sweep: empty value list for " + key);
    grid.emplace_back(key, values);
  }
  std::vector<std::size_t> idx(grid.size(), 0);
  std::error_code ec;
  fs::create_directories(base_cfg.out_dir, ec);
  if (ec) throw std::runtime_error("sweep: cannot create " + base_cfg.out_dir);
  std::ofstream index_out(base_cfg.out_dir + "/sweep.csv", std::ios::trunc);
  if (!index_out) throw std::runtime_error("sweep: cannot write sweep.csv");
  index_out << "combo,overrides,satisfaction,kl_p_pi_est\n";
  int combo = 0;
  for (;;) {
    std::map<std::string, std::string> kv = config_to_kv(base_cfg.echo());
    std::string label;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      kv[grid[g].first] = grid[g].second[idx[g]];
      if (!label.empty()) label += ';';
      label += grid[g].first + "=" + grid[g].second[idx[g]];
    }
    ExperimentConfig cfg = config_from_kv(std::move(kv));
    cfg.out_dir = base_cfg.out_dir + "/combo_" + std::to_string(combo);
    cfg.trainer.seed = cfg.seed;
    RunLedger ledger = run_experiment(cfg);
    emit(ledger, cfg.out_dir);
    index_out << combo << ",\"" << label << "\","
              << format_double(ledger.final_metrics.satisfaction) << ','
              << format_double(ledger.final_metrics.kl_p_pi_est.value) << "\n";
    ++combo;
    std::size_t g = 0;
    for (; g < grid.size(); ++g) {
      if (++idx[g] < grid[g].second.size()) break;
      idx[g] = 0;
    }
    if (g == grid.size()) break;
  }
  std::cout << "sweep done: " << combo << " runs under " << base_cfg.out_dir << "\n";
  return 0;
}

int run_compare(const std::string& config_path, const CliOverrides& ov) {
  static const char* kAlgos[] = {"cdpg", "dpg", "reinforce", "ziegler"};
  ExperimentConfig base_cfg = parse_config_file(config_path);
  apply_overrides(base_cfg, ov);
  std::map<std::string, RunLedger> ledgers;
  for (const char* algo : kAlgos) {
    std::map<std::string, std::string> kv = config_to_kv(base_cfg.echo());
    kv["trainer.algo"] = algo;
    ExperimentConfig cfg = config_from_kv(std::move(kv));
    cfg.out_dir = base_cfg.out_dir + "/" + algo;
    cfg.trainer.seed = cfg.seed;
    RunLedger ledger = run_experiment(cfg);
    emit(ledger, cfg.out_dir);
    ledgers.emplace(algo, std::move(ledger));
  }
  std::ofstream out(base_cfg.out_dir + "/compare.csv", std::ios::trunc);
  if (!out) throw std::runtime_error("compare: cannot write compare.csv");
  out << "iteration";
  static const char* kCols[] = {"satisfaction", "kl_p_pi_est",  "kl_p_pi_exact", "kl_pi_a_est",
                                "kl_pi_a_exact", "distinct2",   "bleu4",         "rougeL",
                                "precision_source", "recall_target", "mean_entities", "nstd_z"};
  for (const char* algo : kAlgos) {
    for (const char* col : kCols) out << ',' << algo << '_' << col;
  }
  out << "\n";
  const RunLedger& first = ledgers.at("cdpg");
  for (std::size_t r = 0; r < first.rows.size(); ++r) {
    if (!first.rows[r].metrics) continue;
    out << first.rows[r].iteration;
    for (const char* algo : kAlgos) {
      const MetricsReport& m = *ledgers.at(algo).rows.at(r).metrics;
      out << ',' << format_double(m.satisfaction) << ',' << format_double(m.kl_p_pi_est.value)
          << ',' << (m.kl_p_pi_exact ? format_double(*m.kl_p_pi_exact) : "") << ','
          << format_double(m.kl_pi_a_est.value) << ','
          << (m.kl_pi_a_exact ? format_double(*m.kl_pi_a_exact) : "") << ','
          << format_double(m.distinct2) << ',' << format_double(m.bleu4) << ','
          << format_double(m.rougeL) << ',' << format_double(m.precision_source) << ','
          << format_double(m.recall_target) << ',' << format_double(m.mean_entities) << ','
          << format_double(m.nstd_z);
    }
    out << "\n";
  }
  std::cout << "compare done: " << base_cfg.out_dir << "/compare.csv\n";
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"conditional EBM fine-tuning at desk scale"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path;
  std::vector<std::string> sets;
  int top = 5;
  CliOverrides ov;

  auto add_common = [&](CLI::App* sub, bool config_required = true) {
    auto* opt = sub->add_option("--config", config_path, "config file path");
    if (config_required) opt->required();
    sub->add_option("--seed", ov.seed, "seed override");
    sub->add_option("--out", ov.out, "output directory override");
    sub->add_option("--scale", ov.scale, "scale context counts and iterations");
    sub->add_option("--iterations", ov.iterations, "iteration count override");
  };

  CLI::App* train = app.add_subcommand("train", "run one training experiment");
  add_common(train);
  train->add_option("--algo", ov.algo, "cdpg|dpg|reinforce|ziegler");

  CLI::App* eval = app.add_subcommand("eval", "recompute metrics from a checkpoint on C_test");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint_path, "policy checkpoint")->required();

  CLI::App* oracle = app.add_subcommand("oracle", "print exact Z_c / p_c / KLs");
  add_common(oracle);
  oracle->add_option("--checkpoint", checkpoint_path, "policy checkpoint (default: base model)");
  oracle->add_option("--top", top, "top-k target sequences to print");

  CLI::App* sweep = app.add_subcommand("sweep", "cartesian grid over config overrides");
  add_common(sweep);
  sweep->add_option("--set", sets, "section.key=v1,v2 (repeatable)");

  CLI::App* compare = app.add_subcommand("compare", "run all four algorithms with shared seeds");
  add_common(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return run_train(config_path, ov);
    if (eval->parsed()) return run_eval(config_path, checkpoint_path, ov);
    if (oracle->parsed()) return run_oracle(config_path, checkpoint_path, top, ov);
    if (sweep->parsed()) return run_sweep(config_path, sets, ov);
    if (compare->parsed()) return run_compare(config_path, ov);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace cdpg
