// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Every tolerance is pinned here; fixture trajectories were pinned
// from pilot runs and are fully seeded, so reruns are deterministic.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cdpg/ebm.hpp"
#include "cdpg/harness.hpp"
#include "cdpg/kern/kernels.hpp"
#include "cdpg/metrics.hpp"
#include "cdpg/oracle.hpp"
#include "cdpg/task.hpp"
#include "cdpg/trainers.hpp"
#include "common/fixtures.hpp"
#include "common/stats.hpp"

using namespace cdpg;
using testutil::ContainsA;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;
  template <typename T>
  Check& operator<<(const T& v) {
    detail << v;
    return *this;
  }
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// --- fixture configs (mirrors of the pilot runs) ---

ExperimentConfig zvar_high_cfg() {
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  cfg.task.numerals = 2;
  cfg.task.context_numerals_min = 0;
  cfg.task.context_numerals_max = 2;
  cfg.task.nature_digit_rate = 0.008;
  cfg.trainer.iterations = 600;
  cfg.eval.cadence = 100;
  cfg.seed = 11;
  cfg.trainer.seed = 11;
  cfg.out_dir = "/tmp/cdpg_acc_zvar_high";
  return cfg;
}

ExperimentConfig zvar_low_cfg() {
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  cfg.policy_family = PolicyKind::Bigram;
  cfg.task.numerals = 1;
  cfg.task.context_numerals_min = 1;
  cfg.task.context_numerals_max = 1;
  cfg.task.nature_digit_rate = 0.008;
  cfg.trainer.iterations = 600;
  cfg.eval.cadence = 100;
  cfg.seed = 12;
  cfg.trainer.seed = 12;
  cfg.out_dir = "/tmp/cdpg_acc_zvar_low";
  return cfg;
}

// Mixed vacuous/constrained contexts: CDPG is anchored to a on the vacuous
// half while Reinforce random-walks there.
ExperimentConfig forgetting_cfg() {
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  cfg.task.num_letters = 4;
  cfg.task.context_numerals_min = 0;
  cfg.task.context_numerals_max = 1;
  cfg.task.nature_digit_rate = 0.01;
  cfg.task.corpus_smoothing = 0.25;
  cfg.trainer.iterations = 2000;
  cfg.eval.cadence = 200;
  cfg.seed = 17;
  cfg.trainer.seed = 17;
  cfg.out_dir = "/tmp/cdpg_acc_forget";
  return cfg;
}

// Rare satisfaction (-log Z ~ 6.3..7.1 > the 6.0 KL target), so the adaptive
// beta controller actually clamps Ziegler.
ExperimentConfig rare_cfg() {
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  cfg.task.numerals = 2;
  cfg.task.context_numerals_min = 2;
  cfg.task.context_numerals_max = 2;
  cfg.task.nature_digit_rate = 0.005;
  cfg.task.corpus_smoothing = 0.1;
  cfg.trainer.samples_per_context = 256;
  cfg.trainer.iterations = 2000;
  cfg.eval.cadence = 200;
  cfg.seed = 13;
  cfg.trainer.seed = 13;
  cfg.out_dir = "/tmp/cdpg_acc_rare";
  return cfg;
}

double final_exact_kl(const RunLedger& ledger) {
  return *ledger.final_metrics.kl_p_pi_exact;
}

// First metric row with satisfaction >= threshold; -1 if never reached.
int first_crossing(const RunLedger& ledger, double threshold, double* kl_pi_a) {
  for (const LedgerRow& row : ledger.rows) {
    if (row.metrics && row.metrics->satisfaction >= threshold) {
      *kl_pi_a = *row.metrics->kl_pi_a_exact;
      return row.iteration;
    }
  }
  return -1;
}

// ---------------------------------------------------------------------------

Check criterion_1_z_unbiasedness() {
  Check c;
  struct Fixture {
    std::string name;
    Policy base;
    ConstraintScorer scorer;
    Context ctx;
  };
  std::vector<Fixture> fixtures;
  {
    ContainsA fx = ContainsA::make();
    fixtures.push_back({"contains-A", fx.base, fx.scorer, fx.contexts[0]});
  }
  {
    ExperimentConfig cfg = testutil::digitize_prefix_cfg();
    TaskBundle t = build_task(cfg);
    fixtures.push_back({"digitize-prefix", t.base, t.scorer, t.c_train[0]});
  }
  for (TaskKind kind : {TaskKind::GrammarCompile, TaskKind::LintStyle, TaskKind::EntitySumm}) {
    ExperimentConfig cfg;
    cfg.task.kind = kind;
    cfg.policy_family = PolicyKind::Bigram;
    cfg.max_len = kind == TaskKind::EntitySumm ? 6 : 5;
    cfg.task.entities = 5;
    cfg.task.context_entities_min = 4;
    cfg.task.context_entities_max = 5;
    cfg.task.min_entities_k = 3;
    if (kind != TaskKind::EntitySumm) cfg.task.context_len_max = 8;
    cfg.train_contexts = 6;
    cfg.test_contexts = 6;
    cfg.seed = 3;
    TaskBundle t = build_task(cfg);
    const char* name = kind == TaskKind::GrammarCompile ? "grammar"
                       : kind == TaskKind::LintStyle    ? "lint"
                                                        : "entity-summ";
    fixtures.push_back({name, t.base, t.scorer, t.c_train[0]});
  }

  const int runs = 10000;
  const int m = 16;
  uint64_t seed = 100;
  for (Fixture& fx : fixtures) {
    Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
    double exact = exact_Z(ebm, fx.ctx).z_hat;
    RngStream rng(seed++);
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < runs; ++r) {
      double z = estimate_Z(ebm, fx.ctx, fx.base, m, rng).z_hat;
      sum += z;
      sumsq += z * z;
    }
    double mean = sum / runs;
    double var = (sumsq - sum * sum / runs) / (runs - 1);
    double se = std::sqrt(var / runs);
    c << fx.name << ": mean " << mean << " vs exact " << exact << " (3se " << 3 * se << "); ";
    c.require(std::abs(mean - exact) <= 3.0 * se, fx.name + ": |mean-exact| > 3se");
  }
  return c;
}

Check criterion_2_gradient_fidelity() {
  Check c;
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  TaskBundle task = build_task(cfg);
  Ebm ebm = Ebm::pointwise(task.base, task.scorer);

  auto avg_update_cosine = [&](int m, int sims) {
    TrainerConfig tc;
    tc.algorithm = TrainerConfig::Algo::CDPG;
    tc.contexts_per_iter = 8;
    tc.samples_per_context = m;
    tc.alpha = 1.0;
    tc.minibatch = 1 << 20;  // single batch: grad log pi evaluated at theta0
    tc.seed = 1007;
    Trainer t(tc, task.base, ebm, task.c_train);
    std::vector<double> theta0(task.base.params().begin(), task.base.params().end());
    std::vector<double> avg(theta0.size(), 0.0);
    for (int s = 0; s < sims; ++s) {
      std::copy(theta0.begin(), theta0.end(), t.policy_mutable().params_mutable().begin());
      t.step();
      std::span<const double> now = t.policy().params();
      for (std::size_t i = 0; i < avg.size(); ++i) {
        avg[i] += (now[i] - theta0[i]) / sims;
      }
    }
    std::vector<double> g = exact_loss_grad(ebm, task.base, task.c_train);
    kern::scale(g, -1.0);
    return testutil::cosine(avg, g);
  };

  double cos64 = avg_update_cosine(64, 10000);
  double cos4 = avg_update_cosine(4, 10000);
  c << "cosine(avg update, -grad L): M=64 " << cos64 << ", M=4 " << cos4;
  c.require(cos64 >= 0.99, "M=64 cosine < 0.99");
  c.require(cos4 < cos64, "M=4 cosine not strictly below M=64");
  return c;
}

Check criterion_3_convergence() {
  Check c;
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  cfg.eval.cadence = 100;
  cfg.out_dir = "/tmp/cdpg_acc_convergence";
  RunLedger ledger = run_experiment(cfg);
  double kl0 = *ledger.rows.front().metrics->kl_p_pi_exact;
  double sat0 = ledger.rows.front().metrics->satisfaction;
  double kl500 = 0.0;
  for (const LedgerRow& row : ledger.rows) {
    if (row.iteration == 500 && row.metrics) kl500 = *row.metrics->kl_p_pi_exact;
  }
  double klT = final_exact_kl(ledger);
  double satT = ledger.final_metrics.satisfaction;
  c << "exact E KL(p,pi) " << kl0 << " -> " << klT << " (reduction "
    << 100.0 * (1.0 - klT / kl0) << "%), satisfaction " << sat0 << " -> " << satT;
  c.require(sat0 <= 0.05, "initial satisfaction > 0.05");
  c.require(klT <= 0.2 * kl0, "KL reduction < 80%");
  c.require(klT < kl500, "KL at 2000 not below KL at 500");
  c.require(satT >= 0.9, "final satisfaction < 0.9");
  return c;
}

Check criterion_4_ablation_ordering() {
  Check c;
  auto run_pair = [](ExperimentConfig cfg, double* kl_cdpg, double* kl_dpg, double* nstd) {
    cfg.trainer.algorithm = TrainerConfig::Algo::CDPG;
    RunLedger lc = run_experiment(cfg);
    cfg.trainer.algorithm = TrainerConfig::Algo::DPG;
    cfg.out_dir += "_dpg";
    RunLedger ld = run_experiment(cfg);
    *kl_cdpg = final_exact_kl(lc);
    *kl_dpg = final_exact_kl(ld);
    *nstd = lc.rows.front().metrics->nstd_z;  // property of the frozen base
  };
  double kc, kd, nstd;
  run_pair(zvar_high_cfg(), &kc, &kd, &nstd);
  c << "high-variance: nstd " << nstd << ", final KL cdpg " << kc << " vs dpg " << kd << "; ";
  c.require(nstd >= 1.0, "high-variance task nstd < 1.0");
  c.require(kc < kd, "CDPG final KL not below DPG on high-variance task");

  double kc2, kd2, nstd2;
  run_pair(zvar_low_cfg(), &kc2, &kd2, &nstd2);
  double rel = std::abs(kc2 - kd2) / std::max(kc2, kd2);
  c << "low-variance: nstd " << nstd2 << ", final KL cdpg " << kc2 << " vs dpg " << kd2
    << " (rel " << rel << ")";
  c.require(nstd2 <= 0.1, "low-variance task nstd > 0.1");
  c.require(rel < 0.2, "low-variance final KLs differ by >= 20%");
  return c;
}

Check criterion_5_baseline_pathologies() {
  Check c;
  // Clause A: at each algorithm's first metric pass with satisfaction >= 0.7,
  // Reinforce has drifted at least twice as far from a as CDPG.
  {
    ExperimentConfig cfg = forgetting_cfg();
    cfg.trainer.algorithm = TrainerConfig::Algo::CDPG;
    RunLedger lc = run_experiment(cfg);
    cfg.trainer.algorithm = TrainerConfig::Algo::Reinforce;
    cfg.out_dir += "_reinforce";
    RunLedger lr = run_experiment(cfg);
    double sat0 = lc.rows.front().metrics->satisfaction;
    double kl_c = 0.0, kl_r = 0.0;
    int it_c = first_crossing(lc, 0.7, &kl_c);
    int it_r = first_crossing(lr, 0.7, &kl_r);
    c << "matched-0.7 KL(pi,a): cdpg " << kl_c << " @" << it_c << ", reinforce " << kl_r << " @"
      << it_r << " (ratio " << kl_r / kl_c << "); ";
    c.require(sat0 <= 0.5, "fixture starts above 0.5 satisfaction");
    c.require(it_c > 0 && it_r > 0, "an algorithm never reached 0.7 satisfaction");
    c.require(kl_r >= 2.0 * kl_c, "Reinforce KL(pi,a) below 2x CDPG at matched satisfaction");
    // Reinforce's satisfaction rises monotonically across metric passes
    // (slack 0.05 for sampling noise at the plateau).
    double prev = -1.0;
    bool rising = true;
    for (const LedgerRow& row : lr.rows) {
      if (!row.metrics) continue;
      if (row.metrics->satisfaction < prev - 0.05) rising = false;
      prev = std::max(prev, row.metrics->satisfaction);
    }
    c.require(rising, "Reinforce satisfaction not monotone (smoothed)");
  }
  // Clause B: with the stock beta schedule (0.2 init, 6.0 target) the KL clamp caps Ziegler's
  // satisfaction gain below CDPG's under the same budget.
  {
    ExperimentConfig cfg = rare_cfg();
    cfg.trainer.algorithm = TrainerConfig::Algo::CDPG;
    RunLedger lc = run_experiment(cfg);
    cfg.trainer.algorithm = TrainerConfig::Algo::Ziegler;
    cfg.out_dir += "_ziegler";
    RunLedger lz = run_experiment(cfg);
    double gain_c = lc.final_metrics.satisfaction - lc.rows.front().metrics->satisfaction;
    double gain_z = lz.final_metrics.satisfaction - lz.rows.front().metrics->satisfaction;
    c << "satisfaction gain: cdpg " << gain_c << ", ziegler " << gain_z << " (ziegler KL(pi,a) "
      << *lz.final_metrics.kl_pi_a_exact << ")";
    c.require(gain_z < gain_c, "Ziegler gain not below CDPG gain");
  }
  return c;
}

Check criterion_6_kl_calibration() {
  Check c;
  ContainsA fx = ContainsA::make();
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
  const Context& ctx = fx.contexts[0];
  const double exact = std::log(4.0 / 3.0);

  RngStream rng(600);
  double sum = 0.0;
  const int runs = 1000;
  for (int r = 0; r < runs; ++r) {
    sum += estimate_kl_p_pi(ebm, fx.base, std::span<const Context>(&ctx, 1), 64, 64, 1e-6, rng)
               .value;
  }
  double mean = sum / runs;
  c << "KL(p,pi) estimator mean " << mean << " vs log(4/3) " << exact << "; ";
  c.require(std::abs(mean - exact) <= 0.01, "plug-in KL mean outside +-0.01");

  // KL(pi, a) estimator against enumeration on a concentrated policy.
  ExactTarget t = exact_target(ebm, ctx);
  std::vector<double> base_probs = fx.base.enumerate_probs(ctx);
  std::vector<double> q(base_probs.size());
  for (uint64_t i = 0; i < q.size(); ++i) q[i] = 0.9 * t.probs[i] + 0.1 * base_probs[i];
  Policy pi = Policy::prefix_tree_from_targets(fx.space, {{ctx.id, q}});
  double exact_rev = exact_kl_pi_a(pi, fx.base, std::span<const Context>(&ctx, 1));
  const int runs2 = 200;
  double sum2 = 0.0, sumsq2 = 0.0;
  for (int r = 0; r < runs2; ++r) {
    double v = estimate_kl_pi_a(pi, fx.base, std::span<const Context>(&ctx, 1), 8, 64, rng).value;
    sum2 += v;
    sumsq2 += v * v;
  }
  double mean2 = sum2 / runs2;
  double se2 = std::sqrt((sumsq2 - sum2 * sum2 / runs2) / (runs2 - 1) / runs2);
  c << "KL(pi,a) estimator mean " << mean2 << " vs exact " << exact_rev << " (3se " << 3 * se2
    << ")";
  c.require(std::abs(mean2 - exact_rev) <= 3.0 * se2, "reverse-KL estimator biased beyond 3se");
  return c;
}

Check criterion_7_numerical_hygiene() {
  Check c;
  // Analytic gradients vs central finite differences on >= 100 random triples.
  RngStream rng(700);
  int triples = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 120; ++rep) {
    Vocab v = Vocab::make({"A", "B", "eos"}, "eos");
    SequenceSpace space{v, 3 + static_cast<int>(rng.below(2))};
    Policy p = rep % 2 == 0
                   ? Policy::bigram(space, ContextFeaturizer{ContextFeaturizer::Mode::ById, 2})
                   : Policy::prefix_tree(space, {0, 1});
    for (double& x : p.params_mutable()) x = (rng.uniform01() * 2.0 - 1.0) * 1.5;
    Context ctx{{0}, static_cast<int>(rng.below(2))};
    Sequence x = space.sequence_at(rng.below(space.num_sequences()));
    std::vector<double> g = p.grad_logprob(ctx, x);
    const double h = 1e-5;
    std::span<double> params = p.params_mutable();
    for (std::size_t k = 0; k < params.size(); ++k) {
      double saved = params[k];
      params[k] = saved + h;
      double up = p.logprob(ctx, x);
      params[k] = saved - h;
      double dn = p.logprob(ctx, x);
      params[k] = saved;
      double fd = (up - dn) / (2.0 * h);
      double rel = std::abs(fd - g[k]) / std::max({std::abs(fd), std::abs(g[k]), 1e-4});
      worst = std::max(worst, rel);
    }
    ++triples;
  }
  c << triples << " random (params,c,x) triples, worst fd rel err " << worst << "; ";
  c.require(triples >= 100, "fewer than 100 probes");
  c.require(worst <= 1e-6, "finite-difference mismatch above 1e-6");

  // Enumerated distributions normalize to 1 +- 1e-12 (random and fitted).
  double worst_norm = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Vocab v = Vocab::make({"A", "B", "C", "eos"}, "eos");
    SequenceSpace space{v, 5};
    Policy p = rep % 2 == 0
                   ? Policy::bigram(space, ContextFeaturizer{ContextFeaturizer::Mode::ById, 1})
                   : Policy::prefix_tree(space, {0});
    for (double& x : p.params_mutable()) x = (rng.uniform01() * 2.0 - 1.0) * 3.0;
    std::vector<double> probs = p.enumerate_probs(Context{{0}, 0});
    worst_norm = std::max(worst_norm, std::abs(kern::reduce_sum(probs) - 1.0));
  }
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  TaskBundle task = build_task(cfg);
  for (const Context& ctx : task.c_train) {
    std::vector<double> probs = task.base.enumerate_probs(ctx);
    worst_norm = std::max(worst_norm, std::abs(kern::reduce_sum(probs) - 1.0));
  }
  c << "worst |sum p - 1| " << worst_norm;
  c.require(worst_norm <= 1e-12, "enumeration normalization above 1e-12");
  return c;
}

Check criterion_8_determinism() {
  Check c;
  ExperimentConfig cfg = testutil::digitize_prefix_cfg();
  cfg.trainer.iterations = 40;
  cfg.eval.cadence = 20;
  cfg.out_dir = "/tmp/cdpg_acc_det_a";
  RunLedger l1 = run_experiment(cfg);
  emit(l1, cfg.out_dir);
  cfg.out_dir = "/tmp/cdpg_acc_det_b";
  RunLedger l2 = run_experiment(cfg);
  emit(l2, cfg.out_dir);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  std::string a = slurp("/tmp/cdpg_acc_det_a/metrics.csv");
  std::string b = slurp("/tmp/cdpg_acc_det_b/metrics.csv");
  c << "metrics.csv " << a.size() << " bytes, identical across two runs: "
    << (a == b ? "yes" : "NO");
  c.require(!a.empty() && a == b, "metrics.csv differs between identical runs");
  return c;
}

Check criterion_9_metric_units() {
  Check c;
  Vocab v = Vocab::make({"A", "B", "C", "E1", "E2", "eos"}, "eos", {"E1", "E2"});
  auto mk = [&v](std::initializer_list<const char*> names) {
    Sequence s;
    for (const char* n : names) s.items.push_back(*v.find(n));
    s.items.push_back(v.eos);
    s.terminated = true;
    return s;
  };
  Sequence abc = mk({"A", "B", "C"});
  c.require(bleu4_lite(abc, abc) == 1.0, "BLEU(x,x) != 1");
  c.require(rouge_l(abc, abc) == 1.0, "ROUGE-L(x,x) != 1");
  c.require(std::abs(rouge_l(mk({"A", "B", "C"}), mk({"A", "C"})) - 0.8) <= 1e-12,
            "ROUGE-L hand case != 0.8");
  c.require(rouge_l(mk({"A"}), mk({"B"})) == 0.0, "disjoint ROUGE-L != 0");
  c.require(std::abs(distinct2(mk({"A", "A", "A", "A"})) - 1.0 / 3.0) <= 1e-12,
            "Distinct-2 hand case != 1/3");
  c.require(distinct2(mk({"A"})) == 1.0, "Distinct-2 singleton != 1");
  Context src{{*v.find("E1"), *v.find("A")}, 0};
  c.require(precision_source(v, mk({"E1"}), src) == 1.0, "precision hand case != 1");
  c.require(precision_source(v, mk({"E2"}), src) == 0.0, "precision hand case != 0");
  c.require(precision_source(v, mk({"A"}), src) == 1.0, "empty-ENT(x) precision != 1");
  c.require(recall_target(v, mk({"E1"}), mk({"E1", "E2"})) == 0.5, "recall hand case != 0.5");
  std::vector<double> zs = {1.0, 3.0};
  c.require(nstd_z(zs) == 0.5, "nstd hand case != 0.5");
  RngStream rng(900);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> base(4 + rng.below(8));
    for (double& z : base) z = rng.uniform01() + 0.05;
    double k = rng.uniform01() * 100.0 + 1e-3;
    std::vector<double> scaled = base;
    for (double& z : scaled) z *= k;
    worst = std::max(worst, std::abs(nstd_z(scaled) - nstd_z(base)));
  }
  c << "all hand cases exact; nstd scale-invariance worst drift " << worst;
  c.require(worst <= 1e-12, "nstd scale invariance above 1e-12");
  return c;
}

Check criterion_10_distributional() {
  Check c;
  ContainsA fx = ContainsA::make();
  const Context& ctx = fx.contexts[0];
  Feature phi = Feature::token_count(fx.space.vocab, *fx.space.vocab.find("A"), 1.5);
  Ebm ebm = Ebm::distributional(fx.base, phi, 1.5);

  RngStream rng(1000);
  double lambda = estimate_lambda_snis(ebm, ctx, fx.base, 10000, rng);
  c << "SNIS lambda " << lambda << " vs log 3 " << std::log(3.0) << "; ";
  c.require(std::abs(lambda - std::log(3.0)) <= 0.05, "lambda off by more than 0.05 at M=10k");

  // CDPG with the exponential-family EBM: E[phi] approaches mu_bar
  // monotonically up to the equilibrium jitter (checkpoints every 10
  // iterations; pilot equilibrium noise ~0.02, slack pinned at 0.03).
  TrainerConfig tc;
  tc.algorithm = TrainerConfig::Algo::CDPG;
  tc.contexts_per_iter = 4;
  tc.samples_per_context = 128;
  tc.alpha = 0.3;
  tc.minibatch = 32;
  tc.seed = 51;
  std::vector<Context> pool = {ctx};
  Trainer t(tc, fx.base, ebm, pool);
  std::vector<double> dist;
  dist.push_back(std::abs(exact_feature_moment(phi, t.policy(), ctx) - 1.5));
  for (int block = 0; block < 6; ++block) {
    for (int i = 0; i < 10; ++i) t.step();
    dist.push_back(std::abs(exact_feature_moment(phi, t.policy(), ctx) - 1.5));
  }
  c << "|E[phi] - mu| trajectory:";
  bool monotone = true;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    c << ' ' << dist[i];
    if (i > 0 && dist[i] > dist[i - 1] + 0.03) monotone = false;
  }
  c.require(monotone, "E[phi] regressed away from mu_bar by more than the slack");
  c.require(dist.back() <= 0.05, "final |E[phi] - mu| above 0.05");
  c.require(dist.back() < dist.front(), "no net movement toward mu_bar");
  return c;
}

struct Criterion {
  int id;
  const char* title;
  double time_limit_s;
  std::function<Check()> run;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "Z estimator unbiasedness (10k runs, every fixture task)", 60, criterion_1_z_unbiasedness},
      {2, "CDPG update direction vs exact -grad L (M=64 vs M=4)", 600, criterion_2_gradient_fidelity},
      {3, "CDPG convergence on the digitize prefix-tree fixture", 300, criterion_3_convergence},
      {4, "CDPG/DPG ordering by nstd(Z_c)", 600, criterion_4_ablation_ordering},
      {5, "baseline pathologies (Reinforce drift, Ziegler clamp)", 600, criterion_5_baseline_pathologies},
      {6, "KL estimator calibration on contains-A", 120, criterion_6_kl_calibration},
      {7, "numerical hygiene (finite differences, normalization)", 120, criterion_7_numerical_hygiene},
      {8, "byte-identical metrics.csv for identical (config, seed)", 120, criterion_8_determinism},
      {9, "metric unit suite", 30, criterion_9_metric_units},
      {10, "distributional extension (SNIS lambda, moment trajectory)", 120, criterion_10_distributional},
  };

  int failures = 0;
  for (const Criterion& cr : criteria) {
    auto start = std::chrono::steady_clock::now();
    Check result;
    try {
      result = cr.run();
    } catch (const std::exception& e) {
      result.ok = false;
      result << "exception: " << e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > cr.time_limit_s) {
      result.ok = false;
      result << " [failed: over " << cr.time_limit_s << "s budget]";
    }
    std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n", result.ok ? "PASS" : "FAIL", cr.id,
                cr.title, result.detail.str().c_str(), secs);
    std::fflush(stdout);
    if (!result.ok) ++failures;
  }
  if (failures) std::printf("%d criterion(s) FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
