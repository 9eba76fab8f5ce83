#include "doctest.h"

#include <cmath>
#include <vector>

#include "cdpg/errors.hpp"
#include "cdpg/kern/kernels.hpp"
#include "cdpg/metrics.hpp"
#include "cdpg/oracle.hpp"
#include "common/fixtures.hpp"
#include "common/stats.hpp"

using namespace cdpg;
using testutil::ContainsA;
using testutil::seq;

namespace {

Sequence make_x(const Vocab& v, std::initializer_list<const char*> names) {
  std::vector<TokenId> items;
  for (const char* n : names) items.push_back(*v.find(n));
  items.push_back(v.eos);
  return Sequence{std::move(items), true};
}

}  // namespace

TEST_CASE("exact_target: identity, restriction, and emptiness") {
  ContainsA fx = ContainsA::make();
  const Context& c = fx.contexts[0];
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);

  // b == 1 (numeral-free context) -> p_c = a exactly.
  Context vacuous{{*fx.space.vocab.find("A")}, 1};
  ExactTarget same = exact_target(ebm, vacuous);
  std::vector<double> base_probs = fx.base.enumerate_probs(vacuous);
  CHECK(same.z_exact == doctest::Approx(1.0).epsilon(1e-12));
  for (uint64_t i = 0; i < base_probs.size(); ++i) {
    CHECK(same.probs[i] == doctest::Approx(base_probs[i]).epsilon(1e-12));
  }

  // "contains A": uniform over the three satisfying sequences.
  ExactTarget t = exact_target(ebm, c);
  CHECK(t.z_exact == doctest::Approx(0.75).epsilon(1e-12));
  int support = 0;
  for (uint64_t i = 0; i < t.probs.size(); ++i) {
    if (t.probs[i] > 0.0) {
      CHECK(t.probs[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
      ++support;
    }
  }
  CHECK(support == 3);

  // b == 0 -> empty target.
  ConstraintScorer never = ConstraintScorer::entity_consistency(fx.space.vocab, 4);
  Ebm impossible = Ebm::pointwise(fx.base, never);
  CHECK_THROWS_AS(exact_target(impossible, c), EmptyTargetError);
}

TEST_CASE("exact oracle self-consistency: probs * z re-sum to the score total") {
  ContainsA fx = ContainsA::make();
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
  const Context& c = fx.contexts[0];
  ExactTarget t = exact_target(ebm, c);
  std::vector<double> scores = exact_score_table(ebm, c);
  std::vector<double> rescaled = t.probs;
  kern::scale(rescaled, t.z_exact);
  CHECK(std::abs(kern::reduce_sum(rescaled) - kern::reduce_sum(scores)) <= 1e-12);
}

TEST_CASE("exact_loss_grad vanishes exactly at the target") {
  ContainsA fx = ContainsA::make();
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
  const Context& c = fx.contexts[0];
  ExactTarget t = exact_target(ebm, c);
  Policy at_target = Policy::prefix_tree_from_targets(fx.space, {{c.id, t.probs}});
  std::vector<double> g = exact_loss_grad(ebm, at_target, std::span<const Context>(&c, 1));
  CHECK(std::sqrt(kern::dot(g, g)) <= 1e-9);
}

TEST_CASE("exact_loss_grad matches finite differences of the cross-entropy") {
  ContainsA fx = ContainsA::make();
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
  std::span<const Context> cs(fx.contexts.data(), 2);
  RngStream rng(3);
  Policy pi = Policy::prefix_tree(fx.space, {0, 1});
  for (double& x : pi.params_mutable()) x = (rng.uniform01() * 2.0 - 1.0);

  auto ce_loss = [&]() {
    double total = 0.0;
    for (const Context& c : cs) {
      ExactTarget t = exact_target(ebm, c);
      std::vector<double> q = pi.enumerate_probs(c);
      for (uint64_t i = 0; i < t.probs.size(); ++i) {
        if (t.probs[i] > 0.0) total -= t.probs[i] * std::log(q[i]);
      }
    }
    return total / static_cast<double>(cs.size());
  };

  std::vector<double> g = exact_loss_grad(ebm, pi, cs);
  const double h = 1e-5;
  std::span<double> params = pi.params_mutable();
  for (std::size_t k = 0; k < params.size(); ++k) {
    double saved = params[k];
    params[k] = saved + h;
    double up = ce_loss();
    params[k] = saved - h;
    double dn = ce_loss();
    params[k] = saved;
    double fd = (up - dn) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(g[k]), 1e-4});
    CHECK(std::abs(fd - g[k]) / denom <= 1e-6);
  }
}

TEST_CASE("exact_loss_grad: hand-solved single-row case") {
  // vocab {A, N, eos}, max_len 2: X = {"eos", "A eos", "N eos"}. The digitize
  // constraint for a context holding N keeps only "A eos", so p = e_A and the
  // BOS-row gradient is pi - e_A at uniform logits.
  Vocab v = Vocab::make({"A", "N", "eos"}, "eos", {}, {{"N", "A"}});
  SequenceSpace space{v, 2};
  ContextFeaturizer feat{ContextFeaturizer::Mode::ByNumeralSet, 0};
  Policy base = Policy::bigram(space, feat);
  Ebm ebm = Ebm::pointwise(base, ConstraintScorer::digitize(v));
  Context c{{*v.find("N")}, 0};

  Policy pi = Policy::bigram(space, feat);
  std::vector<double> g = exact_loss_grad(ebm, pi, std::span<const Context>(&c, 1));
  std::size_t row = pi.bigram_row_base(pi.feature_of(c), -1);
  CHECK(g[row + 0] == doctest::Approx(1.0 / 3.0 - 1.0).epsilon(1e-12));
  CHECK(g[row + 1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(g[row + 2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k < row || k >= row + 3) CHECK(g[k] == 0.0);
  }
}

TEST_CASE("estimate_kl_p_pi: zero at the target and calibrated on contains-A") {
  ContainsA fx = ContainsA::make();
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
  const Context& c = fx.contexts[0];
  ExactTarget t = exact_target(ebm, c);

  Policy at_target = Policy::prefix_tree_from_targets(fx.space, {{c.id, t.probs}});
  RngStream rng(1);
  KlEstimate zero =
      estimate_kl_p_pi(ebm, at_target, std::span<const Context>(&c, 1), 64, 64, 1e-6, rng);
  CHECK(std::abs(zero.value) <= 0.01);

  // pi = a: exact KL(p_c, a) = log(4/3) ~ 0.2877.
  const double exact = std::log(4.0 / 3.0);
  CHECK(exact_kl_p_pi(ebm, fx.base, std::span<const Context>(&c, 1)) ==
        doctest::Approx(exact).epsilon(1e-12));
  double mean = 0.0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    mean += estimate_kl_p_pi(ebm, fx.base, std::span<const Context>(&c, 1), 8, 64, 1e-6, rng).value;
  }
  mean /= runs;
  CHECK(std::abs(mean - exact) <= 0.01);
}

TEST_CASE("estimate_kl_p_pi bias shrinks with M") {
  ContainsA fx = ContainsA::make();
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
  const Context& c = fx.contexts[0];
  const double exact = std::log(4.0 / 3.0);
  RngStream rng(77);
  std::vector<double> bias, noise;
  for (int m : {4, 16, 64, 256}) {
    double sum = 0.0, sumsq = 0.0;
    const int runs = 600;
    for (int r = 0; r < runs; ++r) {
      double v =
          estimate_kl_p_pi(ebm, fx.base, std::span<const Context>(&c, 1), 4, m, 1e-6, rng).value;
      sum += v;
      sumsq += v * v;
    }
    double mean = sum / runs;
    bias.push_back(std::abs(mean - exact));
    noise.push_back(3.0 * std::sqrt((sumsq - sum * sum / runs) / (runs - 1) / runs));
  }
  // The plug-in bias shrinks strictly in M until it drops below the
  // Monte-Carlo noise floor of this measurement.
  for (std::size_t i = 1; i < bias.size(); ++i) {
    CHECK((bias[i] < bias[i - 1] || bias[i] <= noise[i]));
  }
  CHECK(bias[1] < bias[0]);  // the large-bias end is strictly ordered
  CHECK(bias[2] < bias[1]);
}

TEST_CASE("estimate_kl_p_pi: degenerate contexts are skipped, all-degenerate throws") {
  ContainsA fx = ContainsA::make();
  ConstraintScorer never = ConstraintScorer::entity_consistency(fx.space.vocab, 4);
  Ebm impossible = Ebm::pointwise(fx.base, never);
  const Context& c = fx.contexts[0];
  RngStream rng(79);
  CHECK_THROWS_AS(
      estimate_kl_p_pi(impossible, fx.base, std::span<const Context>(&c, 1), 4, 8, 1e-6, rng),
      std::runtime_error);
}

TEST_CASE("estimate_kl_pi_a: unbiased against enumeration") {
  ContainsA fx = ContainsA::make();
  const Context& c = fx.contexts[0];
  RngStream rng(12);

  KlEstimate same =
      estimate_kl_pi_a(fx.base, fx.base, std::span<const Context>(&c, 1), 16, 64, rng);
  CHECK(std::abs(same.value) <= std::max(3.0 * same.std_error, 1e-12));

  // Concentrated pi vs the uniform base: estimator matches enumeration.
  Ebm ebm = Ebm::pointwise(fx.base, fx.scorer);
  ExactTarget t = exact_target(ebm, c);
  std::vector<double> base_probs = fx.base.enumerate_probs(c);
  std::vector<double> q(fx.space.num_sequences(), 0.0);
  for (uint64_t i = 0; i < q.size(); ++i) q[i] = 0.9 * t.probs[i] + 0.1 * base_probs[i];
  Policy pi = Policy::prefix_tree_from_targets(fx.space, {{c.id, q}});
  double exact = exact_kl_pi_a(pi, fx.base, std::span<const Context>(&c, 1));
  CHECK(exact > 0.0);
  KlEstimate est = estimate_kl_pi_a(pi, fx.base, std::span<const Context>(&c, 1), 64, 64, rng);
  CHECK(std::abs(est.value - exact) <= 3.0 * est.std_error + 1e-9);
}

TEST_CASE("satisfaction_rate endpoints and calibration") {
  ContainsA fx = ContainsA::make();
  const Context& c = fx.contexts[0];
  RngStream rng(3);
  ConstraintScorer always = ConstraintScorer::digitize(fx.space.vocab);
  Context vacuous{{*fx.space.vocab.find("A")}, 3};
  CHECK(satisfaction_rate(always, fx.base, std::span<const Context>(&vacuous, 1), 32, rng) == 1.0);
  ConstraintScorer never = ConstraintScorer::entity_consistency(fx.space.vocab, 4);
  CHECK(satisfaction_rate(never, fx.base, std::span<const Context>(&c, 1), 32, rng) == 0.0);

  const int m = 40000;
  double rate = satisfaction_rate(fx.scorer, fx.base, std::span<const Context>(&c, 1), m, rng);
  double sigma = std::sqrt(0.75 * 0.25 / m);
  CHECK(std::abs(rate - 0.75) <= 3.0 * sigma);
}

TEST_CASE("distinct2 hand cases") {
  Vocab v = Vocab::make({"A", "B", "C", "eos"}, "eos");
  CHECK(distinct2(make_x(v, {"A", "B", "C"})) == 1.0);
  CHECK(distinct2(make_x(v, {"A", "A", "A", "A"})) == doctest::Approx(1.0 / 3.0));
  CHECK(distinct2(make_x(v, {"A"})) == 1.0);  // convention: fewer than 2 tokens
  CHECK(distinct2(seq({v.eos})) == 1.0);
}

TEST_CASE("bleu4_lite and rouge_l hand cases") {
  Vocab v = Vocab::make({"A", "B", "C", "D", "E", "eos"}, "eos");
  Sequence abcd = make_x(v, {"A", "B", "C", "D"});
  CHECK(bleu4_lite(abcd, abcd) == doctest::Approx(1.0));
  CHECK(rouge_l(abcd, abcd) == doctest::Approx(1.0));
  CHECK(bleu4_lite(make_x(v, {"A", "B"}), make_x(v, {"A", "B"})) == doctest::Approx(1.0));

  CHECK(rouge_l(make_x(v, {"A", "B"}), make_x(v, {"C", "D"})) == 0.0);
  // hyp "A B C" vs ref "A C": LCS 2, P = 2/3, R = 1, F1 = 0.8.
  CHECK(rouge_l(make_x(v, {"A", "B", "C"}), make_x(v, {"A", "C"})) == doctest::Approx(0.8));

  CHECK_THROWS_AS(bleu4_lite(abcd, seq({v.eos})), std::invalid_argument);
  CHECK_THROWS_AS(rouge_l(abcd, seq({v.eos})), std::invalid_argument);
  CHECK(bleu4_lite(seq({v.eos}), abcd) == 0.0);
}

TEST_CASE("entity precision and recall") {
  Vocab v = Vocab::make({"E1", "E2", "E3", "w", "eos"}, "eos", {"E1", "E2", "E3"});
  Context c{{*v.find("E1"), *v.find("E2"), *v.find("w")}, 0};
  CHECK(precision_source(v, make_x(v, {"E1", "E2"}), c) == 1.0);
  CHECK(precision_source(v, make_x(v, {"E3"}), c) == 0.0);
  CHECK(precision_source(v, make_x(v, {"w"}), c) == 1.0);  // empty ENT(x) -> 1
  Sequence target = make_x(v, {"E1", "E2"});
  CHECK(recall_target(v, make_x(v, {"E1"}), target) == doctest::Approx(0.5));
  CHECK(recall_target(v, make_x(v, {"w"}), target) == 0.0);
}

TEST_CASE("nstd_z: hand values, scale invariance, errors") {
  std::vector<double> equal = {2.0, 2.0, 2.0};
  CHECK(nstd_z(equal) == 0.0);
  std::vector<double> pair = {1.0, 3.0};
  CHECK(nstd_z(pair) == doctest::Approx(0.5));  // population std 1, mean 2
  std::vector<double> one = {42.0};
  CHECK(nstd_z(one) == 0.0);
  RngStream rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> zs(3 + rng.below(10));
    for (double& z : zs) z = rng.uniform01() + 0.1;
    double k = rng.uniform01() * 10.0 + 0.01;
    std::vector<double> scaled = zs;
    for (double& z : scaled) z *= k;
    CHECK(std::abs(nstd_z(scaled) - nstd_z(zs)) <= 1e-12);
  }
  std::vector<double> zeros = {0.0, 0.0};
  CHECK_THROWS_AS(nstd_z(zeros), std::invalid_argument);
}

TEST_CASE("zipf_table ranking and tie-break") {
  Vocab v = Vocab::make({"A", "B", "C", "eos"}, "eos");
  std::vector<Sequence> one = {make_x(v, {"A", "A", "A"})};
  auto rows = zipf_table(one, v);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].token == *v.find("A"));
  CHECK(rows[0].frequency == 3);
  CHECK(rows[0].rank == 1);

  std::vector<Sequence> two = {make_x(v, {"B", "B", "B", "A"})};
  rows = zipf_table(two, v);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].token == *v.find("B"));
  CHECK(rows[0].frequency == 3);
  CHECK(rows[1].frequency == 1);
  CHECK(rows[1].rank == 2);

  // Tie: vocab order wins.
  std::vector<Sequence> tie = {make_x(v, {"C", "A"})};
  rows = zipf_table(tie, v);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].token == *v.find("A"));
  CHECK(rows[1].token == *v.find("C"));
}

TEST_CASE("metric ranges hold over random inputs") {
  Vocab v = Vocab::make({"E1", "E2", "w1", "w2", "eos"}, "eos", {"E1", "E2"});
  SequenceSpace space{v, 6};
  RngStream rng(123);
  for (int i = 0; i < 10000; ++i) {
    Sequence x = space.sequence_at(rng.below(space.num_sequences()));
    Sequence ref = space.sequence_at(rng.below(space.num_sequences()));
    Context c{{static_cast<TokenId>(rng.below(4))}, 0};
    double d2 = distinct2(x);
    CHECK((d2 >= 0.0 && d2 <= 1.0));
    if (ref.content_size() > 0) {
      double bl = bleu4_lite(x, ref);
      double rl = rouge_l(x, ref);
      CHECK((bl >= 0.0 && bl <= 1.0));
      CHECK((rl >= 0.0 && rl <= 1.0));
      double rt = recall_target(v, x, ref);
      CHECK((rt >= 0.0 && rt <= 1.0));
    }
    double ps = precision_source(v, x, c);
    CHECK((ps >= 0.0 && ps <= 1.0));
  }
}
