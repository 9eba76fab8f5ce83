#pragma once

#include <optional>
#include <vector>

#include "cdpg/config.hpp"
#include "cdpg/scorers.hpp"

namespace cdpg {

// Everything a run needs: the space, a fitted base model a, the objective
// (binary scorer, plus a feature for distributional runs), disjoint context
// sets, and per-context reference sequences for the text metrics.
struct TaskBundle {
  SequenceSpace space;
  ContextFeaturizer featurizer;
  Policy base;
  ConstraintScorer scorer;
  std::optional<Feature> feature;
  std::vector<Context> c_train;
  std::vector<Context> c_test;
  std::vector<Sequence> refs_train;  // aligned with c_train
  std::vector<Sequence> refs_test;
  std::vector<int> infeasible_dropped;  // context ids with exact Z_c = 0
};

// Deterministic task synthesis from the config seed: contexts from a seeded
// generator, base model maximum-likelihood fitted to a seeded corpus that
// mostly violates the constraint. Infeasible contexts (exact Z_c = 0) are
// dropped and reported in the bundle.
TaskBundle build_task(const ExperimentConfig& cfg);

}  // namespace cdpg
