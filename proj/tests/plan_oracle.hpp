#pragma once

// Exhaustive bushy-plan enumeration: every binary tree over every canonical
// connected split, every leaf variant, every reach-condition order; no
// memoization, no pruning. Independent search over the same candidate space
// the DP explores; its minimum is the optimality reference.

#include <limits>

#include "pathjoin/optimizer.hpp"

namespace testutil {

inline void all_plans(const pathjoin::odetail::Ctx& ctx, std::uint32_t subset,
                      const std::function<void(std::shared_ptr<pathjoin::PlanNode>)>& yield) {
  using namespace pathjoin;
  using namespace pathjoin::odetail;
  if ((subset & (subset - 1)) == 0) {
    int v = std::countr_zero(subset);
    for (auto& variant : leaf_variants(ctx, v))
      yield(wrap_self_conditions(ctx, variant, ctx.self_predicates[v]));
    return;
  }
  std::uint32_t low = subset & (~subset + 1);
  for (std::uint32_t left = (subset - 1) & subset; left; left = (left - 1) & subset) {
    if (!(left & low)) continue;
    std::uint32_t right = subset & ~left;
    if (right == 0) continue;
    if (!subset_connected(ctx, left) || !subset_connected(ctx, right)) continue;
    auto sc = collect_conditions(ctx, left, right);
    if (sc.equi.empty() && sc.reach.empty()) continue;
    all_plans(ctx, left, [&](std::shared_ptr<PlanNode> lp) {
      all_plans(ctx, right, [&](std::shared_ptr<PlanNode> rp) {
        join_candidates(ctx, lp, rp, sc, yield);
      });
    });
  }
}

// Minimum cost over the full plan space (and the number of plans seen).
struct ExhaustiveResult {
  double min_cost = std::numeric_limits<double>::infinity();
  std::size_t plans = 0;
};

inline ExhaustiveResult exhaustive_min_cost(const pathjoin::QueryGraph& g,
                                            const pathjoin::StatsCatalog& stats,
                                            const pathjoin::Dictionary& dict, int k,
                                            double gamma) {
  using namespace pathjoin;
  auto ctx = odetail::make_ctx(g, stats, dict, k, gamma);
  const std::uint32_t full = (1u << g.vertices.size()) - 1;
  ExhaustiveResult r;
  all_plans(ctx, full, [&](std::shared_ptr<PlanNode> plan) {
    ++r.plans;
    if (plan->est_cost < r.min_cost) r.min_cost = plan->est_cost;
  });
  return r;
}

}  // namespace testutil
