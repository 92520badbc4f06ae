#pragma once
// Automaton reductions: constraint-driven pruning and similarity-based state
// merging.
//
// prune narrows an automaton without changing its language: constraint atoms
// whose positions resolve to single choices are decided up front (entailment
// atoms via the solver, equality atoms via syntactic products) and
// transitions that can never fire become bottom.
//
// Similarity compares the resolved types of expression states. Only
// *mutually* subtyped (equivalent) states merge: a one-directional merge
// would replace a state's terms by semantically weaker ones and can lose
// solutions. The merge rewires every reference from the dropped state to the
// surviving one, so both term sets remain reachable.

#include <algorithm>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "construct.hpp"
#include "qta.hpp"

namespace qsyn::reduce {

// Flatten a guard's top-level conjunction into atoms.
inline void atoms(const qta::ConstraintPtr& c,
                  std::vector<qta::ConstraintPtr>& out) {
  if (c->kind == qta::CKind::And) {
    atoms(c->kids[0], out);
    atoms(c->kids[1], out);
  } else {
    out.push_back(c);
  }
}

// The single formula reachable at a position of a transition, when there is
// exactly one choice; nullptr otherwise.
inline logic::FormulaPtr formulaAt(const qta::Qta& a, const qta::Transition& tr,
                                   const qta::Position& p) {
  auto states = qta::detail::positionStates(a, tr, p);
  logic::FormulaPtr found;
  for (qta::StateId q : states) {
    for (int ti : a.incoming(q)) {
      const auto& t = a.transition(ti);
      if (t.bottom) continue;
      auto f = a.sym(t.sym).formula;
      if (!f) continue;
      if (found && logic::render(found) != logic::render(f)) return nullptr;
      found = f;
    }
  }
  return found;
}

// Engine-level prune: decide single-choice constraint atoms and mark
// infeasible transitions bottom. Transition ids stay stable (no compaction),
// so term recipes stay valid. Exact: a decided atom has only one choice, so
// bottoming is equivalent to the constraint itself.
inline size_t pruneEngine(construct::Build& b) {
  qta::Qta& a = b.automaton();
  size_t bottomed = 0;
  // Warm the solver cache for this round's checks in batched round trips;
  // goal edges are excluded here and decided by extraction's decomposed
  // goal check instead.
  std::vector<smt::Oracle::Query> pend;
  for (size_t i = 0; i < a.transitionCount(); ++i) {
    const qta::Transition& t = a.transition(static_cast<int>(i));
    if (t.bottom || t.target == b.goalState() ||
        t.guard->kind == qta::CKind::True)
      continue;
    std::vector<qta::ConstraintPtr> as;
    atoms(t.guard, as);
    for (const auto& atom : as) {
      if (atom->kind != qta::CKind::SemEnt) continue;
      auto f1 = formulaAt(a, t, atom->p1);
      auto f2 = formulaAt(a, t, atom->p2);
      if (!f1 || !f2) continue;
      pend.push_back({b.ctx().envFor(f1, f2), f1, f2});
    }
  }
  b.ctx().oracle->prefetch(pend);
  for (size_t i = 0; i < a.transitionCount(); ++i) {
    qta::Transition& t = a.transitionMut(static_cast<int>(i));
    if (t.bottom || t.target == b.goalState() ||
        t.guard->kind == qta::CKind::True)
      continue;
    std::vector<qta::ConstraintPtr> as;
    atoms(t.guard, as);
    bool dead = false;
    for (const auto& atom : as) {
      if (atom->kind == qta::CKind::False) dead = true;
      if (atom->kind != qta::CKind::SemEnt) continue;
      auto f1 = formulaAt(a, t, atom->p1);
      auto f2 = formulaAt(a, t, atom->p2);
      if (!f1 || !f2) continue;  // multi-choice: leave for per-tree checks
      if (!b.ctx().entails(f1, f2)) dead = true;
      if (dead) break;
    }
    if (dead) {
      t.bottom = true;
      ++bottomed;
    }
  }
  return bottomed;
}

// Generic prune over an arbitrary constrained automaton (used directly in
// tests over random machines). Narrows with the intersection primitives and
// bottoms transitions whose atoms can never hold; constraints stay on the
// surviving transitions, so the language is preserved exactly.
inline size_t pruneQta(qta::Qta& a, const qta::EntailmentContext& ctx) {
  size_t bottomed = 0;
  size_t n = a.transitionCount();  // products may add transitions; skip those
  for (size_t i = 0; i < n; ++i) {
    qta::Transition& t = a.transitionMut(static_cast<int>(i));
    if (t.bottom || t.guard->kind == qta::CKind::True) continue;
    std::vector<qta::ConstraintPtr> as;
    atoms(t.guard, as);
    bool dead = false;
    for (const auto& atom : as) {
      if (atom->kind == qta::CKind::False) dead = true;
      else if (atom->kind == qta::CKind::SynEq)
        dead = !qta::intersectSyntactic(a, static_cast<int>(i), atom->p1, atom->p2);
      else if (atom->kind == qta::CKind::SemEnt)
        dead = !qta::intersectSemantic(a, static_cast<int>(i), atom->p1,
                                       atom->p2, ctx);
      if (dead) break;
    }
    if (dead) {
      a.transitionMut(static_cast<int>(i)).bottom = true;
      ++bottomed;
    }
  }
  return bottomed;
}

// Ordered similarity pairs (i, j): the resolved type of state i is a subtype
// of the resolved type of state j.
using SimilaritySet = std::vector<std::pair<qta::StateId, qta::StateId>>;

// Compare expression states created in the last round against all argument
// states. `budget` caps the number of solver-backed direction checks.
inline SimilaritySet inferSimilarity(construct::Build& b, int budget = 500) {
  SimilaritySet e;
  const auto& fresh = b.newStatesLastRound();
  const auto& all = b.argStates();
  int spent = 0;
  auto dir = [&](qta::StateId i, qta::StateId j) {
    auto pi = b.statePost(i);
    auto pj = b.statePost(j);
    ++spent;
    return b.ctx().entails(pi, pj);
  };
  // A pair only counts when the two states' binder facts are jointly
  // satisfiable: under an inconsistent joint context both directions hold
  // vacuously and unrelated states would merge.
  auto consistent = [&](qta::StateId i, qta::StateId j) {
    auto both = logic::mkAnd(b.statePost(i), b.statePost(j));
    ++spent;
    return !b.ctx().entails(both, logic::mkFalse());
  };
  // Batch the round's direction checks into few solver round trips.
  {
    std::vector<smt::Oracle::Query> pend;
    int planned = 0;
    for (auto it = fresh.rbegin(); it != fresh.rend() && planned < budget;
         ++it) {
      for (qta::StateId other : all) {
        if (other == *it) continue;
        if (b.meta(*it).type->sort->render() !=
            b.meta(other).type->sort->render())
          continue;
        auto pi = b.statePost(*it);
        auto pj = b.statePost(other);
        auto both = logic::mkAnd(pi, pj);
        auto no = logic::mkFalse();
        pend.push_back({b.ctx().envFor(both, no), both, no});
        pend.push_back({b.ctx().envFor(pi, pj), pi, pj});
        pend.push_back({b.ctx().envFor(pj, pi), pj, pi});
        if ((planned += 3) >= budget) break;
      }
    }
    b.ctx().oracle->prefetch(pend);
  }
  for (auto it = fresh.rbegin(); it != fresh.rend(); ++it) {
    qta::StateId q = *it;
    for (qta::StateId other : all) {
      if (other == q) continue;
      const auto& mq = b.meta(q);
      const auto& mo = b.meta(other);
      if (mq.type->sort->render() != mo.type->sort->render()) continue;
      if (spent >= budget) return e;
      if (!consistent(q, other)) continue;
      if (spent >= budget) return e;
      if (dir(q, other)) e.emplace_back(q, other);
      if (spent >= budget) return e;
      if (dir(other, q)) e.emplace_back(other, q);
    }
  }
  return e;
}

// Merge mutually-subtyped (equivalent) state pairs. The survivor is the
// state created earliest (shallowest, then lowest id): its minimal term is
// never larger than the other's. Returns the number of states merged away.
// The similarity set is consumed: merged entries are spent.
inline size_t minimize(construct::Build& b, SimilaritySet& e) {
  std::set<std::pair<qta::StateId, qta::StateId>> set(e.begin(), e.end());
  std::map<qta::StateId, qta::StateId> root;  // union-find by min element
  std::function<qta::StateId(qta::StateId)> find = [&](qta::StateId q) {
    auto it = root.find(q);
    if (it == root.end() || it->second == q) return q;
    return it->second = find(it->second);
  };
  auto better = [&](qta::StateId x, qta::StateId y) {
    const auto& mx = b.meta(x);
    const auto& my = b.meta(y);
    if (mx.depthCreated != my.depthCreated)
      return mx.depthCreated < my.depthCreated;
    return x < y;
  };
  for (const auto& [i, j] : set) {
    if (i < j && set.count({j, i})) {
      qta::StateId ri = find(i), rj = find(j);
      if (ri == rj) continue;
      if (!better(ri, rj)) std::swap(ri, rj);
      root[rj] = ri;
      root.emplace(ri, ri);
    }
  }
  size_t merged = 0;
  for (const auto& [q, r] : root) {
    (void)r;
    qta::StateId s = find(q);
    if (s != q) {
      b.mergeState(q, s);
      ++merged;
    }
  }
  e.clear();
  return merged;
}

}  // namespace qsyn::reduce
