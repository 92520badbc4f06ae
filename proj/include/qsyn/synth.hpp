#pragma once
// The synthesis loop: build the automaton round by round, reduce it, and
// extract witness programs from the goal state.
//
// Each round adds one level of call nesting, so after round i the automaton
// covers exactly the programs of nesting depth <= i. By default the loop
// runs all k rounds and returns the union of every solution found (smallest
// first); with `first` set it stops at the first round that yields one.
//
// Extraction works per state: states are keyed by their resolved
// post-condition, so whether a goal edge fires is a property of the state,
// not of the individual term - one entailment check qualifies every term the
// state denotes. Term enumeration then walks the recipes recorded during
// construction, bounded by the nesting budget and capped.

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "construct.hpp"
#include "lang.hpp"
#include "reduce.hpp"

namespace qsyn::synth {

struct Config {
  int k = 2;
  bool first = false;         // stop at the first round with a solution
  bool noPrune = false;       // ablation: skip constraint pruning
  bool noSimilarity = false;  // ablation: skip similarity merging
  bool enableIf = false;
  int simBudget = 500;   // solver checks per similarity round
  size_t cap = 100;      // max solutions reported
  size_t innerCap = 2000;  // max terms enumerated per (state, budget)
};

struct RunStats {
  bool solved = false;
  double timeS = 0;
  long long smtCalls = 0;
  double smtTimeS = 0;
  size_t qStates = 0;     // expression states before merging
  size_t qStatesMin = 0;  // expression states after merging
  size_t merged = 0;
  long long termsEnumerated = 0;
  std::vector<int> solutionSizes;
};

struct Result {
  bool solved = false;
  std::vector<lang::TermPtr> solutions;  // ordered by (call count, text)
  RunStats stats;
};

// ---------------------------------------------------------------------------
// Term extraction
// ---------------------------------------------------------------------------

class Extractor {
 public:
  static constexpr long long kNoTerm = 1LL << 40;

  Extractor(construct::Build& b, size_t innerCap, long long& enumerated)
      : b_(b), innerCap_(innerCap), enumerated_(enumerated) {}

  // Cheapest call count any term of q can have within the nesting budget,
  // or kNoTerm when the state denotes nothing at that depth. Guards are not
  // consulted here: this is an ordering heuristic for visiting goal edges
  // smallest-witness-first, not a feasibility check.
  long long minCall(qta::StateId q, int budget) {
    if (budget < 0) return kNoTerm;
    auto key = std::make_pair(q, budget);
    auto it = mc_.find(key);
    if (it != mc_.end()) return it->second;
    mc_[key] = kNoTerm;  // merge-induced cycles read back as "no term"
    const qta::Qta& a = b_.automaton();
    const auto& recipes = b_.recipes();
    long long best = kNoTerm;
    for (int ti : a.incoming(q)) {
      auto rit = recipes.find(ti);
      if (rit == recipes.end()) continue;
      if (a.transition(ti).bottom) continue;
      const construct::Recipe& r = rit->second;
      long long c = kNoTerm;
      switch (r.kind) {
        case construct::Recipe::Leaf:
          c = 0;
          break;
        case construct::Recipe::App:
          if (budget >= 1) {
            long long cf = minCall(r.fun, budget);
            long long cx = minCall(r.arg, budget - 1);
            if (cf < kNoTerm && cx < kNoTerm) c = cf + cx + 1;
          }
          break;
        case construct::Recipe::If:
          if (budget >= 1) {
            long long cc = minCall(r.cond, budget - 1);
            long long ca = minCall(r.thenS, budget - 1);
            long long cb = minCall(r.elseS, budget - 1);
            if (cc < kNoTerm && ca < kNoTerm && cb < kNoTerm)
              c = cc + ca + cb + 1;
          }
          break;
      }
      best = std::min(best, c);
    }
    mc_[key] = best;
    return best;
  }

  // Transition feasibility: bottom transitions never fire; otherwise decide
  // the guard's entailment atoms (single-choice by construction). This is
  // where constraints get enforced when pruning is disabled.
  bool feasible(int ti) {
    const auto& t = b_.automaton().transition(ti);
    if (t.bottom) return false;
    if (t.guard->kind == qta::CKind::True) return true;
    auto it = feas_.find(ti);
    if (it != feas_.end()) return it->second;
    if (t.target == b_.goalState()) {
      // goal edges: one decomposed, memoized check per term state
      bool ok = b_.goalAccepts(t.children[1]);
      feas_.emplace(ti, ok);
      return ok;
    }
    std::vector<qta::ConstraintPtr> as;
    reduce::atoms(t.guard, as);
    bool ok = true;
    for (const auto& atom : as) {
      if (atom->kind == qta::CKind::False) ok = false;
      if (atom->kind != qta::CKind::SemEnt) continue;
      auto f1 = reduce::formulaAt(b_.automaton(), t, atom->p1);
      auto f2 = reduce::formulaAt(b_.automaton(), t, atom->p2);
      if (!f1 || !f2) continue;
      ok = ok && b_.ctx().entails(f1, f2);
      if (!ok) break;
    }
    feas_.emplace(ti, ok);
    return ok;
  }

  // Terms of a state with call nesting <= budget, ordered by
  // (call count, text), capped. For function states the budget bounds the
  // nesting of the argument subterms.
  const std::vector<lang::TermPtr>& terms(qta::StateId q, int budget) {
    auto key = std::make_pair(q, budget);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    auto& slot = memo_[key];  // insert first: recipes never cycle on (q, budget)
    std::vector<lang::TermPtr> out;
    // Raw enumeration stops above the post-dedup cap so a single high-fanout
    // recipe product cannot blow up a state's enumeration.
    const size_t rawCap = innerCap_ * 2;
    const qta::Qta& a = b_.automaton();
    const auto& recipes = b_.recipes();
    for (int ti : a.incoming(q)) {
      auto rit = recipes.find(ti);
      if (rit == recipes.end()) continue;
      if (!feasible(ti)) continue;
      const construct::Recipe& r = rit->second;
      switch (r.kind) {
        case construct::Recipe::Leaf:
          out.push_back(lang::mkVar(r.name));
          ++enumerated_;
          break;
        case construct::Recipe::App: {
          if (budget < 1) break;
          const auto& fs = terms(r.fun, budget);
          const auto& xs = terms(r.arg, budget - 1);
          if (fs.empty() || xs.empty()) break;
          // Both sides are sorted smallest-first, so walking anti-diagonals
          // of the product reaches small combined terms before the raw cap
          // cuts the enumeration off.
          for (size_t s = 0;
               s + 1 < fs.size() + xs.size() + 1 && out.size() < rawCap; ++s) {
            size_t ilo = s >= xs.size() ? s - xs.size() + 1 : 0;
            for (size_t i = ilo; i <= s && i < fs.size() && out.size() < rawCap;
                 ++i) {
              out.push_back(lang::mkApp(fs[i], xs[s - i]));
              ++enumerated_;
            }
          }
          break;
        }
        case construct::Recipe::If: {
          if (budget < 1) break;
          const auto& cs = terms(r.cond, budget - 1);
          const auto& as2 = terms(r.thenS, budget - 1);
          const auto& bs = terms(r.elseS, budget - 1);
          for (const auto& c : cs) {
            for (const auto& x : as2) {
              for (const auto& y : bs) {
                if (out.size() >= rawCap) break;
                out.push_back(lang::mkIf(c, x, y));
                ++enumerated_;
              }
              if (out.size() >= rawCap) break;
            }
            if (out.size() >= rawCap) break;
          }
          break;
        }
      }
      if (out.size() >= rawCap) break;
    }
    // Sort keys are precomputed: rendering inside the comparator would
    // re-render every term O(log n) times.
    struct Keyed {
      int cc;
      std::string r;
      lang::TermPtr t;
    };
    std::vector<Keyed> keyed;
    keyed.reserve(out.size());
    for (auto& t : out)
      keyed.push_back({lang::callCount(t), lang::render(t), std::move(t)});
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& x, const Keyed& y) {
      if (x.cc != y.cc) return x.cc < y.cc;
      return x.r < y.r;
    });
    keyed.erase(std::unique(keyed.begin(), keyed.end(),
                            [](const Keyed& x, const Keyed& y) {
                              return x.r == y.r;
                            }),
                keyed.end());
    if (keyed.size() > innerCap_) keyed.resize(innerCap_);
    out.clear();
    for (auto& kd : keyed) out.push_back(std::move(kd.t));
    slot = std::move(out);
    return memo_[key];
  }

 private:
  construct::Build& b_;
  size_t innerCap_;
  long long& enumerated_;
  std::map<std::pair<qta::StateId, int>, std::vector<lang::TermPtr>> memo_;
  std::map<std::pair<qta::StateId, int>, long long> mc_;
  std::map<int, bool> feas_;
};

// Programs accepted at the goal with nesting <= k.
inline std::vector<lang::TermPtr> extract(construct::Build& b, int k, size_t cap,
                                          size_t innerCap,
                                          long long& enumerated) {
  Extractor ex(b, innerCap, enumerated);
  const qta::Qta& a = b.automaton();
  std::map<std::string, lang::TermPtr> uniq;
  // Goal edges are visited cheapest-witness-first (by the state's minimal
  // call count) and the walk stops once `cap` distinct solutions exist, so
  // the reported set is the small programs even when the accepted language
  // is enormous. Edges whose state denotes nothing at this depth sort last
  // and are never visited.
  struct Edge {
    long long mc;
    int ti;
    qta::StateId q;
  };
  std::vector<Edge> edges;
  for (int ti : a.incoming(b.goalState())) {
    const auto& t = a.transition(ti);
    if (t.bottom) continue;
    // child 1 (label "term") holds the accepted expression state
    edges.push_back({ex.minCall(t.children[1], k), ti, t.children[1]});
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return x.mc != y.mc ? x.mc < y.mc : x.ti < y.ti;
  });
  // Feasibility needs one goal check per state; warm the solver cache in
  // batched round trips, one block of edges at a time, since the walk
  // usually stops long before the edge list is exhausted.
  const size_t block = 256;
  for (size_t base = 0; base < edges.size() && uniq.size() < cap;
       base += block) {
    size_t end = std::min(base + block, edges.size());
    if (edges[base].mc >= Extractor::kNoTerm) break;
    std::vector<smt::Oracle::Query> pend;
    for (size_t i = base; i < end; ++i) {
      if (edges[i].mc >= Extractor::kNoTerm) break;
      for (auto& q : b.goalQueries(edges[i].q)) pend.push_back(std::move(q));
    }
    b.ctx().oracle->prefetch(pend);
    for (size_t i = base; i < end && uniq.size() < cap; ++i) {
      if (edges[i].mc >= Extractor::kNoTerm) break;
      if (!ex.feasible(edges[i].ti)) continue;
      for (const auto& term : ex.terms(edges[i].q, k))
        uniq.emplace(lang::render(term), term);
    }
  }
  // uniq iterates in render order, so a stable sort on call count alone
  // yields (call count, text) order without re-rendering.
  std::vector<std::pair<int, lang::TermPtr>> keyed;
  keyed.reserve(uniq.size());
  for (const auto& [r, t] : uniq) {
    (void)r;
    keyed.emplace_back(lang::callCount(t), t);
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& x, const auto& y) {
                     return x.first < y.first;
                   });
  std::vector<lang::TermPtr> out;
  out.reserve(keyed.size());
  for (auto& [c, t] : keyed) {
    (void)c;
    out.push_back(std::move(t));
  }
  if (out.size() > cap) out.resize(cap);
  return out;
}

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

// Run the loop over a caller-owned builder (exposed for inspection tests).
inline Result synthesizeWith(smt::Oracle& oracle, construct::Build& b,
                             const Config& cfg = {}) {
  auto t0 = std::chrono::steady_clock::now();
  auto smt0 = oracle.stats();

  Result res;
  b.init();
  std::map<std::string, lang::TermPtr> uniq;
  for (int iter = 1; iter <= cfg.k; ++iter) {
    bool changed = b.expand(iter == cfg.k);
    if (!cfg.noPrune) reduce::pruneEngine(b);
    if (!cfg.noSimilarity) {
      auto e = reduce::inferSimilarity(b, cfg.simBudget);
      reduce::minimize(b, e);
    }
    for (const auto& s :
         extract(b, iter, cfg.cap, cfg.innerCap, res.stats.termsEnumerated))
      uniq.emplace(lang::render(s), s);
    if (cfg.first && !uniq.empty()) break;
    if (!changed) break;  // fixpoint: no deeper programs exist
  }
  // uniq iterates in render order; a stable sort on call count gives
  // (call count, text) order without re-rendering inside the comparator.
  std::vector<std::pair<int, lang::TermPtr>> keyed;
  keyed.reserve(uniq.size());
  for (const auto& [r, t] : uniq) {
    (void)r;
    keyed.emplace_back(lang::callCount(t), t);
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& x, const auto& y) {
                     return x.first < y.first;
                   });
  for (auto& [c, t] : keyed) {
    (void)c;
    res.solutions.push_back(std::move(t));
  }
  if (res.solutions.size() > cfg.cap) res.solutions.resize(cfg.cap);

  res.solved = !res.solutions.empty();
  auto smt1 = oracle.stats();
  res.stats.solved = res.solved;
  res.stats.timeS = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  res.stats.smtCalls = smt1.solverCalls - smt0.solverCalls;
  res.stats.smtTimeS = smt1.solverTimeS - smt0.solverTimeS;
  res.stats.merged = b.mergedCount();
  res.stats.qStatesMin = b.argStates().size() + b.funStates().size();
  res.stats.qStates = res.stats.qStatesMin + res.stats.merged;
  for (const auto& s : res.solutions)
    res.stats.solutionSizes.push_back(lang::callCount(s));
  return res;
}

inline Result synthesize(smt::Oracle& oracle, const lang::Library& lib,
                         const types::SynthesisQuery& query,
                         const Config& cfg = {}) {
  construct::Build b(oracle, lib, query, {cfg.enableIf});
  return synthesizeWith(oracle, b, cfg);
}

}  // namespace qsyn::synth
