#pragma once
// Qualified tree automata: finite tree automata whose transitions carry
// constraints over positions inside the accepted tree. A transition
//   f(q1, ..., qn) --psi--> q
// accepts a tree f(t1, ..., tn) only when each ti is accepted at qi *and*
// psi holds for the assembled tree. Atoms are syntactic equality between the
// subtrees at two positions and semantic entailment between the formulas at
// two positions. The bottom transition has the empty denotation.
//
// Positions are label paths resolved against concrete trees (labels come
// from each symbol's child labels, with numeric components allowed). States
// are hash-consed: one id per distinct construction key.

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "logic.hpp"
#include "smt.hpp"

namespace qsyn::qta {

using StateId = int32_t;
constexpr StateId kNoState = -1;

// ---------------------------------------------------------------------------
// Alphabet
// ---------------------------------------------------------------------------

struct Symbol {
  std::string name;
  std::vector<std::string> childLabels;  // size == arity
  // leaf payloads
  logic::FormulaPtr formula;  // formula leaf
  logic::SortPtr sort;        // sort leaf

  int arity() const { return static_cast<int>(childLabels.size()); }
};

using SymbolId = int32_t;

// ---------------------------------------------------------------------------
// Trees (elements of the denotation)
// ---------------------------------------------------------------------------

struct Tree;
using TreePtr = std::shared_ptr<const Tree>;

struct Tree {
  SymbolId sym;
  std::vector<TreePtr> children;
};

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

// One step of a position path: a child label or a 1-based child index.
struct PosStep {
  std::string label;  // empty => numeric
  int index = 0;
};

using Position = std::vector<PosStep>;

inline Position posPath(std::initializer_list<const char*> labels) {
  Position p;
  for (const char* l : labels) p.push_back({l, 0});
  return p;
}

inline std::string renderPosition(const Position& p) {
  std::string s;
  for (size_t i = 0; i < p.size(); ++i) {
    if (i) s += ".";
    s += p[i].label.empty() ? std::to_string(p[i].index) : p[i].label;
  }
  return s;
}

enum class CKind { True, False, SynEq, SemEnt, Not, And, Or };

struct Constraint;
using ConstraintPtr = std::shared_ptr<const Constraint>;

struct Constraint {
  CKind kind;
  Position p1, p2;                  // SynEq / SemEnt
  std::vector<ConstraintPtr> kids;  // Not(1), And/Or(2+)
};

inline ConstraintPtr cTrue() {
  static ConstraintPtr c = std::make_shared<Constraint>(Constraint{CKind::True, {}, {}, {}});
  return c;
}
inline ConstraintPtr cFalse() {
  static ConstraintPtr c = std::make_shared<Constraint>(Constraint{CKind::False, {}, {}, {}});
  return c;
}
inline ConstraintPtr cSynEq(Position a, Position b) {
  return std::make_shared<Constraint>(
      Constraint{CKind::SynEq, std::move(a), std::move(b), {}});
}
inline ConstraintPtr cSemEnt(Position a, Position b) {
  return std::make_shared<Constraint>(
      Constraint{CKind::SemEnt, std::move(a), std::move(b), {}});
}
inline ConstraintPtr cNot(ConstraintPtr a) {
  return std::make_shared<Constraint>(Constraint{CKind::Not, {}, {}, {std::move(a)}});
}
inline ConstraintPtr cAnd(ConstraintPtr a, ConstraintPtr b) {
  if (a->kind == CKind::True) return b;
  if (b->kind == CKind::True) return a;
  if (a->kind == CKind::False || b->kind == CKind::False) return cFalse();
  return std::make_shared<Constraint>(
      Constraint{CKind::And, {}, {}, {std::move(a), std::move(b)}});
}
inline ConstraintPtr cOr(ConstraintPtr a, ConstraintPtr b) {
  return std::make_shared<Constraint>(
      Constraint{CKind::Or, {}, {}, {std::move(a), std::move(b)}});
}

inline std::string renderConstraint(const ConstraintPtr& c) {
  switch (c->kind) {
    case CKind::True: return "true";
    case CKind::False: return "false";
    case CKind::SynEq:
      return renderPosition(c->p1) + " = " + renderPosition(c->p2);
    case CKind::SemEnt:
      return renderPosition(c->p1) + " |= " + renderPosition(c->p2);
    case CKind::Not: return "!(" + renderConstraint(c->kids[0]) + ")";
    case CKind::And:
      return "(" + renderConstraint(c->kids[0]) + " & " +
             renderConstraint(c->kids[1]) + ")";
    case CKind::Or:
      return "(" + renderConstraint(c->kids[0]) + " | " +
             renderConstraint(c->kids[1]) + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Transitions and the automaton
// ---------------------------------------------------------------------------

struct Transition {
  SymbolId sym;
  std::vector<StateId> children;
  ConstraintPtr guard;
  StateId target;
  bool bottom = false;  // the distinguished empty-denotation transition
};

// Entailment context shared by satisfies/denote/prune: the ambient facts
// plus a table of binder facts pulled in transitively when a formula
// mentions a binder.
struct EntailmentContext {
  smt::Oracle* oracle = nullptr;
  logic::TypingEnv base;
  std::map<std::string, logic::FormulaPtr> binderFacts;

  logic::TypingEnv envFor(const logic::FormulaPtr& a,
                          const logic::FormulaPtr& b) const {
    logic::TypingEnv env = base;
    std::set<std::string> done;
    std::vector<logic::FormulaPtr> work{a, b};
    while (!work.empty()) {
      auto f = work.back();
      work.pop_back();
      for (const auto& [n, s] : logic::freeVars(f)) {
        (void)s;
        if (!done.insert(n).second) continue;
        auto it = binderFacts.find(n);
        if (it != binderFacts.end()) {
          env.addFact(it->second);
          work.push_back(it->second);
        }
      }
    }
    return env;
  }

  bool entails(const logic::FormulaPtr& a, const logic::FormulaPtr& b) const {
    return oracle->entails(envFor(a, b), a, b);
  }
};

class Qta {
 public:
  // -- alphabet ---------------------------------------------------------
  SymbolId symbol(const std::string& name,
                  std::vector<std::string> childLabels = {}) {
    auto it = symbolKeys_.find(name);
    if (it != symbolKeys_.end()) return it->second;
    SymbolId id = static_cast<SymbolId>(symbols_.size());
    symbols_.push_back(Symbol{name, std::move(childLabels), nullptr, nullptr});
    symbolKeys_.emplace(name, id);
    return id;
  }
  SymbolId formulaLeaf(const logic::FormulaPtr& f) {
    std::string name = "phi{" + logic::render(f) + "}";
    SymbolId id = symbol(name);
    symbols_[id].formula = f;
    return id;
  }
  SymbolId sortLeaf(const logic::SortPtr& s) {
    std::string name = "sort{" + s->render() + "}";
    SymbolId id = symbol(name);
    symbols_[id].sort = s;
    return id;
  }
  const Symbol& sym(SymbolId id) const { return symbols_[static_cast<size_t>(id)]; }

  // -- states -----------------------------------------------------------
  // States are interned by key; creating twice returns the same id.
  StateId state(const std::string& key) {
    auto it = stateKeys_.find(key);
    if (it != stateKeys_.end()) return it->second;
    StateId id = static_cast<StateId>(stateNames_.size());
    stateNames_.push_back(key);
    incoming_.emplace_back();
    stateKeys_.emplace(key, id);
    return id;
  }
  bool hasState(const std::string& key) const { return stateKeys_.count(key) > 0; }
  StateId findState(const std::string& key) const {
    auto it = stateKeys_.find(key);
    return it == stateKeys_.end() ? kNoState : it->second;
  }
  const std::string& stateName(StateId q) const {
    return stateNames_[static_cast<size_t>(q)];
  }
  size_t stateCount() const { return stateNames_.size(); }

  // -- transitions --------------------------------------------------------
  int addTransition(SymbolId sym, std::vector<StateId> children,
                    ConstraintPtr guard, StateId target, bool bottom = false) {
    Transition t{sym, std::move(children), std::move(guard), target, bottom};
    int id = static_cast<int>(transitions_.size());
    transitions_.push_back(std::move(t));
    incoming_[static_cast<size_t>(target)].push_back(id);
    return id;
  }
  const Transition& transition(int id) const {
    return transitions_[static_cast<size_t>(id)];
  }
  Transition& transitionMut(int id) { return transitions_[static_cast<size_t>(id)]; }
  size_t transitionCount() const { return transitions_.size(); }
  const std::vector<int>& incoming(StateId q) const {
    return incoming_[static_cast<size_t>(q)];
  }

  std::vector<StateId>& finals() { return finals_; }
  const std::vector<StateId>& finals() const { return finals_; }

  int depth() const { return depth_; }
  void bumpDepth() { ++depth_; }

  // Rebuild incoming indices (after bulk edits).
  void reindex() {
    for (auto& v : incoming_) v.clear();
    for (size_t i = 0; i < transitions_.size(); ++i) {
      const auto& t = transitions_[i];
      if (t.target >= 0)
        incoming_[static_cast<size_t>(t.target)].push_back(static_cast<int>(i));
    }
  }

  // Remove transitions flagged for deletion (target == kNoState) and any
  // unproductive or final-unreachable states. Deleted states keep their ids
  // (interning stays stable) but lose all transitions.
  void normalize();

  std::string dump() const;

 private:
  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, SymbolId> symbolKeys_;
  std::vector<std::string> stateNames_;
  std::unordered_map<std::string, StateId> stateKeys_;
  std::vector<Transition> transitions_;
  std::vector<std::vector<int>> incoming_;
  std::vector<StateId> finals_;
  int depth_ = 0;
};

// ---------------------------------------------------------------------------
// Position resolution
// ---------------------------------------------------------------------------

struct UnresolvablePosition : std::runtime_error {
  explicit UnresolvablePosition(const std::string& p)
      : std::runtime_error("unresolvable position: " + p) {}
};

// Resolve a position against a concrete tree. Label steps use the symbol's
// child labels; a label missing on a type-abstraction node falls through to
// its body so positions stay valid across polymorphic wrappers.
inline TreePtr resolvePosition(const Qta& a, const TreePtr& t, const Position& p,
                               bool* ok = nullptr) {
  TreePtr cur = t;
  for (size_t i = 0; i < p.size(); ++i) {
    const PosStep& st = p[i];
    const Symbol& s = a.sym(cur->sym);
    int idx = -1;
    if (st.label.empty()) {
      idx = st.index - 1;
    } else {
      for (size_t c = 0; c < s.childLabels.size(); ++c)
        if (s.childLabels[c] == st.label) idx = static_cast<int>(c);
      if (idx < 0) {
        // transparent wrappers: descend into a child labeled "type"/"body"
        int through = -1;
        for (size_t c = 0; c < s.childLabels.size(); ++c)
          if (s.childLabels[c] == "body") through = static_cast<int>(c);
        if (through >= 0) {
          cur = cur->children[static_cast<size_t>(through)];
          --i;  // retry the same step one level down
          continue;
        }
      }
    }
    if (idx < 0 || idx >= static_cast<int>(cur->children.size())) {
      if (ok) {
        *ok = false;
        return nullptr;
      }
      throw UnresolvablePosition(renderPosition(p));
    }
    cur = cur->children[static_cast<size_t>(idx)];
  }
  if (ok) *ok = true;
  return cur;
}

inline std::string renderTree(const Qta& a, const TreePtr& t) {
  const Symbol& s = a.sym(t->sym);
  if (t->children.empty()) return s.name;
  std::string out = s.name + "(";
  for (size_t i = 0; i < t->children.size(); ++i) {
    if (i) out += ", ";
    out += renderTree(a, t->children[i]);
  }
  return out + ")";
}

// ---------------------------------------------------------------------------
// Constraint satisfaction
// ---------------------------------------------------------------------------

// Evaluate a constraint over a concrete tree. Positions that do not resolve
// make the enclosing atom false (callers that want the error instead use
// satisfies(), which throws).
inline bool evalConstraint(const Qta& a, const TreePtr& t, const ConstraintPtr& c,
                           const EntailmentContext& ctx, bool throwOnBadPos) {
  switch (c->kind) {
    case CKind::True: return true;
    case CKind::False: return false;
    case CKind::Not: return !evalConstraint(a, t, c->kids[0], ctx, throwOnBadPos);
    case CKind::And:
      return evalConstraint(a, t, c->kids[0], ctx, throwOnBadPos) &&
             evalConstraint(a, t, c->kids[1], ctx, throwOnBadPos);
    case CKind::Or:
      return evalConstraint(a, t, c->kids[0], ctx, throwOnBadPos) ||
             evalConstraint(a, t, c->kids[1], ctx, throwOnBadPos);
    case CKind::SynEq: {
      bool ok1 = true, ok2 = true;
      TreePtr t1 = resolvePosition(a, t, c->p1, throwOnBadPos ? nullptr : &ok1);
      TreePtr t2 = resolvePosition(a, t, c->p2, throwOnBadPos ? nullptr : &ok2);
      if (!ok1 || !ok2) return false;
      return renderTree(a, t1) == renderTree(a, t2);
    }
    case CKind::SemEnt: {
      bool ok1 = true, ok2 = true;
      TreePtr t1 = resolvePosition(a, t, c->p1, throwOnBadPos ? nullptr : &ok1);
      TreePtr t2 = resolvePosition(a, t, c->p2, throwOnBadPos ? nullptr : &ok2);
      if (!ok1 || !ok2) return false;
      const logic::FormulaPtr f1 = a.sym(t1->sym).formula;
      const logic::FormulaPtr f2 = a.sym(t2->sym).formula;
      if (!f1 || !f2) {
        if (throwOnBadPos)
          throw UnresolvablePosition(renderPosition(c->p1) + " (not a formula leaf)");
        return false;
      }
      return ctx.entails(f1, f2);
    }
  }
  return false;
}

// Public checker: positions in the constraint must resolve within t.
inline bool satisfies(const Qta& a, const TreePtr& t, const ConstraintPtr& c,
                      const EntailmentContext& ctx) {
  return evalConstraint(a, t, c, ctx, /*throwOnBadPos=*/true);
}

// ---------------------------------------------------------------------------
// Denotation
// ---------------------------------------------------------------------------

// All trees accepted at q with tree depth <= depthBound, constraint-filtered.
// Exponential in general; intended for tests and small automata.
inline std::vector<TreePtr> denoteState(const Qta& a, StateId q, int depthBound,
                                        const EntailmentContext& ctx,
                                        size_t limit = 100000) {
  if (depthBound < 0) return {};
  std::vector<TreePtr> out;
  for (int ti : a.incoming(q)) {
    const Transition& tr = a.transition(ti);
    if (tr.bottom) continue;
    if (tr.children.empty()) {
      auto leaf = std::make_shared<Tree>(Tree{tr.sym, {}});
      if (evalConstraint(a, leaf, tr.guard, ctx, false)) out.push_back(leaf);
      continue;
    }
    if (depthBound == 0) continue;
    std::vector<std::vector<TreePtr>> kid;
    bool feasible = true;
    for (StateId c : tr.children) {
      kid.push_back(denoteState(a, c, depthBound - 1, ctx, limit));
      if (kid.back().empty()) {
        feasible = false;
        break;
      }
    }
    if (!feasible) continue;
    std::vector<size_t> idx(kid.size(), 0);
    for (;;) {
      std::vector<TreePtr> kids;
      kids.reserve(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) kids.push_back(kid[i][idx[i]]);
      auto t = std::make_shared<Tree>(Tree{tr.sym, std::move(kids)});
      if (evalConstraint(a, t, tr.guard, ctx, false)) {
        out.push_back(t);
        if (out.size() >= limit) return out;
      }
      size_t i = 0;
      for (; i < idx.size(); ++i) {
        if (++idx[i] < kid[i].size()) break;
        idx[i] = 0;
      }
      if (i == idx.size()) break;
    }
  }
  return out;
}

// Final states with a non-empty (constraint-filtered) denotation.
inline std::vector<StateId> nonEmptyFinals(const Qta& a, int depthBound,
                                           const EntailmentContext& ctx) {
  std::vector<StateId> out;
  for (StateId q : a.finals()) {
    auto d = denoteState(a, q, depthBound, ctx, 1);  // early exit on witness
    if (!d.empty()) out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// normalize
// ---------------------------------------------------------------------------

inline void Qta::normalize() {
  size_t n = stateNames_.size();
  // productive: some non-bottom transition with all children productive
  std::vector<char> productive(n, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& t : transitions_) {
      if (t.bottom || t.target < 0) continue;
      if (productive[static_cast<size_t>(t.target)]) continue;
      if (t.guard->kind == CKind::False) continue;
      bool ok = true;
      for (StateId c : t.children) ok &= (c >= 0 && productive[static_cast<size_t>(c)]);
      if (ok) {
        productive[static_cast<size_t>(t.target)] = 1;
        changed = true;
      }
    }
  }
  // reachable from finals (downwards), when finals are declared
  std::vector<char> keep = productive;
  if (!finals_.empty()) {
    std::vector<char> reach(n, 0);
    std::vector<StateId> work(finals_.begin(), finals_.end());
    while (!work.empty()) {
      StateId q = work.back();
      work.pop_back();
      if (q < 0 || reach[static_cast<size_t>(q)]) continue;
      reach[static_cast<size_t>(q)] = 1;
      for (int ti : incoming_[static_cast<size_t>(q)]) {
        const auto& t = transitions_[static_cast<size_t>(ti)];
        if (t.bottom) continue;
        for (StateId c : t.children)
          if (c >= 0 && !reach[static_cast<size_t>(c)]) work.push_back(c);
      }
    }
    for (size_t i = 0; i < n; ++i) keep[i] = keep[i] && reach[i];
  }
  std::vector<Transition> kept;
  kept.reserve(transitions_.size());
  for (auto& t : transitions_) {
    if (t.bottom || t.target < 0) continue;
    if (t.guard->kind == CKind::False) continue;
    if (!keep[static_cast<size_t>(t.target)]) continue;
    bool ok = true;
    for (StateId c : t.children) ok &= (c >= 0 && keep[static_cast<size_t>(c)]);
    if (ok) kept.push_back(std::move(t));
  }
  transitions_ = std::move(kept);
  reindex();
}

// Count of states that still carry transitions (live states).
inline size_t liveStates(const Qta& a) {
  std::set<StateId> live;
  for (size_t i = 0; i < a.transitionCount(); ++i) {
    const auto& t = a.transition(static_cast<int>(i));
    live.insert(t.target);
    for (StateId c : t.children) live.insert(c);
  }
  return live.size();
}

// ---------------------------------------------------------------------------
// Deterministic dump
// ---------------------------------------------------------------------------

inline std::string Qta::dump() const {
  std::ostringstream out;
  out << "qta states=" << stateNames_.size()
      << " transitions=" << transitions_.size() << " depth=" << depth_ << "\n";
  out << "finals:";
  std::vector<StateId> fs = finals_;
  std::sort(fs.begin(), fs.end());
  for (StateId f : fs) out << " q" << f;
  out << "\n";
  std::vector<std::string> lines;
  for (const auto& t : transitions_) {
    std::ostringstream l;
    l << symbols_[static_cast<size_t>(t.sym)].name << "(";
    for (size_t i = 0; i < t.children.size(); ++i) {
      if (i) l << ",";
      l << "q" << t.children[i];
    }
    l << ") -> q" << t.target;
    if (t.bottom) l << " [bottom]";
    if (t.guard->kind != CKind::True) l << " where " << renderConstraint(t.guard);
    lines.push_back(l.str());
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& l : lines) out << l << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Intersections (the reduction primitives used by prune)
// ---------------------------------------------------------------------------

// Narrow a transition under one SynEq atom: replace the sub-automata at the
// two positions by their product. Only state-level prefixes are rewritten
// (fresh intermediate states are cloned along each path), so other
// transitions sharing the old states are unaffected. Returns false when the
// product is empty, in which case the transition should become bottom.
//
// The constraint itself stays on the transition: a product automaton bounds
// the *pairing* of choices, per-tree equality is still checked at
// denotation/extract time. Languages are preserved exactly.
bool intersectSyntactic(Qta& a, int transitionId, const Position& p1,
                        const Position& p2);

// Narrow a transition under one SemEnt atom: formula choices at p1 keep only
// those entailing some choice at p2 (and choices at p2 keep those entailed
// by some survivor at p1). Returns false when no entailing pair exists.
bool intersectSemantic(Qta& a, int transitionId, const Position& p1,
                       const Position& p2, const EntailmentContext& ctx);

namespace detail {

// Walk a position through *states* starting from a transition: returns the
// chain of (stateBefore, transitionsUsed) — here simplified: the set of
// states reachable at that position. For narrowing we handle the common case
// where every on-path state has deterministic child structure per symbol.
inline void statesAtPosition(const Qta& a, StateId q, const Position& p,
                             size_t step, std::set<StateId>& out) {
  if (step == p.size()) {
    out.insert(q);
    return;
  }
  const PosStep& st = p[step];
  for (int ti : a.incoming(q)) {
    const Transition& tr = a.transition(ti);
    if (tr.bottom) continue;
    const Symbol& s = a.sym(tr.sym);
    int idx = -1;
    if (st.label.empty()) {
      idx = st.index - 1;
    } else {
      for (size_t c = 0; c < s.childLabels.size(); ++c)
        if (s.childLabels[c] == st.label) idx = static_cast<int>(c);
      if (idx < 0) {
        for (size_t c = 0; c < s.childLabels.size(); ++c)
          if (s.childLabels[c] == "body") {
            statesAtPosition(a, tr.children[c], p, step, out);
          }
        continue;
      }
    }
    if (idx >= 0 && idx < static_cast<int>(tr.children.size()))
      statesAtPosition(a, tr.children[static_cast<size_t>(idx)], p, step + 1, out);
  }
}

inline std::set<StateId> positionStates(const Qta& a, const Transition& tr,
                                        const Position& p) {
  if (p.empty()) return {};
  const Symbol& s = a.sym(tr.sym);
  const PosStep& st = p[0];
  int idx = -1;
  if (st.label.empty()) {
    idx = st.index - 1;
  } else {
    for (size_t c = 0; c < s.childLabels.size(); ++c)
      if (s.childLabels[c] == st.label) idx = static_cast<int>(c);
  }
  std::set<StateId> out;
  if (idx < 0 || idx >= static_cast<int>(tr.children.size())) return out;
  statesAtPosition(a, tr.children[static_cast<size_t>(idx)],
                   Position(p.begin() + 1, p.end()), 0, out);
  return out;
}

// Product of two states: accepts exactly the intersection of tree languages
// (constraints carried along conjunctively). Memoized per call.
inline StateId productState(Qta& a, StateId s1, StateId s2,
                            std::map<std::pair<StateId, StateId>, StateId>& memo);

inline StateId productState(Qta& a, StateId s1, StateId s2,
                            std::map<std::pair<StateId, StateId>, StateId>& memo) {
  if (s1 == s2) return s1;
  auto key = std::make_pair(std::min(s1, s2), std::max(s1, s2));
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  StateId np = a.state("prod(" + a.stateName(key.first) + "*" +
                       a.stateName(key.second) + ")");
  memo.emplace(key, np);  // pre-insert to cut cycles
  // pair up same-symbol transitions
  std::vector<int> in1 = a.incoming(key.first), in2 = a.incoming(key.second);
  for (int i1 : in1) {
    for (int i2 : in2) {
      Transition t1 = a.transition(i1), t2 = a.transition(i2);
      if (t1.bottom || t2.bottom) continue;
      if (t1.sym != t2.sym) continue;
      std::vector<StateId> kids;
      kids.reserve(t1.children.size());
      for (size_t c = 0; c < t1.children.size(); ++c)
        kids.push_back(productState(a, t1.children[c], t2.children[c], memo));
      a.addTransition(t1.sym, std::move(kids), cAnd(t1.guard, t2.guard), np);
    }
  }
  return np;
}

// Clone the chain of states from a transition's child down a position path,
// substituting `replacement` at the end. Returns the new child state for the
// transition. Fans out over all on-path transitions.
inline StateId clonePath(Qta& a, StateId q, const Position& p, size_t step,
                         StateId replacement, std::map<std::string, StateId>& seen) {
  if (step == p.size()) return replacement;
  std::string key = "clone(" + a.stateName(q) + "@" +
                    renderPosition(Position(p.begin() + static_cast<long>(step), p.end())) +
                    "->" + a.stateName(replacement) + ")";
  auto it = seen.find(key);
  if (it != seen.end()) return it->second;
  StateId nq = a.state(key);
  seen.emplace(key, nq);
  const PosStep& st = p[step];
  std::vector<int> ins = a.incoming(q);
  for (int ti : ins) {
    Transition tr = a.transition(ti);
    if (tr.bottom) continue;
    const Symbol& s = a.sym(tr.sym);
    int idx = -1;
    bool through = false;
    if (st.label.empty()) {
      idx = st.index - 1;
    } else {
      for (size_t c = 0; c < s.childLabels.size(); ++c)
        if (s.childLabels[c] == st.label) idx = static_cast<int>(c);
      if (idx < 0) {
        for (size_t c = 0; c < s.childLabels.size(); ++c)
          if (s.childLabels[c] == "body") {
            idx = static_cast<int>(c);
            through = true;
          }
      }
    }
    if (idx < 0 || idx >= static_cast<int>(tr.children.size())) continue;
    std::vector<StateId> kids = tr.children;
    kids[static_cast<size_t>(idx)] =
        clonePath(a, tr.children[static_cast<size_t>(idx)], p,
                  through ? step : step + 1, replacement, seen);
    a.addTransition(tr.sym, std::move(kids), tr.guard, nq);
  }
  return nq;
}

}  // namespace detail

inline bool intersectSyntactic(Qta& a, int transitionId, const Position& p1,
                               const Position& p2) {
  Transition& tr = a.transitionMut(transitionId);
  auto st1 = detail::positionStates(a, tr, p1);
  auto st2 = detail::positionStates(a, tr, p2);
  if (st1.empty() || st2.empty()) return false;
  if (st1.size() != 1 || st2.size() != 1) return true;  // ambiguous: no narrowing
  StateId q1 = *st1.begin(), q2 = *st2.begin();
  if (q1 == q2) return true;
  std::map<std::pair<StateId, StateId>, StateId> memo;
  StateId prod = detail::productState(a, q1, q2, memo);
  if (a.incoming(prod).empty()) return false;
  std::map<std::string, StateId> seen;
  // rewrite both paths to land on the product
  auto rewrite = [&](const Position& p) {
    const PosStep& st = p[0];
    const Symbol& s = a.sym(tr.sym);
    int idx = -1;
    if (st.label.empty()) idx = st.index - 1;
    else
      for (size_t c = 0; c < s.childLabels.size(); ++c)
        if (s.childLabels[c] == st.label) idx = static_cast<int>(c);
    if (idx < 0 || idx >= static_cast<int>(tr.children.size())) return;
    StateId child = tr.children[static_cast<size_t>(idx)];
    tr.children[static_cast<size_t>(idx)] =
        detail::clonePath(a, child, p, 1, prod, seen);
  };
  rewrite(p1);
  rewrite(p2);
  a.reindex();
  return true;
}

inline bool intersectSemantic(Qta& a, int transitionId, const Position& p1,
                              const Position& p2, const EntailmentContext& ctx) {
  const Transition& tr = a.transition(transitionId);
  auto st1 = detail::positionStates(a, tr, p1);
  auto st2 = detail::positionStates(a, tr, p2);
  if (st1.empty() || st2.empty()) return false;
  // Collect formula choices on each side.
  auto choices = [&](const std::set<StateId>& sts) {
    std::vector<std::pair<StateId, int>> out;  // (state, transition id)
    for (StateId q : sts)
      for (int ti : a.incoming(q)) {
        const Transition& t = a.transition(ti);
        if (!t.bottom && a.sym(t.sym).formula) out.emplace_back(q, ti);
      }
    return out;
  };
  auto c1 = choices(st1), c2 = choices(st2);
  if (c1.empty() || c2.empty()) return false;
  bool any = false;
  for (const auto& [q1, t1] : c1) {
    const logic::FormulaPtr f1 = a.sym(a.transition(t1).sym).formula;
    bool witness = false;
    for (const auto& [q2, t2] : c2) {
      const logic::FormulaPtr f2 = a.sym(a.transition(t2).sym).formula;
      if (ctx.entails(f1, f2)) {
        witness = true;
        break;
      }
    }
    any |= witness;
  }
  return any;
}

}  // namespace qsyn::qta
