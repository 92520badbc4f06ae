#pragma once
// Builds the constrained tree automaton for a synthesis query over a
// component library.
//
// States are keyed by the *resolved* refinement of the values they denote:
// every term whose post-condition (with formals and the value variable
// substituted out) renders identically shares one state. Each non-variable
// term state owns a canonical binder; the binder's fact (its post-condition)
// lives in a global table so entailment queries can close over it
// transitively. This keeps entailment checks per-state rather than per-term:
// any two terms of a state satisfy exactly the same formulas.
//
// Construction is staged:
//   init()    leaf states for query variables, monomorphized component
//             states, constants, the goal state and initial goal edges.
//   expand()  one round of application transitions: every function state
//             (component or partial application) applied to every argument
//             state that existed before the round. Partial applications
//             complete within the round, so one round adds exactly one level
//             of call nesting.
//
// Polymorphic components are monomorphized lazily in two stages: stage one
// enumerates sort instantiations syntactically reachable from the query
// (result sorts that something needs, argument sorts that something can
// produce); stage two keeps only instantiations whose preconditions some
// available value can meet semantically.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "lang.hpp"
#include "logic.hpp"
#include "qta.hpp"
#include "smt.hpp"
#include "types.hpp"

namespace qsyn::construct {

inline const char* kNu = "%nu";  // distinguished value variable in stored posts

struct Options {
  bool enableIf = false;
};

struct StateMeta {
  types::RefTypePtr type;   // Base for term states, Arrow for function states
  std::string binder;       // canonical binder (non-variable term states)
  logic::ExprPtr actual;    // expression substituted for a formal on apply
  std::string display;      // component / query variable name for leaves
  bool isVar = false;
  int depthCreated = 0;
  qta::StateId tyQ = qta::kNoState;  // cached type-subautomaton entry
};

// How to rebuild terms from a transition.
struct Recipe {
  enum Kind { Leaf, App, If } kind = Leaf;
  std::string name;  // Leaf: variable or component name
  qta::StateId fun = qta::kNoState, arg = qta::kNoState;
  qta::StateId cond = qta::kNoState, thenS = qta::kNoState,
               elseS = qta::kNoState;
};

// A monomorphic component instance.
struct Instantiation {
  std::string component;
  std::map<std::string, logic::SortPtr> subst;  // original tyvar -> sort
  types::RefTypePtr type;                       // instantiated, foralls gone
  std::string render() const {
    std::string s = component;
    for (const auto& [tv, so] : subst) s += " " + tv + ":=" + so->render();
    return s;
  }
};

struct MonoReport {
  std::vector<std::string> stage1;  // syntactically reachable instances
  std::vector<std::string> stage2;  // semantically viable instances
};

// ---------------------------------------------------------------------------
// Stage 1: syntactic instantiation enumeration
// ---------------------------------------------------------------------------

namespace detail {

inline std::string freshTyVarName(const std::string& comp, const std::string& tv) {
  return tv + "#" + comp;
}

// Collect every Base domain sort of an arrow chain.
inline void domainSorts(const types::RefTypePtr& t,
                        std::vector<logic::SortPtr>& out) {
  auto cur = types::stripForall(t);
  while (cur->kind == types::TyKind::Arrow) {
    if (cur->in->kind == types::TyKind::Base) out.push_back(cur->in->sort);
    cur = cur->out;
  }
}

inline void collectTyVars(const logic::SortPtr& s, std::set<std::string>& out) {
  if (s->kind == logic::SortKind::TyVar) out.insert(s->name);
  for (const auto& a : s->args) collectTyVars(a, out);
}

}  // namespace detail

// Sorts the query can consume or produce, and the component instantiations
// reachable over them. The fixpoint starts from the goal and argument sorts;
// each instantiation whose result sort is already useful contributes its
// domain sorts. Component type variables undetermined by the result range
// over the useful sorts seen so far.
inline std::vector<Instantiation> stage1Instantiations(
    const lang::Library& lib, const types::SynthesisQuery& query,
    size_t sortCap = 64) {
  std::map<std::string, logic::SortPtr> useful;      // demanded somewhere
  std::map<std::string, logic::SortPtr> producible;  // some value exists
  auto addSort = [&](const logic::SortPtr& s) {
    if (useful.size() < sortCap) useful.emplace(s->render(), s);
  };
  auto addProducible = [&](const logic::SortPtr& s) {
    if (producible.size() < sortCap) producible.emplace(s->render(), s);
  };
  if (auto g = query.result; g && g->kind == types::TyKind::Base)
    addSort(g->sort);
  for (const auto& [n, t] : query.args) {
    (void)n;
    if (t->kind == types::TyKind::Base) {
      addSort(t->sort);
      addProducible(t->sort);
    }
  }

  std::vector<Instantiation> out;
  std::set<std::string> seen;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& comp : lib.components) {
      // freshen component tyvars so they never collide with query rigids
      std::vector<std::string> tvs;
      auto body = types::stripForall(comp.type, &tvs);
      std::map<std::string, logic::SortPtr> freshen;
      for (const auto& tv : tvs)
        freshen[tv] = logic::tyVarSort(detail::freshTyVarName(comp.name, tv));
      auto fresh = types::instantiate(body, freshen);
      auto res = types::resultBase(fresh);
      if (!res) continue;

      auto tryInst = [&](std::map<std::string, logic::SortPtr> theta) {
        // enumerate candidates for tyvars the result did not determine
        std::set<std::string> open;
        std::vector<logic::SortPtr> doms;
        detail::domainSorts(fresh, doms);
        for (const auto& d : doms)
          detail::collectTyVars(logic::applySortSubst(d, theta), open);
        std::vector<std::string> openV(open.begin(), open.end());
        std::vector<std::map<std::string, logic::SortPtr>> combos{theta};
        // tyvars the result leaves open range over the producible sorts:
        // an argument of that sort has to come from somewhere
        for (const auto& tv : openV) {
          std::vector<std::map<std::string, logic::SortPtr>> next;
          for (const auto& c : combos)
            for (const auto& [r, s] : producible) {
              (void)r;
              std::set<std::string> inner;
              detail::collectTyVars(s, inner);
              bool rigidOnly = true;
              for (const auto& iv : inner)
                rigidOnly &= std::count(query.rigidTyVars.begin(),
                                        query.rigidTyVars.end(), iv) > 0;
              if (!rigidOnly) continue;
              auto c2 = c;
              c2[tv] = s;
              next.push_back(std::move(c2));
            }
          combos = std::move(next);
          if (combos.size() > 256) combos.resize(256);
        }
        for (const auto& theta2 : combos) {
          Instantiation inst;
          inst.component = comp.name;
          // report under the original tyvar names
          for (const auto& tv : tvs) {
            auto fn = detail::freshTyVarName(comp.name, tv);
            auto it = theta2.find(fn);
            if (it != theta2.end()) inst.subst[tv] = it->second;
          }
          inst.type = types::instantiate(fresh, theta2);
          std::string key = inst.render();
          if (!seen.insert(key).second) continue;
          out.push_back(inst);
          changed = true;
          if (auto rb = types::resultBase(inst.type)) {
            std::set<std::string> rtv;
            detail::collectTyVars(rb->sort, rtv);
            bool ground = true;
            for (const auto& rv : rtv)
              ground &= std::count(query.rigidTyVars.begin(),
                                   query.rigidTyVars.end(), rv) > 0;
            if (ground && !producible.count(rb->sort->render())) {
              addProducible(rb->sort);
            }
          }
          std::vector<logic::SortPtr> ds;
          detail::domainSorts(inst.type, ds);
          for (const auto& d : ds) {
            std::set<std::string> leftover;
            detail::collectTyVars(d, leftover);
            bool ground = true;
            for (const auto& lv : leftover)
              ground &= std::count(query.rigidTyVars.begin(),
                                   query.rigidTyVars.end(), lv) > 0;
            if (ground && !useful.count(d->render())) {
              addSort(d);
              changed = true;
            }
          }
        }
      };

      for (const auto& [r, s] : useful) {
        (void)r;
        std::map<std::string, logic::SortPtr> theta;
        if (logic::unifySorts(res->sort, s, theta)) tryInst(std::move(theta));
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.render() < b.render();
  });
  return out;
}

// ---------------------------------------------------------------------------
// The builder
// ---------------------------------------------------------------------------

namespace detail {

inline void flattenConjuncts(const logic::FormulaPtr& f,
                             std::vector<logic::FormulaPtr>& out) {
  if (f->kind == logic::FormulaKind::And) {
    flattenConjuncts(f->kids[0], out);
    flattenConjuncts(f->kids[1], out);
  } else if (f->kind != logic::FormulaKind::True) {
    out.push_back(f);
  }
}

// Replace whole sub-expressions (matched by their render) throughout a
// formula. Opaque clauses are left alone; a caller that needs every
// occurrence gone checks the free variables of the result.
inline logic::ExprPtr rewriteExpr(
    const logic::ExprPtr& e, const std::map<std::string, logic::ExprPtr>& m) {
  if (auto it = m.find(logic::renderExpr(e)); it != m.end()) return it->second;
  if (e->args.empty()) return e;
  auto copy = std::make_shared<logic::Expr>(*e);
  for (auto& a : copy->args) a = rewriteExpr(a, m);
  return copy;
}

inline logic::FormulaPtr rewriteFormula(
    const logic::FormulaPtr& f, const std::map<std::string, logic::ExprPtr>& m) {
  switch (f->kind) {
    case logic::FormulaKind::Cmp:
      return logic::mkCmp(f->op, rewriteExpr(f->lhs, m), rewriteExpr(f->rhs, m));
    case logic::FormulaKind::BoolAtom:
      return logic::mkBoolAtom(rewriteExpr(f->atom, m));
    case logic::FormulaKind::Not:
      return logic::mkNot(rewriteFormula(f->kids[0], m));
    case logic::FormulaKind::And:
    case logic::FormulaKind::Or:
    case logic::FormulaKind::Implies:
    case logic::FormulaKind::Iff:
      return logic::mkBinary(f->kind, rewriteFormula(f->kids[0], m),
                             rewriteFormula(f->kids[1], m));
    default:
      return f;  // True/False/Opaque
  }
}

}  // namespace detail

class Build {
 public:
  Build(smt::Oracle& oracle, lang::Library lib, types::SynthesisQuery query,
        Options opt = {})
      : lib_(std::move(lib)), query_(std::move(query)), opt_(opt) {
    ctx_.oracle = &oracle;
    ctx_.base = query_.baseEnv();
    appSym_ = a_.symbol("app", {"type", "fun", "arg"});
    ifSym_ = a_.symbol("if", {"type", "cond", "then", "else"});
    goalSym_ = a_.symbol("goal", {"type", "term"});
  }

  qta::Qta& automaton() { return a_; }
  const qta::Qta& automaton() const { return a_; }
  qta::EntailmentContext& ctx() { return ctx_; }
  const StateMeta& meta(qta::StateId q) const { return meta_.at(q); }
  const std::map<int, Recipe>& recipes() const { return recipes_; }
  qta::StateId goalState() const { return goal_; }
  const std::vector<qta::StateId>& argStates() const { return argStates_; }
  const std::vector<qta::StateId>& funStates() const { return funStates_; }
  const std::vector<qta::StateId>& newStatesLastRound() const {
    return newLastRound_;
  }
  const types::SynthesisQuery& query() const { return query_; }
  const lang::Library& library() const { return lib_; }

  void init() {
    // goal state + goal type
    goal_ = a_.state("GOAL");
    a_.finals().push_back(goal_);
    goalRef_ = canonicalPost(query_.result);
    goalSort_ = query_.result->sort;
    goalType_ = typeState(
        types::mkBase(kNu, query_.result->sort, goalRef_));

    // query variables: self-aware posts so each variable keeps its identity
    for (const auto& [n, t] : query_.args) {
      if (t->kind != types::TyKind::Base) continue;
      auto v = logic::mkVar(n, t->sort);
      auto nu = logic::mkVar(kNu, t->sort);
      auto post = logic::mkAnd(canonicalPost(t),
                               logic::mkCmp(logic::CmpOp::Eq, nu, v));
      qta::StateId q = a_.state("E:" + t->sort->render() + "|" +
                                logic::render(post));
      StateMeta m;
      m.type = types::mkBase(kNu, t->sort, post);
      m.actual = v;
      m.display = n;
      m.isVar = true;
      meta_.emplace(q, std::move(m));
      int ti = a_.addTransition(a_.symbol("var:" + n, {"type"}),
                                {typeState(meta_.at(q).type)}, qta::cTrue(), q);
      Recipe r;
      r.name = n;
      recipes_[ti] = r;
      argStates_.push_back(q);
      addGoalEdge(q);
    }

    // monomorphized components: arrow instances become function states,
    // nullary instances become constant term states
    for (const auto& inst : stage1Instantiations(lib_, query_)) {
      if (inst.type->kind == types::TyKind::Arrow) {
        std::string key = "C:" + inst.component + "|" + types::render(inst.type);
        if (a_.hasState(key)) continue;
        qta::StateId q = a_.state(key);
        StateMeta m;
        m.type = inst.type;
        m.display = inst.component;
        meta_.emplace(q, std::move(m));
        int ti = a_.addTransition(
            a_.symbol("comp:" + inst.component + "@" + types::render(inst.type),
                      {"type"}),
            {typeState(inst.type)}, qta::cTrue(), q);
        Recipe r;
        r.name = inst.component;
        recipes_[ti] = r;
        funStates_.push_back(q);
      } else if (inst.type->kind == types::TyKind::Base) {
        qta::StateId q = termState(inst.type->sort, canonicalPost(inst.type), 0);
        std::string sym = "const:" + inst.component + "@" + inst.type->sort->render();
        int ti = a_.addTransition(a_.symbol(sym, {"type"}),
                                  {typeState(meta_.at(q).type)}, qta::cTrue(), q);
        Recipe r;
        r.name = inst.component;
        recipes_[ti] = r;
      }
    }
    flushNewArgs();
  }

  // One application round. Returns whether anything new appeared.
  //
  // On the final round of a k-bounded run nothing built here is ever applied
  // again, so states whose sort differs from the goal's cannot contribute to
  // any accepted program; they (and function chains that can only end in
  // them) are skipped. Goal-sorted results built from constructor-frame
  // components are additionally checked against the goal up front (an exact
  // decomposition, see goalFrameVerdict) so hopeless combinations never
  // materialize.
  bool expand(bool finalRound = false) {
    a_.bumpDepth();
    final_ = finalRound;
    newLastRound_.clear();
    size_t transBefore = a_.transitionCount();
    std::vector<qta::StateId> args = argStates_;  // snapshot
    // queue over function states; partials created this round join in
    for (size_t fi = 0; fi < funStates_.size(); ++fi) {
      qta::StateId f = funStates_[fi];
      for (qta::StateId arg : args) tryApply(f, arg);
    }
    if (opt_.enableIf) expandIf(args);
    flushNewArgs();
    final_ = false;
    return a_.transitionCount() != transBefore;
  }

  // Stage 2 of monomorphization: keep instantiations whose Base
  // preconditions some available value meets. Available values are the
  // query variables, constants, and result values of other instances.
  MonoReport monoReport() {
    MonoReport rep;
    auto insts = stage1Instantiations(lib_, query_);
    // candidate value types by sort
    std::vector<types::RefTypePtr> values;
    for (const auto& [n, t] : query_.args) {
      (void)n;
      if (t->kind == types::TyKind::Base) values.push_back(t);
    }
    for (const auto& inst : insts)
      if (auto r = types::resultBase(inst.type)) values.push_back(r);
    for (const auto& inst : insts) {
      rep.stage1.push_back(inst.render());
      bool viable = true;
      auto cur = types::stripForall(inst.type);
      while (cur->kind == types::TyKind::Arrow && viable) {
        if (cur->in->kind == types::TyKind::Base) {
          bool anySource = false;
          for (const auto& v : values) {
            if (v->sort->render() != cur->in->sort->render()) continue;
            if (types::subtypeBase(*ctx_.oracle, ctx_.base, v, cur->in)) {
              anySource = true;
              break;
            }
          }
          viable &= anySource;
        }
        cur = cur->out;
      }
      if (viable) rep.stage2.push_back(inst.render());
    }
    return rep;
  }

  // The resolved post of a term state (over the distinguished value var).
  logic::FormulaPtr statePost(qta::StateId q) const {
    return meta_.at(q).type->ref;
  }

  // ---- goal acceptance ------------------------------------------------
  //
  // A term state is accepted at the goal iff its post entails the goal
  // refinement. When the post is a *constructor frame* — every conjunct
  // mentioning the value variable has the shape proj(%nu) = v for distinct
  // projections proj and plain variables v — the check decomposes exactly:
  // substituting the frame equations into each goal conjunct eliminates the
  // value variable, and because the value sort is uninterpreted in the
  // emitted theory, any model of the decomposed obligations extends to one
  // of the original formulas (pick a fresh element for %nu and define the
  // projections pointwise). The decomposed obligations mention only one
  // frame variable each in practice, so the solver cache collapses them
  // across the quadratically many constructor combinations.

  // Does this term state's post satisfy the goal? Exact; memoized.
  bool goalAccepts(qta::StateId q) {
    auto it = goalVerdict_.find(q);
    if (it != goalVerdict_.end()) return it->second != 0;
    bool ok = goalPostAccepts(statePost(q));
    goalVerdict_.emplace(q, ok ? 1 : 0);
    return ok;
  }

  // The solver questions goalAccepts(q) may ask, for batched prefetching.
  std::vector<smt::Oracle::Query> goalQueries(qta::StateId q) const {
    if (goalVerdict_.count(q)) return {};  // already decided, nothing to ask
    auto post = statePost(q);
    auto split = frameSplit(post);
    std::vector<smt::Oracle::Query> out;
    if (split.ok) {
      for (const auto& g : split.obligations)
        out.push_back({ctx_.envFor(split.residual, g), split.residual, g});
    } else {
      out.push_back({ctx_.envFor(post, goalRef_), post, goalRef_});
    }
    return out;
  }

  // union-find style merge support used by minimization: redirect every
  // occurrence of `loser` to `survivor` (children and targets), then drop
  // duplicate transitions.
  void mergeState(qta::StateId loser, qta::StateId survivor) {
    for (size_t i = 0; i < a_.transitionCount(); ++i) {
      auto& t = a_.transitionMut(static_cast<int>(i));
      if (t.target == loser) t.target = survivor;
      for (auto& c : t.children)
        if (c == loser) c = survivor;
    }
    a_.reindex();
    auto drop = [&](std::vector<qta::StateId>& v) {
      v.erase(std::remove(v.begin(), v.end(), loser), v.end());
    };
    drop(argStates_);
    drop(funStates_);
    drop(newLastRound_);
    merged_.emplace(loser, survivor);
  }

  size_t mergedCount() const { return merged_.size(); }

 private:
  // Split a post into constructor-frame equations plus a value-variable-free
  // residual, and rewrite the goal conjuncts through the frame. ok is false
  // when the post is not frame-shaped or a goal conjunct survives with the
  // value variable still in it.
  struct FrameSplit {
    bool ok = false;
    logic::FormulaPtr residual;
    std::vector<logic::FormulaPtr> obligations;  // rewritten goal conjuncts
  };

  FrameSplit frameSplit(const logic::FormulaPtr& post) const {
    FrameSplit out;
    // Only sorts emitted as uninterpreted SMT sorts admit the fresh-element
    // model extension that makes the decomposition exact.
    auto sk = query_.result->sort->kind;
    if (sk == logic::SortKind::Int || sk == logic::SortKind::Bool ||
        sk == logic::SortKind::Char)
      return out;
    std::vector<logic::FormulaPtr> cs;
    detail::flattenConjuncts(post, cs);
    std::map<std::string, logic::ExprPtr> frame;
    out.residual = logic::mkTrue();
    auto isProj = [](const logic::ExprPtr& e) {
      return e->kind == logic::ExprKind::PredApp && e->args.size() == 1 &&
             e->args[0]->kind == logic::ExprKind::Var &&
             e->args[0]->name == kNu;
    };
    auto isPlainVar = [](const logic::ExprPtr& e) {
      return e->kind == logic::ExprKind::Var && e->name != kNu;
    };
    for (const auto& c : cs) {
      const logic::ExprPtr* app = nullptr;
      const logic::ExprPtr* var = nullptr;
      if (c->kind == logic::FormulaKind::Cmp && c->op == logic::CmpOp::Eq) {
        if (isProj(c->lhs) && isPlainVar(c->rhs)) {
          app = &c->lhs;
          var = &c->rhs;
        } else if (isProj(c->rhs) && isPlainVar(c->lhs)) {
          app = &c->rhs;
          var = &c->lhs;
        }
      }
      if (app) {
        if (!frame.emplace(logic::renderExpr(*app), *var).second) return out;
      } else if (logic::freeVars(c).count(kNu)) {
        return out;  // a non-frame constraint on the value variable
      } else {
        out.residual = logic::mkAnd(out.residual, c);
      }
    }
    if (frame.empty()) return out;
    std::vector<logic::FormulaPtr> gs;
    detail::flattenConjuncts(goalRef_, gs);
    for (const auto& g : gs) {
      auto g2 = detail::rewriteFormula(g, frame);
      if (logic::freeVars(g2).count(kNu)) return out;
      out.obligations.push_back(g2);
    }
    out.ok = true;
    return out;
  }

  bool goalPostAccepts(const logic::FormulaPtr& post) const {
    auto split = frameSplit(post);
    if (split.ok) {
      for (const auto& g : split.obligations)
        if (!ctx_.entails(split.residual, g)) return false;
      return true;
    }
    return ctx_.entails(post, goalRef_);
  }

  // Per-function-state frame analysis for the final-round short-circuit,
  // computed once: the decomposed goal obligations of the application
  // result, each classified by whether it involves the function's last
  // formal. Obligation verdicts that do not involve the formal are shared
  // by every argument, so a quadratic family of hopeless combinations costs
  // one solver call.
  struct FrameInfo {
    bool ok = false;
    logic::FormulaPtr residual;
    std::vector<logic::FormulaPtr> obligations;
    std::vector<bool> dep;            // mentions the last formal?
    std::vector<signed char> indep;   // verdict for !dep entries; -1 unknown
    std::vector<std::string> obligationKeys;  // memo keys for dep entries
  };

  bool finalFramePass(qta::StateId f, const StateMeta& fm,
                      const StateMeta& am) {
    auto it = frameInfo_.find(f);
    if (it == frameInfo_.end()) {
      FrameInfo info;
      auto split = frameSplit(canonicalPost(fm.type->out));
      if (split.ok) {
        info.ok = true;
        info.residual = split.residual;
        info.obligations = std::move(split.obligations);
        const std::string& formal = fm.type->formal;
        bool residualDep = logic::freeVars(info.residual).count(formal) > 0;
        for (const auto& g : info.obligations) {
          info.dep.push_back(residualDep ||
                             logic::freeVars(g).count(formal) > 0);
          info.obligationKeys.push_back(logic::render(info.residual) + "#" +
                                        logic::render(g) + "|" + formal);
        }
        info.indep.assign(info.obligations.size(), -1);
      }
      it = frameInfo_.emplace(f, std::move(info)).first;
    }
    FrameInfo& info = it->second;
    if (!info.ok) return true;  // decided at extraction instead
    for (size_t i = 0; i < info.obligations.size(); ++i) {
      if (!info.dep[i]) {
        if (info.indep[i] < 0)
          info.indep[i] =
              ctx_.entails(info.residual, info.obligations[i]) ? 1 : 0;
        if (info.indep[i] == 0) return false;
      } else {
        // The same (obligation, argument) pair recurs across every partial
        // sharing the obligation's shape, so the verdict is memoized on the
        // rendered pair rather than re-substituted per call.
        std::string key = info.obligationKeys[i];
        key += '@';
        key += logic::renderExpr(am.actual);
        auto [mit, fresh] = depMemo_.try_emplace(std::move(key), -1);
        if (mit->second < 0) {
          std::map<std::string, logic::ExprPtr> sub{
              {fm.type->formal, am.actual}};
          auto lhs = logic::substitute(info.residual, sub);
          auto rhs = logic::substitute(info.obligations[i], sub);
          mit->second = ctx_.entails(lhs, rhs) ? 1 : 0;
        }
        if (mit->second == 0) return false;
      }
    }
    return true;
  }

  // Normalize a Base type's refinement onto the distinguished value var.
  logic::FormulaPtr canonicalPost(const types::RefTypePtr& b) const {
    if (b->binder == kNu) return b->ref;
    return logic::substituteVar(b->ref, b->binder, logic::mkVar(kNu, b->sort));
  }

  qta::StateId termState(const logic::SortPtr& sort, const logic::FormulaPtr& post,
                         int depth) {
    std::string key = "E:" + sort->render() + "|" + logic::render(post);
    if (a_.hasState(key)) return a_.findState(key);
    qta::StateId q = a_.state(key);
    StateMeta m;
    m.type = types::mkBase(kNu, sort, post);
    m.binder = "t" + std::to_string(++binderCounter_);
    m.actual = logic::mkVar(m.binder, sort);
    m.depthCreated = depth;
    ctx_.binderFacts[m.binder] =
        logic::substituteVar(post, kNu, logic::mkVar(m.binder, sort));
    meta_.emplace(q, std::move(m));
    pendingArgs_.push_back(q);
    newLastRound_.push_back(q);
    return q;
  }

  // Rename every Base binder to the distinguished value variable so the
  // formulas stored in type trees are directly comparable across states.
  types::RefTypePtr normalizeTy(const types::RefTypePtr& t) const {
    if (t->kind == types::TyKind::Base)
      return t->binder == kNu ? t
                              : types::mkBase(kNu, t->sort, canonicalPost(t));
    if (t->kind == types::TyKind::Arrow)
      return types::mkArrow(t->formal, normalizeTy(t->in), normalizeTy(t->out));
    return t;
  }

  // Type sub-automaton: ty(var, base, ref) for Base, ty->(in, out) for
  // Arrow. Interned by the type's render.
  qta::StateId typeState(const types::RefTypePtr& raw) {
    auto t = normalizeTy(raw);
    std::string key = "T:" + types::render(t);
    if (a_.hasState(key)) return a_.findState(key);
    qta::StateId q = a_.state(key);
    if (t->kind == types::TyKind::Base) {
      qta::StateId qv = a_.state("BV:" + t->binder);
      if (a_.incoming(qv).empty())
        a_.addTransition(a_.symbol("bv:" + t->binder), {}, qta::cTrue(), qv);
      qta::StateId qs = a_.state("S:" + t->sort->render());
      if (a_.incoming(qs).empty())
        a_.addTransition(a_.sortLeaf(t->sort), {}, qta::cTrue(), qs);
      qta::StateId qr = a_.state("F:" + logic::render(t->ref));
      if (a_.incoming(qr).empty())
        a_.addTransition(a_.formulaLeaf(t->ref), {}, qta::cTrue(), qr);
      a_.addTransition(a_.symbol("ty", {"var", "base", "ref"}), {qv, qs, qr},
                       qta::cTrue(), q);
    } else if (t->kind == types::TyKind::Arrow) {
      qta::StateId qi = typeState(t->in);
      qta::StateId qo = typeState(t->out);
      a_.addTransition(a_.symbol("ty->", {"in", "out"}), {qi, qo}, qta::cTrue(),
                       q);
    }
    return q;
  }

  void addGoalEdge(qta::StateId term) {
    const StateMeta& m = meta_.at(term);
    if (m.type->sort->render() != query_.result->sort->render()) return;
    std::string key = "G:" + a_.stateName(term);
    if (!goalSeen_.insert(key).second) return;
    auto guard = qta::cSemEnt(qta::posPath({"term", "type", "ref"}),
                              qta::posPath({"type", "ref"}));
    a_.addTransition(goalSym_, {goalType_, term}, guard, goal_);
  }

  void flushNewArgs() {
    for (qta::StateId q : pendingArgs_) {
      argStates_.push_back(q);
      addGoalEdge(q);
    }
    pendingArgs_.clear();
  }

  void tryApply(qta::StateId f, qta::StateId argQ) {
    const StateMeta& fm = meta_.at(f);  // std::map: stable across inserts
    if (fm.type->kind != types::TyKind::Arrow) return;
    const types::RefTypePtr in = fm.type->in;
    if (in->kind != types::TyKind::Base) return;  // first-order domains only
    const StateMeta& am = meta_.at(argQ);
    if (in->sort != am.type->sort) return;  // sorts are interned
    if (!appSeen_.insert({f, argQ}).second) return;

    // precondition check becomes a constraint; pruning resolves it later
    qta::ConstraintPtr guard = qta::cTrue();
    if (in->ref->kind != logic::FormulaKind::True) {
      guard = qta::cSemEnt(qta::posPath({"arg", "type", "ref"}),
                           qta::posPath({"fun", "type", "in", "ref"}));
    }
    // Final round: results that cannot reach the goal are never built. For
    // Base results that means a sort mismatch or a failed constructor-frame
    // precheck; for partials, an ultimate result sort mismatch.
    if (final_) {
      const types::RefTypePtr& outTy = fm.type->out;
      auto ult = outTy->kind == types::TyKind::Base ? outTy
                                                    : types::resultBase(outTy);
      if (!ult || ult->sort != goalSort_) return;
      if (outTy->kind == types::TyKind::Base && !finalFramePass(f, fm, am))
        return;
    }
    auto remaining =
        types::substituteType(fm.type->out, {{fm.type->formal, am.actual}});
    qta::StateId target;
    if (remaining->kind == types::TyKind::Base) {
      target = termState(remaining->sort, canonicalPost(remaining), a_.depth());
      // A frame-gated final-round survivor already proved every goal
      // obligation, so the extraction-time goal check is pre-answered.
      if (final_) {
        auto fit = frameInfo_.find(f);
        if (fit != frameInfo_.end() && fit->second.ok)
          goalVerdict_.emplace(target, 1);
      }
    } else {
      std::string key = "P:" + fm.display + "|" + types::render(remaining);
      bool fresh = !a_.hasState(key);
      target = a_.state(key);
      if (fresh) {
        StateMeta m;
        m.type = remaining;
        m.display = fm.display;
        m.depthCreated = a_.depth();
        meta_.emplace(target, std::move(m));
        funStates_.push_back(target);  // joins the round's queue
      }
    }
    // The transition's type child carries the *resolved* type: exact by
    // construction, so no output-side constraint is needed. The type state
    // is cached per target: re-rendering the type key dominates otherwise.
    StateMeta& tm = meta_.at(target);
    if (tm.tyQ == qta::kNoState) tm.tyQ = typeState(tm.type);
    auto tyQ = tm.tyQ;
    int ti = a_.addTransition(appSym_, {tyQ, f, argQ}, guard, target);
    Recipe r;
    r.kind = Recipe::App;
    r.fun = f;
    r.arg = argQ;
    recipes_[ti] = r;
  }

  void expandIf(const std::vector<qta::StateId>& args) {
    for (qta::StateId c : args) {
      const StateMeta& cm = meta_.at(c);
      if (cm.type->sort->kind != logic::SortKind::Bool) continue;
      auto pc = logic::substituteVar(
          cm.type->ref, kNu, logic::mkBool(true));
      for (qta::StateId s : args) {
        for (qta::StateId t : args) {
          if (s == t) continue;
          const StateMeta& sm = meta_.at(s);
          const StateMeta& tm = meta_.at(t);
          if (sm.type->sort->render() != tm.type->sort->render()) continue;
          if (final_ && sm.type->sort != goalSort_) continue;
          std::string tkey = "I:" + a_.stateName(c) + "$" + a_.stateName(s) +
                             "$" + a_.stateName(t);
          if (!transSeen_.insert(tkey).second) continue;
          // join the branch posts under the path condition
          auto post = logic::mkOr(logic::mkAnd(pc, sm.type->ref),
                                  logic::mkAnd(logic::mkNot(pc), tm.type->ref));
          qta::StateId target = termState(sm.type->sort, post, a_.depth());
          auto tyQ = typeState(meta_.at(target).type);
          int ti = a_.addTransition(ifSym_, {tyQ, c, s, t}, qta::cTrue(), target);
          Recipe r;
          r.kind = Recipe::If;
          r.cond = c;
          r.thenS = s;
          r.elseS = t;
          recipes_[ti] = r;
        }
      }
    }
  }

  qta::Qta a_;
  lang::Library lib_;
  types::SynthesisQuery query_;
  Options opt_;
  qta::EntailmentContext ctx_;
  std::unordered_map<qta::StateId, StateMeta> meta_;
  std::map<int, Recipe> recipes_;
  std::vector<qta::StateId> argStates_, funStates_, pendingArgs_, newLastRound_;
  std::set<std::string> transSeen_, goalSeen_;
  std::set<std::pair<qta::StateId, qta::StateId>> appSeen_;
  std::map<qta::StateId, qta::StateId> merged_;
  qta::StateId goal_ = qta::kNoState, goalType_ = qta::kNoState;
  logic::FormulaPtr goalRef_;
  logic::SortPtr goalSort_;
  bool final_ = false;
  std::map<qta::StateId, char> goalVerdict_;
  std::map<qta::StateId, FrameInfo> frameInfo_;
  std::unordered_map<std::string, signed char> depMemo_;
  qta::SymbolId appSym_ = 0, ifSym_ = 0, goalSym_ = 0;
  int binderCounter_ = 0;
};

}  // namespace qsyn::construct
