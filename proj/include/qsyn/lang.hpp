#pragma once
// The term language and its two independent oracles:
//   - check():   a standalone refinement type checker (soundness oracle),
//   - bruteForceEnumerate(): a size-stratified enumerator (completeness
//     oracle). Neither touches the tree-automaton machinery.
//
// Terms are applicative trees; ANF binder names (t1, t2, ...) are assigned
// deterministically in evaluation (post-)order when a term is checked or
// printed in let form. Depth of a term is the maximum nesting of *saturated*
// library calls: partial applications do not add depth.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "logic.hpp"
#include "smt.hpp"
#include "types.hpp"

namespace qsyn::lang {

using logic::SortPtr;
using types::RefTypePtr;

// ---------------------------------------------------------------------------
// Library
// ---------------------------------------------------------------------------

struct Component {
  std::string name;
  RefTypePtr type;  // possibly Forall-wrapped arrow; arity 0 => constant
};

struct Library {
  std::vector<Component> components;

  const Component* find(const std::string& n) const {
    for (const auto& c : components)
      if (c.name == n) return &c;
    return nullptr;
  }
  void add(std::string name, RefTypePtr t) {
    components.push_back({std::move(name), std::move(t)});
  }
};

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

enum class TermKind { Var, App, If };

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind;
  std::string var;            // Var: query argument or library component name
  TermPtr fn;                 // App
  TermPtr arg;                // App (one argument per node; currying)
  TermPtr cnd, thn, els;      // If
};

inline TermPtr mkVar(std::string n) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Var;
  t->var = std::move(n);
  return t;
}
inline TermPtr mkApp(TermPtr f, TermPtr a) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::App;
  t->fn = std::move(f);
  t->arg = std::move(a);
  return t;
}
// Convenience: saturated application f a1 .. an.
inline TermPtr mkCall(const std::string& f, const std::vector<TermPtr>& args) {
  TermPtr t = mkVar(f);
  for (const auto& a : args) t = mkApp(t, a);
  return t;
}
inline TermPtr mkIf(TermPtr c, TermPtr a, TermPtr b) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::If;
  t->cnd = std::move(c);
  t->thn = std::move(a);
  t->els = std::move(b);
  return t;
}

inline std::string render(const TermPtr& t, bool topLevel = true) {
  switch (t->kind) {
    case TermKind::Var: return t->var;
    case TermKind::App: {
      // print the whole application spine without inner parens: f a b c
      std::vector<TermPtr> args;
      TermPtr cur = t;
      while (cur->kind == TermKind::App) {
        args.push_back(cur->arg);
        cur = cur->fn;
      }
      std::string s = render(cur, false);
      for (auto it = args.rbegin(); it != args.rend(); ++it)
        s += " " + render(*it, false);
      return topLevel ? s : "(" + s + ")";
    }
    case TermKind::If: {
      std::string s = "if " + render(t->cnd, false) + " then " +
                      render(t->thn, false) + " else " + render(t->els, false);
      return topLevel ? s : "(" + s + ")";
    }
  }
  return "?";
}

// Saturated-call nesting depth (the k-metric shared with the synthesizer).
inline int callDepth(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Var: return 0;
    case TermKind::App: {
      // walk the spine; the application head adds one level over its args
      int argMax = 0;
      TermPtr cur = t;
      while (cur->kind == TermKind::App) {
        argMax = std::max(argMax, callDepth(cur->arg));
        cur = cur->fn;
      }
      return argMax + 1;
    }
    case TermKind::If:
      return std::max({callDepth(t->cnd), callDepth(t->thn), callDepth(t->els)}) + 1;
  }
  return 0;
}

inline int callCount(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Var: return 0;
    case TermKind::App: {
      int n = 1;
      TermPtr cur = t;
      while (cur->kind == TermKind::App) {
        n += callCount(cur->arg);
        cur = cur->fn;
      }
      return n;
    }
    case TermKind::If:
      return callCount(t->cnd) + callCount(t->thn) + callCount(t->els) + 1;
  }
  return 0;
}

// Let-normal (ANF) print with deterministic binder numbering.
inline std::string renderAnfRec(const TermPtr& t, std::vector<std::string>& lets,
                                int& next) {
  switch (t->kind) {
    case TermKind::Var: return t->var;
    case TermKind::App: {
      std::vector<TermPtr> args;
      TermPtr cur = t;
      while (cur->kind == TermKind::App) {
        args.push_back(cur->arg);
        cur = cur->fn;
      }
      std::reverse(args.begin(), args.end());
      std::string call = renderAnfRec(cur, lets, next);
      for (const auto& a : args) call += " " + renderAnfRec(a, lets, next);
      std::string b = "t" + std::to_string(++next);
      lets.push_back("let " + b + " = " + call);
      return b;
    }
    case TermKind::If: {
      std::string c = renderAnfRec(t->cnd, lets, next);
      std::string x = renderAnfRec(t->thn, lets, next);
      std::string y = renderAnfRec(t->els, lets, next);
      std::string b = "t" + std::to_string(++next);
      lets.push_back("let " + b + " = if " + c + " then " + x + " else " + y);
      return b;
    }
  }
  return "?";
}

inline std::string renderAnf(const TermPtr& t) {
  std::vector<std::string> lets;
  int next = 0;
  std::string last = renderAnfRec(t, lets, next);
  std::string out;
  for (const auto& l : lets) out += l + " in\n";
  return out + last;
}

// ---------------------------------------------------------------------------
// Type checker (soundness oracle)
// ---------------------------------------------------------------------------

struct CheckContext {
  smt::Oracle* oracle;
  const Library* lib;
  const types::SynthesisQuery* query;
  logic::TypingEnv env;  // argument facts plus accumulated binder facts
  int nextBinder = 0;

  std::string freshBinder() { return "t" + std::to_string(++nextBinder); }
};

// Infer a (monomorphic) refinement type for `t`, accumulating ANF binder
// facts in ctx.env. Returns nullptr when the term is ill-typed. For base
// types the result refinement is expressed over binder %nu.
inline RefTypePtr inferType(CheckContext& ctx, const TermPtr& t,
                            logic::ExprPtr* selfExpr = nullptr);

// Bind a checked subterm to a fresh ANF binder (unless it is already a
// variable) and return the expression that names it.
inline logic::ExprPtr bindSubterm(CheckContext& ctx, const TermPtr& t,
                                  const RefTypePtr& ty) {
  auto base = types::resultBase(ty);
  if (t->kind == TermKind::Var && base) {
    auto v = logic::mkVar(t->var, base->sort);
    // Component constants carry their refinement with them (query variables
    // already have selfified facts, so re-adding theirs is redundant but
    // harmless).
    if (base->ref->kind != logic::FormulaKind::True)
      ctx.env.addFact(logic::substituteVar(base->ref, base->binder, v));
    return v;
  }
  if (!base) return nullptr;  // arrow-typed intermediate: no value binder
  std::string b = ctx.freshBinder();
  auto v = logic::mkVar(b, base->sort);
  ctx.env.bind(b, base->sort);
  ctx.env.addFact(logic::substituteVar(base->ref, base->binder, v));
  return v;
}

inline RefTypePtr inferType(CheckContext& ctx, const TermPtr& t,
                            logic::ExprPtr* selfExpr) {
  switch (t->kind) {
    case TermKind::Var: {
      // Query argument?
      for (const auto& [n, ty] : ctx.query->args) {
        if (n != t->var) continue;
        auto b = types::resultBase(ty);
        if (b && ty->kind == types::TyKind::Base) {
          // Selfify: {nu | ref /\ nu = x}.
          auto x = logic::mkVar(n, b->sort);
          if (selfExpr) *selfExpr = x;
          auto nu = logic::mkVar("%nu", b->sort);
          auto ref = logic::mkAnd(
              logic::substituteVar(b->ref, b->binder, nu),
              logic::mkCmp(logic::CmpOp::Eq, nu, x));
          return types::mkBase("%nu", b->sort, ref);
        }
        return ty;
      }
      if (const Component* c = ctx.lib->find(t->var)) return c->type;
      return nullptr;
    }
    case TermKind::App: {
      // Collect the application spine.
      std::vector<TermPtr> args;
      TermPtr cur = t;
      while (cur->kind == TermKind::App) {
        args.push_back(cur->arg);
        cur = cur->fn;
      }
      std::reverse(args.begin(), args.end());
      if (cur->kind != TermKind::Var) return nullptr;  // ANF: head is a name
      RefTypePtr fnTy = inferType(ctx, cur);
      if (!fnTy) return nullptr;
      std::vector<std::string> tyvars;
      fnTy = types::stripForall(fnTy, &tyvars);

      // First pass: infer argument types and unify sorts to instantiate
      // the head's tyvars.
      std::vector<RefTypePtr> argTys;
      std::map<std::string, SortPtr> inst;
      {
        RefTypePtr walk = fnTy;
        for (const auto& a : args) {
          if (walk->kind != types::TyKind::Arrow) return nullptr;
          auto aTy = inferType(ctx, a);
          if (!aTy) return nullptr;
          argTys.push_back(aTy);
          auto inBase = types::resultBase(walk->in);
          auto aBase = types::resultBase(aTy);
          if (inBase && aBase) {
            if (!logic::unifySorts(inBase->sort, aBase->sort, inst)) return nullptr;
          }
          walk = walk->out;
        }
      }
      fnTy = types::instantiate(fnTy, inst);

      // Second pass: check argument subtyping and substitute actuals.
      for (size_t i = 0; i < args.size(); ++i) {
        if (fnTy->kind != types::TyKind::Arrow) return nullptr;
        RefTypePtr want = fnTy->in;
        RefTypePtr got = argTys[i];
        // A polymorphic argument (e.g. a polymorphic constant) is
        // instantiated against the parameter type it must inhabit.
        if (got->kind == types::TyKind::Forall) {
          got = types::stripForall(got);
          auto gb = types::resultBase(got);
          auto wb = types::resultBase(want);
          std::map<std::string, logic::SortPtr> gi;
          if (gb && wb && logic::unifySorts(gb->sort, wb->sort, gi))
            got = types::instantiate(got, gi);
        }
        if (!types::subtype(*ctx.oracle, ctx.env, got, want)) return nullptr;
        auto actual = bindSubterm(ctx, args[i], got);
        if (actual) {
          fnTy = types::substituteType(fnTy->out, {{fnTy->formal, actual}});
        } else {
          fnTy = fnTy->out;  // higher-order argument: not value-dependent
        }
      }
      return fnTy;
    }
    case TermKind::If: {
      auto cTy = inferType(ctx, t->cnd);
      if (!cTy || cTy->kind != types::TyKind::Base ||
          cTy->sort->kind != logic::SortKind::Bool)
        return nullptr;
      auto pcThen = logic::substituteVar(cTy->ref, cTy->binder, logic::mkBool(true));
      auto pcElse = logic::substituteVar(cTy->ref, cTy->binder, logic::mkBool(false));

      CheckContext thenCtx = ctx;
      thenCtx.env.addFact(pcThen);
      auto aTy = inferType(thenCtx, t->thn);
      CheckContext elseCtx = ctx;
      elseCtx.nextBinder = thenCtx.nextBinder;
      elseCtx.env.addFact(pcElse);
      auto bTy = inferType(elseCtx, t->els);
      ctx.nextBinder = elseCtx.nextBinder;
      if (!aTy || !bTy) return nullptr;
      auto ab = types::resultBase(aTy);
      auto bb = types::resultBase(bTy);
      if (!ab || !bb || aTy->kind != types::TyKind::Base ||
          bTy->kind != types::TyKind::Base)
        return nullptr;
      if (ab->sort->render() != bb->sort->render()) return nullptr;
      auto nu = logic::mkVar("%nu", ab->sort);
      // Join: under the branch's path condition its refinement holds.
      auto join = logic::mkOr(
          logic::mkAnd(pcThen, logic::substituteVar(ab->ref, ab->binder, nu)),
          logic::mkAnd(pcElse, logic::substituteVar(bb->ref, bb->binder, nu)));
      return types::mkBase("%nu", ab->sort, join);
    }
  }
  return nullptr;
}

// Does `t` inhabit the query's result type? The independent soundness oracle.
inline bool check(smt::Oracle& oracle, const Library& lib,
                  const types::SynthesisQuery& query, const TermPtr& t) {
  CheckContext ctx{&oracle, &lib, &query, query.baseEnv(), 0};
  auto ty = inferType(ctx, t);
  if (!ty) return false;
  return types::subtype(oracle, ctx.env, ty, query.result);
}

// ---------------------------------------------------------------------------
// Brute-force enumerator (completeness oracle)
// ---------------------------------------------------------------------------

struct BruteForceResult {
  std::vector<TermPtr> solutions;
  uint64_t candidates = 0;
  bool budgetExceeded = false;
};

// Enumerate all well-typed ANF terms with saturated-call nesting <= k and
// return those whose type subtypes the query result. Independent of the
// automaton machinery. The candidate budget guards against blowup.
inline BruteForceResult bruteForceEnumerate(smt::Oracle& oracle,
                                            const Library& lib,
                                            const types::SynthesisQuery& query,
                                            int k, bool enableIf = false,
                                            uint64_t budget = 1000000) {
  BruteForceResult out;
  // Pools of terms by exact depth, along with their base sort (arrow-typed
  // and ill-typed terms are not kept as argument candidates).
  struct Entry {
    TermPtr term;
    SortPtr sort;
  };
  std::vector<std::vector<Entry>> byDepth(static_cast<size_t>(k) + 1);

  auto sortOfChecked = [&](const TermPtr& t) -> SortPtr {
    CheckContext ctx{&oracle, &lib, &query, query.baseEnv(), 0};
    auto ty = inferType(ctx, t);
    if (!ty || ty->kind != types::TyKind::Base) return nullptr;
    return ty->sort;
  };

  // Depth 0: query arguments and nullary library components.
  for (const auto& [n, ty] : query.args) {
    auto b = types::resultBase(ty);
    if (ty->kind == types::TyKind::Base && b)
      byDepth[0].push_back({mkVar(n), b->sort});
  }
  for (const auto& c : lib.components) {
    auto t = types::stripForall(c.type);
    if (t->kind == types::TyKind::Base && !t->sort->containsTyVar())
      byDepth[0].push_back({mkVar(c.name), t->sort});
  }

  // Candidate argument tuples for a component, by sort unification.
  for (int d = 1; d <= k; ++d) {
    for (const auto& c : lib.components) {
      auto fnTy = types::stripForall(c.type);
      if (fnTy->kind != types::TyKind::Arrow) continue;
      std::vector<SortPtr> inSorts;
      for (RefTypePtr w = fnTy; w->kind == types::TyKind::Arrow; w = w->out) {
        auto b = types::resultBase(w->in);
        if (!b) { inSorts.clear(); break; }  // higher-order formals: skip
        inSorts.push_back(b->sort);
      }
      if (inSorts.empty()) continue;

      // Choose per-argument candidates of depth <= d-1 (at least one == d-1).
      std::vector<std::vector<Entry>> pools(inSorts.size());
      for (size_t i = 0; i < inSorts.size(); ++i) {
        for (int pd = 0; pd <= d - 1; ++pd)
          for (const auto& e : byDepth[pd]) {
            std::map<std::string, SortPtr> sub;
            if (logic::unifySorts(inSorts[i], e.sort, sub))
              pools[i].push_back(e);
          }
        if (pools[i].empty()) break;
      }
      bool feasible = true;
      for (const auto& p : pools) feasible &= !p.empty();
      if (!feasible) continue;

      std::vector<size_t> idx(inSorts.size(), 0);
      for (;;) {
        if (++out.candidates > budget) {
          out.budgetExceeded = true;
          return out;
        }
        std::vector<TermPtr> args;
        int maxDepth = 0;
        std::map<std::string, SortPtr> inst;
        bool ok = true;
        for (size_t i = 0; i < idx.size(); ++i) {
          const Entry& e = pools[i][idx[i]];
          args.push_back(e.term);
          maxDepth = std::max(maxDepth, callDepth(e.term));
          if (!logic::unifySorts(inSorts[i], e.sort, inst)) ok = false;
        }
        if (ok && maxDepth == d - 1) {
          TermPtr cand = mkCall(c.name, args);
          auto s = sortOfChecked(cand);
          if (s) byDepth[d].push_back({cand, s});
        }
        // advance
        size_t i = 0;
        for (; i < idx.size(); ++i) {
          if (++idx[i] < pools[i].size()) break;
          idx[i] = 0;
        }
        if (i == idx.size()) break;
      }
    }
    if (enableIf) {
      // if c then a else b over smaller terms with a boolean condition.
      std::vector<Entry> bools, vals;
      for (int pd = 0; pd <= d - 1; ++pd)
        for (const auto& e : byDepth[pd]) {
          if (e.sort->kind == logic::SortKind::Bool) bools.push_back(e);
          vals.push_back(e);
        }
      for (const auto& c : bools)
        for (const auto& a : vals)
          for (const auto& b : vals) {
            if (a.sort->render() != b.sort->render()) continue;
            int md = std::max({callDepth(c.term), callDepth(a.term), callDepth(b.term)});
            if (md != d - 1) continue;
            if (++out.candidates > budget) {
              out.budgetExceeded = true;
              return out;
            }
            TermPtr cand = mkIf(c.term, a.term, b.term);
            auto s = sortOfChecked(cand);
            if (s) byDepth[d].push_back({cand, s});
          }
    }
  }

  for (int d = 0; d <= k; ++d)
    for (const auto& e : byDepth[d])
      if (check(oracle, lib, query, e.term)) out.solutions.push_back(e.term);
  return out;
}

}  // namespace qsyn::lang
