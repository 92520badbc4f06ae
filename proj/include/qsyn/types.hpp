#pragma once
// Refinement types: {nu : sort | phi}, dependent arrows, and tyvar binders.
//
// Subtyping follows the usual liquid-typing rules: base types need equal
// sorts and refinement entailment under the ambient facts; arrows are
// contravariant in the domain and covariant in the codomain with the formal
// bound in the environment; mixed shapes are never subtypes. Binder alignment
// uses reserved names (%nu, %a0, %a1, ...) so queries are deterministic and
// cache well.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "logic.hpp"
#include "smt.hpp"

namespace qsyn::types {

using logic::FormulaPtr;
using logic::SortPtr;

enum class TyKind { Base, Arrow, Forall };

struct RefType;
using RefTypePtr = std::shared_ptr<const RefType>;

struct RefType {
  TyKind kind;

  // Base
  std::string binder;  // the nu name used inside `ref`
  SortPtr sort;
  FormulaPtr ref;

  // Arrow
  std::string formal;  // dependent argument name, scoped over `out`
  RefTypePtr in, out;

  // Forall
  std::string tyvar;
  RefTypePtr body;
};

inline RefTypePtr mkBase(std::string binder, SortPtr sort, FormulaPtr ref) {
  auto t = std::make_shared<RefType>();
  t->kind = TyKind::Base;
  t->binder = std::move(binder);
  t->sort = std::move(sort);
  t->ref = std::move(ref);
  return t;
}
inline RefTypePtr mkArrow(std::string formal, RefTypePtr in, RefTypePtr out) {
  auto t = std::make_shared<RefType>();
  t->kind = TyKind::Arrow;
  t->formal = std::move(formal);
  t->in = std::move(in);
  t->out = std::move(out);
  return t;
}
inline RefTypePtr mkForall(std::string tyvar, RefTypePtr body) {
  auto t = std::make_shared<RefType>();
  t->kind = TyKind::Forall;
  t->tyvar = std::move(tyvar);
  t->body = std::move(body);
  return t;
}
inline RefTypePtr trivial(SortPtr sort) {
  return mkBase("%nu", std::move(sort), logic::mkTrue());
}

inline std::string render(const RefTypePtr& t) {
  switch (t->kind) {
    case TyKind::Base:
      if (logic::isTrue(t->ref)) return t->sort->render();
      return "{" + t->binder + ":" + t->sort->render() + " | " +
             logic::render(t->ref) + "}";
    case TyKind::Arrow:
      return "(" + t->formal + ":" + render(t->in) + ") -> " + render(t->out);
    case TyKind::Forall:
      return "forall " + t->tyvar + ". " + render(t->body);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Structural helpers
// ---------------------------------------------------------------------------

// Substitute program variables (value-level) inside all refinements.
inline RefTypePtr substituteType(const RefTypePtr& t,
                                 const std::map<std::string, logic::ExprPtr>& sub) {
  if (sub.empty()) return t;
  switch (t->kind) {
    case TyKind::Base: {
      auto s = sub;
      s.erase(t->binder);  // the binder shadows
      auto r = logic::substitute(t->ref, s);
      if (r == t->ref) return t;
      return mkBase(t->binder, t->sort, std::move(r));
    }
    case TyKind::Arrow: {
      auto in = substituteType(t->in, sub);
      auto s = sub;
      s.erase(t->formal);
      auto out = substituteType(t->out, s);
      if (in == t->in && out == t->out) return t;
      return mkArrow(t->formal, std::move(in), std::move(out));
    }
    case TyKind::Forall: {
      auto body = substituteType(t->body, sub);
      if (body == t->body) return t;
      return mkForall(t->tyvar, std::move(body));
    }
  }
  return t;
}

// Instantiate tyvars with sorts (monomorphization step).
inline logic::ExprPtr retypeExpr(const logic::ExprPtr& e,
                                 const std::map<std::string, SortPtr>& inst) {
  auto n = std::make_shared<logic::Expr>(*e);
  n->sort = logic::applySortSubst(e->sort, inst);
  std::vector<logic::ExprPtr> args;
  for (const auto& a : e->args) args.push_back(retypeExpr(a, inst));
  n->args = std::move(args);
  return n;
}

inline FormulaPtr retypeFormula(const FormulaPtr& f,
                                const std::map<std::string, SortPtr>& inst) {
  auto n = std::make_shared<logic::Formula>(*f);
  if (f->lhs) n->lhs = retypeExpr(f->lhs, inst);
  if (f->rhs) n->rhs = retypeExpr(f->rhs, inst);
  if (f->atom) n->atom = retypeExpr(f->atom, inst);
  if (f->body) n->body = retypeFormula(f->body, inst);
  std::vector<FormulaPtr> kids;
  for (const auto& k : f->kids) kids.push_back(retypeFormula(k, inst));
  n->kids = std::move(kids);
  std::vector<SortPtr> bs;
  for (const auto& s : f->boundSorts) bs.push_back(logic::applySortSubst(s, inst));
  n->boundSorts = std::move(bs);
  return n;
}

inline RefTypePtr instantiate(const RefTypePtr& t,
                              const std::map<std::string, SortPtr>& inst) {
  if (inst.empty()) return t;
  switch (t->kind) {
    case TyKind::Base:
      return mkBase(t->binder, logic::applySortSubst(t->sort, inst),
                    retypeFormula(t->ref, inst));
    case TyKind::Arrow:
      return mkArrow(t->formal, instantiate(t->in, inst),
                     instantiate(t->out, inst));
    case TyKind::Forall: {
      auto i = inst;
      i.erase(t->tyvar);  // bound tyvar shadows
      return mkForall(t->tyvar, instantiate(t->body, i));
    }
  }
  return t;
}

// Strip Forall binders, collecting bound tyvar names.
inline RefTypePtr stripForall(RefTypePtr t, std::vector<std::string>* tyvars = nullptr) {
  while (t->kind == TyKind::Forall) {
    if (tyvars) tyvars->push_back(t->tyvar);
    t = t->body;
  }
  return t;
}

// The final (rightmost) base result of an arrow chain; nullptr if none.
inline RefTypePtr resultBase(RefTypePtr t) {
  t = stripForall(std::move(t));
  while (t->kind == TyKind::Arrow) t = t->out;
  return t->kind == TyKind::Base ? t : nullptr;
}

inline int arity(RefTypePtr t) {
  t = stripForall(std::move(t));
  int n = 0;
  while (t->kind == TyKind::Arrow) {
    ++n;
    t = t->out;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Well-formedness
// ---------------------------------------------------------------------------

// A type is well-formed in env when every free program variable of each
// refinement is bound (by env, a dependent formal, or the local binder).
inline bool wellFormed(const logic::TypingEnv& env, const RefTypePtr& t) {
  switch (t->kind) {
    case TyKind::Base: {
      for (const auto& [n, s] : logic::freeVars(t->ref)) {
        (void)s;
        if (n == t->binder) continue;
        if (!env.lookup(n)) return false;
      }
      return true;
    }
    case TyKind::Arrow: {
      if (!wellFormed(env, t->in)) return false;
      logic::TypingEnv inner = env;
      auto inBase = resultBase(t->in);
      inner.bind(t->formal, inBase ? inBase->sort : logic::intSort());
      return wellFormed(inner, t->out);
    }
    case TyKind::Forall:
      return wellFormed(env, t->body);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Subtyping
// ---------------------------------------------------------------------------

inline bool subtype(smt::Oracle& oracle, const logic::TypingEnv& env,
                    const RefTypePtr& a, const RefTypePtr& b, int depth = 0);

inline bool subtypeBase(smt::Oracle& oracle, const logic::TypingEnv& env,
                        const RefTypePtr& a, const RefTypePtr& b) {
  if (a->sort->render() != b->sort->render()) return false;
  // Align both binders on the reserved name %nu, then ask the oracle.
  auto nu = logic::mkVar("%nu", a->sort);
  auto ra = logic::substituteVar(a->ref, a->binder, nu);
  auto rb = logic::substituteVar(b->ref, b->binder, nu);
  return oracle.entails(env, ra, rb);
}

inline bool subtype(smt::Oracle& oracle, const logic::TypingEnv& env,
                    const RefTypePtr& a, const RefTypePtr& b, int depth) {
  if (a->kind == TyKind::Forall || b->kind == TyKind::Forall) {
    // Align tyvar binders on a reserved rigid name and compare bodies.
    if (a->kind != b->kind) return false;
    std::string fresh = "%t" + std::to_string(depth);
    auto sa = instantiate(a->body, {{a->tyvar, logic::tyVarSort(fresh)}});
    auto sb = instantiate(b->body, {{b->tyvar, logic::tyVarSort(fresh)}});
    return subtype(oracle, env, sa, sb, depth + 1);
  }
  if (a->kind == TyKind::Base && b->kind == TyKind::Base)
    return subtypeBase(oracle, env, a, b);
  if (a->kind == TyKind::Arrow && b->kind == TyKind::Arrow) {
    // contravariant domain
    if (!subtype(oracle, env, b->in, a->in, depth + 1)) return false;
    // covariant codomain with the formal bound to b's domain
    std::string x = "%a" + std::to_string(depth);
    auto xin = resultBase(b->in);
    logic::TypingEnv inner = env;
    auto xv = logic::mkVar(x, xin ? xin->sort : logic::intSort());
    if (xin) {
      inner.bind(x, xin->sort);
      inner.addFact(logic::substituteVar(xin->ref, xin->binder, xv));
    }
    auto outA = substituteType(a->out, {{a->formal, xv}});
    auto outB = substituteType(b->out, {{b->formal, xv}});
    return subtype(oracle, inner, outA, outB, depth + 1);
  }
  return false;  // mixed Base/Arrow shapes are never subtypes
}

// ---------------------------------------------------------------------------
// Synthesis queries
// ---------------------------------------------------------------------------

// A query is an arrow type unrolled into named arguments plus a result type.
struct SynthesisQuery {
  std::vector<std::pair<std::string, RefTypePtr>> args;
  RefTypePtr result;
  std::vector<std::string> rigidTyVars;  // universally quantified in the goal

  // Facts every obligation may assume: the argument refinements.
  logic::TypingEnv baseEnv() const {
    logic::TypingEnv env;
    for (const auto& [n, t] : args) {
      auto b = resultBase(t);
      if (!b) continue;
      env.bind(n, b->sort);
      env.addFact(logic::substituteVar(b->ref, b->binder, logic::mkVar(n, b->sort)));
    }
    return env;
  }
};

inline SynthesisQuery queryFromGoal(RefTypePtr goal) {
  SynthesisQuery q;
  goal = stripForall(std::move(goal), &q.rigidTyVars);
  while (goal->kind == TyKind::Arrow) {
    q.args.emplace_back(goal->formal, goal->in);
    goal = goal->out;
  }
  q.result = goal;
  return q;
}

}  // namespace qsyn::types
