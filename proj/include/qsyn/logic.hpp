#pragma once
// Sorts, method predicates and quantifier-free refinement formulas, plus the
// deterministic SMT-LIB emitter used by the entailment oracle (smt.hpp).
//
// Formulas are immutable shared nodes. Canonical text (render()) doubles as
// the structural identity: two formulas are considered equal iff their
// canonical prints are byte-identical. Quantified clauses are wrapped into
// opaque atoms keyed by their alpha-normal form; they participate in
// substitution and SMT emission as uninterpreted boolean applications over
// their free program variables.

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qsyn::logic {

// ---------------------------------------------------------------------------
// Sorts
// ---------------------------------------------------------------------------

enum class SortKind { Int, Bool, Char, TyVar, List, Pair, Tree };

struct Sort;
using SortPtr = std::shared_ptr<const Sort>;

struct Sort {
  SortKind kind;
  std::string name;           // TyVar only
  std::vector<SortPtr> args;  // List(1), Pair(2), Tree(1)

  std::string render() const {
    switch (kind) {
      case SortKind::Int: return "int";
      case SortKind::Bool: return "bool";
      case SortKind::Char: return "char";
      case SortKind::TyVar: return name;
      case SortKind::List: return "[" + args[0]->render() + "]";
      case SortKind::Pair:
        return "(" + args[0]->render() + ", " + args[1]->render() + ")";
      case SortKind::Tree: return "tree " + args[0]->render();
    }
    return "?";
  }

  bool containsTyVar() const {
    if (kind == SortKind::TyVar) return true;
    for (const auto& a : args)
      if (a->containsTyVar()) return true;
    return false;
  }
};

namespace detail {
inline std::unordered_map<std::string, SortPtr>& sortTable() {
  static std::unordered_map<std::string, SortPtr> t;
  return t;
}
inline SortPtr internSort(Sort s) {
  std::string key = s.render();
  auto& t = sortTable();
  auto it = t.find(key);
  if (it != t.end()) return it->second;
  auto p = std::make_shared<const Sort>(std::move(s));
  t.emplace(key, p);
  return p;
}
}  // namespace detail

inline SortPtr intSort() { return detail::internSort({SortKind::Int, "", {}}); }
inline SortPtr boolSort() { return detail::internSort({SortKind::Bool, "", {}}); }
inline SortPtr charSort() { return detail::internSort({SortKind::Char, "", {}}); }
inline SortPtr tyVarSort(const std::string& n) {
  return detail::internSort({SortKind::TyVar, n, {}});
}
inline SortPtr listOf(SortPtr s) {
  return detail::internSort({SortKind::List, "", {std::move(s)}});
}
inline SortPtr pairOf(SortPtr a, SortPtr b) {
  return detail::internSort({SortKind::Pair, "", {std::move(a), std::move(b)}});
}
inline SortPtr treeOf(SortPtr s) {
  return detail::internSort({SortKind::Tree, "", {std::move(s)}});
}

// Syntactic first-order unification of sorts; `subst` maps tyvar name to sort.
inline bool unifySorts(const SortPtr& pat, const SortPtr& actual,
                       std::map<std::string, SortPtr>& subst) {
  if (pat->kind == SortKind::TyVar) {
    auto it = subst.find(pat->name);
    if (it != subst.end()) return it->second->render() == actual->render();
    subst[pat->name] = actual;
    return true;
  }
  if (pat->kind != actual->kind) return false;
  if (pat->args.size() != actual->args.size()) return false;
  for (size_t i = 0; i < pat->args.size(); ++i)
    if (!unifySorts(pat->args[i], actual->args[i], subst)) return false;
  return true;
}

inline SortPtr applySortSubst(const SortPtr& s,
                              const std::map<std::string, SortPtr>& subst) {
  if (s->kind == SortKind::TyVar) {
    auto it = subst.find(s->name);
    return it != subst.end() ? it->second : s;
  }
  if (s->args.empty()) return s;
  std::vector<SortPtr> args;
  args.reserve(s->args.size());
  for (const auto& a : s->args) args.push_back(applySortSubst(a, subst));
  Sort out{s->kind, s->name, std::move(args)};
  return detail::internSort(std::move(out));
}

// ---------------------------------------------------------------------------
// Method predicates
// ---------------------------------------------------------------------------

// A method predicate signature, possibly polymorphic (tyvars in sorts).
// Overloads are allowed (same name, different argument shapes); applications
// resolve the matching overload by unification against actual argument sorts.
struct MethodPredicate {
  std::string name;
  std::vector<SortPtr> argSorts;
  SortPtr resultSort;
};

// ---------------------------------------------------------------------------
// Terms and formulas
// ---------------------------------------------------------------------------

enum class ExprKind { Var, IntLit, BoolLit, Add, Sub, Mul, Neg, PredApp, IfVal };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind;
  // Var: name + sort. IntLit: value. BoolLit: bval. Mul: value * args[0].
  // PredApp: name + resolved arg exprs + resolved result sort.
  std::string name;
  long long value = 0;
  bool bval = false;
  SortPtr sort;  // sort of the whole expression
  std::vector<ExprPtr> args;
};

enum class FormulaKind {
  True, False, Cmp, BoolAtom, Not, And, Or, Implies, Iff, Opaque
};

enum class CmpOp { Eq, Ne, Le, Lt, Ge, Gt };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  FormulaKind kind;
  CmpOp op = CmpOp::Eq;           // Cmp
  ExprPtr lhs, rhs;               // Cmp
  ExprPtr atom;                   // BoolAtom (bool-sorted expression)
  std::vector<FormulaPtr> kids;   // Not(1), And/Or/Implies/Iff(2)
  // Opaque: an originally quantified clause, treated as an uninterpreted
  // boolean atom over its free program variables.
  FormulaPtr body;                          // Opaque: original body
  std::vector<std::string> boundVars;       // Opaque: bound names (normalized)
  std::vector<SortPtr> boundSorts;          // Opaque: bound sorts
};

// -- constructors -----------------------------------------------------------

inline ExprPtr mkVar(std::string n, SortPtr s) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Var;
  e->name = std::move(n);
  e->sort = std::move(s);
  return e;
}
inline ExprPtr mkInt(long long v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::IntLit;
  e->value = v;
  e->sort = intSort();
  return e;
}
inline ExprPtr mkBool(bool b) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::BoolLit;
  e->bval = b;
  e->sort = boolSort();
  return e;
}
inline ExprPtr mkAdd(ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Add;
  e->sort = intSort();
  e->args = {std::move(a), std::move(b)};
  return e;
}
inline ExprPtr mkSub(ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Sub;
  e->sort = intSort();
  e->args = {std::move(a), std::move(b)};
  return e;
}
inline ExprPtr mkNeg(ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Neg;
  e->sort = intSort();
  e->args = {std::move(a)};
  return e;
}
inline ExprPtr mkMul(long long scalar, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Mul;
  e->value = scalar;
  e->sort = intSort();
  e->args = {std::move(a)};
  return e;
}
inline ExprPtr mkPredApp(std::string name, std::vector<ExprPtr> args,
                         SortPtr resultSort) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::PredApp;
  e->name = std::move(name);
  e->sort = std::move(resultSort);
  e->args = std::move(args);
  return e;
}

inline FormulaPtr mkTrue() {
  static FormulaPtr t = [] {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::True;
    return f;
  }();
  return t;
}
inline FormulaPtr mkFalse() {
  static FormulaPtr t = [] {
    auto f = std::make_shared<Formula>();
    f->kind = FormulaKind::False;
    return f;
  }();
  return t;
}
inline FormulaPtr mkCmp(CmpOp op, ExprPtr a, ExprPtr b) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::Cmp;
  f->op = op;
  f->lhs = std::move(a);
  f->rhs = std::move(b);
  return f;
}
inline FormulaPtr mkBoolAtom(ExprPtr a) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::BoolAtom;
  f->atom = std::move(a);
  return f;
}
inline FormulaPtr mkNot(FormulaPtr a) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::Not;
  f->kids = {std::move(a)};
  return f;
}
inline FormulaPtr mkBinary(FormulaKind k, FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->kind = k;
  f->kids = {std::move(a), std::move(b)};
  return f;
}
inline FormulaPtr mkAnd(FormulaPtr a, FormulaPtr b) {
  if (a->kind == FormulaKind::True) return b;
  if (b->kind == FormulaKind::True) return a;
  return mkBinary(FormulaKind::And, std::move(a), std::move(b));
}
inline FormulaPtr mkOr(FormulaPtr a, FormulaPtr b) {
  return mkBinary(FormulaKind::Or, std::move(a), std::move(b));
}
inline FormulaPtr mkImplies(FormulaPtr a, FormulaPtr b) {
  return mkBinary(FormulaKind::Implies, std::move(a), std::move(b));
}
inline FormulaPtr mkIff(FormulaPtr a, FormulaPtr b) {
  return mkBinary(FormulaKind::Iff, std::move(a), std::move(b));
}
inline FormulaPtr mkOpaque(FormulaPtr body, std::vector<std::string> bound,
                           std::vector<SortPtr> boundSorts) {
  auto f = std::make_shared<Formula>();
  f->kind = FormulaKind::Opaque;
  f->body = std::move(body);
  f->boundVars = std::move(bound);
  f->boundSorts = std::move(boundSorts);
  return f;
}

// -- rendering ---------------------------------------------------------------

inline std::string renderExpr(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Var: return e->name;
    case ExprKind::IntLit: return std::to_string(e->value);
    case ExprKind::BoolLit: return e->bval ? "true" : "false";
    case ExprKind::Add:
      return "(" + renderExpr(e->args[0]) + " + " + renderExpr(e->args[1]) + ")";
    case ExprKind::Sub:
      return "(" + renderExpr(e->args[0]) + " - " + renderExpr(e->args[1]) + ")";
    case ExprKind::Neg: return "(- " + renderExpr(e->args[0]) + ")";
    case ExprKind::Mul:
      return "(" + std::to_string(e->value) + " * " + renderExpr(e->args[0]) + ")";
    case ExprKind::PredApp: {
      std::string s = e->name + "(";
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i) s += ", ";
        s += renderExpr(e->args[i]);
      }
      return s + ")";
    }
    case ExprKind::IfVal: return "?";
  }
  return "?";
}

inline std::string render(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return "true";
    case FormulaKind::False: return "false";
    case FormulaKind::Cmp: {
      const char* op = "=";
      switch (f->op) {
        case CmpOp::Eq: op = "="; break;
        case CmpOp::Ne: op = "!="; break;
        case CmpOp::Le: op = "<="; break;
        case CmpOp::Lt: op = "<"; break;
        case CmpOp::Ge: op = ">="; break;
        case CmpOp::Gt: op = ">"; break;
      }
      return renderExpr(f->lhs) + " " + op + " " + renderExpr(f->rhs);
    }
    case FormulaKind::BoolAtom: return renderExpr(f->atom);
    case FormulaKind::Not: return "!(" + render(f->kids[0]) + ")";
    case FormulaKind::And:
      return "(" + render(f->kids[0]) + " && " + render(f->kids[1]) + ")";
    case FormulaKind::Or:
      return "(" + render(f->kids[0]) + " || " + render(f->kids[1]) + ")";
    case FormulaKind::Implies:
      return "(" + render(f->kids[0]) + " ==> " + render(f->kids[1]) + ")";
    case FormulaKind::Iff:
      return "(" + render(f->kids[0]) + " <=> " + render(f->kids[1]) + ")";
    case FormulaKind::Opaque: {
      std::string s = "(forall";
      for (size_t i = 0; i < f->boundVars.size(); ++i)
        s += " (" + f->boundVars[i] + ":" + f->boundSorts[i]->render() + ")";
      return s + ". " + render(f->body) + ")";
    }
  }
  return "?";
}

inline bool isTrue(const FormulaPtr& f) { return f->kind == FormulaKind::True; }
inline bool isFalse(const FormulaPtr& f) { return f->kind == FormulaKind::False; }

// -- free variables ----------------------------------------------------------

inline void freeVarsExpr(const ExprPtr& e, std::map<std::string, SortPtr>& out,
                         const std::set<std::string>& bound) {
  if (e->kind == ExprKind::Var) {
    if (!bound.count(e->name)) out[e->name] = e->sort;
    return;
  }
  for (const auto& a : e->args) freeVarsExpr(a, out, bound);
}

inline void freeVarsRec(const FormulaPtr& f, std::map<std::string, SortPtr>& out,
                        std::set<std::string> bound) {
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return;
    case FormulaKind::Cmp:
      freeVarsExpr(f->lhs, out, bound);
      freeVarsExpr(f->rhs, out, bound);
      return;
    case FormulaKind::BoolAtom: freeVarsExpr(f->atom, out, bound); return;
    case FormulaKind::Opaque:
      for (const auto& b : f->boundVars) bound.insert(b);
      freeVarsRec(f->body, out, std::move(bound));
      return;
    default:
      for (const auto& k : f->kids) freeVarsRec(k, out, bound);
      return;
  }
}

inline std::map<std::string, SortPtr> freeVars(const FormulaPtr& f) {
  std::map<std::string, SortPtr> out;
  freeVarsRec(f, out, {});
  return out;
}

// -- substitution (capture-free; only opaque atoms bind variables) -----------

inline ExprPtr substituteExpr(const ExprPtr& e,
                              const std::map<std::string, ExprPtr>& sub,
                              const std::set<std::string>& bound) {
  switch (e->kind) {
    case ExprKind::Var: {
      if (bound.count(e->name)) return e;
      auto it = sub.find(e->name);
      return it != sub.end() ? it->second : e;
    }
    case ExprKind::IntLit:
    case ExprKind::BoolLit: return e;
    default: {
      std::vector<ExprPtr> args;
      args.reserve(e->args.size());
      bool changed = false;
      for (const auto& a : e->args) {
        auto na = substituteExpr(a, sub, bound);
        changed |= (na != a);
        args.push_back(std::move(na));
      }
      if (!changed) return e;
      auto n = std::make_shared<Expr>(*e);
      n->args = std::move(args);
      return n;
    }
  }
}

inline FormulaPtr substitute(const FormulaPtr& f,
                             const std::map<std::string, ExprPtr>& sub,
                             std::set<std::string> bound = {}) {
  switch (f->kind) {
    case FormulaKind::True:
    case FormulaKind::False: return f;
    case FormulaKind::Cmp: {
      auto l = substituteExpr(f->lhs, sub, bound);
      auto r = substituteExpr(f->rhs, sub, bound);
      if (l == f->lhs && r == f->rhs) return f;
      return mkCmp(f->op, std::move(l), std::move(r));
    }
    case FormulaKind::BoolAtom: {
      auto a = substituteExpr(f->atom, sub, bound);
      if (a == f->atom) return f;
      return mkBoolAtom(std::move(a));
    }
    case FormulaKind::Opaque: {
      // Bound variables of the quantified clause shadow the substitution.
      // Substituted expressions never contain the normalized bound names
      // (they are in a reserved namespace), so capture cannot occur.
      auto b = bound;
      for (const auto& v : f->boundVars) b.insert(v);
      auto body = substitute(f->body, sub, std::move(b));
      if (body == f->body) return f;
      return mkOpaque(std::move(body), f->boundVars, f->boundSorts);
    }
    default: {
      std::vector<FormulaPtr> kids;
      kids.reserve(f->kids.size());
      bool changed = false;
      for (const auto& k : f->kids) {
        auto nk = substitute(k, sub, bound);
        changed |= (nk != k);
        kids.push_back(std::move(nk));
      }
      if (!changed) return f;
      auto n = std::make_shared<Formula>(*f);
      n->kids = std::move(kids);
      return n;
    }
  }
}

inline FormulaPtr substituteVar(const FormulaPtr& f, const std::string& from,
                                const ExprPtr& to) {
  return substitute(f, {{from, to}});
}

// ---------------------------------------------------------------------------
// Typing environment (logic view): variable sorts plus known facts
// ---------------------------------------------------------------------------

struct TypingEnv {
  // Deterministic order: insertion order is preserved for emission.
  std::vector<std::pair<std::string, SortPtr>> vars;
  std::vector<FormulaPtr> facts;

  void bind(const std::string& n, SortPtr s) {
    for (auto& [name, sort] : vars) {
      if (name == n) {
        sort = std::move(s);
        return;
      }
    }
    vars.emplace_back(n, std::move(s));
  }
  void addFact(FormulaPtr f) {
    if (!isTrue(f)) facts.push_back(std::move(f));
  }
  const SortPtr* lookup(const std::string& n) const {
    for (const auto& [name, sort] : vars)
      if (name == n) return &sort;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// SMT-LIB emission
// ---------------------------------------------------------------------------

namespace detail {

// Mangle a sort into a valid SMT identifier fragment.
inline std::string mangleSort(const SortPtr& s) {
  std::string r = s->render();
  std::string out;
  for (char c : r) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += c;
    else if (c == '[') out += "L";
    else if (c == ']') out += "R";
    else if (c == '(') out += "P";
    else if (c == ')') out += "Q";
    else if (c == ',') out += "_";
    else if (c == '\'') out += "v";
    else if (c == ' ') {}
    else out += '_';
  }
  return out;
}

}  // namespace detail

struct SmtEmitter {
  std::ostringstream decls;
  std::ostringstream asserts;
  std::set<std::string> declaredSorts;
  std::set<std::string> declaredFuns;
  std::vector<std::string> lenApps;  // collected len applications (for axiom)

  std::string smtSort(const SortPtr& s) {
    switch (s->kind) {
      case SortKind::Int: return "Int";
      case SortKind::Bool: return "Bool";
      default: break;
    }
    std::string tok = "U_" + detail::mangleSort(s);
    if (!declaredSorts.count(tok)) {
      declaredSorts.insert(tok);
      decls << "(declare-sort " << tok << " 0)\n";
    }
    return tok;
  }

  void declareFun(const std::string& name, const std::vector<SortPtr>& args,
                  const SortPtr& result) {
    if (declaredFuns.count(name)) return;
    declaredFuns.insert(name);
    std::string resTok = smtSort(result);  // resolve before writing the line
    std::vector<std::string> argToks;
    argToks.reserve(args.size());
    for (const auto& a : args) argToks.push_back(smtSort(a));
    decls << "(declare-fun " << name << " (";
    for (size_t i = 0; i < argToks.size(); ++i) {
      if (i) decls << " ";
      decls << argToks[i];
    }
    decls << ") " << resTok << ")\n";
  }

  std::string emitExpr(const ExprPtr& e) {
    switch (e->kind) {
      case ExprKind::Var:
        declareFun("v_" + e->name, {}, e->sort);
        return "v_" + e->name;
      case ExprKind::IntLit:
        return e->value < 0 ? "(- " + std::to_string(-e->value) + ")"
                            : std::to_string(e->value);
      case ExprKind::BoolLit: return e->bval ? "true" : "false";
      case ExprKind::Add:
        return "(+ " + emitExpr(e->args[0]) + " " + emitExpr(e->args[1]) + ")";
      case ExprKind::Sub:
        return "(- " + emitExpr(e->args[0]) + " " + emitExpr(e->args[1]) + ")";
      case ExprKind::Neg: return "(- " + emitExpr(e->args[0]) + ")";
      case ExprKind::Mul:
        return "(* " + std::to_string(e->value) + " " + emitExpr(e->args[0]) + ")";
      case ExprKind::PredApp: {
        // Monomorphize the predicate per concrete argument sorts.
        std::string fn = "p_" + e->name;
        std::vector<SortPtr> argSorts;
        for (const auto& a : e->args) {
          fn += "_" + detail::mangleSort(a->sort);
          argSorts.push_back(a->sort);
        }
        declareFun(fn, argSorts, e->sort);
        std::string s = "(" + fn;
        for (const auto& a : e->args) s += " " + emitExpr(a);
        s += ")";
        if (e->name == "len") lenApps.push_back(s);
        return s;
      }
      case ExprKind::IfVal: break;
    }
    throw std::runtime_error("emitExpr: unsupported expression");
  }

  std::string emitFormula(const FormulaPtr& f) {
    switch (f->kind) {
      case FormulaKind::True: return "true";
      case FormulaKind::False: return "false";
      case FormulaKind::Cmp: {
        std::string l = emitExpr(f->lhs), r = emitExpr(f->rhs);
        switch (f->op) {
          case CmpOp::Eq: return "(= " + l + " " + r + ")";
          case CmpOp::Ne: return "(not (= " + l + " " + r + "))";
          case CmpOp::Le: return "(<= " + l + " " + r + ")";
          case CmpOp::Lt: return "(< " + l + " " + r + ")";
          case CmpOp::Ge: return "(>= " + l + " " + r + ")";
          case CmpOp::Gt: return "(> " + l + " " + r + ")";
        }
        return "";
      }
      case FormulaKind::BoolAtom: return emitExpr(f->atom);
      case FormulaKind::Not: return "(not " + emitFormula(f->kids[0]) + ")";
      case FormulaKind::And:
        return "(and " + emitFormula(f->kids[0]) + " " +
               emitFormula(f->kids[1]) + ")";
      case FormulaKind::Or:
        return "(or " + emitFormula(f->kids[0]) + " " +
               emitFormula(f->kids[1]) + ")";
      case FormulaKind::Implies:
        return "(=> " + emitFormula(f->kids[0]) + " " +
               emitFormula(f->kids[1]) + ")";
      case FormulaKind::Iff:
        return "(= " + emitFormula(f->kids[0]) + " " +
               emitFormula(f->kids[1]) + ")";
      case FormulaKind::Opaque: {
        // Uninterpreted boolean application over free program variables,
        // keyed by the clause's alpha-normal print. Substitution into the
        // clause shows up as different application arguments, so equal
        // contexts share the same atom.
        std::map<std::string, SortPtr> fv = freeVars(f);
        // The atom name must only depend on the clause shape, not on the
        // particular free variable names: alpha-rename free vars in order.
        std::map<std::string, ExprPtr> normSub;
        int i = 0;
        std::vector<ExprPtr> appArgs;
        std::vector<SortPtr> argSorts;
        for (const auto& [n, s] : fv) {
          normSub[n] = mkVar("%f" + std::to_string(i++), s);
          appArgs.push_back(mkVar(n, s));
          argSorts.push_back(s);
        }
        FormulaPtr normBody = substitute(f->body, normSub);
        std::string key = render(normBody);
        std::string fn = "q_" + std::to_string(std::hash<std::string>{}(key));
        declareFun(fn, argSorts, boolSort());
        std::string s = appArgs.empty() ? fn : "(" + fn;
        for (const auto& a : appArgs) s += " " + emitExpr(a);
        if (!appArgs.empty()) s += ")";
        return s;
      }
    }
    return "";
  }
};

// Emit a deterministic, self-contained SMT-LIB script that is unsatisfiable
// iff (env.facts /\ lhs) entails rhs. The len(x) >= 0 axiom is instantiated
// for every len application occurring anywhere in the script.
inline std::string emitSmtLib(const TypingEnv& env, const FormulaPtr& lhs,
                              const FormulaPtr& rhs) {
  SmtEmitter em;
  // Declare env variables first so their sorts are fixed deterministically.
  for (const auto& [n, s] : env.vars) em.declareFun("v_" + n, {}, s);
  std::vector<std::string> lines;
  for (const auto& f : env.facts) lines.push_back("(assert " + em.emitFormula(f) + ")");
  lines.push_back("(assert " + em.emitFormula(lhs) + ")");
  lines.push_back("(assert (not " + em.emitFormula(rhs) + "))");
  // len is a non-negative measure: instantiate the axiom per application.
  std::set<std::string> seen;
  std::string axioms;
  for (const auto& app : em.lenApps) {
    if (seen.insert(app).second) axioms += "(assert (>= " + app + " 0))\n";
  }
  std::ostringstream out;
  out << "(set-logic ALL)\n" << em.decls.str() << axioms;
  for (const auto& l : lines) out << l << "\n";
  out << "(check-sat)\n";
  return out.str();
}

// Formula statistics used by budget heuristics and tests.
struct FormulaStats {
  size_t nodes = 0;
  size_t atoms = 0;
  size_t opaques = 0;
};

inline void statsRec(const FormulaPtr& f, FormulaStats& s) {
  s.nodes++;
  switch (f->kind) {
    case FormulaKind::Cmp:
    case FormulaKind::BoolAtom: s.atoms++; return;
    case FormulaKind::Opaque: s.opaques++; return;
    case FormulaKind::True:
    case FormulaKind::False: return;
    default:
      for (const auto& k : f->kids) statsRec(k, s);
  }
}

inline FormulaStats stats(const FormulaPtr& f) {
  FormulaStats s;
  statsRec(f, s);
  return s;
}

}  // namespace qsyn::logic
