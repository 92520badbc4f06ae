#pragma once
// Shared fixtures: the list-manipulation demo library and small helpers.

#include <string>

#include "qsyn/lang.hpp"
#include "qsyn/logic.hpp"
#include "qsyn/smt.hpp"
#include "qsyn/types.hpp"

namespace fixtures {

using namespace qsyn;

inline smt::Oracle& oracle() {
  static smt::Oracle o(smt::resolveSolverCommand(""));
  return o;
}

inline logic::SortPtr la() { return logic::listOf(logic::tyVarSort("a")); }
inline logic::ExprPtr lenOf(logic::ExprPtr e) {
  return logic::mkPredApp("len", {std::move(e)}, logic::intSort());
}
inline logic::ExprPtr vInt(const std::string& n) {
  return logic::mkVar(n, logic::intSort());
}
inline logic::ExprPtr vLa(const std::string& n) { return logic::mkVar(n, la()); }

inline types::RefTypePtr natTy() {
  auto nu = vInt("v");
  return types::mkBase(
      "v", logic::intSort(),
      logic::mkCmp(logic::CmpOp::Ge, nu, logic::mkInt(0)));
}
inline types::RefTypePtr listTy(logic::FormulaPtr ref = logic::mkTrue()) {
  return types::mkBase("v", la(), std::move(ref));
}

// The demo library: list manipulation components with measure-based
// refinements (len over lists; fst/snd over pairs; elems over lists/trees).
inline lang::Library demoLibrary() {
  using namespace logic;
  lang::Library lib;
  auto pairLa = pairOf(la(), la());
  auto nuInt = vInt("v");
  auto nuLa = vLa("v");
  auto nuPair = mkVar("v", pairLa);

  // take : (x:nat) -> (xs:[a]) -> {v:[a] | len(v) <= x || len(v) = 0}
  lib.add("take",
          types::mkForall(
              "a",
              types::mkArrow(
                  "x", natTy(),
                  types::mkArrow(
                      "xs", listTy(),
                      listTy(mkOr(mkCmp(CmpOp::Le, lenOf(nuLa), vInt("x")),
                                  mkCmp(CmpOp::Eq, lenOf(nuLa), mkInt(0))))))));
  // drop : (x:nat) -> (xs:[a]) -> {v:[a] | len(v) <= len(xs) - x}
  lib.add("drop",
          types::mkForall(
              "a",
              types::mkArrow(
                  "x", natTy(),
                  types::mkArrow(
                      "xs", listTy(),
                      listTy(mkCmp(CmpOp::Le, lenOf(nuLa),
                                   mkSub(lenOf(vLa("xs")), vInt("x"))))))));
  // splitAt : (x:nat) -> (xs:[a]) ->
  //           {v:([a],[a]) | len(fst v) <= x && len(snd v) <= len(xs) - x}
  auto fstV = mkPredApp("fst", {nuPair}, la());
  auto sndV = mkPredApp("snd", {nuPair}, la());
  lib.add("splitAt",
          types::mkForall(
              "a",
              types::mkArrow(
                  "x", natTy(),
                  types::mkArrow(
                      "xs", listTy(),
                      types::mkBase(
                          "v", pairLa,
                          mkAnd(mkCmp(CmpOp::Le, lenOf(fstV), vInt("x")),
                                mkCmp(CmpOp::Le, lenOf(sndV),
                                      mkSub(lenOf(vLa("xs")), vInt("x")))))))));
  // incr : (x:nat) -> {v:int | v = x + 1}
  lib.add("incr",
          types::mkArrow("x", natTy(),
                         types::mkBase("v", intSort(),
                                       mkCmp(CmpOp::Eq, nuInt,
                                             mkAdd(vInt("x"), mkInt(1))))));
  // decr : (x:nat) -> {v:int | v = x - 1}
  lib.add("decr",
          types::mkArrow("x", natTy(),
                         types::mkBase("v", intSort(),
                                       mkCmp(CmpOp::Eq, nuInt,
                                             mkSub(vInt("x"), mkInt(1))))));
  // fst : (x:([a],[a])) -> {v:[a] | v = fst(x)}
  auto xPair = mkVar("x", pairLa);
  lib.add("fst",
          types::mkForall(
              "a", types::mkArrow(
                       "x", types::mkBase("v", pairLa, mkTrue()),
                       listTy(mkCmp(CmpOp::Eq, nuLa,
                                    mkPredApp("fst", {xPair}, la()))))));
  // snd : (x:([a],[a])) -> {v:[a] | v = snd(x)}
  lib.add("snd",
          types::mkForall(
              "a", types::mkArrow(
                       "x", types::mkBase("v", pairLa, mkTrue()),
                       listTy(mkCmp(CmpOp::Eq, nuLa,
                                    mkPredApp("snd", {xPair}, la()))))));
  // flatten : (ts : tree a) -> {v:[a] | elems(v) = elems(ts)}
  auto treeA = treeOf(tyVarSort("a"));
  lib.add("flatten",
          types::mkForall(
              "a",
              types::mkArrow(
                  "ts", types::mkBase("v", treeA, mkTrue()),
                  listTy(mkCmp(CmpOp::Eq, mkPredApp("elems", {nuLa}, la()),
                               mkPredApp("elems", {mkVar("ts", treeA)}, la()))))));
  // parse : (xs:{v:[a] | even_len(v)}) -> {v:tree a | elems(v) = elems(xs)}
  lib.add("parse",
          types::mkForall(
              "a",
              types::mkArrow(
                  "xs",
                  listTy(mkBoolAtom(mkPredApp("even_len", {nuLa}, boolSort()))),
                  types::mkBase(
                      "v", treeA,
                      mkCmp(CmpOp::Eq,
                            mkPredApp("elems", {mkVar("v", treeA)}, la()),
                            mkPredApp("elems", {vLa("xs")}, la()))))));
  // clear : {v:[a] | len(v) = 0}   (a constant)
  lib.add("clear", types::mkForall(
                       "a", listTy(mkCmp(CmpOp::Eq, lenOf(nuLa), mkInt(0)))));
  // rev : (xs:[a]) -> {v:[a] | len(v) = len(xs) && (forall u w. ord...)}
  auto u = mkVar("%b0", intSort());
  auto w = mkVar("%b1", intSort());
  auto ordBody = mkImplies(
      mkBoolAtom(mkPredApp("ord", {u, w, vLa("xs")}, boolSort())),
      mkBoolAtom(mkPredApp("ord", {w, u, nuLa}, boolSort())));
  lib.add("rev",
          types::mkForall(
              "a", types::mkArrow(
                       "xs", listTy(),
                       listTy(mkAnd(mkCmp(CmpOp::Eq, lenOf(nuLa), lenOf(vLa("xs"))),
                                    mkOpaque(ordBody, {"%b0", "%b1"},
                                             {intSort(), intSort()}))))));
  // pair : (a:'p) -> (b:'q) -> {v:('p,'q) | fst v = a && snd v = b}
  auto p = tyVarSort("p"), q = tyVarSort("q");
  auto pq = pairOf(p, q);
  auto nuPq = mkVar("v", pq);
  lib.add("pair",
          types::mkForall(
              "p",
              types::mkForall(
                  "q",
                  types::mkArrow(
                      "a", types::mkBase("v", p, mkTrue()),
                      types::mkArrow(
                          "b", types::mkBase("v", q, mkTrue()),
                          types::mkBase(
                              "v", pq,
                              mkAnd(mkCmp(CmpOp::Eq, mkPredApp("fst", {nuPq}, p),
                                          mkVar("a", p)),
                                    mkCmp(CmpOp::Eq, mkPredApp("snd", {nuPq}, q),
                                          mkVar("b", q)))))))));
  return lib;
}

// The demo library plus `grab`, a twin of `take` whose post is logically
// equivalent but spelled differently (disjuncts swapped), so its result
// states are prime candidates for similarity merging.
inline lang::Library demoLibraryWithTwin() {
  using namespace logic;
  auto lib = demoLibrary();
  auto nuLa = vLa("v");
  lib.add("grab",
          types::mkForall(
              "a",
              types::mkArrow(
                  "x", natTy(),
                  types::mkArrow(
                      "xs", listTy(),
                      listTy(mkOr(mkCmp(CmpOp::Eq, lenOf(nuLa), mkInt(0)),
                                  mkCmp(CmpOp::Le, lenOf(nuLa), vInt("x"))))))));
  return lib;
}

// Refined goal: (x:nat) -> (y:nat) -> (z:[a]) ->
//               {v:([a],[a]) | len(fst v) <= x && len(snd v) <= len(z) - y}
inline types::SynthesisQuery refinedQuery() {
  using namespace logic;
  auto pairLa = pairOf(la(), la());
  auto nuPair = mkVar("v", pairLa);
  auto goalRef =
      mkAnd(mkCmp(CmpOp::Le, lenOf(mkPredApp("fst", {nuPair}, la())), vInt("x")),
            mkCmp(CmpOp::Le, lenOf(mkPredApp("snd", {nuPair}, la())),
                  mkSub(lenOf(vLa("z")), vInt("y"))));
  auto goal = types::mkForall(
      "a", types::mkArrow(
               "x", natTy(),
               types::mkArrow(
                   "y", natTy(),
                   types::mkArrow("z", listTy(),
                                  types::mkBase("v", pairLa, goalRef)))));
  return types::queryFromGoal(goal);
}

// The liberal variant: same shape, needs the second component to fit after
// removing both prefixes. Excludes all single-call solutions.
inline types::SynthesisQuery liberalQuery() {
  using namespace logic;
  auto pairLa = pairOf(la(), la());
  auto nuPair = mkVar("v", pairLa);
  auto goalRef = mkCmp(
      CmpOp::Le, lenOf(mkPredApp("snd", {nuPair}, la())),
      mkSub(mkSub(lenOf(vLa("z")), vInt("x")), vInt("y")));
  auto goal = types::mkForall(
      "a", types::mkArrow(
               "x", natTy(),
               types::mkArrow(
                   "y", natTy(),
                   types::mkArrow("z", listTy(),
                                  types::mkBase("v", pairLa, goalRef)))));
  return types::queryFromGoal(goal);
}

}  // namespace fixtures
