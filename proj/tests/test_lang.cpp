// Term language: rendering, depth metric, the type checker, and the
// brute-force enumerator.

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace qsyn;
using fixtures::oracle;
using lang::mkCall;
using lang::mkVar;

namespace {
const lang::Library& lib() {
  static lang::Library l = fixtures::demoLibrary();
  return l;
}
}  // namespace

TEST_CASE("render and ANF print") {
  auto t = mkCall("splitAt", {mkVar("y"), mkCall("drop", {mkVar("x"), mkVar("z")})});
  CHECK(lang::render(t) == "splitAt y (drop x z)");
  std::string anf = lang::renderAnf(t);
  CHECK(anf.find("let t1 = drop x z in") != std::string::npos);
  CHECK(anf.find("let t2 = splitAt y t1 in") != std::string::npos);
}

TEST_CASE("depth counts saturated call nesting, size counts all calls") {
  auto canonical = mkCall(
      "pair",
      {mkCall("take", {mkVar("x"),
                       mkCall("fst", {mkCall("splitAt", {mkVar("y"), mkVar("z")})})}),
       mkCall("snd", {mkCall("splitAt", {mkVar("y"), mkVar("z")})})});
  CHECK(lang::callDepth(canonical) == 4);
  CHECK(lang::callCount(canonical) == 6);
  CHECK(lang::callDepth(mkVar("z")) == 0);
  CHECK(lang::callDepth(mkCall("take", {mkVar("x"), mkVar("z")})) == 1);
}

TEST_CASE("check accepts the canonical refined solution") {
  auto q = fixtures::refinedQuery();
  auto canonical = mkCall(
      "pair",
      {mkCall("take", {mkVar("x"),
                       mkCall("fst", {mkCall("splitAt", {mkVar("y"), mkVar("z")})})}),
       mkCall("snd", {mkCall("splitAt", {mkVar("y"), mkVar("z")})})});
  CHECK(lang::check(oracle(), lib(), q, canonical));
}

TEST_CASE("check accepts the short refined solution too") {
  auto q = fixtures::refinedQuery();
  // pair (take x z) (snd (splitAt y z)) also satisfies the refined goal.
  auto t = mkCall("pair", {mkCall("take", {mkVar("x"), mkVar("z")}),
                           mkCall("snd", {mkCall("splitAt", {mkVar("y"), mkVar("z")})})});
  CHECK(lang::check(oracle(), lib(), q, t));
}

TEST_CASE("check rejects ill-typed and wrongly-refined terms") {
  auto q = fixtures::refinedQuery();
  // splitAt y z : second component bound is len(z) - y, first is <= y not x.
  CHECK_FALSE(lang::check(oracle(), lib(), q,
                          mkCall("splitAt", {mkVar("y"), mkVar("z")})));
  // sort error: take z z
  CHECK_FALSE(lang::check(oracle(), lib(), q,
                          mkCall("take", {mkVar("z"), mkVar("z")})));
  // arity/kind error: fst applied to a list
  CHECK_FALSE(lang::check(oracle(), lib(), q, mkCall("fst", {mkVar("z")})));
  // precondition failure: parse requires even_len
  CHECK_FALSE(lang::check(oracle(), lib(), q,
                          mkCall("flatten", {mkCall("parse", {mkVar("z")})})));
}

TEST_CASE("check enforces nat preconditions through composition") {
  auto q = fixtures::refinedQuery();
  // incr (decr x): decr x may be -1, which does not satisfy incr's nat domain.
  auto bad = mkCall("incr", {mkCall("decr", {mkVar("x")})});
  CHECK_FALSE(lang::check(oracle(), lib(), q, bad));
  // incr (incr x) is fine (as a term; it does not inhabit the pair goal).
  lang::CheckContext ctx{&oracle(), &lib(), &q, q.baseEnv(), 0};
  auto ty = lang::inferType(ctx, mkCall("incr", {mkCall("incr", {mkVar("x")})}));
  REQUIRE(ty != nullptr);
  CHECK(ty->kind == types::TyKind::Base);
}

TEST_CASE("inferred application types carry substituted postconditions") {
  auto q = fixtures::refinedQuery();
  lang::CheckContext ctx{&oracle(), &lib(), &q, q.baseEnv(), 0};
  auto ty = lang::inferType(ctx, mkCall("drop", {mkVar("x"), mkVar("z")}));
  REQUIRE(ty != nullptr);
  CHECK(types::render(ty).find("len(z) - x") != std::string::npos);
}

TEST_CASE("if join types carry path conditions") {
  // Tiny library with a boolean observer to drive an if.
  lang::Library l;
  auto nuB = logic::mkVar("v", logic::boolSort());
  auto x = fixtures::vInt("x");
  // isPos : (x:int) -> {v:bool | v = true <=> x > 0}
  l.add("isPos",
        types::mkArrow(
            "x", types::mkBase("v", logic::intSort(), logic::mkTrue()),
            types::mkBase("v", logic::boolSort(),
                          logic::mkIff(logic::mkCmp(logic::CmpOp::Eq, nuB,
                                                    logic::mkBool(true)),
                                       logic::mkCmp(logic::CmpOp::Gt, x,
                                                    logic::mkInt(0))))));
  // neg : (x:int) -> {v:int | v = 0 - x}
  auto nuI = logic::mkVar("v", logic::intSort());
  l.add("neg", types::mkArrow(
                   "x", types::mkBase("v", logic::intSort(), logic::mkTrue()),
                   types::mkBase("v", logic::intSort(),
                                 logic::mkCmp(logic::CmpOp::Eq, nuI,
                                              logic::mkSub(logic::mkInt(0), x)))));
  // goal: (x:int) -> {v:int | v >= 0}   i.e. abs
  auto goal = types::mkArrow(
      "x", types::mkBase("v", logic::intSort(), logic::mkTrue()),
      types::mkBase("v", logic::intSort(),
                    logic::mkCmp(logic::CmpOp::Ge, nuI, logic::mkInt(0))));
  auto q = types::queryFromGoal(goal);
  auto abs = lang::mkIf(mkCall("isPos", {mkVar("x")}), mkVar("x"),
                        mkCall("neg", {mkVar("x")}));
  CHECK(lang::check(oracle(), l, q, abs));
  // without the branch condition the same join would not verify
  auto wrong = lang::mkIf(mkCall("isPos", {mkVar("x")}),
                          mkCall("neg", {mkVar("x")}), mkVar("x"));
  CHECK_FALSE(lang::check(oracle(), l, q, wrong));
}

TEST_CASE("bruteForceEnumerate finds the liberal two-call solutions") {
  auto q = fixtures::liberalQuery();
  auto res = lang::bruteForceEnumerate(oracle(), lib(), q, 2, false, 200000);
  REQUIRE_FALSE(res.budgetExceeded);
  std::set<std::string> texts;
  for (const auto& s : res.solutions) texts.insert(lang::render(s));
  CHECK(texts.count("splitAt y (drop x z)") == 1);
  // single-call candidates must all be rejected by the liberal goal
  for (const auto& s : res.solutions) CHECK(lang::callDepth(s) >= 2);
}

TEST_CASE("bruteForceEnumerate respects the budget") {
  auto q = fixtures::refinedQuery();
  auto res = lang::bruteForceEnumerate(oracle(), lib(), q, 3, false, 50);
  CHECK(res.budgetExceeded);
}
