// Tests for automaton construction: monomorphization staging, refinement
// resolution, application rounds and goal edges.
#include <catch2/catch_amalgamated.hpp>

#include "qsyn/construct.hpp"
#include "qsyn/reduce.hpp"
#include "helpers.hpp"

using namespace qsyn;

namespace {

// Small fixture for refinement resolution: f applied to a singleton list.
// f : (m:int) -> (xs:[a]) -> {v:[a] | len(v) = len(xs)}
lang::Library resolveLib() {
  using namespace logic;
  lang::Library lib;
  auto nuLa = fixtures::vLa("v");
  lib.add("f", types::mkForall(
                   "a", types::mkArrow(
                            "m", types::mkBase("v", intSort(), mkTrue()),
                            types::mkArrow(
                                "xs", fixtures::listTy(),
                                fixtures::listTy(mkCmp(
                                    CmpOp::Eq, fixtures::lenOf(nuLa),
                                    fixtures::lenOf(fixtures::vLa("xs"))))))));
  return lib;
}

// query: (m:int) -> (xs:{v:[a] | len(v) = 1}) -> {v:[a] | len(v) = 1}
types::SynthesisQuery resolveQuery() {
  using namespace logic;
  auto one = [&] {
    return fixtures::listTy(
        mkCmp(CmpOp::Eq, fixtures::lenOf(fixtures::vLa("v")), mkInt(1)));
  };
  auto goal = types::mkForall(
      "a", types::mkArrow(
               "m", types::mkBase("v", intSort(), mkTrue()),
               types::mkArrow("xs", one(), one())));
  return types::queryFromGoal(goal);
}

}  // namespace

TEST_CASE("stage-1 instantiations follow reachable sorts") {
  auto insts =
      construct::stage1Instantiations(fixtures::demoLibrary(), fixtures::refinedQuery());
  std::set<std::string> names;
  bool pairListOnly = true;
  for (const auto& i : insts) {
    names.insert(i.component);
    if (i.component == "pair")
      for (const auto& [tv, s] : i.subst) {
        (void)tv;
        pairListOnly &= s->render() == "[a]";
      }
  }
  // everything participates: lists, pairs and trees are all reachable
  for (const char* n : {"take", "drop", "splitAt", "fst", "snd", "pair",
                        "clear", "rev", "flatten", "parse", "incr", "decr"})
    REQUIRE(names.count(n) == 1);
  // pair is only ever needed at ([a], [a])
  REQUIRE(pairListOnly);
}

TEST_CASE("init creates variable, component and constant states") {
  construct::Build b(fixtures::oracle(), fixtures::demoLibrary(),
                     fixtures::refinedQuery());
  b.init();
  // three query variables + the clear constant are argument states
  REQUIRE(b.argStates().size() == 4);
  REQUIRE_FALSE(b.funStates().empty());
  // the pair-sorted constant does not exist; z's state carries its identity
  bool sawZ = false;
  for (auto q : b.argStates()) {
    const auto& m = b.meta(q);
    if (m.isVar && m.display == "z") {
      sawZ = true;
      REQUIRE(logic::render(m.type->ref).find("%nu = z") != std::string::npos);
    }
  }
  REQUIRE(sawZ);
}

TEST_CASE("one round saturates multi-argument components") {
  construct::Build b(fixtures::oracle(), fixtures::demoLibrary(),
                     fixtures::refinedQuery());
  b.init();
  REQUIRE(b.expand());
  // splitAt y z exists as a term state after a single round
  bool sawSplit = false;
  for (auto q : b.newStatesLastRound()) {
    const auto& m = b.meta(q);
    std::string post = logic::render(m.type->ref);
    if (m.type->sort->render() == "([a], [a])" &&
        post.find("len(fst(%nu)) <= y") != std::string::npos &&
        post.find("len(snd(%nu)) <= (len(z) - y)") != std::string::npos)
      sawSplit = true;
  }
  REQUIRE(sawSplit);
}

TEST_CASE("states are shared by resolved refinement") {
  construct::Build b(fixtures::oracle(), fixtures::demoLibrary(),
                     fixtures::refinedQuery());
  b.init();
  b.expand();
  size_t afterOne = b.argStates().size();
  b.expand();
  // take x z and take x (anything) resolve to the same closed post, so the
  // take-x family contributes exactly one state; growth stays far below the
  // term count (dozens of round-2 terms, few new posts)
  size_t afterTwo = b.argStates().size();
  REQUIRE(afterTwo > afterOne);
  size_t takeStates = 0;
  for (auto q : b.argStates()) {
    std::string post = logic::render(b.meta(q).type->ref);
    if (post == "(len(%nu) <= x || len(%nu) = 0)") ++takeStates;
  }
  REQUIRE(takeStates == 1);
}

TEST_CASE("resolved refinement conjoins binder facts transitively") {
  construct::Build b(fixtures::oracle(), resolveLib(), resolveQuery());
  b.init();
  REQUIRE(b.expand());
  // f m xs resolves to {v | len(v) = len(xs)}; with the binder fact
  // len(xs) = 1 from the query environment this is equivalent to len(v) = 1
  qta::StateId fmxs = qta::kNoState;
  for (auto q : b.newStatesLastRound()) {
    const auto& m = b.meta(q);
    if (logic::render(m.type->ref) == "len(%nu) = len(xs)") fmxs = q;
  }
  REQUIRE(fmxs != qta::kNoState);
  auto nu = fixtures::vLa("%nu");
  auto one = logic::mkCmp(logic::CmpOp::Eq, fixtures::lenOf(nu), logic::mkInt(1));
  REQUIRE(b.ctx().entails(b.statePost(fmxs), one));
  REQUIRE(b.ctx().entails(one, b.statePost(fmxs)));
  // and the goal edge for it survives pruning
  reduce::pruneEngine(b);
  bool goalAlive = false;
  for (int ti : b.automaton().incoming(b.goalState())) {
    const auto& t = b.automaton().transition(ti);
    if (!t.bottom && t.children[1] == fmxs) goalAlive = true;
  }
  REQUIRE(goalAlive);
}

TEST_CASE("lazy monomorphization eliminates sorts in two stages") {
  using namespace logic;
  // g : forall t. (x:{v:t | special(v)}) -> {v:int | v >= 0}
  //   t is not determined by the result, so candidates come from the sorts
  //   the query can actually produce.
  // h : (b:bool) -> int   mentions bool, but nothing produces a bool.
  lang::Library lib;
  auto specialOf = [](const std::string& n, SortPtr s) {
    return mkBoolAtom(mkPredApp("special", {mkVar(n, s)}, boolSort()));
  };
  auto tv = tyVarSort("t");
  lib.add("g", types::mkForall(
                   "t", types::mkArrow(
                            "x", types::mkBase("v", tv, specialOf("v", tv)),
                            types::mkBase("v", intSort(),
                                          mkCmp(CmpOp::Ge, fixtures::vInt("v"), mkInt(0))))));
  lib.add("h", types::mkArrow("b", types::mkBase("v", boolSort(), mkTrue()),
                              types::mkBase("v", intSort(), mkTrue())));
  // query: (n:{v:int | special(v)}) -> (c:char) -> {v:int | v >= 0}
  auto goal = types::mkArrow(
      "n", types::mkBase("v", intSort(), specialOf("v", intSort())),
      types::mkArrow("c", types::mkBase("v", charSort(), mkTrue()),
                     types::mkBase("v", intSort(),
                                   mkCmp(CmpOp::Ge, fixtures::vInt("v"), mkInt(0)))));
  auto query = types::queryFromGoal(goal);

  construct::Build b(fixtures::oracle(), lib, query);
  auto rep = b.monoReport();
  auto hasInst = [](const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
      if (s.find(needle) != std::string::npos) return true;
    return false;
  };
  // stage 1 (syntactic): int and char are producible, bool is not
  REQUIRE(hasInst(rep.stage1, "g t:=int"));
  REQUIRE(hasInst(rep.stage1, "g t:=char"));
  REQUIRE_FALSE(hasInst(rep.stage1, "g t:=bool"));
  // stage 2 (semantic): only the int variable meets special(v)
  REQUIRE(hasInst(rep.stage2, "g t:=int"));
  REQUIRE_FALSE(hasInst(rep.stage2, "g t:=char"));
  // and h is never instantiable at all: its bool domain has no source
  REQUIRE(hasInst(rep.stage1, "h"));
  REQUIRE_FALSE(hasInst(rep.stage2, "h"));
}
