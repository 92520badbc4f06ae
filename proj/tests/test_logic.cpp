// Formula layer: substitution, rendering, SMT-LIB emission, and the live
// entailment oracle (solver resolved via QTA_SOLVER).

#include <catch2/catch_amalgamated.hpp>

#include "qsyn/logic.hpp"
#include "qsyn/smt.hpp"

using namespace qsyn;

namespace {
smt::Oracle& oracle() {
  static smt::Oracle o(smt::resolveSolverCommand(""));
  return o;
}

logic::ExprPtr lenOf(const logic::ExprPtr& e) {
  return logic::mkPredApp("len", {e}, logic::intSort());
}
}  // namespace

TEST_CASE("sorts are interned and render stably") {
  auto l1 = logic::listOf(logic::tyVarSort("a"));
  auto l2 = logic::listOf(logic::tyVarSort("a"));
  CHECK(l1.get() == l2.get());
  CHECK(l1->render() == "[a]");
  CHECK(logic::pairOf(l1, logic::intSort())->render() == "([a], int)");
}

TEST_CASE("sort unification instantiates tyvars consistently") {
  std::map<std::string, logic::SortPtr> sub;
  auto pat = logic::pairOf(logic::tyVarSort("a"), logic::tyVarSort("a"));
  CHECK(logic::unifySorts(pat, logic::pairOf(logic::intSort(), logic::intSort()), sub));
  CHECK(sub.at("a")->render() == "int");
  std::map<std::string, logic::SortPtr> sub2;
  CHECK_FALSE(logic::unifySorts(
      pat, logic::pairOf(logic::intSort(), logic::boolSort()), sub2));
}

TEST_CASE("substitution is capture-free through opaque atoms") {
  auto xs = logic::mkVar("xs", logic::listOf(logic::intSort()));
  auto u = logic::mkVar("%b0", logic::intSort());
  // (forall %b0. len(xs) >= %b0-ish shape) -- bound var must shadow.
  auto body = logic::mkCmp(logic::CmpOp::Ge, lenOf(xs), u);
  auto op = logic::mkOpaque(body, {"%b0"}, {logic::intSort()});
  auto zs = logic::mkVar("zs", logic::listOf(logic::intSort()));
  auto sub = logic::substitute(op, {{"xs", zs}, {"%b0", logic::mkInt(7)}});
  std::string r = logic::render(sub);
  CHECK(r.find("zs") != std::string::npos);
  CHECK(r.find("7") == std::string::npos);
}

TEST_CASE("emitSmtLib is deterministic and self-contained") {
  auto nu = logic::mkVar("nu", logic::listOf(logic::tyVarSort("a")));
  auto x = logic::mkVar("x", logic::intSort());
  logic::TypingEnv env;
  env.addFact(logic::mkCmp(logic::CmpOp::Ge, x, logic::mkInt(0)));
  auto lhs = logic::mkCmp(logic::CmpOp::Eq, lenOf(nu), logic::mkInt(0));
  auto rhs = logic::mkOr(
      logic::mkCmp(logic::CmpOp::Le, lenOf(nu), x),
      logic::mkCmp(logic::CmpOp::Eq, lenOf(nu), logic::mkInt(0)));
  std::string s1 = logic::emitSmtLib(env, lhs, rhs);
  std::string s2 = logic::emitSmtLib(env, lhs, rhs);
  CHECK(s1 == s2);
  CHECK(s1.find("(set-logic ALL)") == 0);
  CHECK(s1.find("(check-sat)") != std::string::npos);
  // len axiom instantiated
  CHECK(s1.find("(assert (>= (p_len_LaR v_nu) 0))") != std::string::npos);
}

TEST_CASE("entails: basic arithmetic facts") {
  auto x = logic::mkVar("x", logic::intSort());
  logic::TypingEnv env;
  auto gt5 = logic::mkCmp(logic::CmpOp::Gt, x, logic::mkInt(5));
  auto gt0 = logic::mkCmp(logic::CmpOp::Gt, x, logic::mkInt(0));
  CHECK(oracle().entails(env, gt5, gt0));
  CHECK_FALSE(oracle().entails(env, gt0, gt5));
}

TEST_CASE("entails: len = 0 entails len <= x under x >= 0") {
  auto nu = logic::mkVar("nu", logic::listOf(logic::tyVarSort("a")));
  auto x = logic::mkVar("x", logic::intSort());
  logic::TypingEnv env;
  env.bind("x", logic::intSort());
  env.addFact(logic::mkCmp(logic::CmpOp::Ge, x, logic::mkInt(0)));
  auto lhs = logic::mkCmp(logic::CmpOp::Eq, lenOf(nu), logic::mkInt(0));
  auto rhs = logic::mkOr(
      logic::mkCmp(logic::CmpOp::Le, lenOf(nu), x),
      logic::mkCmp(logic::CmpOp::Eq, lenOf(nu), logic::mkInt(0)));
  CHECK(oracle().entails(env, lhs, rhs));
  // without the x >= 0 fact, len <= x alone is not implied by len = 0
  logic::TypingEnv bare;
  auto rhsNoDisj = logic::mkCmp(logic::CmpOp::Le, lenOf(nu), x);
  CHECK_FALSE(oracle().entails(bare, lhs, rhsNoDisj));
}

TEST_CASE("entails: len axiom len(v) >= 0 is available") {
  auto nu = logic::mkVar("nu", logic::listOf(logic::intSort()));
  logic::TypingEnv env;
  auto lhs = logic::mkCmp(logic::CmpOp::Le, lenOf(nu), logic::mkInt(0));
  auto rhs = logic::mkCmp(logic::CmpOp::Eq, lenOf(nu), logic::mkInt(0));
  CHECK(oracle().entails(env, lhs, rhs));
}

TEST_CASE("entails: uninterpreted measure congruence") {
  // nu = fst(t) and len(fst(t)) <= x entail len(nu) <= x.
  auto pr = logic::pairOf(logic::listOf(logic::tyVarSort("a")),
                          logic::listOf(logic::tyVarSort("a")));
  auto t = logic::mkVar("t", pr);
  auto nu = logic::mkVar("nu", logic::listOf(logic::tyVarSort("a")));
  auto x = logic::mkVar("x", logic::intSort());
  auto fstT = logic::mkPredApp("fst", {t}, logic::listOf(logic::tyVarSort("a")));
  logic::TypingEnv env;
  auto lhs = logic::mkAnd(
      logic::mkCmp(logic::CmpOp::Eq, nu, fstT),
      logic::mkCmp(logic::CmpOp::Le, lenOf(fstT), x));
  auto rhs = logic::mkCmp(logic::CmpOp::Le, lenOf(nu), x);
  CHECK(oracle().entails(env, lhs, rhs));
}

TEST_CASE("entails: opaque quantified atoms propagate by congruence only") {
  auto xs = logic::mkVar("xs", logic::listOf(logic::tyVarSort("a")));
  auto nu = logic::mkVar("nu", logic::listOf(logic::tyVarSort("a")));
  auto mkOrd = [&](logic::ExprPtr v) {
    auto u = logic::mkVar("%b0", logic::intSort());
    auto body = logic::mkCmp(logic::CmpOp::Ge,
                             logic::mkPredApp("len", {std::move(v)}, logic::intSort()), u);
    return logic::mkOpaque(body, {"%b0"}, {logic::intSort()});
  };
  logic::TypingEnv env;
  // identical opaque atom on both sides: entailed
  CHECK(oracle().entails(env, mkOrd(xs), mkOrd(xs)));
  // different free variables: not entailed (atom is uninterpreted)
  CHECK_FALSE(oracle().entails(env, mkOrd(xs), mkOrd(nu)));
}

TEST_CASE("oracle caches alpha-equivalent queries") {
  auto mk = [](const std::string& n) {
    auto v = logic::mkVar(n, logic::intSort());
    return logic::mkCmp(logic::CmpOp::Gt, v, logic::mkInt(3));
  };
  logic::TypingEnv env;
  auto before = oracle().stats().solverCalls;
  (void)oracle().entails(env, mk("fresh_q1"), mk("fresh_q1"));
  // Identical shape with a different binder name must not hit the solver.
  auto calls = oracle().stats().solverCalls;
  (void)oracle().entails(env, mk("fresh_q2"), mk("fresh_q2"));
  CHECK(oracle().stats().solverCalls == calls);
  (void)before;
}

TEST_CASE("formula stats") {
  auto x = logic::mkVar("x", logic::intSort());
  auto f = logic::mkAnd(logic::mkCmp(logic::CmpOp::Gt, x, logic::mkInt(0)),
                        logic::mkCmp(logic::CmpOp::Lt, x, logic::mkInt(9)));
  auto st = logic::stats(f);
  CHECK(st.atoms == 2);
  CHECK(st.nodes == 3);
}
