#include "smbcsp/instance.hpp"

#include <algorithm>

#include "doctest.h"
#include "smbcsp/caps.hpp"
#include "smbcsp/error.hpp"
#include "test_util.hpp"

using namespace smbcsp;
using namespace smbcsp::testing;

namespace {

VarDomain dom(std::string id, AlgebraPtr alg, std::vector<int> elems = {}) {
  if (elems.empty()) {
    elems.resize(alg->size());
    for (int i = 0; i < alg->size(); ++i) elems[i] = i;
  }
  return VarDomain{std::move(id), std::move(alg), std::move(elems)};
}

// n variables over the two-element xor algebra, with x_i + x_{i+1} = 1 for
// each consecutive pair.
Instance xor_chain(int n) {
  auto m2 = make_xor2();
  std::vector<std::string> names;
  std::vector<VarDomain> doms;
  for (int i = 0; i < n; ++i) {
    names.push_back("x" + std::to_string(i));
    doms.push_back(dom("M2", m2));
  }
  std::vector<Constraint> cs;
  for (int i = 0; i + 1 < n; ++i) {
    cs.push_back(Constraint{{i, i + 1}, {{0, 1}, {1, 0}}});
  }
  return Instance(std::move(names), std::move(doms), std::move(cs));
}

}  // namespace

TEST_CASE("construction canonicalises constraints") {
  auto m2 = make_xor2();

  SUBCASE("scopes are sorted and tuples permuted") {
    Instance p({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
               {Constraint{{1, 0}, {{0, 1}}}});
    REQUIRE(p.constraints().size() == 1);
    CHECK(p.constraints()[0].scope == std::vector<int>{0, 1});
    CHECK(p.constraints()[0].tuples == std::vector<std::vector<int>>{{1, 0}});
  }

  SUBCASE("unary constraints are absorbed into domains") {
    Instance p({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
               {Constraint{{0}, {{1}}}});
    CHECK(p.constraints().empty());
    CHECK(p.domain(0).elements == std::vector<int>{1});
    CHECK(p.domain(1).elements == std::vector<int>{0, 1});
  }

  SUBCASE("constraints sharing a scope are intersected") {
    Instance p({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
               {Constraint{{0, 1}, {{0, 0}, {1, 1}}},
                Constraint{{1, 0}, {{1, 1}, {0, 1}}}});
    REQUIRE(p.constraints().size() == 1);
    CHECK(p.constraints()[0].tuples == std::vector<std::vector<int>>{{1, 1}});
  }

  SUBCASE("tuples outside the domain product are dropped") {
    Instance p({"x", "y"}, {dom("M2", m2), dom("M2", m2, {0})},
               {Constraint{{0, 1}, {{0, 1}, {1, 0}, {0, 0}}}});
    REQUIRE(p.constraints().size() == 1);
    CHECK(p.constraints()[0].tuples ==
          std::vector<std::vector<int>>{{0, 0}, {1, 0}});
  }

  SUBCASE("invalid inputs are rejected") {
    CHECK(error_code_of([&] {
            Instance({"x", "x"}, {dom("M2", m2), dom("M2", m2)}, {});
          }) == ErrorCode::invalid_input);
    CHECK(error_code_of([&] {
            Instance({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
                     {Constraint{{0, 0}, {{0, 0}}}});
          }) == ErrorCode::invalid_input);
    CHECK(error_code_of([&] {
            Instance({"x"}, {dom("M2", m2)}, {Constraint{{0, 1}, {}}});
          }) == ErrorCode::invalid_input);
    CHECK(error_code_of([&] {
            Instance({"x"}, {dom("M2", m2)}, {Constraint{{0}, {{2}}}});
          }) == ErrorCode::invalid_input);
    CHECK(error_code_of([&] {
            Instance({"x"}, {dom("M2", m2)}, {Constraint{{0}, {{0, 1}}}});
          }) == ErrorCode::invalid_input);
    // Same id bound to two different algebras.
    CHECK(error_code_of([&] {
            Instance({"x", "y"}, {dom("M2", m2), dom("M2", make_chain3())}, {});
          }) == ErrorCode::invalid_input);
  }
}

TEST_CASE("satisfies and brute force") {
  Instance p = xor_chain(3);
  CHECK(p.satisfies({0, 1, 0}));
  CHECK(p.satisfies({1, 0, 1}));
  CHECK_FALSE(p.satisfies({0, 0, 1}));
  CHECK_FALSE(p.satisfies({0, 1}));

  auto r = brute_force(p);
  CHECK(r.sat);
  CHECK(r.witness == std::vector<int>{0, 1, 0});
  CHECK(all_solutions(p) ==
        std::vector<std::vector<int>>{{0, 1, 0}, {1, 0, 1}});

  Instance q = p.with_domain(0, {0}).with_domain(2, {1});
  auto rq = brute_force(q);
  CHECK_FALSE(rq.sat);
  CHECK(all_solutions(q).empty());

  Caps tiny;
  tiny.oracle = 2;
  set_caps_for_testing(tiny);
  CHECK(error_code_of([&] { brute_force(xor_chain(4)); }) == ErrorCode::cap_exceeded);
  set_caps_for_testing(Caps{});
}

TEST_CASE("compatibility check") {
  Instance p = xor_chain(2);
  CHECK(is_compatible(p));

  // {(0,0),(0,1),(1,0)} is not closed under componentwise xor.
  auto m2 = make_xor2();
  Instance q({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
             {Constraint{{0, 1}, {{0, 0}, {0, 1}, {1, 0}}}});
  std::string why;
  CHECK_FALSE(is_compatible(q, &why));
  CHECK(why.find("closed") != std::string::npos);

  // {1, 2} is not a subuniverse of chain3.
  Instance r({"x"}, {dom("C3", make_chain3(), {1, 2})}, {});
  CHECK_FALSE(is_compatible(r, &why));
  CHECK(why.find("subuniverse") != std::string::npos);
}

TEST_CASE("derived instances") {
  Instance p = xor_chain(3);

  SUBCASE("with_domain intersects") {
    Instance q = p.with_domain(1, {0});
    CHECK(q.domain(1).elements == std::vector<int>{0});
    // Tuples using the removed value disappear.
    CHECK(q.constraints()[0].tuples == std::vector<std::vector<int>>{{1, 0}});
  }

  SUBCASE("with_constraint intersects an existing scope") {
    Instance q = p.with_constraint({0, 1}, {{0, 1}, {0, 0}});
    CHECK(q.constraints()[0].tuples == std::vector<std::vector<int>>{{0, 1}});
  }

  SUBCASE("restrict_to keeps inner constraints and projects partial ones") {
    Instance q = p.restrict_to({0, 1});
    CHECK(q.names() == std::vector<std::string>{"x0", "x1"});
    REQUIRE(q.constraints().size() == 1);
    CHECK(q.constraints()[0].scope == std::vector<int>{0, 1});
    CHECK(q.constraints()[0].tuples ==
          std::vector<std::vector<int>>{{0, 1}, {1, 0}});
    // The x1-x2 constraint projects onto x1 as the full domain: absorbed.
    CHECK(q.domain(1).elements == std::vector<int>{0, 1});
  }

  SUBCASE("restriction of a tightened instance projects the tightening") {
    Instance t = p.with_domain(2, {1});
    Instance q = t.restrict_to({1, 2});
    CHECK(q.domain(1).elements == std::vector<int>{1});
    CHECK(q.constraints()[0].tuples == std::vector<std::vector<int>>{{0, 1}});
  }
}

TEST_CASE("(1,1)-minimality") {
  Instance p = xor_chain(2).with_domain(0, {0});
  Instance q = enforce_kl_minimality(p, 1, 1);
  CHECK(q.domain(0).elements == std::vector<int>{0});
  CHECK(q.domain(1).elements == std::vector<int>{1});
  CHECK(q.constraints()[0].tuples == std::vector<std::vector<int>>{{0, 1}});
  CHECK(all_solutions(q) == all_solutions(p));

  // Unsupported parameters are rejected.
  CHECK(error_code_of([&] { enforce_kl_minimality(p, 3, 3); }) ==
        ErrorCode::invalid_input);
}

TEST_CASE("(2,3)-minimality") {
  SUBCASE("materialised scopes become consistent") {
    Instance p = xor_chain(3);
    Instance q = enforce_kl_minimality(p, 2, 3);
    bool found02 = false;
    for (const Constraint& c : q.constraints()) {
      if (c.scope == std::vector<int>{0, 2}) {
        found02 = true;
        CHECK(c.tuples == std::vector<std::vector<int>>{{0, 0}, {1, 1}});
      }
      if (c.scope == std::vector<int>{0, 1, 2}) {
        CHECK(c.tuples ==
              std::vector<std::vector<int>>{{0, 1, 0}, {1, 0, 1}});
      }
    }
    CHECK(found02);
    CHECK(all_solutions(q) == all_solutions(p));
  }

  SUBCASE("an odd xor cycle empties out") {
    Instance p = xor_chain(3).with_constraint({0, 2}, {{0, 1}, {1, 0}});
    CHECK_FALSE(brute_force(p).sat);
    Instance q = enforce_kl_minimality(p, 2, 3);
    CHECK(q.any_constraint_empty());
    CHECK(q.any_domain_empty());
  }

  SUBCASE("solutions are preserved") {
    auto c3 = make_chain3();
    Instance p({"a", "b", "c"},
               {dom("C3", c3), dom("C3", c3), dom("C3", c3, {0, 1})},
               {Constraint{{0, 1}, {{0, 0}, {1, 1}, {2, 2}, {0, 1}}},
                Constraint{{1, 2}, {{0, 0}, {1, 1}, {2, 0}}}});
    Instance q = enforce_kl_minimality(p, 2, 3);
    CHECK(all_solutions(q) == all_solutions(p));
  }
}

TEST_CASE("canonical key") {
  auto m2 = make_xor2();
  Instance a({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
             {Constraint{{0, 1}, {{0, 1}, {1, 0}}}});
  // Same instance presented with a reversed scope and a unary constraint in
  // place of a trimmed domain.
  Instance b({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
             {Constraint{{1, 0}, {{1, 0}, {0, 1}}}});
  CHECK(canonical_key(a) == canonical_key(b));

  Instance c({"u", "v"}, {dom("M2", m2), dom("M2", m2)},
             {Constraint{{0, 1}, {{0, 1}, {1, 0}}}});
  CHECK(canonical_key(a) == canonical_key(c));  // names do not matter

  Instance d = a.with_domain(0, {0});
  Instance e({"x", "y"}, {dom("M2", m2), dom("M2", m2)},
             {Constraint{{0, 1}, {{0, 1}, {1, 0}}}, Constraint{{0}, {{0}}}});
  CHECK(canonical_key(d) == canonical_key(e));
  CHECK(canonical_key(a) != canonical_key(d));
}

TEST_CASE("mass and multiblock size") {
  Instance p = xor_chain(3);
  // Domains 2+2+2, two constraints with two tuples each.
  CHECK(tuple_mass(p) == 10);
  CHECK(max_multiblock_domain_size(p) == 0);

  auto c3 = make_chain3();
  Instance q({"a", "b"}, {dom("C3", c3), dom("C3", c3, {0, 1})}, {});
  CHECK(max_multiblock_domain_size(q) == 3);
  CHECK(q.domain_space() == 6);
}
