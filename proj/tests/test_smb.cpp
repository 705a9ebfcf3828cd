#include "smbcsp/smb.hpp"

#include <string>

#include "doctest.h"
#include "smbcsp/error.hpp"
#include "test_util.hpp"

using namespace smbcsp;
using namespace smbcsp::testing;

namespace {

// Independent restatement of the qualifying conditions, used to cross-check
// detect_smb against exhaustive congruence enumeration.
bool qualifies_oracle(const FiniteAlgebra& a, const Partition& p) {
  const int n = a.size();
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (p.block_of(x) == p.block_of(y)) {
        if (a.meet(x, y) != x) return false;
        if (a.d(x, y, y) != x || a.d(y, y, x) != x) return false;
      }
      if (!p.same_block(a.meet(x, y), a.meet(y, x))) return false;
      for (int z = 0; z < n; ++z) {
        if (!p.same_block(a.meet(a.meet(x, y), z), a.meet(x, a.meet(y, z)))) {
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("block structure of the worked examples") {
  SUBCASE("chain3: xor block below a point") {
    auto alg = make_chain3();
    SmbStructure s = detect_smb(*alg);
    CHECK(s.sim == Partition::from_blocks(3, {{0, 1}, {2}}));
    CHECK(s.block_count() == 2);
    CHECK(s.blocks[s.least_block] == std::vector<int>{0, 1});
    CHECK(s.shape == OrderShape::linear);
    CHECK(s.regular);
    CHECK_FALSE(s.is_unital());
    CHECK_FALSE(s.is_malcev());
    CHECK(s.greatest_block() == s.block_of(2));
    CHECK(s.block_leq(s.block_of(0), s.block_of(2)));
    CHECK_FALSE(s.block_leq(s.block_of(2), s.block_of(0)));
    CHECK(s.min_members({0, 1, 2}) == std::vector<int>{0, 1});
    CHECK(s.min_members({1, 2}) == std::vector<int>{1});
    CHECK(s.min_block({2}) == s.block_of(2));
    CHECK(error_code_of([&] { s.min_block({}); }) == ErrorCode::invalid_input);
  }

  SUBCASE("xor2: a single Mal'cev block") {
    auto alg = make_xor2();
    SmbStructure s = detect_smb(*alg);
    CHECK(s.sim == Partition::full(2));
    CHECK(s.is_malcev());
    CHECK(s.shape == OrderShape::malcev);
    CHECK(s.regular);
    CHECK_FALSE(s.is_unital());
  }

  SUBCASE("sl2: two-element chain semilattice") {
    auto alg = make_sl2();
    SmbStructure s = detect_smb(*alg);
    CHECK(s.sim == Partition::equality(2));
    CHECK(s.shape == OrderShape::linear);
    CHECK(s.regular);
    CHECK(s.unit == 1);
    CHECK(s.least_block == s.block_of(0));
  }

  SUBCASE("one-element algebra") {
    auto alg = make_proj(1);
    SmbStructure s = detect_smb(*alg);
    CHECK(s.is_malcev());
    CHECK(s.unit == 0);
    CHECK(s.regular);
  }
}

TEST_CASE("at most one congruence qualifies, and detection finds it") {
  for (auto alg : {make_chain3(), make_xor2(), make_sl2(), make_flat3(),
                   make_tree4(), make_diamond4(), make_skew4(), make_tangled4()}) {
    int count = 0;
    Partition witness;
    for (const Partition& p : all_congruences_exhaustive(*alg)) {
      if (qualifies_oracle(*alg, p)) {
        ++count;
        witness = p;
      }
    }
    INFO(alg->name());
    REQUIRE(count == 1);
    CHECK(detect_smb(*alg).sim == witness);
  }
}

TEST_CASE("detection failure reports a witness") {
  // Both operations first projections: no congruence qualifies; under the
  // coarsest candidate d(y,y,x) = y breaks the Mal'cev requirement.
  auto alg = make_proj(2);
  std::string why;
  CHECK_FALSE(try_detect_smb(*alg, &why).has_value());
  CHECK(why.find("Mal'cev") != std::string::npos);
  CHECK(error_code_of([&] { detect_smb(*alg); }) == ErrorCode::not_smb);
}

TEST_CASE("order shape classification") {
  CHECK(detect_smb(*make_xor2()).shape == OrderShape::malcev);
  CHECK(detect_smb(*make_sl2()).shape == OrderShape::linear);
  CHECK(detect_smb(*make_chain3()).shape == OrderShape::linear);
  CHECK(detect_smb(*make_flat3()).shape == OrderShape::flat);
  CHECK(detect_smb(*make_tree4()).shape == OrderShape::tree);
  CHECK(detect_smb(*make_diamond4()).shape == OrderShape::general);
  CHECK(detect_smb(*make_skew4()).shape == OrderShape::linear);

  CHECK(order_shape_name(OrderShape::flat) == "flat");
  CHECK(order_shape_name(OrderShape::general) == "general");
}

TEST_CASE("regular identity failures") {
  auto chain3 = make_chain3();
  CHECK(regular_identity_failures(*chain3, detect_smb(*chain3)).empty());

  auto skew4 = make_skew4();
  SmbStructure s4 = detect_smb(*skew4);
  CHECK_FALSE(s4.regular);
  auto failures = regular_identity_failures(*skew4, s4);
  REQUIRE(!failures.empty());
  bool has4 = false, has5 = false;
  for (const auto& f : failures) {
    if (f.identity == 4) has4 = true;
    if (f.identity == 5) has5 = true;
    CHECK(!f.detail.empty());
  }
  // meet(2, meet(2, 0)) = 0 but meet(2, 0) = 1, and d(0, 0, 2) = 0 != meet(2, 0).
  CHECK(has4);
  CHECK(has5);

  auto tangled = make_tangled4();
  SmbStructure st = detect_smb(*tangled);
  CHECK_FALSE(st.regular);
  bool has1 = false;
  for (const auto& f : regular_identity_failures(*tangled, st)) {
    if (f.identity == 1) has1 = true;
  }
  CHECK(has1);  // d(2,2,0) = 2 stays on top instead of descending
}

TEST_CASE("regularization") {
  SUBCASE("already regular algebras are unchanged") {
    for (auto alg : {make_chain3(), make_xor2(), make_sl2(), make_diamond4()}) {
      RegularizationResult r = regularize(*alg);
      INFO(alg->name());
      CHECK_FALSE(r.changed);
      CHECK(r.algebra->same_tables(*alg));
      CHECK(r.structure.regular);
    }
  }

  SUBCASE("skew4 gets repaired") {
    auto alg = make_skew4();
    SmbStructure before = detect_smb(*alg);
    RegularizationResult r = regularize(*alg);
    CHECK(r.changed);
    CHECK(r.structure.regular);
    CHECK(r.structure.sim == before.sim);
    // Blocks and in-block operations are untouched.
    for (int x = 0; x < 4; ++x) {
      for (int y = 0; y < 4; ++y) {
        if (!before.sim.same_block(x, y)) continue;
        CHECK(r.algebra->meet(x, y) == alg->meet(x, y));
        for (int z = 0; z < 4; ++z) {
          if (!before.sim.same_block(y, z)) continue;
          CHECK(r.algebra->d(x, y, z) == alg->d(x, y, z));
        }
      }
    }
    // The skewed descent map from the top block got straightened.
    CHECK(r.algebra->meet(2, 0) == 0);
    CHECK(r.algebra->meet(2, 1) == 1);
    CHECK(r.algebra->meet(3, 0) == 0);
    CHECK(r.algebra->meet(3, 1) == 1);
  }

  SUBCASE("tangled4 gets repaired via the d substitution") {
    auto alg = make_tangled4();
    RegularizationResult r = regularize(*alg);
    CHECK(r.changed);
    CHECK(r.structure.regular);
    // Only d needed fixing; the meet was already well-behaved.
    CHECK(r.algebra->meet_table() == alg->meet_table());
    CHECK(r.algebra->d(2, 2, 0) == 0);
  }
}

TEST_CASE("least block collapse") {
  auto chain3 = make_chain3();
  CHECK(least_block_collapse(*chain3, detect_smb(*chain3)) ==
        Partition::from_blocks(3, {{0, 1}, {2}}));

  auto sl2 = make_sl2();
  CHECK(least_block_collapse(*sl2, detect_smb(*sl2)) == Partition::equality(2));

  auto xor2 = make_xor2();
  CHECK(least_block_collapse(*xor2, detect_smb(*xor2)) == Partition::full(2));

  // In tangled4, d(2,2,0) = 2 and d(2,2,1) = 3 tell the bottom elements
  // apart, so collapsing the bottom block is incompatible with d.
  auto tangled = make_tangled4();
  CHECK(error_code_of([&] { least_block_collapse(*tangled, detect_smb(*tangled)); }) ==
        ErrorCode::precondition);
}

TEST_CASE("unit detection") {
  CHECK(find_unit(*make_sl2()) == 1);
  CHECK(find_unit(*make_diamond4()) == 3);
  CHECK_FALSE(find_unit(*make_chain3()).has_value());
  CHECK_FALSE(find_unit(*make_xor2()).has_value());
  CHECK_FALSE(find_unit(*make_flat3()).has_value());
}
