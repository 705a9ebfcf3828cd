#include "smbcsp/solvers.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "smbcsp/algebra.hpp"
#include "smbcsp/error.hpp"
#include "smbcsp/instance.hpp"
#include "smbcsp/poly.hpp"
#include "smbcsp/smb.hpp"
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

std::vector<std::string> var_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

std::vector<int> random_subuniverse(std::mt19937_64& eng,
                                    const FiniteAlgebra& alg) {
  std::uniform_int_distribution<int> pick(0, alg.size() - 1);
  std::uniform_int_distribution<int> count(1, alg.size());
  std::set<int> seed;
  int want = count(eng);
  while (static_cast<int>(seed.size()) < want) seed.insert(pick(eng));
  return generate_subuniverse(alg, {seed.begin(), seed.end()});
}

// Random instance with subuniverse domains and relations generated by
// closing a few seed tuples, so every relation is closed under the
// coordinate operations. Optionally plants a solution.
Instance random_instance(std::mt19937_64& eng,
                         const std::vector<AlgebraPtr>& algebras, int nvars,
                         int ncons, bool plant) {
  std::uniform_int_distribution<size_t> palg(0, algebras.size() - 1);
  std::vector<VarDomain> domains;
  for (int v = 0; v < nvars; ++v) {
    AlgebraPtr a = algebras[palg(eng)];
    domains.push_back(dom(a->name(), a, random_subuniverse(eng, *a)));
  }
  std::vector<int> planted(nvars);
  for (int v = 0; v < nvars; ++v) {
    const auto& el = domains[v].elements;
    planted[v] = el[std::uniform_int_distribution<size_t>(0, el.size() - 1)(eng)];
  }
  std::vector<Constraint> cs;
  for (int k = 0; k < ncons; ++k) {
    int arity = std::uniform_int_distribution<int>(2, std::min(3, nvars))(eng);
    std::set<int> sset;
    while (static_cast<int>(sset.size()) < arity)
      sset.insert(std::uniform_int_distribution<int>(0, nvars - 1)(eng));
    std::vector<int> scope(sset.begin(), sset.end());
    std::vector<const FiniteAlgebra*> coords;
    for (int v : scope) coords.push_back(domains[v].algebra.get());
    std::vector<std::vector<int>> seed;
    int nseed = std::uniform_int_distribution<int>(1, 3)(eng);
    for (int s = 0; s < nseed; ++s) {
      std::vector<int> t;
      for (int v : scope) {
        const auto& el = domains[v].elements;
        t.push_back(
            el[std::uniform_int_distribution<size_t>(0, el.size() - 1)(eng)]);
      }
      seed.push_back(std::move(t));
    }
    if (plant) {
      std::vector<int> t;
      for (int v : scope) t.push_back(planted[v]);
      seed.push_back(std::move(t));
    }
    cs.push_back(Constraint{scope, close_tuples(coords, std::move(seed))});
  }
  return Instance(var_names(nvars), std::move(domains), std::move(cs));
}

void check_against_brute(const Instance& p, const SolveOutcome& got,
                         const char* what) {
  BruteForceResult want = brute_force(p);
  CAPTURE(what);
  REQUIRE(got.sat == want.sat);
  if (got.sat && got.witness.has_value()) {
    REQUIRE(p.satisfies(*got.witness));
    REQUIRE(*got.witness == want.witness);
  }
}

}  // namespace

TEST_CASE("template regularization rewrites only what it must") {
  AlgebraPtr skew = make_skew4();
  AlgebraPtr chain = make_chain3();
  Instance p(var_names(2), {dom("skew4", skew), dom("chain3", chain)},
             {Constraint{{0, 1}, {{0, 0}, {1, 1}}}});
  Instance q = regularize_templates(p);
  SmbStructure s = detect_smb(*q.domain(0).algebra);
  REQUIRE(s.regular);
  REQUIRE(q.domain(1).algebra->same_tables(*chain));
  REQUIRE(q.constraints().size() == p.constraints().size());
  for (size_t i = 0; i < q.constraints().size(); ++i) {
    REQUIRE(q.constraints()[i].scope == p.constraints()[i].scope);
    REQUIRE(q.constraints()[i].tuples == p.constraints()[i].tuples);
  }

  Instance r(var_names(1), {dom("chain3", chain, {0, 1})}, {});
  REQUIRE(canonical_key(regularize_templates(r)) == canonical_key(r));
}

TEST_CASE("general solver matches exhaustive search on mixed templates") {
  std::vector<AlgebraPtr> algs = {make_chain3(),  make_flat3(), make_tree4(),
                                  make_diamond4(), make_unital3(), make_xor2(),
                                  make_sl2(),      make_cyclic(3)};
  std::mt19937_64 eng(0x90125);
  SolveStats st;
  SolveOptions opts;
  opts.extract_witness = true;
  opts.audit = true;
  opts.stats = &st;
  for (int it = 0; it < 70; ++it) {
    int nvars = std::uniform_int_distribution<int>(2, 4)(eng);
    int ncons = std::uniform_int_distribution<int>(1, 4)(eng);
    Instance p = random_instance(eng, algs, nvars, ncons, it % 2 == 0);
    check_against_brute(p, solve_general(p, opts), "general/mixed");
  }
  REQUIRE(st.decide_calls > 0);
  REQUIRE(st.malcev_calls > 0);
}

TEST_CASE("general solver handles the elimination path") {
  // Full chain domains have no unit, so the solver must run the
  // decomposition sweep before any quotient reasoning applies.
  std::vector<AlgebraPtr> algs = {make_chain3()};
  std::mt19937_64 eng(0xf00d);
  SolveStats st;
  SolveOptions opts;
  opts.extract_witness = true;
  opts.audit = true;
  opts.stats = &st;
  for (int it = 0; it < 40; ++it) {
    int nvars = std::uniform_int_distribution<int>(2, 4)(eng);
    int ncons = std::uniform_int_distribution<int>(1, 3)(eng);
    Instance p = random_instance(eng, algs, nvars, ncons, it % 3 != 0);
    check_against_brute(p, solve_general(p, opts), "general/chain3");
  }
  REQUIRE(st.eliminations > 0);
}

TEST_CASE("linear solver matches exhaustive search") {
  std::vector<AlgebraPtr> algs = {make_chain3(), make_sl2(), make_unital3(),
                                  make_cyclic(2)};
  std::mt19937_64 eng(0xbeef);
  SolveStats st;
  SolveOptions opts;
  opts.extract_witness = true;
  opts.audit = true;
  opts.stats = &st;
  for (int it = 0; it < 120; ++it) {
    int nvars = std::uniform_int_distribution<int>(2, 5)(eng);
    int ncons = std::uniform_int_distribution<int>(1, 5)(eng);
    Instance p = random_instance(eng, algs, nvars, ncons, it % 2 == 0);
    check_against_brute(p, solve_linear(p, opts), "linear");
    SolveOutcome general = solve_general(p, opts);
    REQUIRE(general.sat == brute_force(p).sat);
  }
}

TEST_CASE("flat solver matches exhaustive search") {
  std::vector<AlgebraPtr> algs = {make_flat3(), make_sl2(), make_cyclic(3)};
  std::mt19937_64 eng(0xcafe);
  SolveStats st;
  SolveOptions opts;
  opts.extract_witness = true;
  opts.audit = true;
  opts.stats = &st;
  for (int it = 0; it < 120; ++it) {
    int nvars = std::uniform_int_distribution<int>(2, 5)(eng);
    int ncons = std::uniform_int_distribution<int>(1, 5)(eng);
    Instance p = random_instance(eng, algs, nvars, ncons, it % 2 == 0);
    check_against_brute(p, solve_flat(p, opts), "flat");
    SolveOutcome general = solve_general(p, opts);
    REQUIRE(general.sat == brute_force(p).sat);
  }
}

TEST_CASE("dispatching solver picks a working route everywhere") {
  std::vector<std::vector<AlgebraPtr>> families = {
      {make_cyclic(3), make_cyclic(2)},          // single block
      {make_chain3(), make_sl2()},               // linear block orders
      {make_flat3(), make_cyclic(2)},            // flat block orders
      {make_diamond4(), make_tree4()},           // general block orders
  };
  std::mt19937_64 eng(0x7ead);
  SolveOptions opts;
  opts.extract_witness = true;
  for (const auto& algs : families) {
    for (int it = 0; it < 25; ++it) {
      Instance p = random_instance(eng, algs, 3, 3, it % 2 == 0);
      check_against_brute(p, solve_auto(p, opts), "auto");
    }
  }
}

TEST_CASE("odd parity cycle over the three-element chain is unsatisfiable") {
  AlgebraPtr chain = make_chain3();
  std::vector<std::vector<int>> neq_escape = {{0, 1}, {1, 0}, {2, 1}};
  std::vector<std::vector<int>> neq_escape_rev = {{0, 1}, {1, 0}, {1, 2}};
  Instance p(var_names(3),
             {dom("chain3", chain), dom("chain3", chain), dom("chain3", chain)},
             {Constraint{{0, 1}, neq_escape}, Constraint{{1, 2}, neq_escape},
              Constraint{{0, 2}, neq_escape_rev}});
  REQUIRE_FALSE(brute_force(p).sat);
  SolveStats st;
  SolveOptions opts;
  opts.audit = true;
  opts.stats = &st;
  REQUIRE_FALSE(solve_linear(p, opts).sat);
  REQUIRE(st.least_block_tightenings > 0);
  REQUIRE_FALSE(solve_general(p, opts).sat);
  REQUIRE_FALSE(solve_auto(p, opts).sat);
}

TEST_CASE("two-level parity conflict forces block tightenings") {
  // Four ternary parity constraints through a hub variable, unsatisfiable
  // over the bottom blocks and over the top blocks at once, yet stable under
  // (2,3)-minimality. The flat route must discard the top blocks of a whole
  // strand, the linear route must discard least blocks.
  AlgebraPtr xc = make_xchain4();
  SmbStructure s = detect_smb(*xc);
  REQUIRE(s.regular);
  auto parity_rel = [](int parity) {
    std::vector<std::vector<int>> out;
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y)
        for (int z = 0; z < 4; ++z)
          if ((x >> 1) == (y >> 1) && (y >> 1) == (z >> 1) &&
              ((x ^ y ^ z) & 1) == parity)
            out.push_back({x, y, z});
    return out;
  };
  std::vector<const FiniteAlgebra*> coords(3, xc.get());
  REQUIRE(close_tuples(coords, parity_rel(0)) == parity_rel(0));
  REQUIRE(close_tuples(coords, parity_rel(1)) == parity_rel(1));
  Instance p(var_names(5), std::vector<VarDomain>(5, dom("xchain4", xc)),
             {Constraint{{0, 1, 4}, parity_rel(1)},
              Constraint{{1, 2, 4}, parity_rel(0)},
              Constraint{{2, 3, 4}, parity_rel(0)},
              Constraint{{0, 3, 4}, parity_rel(0)}});
  REQUIRE_FALSE(brute_force(p).sat);
  SolveStats st_flat;
  SolveOptions opts;
  opts.audit = true;
  opts.stats = &st_flat;
  REQUIRE_FALSE(solve_flat(p, opts).sat);
  REQUIRE(st_flat.strand_tightenings > 0);
  SolveStats st_lin;
  opts.stats = &st_lin;
  REQUIRE_FALSE(solve_linear(p, opts).sat);
  REQUIRE(st_lin.least_block_tightenings > 0);
  REQUIRE_FALSE(solve_general(p, opts).sat);
  REQUIRE_FALSE(solve_auto(p, opts).sat);
}

TEST_CASE("decomposition carries solutions both ways") {
  AlgebraPtr chain = make_chain3();
  std::mt19937_64 eng(0x1dea);
  for (int it = 0; it < 20; ++it) {
    Instance p = random_instance(eng, {chain}, 3, 2, true);
    Decomposition dec = decompose(p);
    int total = 0;
    for (int v = 0; v < p.num_variables(); ++v)
      total += static_cast<int>(p.domain(v).elements.size());
    REQUIRE(static_cast<int>(dec.slots.size()) == total);
    REQUIRE(dec.instance.num_variables() == total);

    // Right meets of any solution solve the decomposition.
    for (const auto& f : all_solutions(p)) {
      std::vector<int> g(dec.slots.size());
      for (size_t s = 0; s < dec.slots.size(); ++s) {
        auto [v, a] = dec.slots[s];
        int ambient = p.domain(v).algebra->meet(a, f[v]);
        const auto& vals = dec.slot_values[s];
        g[s] = static_cast<int>(
            std::lower_bound(vals.begin(), vals.end(), ambient) -
            vals.begin());
        REQUIRE(vals[g[s]] == ambient);
      }
      REQUIRE(dec.instance.satisfies(g));
      ConsistentMapSet maps = extract_consistent_maps(p, dec, g);
      REQUIRE(is_consistent_map_set(p, maps));
      ConsistentMapSet retr = iterate_to_retractive(p, maps);
      REQUIRE(is_retractive(p, retr));
      Instance q = apply_retraction(p, retr);
      REQUIRE(brute_force(q).sat == brute_force(p).sat);
      if (it >= 2) break;  // keep the quadratic part of the loop short
    }
  }
}

TEST_CASE("consistent map validation") {
  AlgebraPtr chain = make_chain3();
  Instance p(var_names(2), {dom("chain3", chain), dom("chain3", chain)},
             {Constraint{{0, 1}, {{0, 0}, {1, 1}, {2, 2}}}});
  ConsistentMapSet identity;
  identity.maps = {{0, 1, 2}, {0, 1, 2}};
  REQUIRE(is_consistent_map_set(p, identity));
  REQUIRE(is_permutational(p, identity));
  REQUIRE(is_retractive(p, identity));
  ConsistentMapSet kept = iterate_to_retractive(p, identity);
  REQUIRE(is_permutational(p, kept));

  // Collapsing one side only breaks tuple preservation.
  ConsistentMapSet lopsided;
  lopsided.maps = {{0, 1, 0}, {0, 1, 2}};
  REQUIRE_FALSE(is_consistent_map_set(p, lopsided));

  // Collapsing both sides by the same right meet is consistent.
  ConsistentMapSet collapse;
  collapse.maps = {{0, 1, 0}, {0, 1, 0}};
  REQUIRE(is_consistent_map_set(p, collapse));
  REQUIRE_FALSE(is_permutational(p, collapse));
  Instance q = apply_retraction(p, collapse);
  REQUIRE(q.domain(0).elements.size() == 2);
  REQUIRE(brute_force(q).sat);

  ConsistentMapSet bad;
  bad.maps = {{0, 1}, {0, 1, 2}};
  REQUIRE_THROWS_AS(is_consistent_map_set(p, bad), Error);
}

TEST_CASE("weak irreducibility enforcement is answer preserving") {
  std::vector<AlgebraPtr> algs = {make_chain3(), make_flat3()};
  std::mt19937_64 eng(0x5eed);
  int undecided_seen = 0;
  int eliminated_seen = 0;
  for (int it = 0; it < 50; ++it) {
    Instance raw = random_instance(eng, algs, 3, 3, it % 2 == 0);
    Instance p = enforce_kl_minimality(raw, 2, 3);
    if (p.any_domain_empty() || p.any_constraint_empty()) {
      REQUIRE_FALSE(brute_force(raw).sat);
      continue;
    }
    SolveStats st;
    SolveOptions opts;
    opts.stats = &st;
    Reduction red = enforce_weak_m_irreducibility(p, opts);
    bool want = brute_force(p).sat;
    if (red.decided) {
      REQUIRE(red.sat == want);
      eliminated_seen += st.eliminations > 0;
    } else {
      ++undecided_seen;
      REQUIRE(red.instance.has_value());
      REQUIRE(brute_force(*red.instance).sat == want);
      // Every critical-size domain of the result meets several blocks only
      // when its induced algebra has a unit.
      const Instance& q = *red.instance;
      int m = max_multiblock_domain_size(q);
      for (int v = 0; v < q.num_variables() && m > 0; ++v) {
        if (static_cast<int>(q.domain(v).elements.size()) != m) continue;
        auto s = q.algebra_structure(v);
        std::set<int> met;
        for (int x : q.domain(v).elements) met.insert(s->block_of(x));
        if (met.size() < 2) continue;
        REQUIRE(domain_algebra(q, v).smb.is_unital());
      }
    }
  }
  REQUIRE(undecided_seen > 0);
  REQUIRE(eliminated_seen > 0);
}

TEST_CASE("coherence filtering keeps exactly the extendable tuples") {
  AlgebraPtr uni = make_unital3();
  std::mt19937_64 eng(0xface);
  int filtered_runs = 0;
  for (int it = 0; it < 40; ++it) {
    Instance raw = random_instance(eng, {uni, make_cyclic(2)}, 3, 3, true);
    Instance p = enforce_kl_minimality(raw, 2, 3);
    if (p.any_domain_empty() || p.any_constraint_empty()) continue;
    if (max_multiblock_domain_size(p) == 0) continue;
    for (const auto& w : coherent_sets(p, cover_index(p))) {
      ++filtered_runs;
      auto filtered = chk_coh_set(p, w);
      Instance base = p.restrict_to(w);
      auto sols = all_solutions(base);
      auto widx = [&](int v) {
        return static_cast<int>(std::lower_bound(w.begin(), w.end(), v) -
                                w.begin());
      };
      REQUIRE(filtered.size() == p.constraints().size());
      for (size_t ci = 0; ci < filtered.size(); ++ci) {
        const Constraint& cc = p.constraints()[ci];
        for (const auto& a : cc.tuples) {
          bool extendable = false;
          for (const auto& f : sols) {
            bool match = true;
            for (size_t k = 0; k < cc.scope.size() && match; ++k)
              if (std::binary_search(w.begin(), w.end(), cc.scope[k]))
                match = f[widx(cc.scope[k])] == a[k];
            if (match) {
              extendable = true;
              break;
            }
          }
          bool kept = std::binary_search(filtered[ci].begin(),
                                         filtered[ci].end(), a);
          REQUIRE(kept == extendable);
        }
      }
    }
  }
  REQUIRE(filtered_runs > 0);
}

TEST_CASE("coherent set validation and the component splitting path") {
  AlgebraPtr uni = make_unital3();
  // Diagonal constraint between two full domains: one cover class spanning
  // both variables, both at the critical size.
  std::vector<std::vector<int>> diag = {{0, 0}, {1, 1}, {2, 2}};
  Instance p(var_names(2), {dom("unital3", uni), dom("unital3", uni)},
             {Constraint{{0, 1}, diag}});
  auto sets = coherent_sets(p, cover_index(p));
  REQUIRE_FALSE(sets.empty());
  std::vector<std::vector<int>> candidates = {{0}, {1}, {0, 1}};
  bool threw = false;
  for (const auto& w : candidates) {
    if (std::binary_search(sets.begin(), sets.end(), w)) continue;
    CHECK(error_code_of([&] { chk_coh_set(p, w); }) == ErrorCode::precondition);
    threw = true;
    break;
  }
  REQUIRE(threw);
  for (const auto& w : sets) {
    auto filtered = chk_coh_set(p, w);
    REQUIRE(filtered.size() == 1);
    REQUIRE(filtered[0] == diag);
  }
}

TEST_CASE("strand layout on flat instances") {
  AlgebraPtr flat = make_flat3();
  // Two variables forced into distinct top blocks by a closed relation.
  std::vector<std::vector<int>> cross = {{0, 0}, {1, 2}, {0, 2}, {1, 0},
                                         {0, 1}, {2, 0}, {2, 1}, {1, 1},
                                         {2, 2}};
  Instance p(var_names(2), {dom("flat3", flat), dom("flat3", flat)},
             {Constraint{{0, 1}, cross}});
  Instance q = enforce_kl_minimality(p, 2, 3);
  StrandDecomposition sd = compute_strands(q);
  REQUIRE(sd.pairs.size() == 4);  // two non-bottom blocks per variable
  std::set<int> strand_sizes;
  for (const Strand& st : sd.strands) strand_sizes.insert(st.members.size());
  REQUIRE(sd.strands.size() >= 2);
  Instance loose(var_names(2), {dom("flat3", flat), dom("flat3", flat)},
                 {Constraint{{0, 1}, {{1, 1}}}});
  REQUIRE_THROWS_AS(compute_strands(loose), Error);
}

TEST_CASE("solver preconditions are enforced") {
  AlgebraPtr flat = make_flat3();
  AlgebraPtr diamond = make_diamond4();
  Instance pf(var_names(2), {dom("flat3", flat), dom("flat3", flat)},
              {Constraint{{0, 1}, {{1, 1}, {2, 2}}}});
  CHECK_THROWS_AS(solve_linear(pf), Error);
  Instance pd(var_names(1), {dom("diamond4", diamond)}, {});
  CHECK_THROWS_AS(solve_linear(pd), Error);
  CHECK_THROWS_AS(solve_flat(pd), Error);

  AlgebraPtr uni = make_unital3();
  Instance pu(var_names(2), {dom("unital3", uni), dom("unital3", uni)},
              {Constraint{{0, 1}, {{0, 0}, {1, 1}, {2, 2}}}});
  Instance pm = enforce_kl_minimality(pu, 2, 3);
  CHECK_THROWS_AS(chk_coh_set(pm, {}), Error);
  CHECK_THROWS_AS(chk_coh_set(pm, {1, 0}), Error);
  CHECK_THROWS_AS(chk_coh_set(pm, {0, 5}), Error);
  Instance loose(var_names(2), {dom("unital3", uni), dom("unital3", uni)},
                 {Constraint{{0, 1}, {{0, 0}}}});
  CHECK_THROWS_AS(chk_coh_set(loose, {0}), Error);  // not minimized
  CHECK_THROWS_AS(enforce_weak_m_irreducibility(loose), Error);

  AlgebraPtr skew = make_skew4();
  Instance ps(var_names(1), {dom("skew4", skew)}, {});
  CHECK_THROWS_AS(enforce_weak_m_irreducibility(ps), Error);
  CHECK(error_code_of([&] { solve_linear(pf); }) == ErrorCode::precondition);
}

TEST_CASE("witness extraction returns the least solution") {
  std::vector<AlgebraPtr> algs = {make_unital3(), make_diamond4()};
  std::mt19937_64 eng(0x77aa);
  int sat_seen = 0;
  for (int it = 0; it < 30; ++it) {
    Instance p = random_instance(eng, algs, 3, 2, true);
    SolveOptions opts;
    opts.extract_witness = true;
    SolveOutcome out = solve_general(p, opts);
    BruteForceResult want = brute_force(p);
    REQUIRE(out.sat == want.sat);
    if (out.sat) {
      ++sat_seen;
      REQUIRE(out.witness.has_value());
      REQUIRE(*out.witness == want.witness);
    }
  }
  REQUIRE(sat_seen > 0);
}
