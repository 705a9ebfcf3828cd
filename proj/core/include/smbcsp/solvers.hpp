#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "smbcsp/instance.hpp"

namespace smbcsp {

struct SolveStats {
  std::int64_t decide_calls = 0;
  std::int64_t memo_hits = 0;
  std::int64_t malcev_calls = 0;
  std::int64_t restarts = 0;            // coherent-set loop restarts
  std::int64_t size_recursions = 0;     // recursive solves after a size drop
  std::int64_t coherent_checks = 0;     // chk_coh_set invocations
  std::int64_t eliminations = 0;        // decomposition/retraction rounds
  std::int64_t least_block_tightenings = 0;  // linear solver block removals
  std::int64_t strand_tightenings = 0;       // flat solver restarts
  std::int64_t max_depth = 0;                // deepest decision nesting
  std::vector<int> size_history;  // critical size at each general decision
};

struct SolveOptions {
  bool extract_witness = false;
  // Cross-checks runtime invariants against exhaustive search where the
  // search space is small enough; throws Error(internal) on violation.
  bool audit = false;
  SolveStats* stats = nullptr;
};

struct SolveOutcome {
  bool sat = false;
  std::optional<std::vector<int>> witness;
};

// Replaces every template algebra by its regularized term reduct. Domains and
// constraint relations are unchanged (they remain closed under term
// operations), so the solution set is identical.
Instance regularize_templates(const Instance& p);

// ---------------------------------------------------------------------------
// Strand machinery for flat block orders.

// A strand assigns one maximal template block to each of its variables; any
// solution entering one of these blocks stays on the strand everywhere.
struct Strand {
  std::vector<std::pair<int, int>> members;  // (variable, block id), sorted
};

struct StrandDecomposition {
  // Pairs (i, j): variable i's domain meets maximal block j and the least
  // block of its template. Sorted.
  std::vector<std::pair<int, int>> pairs;
  // before[a][b]: every edge-relation tuple entering pairs[a]'s block at its
  // variable enters pairs[b]'s block at the other variable. A preorder.
  std::vector<std::vector<char>> before;
  std::vector<Strand> strands;  // topological order, lower strands first
};

// Requires a (2,3)-minimal instance whose domains all have flat (or
// one-block) induced block orders.
StrandDecomposition compute_strands(const Instance& p);

// ---------------------------------------------------------------------------
// Consistent unary-polynomial families and decompositions.

// One unary polynomial of each domain algebra, jointly preserving every
// constraint relation. Maps are ambient-indexed and fix values outside the
// domain.
struct ConsistentMapSet {
  std::vector<std::vector<int>> maps;
};

bool is_consistent_map_set(const Instance& p, const ConsistentMapSet& m);
bool is_permutational(const Instance& p, const ConsistentMapSet& m);
bool is_retractive(const Instance& p, const ConsistentMapSet& m);

// Raises the whole family to one common power that makes every component
// idempotent. Consistency is preserved; permutational components stay
// permutational and non-permutational ones stay non-permutational.
ConsistentMapSet iterate_to_retractive(const Instance& p, ConsistentMapSet m);

// Image instance under a retractive consistent family: domains become map
// images, relations are mapped tuple by tuple. Has a solution iff p does.
Instance apply_retraction(const Instance& p, const ConsistentMapSet& m);

// Meet-decomposition: one slot (i, a) per variable i and domain value a,
// carrying the image domain a & A_i. Each original constraint tuple r yields
// a mapped relation on the slots (S, r); each variable contributes the
// closure of the column maps b -> <a & b : a in A_i> tying its slots
// together. Solvability transfers: p solvable implies the decomposition is,
// and any decomposition solution induces a consistent map family for p.
struct Decomposition {
  Instance instance = Instance({}, {}, {});
  std::vector<std::pair<int, int>> slots;  // slot index -> (variable, value)
  // Per slot, the ambient labels of its domain elements: the slot instance is
  // written in relabelled coordinates 0..k-1, and slot_values[s][x] is the
  // ambient element the slot value x stands for.
  std::vector<std::vector<int>> slot_values;

  int slot_of(int variable, int value) const;

 private:
  friend Decomposition decompose(const Instance& p);
  std::vector<int> offsets_;  // per variable, first slot index
};

// Requires every template to satisfy x & (x & y) == x & y (regularized).
Decomposition decompose(const Instance& p);

// Reads the consistent family off a solution of the decomposition:
// map_i(a) = g(slot(i, a)).
ConsistentMapSet extract_consistent_maps(const Instance& p,
                                         const Decomposition& dec,
                                         const std::vector<int>& g);

// ---------------------------------------------------------------------------
// Elimination to weak irreducibility.

struct Reduction {
  bool decided = false;
  bool sat = false;                  // meaningful when decided
  std::optional<Instance> instance;  // present when not decided
};

// While some largest non-Mal'cev domain algebra lacks a unit, either decides
// the instance outright or strictly shrinks a domain: first it solves the
// instance with those domains tightened to their greatest blocks (the only
// elements whose right-meet translations are permutations); failing that it
// sweeps solutions of the pinned meet-decomposition, turning each into a
// non-permutational retraction. Requires a (2,3)-minimal instance over
// regular templates. The returned instance (when undecided) is (2,3)-minimal
// and every largest non-Mal'cev domain algebra in it is unital.
Reduction enforce_weak_m_irreducibility(const Instance& p,
                                        const SolveOptions& opts = {});

// One filtering pass for a coherent variable set w: for every constraint,
// keeps exactly the tuples whose w-part extends to a solution of the
// restriction p|_w. Result is indexed like p.constraints(). Requires p
// (2,3)-minimal and weakly irreducible, and w coherent.
std::vector<std::vector<std::vector<int>>> chk_coh_set(
    const Instance& p, const std::vector<int>& w,
    const SolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Solving pipelines.

// Linear block orders: repeatedly answer least-block queries on growing
// variable prefixes, removing the least block of the first variable whose
// inclusion breaks least-block solvability.
SolveOutcome solve_linear(const Instance& p, const SolveOptions& opts = {});

// Flat block orders: per strand, test for a bottom-valued solution of the
// strand restriction, tightening onto or off the strand otherwise; finish
// with one Mal'cev solve in the bottom blocks.
SolveOutcome solve_flat(const Instance& p, const SolveOptions& opts = {});

// Arbitrary block orders: minimize, eliminate to weak irreducibility, then
// filter coherent sets until block-2-consistent, recursing whenever the
// largest non-Mal'cev domain size drops.
SolveOutcome solve_general(const Instance& p, const SolveOptions& opts = {});

// Dispatches on the joint shape of the template block orders.
SolveOutcome solve_auto(const Instance& p, const SolveOptions& opts = {});

}  // namespace smbcsp
