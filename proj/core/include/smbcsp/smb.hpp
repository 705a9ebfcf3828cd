#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smbcsp/algebra.hpp"

namespace smbcsp {

// Shape of the block semilattice, listed most specific first.
enum class OrderShape { malcev, linear, flat, tree, general };
std::string order_shape_name(OrderShape s);

// Block decomposition of an algebra: a congruence whose quotient under meet
// is a meet-semilattice, with meet acting as first projection inside each
// block and d acting as a Mal'cev operation inside each block. At most one
// congruence qualifies (any two qualifying congruences coincide), so the
// structure is canonical.
struct SmbStructure {
  Partition sim;                         // the block congruence
  std::vector<std::vector<int>> blocks;  // indexed by block id, each sorted
  std::vector<int> block_meet_table;     // flattened block_count^2 meet table
  int least_block = 0;
  OrderShape shape = OrderShape::malcev;
  bool regular = false;                  // all five identities hold
  std::optional<int> unit;               // u with meet(u, x) == x for all x

  int block_count() const { return static_cast<int>(blocks.size()); }
  int block_of(int x) const { return sim.block_of(x); }
  int block_meet(int b1, int b2) const {
    return block_meet_table[b1 * block_count() + b2];
  }
  bool block_leq(int b1, int b2) const { return block_meet(b1, b2) == b1; }
  bool is_malcev() const { return block_count() == 1; }
  bool is_unital() const { return unit.has_value(); }
  // Greatest block if the block order has one.
  std::optional<int> greatest_block() const;

  // Block id of the meet of the blocks of the given elements.
  int min_block(const std::vector<int>& elements) const;
  // Elements of the list lying in min_block of the list. For a subuniverse
  // this is its least induced block.
  std::vector<int> min_members(const std::vector<int>& elements) const;
};

// Computes the block structure; throws Error(ErrorCode::not_smb) naming a
// failing axiom and witness when no congruence qualifies.
SmbStructure detect_smb(const FiniteAlgebra& alg);
// Same, but reports failure through `failure` instead of throwing.
std::optional<SmbStructure> try_detect_smb(const FiniteAlgebra& alg,
                                           std::string* failure = nullptr);

struct IdentityFailure {
  int identity = 0;  // 1..5 as numbered below
  std::vector<int> args;
  std::string detail;
};

// The five compatibility identities tying meet to the block order:
//   1. d(a,b,c) lies in the block of (a&b)&c
//   2. a&b == a whenever the block of a lies below the block of b
//   3. d(x,y,z) == d(x&(z&y), y&(z&x), z&(y&x))
//   4. x&(x&y) == x&y
//   5. x&y == d(y,y,x) == d(x,y,y)
std::vector<IdentityFailure> regular_identity_failures(const FiniteAlgebra& alg,
                                                       const SmbStructure& s);
bool is_regular(const FiniteAlgebra& alg, const SmbStructure& s);

struct RegularizationResult {
  AlgebraPtr algebra;      // term operations of the input algebra
  SmbStructure structure;  // same block congruence as the input
  bool changed = false;    // tables differ from the input
};

// Replaces the operations by term operations satisfying all five identities,
// leaving the blocks and the in-block operations unchanged. The new meet is
// the idempotent power of y -> x & y applied pointwise; the new d
// pre-composes with the identity-3 argument substitution, which lands all
// three arguments in one block. Throws Error(ErrorCode::regularization_failed)
// if verification of the result fails.
RegularizationResult regularize(const FiniteAlgebra& alg);
RegularizationResult regularize(const FiniteAlgebra& alg, const SmbStructure& s);

// Congruence collapsing exactly the least block (requires the collapse to be
// compatible with the operations; holds for regular algebras).
Partition least_block_collapse(const FiniteAlgebra& alg, const SmbStructure& s);

// Element u with meet(u, x) == x for all x, if one exists (smallest such).
std::optional<int> find_unit(const FiniteAlgebra& alg);

}  // namespace smbcsp
