#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smbcsp/algebra.hpp"
#include "smbcsp/instance.hpp"
#include "smbcsp/smb.hpp"

namespace smbcsp {

// Parameters for the algebra generator. `shape` picks the block order:
// malcev is a single block (and requires blocks == 1), linear a chain, flat
// an antichain over a common bottom, tree an order whose covers form a tree
// rooted at the bottom, general a random intersection-closed set family.
struct AlgebraGenParams {
  int blocks = 2;
  int min_block_size = 1;
  int max_block_size = 3;
  OrderShape shape = OrderShape::linear;
  int retries = 64;
  std::string name;  // derived from shape and seed when empty
};

// Random algebra with block structure, built from the order up: a cyclic
// group inside each block with d(x,y,z) = x - y + z, descent maps drawn as
// group homomorphisms along the covers of the block order and composed
// along canonical paths, meet defined by descending the left argument, and
// cross-block d by substituting the arguments into their common block
// first. Path independence of the composed maps is verified; a failed draw
// is rejected and redrawn, and when the retry budget runs out the descent
// maps degrade to constant-zero maps, which always compose. The result
// must pass block detection and the identity checker or it is rejected as
// well. Throws Error(invalid_input) for inconsistent parameters and
// Error(cap_exceeded) when no draw within the budget verifies.
// Deterministic under (params, seed).
AlgebraPtr random_smb_algebra(const AlgebraGenParams& params,
                              std::uint64_t seed);

// Parameters for the instance generator.
struct InstanceGenParams {
  int variables = 4;
  int constraints = 4;
  int min_arity = 2;
  int max_arity = 3;
  int seed_tuples = 2;         // random seed tuples per constraint
  bool plant_solution = true;  // seed every constraint with one assignment
};

// Random instance over the given templates: every variable draws a template
// and a generated subuniverse of it as domain; every constraint draws a
// scope and the closure of random in-domain seed tuples. When
// plant_solution is set a global assignment is drawn first and seeded into
// every constraint, so the instance is satisfiable by construction.
// Deterministic under (params, templates, seed).
Instance random_instance(const InstanceGenParams& params,
                         const std::vector<AlgebraPtr>& templates,
                         std::uint64_t seed);

}  // namespace smbcsp
