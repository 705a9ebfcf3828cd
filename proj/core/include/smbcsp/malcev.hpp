#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "smbcsp/instance.hpp"

namespace smbcsp {

// Solution set {z : A z = b (mod n)} given by one particular solution and
// generators of the homogeneous solutions. Solved per prime power of n via
// valuation-pivoted diagonalisation and recombined by remaindering.
struct ModularSolution {
  std::vector<std::int64_t> particular;
  std::vector<std::vector<std::int64_t>> kernel;
};
std::optional<ModularSolution> solve_modular_system(
    const std::vector<std::vector<std::int64_t>>& a,
    const std::vector<std::int64_t>& b, std::int64_t n);

// d acts as a Mal'cev operation on the set: d(x,y,y) = d(y,y,x) = x.
bool is_malcev_on(const FiniteAlgebra& alg, const std::vector<int>& members);

// Abelian group derived on a d-closed set through x + y = d(x, zero, y),
// valid when additionally d(x,y,z) = x - y + z for that addition, together
// with a cyclic-factor coordinate system (factor of largest order first).
struct AffineGroup {
  std::vector<int> members;  // sorted ambient labels
  int zero = 0;              // members.front()
  std::vector<int> orders;
  std::vector<std::vector<int>> coords;  // member index -> coordinates
  std::vector<int> member_by_radix;      // mixed-radix index -> member index

  int coord_count() const { return static_cast<int>(orders.size()); }
  int member_from_coords(const std::vector<int>& c) const;
};
std::optional<AffineGroup> affine_structure(const FiniteAlgebra& alg,
                                            const std::vector<int>& members);

struct MalcevResult {
  bool sat = false;
  std::vector<int> witness;          // lexicographically first solution
  bool exhaustive_fallback = false;  // solved by search, no affine encoding
};

// Decides instances in which d is Mal'cev on every domain. When every domain
// carries an affine group structure the instance is solved exactly as a
// modular linear system (constraint relations are then cosets); otherwise it
// falls back to capped exhaustive search.
MalcevResult malcev_solve(const Instance& p);

// Lexicographically least witness pair for every coordinate fork of a tuple
// set closed under componentwise d: for each coordinate i and values (a, b)
// realised at i by two tuples agreeing strictly before i, the least such
// pair. The witnesses generate the whole set back under closure.
std::vector<std::vector<int>> compact_representation(
    const std::vector<std::vector<int>>& closed_tuples);

}  // namespace smbcsp
