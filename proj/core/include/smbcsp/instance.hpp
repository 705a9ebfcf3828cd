#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smbcsp/algebra.hpp"
#include "smbcsp/smb.hpp"

namespace smbcsp {

// Domain of one variable: a subuniverse of a named template algebra.
struct VarDomain {
  std::string algebra_id;
  AlgebraPtr algebra;
  std::vector<int> elements;  // sorted, deduplicated
};

struct Constraint {
  std::vector<int> scope;                // ascending variable indices
  std::vector<std::vector<int>> tuples;  // lex-sorted, deduplicated
};

// A constraint-satisfaction instance in canonical form. Construction
// normalises the input:
//   - scopes are sorted ascending, permuting tuple coordinates to match;
//   - tuples outside the current domain product are dropped;
//   - arity-1 constraints are intersected into the domain and removed;
//   - constraints sharing a scope are intersected;
//   - constraints are ordered by scope.
// A constraint with an empty tuple list is kept: it records unsatisfiability.
class Instance {
 public:
  Instance(std::vector<std::string> names, std::vector<VarDomain> domains,
           std::vector<Constraint> constraints);

  int num_variables() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  int index_of(const std::string& name) const;
  const VarDomain& domain(int v) const { return domains_[v]; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  // Distinct template algebras by id.
  const std::map<std::string, AlgebraPtr>& algebras() const { return algebras_; }

  bool any_domain_empty() const;
  bool any_constraint_empty() const;
  // Product of domain sizes, saturating at 2^62.
  std::int64_t domain_space() const;

  bool satisfies(const std::vector<int>& assignment) const;

  // Block structure of the template algebra of v, or null when that algebra
  // has none. Shared across instances derived from this one.
  std::shared_ptr<const SmbStructure> algebra_structure(int v) const;

  // Derived instances (canonicalised again, sharing template structures).
  Instance with_domain(int v, std::vector<int> elements) const;
  Instance with_constraint(std::vector<int> scope,
                           std::vector<std::vector<int>> tuples) const;
  // Sub-instance on the sorted variable set w: constraints inside w are kept,
  // constraints partially meeting w are projected onto the intersection.
  Instance restrict_to(const std::vector<int>& w) const;

 private:
  struct StructureCache;
  Instance(std::vector<std::string> names, std::vector<VarDomain> domains,
           std::vector<Constraint> constraints,
           std::shared_ptr<StructureCache> cache);
  void normalize(std::vector<Constraint> constraints);

  std::vector<std::string> names_;
  std::vector<VarDomain> domains_;
  std::vector<Constraint> constraints_;
  std::map<std::string, AlgebraPtr> algebras_;
  std::shared_ptr<StructureCache> cache_;
};

// Deterministic serialisation of the full instance structure (algebra tables,
// domains, constraints; variable names excluded). Equal strings iff the
// instances are identical up to renaming variables in place.
std::string canonical_key(const Instance& p);

// Checks that domains are subuniverses and constraint relations are closed
// under the componentwise operations. Structural solvers require this.
bool is_compatible(const Instance& p, std::string* why = nullptr);

// Filters domains against unary projections of all covering constraints and
// constraint tuples against domains, to a fixpoint ((1,1) case). For
// k = 2, l = 3 additionally materialises every 2- and 3-variable scope,
// seeding each from the projections of covering constraints, and enforces
// agreement of all relations on scopes of size <= 2. Removes no solutions.
Instance enforce_kl_minimality(const Instance& p, int k, int l);

struct BruteForceResult {
  bool sat = false;
  std::vector<int> witness;  // lexicographically first solution when sat
  std::int64_t nodes = 0;
};

// Exhaustive backtracking search; throws Error(cap_exceeded) when the number
// of attempted value assignments exceeds the oracle cap.
BruteForceResult brute_force(const Instance& p);

// All solutions in lexicographic order (subject to the same cap).
std::vector<std::vector<int>> all_solutions(const Instance& p);

// Sum of tuple counts plus domain sizes; strictly decreases under proper
// tightening. Used as a termination measure.
std::int64_t tuple_mass(const Instance& p);

// Largest domain size among variables whose domain meets more than one block
// of its template algebra; 0 when every domain lies within one block.
// Requires block structures for all template algebras.
int max_multiblock_domain_size(const Instance& p);

}  // namespace smbcsp
