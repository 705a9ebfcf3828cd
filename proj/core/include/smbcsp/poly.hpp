#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "smbcsp/algebra.hpp"
#include "smbcsp/instance.hpp"
#include "smbcsp/smb.hpp"

namespace smbcsp {

// Value tables of all unary polynomials of the algebra: the closure of the
// identity map and the constant maps under pointwise meet and d. Maps are
// sorted; the size is guarded by the closure cap.
struct UnaryPolynomialClosure {
  int universe = 0;
  std::vector<std::vector<int>> maps;
};
UnaryPolynomialClosure unary_polynomial_closure(const FiniteAlgebra& alg);

// Component-map pairs induced by unary polynomials of a binary relation with
// parameters in the relation: the closure of (id, id) and the constant pairs
// {(a, b) : (a, b) in relation} under pointwise meet and d of the two side
// algebras. Every stored pair is the componentwise action of one polynomial.
struct PairPolynomialClosure {
  int left_universe = 0;
  int right_universe = 0;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;
};
PairPolynomialClosure pair_polynomial_closure(
    const FiniteAlgebra& left, const FiniteAlgebra& right,
    const std::vector<std::pair<int, int>>& relation);

// True iff f maps every beta-related pair to an alpha-related pair.
bool maps_into(const std::vector<int>& f, const Partition& beta,
               const Partition& alpha);

// Inclusion-minimal images of idempotent closure members f with f(beta) not
// inside alpha. The overload taking an algebra verifies that alpha is covered
// by beta in the congruence lattice and throws Error(precondition) otherwise;
// the closure overload assumes it.
std::vector<std::vector<int>> minimal_sets(const UnaryPolynomialClosure& pol,
                                           const Partition& alpha,
                                           const Partition& beta);
std::vector<std::vector<int>> minimal_sets(const FiniteAlgebra& alg,
                                           const Partition& alpha,
                                           const Partition& beta);

// True iff some stored pair breaks beta over alpha on the side carrying
// (alpha, beta) while mapping delta into gamma on the other side.
// `first_side` is 0 when (alpha, beta) lives on the left coordinate.
bool can_separate(const PairPolynomialClosure& pc, int first_side,
                  const Partition& alpha, const Partition& beta,
                  const Partition& gamma, const Partition& delta);

// Same-variable separation: one unary polynomial breaking beta over alpha
// while mapping delta into gamma.
bool can_separate(const UnaryPolynomialClosure& pol, const Partition& alpha,
                  const Partition& beta, const Partition& gamma,
                  const Partition& delta);

// The domain of one variable as a standalone algebra: operations induced on
// the domain elements relabelled to 0..k-1, its block structure, and the
// congruence collapsing its least block.
struct DomainAlgebra {
  ImageAlgebra image;
  SmbStructure smb;
  Partition least_collapse;
};
DomainAlgebra domain_algebra(const Instance& p, int v);

// One congruence cover on the domain algebra of a variable; partitions are
// over the induced 0..k-1 labels of the matching DomainAlgebra.
struct CoverEntry {
  int variable = 0;
  Partition alpha;
  Partition beta;
};

// All covers alpha < beta below the least-block collapse, over all variables.
// Variables ascending, covers in covers_below order.
struct CoverIndex {
  std::vector<DomainAlgebra> domains;  // indexed by variable
  std::vector<CoverEntry> entries;
};
CoverIndex cover_index(const Instance& p);

// Separation queries between cover-index entries with respect to the binary
// projections of a (2,3)-minimal instance. Unary and pair closures are
// computed lazily and cached. Querying a variable pair that shares no
// constraint throws Error(precondition).
class SeparationOracle {
 public:
  SeparationOracle(const Instance& p, CoverIndex index);

  const CoverIndex& index() const { return index_; }

  // "(alpha, beta) of entry_a can be separated from (gamma, delta) of
  // entry_b"; entries index into index().entries.
  bool can_separate(int entry_a, int entry_b);

 private:
  const UnaryPolynomialClosure& unary(int v);
  const PairPolynomialClosure& pair_closure(int i, int j);  // i < j

  CoverIndex index_;
  // Binary projections between adjacent variables, in induced labels.
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> relations_;
  std::map<int, UnaryPolynomialClosure> unary_;
  std::map<std::pair<int, int>, PairPolynomialClosure> pairs_;
};

// Variable sets of the cover classes: for each index entry not yet swept, the
// set of variables carrying a cover that cannot be separated from it.
// Deduplicated; each set sorted; the list sorted. The instance overload
// verifies (2,3)-minimality and throws Error(precondition) when it fails.
std::vector<std::vector<int>> coherent_sets(const Instance& p,
                                            const CoverIndex& index);
std::vector<std::vector<int>> coherent_sets(SeparationOracle& oracle);

// Elements a for which some beta-related pair (b, c) has (a & b, a & c)
// outside alpha.
std::vector<int> split_elements(const FiniteAlgebra& alg,
                                const Partition& alpha, const Partition& beta);

// Cover on one coordinate of a relation.
struct PositionCover {
  int position = 0;
  const FiniteAlgebra* algebra = nullptr;
  Partition alpha;
  Partition beta;
};

// True iff within every tuple the covered positions agree on whether they
// hold split elements.
bool is_aligned(const std::vector<std::vector<int>>& tuples,
                const std::vector<PositionCover>& covers);

struct CollapsingPolynomial {
  std::vector<std::vector<int>> components;  // per coordinate, a map table
};

// Exhaustive search of the component-map closure of a small subdirect
// relation (|tuples| bounded by the collapsing cap) for an idempotent member
// that maps every coordinate into its least block, collapses every cover
// separable from (alpha, beta) at coordinate i, realises a minimal set at
// every non-separable cover's coordinate, fixes `pinned` pointwise, and moves
// b into the alpha-class of pinned[i]. Returns nullopt when no member
// qualifies.
std::optional<CollapsingPolynomial> find_collapsing_polynomial(
    const std::vector<const FiniteAlgebra*>& coords,
    const std::vector<std::vector<int>>& tuples, int i, const Partition& alpha,
    const Partition& beta, const std::vector<int>& pinned, int b);

}  // namespace smbcsp
