#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace smbcsp {

// A finite idempotent algebra (A; meet, d) on universe {0, ..., size-1} with a
// binary operation `meet` and a ternary operation `d`, both given by tables.
// Immutable after construction.
class FiniteAlgebra {
 public:
  // Validates ranges and idempotence of both operations.
  FiniteAlgebra(std::string name, int size, std::vector<int> meet_table,
                std::vector<int> d_table);

  const std::string& name() const { return name_; }
  int size() const { return n_; }

  int meet(int a, int b) const { return meet_table_[a * n_ + b]; }
  int d(int a, int b, int c) const { return d_table_[(a * n_ + b) * n_ + c]; }

  const std::vector<int>& meet_table() const { return meet_table_; }
  const std::vector<int>& d_table() const { return d_table_; }

  bool same_tables(const FiniteAlgebra& other) const {
    return n_ == other.n_ && meet_table_ == other.meet_table_ &&
           d_table_ == other.d_table_;
  }

 private:
  std::string name_;
  int n_;
  std::vector<int> meet_table_;
  std::vector<int> d_table_;
};

using AlgebraPtr = std::shared_ptr<const FiniteAlgebra>;

// Partition of {0..n-1} in canonical form: block_of[x] is the block id of x,
// and block ids are assigned in increasing order of the least block member.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<int> block_of);

  static Partition equality(int n);
  static Partition full(int n);
  // blocks: list of element lists; must cover {0..n-1} disjointly.
  static Partition from_blocks(int n, const std::vector<std::vector<int>>& blocks);

  int size() const { return static_cast<int>(block_of_.size()); }
  int block_count() const { return num_blocks_; }
  int block_of(int x) const { return block_of_[x]; }
  bool same_block(int x, int y) const { return block_of_[x] == block_of_[y]; }
  std::vector<std::vector<int>> blocks() const;

  // True iff every block of *this is contained in a block of coarser.
  bool refines(const Partition& coarser) const;

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.block_of_ == b.block_of_;
  }
  friend bool operator<(const Partition& a, const Partition& b) {
    return a.block_of_ < b.block_of_;
  }

  const std::vector<int>& raw() const { return block_of_; }

 private:
  std::vector<int> block_of_;
  int num_blocks_ = 0;
};

// Meet (common refinement) and join (transitive closure of the union) of
// equivalence relations. Join of two congruences is again a congruence.
Partition partition_meet(const Partition& a, const Partition& b);
Partition partition_join(const Partition& a, const Partition& b);

// True iff p is compatible with both operations of alg.
bool is_congruence(const FiniteAlgebra& alg, const Partition& p);

// Least congruence identifying a and b.
Partition principal_congruence(const FiniteAlgebra& alg, int a, int b);

// All congruences, ordered finest-first (descending block count) and then
// lexicographically. Computed from principal congruences closed under join.
std::vector<Partition> all_congruences(const FiniteAlgebra& alg);

// Exhaustive enumeration over all partitions; only for small universes.
// Oracle for all_congruences.
std::vector<Partition> all_congruences_exhaustive(const FiniteAlgebra& alg);

// Covering pairs (alpha, beta) with alpha < beta inside the congruence
// interval [equality, theta], as indices into a returned congruence list.
struct CoverPair {
  Partition alpha;
  Partition beta;
};
std::vector<CoverPair> covers_below(const FiniteAlgebra& alg, const Partition& theta);

// Least subuniverse containing seed; elements sorted.
std::vector<int> generate_subuniverse(const FiniteAlgebra& alg,
                                      const std::vector<int>& seed);

bool is_subuniverse(const FiniteAlgebra& alg, const std::vector<int>& elements);

// Closes a set of k-tuples under the componentwise operations of the given
// coordinate algebras. Tuples sorted lexicographically. Guarded by the
// closure cap.
std::vector<std::vector<int>> close_tuples(
    const std::vector<const FiniteAlgebra*>& coords,
    std::vector<std::vector<int>> seed);

// Algebra induced on the image of an idempotent unary map `retr` (given over
// the ambient labels) restricted to `carrier`, with operations
// op'(x, y) = retr(op(x, y)). Elements are relabelled to 0..k-1.
// For retr = identity this is the subalgebra induced on carrier.
struct ImageAlgebra {
  AlgebraPtr algebra;
  std::vector<int> to_old;  // new label -> ambient label (sorted)
  std::vector<int> to_new;  // ambient label -> new label, -1 outside carrier
};
ImageAlgebra image_algebra(const FiniteAlgebra& ambient, std::string name,
                           const std::vector<int>& carrier,
                           const std::vector<int>& retr);
ImageAlgebra induced_algebra(const FiniteAlgebra& ambient, std::string name,
                             const std::vector<int>& carrier);

// Idempotent power of a self-map on {0..n-1}: f^(k) with f^(k) o f^(k) = f^(k).
std::vector<int> idempotent_power(const std::vector<int>& f);

}  // namespace smbcsp
