#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smbcsp/instance.hpp"

namespace smbcsp {

// Two-section of the constraint hypergraph: vertices are variables, and two
// variables are adjacent when some constraint scope contains both.
struct ScopeGraph {
  int num_variables = 0;
  std::vector<std::pair<int, int>> edges;    // i < j, sorted
  std::vector<std::vector<int>> neighbours;  // per vertex, sorted

  bool adjacent(int i, int j) const;
};

ScopeGraph scope_graph(const Instance& p);

// Connected components of the scope graph, sorted by smallest member;
// isolated variables form their own components.
std::vector<std::vector<int>> variable_components(const Instance& p);

// For every scope-graph edge {i, j} with i < j: the intersection over all
// covering constraints of their projections onto (i, j). Exact pair
// relations when the instance is (2,3)-minimal, over-approximations of the
// solution-set projections otherwise.
using EdgeRelations =
    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>>;
EdgeRelations edge_relations(const Instance& p);

// Graph on (variable, value) pairs: (i,a) and (j,b) are adjacent when {i,j}
// is a scope-graph edge whose relation contains (a,b).
struct Microstructure {
  std::vector<std::pair<int, int>> vertices;  // sorted
  std::vector<int> component;  // per vertex; ids ordered by first vertex
  int num_components = 0;

  int vertex_index(int variable, int value) const;  // -1 when absent
  int component_of(int variable, int value) const;  // -1 when absent
};

Microstructure microstructure(const Instance& p);

// A closed walk that loses its starting value: propagating {value} along the
// edge relations around the cycle does not recover it.
struct CycleInconsistency {
  std::vector<int> cycle;  // variables; consecutive entries adjacent, closed
  int value = 0;           // value at cycle.front() that does not return
};

// Checks every fundamental cycle of a spanning forest of the scope graph and
// every triangle, from every starting vertex. One traversal direction
// suffices: a value returns around a closed walk iff it returns around the
// reversed walk.
std::optional<CycleInconsistency> find_cycle_inconsistency(const Instance& p);
bool is_cycle_consistent(const Instance& p);

// Partition of the values of a (1,1)-minimal instance induced by the
// components of a disconnected microstructure: classes[c][v] holds the
// values of variable v lying in component c. Empty result when the
// microstructure is connected or some constraint tuple mixes components (the
// components then do not split the instance).
struct InstanceSplit {
  std::vector<std::vector<std::vector<int>>> classes;  // [component][variable]
};
std::optional<InstanceSplit> split_by_microstructure(const Instance& p);

// Image of the instance under the block projections of its template
// structures: values map to their block ids and each template algebra to its
// block semilattice (meet of block ids, d(a,b,c) = (a&b)&c). Requires block
// structure for every template algebra.
Instance block_quotient(const Instance& p);

// The block quotient is (1,1)-stable and cycle-consistent.
bool is_block_2_consistent(const Instance& p);

// Deterministic DOT renderings.
std::string scope_graph_dot(const Instance& p);
std::string microstructure_dot(const Instance& p);

}  // namespace smbcsp
