#include "smbcsp/graphs.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "smbcsp/error.hpp"

namespace smbcsp {

namespace {

// Lexicographically least among all rotations and reflections; the
// representative is itself a closed walk through the same edges.
std::vector<int> canonical_cycle(const std::vector<int>& cyc) {
  const int len = static_cast<int>(cyc.size());
  std::vector<int> best;
  std::vector<int> cand(len);
  for (int dir = 0; dir < 2; ++dir) {
    for (int s = 0; s < len; ++s) {
      for (int t = 0; t < len; ++t) {
        const int k = dir == 0 ? s + t : s - t + len * len;
        cand[t] = cyc[k % len];
      }
      if (best.empty() || cand < best) best = cand;
    }
  }
  return best;
}

// Fundamental cycles of a breadth-first spanning forest plus all triangles,
// deduplicated up to rotation and reflection.
std::vector<std::vector<int>> generating_cycles(const ScopeGraph& g) {
  const int n = g.num_variables;
  std::vector<int> parent(n, -2);  // -2 unvisited, -1 root
  for (int root = 0; root < n; ++root) {
    if (parent[root] != -2) continue;
    parent[root] = -1;
    std::deque<int> queue = {root};
    while (!queue.empty()) {
      const int x = queue.front();
      queue.pop_front();
      for (int y : g.neighbours[x]) {
        if (parent[y] != -2) continue;
        parent[y] = x;
        queue.push_back(y);
      }
    }
  }

  std::set<std::vector<int>> seen;
  std::vector<std::vector<int>> out;
  const auto add = [&](const std::vector<int>& cyc) {
    auto key = canonical_cycle(cyc);
    if (seen.insert(key).second) out.push_back(std::move(key));
  };

  for (const auto& [u, v] : g.edges) {
    if (parent[u] == v || parent[v] == u) continue;
    std::vector<char> on_path(n, 0);
    for (int x = u; x != -1; x = parent[x]) on_path[x] = 1;
    std::vector<int> from_v;
    int lca = v;
    while (!on_path[lca]) {
      from_v.push_back(lca);
      lca = parent[lca];
    }
    std::vector<int> cyc;
    for (int x = u;; x = parent[x]) {
      cyc.push_back(x);
      if (x == lca) break;
    }
    cyc.insert(cyc.end(), from_v.rbegin(), from_v.rend());
    add(cyc);
  }

  for (int i = 0; i < n; ++i) {
    const auto& nb = g.neighbours[i];
    for (size_t a = 0; a < nb.size(); ++a) {
      if (nb[a] < i) continue;
      for (size_t b = a + 1; b < nb.size(); ++b) {
        if (g.adjacent(nb[a], nb[b])) add({i, nb[a], nb[b]});
      }
    }
  }
  return out;
}

// Image of S under the edge relation, read in the direction x -> y.
std::set<int> propagate(const EdgeRelations& rel, int x, int y,
                        const std::set<int>& values) {
  std::set<int> out;
  if (x < y) {
    for (const auto& [a, b] : rel.at({x, y}))
      if (values.count(a)) out.insert(b);
  } else {
    for (const auto& [a, b] : rel.at({y, x}))
      if (values.count(b)) out.insert(a);
  }
  return out;
}

}  // namespace

bool ScopeGraph::adjacent(int i, int j) const {
  if (i == j) return false;
  const auto& nb = neighbours[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

ScopeGraph scope_graph(const Instance& p) {
  std::set<std::pair<int, int>> edges;
  for (const auto& c : p.constraints()) {
    for (size_t a = 0; a < c.scope.size(); ++a)
      for (size_t b = a + 1; b < c.scope.size(); ++b)
        edges.emplace(c.scope[a], c.scope[b]);
  }
  ScopeGraph g;
  g.num_variables = p.num_variables();
  g.edges.assign(edges.begin(), edges.end());
  g.neighbours.resize(g.num_variables);
  for (const auto& [i, j] : g.edges) {
    g.neighbours[i].push_back(j);
    g.neighbours[j].push_back(i);
  }
  for (auto& nb : g.neighbours) std::sort(nb.begin(), nb.end());
  return g;
}

std::vector<std::vector<int>> variable_components(const Instance& p) {
  const ScopeGraph g = scope_graph(p);
  std::vector<int> comp(g.num_variables, -1);
  std::vector<std::vector<int>> out;
  for (int root = 0; root < g.num_variables; ++root) {
    if (comp[root] != -1) continue;
    comp[root] = static_cast<int>(out.size());
    std::vector<int> members = {root};
    std::deque<int> queue = {root};
    while (!queue.empty()) {
      const int x = queue.front();
      queue.pop_front();
      for (int y : g.neighbours[x]) {
        if (comp[y] != -1) continue;
        comp[y] = comp[root];
        members.push_back(y);
        queue.push_back(y);
      }
    }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;
}

EdgeRelations edge_relations(const Instance& p) {
  EdgeRelations rel;
  for (const auto& c : p.constraints()) {
    const size_t k = c.scope.size();
    for (size_t a = 0; a < k; ++a) {
      for (size_t b = a + 1; b < k; ++b) {
        std::set<std::pair<int, int>> proj;
        for (const auto& t : c.tuples) proj.emplace(t[a], t[b]);
        std::vector<std::pair<int, int>> pairs(proj.begin(), proj.end());
        const auto key = std::make_pair(c.scope[a], c.scope[b]);
        auto it = rel.find(key);
        if (it == rel.end()) {
          rel.emplace(key, std::move(pairs));
        } else {
          std::vector<std::pair<int, int>> both;
          std::set_intersection(it->second.begin(), it->second.end(),
                                pairs.begin(), pairs.end(),
                                std::back_inserter(both));
          it->second = std::move(both);
        }
      }
    }
  }
  return rel;
}

int Microstructure::vertex_index(int variable, int value) const {
  const auto key = std::make_pair(variable, value);
  auto it = std::lower_bound(vertices.begin(), vertices.end(), key);
  if (it == vertices.end() || *it != key) return -1;
  return static_cast<int>(it - vertices.begin());
}

int Microstructure::component_of(int variable, int value) const {
  const int i = vertex_index(variable, value);
  return i < 0 ? -1 : component[i];
}

Microstructure microstructure(const Instance& p) {
  Microstructure m;
  for (int v = 0; v < p.num_variables(); ++v)
    for (int a : p.domain(v).elements) m.vertices.emplace_back(v, a);

  std::vector<std::vector<int>> adj(m.vertices.size());
  for (const auto& [edge, pairs] : edge_relations(p)) {
    for (const auto& [a, b] : pairs) {
      const int u = m.vertex_index(edge.first, a);
      const int w = m.vertex_index(edge.second, b);
      adj[u].push_back(w);
      adj[w].push_back(u);
    }
  }

  m.component.assign(m.vertices.size(), -1);
  for (size_t root = 0; root < m.vertices.size(); ++root) {
    if (m.component[root] != -1) continue;
    m.component[root] = m.num_components++;
    std::deque<int> queue = {static_cast<int>(root)};
    while (!queue.empty()) {
      const int x = queue.front();
      queue.pop_front();
      for (int y : adj[x]) {
        if (m.component[y] != -1) continue;
        m.component[y] = m.component[root];
        queue.push_back(y);
      }
    }
  }
  return m;
}

std::optional<CycleInconsistency> find_cycle_inconsistency(const Instance& p) {
  const ScopeGraph g = scope_graph(p);
  const EdgeRelations rel = edge_relations(p);
  for (const auto& cyc : generating_cycles(g)) {
    const int len = static_cast<int>(cyc.size());
    for (int s = 0; s < len; ++s) {
      for (int a : p.domain(cyc[s]).elements) {
        std::set<int> values = {a};
        for (int t = 0; t < len && !values.empty(); ++t)
          values = propagate(rel, cyc[(s + t) % len], cyc[(s + t + 1) % len],
                             values);
        if (values.count(a)) continue;
        CycleInconsistency bad;
        bad.cycle.reserve(len);
        for (int t = 0; t < len; ++t) bad.cycle.push_back(cyc[(s + t) % len]);
        bad.value = a;
        return bad;
      }
    }
  }
  return std::nullopt;
}

bool is_cycle_consistent(const Instance& p) {
  return !find_cycle_inconsistency(p).has_value();
}

std::optional<InstanceSplit> split_by_microstructure(const Instance& p) {
  const Microstructure m = microstructure(p);
  if (m.num_components <= 1) return std::nullopt;
  for (const auto& c : p.constraints()) {
    for (const auto& t : c.tuples) {
      const int comp = m.component_of(c.scope[0], t[0]);
      for (size_t k = 1; k < c.scope.size(); ++k)
        if (m.component_of(c.scope[k], t[k]) != comp) return std::nullopt;
    }
  }
  InstanceSplit split;
  split.classes.assign(
      m.num_components,
      std::vector<std::vector<int>>(p.num_variables()));
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    const auto& [variable, value] = m.vertices[i];
    split.classes[m.component[i]][variable].push_back(value);
  }
  return split;
}

Instance block_quotient(const Instance& p) {
  std::map<std::string, AlgebraPtr> quotients;
  std::vector<VarDomain> domains;
  domains.reserve(p.num_variables());
  for (int v = 0; v < p.num_variables(); ++v) {
    const auto s = p.algebra_structure(v);
    const VarDomain& dom = p.domain(v);
    if (!s) {
      throw Error(ErrorCode::precondition,
                  "block_quotient: template algebra '" + dom.algebra_id +
                      "' has no block structure");
    }
    auto it = quotients.find(dom.algebra_id);
    if (it == quotients.end()) {
      const int m = s->block_count();
      std::vector<int> meet(m * m), d(m * m * m);
      for (int b1 = 0; b1 < m; ++b1) {
        for (int b2 = 0; b2 < m; ++b2) {
          meet[b1 * m + b2] = s->block_meet(b1, b2);
          for (int b3 = 0; b3 < m; ++b3)
            d[(b1 * m + b2) * m + b3] =
                s->block_meet(s->block_meet(b1, b2), b3);
        }
      }
      it = quotients
               .emplace(dom.algebra_id,
                        std::make_shared<const FiniteAlgebra>(
                            dom.algebra->name() + "/blocks", m,
                            std::move(meet), std::move(d)))
               .first;
    }
    std::set<int> blocks;
    for (int a : dom.elements) blocks.insert(s->block_of(a));
    domains.push_back(
        {dom.algebra_id, it->second, {blocks.begin(), blocks.end()}});
  }

  std::vector<Constraint> constraints;
  constraints.reserve(p.constraints().size());
  for (const auto& c : p.constraints()) {
    std::set<std::vector<int>> tuples;
    for (const auto& t : c.tuples) {
      std::vector<int> q(t.size());
      for (size_t k = 0; k < t.size(); ++k)
        q[k] = p.algebra_structure(c.scope[k])->block_of(t[k]);
      tuples.insert(std::move(q));
    }
    constraints.push_back({c.scope, {tuples.begin(), tuples.end()}});
  }
  return Instance(p.names(), std::move(domains), std::move(constraints));
}

bool is_block_2_consistent(const Instance& p) {
  const Instance q = block_quotient(p);
  if (canonical_key(enforce_kl_minimality(q, 1, 1)) != canonical_key(q))
    return false;
  return is_cycle_consistent(q);
}

std::string scope_graph_dot(const Instance& p) {
  const ScopeGraph g = scope_graph(p);
  std::ostringstream os;
  os << "graph scopes {\n";
  for (int v = 0; v < g.num_variables; ++v)
    os << "  \"" << p.names()[v] << "\";\n";
  for (const auto& [i, j] : g.edges)
    os << "  \"" << p.names()[i] << "\" -- \"" << p.names()[j] << "\";\n";
  os << "}\n";
  return os.str();
}

std::string microstructure_dot(const Instance& p) {
  const Microstructure m = microstructure(p);
  std::ostringstream os;
  os << "graph microstructure {\n";
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    os << "  \"" << p.names()[m.vertices[i].first] << '=' << m.vertices[i].second
       << "\" [component=" << m.component[i] << "];\n";
  }
  for (const auto& [edge, pairs] : edge_relations(p)) {
    for (const auto& [a, b] : pairs) {
      os << "  \"" << p.names()[edge.first] << '=' << a << "\" -- \""
         << p.names()[edge.second] << '=' << b << "\";\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace smbcsp
