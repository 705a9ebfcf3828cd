#include "smbcsp/poly.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "smbcsp/caps.hpp"
#include "smbcsp/error.hpp"
#include "smbcsp/graphs.hpp"

namespace smbcsp {

namespace {

// One member of a component-map closure: a map table per coordinate.
using Member = std::vector<std::vector<int>>;

Member meet_of(const std::vector<const FiniteAlgebra*>& coords,
               const Member& x, const Member& y) {
  Member out(coords.size());
  for (std::size_t j = 0; j < coords.size(); ++j) {
    out[j].resize(x[j].size());
    for (std::size_t v = 0; v < x[j].size(); ++v)
      out[j][v] = coords[j]->meet(x[j][v], y[j][v]);
  }
  return out;
}

Member d_of(const std::vector<const FiniteAlgebra*>& coords, const Member& x,
            const Member& y, const Member& z) {
  Member out(coords.size());
  for (std::size_t j = 0; j < coords.size(); ++j) {
    out[j].resize(x[j].size());
    for (std::size_t v = 0; v < x[j].size(); ++v)
      out[j][v] = coords[j]->d(x[j][v], y[j][v], z[j][v]);
  }
  return out;
}

// Fixpoint of the pointwise operations over the seed members. Every pair and
// triple of members is combined exactly once. Result sorted.
std::vector<Member> close_component_maps(
    const std::vector<const FiniteAlgebra*>& coords,
    const std::vector<Member>& seeds) {
  std::set<Member> seen(seeds.begin(), seeds.end());
  std::vector<Member> members(seen.begin(), seen.end());
  const auto push = [&](Member m) {
    if (!seen.insert(m).second) return;
    members.push_back(std::move(m));
    if (static_cast<std::int64_t>(members.size()) > caps().closure)
      throw Error(ErrorCode::cap_exceeded,
                  "polynomial closure exceeds the closure cap of " +
                      std::to_string(caps().closure) + " maps");
  };
  std::size_t processed = 0;
  while (processed < members.size()) {
    const std::size_t boundary = members.size();
    for (std::size_t x = 0; x < boundary; ++x)
      for (std::size_t y = 0; y < boundary; ++y) {
        if (x < processed && y < processed) continue;
        push(meet_of(coords, members[x], members[y]));
      }
    for (std::size_t x = 0; x < boundary; ++x)
      for (std::size_t y = 0; y < boundary; ++y)
        for (std::size_t z = 0; z < boundary; ++z) {
          if (x < processed && y < processed && z < processed) continue;
          push(d_of(coords, members[x], members[y], members[z]));
        }
    processed = boundary;
  }
  std::sort(members.begin(), members.end());
  return members;
}

std::vector<int> identity_map(int n) {
  std::vector<int> id(n);
  std::iota(id.begin(), id.end(), 0);
  return id;
}

bool is_idempotent_map(const std::vector<int>& f) {
  for (std::size_t x = 0; x < f.size(); ++x)
    if (f[f[x]] != f[x]) return false;
  return true;
}

std::vector<int> image_of(const std::vector<int>& f) {
  std::vector<int> img(f);
  std::sort(img.begin(), img.end());
  img.erase(std::unique(img.begin(), img.end()), img.end());
  return img;
}

void require_partition_size(const Partition& p, int n, const char* what) {
  if (p.size() != n)
    throw Error(ErrorCode::precondition,
                std::string(what) + " is over a universe of size " +
                    std::to_string(p.size()) + ", expected " +
                    std::to_string(n));
}

// alpha strictly below beta with no congruence in between.
void require_cover(const FiniteAlgebra& alg, const Partition& alpha,
                   const Partition& beta) {
  require_partition_size(alpha, alg.size(), "alpha");
  require_partition_size(beta, alg.size(), "beta");
  if (!is_congruence(alg, alpha) || !is_congruence(alg, beta))
    throw Error(ErrorCode::precondition,
                "alpha and beta must be congruences of " + alg.name());
  if (alpha == beta || !alpha.refines(beta))
    throw Error(ErrorCode::precondition,
                "alpha must lie strictly below beta");
  for (const Partition& g : all_congruences(alg)) {
    if (g == alpha || g == beta) continue;
    if (alpha.refines(g) && g.refines(beta))
      throw Error(ErrorCode::precondition,
                  "alpha is not covered by beta: a congruence lies between");
  }
}

}  // namespace

UnaryPolynomialClosure unary_polynomial_closure(const FiniteAlgebra& alg) {
  const int n = alg.size();
  std::vector<Member> seeds;
  seeds.push_back({identity_map(n)});
  for (int c = 0; c < n; ++c) seeds.push_back({std::vector<int>(n, c)});
  UnaryPolynomialClosure out;
  out.universe = n;
  for (Member& m : close_component_maps({&alg}, seeds))
    out.maps.push_back(std::move(m[0]));
  return out;
}

PairPolynomialClosure pair_polynomial_closure(
    const FiniteAlgebra& left, const FiniteAlgebra& right,
    const std::vector<std::pair<int, int>>& relation) {
  std::vector<Member> seeds;
  seeds.push_back({identity_map(left.size()), identity_map(right.size())});
  for (const auto& [a, b] : relation) {
    if (a < 0 || a >= left.size() || b < 0 || b >= right.size())
      throw Error(ErrorCode::invalid_input,
                  "relation pair out of range of the side algebras");
    seeds.push_back({std::vector<int>(left.size(), a),
                     std::vector<int>(right.size(), b)});
  }
  PairPolynomialClosure out;
  out.left_universe = left.size();
  out.right_universe = right.size();
  for (Member& m : close_component_maps({&left, &right}, seeds))
    out.pairs.emplace_back(std::move(m[0]), std::move(m[1]));
  return out;
}

bool maps_into(const std::vector<int>& f, const Partition& beta,
               const Partition& alpha) {
  const int n = static_cast<int>(f.size());
  for (int x = 0; x < n; ++x)
    for (int y = x + 1; y < n; ++y)
      if (beta.same_block(x, y) && !alpha.same_block(f[x], f[y])) return false;
  return true;
}

std::vector<std::vector<int>> minimal_sets(const UnaryPolynomialClosure& pol,
                                           const Partition& alpha,
                                           const Partition& beta) {
  std::set<std::vector<int>> candidates;
  for (const auto& f : pol.maps)
    if (is_idempotent_map(f) && !maps_into(f, beta, alpha))
      candidates.insert(image_of(f));
  std::vector<std::vector<int>> out;
  for (const auto& u : candidates) {
    bool minimal = true;
    for (const auto& v : candidates) {
      if (v.size() < u.size() &&
          std::includes(u.begin(), u.end(), v.begin(), v.end())) {
        minimal = false;
        break;
      }
    }
    if (minimal) out.push_back(u);
  }
  return out;
}

std::vector<std::vector<int>> minimal_sets(const FiniteAlgebra& alg,
                                           const Partition& alpha,
                                           const Partition& beta) {
  require_cover(alg, alpha, beta);
  return minimal_sets(unary_polynomial_closure(alg), alpha, beta);
}

bool can_separate(const PairPolynomialClosure& pc, int first_side,
                  const Partition& alpha, const Partition& beta,
                  const Partition& gamma, const Partition& delta) {
  if (first_side != 0 && first_side != 1)
    throw Error(ErrorCode::precondition, "first_side must be 0 or 1");
  const int first_n = first_side == 0 ? pc.left_universe : pc.right_universe;
  const int other_n = first_side == 0 ? pc.right_universe : pc.left_universe;
  require_partition_size(alpha, first_n, "alpha");
  require_partition_size(beta, first_n, "beta");
  require_partition_size(gamma, other_n, "gamma");
  require_partition_size(delta, other_n, "delta");
  for (const auto& [fl, fr] : pc.pairs) {
    const auto& fi = first_side == 0 ? fl : fr;
    const auto& fj = first_side == 0 ? fr : fl;
    if (!maps_into(fi, beta, alpha) && maps_into(fj, delta, gamma))
      return true;
  }
  return false;
}

bool can_separate(const UnaryPolynomialClosure& pol, const Partition& alpha,
                  const Partition& beta, const Partition& gamma,
                  const Partition& delta) {
  require_partition_size(alpha, pol.universe, "alpha");
  require_partition_size(beta, pol.universe, "beta");
  require_partition_size(gamma, pol.universe, "gamma");
  require_partition_size(delta, pol.universe, "delta");
  for (const auto& f : pol.maps)
    if (!maps_into(f, beta, alpha) && maps_into(f, delta, gamma)) return true;
  return false;
}

DomainAlgebra domain_algebra(const Instance& p, int v) {
  if (v < 0 || v >= p.num_variables())
    throw Error(ErrorCode::precondition, "variable index out of range");
  const VarDomain& dom = p.domain(v);
  if (dom.elements.empty())
    throw Error(ErrorCode::precondition,
                "variable " + p.names()[v] + " has an empty domain");
  DomainAlgebra out;
  out.image = induced_algebra(*dom.algebra, dom.algebra_id + ":" + p.names()[v],
                              dom.elements);
  out.smb = detect_smb(*out.image.algebra);
  out.least_collapse = least_block_collapse(*out.image.algebra, out.smb);
  return out;
}

CoverIndex cover_index(const Instance& p) {
  CoverIndex out;
  for (int v = 0; v < p.num_variables(); ++v) {
    out.domains.push_back(domain_algebra(p, v));
    const DomainAlgebra& da = out.domains.back();
    for (CoverPair& c : covers_below(*da.image.algebra, da.least_collapse))
      out.entries.push_back(
          CoverEntry{v, std::move(c.alpha), std::move(c.beta)});
  }
  return out;
}

SeparationOracle::SeparationOracle(const Instance& p, CoverIndex index)
    : index_(std::move(index)) {
  for (const auto& [edge, pairs] : edge_relations(p)) {
    const auto& to_new_i = index_.domains[edge.first].image.to_new;
    const auto& to_new_j = index_.domains[edge.second].image.to_new;
    std::vector<std::pair<int, int>> relabelled;
    relabelled.reserve(pairs.size());
    for (const auto& [a, b] : pairs)
      relabelled.emplace_back(to_new_i[a], to_new_j[b]);
    relations_.emplace(edge, std::move(relabelled));
  }
}

const UnaryPolynomialClosure& SeparationOracle::unary(int v) {
  auto it = unary_.find(v);
  if (it == unary_.end())
    it = unary_
             .emplace(v,
                      unary_polynomial_closure(*index_.domains[v].image.algebra))
             .first;
  return it->second;
}

const PairPolynomialClosure& SeparationOracle::pair_closure(int i, int j) {
  const auto key = std::make_pair(i, j);
  auto it = pairs_.find(key);
  if (it == pairs_.end()) {
    const auto rel = relations_.find(key);
    if (rel == relations_.end())
      throw Error(ErrorCode::precondition,
                  "variables " + std::to_string(i) + " and " +
                      std::to_string(j) + " share no constraint");
    it = pairs_
             .emplace(key, pair_polynomial_closure(
                               *index_.domains[i].image.algebra,
                               *index_.domains[j].image.algebra, rel->second))
             .first;
  }
  return it->second;
}

bool SeparationOracle::can_separate(int entry_a, int entry_b) {
  const CoverEntry& a = index_.entries[entry_a];
  const CoverEntry& b = index_.entries[entry_b];
  if (a.variable == b.variable)
    return smbcsp::can_separate(unary(a.variable), a.alpha, a.beta, b.alpha,
                                b.beta);
  const int lo = std::min(a.variable, b.variable);
  const int hi = std::max(a.variable, b.variable);
  const int first_side = a.variable == lo ? 0 : 1;
  return smbcsp::can_separate(pair_closure(lo, hi), first_side, a.alpha,
                              a.beta, b.alpha, b.beta);
}

std::vector<std::vector<int>> coherent_sets(SeparationOracle& oracle) {
  const auto& entries = oracle.index().entries;
  const int m = static_cast<int>(entries.size());
  std::vector<char> flagged(m, 0);
  std::set<std::vector<int>> sets;
  for (int a = 0; a < m; ++a) {
    if (flagged[a]) continue;
    flagged[a] = 1;
    std::set<int> w = {entries[a].variable};
    for (int b = 0; b < m; ++b) {
      if (!oracle.can_separate(a, b)) {
        w.insert(entries[b].variable);
        flagged[b] = 1;
      }
    }
    sets.insert(std::vector<int>(w.begin(), w.end()));
  }
  return {sets.begin(), sets.end()};
}

std::vector<std::vector<int>> coherent_sets(const Instance& p,
                                            const CoverIndex& index) {
  if (canonical_key(enforce_kl_minimality(p, 2, 3)) != canonical_key(p))
    throw Error(ErrorCode::precondition, "instance is not (2,3)-minimal");
  SeparationOracle oracle(p, index);
  return coherent_sets(oracle);
}

std::vector<int> split_elements(const FiniteAlgebra& alg,
                                const Partition& alpha,
                                const Partition& beta) {
  const int n = alg.size();
  require_partition_size(alpha, n, "alpha");
  require_partition_size(beta, n, "beta");
  std::vector<int> out;
  for (int a = 0; a < n; ++a) {
    bool split = false;
    for (int b = 0; b < n && !split; ++b)
      for (int c = b + 1; c < n && !split; ++c)
        if (beta.same_block(b, c) &&
            !alpha.same_block(alg.meet(a, b), alg.meet(a, c)))
          split = true;
    if (split) out.push_back(a);
  }
  return out;
}

bool is_aligned(const std::vector<std::vector<int>>& tuples,
                const std::vector<PositionCover>& covers) {
  std::vector<std::vector<char>> split(covers.size());
  for (std::size_t k = 0; k < covers.size(); ++k) {
    const PositionCover& c = covers[k];
    if (c.algebra == nullptr)
      throw Error(ErrorCode::precondition, "cover without an algebra");
    split[k].assign(c.algebra->size(), 0);
    for (int a : split_elements(*c.algebra, c.alpha, c.beta)) split[k][a] = 1;
  }
  for (const auto& t : tuples) {
    for (const PositionCover& c : covers)
      if (c.position < 0 || c.position >= static_cast<int>(t.size()) ||
          t[c.position] < 0 || t[c.position] >= c.algebra->size())
        throw Error(ErrorCode::precondition,
                    "cover position or value out of range");
    for (std::size_t k = 1; k < covers.size(); ++k)
      if (split[k][t[covers[k].position]] != split[0][t[covers[0].position]])
        return false;
  }
  return true;
}

std::optional<CollapsingPolynomial> find_collapsing_polynomial(
    const std::vector<const FiniteAlgebra*>& coords,
    const std::vector<std::vector<int>>& tuples, int i, const Partition& alpha,
    const Partition& beta, const std::vector<int>& pinned, int b) {
  const int arity = static_cast<int>(coords.size());
  if (arity == 0 || tuples.empty())
    throw Error(ErrorCode::invalid_input, "relation must be nonempty");
  for (const auto& t : tuples) {
    if (static_cast<int>(t.size()) != arity)
      throw Error(ErrorCode::invalid_input, "tuple arity mismatch");
    for (int j = 0; j < arity; ++j)
      if (t[j] < 0 || t[j] >= coords[j]->size())
        throw Error(ErrorCode::invalid_input, "tuple value out of range");
  }
  if (static_cast<std::int64_t>(tuples.size()) > caps().collapsing)
    throw Error(ErrorCode::cap_exceeded,
                "relation exceeds the collapsing-search cap of " +
                    std::to_string(caps().collapsing) + " tuples");

  for (int j = 0; j < arity; ++j) {
    std::set<int> proj;
    for (const auto& t : tuples) proj.insert(t[j]);
    if (static_cast<int>(proj.size()) != coords[j]->size())
      throw Error(ErrorCode::precondition,
                  "relation is not subdirect at coordinate " +
                      std::to_string(j));
  }

  std::vector<SmbStructure> smb;
  std::vector<Partition> theta;
  for (int j = 0; j < arity; ++j) {
    smb.push_back(detect_smb(*coords[j]));
    theta.push_back(least_block_collapse(*coords[j], smb.back()));
  }

  if (i < 0 || i >= arity)
    throw Error(ErrorCode::precondition, "coordinate index out of range");
  require_cover(*coords[i], alpha, beta);
  if (!beta.refines(theta[i]))
    throw Error(ErrorCode::precondition,
                "beta must lie below the least-block collapse");

  if (std::find(tuples.begin(), tuples.end(), pinned) == tuples.end())
    throw Error(ErrorCode::precondition, "pinned tuple is not in the relation");
  for (int j = 0; j < arity; ++j)
    if (smb[j].block_of(pinned[j]) != smb[j].least_block)
      throw Error(ErrorCode::precondition,
                  "pinned tuple leaves the least blocks at coordinate " +
                      std::to_string(j));

  const int a_i = pinned[i];
  std::set<int> alpha_classes;
  for (int x = 0; x < coords[i]->size(); ++x)
    if (beta.same_block(a_i, x)) alpha_classes.insert(alpha.block_of(x));
  if (alpha_classes.size() < 2)
    throw Error(ErrorCode::precondition,
                "the beta-class of the pinned value holds one alpha-class");
  if (b < 0 || b >= coords[i]->size() || !beta.same_block(a_i, b) ||
      alpha.same_block(a_i, b))
    throw Error(ErrorCode::precondition,
                "b must be beta-related but not alpha-related to the pinned "
                "value");

  // Covers over every coordinate, split by separability from (i,alpha,beta).
  struct Site {
    int coordinate;
    Partition gamma, delta;
    bool separable = false;
  };
  std::vector<Site> sites;
  for (int j = 0; j < arity; ++j)
    for (CoverPair& c : covers_below(*coords[j], theta[j]))
      sites.push_back(Site{j, std::move(c.alpha), std::move(c.beta), false});

  std::vector<Member> seeds;
  {
    Member id(arity);
    for (int j = 0; j < arity; ++j) id[j] = identity_map(coords[j]->size());
    seeds.push_back(std::move(id));
    for (const auto& t : tuples) {
      Member c(arity);
      for (int j = 0; j < arity; ++j)
        c[j] = std::vector<int>(coords[j]->size(), t[j]);
      seeds.push_back(std::move(c));
    }
  }
  const std::vector<Member> closure = close_component_maps(coords, seeds);

  const auto separated = [&closure](int ci, const Partition& al,
                                    const Partition& be, int cj,
                                    const Partition& ga, const Partition& de) {
    for (const Member& m : closure)
      if (!maps_into(m[ci], be, al) && maps_into(m[cj], de, ga)) return true;
    return false;
  };
  for (Site& s : sites)
    s.separable = separated(i, alpha, beta, s.coordinate, s.gamma, s.delta) ||
                  separated(s.coordinate, s.gamma, s.delta, i, alpha, beta);

  // Minimal sets of the coordinate algebras for the non-separable sites.
  std::vector<UnaryPolynomialClosure> unary(arity);
  std::vector<std::vector<std::vector<int>>> site_minimal(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) {
    if (sites[s].separable) continue;
    const int j = sites[s].coordinate;
    if (unary[j].maps.empty()) unary[j] = unary_polynomial_closure(*coords[j]);
    site_minimal[s] = minimal_sets(unary[j], sites[s].gamma, sites[s].delta);
  }

  for (const Member& m : closure) {
    bool ok = true;
    for (int j = 0; j < arity && ok; ++j) {
      if (!is_idempotent_map(m[j])) ok = false;
      if (ok && m[j][pinned[j]] != pinned[j]) ok = false;
      if (ok)
        for (int x = 0; x < coords[j]->size() && ok; ++x)
          if (smb[j].block_of(m[j][x]) != smb[j].least_block) ok = false;
    }
    if (ok && !alpha.same_block(m[i][b], b)) ok = false;
    for (std::size_t s = 0; s < sites.size() && ok; ++s) {
      const Site& site = sites[s];
      if (site.separable) {
        if (!maps_into(m[site.coordinate], site.delta, site.gamma)) ok = false;
      } else {
        const std::vector<int> img = image_of(m[site.coordinate]);
        if (std::find(site_minimal[s].begin(), site_minimal[s].end(), img) ==
            site_minimal[s].end())
          ok = false;
      }
    }
    if (ok) return CollapsingPolynomial{m};
  }
  return std::nullopt;
}

}  // namespace smbcsp
