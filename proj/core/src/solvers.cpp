#include "smbcsp/solvers.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>

#include "smbcsp/caps.hpp"
#include "smbcsp/error.hpp"
#include "smbcsp/graphs.hpp"
#include "smbcsp/malcev.hpp"
#include "smbcsp/poly.hpp"

namespace smbcsp {

namespace {

void bump(const SolveOptions& opts, std::int64_t SolveStats::*field) {
  if (opts.stats != nullptr) ++(opts.stats->*field);
}

bool instance_empty(const Instance& p) {
  return p.any_domain_empty() || p.any_constraint_empty();
}

Instance with_domains(const Instance& p, std::vector<std::vector<int>> doms) {
  std::vector<VarDomain> nd;
  nd.reserve(p.num_variables());
  for (int v = 0; v < p.num_variables(); ++v) {
    VarDomain d = p.domain(v);
    d.elements = std::move(doms[v]);
    nd.push_back(std::move(d));
  }
  return Instance(p.names(), std::move(nd), p.constraints());
}

// Domain of v intersected with {value}.
Instance pin(const Instance& p, int v, int value) {
  const auto& el = p.domain(v).elements;
  std::vector<int> e;
  if (std::binary_search(el.begin(), el.end(), value)) e.push_back(value);
  return p.with_domain(v, std::move(e));
}

std::vector<int> met_blocks(const Instance& p, int v) {
  auto s = p.algebra_structure(v);
  if (s == nullptr)
    throw Error(ErrorCode::not_smb,
                "variable " + p.names()[v] + " has no block structure");
  std::set<int> bs;
  for (int x : p.domain(v).elements) bs.insert(s->block_of(x));
  return std::vector<int>(bs.begin(), bs.end());
}

// Members of the least met block of v's domain.
std::vector<int> least_members(const Instance& p, int v) {
  return p.algebra_structure(v)->min_members(p.domain(v).elements);
}

bool blocks_linear(const SmbStructure& s, const std::vector<int>& met) {
  for (int b : met)
    for (int c : met) {
      int m = s.block_meet(b, c);
      if (m != b && m != c) return false;
    }
  return true;
}

bool blocks_flat(const SmbStructure& s, const std::vector<int>& met) {
  if (met.size() <= 1) return true;
  int least = met[0];
  for (int b : met) least = s.block_meet(least, b);
  for (int b : met)
    for (int c : met)
      if (b != c && b != least && c != least && s.block_meet(b, c) != least)
        return false;
  return true;
}

bool weakly_irreducible(const Instance& p) {
  int m = max_multiblock_domain_size(p);
  if (m == 0) return true;
  for (int v = 0; v < p.num_variables(); ++v) {
    if (static_cast<int>(p.domain(v).elements.size()) != m) continue;
    if (met_blocks(p, v).size() < 2) continue;
    if (!domain_algebra(p, v).smb.is_unital()) return false;
  }
  return true;
}

bool min_stable(const Instance& p, int k, int l) {
  return canonical_key(enforce_kl_minimality(p, k, l)) == canonical_key(p);
}

// Decision memo, LRU-bounded by caps().memo_entries.
class DecisionMemo {
 public:
  std::optional<bool> find(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    order_.splice(order_.begin(), order_, it->second.second);
    return it->second.first;
  }

  void insert(const std::string& key, bool value) {
    auto it = map_.find(key);
    if (it != map_.end()) {
      it->second.first = value;
      order_.splice(order_.begin(), order_, it->second.second);
      return;
    }
    order_.push_front(key);
    map_.emplace(key, std::make_pair(value, order_.begin()));
    if (static_cast<std::int64_t>(map_.size()) > caps().memo_entries) {
      map_.erase(order_.back());
      order_.pop_back();
    }
  }

 private:
  std::list<std::string> order_;
  std::unordered_map<std::string,
                     std::pair<bool, std::list<std::string>::iterator>>
      map_;
};

struct Ctx {
  SolveOptions opts;
  DecisionMemo memo;
  std::int64_t depth = 0;
};

bool decide_general(Ctx& c, const Instance& p);
Reduction enforce_weak_impl(Ctx& c, Instance p);
std::vector<std::vector<std::vector<int>>> chk_coh_impl(
    Ctx& c, const Instance& p, const std::vector<int>& w, int m);

// Pins variables one by one, keeping the first value the decider accepts.
// Yields the lexicographically first solution of the decided instance.
std::vector<int> pin_witness(const Instance& p,
                             const std::function<bool(const Instance&)>& dec) {
  Instance cur = p;
  std::vector<int> out(p.num_variables(), 0);
  for (int v = 0; v < p.num_variables(); ++v) {
    bool found = false;
    for (int val : cur.domain(v).elements) {
      Instance trial = cur.with_domain(v, {val});
      if (dec(trial)) {
        cur = std::move(trial);
        out[v] = val;
        found = true;
        break;
      }
    }
    if (!found)
      throw Error(ErrorCode::internal,
                  "witness extraction: no extendable value at variable " +
                      p.names()[v]);
  }
  return out;
}

bool malcev_decide(const SolveOptions& opts, const Instance& p) {
  bump(opts, &SolveStats::malcev_calls);
  return malcev_solve(p).sat;
}

SolveOutcome run_with_witness(const Instance& p, const SolveOptions& opts,
                              const std::function<bool(const Instance&)>& dec) {
  SolveOutcome out;
  out.sat = dec(p);
  if (out.sat && opts.extract_witness) out.witness = pin_witness(p, dec);
  return out;
}

// ---------------------------------------------------------------------------
// Linear block orders.

bool linear_decide(const SolveOptions& opts, Instance q) {
  for (;;) {
    q = enforce_kl_minimality(q, 1, 1);
    if (instance_empty(q)) return false;
    int n = q.num_variables();
    if (n == 0) return true;
    bool tightened = false;
    for (int i = n; i >= 1 && !tightened; --i) {
      std::vector<int> prefix(i);
      std::iota(prefix.begin(), prefix.end(), 0);
      Instance r = q.restrict_to(prefix);
      std::vector<std::vector<int>> lows;
      lows.reserve(i);
      for (int v = 0; v < i; ++v) lows.push_back(least_members(r, v));
      bump(opts, &SolveStats::malcev_calls);
      if (!malcev_solve(with_domains(r, std::move(lows))).sat) continue;
      if (i == n) return true;
      // Least-block queries succeed up to i and fail at i+1, so no solution
      // assigns a least-block value to variable i.
      if (opts.audit && q.domain_space() <= 200000) {
        std::vector<int> low_i = least_members(q, i);
        for (const auto& f : all_solutions(q))
          if (std::binary_search(low_i.begin(), low_i.end(), f[i]))
            throw Error(ErrorCode::internal,
                        "least-block removal would discard a solution at "
                        "variable " + q.names()[i]);
      }
      std::vector<int> low = least_members(q, i);
      std::vector<int> rest;
      for (int x : q.domain(i).elements)
        if (!std::binary_search(low.begin(), low.end(), x)) rest.push_back(x);
      std::int64_t before = tuple_mass(q);
      q = q.with_domain(i, std::move(rest));
      bump(opts, &SolveStats::least_block_tightenings);
      if (tuple_mass(q) >= before)
        throw Error(ErrorCode::internal, "least-block removal did not shrink");
      tightened = true;
    }
    if (!tightened)
      throw Error(ErrorCode::internal,
                  "no prefix of a nonempty (1,1)-minimal instance has a "
                  "least-block solution");
  }
}

// ---------------------------------------------------------------------------
// Flat block orders: strands.

StrandDecomposition compute_strands_impl(const Instance& p) {
  StrandDecomposition out;
  for (int v = 0; v < p.num_variables(); ++v) {
    auto s = p.algebra_structure(v);
    std::vector<int> met = met_blocks(p, v);
    if (met.size() < 2) continue;
    if (!blocks_flat(*s, met))
      throw Error(ErrorCode::precondition,
                  "variable " + p.names()[v] +
                      " does not have a flat domain block order");
    int least = met[0];
    for (int b : met) least = s->block_meet(least, b);
    for (int b : met)
      if (b != least) out.pairs.emplace_back(v, b);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  int m = static_cast<int>(out.pairs.size());
  out.before.assign(m, std::vector<char>(m, 0));
  EdgeRelations rel = edge_relations(p);
  for (int a = 0; a < m; ++a) {
    auto [i, jb] = out.pairs[a];
    auto si = p.algebra_structure(i);
    for (int b = 0; b < m; ++b) {
      auto [ip, jbp] = out.pairs[b];
      if (i == ip) {
        out.before[a][b] = (jb == jbp);
        continue;
      }
      auto sip = p.algebra_structure(ip);
      auto it = rel.find({std::min(i, ip), std::max(i, ip)});
      if (it == rel.end())
        throw Error(ErrorCode::internal,
                    "missing pair relation in a (2,3)-minimal instance");
      bool ok = true;
      for (auto [x, y] : it->second) {
        int xi = i < ip ? x : y;
        int yi = i < ip ? y : x;
        if (si->block_of(xi) == jb && sip->block_of(yi) != jbp) {
          ok = false;
          break;
        }
      }
      out.before[a][b] = ok;
    }
  }
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int d = 0; d < m; ++d)
        if (out.before[a][b] && out.before[b][d] && !out.before[a][d])
          throw Error(ErrorCode::internal,
                      "strand precedence is not transitive");
  // Mutual precedence classes.
  std::vector<int> cls(m, -1);
  std::vector<Strand> strands;
  for (int a = 0; a < m; ++a) {
    if (cls[a] >= 0) continue;
    int id = static_cast<int>(strands.size());
    Strand st;
    for (int b = a; b < m; ++b)
      if (cls[b] < 0 && out.before[a][b] && out.before[b][a]) {
        cls[b] = id;
        st.members.push_back(out.pairs[b]);
      }
    std::set<int> vars;
    for (auto& [v, blk] : st.members)
      if (!vars.insert(v).second)
        throw Error(ErrorCode::internal,
                    "strand contains two blocks of one variable");
    strands.push_back(std::move(st));
  }
  // Topological order, minimal strands first, ties by smallest first member.
  int k = static_cast<int>(strands.size());
  std::vector<char> done(k, 0);
  for (int round = 0; round < k; ++round) {
    int pick = -1;
    for (int s = 0; s < k; ++s) {
      if (done[s]) continue;
      bool ready = true;
      for (int t = 0; t < k && ready; ++t) {
        if (t == s || done[t]) continue;
        int rs = -1, rt = -1;
        for (int a = 0; a < m; ++a) {
          if (cls[a] == s && rs < 0) rs = a;
          if (cls[a] == t && rt < 0) rt = a;
        }
        if (out.before[rt][rs] && !out.before[rs][rt]) ready = false;
      }
      if (!ready) continue;
      if (pick < 0 || strands[s].members[0] < strands[pick].members[0])
        pick = s;
    }
    if (pick < 0)
      throw Error(ErrorCode::internal, "strand order contains a cycle");
    done[pick] = 1;
    out.strands.push_back(strands[pick]);
  }
  return out;
}

bool flat_decide(const SolveOptions& opts, Instance q) {
  for (;;) {
    q = enforce_kl_minimality(q, 2, 3);
    if (instance_empty(q)) return false;
    if (q.num_variables() == 0) return true;
    StrandDecomposition sd = compute_strands_impl(q);
    if (sd.pairs.empty()) return malcev_decide(opts, q);
    bool tightened = false;
    for (const Strand& st : sd.strands) {
      std::vector<int> f;
      for (auto& [v, blk] : st.members) f.push_back(v);
      std::sort(f.begin(), f.end());
      Instance qf = q.restrict_to(f);
      std::vector<std::vector<int>> lows;
      for (int v = 0; v < qf.num_variables(); ++v)
        lows.push_back(least_members(qf, v));
      bump(opts, &SolveStats::malcev_calls);
      if (malcev_solve(with_domains(qf, std::move(lows))).sat) continue;
      // No bottom-valued solution: the strand is either taken in full or
      // avoided in full.
      std::int64_t before = tuple_mass(q);
      std::vector<std::vector<int>> ons;
      for (auto& [v, blk] : st.members) {
        auto s = q.algebra_structure(v);
        std::vector<int> on;
        for (int x : q.domain(v).elements)
          if (s->block_of(x) == blk) on.push_back(x);
        ons.push_back(std::move(on));
      }
      // Members are sorted by variable, so ons lines up with qf's order.
      std::vector<int> fvars;
      for (auto& [v, blk] : st.members) fvars.push_back(v);
      bump(opts, &SolveStats::malcev_calls);
      if (malcev_solve(with_domains(qf, ons)).sat) {
        for (size_t k = 0; k < fvars.size(); ++k)
          q = q.with_domain(fvars[k], ons[k]);
      } else {
        for (size_t k = 0; k < fvars.size(); ++k) {
          std::vector<int> off;
          for (int x : q.domain(fvars[k]).elements)
            if (!std::binary_search(ons[k].begin(), ons[k].end(), x))
              off.push_back(x);
          q = q.with_domain(fvars[k], std::move(off));
        }
      }
      bump(opts, &SolveStats::strand_tightenings);
      if (tuple_mass(q) >= before)
        throw Error(ErrorCode::internal, "strand tightening did not shrink");
      tightened = true;
      break;
    }
    if (tightened) continue;
    // Every strand admits a bottom-valued solution: answer in the bottom
    // blocks. Variables outside every strand are single-block already.
    std::set<int> j;
    for (auto& [v, blk] : sd.pairs) j.insert(v);
    for (int v : j) q = q.with_domain(v, least_members(q, v));
    return malcev_decide(opts, q);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Instance regularize_templates(const Instance& p) {
  std::map<std::string, AlgebraPtr> repl;
  bool any = false;
  for (const auto& [id, alg] : p.algebras()) {
    RegularizationResult r = regularize(*alg);
    if (r.changed) {
      repl[id] = r.algebra;
      any = true;
    }
  }
  if (!any) return p;
  std::vector<VarDomain> nd;
  nd.reserve(p.num_variables());
  for (int v = 0; v < p.num_variables(); ++v) {
    VarDomain d = p.domain(v);
    auto it = repl.find(d.algebra_id);
    if (it != repl.end()) d.algebra = it->second;
    nd.push_back(std::move(d));
  }
  return Instance(p.names(), std::move(nd), p.constraints());
}

StrandDecomposition compute_strands(const Instance& p) {
  if (!min_stable(p, 2, 3))
    throw Error(ErrorCode::precondition, "instance is not (2,3)-minimal");
  return compute_strands_impl(p);
}

SolveOutcome solve_linear(const Instance& p, const SolveOptions& opts) {
  Instance q = regularize_templates(p);
  for (int v = 0; v < q.num_variables(); ++v)
    if (!blocks_linear(*q.algebra_structure(v), met_blocks(q, v)))
      throw Error(ErrorCode::precondition,
                  "variable " + q.names()[v] +
                      " does not have a linear domain block order");
  return run_with_witness(
      q, opts, [&](const Instance& r) { return linear_decide(opts, r); });
}

SolveOutcome solve_flat(const Instance& p, const SolveOptions& opts) {
  Instance q = regularize_templates(p);
  for (int v = 0; v < q.num_variables(); ++v)
    if (!blocks_flat(*q.algebra_structure(v), met_blocks(q, v)))
      throw Error(ErrorCode::precondition,
                  "variable " + q.names()[v] +
                      " does not have a flat domain block order");
  return run_with_witness(
      q, opts, [&](const Instance& r) { return flat_decide(opts, r); });
}

// ---------------------------------------------------------------------------
// Consistent map families.

bool is_consistent_map_set(const Instance& p, const ConsistentMapSet& m) {
  if (static_cast<int>(m.maps.size()) != p.num_variables())
    throw Error(ErrorCode::invalid_input, "one map per variable required");
  for (int v = 0; v < p.num_variables(); ++v) {
    const auto& f = m.maps[v];
    int n = p.domain(v).algebra->size();
    if (static_cast<int>(f.size()) != n)
      throw Error(ErrorCode::invalid_input,
                  "map size must match the template universe");
    const auto& el = p.domain(v).elements;
    for (int x = 0; x < n; ++x) {
      if (f[x] < 0 || f[x] >= n)
        throw Error(ErrorCode::invalid_input, "map value out of range");
      bool in = std::binary_search(el.begin(), el.end(), x);
      if (!in && f[x] != x) return false;
      if (in && !std::binary_search(el.begin(), el.end(), f[x])) return false;
    }
    DomainAlgebra da = domain_algebra(p, v);
    UnaryPolynomialClosure pol = unary_polynomial_closure(*da.image.algebra);
    std::vector<int> rel(el.size());
    for (size_t k = 0; k < el.size(); ++k)
      rel[k] = da.image.to_new[f[el[k]]];
    if (!std::binary_search(pol.maps.begin(), pol.maps.end(), rel))
      return false;
  }
  for (const Constraint& c : p.constraints()) {
    for (const auto& t : c.tuples) {
      std::vector<int> mapped(t.size());
      for (size_t k = 0; k < t.size(); ++k) mapped[k] = m.maps[c.scope[k]][t[k]];
      if (!std::binary_search(c.tuples.begin(), c.tuples.end(), mapped))
        return false;
    }
  }
  return true;
}

bool is_permutational(const Instance& p, const ConsistentMapSet& m) {
  for (int v = 0; v < p.num_variables(); ++v) {
    const auto& el = p.domain(v).elements;
    std::set<int> img;
    for (int x : el) img.insert(m.maps[v][x]);
    if (img.size() != el.size()) return false;
  }
  return true;
}

bool is_retractive(const Instance& p, const ConsistentMapSet& m) {
  for (int v = 0; v < p.num_variables(); ++v) {
    const auto& f = m.maps[v];
    for (int x : p.domain(v).elements)
      if (f[f[x]] != f[x]) return false;
  }
  return true;
}

ConsistentMapSet iterate_to_retractive(const Instance& p, ConsistentMapSet m) {
  if (!is_consistent_map_set(p, m))
    throw Error(ErrorCode::precondition, "map family is not consistent");
  // One common exponent k >= every tail, divisible by every cycle length,
  // keeps the family consistent while making each member idempotent.
  std::uint64_t lcm = 1;
  std::uint64_t tail = 1;
  for (const auto& f : m.maps) {
    int n = static_cast<int>(f.size());
    tail = std::max<std::uint64_t>(tail, n);
    std::vector<int> far(n);
    for (int x = 0; x < n; ++x) {
      int y = x;
      for (int s = 0; s < n; ++s) y = f[y];
      far[x] = y;
    }
    std::vector<char> seen(n, 0);
    for (int x = 0; x < n; ++x) {
      int start = far[x];
      if (seen[start]) continue;
      std::uint64_t len = 0;
      int y = start;
      do {
        seen[y] = 1;
        y = f[y];
        ++len;
      } while (y != start);
      std::uint64_t g = std::gcd(lcm, len);
      if (lcm / g > (std::uint64_t{1} << 40) / len)
        throw Error(ErrorCode::cap_exceeded, "map iteration period too large");
      lcm = lcm / g * len;
    }
  }
  std::uint64_t k = (tail + lcm - 1) / lcm * lcm;
  for (auto& f : m.maps) {
    int n = static_cast<int>(f.size());
    std::vector<int> acc(n);
    std::iota(acc.begin(), acc.end(), 0);
    std::vector<int> base = f;
    std::uint64_t e = k;
    while (e > 0) {
      if (e & 1) {
        std::vector<int> nx(n);
        for (int x = 0; x < n; ++x) nx[x] = base[acc[x]];
        acc = std::move(nx);
      }
      e >>= 1;
      if (e > 0) {
        std::vector<int> nx(n);
        for (int x = 0; x < n; ++x) nx[x] = base[base[x]];
        base = std::move(nx);
      }
    }
    f = std::move(acc);
  }
  if (!is_retractive(p, m) || !is_consistent_map_set(p, m))
    throw Error(ErrorCode::internal, "iterated family is not a retraction");
  return m;
}

Instance apply_retraction(const Instance& p, const ConsistentMapSet& m) {
  if (!is_consistent_map_set(p, m))
    throw Error(ErrorCode::precondition, "map family is not consistent");
  if (!is_retractive(p, m))
    throw Error(ErrorCode::precondition, "map family is not retractive");
  int n = p.num_variables();
  // Per variable: image elements; identity components keep their template,
  // shrunk ones move to the retract algebra in relabelled coordinates.
  std::vector<std::vector<int>> to_new(n);
  std::vector<VarDomain> nd;
  nd.reserve(n);
  for (int v = 0; v < n; ++v) {
    const auto& el = p.domain(v).elements;
    std::vector<int> img;
    for (int x : el) img.push_back(m.maps[v][x]);
    std::sort(img.begin(), img.end());
    img.erase(std::unique(img.begin(), img.end()), img.end());
    if (img == el) {
      nd.push_back(p.domain(v));
      continue;
    }
    const FiniteAlgebra& amb = *p.domain(v).algebra;
    std::string id = p.domain(v).algebra_id + "%" + p.names()[v];
    ImageAlgebra im = image_algebra(amb, id, img, m.maps[v]);
    to_new[v].assign(amb.size(), -1);
    for (size_t k = 0; k < im.to_old.size(); ++k)
      to_new[v][im.to_old[k]] = static_cast<int>(k);
    std::vector<int> full(im.to_old.size());
    std::iota(full.begin(), full.end(), 0);
    nd.push_back(VarDomain{id, im.algebra, std::move(full)});
  }
  std::vector<Constraint> cs;
  for (const Constraint& c : p.constraints()) {
    std::set<std::vector<int>> tuples;
    for (const auto& t : c.tuples) {
      std::vector<int> mapped(t.size());
      for (size_t k = 0; k < t.size(); ++k) {
        int v = c.scope[k];
        int y = m.maps[v][t[k]];
        mapped[k] = to_new[v].empty() ? y : to_new[v][y];
      }
      tuples.insert(std::move(mapped));
    }
    cs.push_back(Constraint{c.scope, {tuples.begin(), tuples.end()}});
  }
  return Instance(p.names(), std::move(nd), std::move(cs));
}

// ---------------------------------------------------------------------------
// Decomposition.

int Decomposition::slot_of(int variable, int value) const {
  int lo = offsets_[variable];
  int hi = offsets_[variable + 1];
  for (int s = lo; s < hi; ++s)
    if (slots[s].second == value) return s;
  throw Error(ErrorCode::invalid_input, "no slot for the requested value");
}

Decomposition decompose(const Instance& p) {
  for (const auto& [id, alg] : p.algebras()) {
    for (int x = 0; x < alg->size(); ++x)
      for (int y = 0; y < alg->size(); ++y)
        if (alg->meet(x, alg->meet(x, y)) != alg->meet(x, y))
          throw Error(ErrorCode::precondition,
                      "decompose requires x & (x & y) == x & y in " + id +
                          "; regularize the templates first");
  }
  Decomposition out;
  int n = p.num_variables();
  out.offsets_.assign(n + 1, 0);
  std::vector<std::string> names;
  std::vector<VarDomain> domains;
  std::vector<AlgebraPtr> slot_algs;
  for (int i = 0; i < n; ++i) {
    out.offsets_[i] = static_cast<int>(out.slots.size());
    const FiniteAlgebra& amb = *p.domain(i).algebra;
    for (int a : p.domain(i).elements) {
      std::vector<int> retr(amb.size());
      for (int x = 0; x < amb.size(); ++x) retr[x] = amb.meet(a, x);
      std::set<int> carrier;
      for (int x : p.domain(i).elements) carrier.insert(amb.meet(a, x));
      std::string id = p.domain(i).algebra_id + "@" + p.names()[i] + "@" +
                       std::to_string(a);
      ImageAlgebra im = image_algebra(
          amb, id, {carrier.begin(), carrier.end()}, retr);
      out.slots.emplace_back(i, a);
      out.slot_values.push_back(im.to_old);
      slot_algs.push_back(im.algebra);
      std::vector<int> full(im.to_old.size());
      std::iota(full.begin(), full.end(), 0);
      names.push_back(p.names()[i] + "@" + std::to_string(a));
      domains.push_back(VarDomain{id, im.algebra, std::move(full)});
    }
  }
  out.offsets_[n] = static_cast<int>(out.slots.size());
  auto relabel = [&](int slot, int ambient) {
    const auto& vals = out.slot_values[slot];
    auto it = std::lower_bound(vals.begin(), vals.end(), ambient);
    if (it == vals.end() || *it != ambient)
      throw Error(ErrorCode::internal, "slot value outside the slot carrier");
    return static_cast<int>(it - vals.begin());
  };
  std::vector<Constraint> cs;
  // Per original tuple r: the mapped relation { <r & x : coordinatewise> }.
  for (const Constraint& c : p.constraints()) {
    std::vector<const FiniteAlgebra*> ambs;
    for (int v : c.scope) ambs.push_back(p.domain(v).algebra.get());
    for (const auto& r : c.tuples) {
      std::vector<int> scope;
      for (size_t k = 0; k < c.scope.size(); ++k)
        scope.push_back(out.slot_of(c.scope[k], r[k]));
      std::set<std::vector<int>> tuples;
      for (const auto& x : c.tuples) {
        std::vector<int> t(x.size());
        for (size_t k = 0; k < x.size(); ++k)
          t[k] = relabel(scope[k], ambs[k]->meet(r[k], x[k]));
        tuples.insert(std::move(t));
      }
      cs.push_back(Constraint{std::move(scope), {tuples.begin(), tuples.end()}});
    }
  }
  // Per variable: the column constraint tying its slots together.
  for (int i = 0; i < n; ++i) {
    const auto& el = p.domain(i).elements;
    if (el.size() < 2) continue;
    const FiniteAlgebra& amb = *p.domain(i).algebra;
    std::vector<int> scope;
    std::vector<const FiniteAlgebra*> coords;
    for (size_t k = 0; k < el.size(); ++k) {
      int s = out.offsets_[i] + static_cast<int>(k);
      scope.push_back(s);
      coords.push_back(slot_algs[s].get());
    }
    std::vector<std::vector<int>> seed;
    for (int b : el) {
      std::vector<int> t(el.size());
      for (size_t k = 0; k < el.size(); ++k)
        t[k] = relabel(scope[k], amb.meet(el[k], b));
      seed.push_back(std::move(t));
    }
    cs.push_back(Constraint{std::move(scope), close_tuples(coords, seed)});
  }
  out.instance = Instance(std::move(names), std::move(domains), std::move(cs));
  return out;
}

ConsistentMapSet extract_consistent_maps(const Instance& p,
                                         const Decomposition& dec,
                                         const std::vector<int>& g) {
  if (static_cast<int>(g.size()) != dec.instance.num_variables())
    throw Error(ErrorCode::invalid_input, "assignment size mismatch");
  for (int s = 0; s < dec.instance.num_variables(); ++s) {
    const auto& el = dec.instance.domain(s).elements;
    if (!std::binary_search(el.begin(), el.end(), g[s]))
      throw Error(ErrorCode::precondition, "assignment leaves a slot domain");
  }
  if (!dec.instance.satisfies(g))
    throw Error(ErrorCode::precondition,
                "assignment does not solve the decomposition");
  ConsistentMapSet m;
  m.maps.resize(p.num_variables());
  for (int v = 0; v < p.num_variables(); ++v) {
    int n = p.domain(v).algebra->size();
    m.maps[v].resize(n);
    std::iota(m.maps[v].begin(), m.maps[v].end(), 0);
  }
  for (size_t s = 0; s < dec.slots.size(); ++s) {
    auto [v, a] = dec.slots[s];
    m.maps[v][a] = dec.slot_values[s][g[s]];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Elimination to weak irreducibility.

namespace {

Reduction enforce_weak_impl(Ctx& c, Instance p) {
  for (;;) {
    if (instance_empty(p)) return Reduction{true, false, std::nullopt};
    int m = max_multiblock_domain_size(p);
    if (m == 0) return Reduction{false, false, std::move(p)};
    std::vector<int> vb;
    std::map<int, DomainAlgebra> das;
    for (int v = 0; v < p.num_variables(); ++v) {
      if (static_cast<int>(p.domain(v).elements.size()) != m) continue;
      if (met_blocks(p, v).size() < 2) continue;
      DomainAlgebra da = domain_algebra(p, v);
      if (da.smb.is_unital()) continue;
      vb.push_back(v);
      das.emplace(v, std::move(da));
    }
    if (vb.empty()) return Reduction{false, false, std::move(p)};
    bump(c.opts, &SolveStats::eliminations);
    // The elements whose right-meet translation permutes the domain generate
    // a proper subuniverse; solutions avoiding it are reached through the
    // decomposition, so first try the instance tightened onto it.
    std::map<int, std::vector<int>> sgc;
    bool c_empty = false;
    for (int v : vb) {
      const DomainAlgebra& da = das.at(v);
      const FiniteAlgebra& ind = *da.image.algebra;
      std::vector<int> cset;
      for (int e = 0; e < ind.size(); ++e) {
        std::vector<char> hit(ind.size(), 0);
        bool bij = true;
        for (int x = 0; x < ind.size(); ++x) {
          int y = ind.meet(x, e);
          if (hit[y]) {
            bij = false;
            break;
          }
          hit[y] = 1;
        }
        if (bij) cset.push_back(e);
      }
      std::vector<int> sg = generate_subuniverse(ind, cset);
      if (static_cast<int>(sg.size()) == ind.size())
        throw Error(ErrorCode::internal,
                    "permutational translations generate the whole non-unital "
                    "domain at " + p.names()[v]);
      std::vector<int> amb;
      for (int k : sg) amb.push_back(da.image.to_old[k]);
      std::sort(amb.begin(), amb.end());
      if (amb.empty()) c_empty = true;
      sgc[v] = std::move(amb);
    }
    if (!c_empty) {
      Instance pc = p;
      for (int v : vb) pc = pc.with_domain(v, sgc[v]);
      if (decide_general(c, pc)) return Reduction{true, true, std::nullopt};
    }
    // Sweep pinned decompositions: a pin forces the extracted map at v to be
    // the non-permutational right meet by d.
    Decomposition dec = decompose(p);
    bool reduced = false;
    for (int v : vb) {
      const auto& el = p.domain(v).elements;
      const FiniteAlgebra& amb = *p.domain(v).algebra;
      for (int d : el) {
        if (std::binary_search(sgc[v].begin(), sgc[v].end(), d)) continue;
        Instance pinned = dec.instance;
        for (int a : el) {
          int s = dec.slot_of(v, a);
          const auto& vals = dec.slot_values[s];
          int ambient = amb.meet(a, d);
          int lab = static_cast<int>(
              std::lower_bound(vals.begin(), vals.end(), ambient) -
              vals.begin());
          pinned = pinned.with_domain(s, {lab});
        }
        if (!decide_general(c, pinned)) continue;
        std::vector<int> g = pin_witness(
            pinned, [&](const Instance& q) { return decide_general(c, q); });
        ConsistentMapSet maps = extract_consistent_maps(p, dec, g);
        ConsistentMapSet retr = iterate_to_retractive(p, maps);
        if (is_permutational(p, retr))
          throw Error(ErrorCode::internal,
                      "pinned decomposition produced a permutational family");
        std::int64_t before = tuple_mass(p);
        Instance next = apply_retraction(p, retr);
        next = regularize_templates(next);
        next = enforce_kl_minimality(next, 2, 3);
        if (!instance_empty(next) && tuple_mass(next) >= before)
          throw Error(ErrorCode::internal, "retraction did not shrink");
        p = std::move(next);
        reduced = true;
        break;
      }
      if (reduced) break;
    }
    if (!reduced) return Reduction{true, false, std::nullopt};
  }
}

std::vector<std::vector<std::vector<int>>> chk_coh_impl(
    Ctx& c, const Instance& p, const std::vector<int>& w, int m) {
  const auto& cons = p.constraints();
  std::vector<std::vector<std::vector<int>>> out;
  out.reserve(cons.size());
  for (const Constraint& cc : cons) out.push_back(cc.tuples);
  auto widx = [&](int v) {
    return static_cast<int>(std::lower_bound(w.begin(), w.end(), v) -
                            w.begin());
  };
  auto in_w = [&](int v) {
    return std::binary_search(w.begin(), w.end(), v);
  };
  std::vector<int> wprime;
  for (int v : w)
    if (static_cast<int>(p.domain(v).elements.size()) == m &&
        met_blocks(p, v).size() >= 2)
      wprime.push_back(v);
  Instance base = p.restrict_to(w);
  if (wprime.empty()) {
    // Every domain in w is already below the critical size: plain
    // extendability filtering.
    for (size_t ci = 0; ci < cons.size(); ++ci) {
      const Constraint& cc = cons[ci];
      std::vector<int> sw;
      for (size_t k = 0; k < cc.scope.size(); ++k)
        if (in_w(cc.scope[k])) sw.push_back(static_cast<int>(k));
      if (sw.empty()) {
        if (!decide_general(c, base)) out[ci].clear();
        continue;
      }
      std::vector<std::vector<int>> keep;
      for (const auto& a : cc.tuples) {
        Instance q = base;
        for (int k : sw) q = pin(q, widx(cc.scope[k]), a[k]);
        if (decide_general(c, q)) keep.push_back(a);
      }
      out[ci] = std::move(keep);
    }
    return out;
  }
  // Critical-size variables: solutions stay within one microstructure
  // component of the restriction to them, and every component tightening
  // must drop the critical size.
  Instance pw = p.restrict_to(wprime);
  Microstructure micro = microstructure(pw);
  auto wpidx = [&](int v) {
    return static_cast<int>(
        std::lower_bound(wprime.begin(), wprime.end(), v) - wprime.begin());
  };
  std::vector<std::vector<std::vector<int>>> comp_vals(
      micro.num_components,
      std::vector<std::vector<int>>(wprime.size()));
  for (size_t vi = 0; vi < wprime.size(); ++vi)
    for (int x : pw.domain(static_cast<int>(vi)).elements) {
      int comp = micro.component_of(static_cast<int>(vi), x);
      comp_vals[comp][vi].push_back(x);
    }
  auto solve_component = [&](int comp,
                             const std::vector<std::pair<int, int>>& pins) {
    Instance q = base;
    for (size_t vi = 0; vi < wprime.size(); ++vi)
      q = q.with_domain(widx(wprime[vi]), comp_vals[comp][vi]);
    for (auto [v, val] : pins) q = pin(q, widx(v), val);
    if (!q.any_domain_empty() && max_multiblock_domain_size(q) >= m)
      throw Error(ErrorCode::internal,
                  "component tightening kept a critical-size domain");
    return decide_general(c, q);
  };
  int t = wprime[0];
  std::vector<int> t_comps;
  for (int x : pw.domain(wpidx(t)).elements)
    t_comps.push_back(micro.component_of(wpidx(t), x));
  std::sort(t_comps.begin(), t_comps.end());
  t_comps.erase(std::unique(t_comps.begin(), t_comps.end()), t_comps.end());
  for (size_t ci = 0; ci < cons.size(); ++ci) {
    const Constraint& cc = cons[ci];
    int anchor = -1;
    for (size_t k = 0; k < cc.scope.size(); ++k)
      if (std::binary_search(wprime.begin(), wprime.end(), cc.scope[k])) {
        anchor = static_cast<int>(k);
        break;
      }
    std::vector<std::vector<int>> keep;
    for (const auto& a : cc.tuples) {
      std::vector<std::pair<int, int>> pins;
      for (size_t k = 0; k < cc.scope.size(); ++k)
        if (in_w(cc.scope[k])) pins.emplace_back(cc.scope[k], a[k]);
      bool ok;
      if (anchor >= 0) {
        int comp = micro.component_of(wpidx(cc.scope[anchor]), a[anchor]);
        ok = solve_component(comp, pins);
      } else {
        ok = false;
        for (int comp : t_comps)
          if (solve_component(comp, pins)) {
            ok = true;
            break;
          }
      }
      if (ok) keep.push_back(a);
    }
    out[ci] = std::move(keep);
  }
  return out;
}

bool decide_general_impl(Ctx& c, Instance p) {
  p = regularize_templates(p);
  if (instance_empty(p)) return false;
  if (max_multiblock_domain_size(p) == 0) return malcev_decide(c.opts, p);
  p = enforce_kl_minimality(p, 2, 3);
  if (instance_empty(p)) return false;
  if (max_multiblock_domain_size(p) == 0) return malcev_decide(c.opts, p);
  Reduction red = enforce_weak_impl(c, std::move(p));
  if (red.decided) return red.sat;
  p = std::move(*red.instance);
  if (instance_empty(p)) return false;
  int m = max_multiblock_domain_size(p);
  if (c.opts.stats) c.opts.stats->size_history.push_back(m);
  if (m == 0) return malcev_decide(c.opts, p);
  std::int64_t prev_mass = tuple_mass(p);
  for (;;) {
    CoverIndex idx = cover_index(p);
    SeparationOracle oracle(p, idx);
    int ne = static_cast<int>(idx.entries.size());
    std::vector<char> flag(ne, 0);
    bool tightened = false;
    for (int e = 0; e < ne && !tightened; ++e) {
      if (flag[e]) continue;
      flag[e] = 1;
      std::set<int> wset = {idx.entries[e].variable};
      for (int e2 = 0; e2 < ne; ++e2) {
        if (e2 == e) continue;
        if (!oracle.can_separate(e, e2)) {
          wset.insert(idx.entries[e2].variable);
          flag[e2] = 1;
        }
      }
      std::vector<int> w(wset.begin(), wset.end());
      bump(c.opts, &SolveStats::coherent_checks);
      auto filtered = chk_coh_impl(c, p, w, m);
      bool changed = false;
      for (size_t ci = 0; ci < filtered.size(); ++ci) {
        if (filtered[ci].empty()) return false;
        if (filtered[ci].size() < p.constraints()[ci].tuples.size())
          changed = true;
      }
      if (!changed) continue;
      std::vector<Constraint> cs;
      for (size_t ci = 0; ci < filtered.size(); ++ci)
        cs.push_back(
            Constraint{p.constraints()[ci].scope, std::move(filtered[ci])});
      std::vector<VarDomain> nd;
      for (int v = 0; v < p.num_variables(); ++v) nd.push_back(p.domain(v));
      p = Instance(p.names(), std::move(nd), std::move(cs));
      p = enforce_kl_minimality(p, 2, 3);
      if (instance_empty(p)) return false;
      int m2 = max_multiblock_domain_size(p);
      if (m2 == 0) return malcev_decide(c.opts, p);
      if (m2 < m) {
        bump(c.opts, &SolveStats::size_recursions);
        return decide_general(c, p);
      }
      if (!weakly_irreducible(p))
        throw Error(ErrorCode::internal,
                    "tightening at constant size broke weak irreducibility");
      std::int64_t mass = tuple_mass(p);
      if (mass >= prev_mass)
        throw Error(ErrorCode::internal,
                    "coherent filtering restart did not shrink");
      prev_mass = mass;
      bump(c.opts, &SolveStats::restarts);
      tightened = true;
    }
    if (!tightened) {
      if (c.opts.audit && !is_block_2_consistent(p))
        throw Error(ErrorCode::internal,
                    "final instance is not block-2-consistent");
      return true;
    }
  }
}

bool decide_general(Ctx& c, const Instance& p) {
  bump(c.opts, &SolveStats::decide_calls);
  if (p.num_variables() == 0) return !p.any_constraint_empty();
  std::string key = canonical_key(p);
  if (auto hit = c.memo.find(key)) {
    bump(c.opts, &SolveStats::memo_hits);
    return *hit;
  }
  ++c.depth;
  if (c.opts.stats && c.depth > c.opts.stats->max_depth)
    c.opts.stats->max_depth = c.depth;
  bool result = decide_general_impl(c, p);
  --c.depth;
  c.memo.insert(key, result);
  return result;
}

}  // namespace

Reduction enforce_weak_m_irreducibility(const Instance& p,
                                        const SolveOptions& opts) {
  for (const auto& [id, alg] : p.algebras()) {
    SmbStructure s = detect_smb(*alg);
    if (!s.regular)
      throw Error(ErrorCode::precondition,
                  "template " + id + " is not regular");
  }
  if (!min_stable(p, 2, 3))
    throw Error(ErrorCode::precondition, "instance is not (2,3)-minimal");
  Ctx c{opts, {}};
  return enforce_weak_impl(c, p);
}

std::vector<std::vector<std::vector<int>>> chk_coh_set(
    const Instance& p, const std::vector<int>& w, const SolveOptions& opts) {
  if (w.empty() || !std::is_sorted(w.begin(), w.end()) ||
      std::adjacent_find(w.begin(), w.end()) != w.end() || w.front() < 0 ||
      w.back() >= p.num_variables())
    throw Error(ErrorCode::invalid_input,
                "w must be a sorted set of variables");
  if (!min_stable(p, 2, 3))
    throw Error(ErrorCode::precondition, "instance is not (2,3)-minimal");
  if (!weakly_irreducible(p))
    throw Error(ErrorCode::precondition, "instance is not weakly irreducible");
  // The size-reduction guarantee behind the component splitting only holds
  // for the variable sets gathered from non-separable quotient entries.
  CoverIndex idx = cover_index(p);
  SeparationOracle oracle(p, idx);
  auto sets = coherent_sets(oracle);
  if (!std::binary_search(sets.begin(), sets.end(), w))
    throw Error(ErrorCode::precondition, "w is not a coherent set");
  Ctx c{opts, {}};
  return chk_coh_impl(c, p, w, max_multiblock_domain_size(p));
}

SolveOutcome solve_general(const Instance& p, const SolveOptions& opts) {
  Ctx c{opts, {}};
  return run_with_witness(
      p, opts, [&](const Instance& q) { return decide_general(c, q); });
}

SolveOutcome solve_auto(const Instance& p, const SolveOptions& opts) {
  bool all_linear = true;
  bool all_flat = true;
  bool all_malcev = true;
  for (const auto& [id, alg] : p.algebras()) {
    SmbStructure s = detect_smb(*alg);
    std::vector<int> all_blocks(s.block_count());
    std::iota(all_blocks.begin(), all_blocks.end(), 0);
    if (s.block_count() > 1) all_malcev = false;
    if (!blocks_linear(s, all_blocks)) all_linear = false;
    if (!blocks_flat(s, all_blocks)) all_flat = false;
  }
  if (all_malcev) {
    bump(opts, &SolveStats::malcev_calls);
    MalcevResult mr = malcev_solve(p);
    SolveOutcome out;
    out.sat = mr.sat;
    if (mr.sat && opts.extract_witness) out.witness = mr.witness;
    return out;
  }
  if (all_linear) return solve_linear(p, opts);
  if (all_flat) return solve_flat(p, opts);
  return solve_general(p, opts);
}

}  // namespace smbcsp
