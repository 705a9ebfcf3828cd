#include "smbcsp/instance.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "smbcsp/caps.hpp"
#include "smbcsp/error.hpp"

namespace smbcsp {

struct Instance::StructureCache {
  std::map<const FiniteAlgebra*, std::shared_ptr<const SmbStructure>> by_ptr;
};

Instance::Instance(std::vector<std::string> names, std::vector<VarDomain> domains,
                   std::vector<Constraint> constraints)
    : Instance(std::move(names), std::move(domains), std::move(constraints),
               nullptr) {}

Instance::Instance(std::vector<std::string> names, std::vector<VarDomain> domains,
                   std::vector<Constraint> constraints,
                   std::shared_ptr<StructureCache> cache)
    : names_(std::move(names)), domains_(std::move(domains)),
      cache_(std::move(cache)) {
  if (names_.size() != domains_.size()) {
    throw Error(ErrorCode::invalid_input, "one domain per variable required");
  }
  {
    std::set<std::string> seen;
    for (const std::string& nm : names_) {
      if (nm.empty() || !seen.insert(nm).second) {
        throw Error(ErrorCode::invalid_input,
                    "variable names must be nonempty and distinct");
      }
    }
  }
  for (VarDomain& d : domains_) {
    if (!d.algebra || d.algebra_id.empty()) {
      throw Error(ErrorCode::invalid_input, "domain lacks a template algebra");
    }
    std::sort(d.elements.begin(), d.elements.end());
    d.elements.erase(std::unique(d.elements.begin(), d.elements.end()),
                     d.elements.end());
    for (int e : d.elements) {
      if (e < 0 || e >= d.algebra->size()) {
        throw Error(ErrorCode::invalid_input, "domain element out of range");
      }
    }
    auto [it, inserted] = algebras_.emplace(d.algebra_id, d.algebra);
    if (!inserted && !it->second->same_tables(*d.algebra)) {
      throw Error(ErrorCode::invalid_input,
                  "algebra id '" + d.algebra_id + "' bound to two different tables");
    }
    d.algebra = it->second;  // share one pointer per id
  }
  if (!cache_) cache_ = std::make_shared<StructureCache>();
  for (const auto& [id, alg] : algebras_) {
    auto& slot = cache_->by_ptr[alg.get()];
    if (!slot) {
      if (auto s = try_detect_smb(*alg)) {
        slot = std::make_shared<const SmbStructure>(*std::move(s));
      }
    }
  }
  normalize(std::move(constraints));
}

void Instance::normalize(std::vector<Constraint> constraints) {
  const int n = num_variables();
  std::map<std::vector<int>, std::set<std::vector<int>>> by_scope;
  for (Constraint& c : constraints) {
    if (c.scope.empty()) {
      throw Error(ErrorCode::invalid_input, "constraint scope is empty");
    }
    const std::size_t arity = c.scope.size();
    for (int v : c.scope) {
      if (v < 0 || v >= n) {
        throw Error(ErrorCode::invalid_input, "constraint scope variable out of range");
      }
    }
    std::vector<int> order(arity);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&c](int a, int b) { return c.scope[a] < c.scope[b]; });
    std::vector<int> scope(arity);
    for (std::size_t i = 0; i < arity; ++i) scope[i] = c.scope[order[i]];
    for (std::size_t i = 1; i < arity; ++i) {
      if (scope[i] == scope[i - 1]) {
        throw Error(ErrorCode::invalid_input,
                    "constraint scope repeats a variable");
      }
    }
    std::set<std::vector<int>> tuples;
    for (const std::vector<int>& t : c.tuples) {
      if (t.size() != arity) {
        throw Error(ErrorCode::invalid_input, "tuple arity mismatch");
      }
      std::vector<int> s(arity);
      for (std::size_t i = 0; i < arity; ++i) {
        s[i] = t[order[i]];
        if (s[i] < 0 || s[i] >= domains_[scope[i]].algebra->size()) {
          throw Error(ErrorCode::invalid_input, "tuple value out of range");
        }
      }
      tuples.insert(std::move(s));
    }
    auto it = by_scope.find(scope);
    if (it == by_scope.end()) {
      by_scope.emplace(std::move(scope), std::move(tuples));
    } else {
      std::set<std::vector<int>> merged;
      std::set_intersection(it->second.begin(), it->second.end(), tuples.begin(),
                            tuples.end(), std::inserter(merged, merged.end()));
      it->second = std::move(merged);
    }
  }

  // Absorb unary constraints into domains.
  for (auto it = by_scope.begin(); it != by_scope.end();) {
    if (it->first.size() == 1) {
      std::vector<int> allowed;
      for (const auto& t : it->second) allowed.push_back(t[0]);
      std::vector<int>& dom = domains_[it->first[0]].elements;
      std::vector<int> kept;
      std::set_intersection(dom.begin(), dom.end(), allowed.begin(), allowed.end(),
                            std::back_inserter(kept));
      dom = std::move(kept);
      it = by_scope.erase(it);
    } else {
      ++it;
    }
  }

  // Keep only tuples inside the domain product.
  constraints_.clear();
  for (auto& [scope, tuples] : by_scope) {
    Constraint c;
    c.scope = scope;
    for (const std::vector<int>& t : tuples) {
      bool inside = true;
      for (std::size_t i = 0; i < scope.size() && inside; ++i) {
        const std::vector<int>& dom = domains_[scope[i]].elements;
        inside = std::binary_search(dom.begin(), dom.end(), t[i]);
      }
      if (inside) c.tuples.push_back(t);
    }
    constraints_.push_back(std::move(c));
  }
}

int Instance::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool Instance::any_domain_empty() const {
  for (const VarDomain& d : domains_) {
    if (d.elements.empty()) return true;
  }
  return false;
}

bool Instance::any_constraint_empty() const {
  for (const Constraint& c : constraints_) {
    if (c.tuples.empty()) return true;
  }
  return false;
}

std::int64_t Instance::domain_space() const {
  const std::int64_t limit = std::int64_t{1} << 62;
  std::int64_t space = 1;
  for (const VarDomain& d : domains_) {
    space *= std::max<std::int64_t>(1, static_cast<std::int64_t>(d.elements.size()));
    if (space >= limit) return limit;
    if (d.elements.empty()) return 0;
  }
  return space;
}

bool Instance::satisfies(const std::vector<int>& assignment) const {
  if (static_cast<int>(assignment.size()) != num_variables()) return false;
  for (int v = 0; v < num_variables(); ++v) {
    const std::vector<int>& dom = domains_[v].elements;
    if (!std::binary_search(dom.begin(), dom.end(), assignment[v])) return false;
  }
  for (const Constraint& c : constraints_) {
    std::vector<int> t(c.scope.size());
    for (std::size_t i = 0; i < c.scope.size(); ++i) t[i] = assignment[c.scope[i]];
    if (!std::binary_search(c.tuples.begin(), c.tuples.end(), t)) return false;
  }
  return true;
}

std::shared_ptr<const SmbStructure> Instance::algebra_structure(int v) const {
  auto it = cache_->by_ptr.find(domains_[v].algebra.get());
  return it == cache_->by_ptr.end() ? nullptr : it->second;
}

Instance Instance::with_domain(int v, std::vector<int> elements) const {
  if (v < 0 || v >= num_variables()) {
    throw Error(ErrorCode::invalid_input, "variable index out of range");
  }
  std::sort(elements.begin(), elements.end());
  std::vector<VarDomain> doms = domains_;
  std::vector<int> kept;
  std::set_intersection(doms[v].elements.begin(), doms[v].elements.end(),
                        elements.begin(), elements.end(), std::back_inserter(kept));
  doms[v].elements = std::move(kept);
  return Instance(names_, std::move(doms), constraints_, cache_);
}

Instance Instance::with_constraint(std::vector<int> scope,
                                   std::vector<std::vector<int>> tuples) const {
  std::vector<Constraint> cs = constraints_;
  cs.push_back(Constraint{std::move(scope), std::move(tuples)});
  return Instance(names_, domains_, std::move(cs), cache_);
}

Instance Instance::restrict_to(const std::vector<int>& w) const {
  std::vector<int> vars = w;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  std::vector<int> to_new(num_variables(), -1);
  std::vector<std::string> names;
  std::vector<VarDomain> doms;
  for (int v : vars) {
    if (v < 0 || v >= num_variables()) {
      throw Error(ErrorCode::invalid_input, "variable index out of range");
    }
    to_new[v] = static_cast<int>(names.size());
    names.push_back(names_[v]);
    doms.push_back(domains_[v]);
  }
  std::vector<Constraint> cs;
  for (const Constraint& c : constraints_) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < c.scope.size(); ++i) {
      if (to_new[c.scope[i]] != -1) keep.push_back(i);
    }
    if (keep.empty()) continue;
    Constraint nc;
    for (std::size_t i : keep) nc.scope.push_back(to_new[c.scope[i]]);
    std::set<std::vector<int>> proj;
    for (const std::vector<int>& t : c.tuples) {
      std::vector<int> s;
      s.reserve(keep.size());
      for (std::size_t i : keep) s.push_back(t[i]);
      proj.insert(std::move(s));
    }
    nc.tuples.assign(proj.begin(), proj.end());
    cs.push_back(std::move(nc));
  }
  return Instance(std::move(names), std::move(doms), std::move(cs), cache_);
}

std::string canonical_key(const Instance& p) {
  std::ostringstream os;
  std::map<std::string, int> alg_index;
  for (const auto& [id, alg] : p.algebras()) {
    alg_index.emplace(id, static_cast<int>(alg_index.size()));
    os << "A" << id << ":" << alg->size() << ":";
    for (int v : alg->meet_table()) os << v << ",";
    os << ":";
    for (int v : alg->d_table()) os << v << ",";
    os << ";";
  }
  os << "|";
  for (int v = 0; v < p.num_variables(); ++v) {
    const VarDomain& d = p.domain(v);
    os << "D" << alg_index[d.algebra_id] << ":";
    for (int e : d.elements) os << e << ",";
    os << ";";
  }
  os << "|";
  for (const Constraint& c : p.constraints()) {
    os << "C";
    for (int v : c.scope) os << v << ",";
    os << ":";
    for (const auto& t : c.tuples) {
      for (int x : t) os << x << ",";
      os << "/";
    }
    os << ";";
  }
  return os.str();
}

bool is_compatible(const Instance& p, std::string* why) {
  auto fail = [why](const std::string& msg) {
    if (why != nullptr) *why = msg;
    return false;
  };
  for (int v = 0; v < p.num_variables(); ++v) {
    const VarDomain& d = p.domain(v);
    if (!is_subuniverse(*d.algebra, d.elements)) {
      return fail("domain of variable '" + p.names()[v] + "' is not a subuniverse");
    }
  }
  for (const Constraint& c : p.constraints()) {
    std::vector<const FiniteAlgebra*> coords;
    coords.reserve(c.scope.size());
    for (int v : c.scope) coords.push_back(p.domain(v).algebra.get());
    const auto& ts = c.tuples;
    std::vector<int> tmp(c.scope.size());
    for (const auto& a : ts) {
      for (const auto& b : ts) {
        for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = coords[i]->meet(a[i], b[i]);
        if (!std::binary_search(ts.begin(), ts.end(), tmp)) {
          return fail("relation not closed under meet");
        }
        for (const auto& cc : ts) {
          for (std::size_t i = 0; i < tmp.size(); ++i) {
            tmp[i] = coords[i]->d(a[i], b[i], cc[i]);
          }
          if (!std::binary_search(ts.begin(), ts.end(), tmp)) {
            return fail("relation not closed under d");
          }
        }
      }
    }
  }
  return true;
}

namespace {

using Relation = std::set<std::vector<int>>;

std::vector<int> project(const std::vector<int>& tuple,
                         const std::vector<std::size_t>& positions) {
  std::vector<int> out;
  out.reserve(positions.size());
  for (std::size_t i : positions) out.push_back(tuple[i]);
  return out;
}

// Positions of subscope elements inside scope (both ascending).
std::vector<std::size_t> positions_in(const std::vector<int>& scope,
                                      const std::vector<int>& sub) {
  std::vector<std::size_t> pos;
  pos.reserve(sub.size());
  std::size_t j = 0;
  for (int v : sub) {
    while (j < scope.size() && scope[j] != v) ++j;
    pos.push_back(j);
  }
  return pos;
}

void subscopes_upto(const std::vector<int>& scope, int k,
                    std::vector<std::vector<int>>& out) {
  const std::size_t m = scope.size();
  out.clear();
  for (std::size_t i = 0; i < m; ++i) {
    if (k >= 1) out.push_back({scope[i]});
    if (k >= 2) {
      for (std::size_t j = i + 1; j < m; ++j) out.push_back({scope[i], scope[j]});
    }
  }
}

}  // namespace

Instance enforce_kl_minimality(const Instance& p, int k, int l) {
  if (!((k == 1 && l == 1) || (k == 2 && l == 3))) {
    throw Error(ErrorCode::invalid_input,
                "only (1,1)- and (2,3)-minimality are supported");
  }
  const int n = p.num_variables();
  std::vector<std::set<int>> dom(n);
  for (int v = 0; v < n; ++v) {
    dom[v].insert(p.domain(v).elements.begin(), p.domain(v).elements.end());
  }
  std::map<std::vector<int>, Relation> rel;
  for (const Constraint& c : p.constraints()) {
    rel.emplace(c.scope, Relation(c.tuples.begin(), c.tuples.end()));
  }

  if (k == 2 && l == 3) {
    // Materialise every 2- and 3-variable scope, seeded from projections of
    // the covering constraints (full domain product when nothing covers it).
    std::vector<std::vector<int>> scopes;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        scopes.push_back({i, j});
        for (int m = j + 1; m < n; ++m) scopes.push_back({i, j, m});
      }
    }
    for (const std::vector<int>& s : scopes) {
      if (rel.count(s) != 0) continue;
      Relation r;
      bool seeded = false;
      for (const Constraint& c : p.constraints()) {
        if (!std::includes(c.scope.begin(), c.scope.end(), s.begin(), s.end())) {
          continue;
        }
        auto pos = positions_in(c.scope, s);
        Relation proj;
        for (const auto& t : c.tuples) proj.insert(project(t, pos));
        if (!seeded) {
          r = std::move(proj);
          seeded = true;
        } else {
          Relation merged;
          std::set_intersection(r.begin(), r.end(), proj.begin(), proj.end(),
                                std::inserter(merged, merged.end()));
          r = std::move(merged);
        }
      }
      if (!seeded) {
        std::vector<std::vector<int>> acc = {{}};
        for (int v : s) {
          std::vector<std::vector<int>> next;
          for (const auto& t : acc) {
            for (int e : dom[v]) {
              std::vector<int> u = t;
              u.push_back(e);
              next.push_back(std::move(u));
            }
          }
          acc = std::move(next);
        }
        r.insert(acc.begin(), acc.end());
      }
      rel.emplace(s, std::move(r));
    }
  }

  // Propagate: every relation must agree with every other (and with the
  // domains) on each subscope of size <= k.
  bool changed = true;
  while (changed) {
    changed = false;
    // Allowed value sets per subscope.
    std::map<std::vector<int>, Relation> allowed;
    for (int v = 0; v < n; ++v) {
      Relation r;
      for (int e : dom[v]) r.insert({e});
      allowed.emplace(std::vector<int>{v}, std::move(r));
    }
    std::vector<std::vector<int>> subs;
    for (auto& [scope, r] : rel) {
      subscopes_upto(scope, k, subs);
      for (const auto& s : subs) {
        auto pos = positions_in(scope, s);
        Relation proj;
        for (const auto& t : r) proj.insert(project(t, pos));
        auto [it, inserted] = allowed.emplace(s, proj);
        if (!inserted) {
          Relation merged;
          std::set_intersection(it->second.begin(), it->second.end(), proj.begin(),
                                proj.end(), std::inserter(merged, merged.end()));
          it->second = std::move(merged);
        }
      }
    }
    // Filter domains.
    for (int v = 0; v < n; ++v) {
      const Relation& a = allowed[{v}];
      std::set<int> next;
      for (const auto& t : a) next.insert(t[0]);
      if (next != dom[v]) {
        dom[v] = std::move(next);
        changed = true;
      }
    }
    // Filter relations.
    for (auto& [scope, r] : rel) {
      subscopes_upto(scope, k, subs);
      Relation next;
      for (const auto& t : r) {
        bool ok = true;
        for (const auto& s : subs) {
          auto pos = positions_in(scope, s);
          auto it = allowed.find(s);
          if (it == allowed.end() || it->second.count(project(t, pos)) == 0) {
            ok = false;
            break;
          }
        }
        if (ok) next.insert(t);
      }
      if (next.size() != r.size()) {
        r = std::move(next);
        changed = true;
      }
    }
  }

  std::vector<VarDomain> doms;
  for (int v = 0; v < n; ++v) {
    VarDomain d = p.domain(v);
    d.elements.assign(dom[v].begin(), dom[v].end());
    doms.push_back(std::move(d));
  }
  std::vector<Constraint> cs;
  for (auto& [scope, r] : rel) {
    Constraint c;
    c.scope = scope;
    c.tuples.assign(r.begin(), r.end());
    cs.push_back(std::move(c));
  }
  return Instance(p.names(), std::move(doms), std::move(cs));
}

namespace {

struct Searcher {
  const Instance& p;
  std::vector<std::vector<int>> triggers;  // var -> constraint indices
  std::vector<int> assignment;
  std::int64_t nodes = 0;
  std::int64_t cap;

  explicit Searcher(const Instance& inst) : p(inst), cap(caps().oracle) {
    triggers.resize(p.num_variables());
    const auto& cs = p.constraints();
    for (std::size_t i = 0; i < cs.size(); ++i) {
      triggers[cs[i].scope.back()].push_back(static_cast<int>(i));
    }
    assignment.assign(p.num_variables(), -1);
  }

  bool consistent(int v) const {
    for (int ci : triggers[v]) {
      const Constraint& c = p.constraints()[ci];
      std::vector<int> t(c.scope.size());
      for (std::size_t i = 0; i < c.scope.size(); ++i) t[i] = assignment[c.scope[i]];
      if (!std::binary_search(c.tuples.begin(), c.tuples.end(), t)) return false;
    }
    return true;
  }

  // Enumerates solutions in lexicographic order; stops when visit returns
  // false.
  template <typename Visit>
  bool search(int v, const Visit& visit) {
    if (v == p.num_variables()) return visit(assignment);
    for (int e : p.domain(v).elements) {
      if (++nodes > cap) {
        throw Error(ErrorCode::cap_exceeded, "assignment enumeration exceeded cap");
      }
      assignment[v] = e;
      if (consistent(v) && !search(v + 1, visit)) return false;
    }
    assignment[v] = -1;
    return true;
  }
};

}  // namespace

BruteForceResult brute_force(const Instance& p) {
  BruteForceResult res;
  Searcher s(p);
  s.search(0, [&res](const std::vector<int>& a) {
    res.sat = true;
    res.witness = a;
    return false;
  });
  res.nodes = s.nodes;
  return res;
}

std::vector<std::vector<int>> all_solutions(const Instance& p) {
  std::vector<std::vector<int>> out;
  Searcher s(p);
  s.search(0, [&out](const std::vector<int>& a) {
    out.push_back(a);
    return true;
  });
  return out;
}

std::int64_t tuple_mass(const Instance& p) {
  std::int64_t mass = 0;
  for (int v = 0; v < p.num_variables(); ++v) {
    mass += static_cast<std::int64_t>(p.domain(v).elements.size());
  }
  for (const Constraint& c : p.constraints()) {
    mass += static_cast<std::int64_t>(c.tuples.size());
  }
  return mass;
}

int max_multiblock_domain_size(const Instance& p) {
  int best = 0;
  for (int v = 0; v < p.num_variables(); ++v) {
    auto s = p.algebra_structure(v);
    if (!s) {
      throw Error(ErrorCode::precondition,
                  "template algebra of '" + p.names()[v] + "' has no block structure");
    }
    const auto& dom = p.domain(v).elements;
    if (dom.empty()) continue;
    int first = s->block_of(dom[0]);
    bool multi = false;
    for (int e : dom) {
      if (s->block_of(e) != first) {
        multi = true;
        break;
      }
    }
    if (multi) best = std::max(best, static_cast<int>(dom.size()));
  }
  return best;
}

}  // namespace smbcsp
