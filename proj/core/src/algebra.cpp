#include "smbcsp/algebra.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "smbcsp/caps.hpp"
#include "smbcsp/error.hpp"

namespace smbcsp {

namespace {

void check_range(const std::vector<int>& table, int n, const std::string& what) {
  for (int v : table) {
    if (v < 0 || v >= n) {
      throw Error(ErrorCode::invalid_input, what + " table entry out of range");
    }
  }
}

// Union-find over a fixed universe.
struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  // Returns true if the classes were distinct.
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);
    parent[b] = a;
    return true;
  }
  Partition to_partition() {
    std::vector<int> block_of(parent.size());
    for (std::size_t i = 0; i < parent.size(); ++i) block_of[i] = find(static_cast<int>(i));
    return Partition(std::move(block_of));
  }
};

// Closes dsu under compatibility with both operations of alg: whenever x ~ y,
// substituting y for x in any single argument slot keeps results related.
void close_to_congruence(const FiniteAlgebra& alg, Dsu& dsu) {
  const int n = alg.size();
  bool changed = true;
  while (changed) {
    changed = false;
    for (int x = 0; x < n; ++x) {
      for (int y = x + 1; y < n; ++y) {
        if (dsu.find(x) != dsu.find(y)) continue;
        for (int z = 0; z < n; ++z) {
          changed |= dsu.unite(alg.meet(x, z), alg.meet(y, z));
          changed |= dsu.unite(alg.meet(z, x), alg.meet(z, y));
          for (int w = 0; w < n; ++w) {
            changed |= dsu.unite(alg.d(x, z, w), alg.d(y, z, w));
            changed |= dsu.unite(alg.d(z, x, w), alg.d(z, y, w));
            changed |= dsu.unite(alg.d(z, w, x), alg.d(z, w, y));
          }
        }
      }
    }
  }
}

bool next_restricted_growth(std::vector<int>& rgs) {
  const int n = static_cast<int>(rgs.size());
  for (int i = n - 1; i > 0; --i) {
    int maxv = 0;
    for (int j = 0; j < i; ++j) maxv = std::max(maxv, rgs[j]);
    if (rgs[i] <= maxv) {
      ++rgs[i];
      std::fill(rgs.begin() + i + 1, rgs.end(), 0);
      return true;
    }
  }
  return false;
}

}  // namespace

FiniteAlgebra::FiniteAlgebra(std::string name, int size, std::vector<int> meet_table,
                             std::vector<int> d_table)
    : name_(std::move(name)), n_(size), meet_table_(std::move(meet_table)),
      d_table_(std::move(d_table)) {
  if (n_ <= 0) throw Error(ErrorCode::invalid_input, "algebra size must be positive");
  if (static_cast<int>(meet_table_.size()) != n_ * n_) {
    throw Error(ErrorCode::invalid_input, "meet table has wrong size");
  }
  if (static_cast<int>(d_table_.size()) != n_ * n_ * n_) {
    throw Error(ErrorCode::invalid_input, "maltsev table has wrong size");
  }
  check_range(meet_table_, n_, "meet");
  check_range(d_table_, n_, "maltsev");
  for (int a = 0; a < n_; ++a) {
    if (meet(a, a) != a) {
      throw Error(ErrorCode::invalid_input,
                  "meet not idempotent at " + std::to_string(a));
    }
    if (d(a, a, a) != a) {
      throw Error(ErrorCode::invalid_input,
                  "maltsev operation not idempotent at " + std::to_string(a));
    }
  }
}

Partition::Partition(std::vector<int> block_of) : block_of_(std::move(block_of)) {
  // Canonicalise block ids by first occurrence.
  std::vector<int> relabel(block_of_.size(), -1);
  int next = 0;
  for (int& b : block_of_) {
    if (b < 0 || b >= static_cast<int>(block_of_.size())) {
      throw Error(ErrorCode::invalid_input, "partition label out of range");
    }
    if (relabel[b] == -1) relabel[b] = next++;
    b = relabel[b];
  }
  num_blocks_ = next;
}

Partition Partition::equality(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return Partition(std::move(v));
}

Partition Partition::full(int n) { return Partition(std::vector<int>(n, 0)); }

Partition Partition::from_blocks(int n, const std::vector<std::vector<int>>& blocks) {
  std::vector<int> block_of(n, -1);
  int id = 0;
  for (const auto& blk : blocks) {
    for (int x : blk) {
      if (x < 0 || x >= n || block_of[x] != -1) {
        throw Error(ErrorCode::invalid_input, "blocks do not form a partition");
      }
      block_of[x] = id;
    }
    ++id;
  }
  for (int x = 0; x < n; ++x) {
    if (block_of[x] == -1) {
      throw Error(ErrorCode::invalid_input, "blocks do not cover the universe");
    }
  }
  return Partition(std::move(block_of));
}

std::vector<std::vector<int>> Partition::blocks() const {
  std::vector<std::vector<int>> out(num_blocks_);
  for (int x = 0; x < size(); ++x) out[block_of_[x]].push_back(x);
  return out;
}

bool Partition::refines(const Partition& coarser) const {
  if (coarser.size() != size()) return false;
  std::vector<int> rep(num_blocks_, -1);
  for (int x = 0; x < size(); ++x) {
    int b = block_of_[x];
    if (rep[b] == -1) {
      rep[b] = coarser.block_of(x);
    } else if (rep[b] != coarser.block_of(x)) {
      return false;
    }
  }
  return true;
}

Partition partition_meet(const Partition& a, const Partition& b) {
  const int n = a.size();
  std::vector<int> out(n);
  std::map<std::pair<int, int>, int> seen;
  for (int x = 0; x < n; ++x) {
    std::pair<int, int> k{a.block_of(x), b.block_of(x)};
    auto [it, inserted] = seen.emplace(k, static_cast<int>(seen.size()));
    out[x] = it->second;
  }
  return Partition(std::move(out));
}

Partition partition_join(const Partition& a, const Partition& b) {
  Dsu dsu(a.size());
  std::vector<int> first_a(a.size(), -1), first_b(b.size(), -1);
  for (int x = 0; x < a.size(); ++x) {
    int& fa = first_a[a.block_of(x)];
    if (fa == -1) fa = x; else dsu.unite(fa, x);
    int& fb = first_b[b.block_of(x)];
    if (fb == -1) fb = x; else dsu.unite(fb, x);
  }
  return dsu.to_partition();
}

bool is_congruence(const FiniteAlgebra& alg, const Partition& p) {
  const int n = alg.size();
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (!p.same_block(x, y)) continue;
      for (int z = 0; z < n; ++z) {
        if (!p.same_block(alg.meet(x, z), alg.meet(y, z))) return false;
        if (!p.same_block(alg.meet(z, x), alg.meet(z, y))) return false;
        for (int w = 0; w < n; ++w) {
          if (!p.same_block(alg.d(x, z, w), alg.d(y, z, w))) return false;
          if (!p.same_block(alg.d(z, x, w), alg.d(z, y, w))) return false;
          if (!p.same_block(alg.d(z, w, x), alg.d(z, w, y))) return false;
        }
      }
    }
  }
  return true;
}

Partition principal_congruence(const FiniteAlgebra& alg, int a, int b) {
  Dsu dsu(alg.size());
  dsu.unite(a, b);
  close_to_congruence(alg, dsu);
  return dsu.to_partition();
}

std::vector<Partition> all_congruences(const FiniteAlgebra& alg) {
  const int n = alg.size();
  std::set<Partition> found;
  found.insert(Partition::equality(n));
  std::vector<Partition> work;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      Partition p = principal_congruence(alg, a, b);
      if (found.insert(p).second) work.push_back(p);
    }
  }
  // Every congruence is a join of principal ones; close under join.
  std::vector<Partition> principals = work;
  while (!work.empty()) {
    Partition p = work.back();
    work.pop_back();
    for (const Partition& q : principals) {
      Partition j = partition_join(p, q);
      if (found.insert(j).second) work.push_back(j);
    }
  }
  std::vector<Partition> out(found.begin(), found.end());
  std::sort(out.begin(), out.end(), [](const Partition& x, const Partition& y) {
    if (x.block_count() != y.block_count()) return x.block_count() > y.block_count();
    return x.raw() < y.raw();
  });
  return out;
}

std::vector<Partition> all_congruences_exhaustive(const FiniteAlgebra& alg) {
  const int n = alg.size();
  if (n > 8) {
    throw Error(ErrorCode::cap_exceeded, "exhaustive congruence enumeration limited to size 8");
  }
  std::vector<Partition> out;
  std::vector<int> rgs(n, 0);
  do {
    Partition p{std::vector<int>(rgs)};
    if (is_congruence(alg, p)) out.push_back(p);
  } while (next_restricted_growth(rgs));
  std::sort(out.begin(), out.end(), [](const Partition& x, const Partition& y) {
    if (x.block_count() != y.block_count()) return x.block_count() > y.block_count();
    return x.raw() < y.raw();
  });
  return out;
}

std::vector<CoverPair> covers_below(const FiniteAlgebra& alg, const Partition& theta) {
  std::vector<Partition> interval;
  for (const Partition& p : all_congruences(alg)) {
    if (p.refines(theta)) interval.push_back(p);
  }
  std::vector<CoverPair> out;
  for (const Partition& a : interval) {
    for (const Partition& b : interval) {
      if (!a.refines(b) || a == b) continue;
      bool covered = true;
      for (const Partition& c : interval) {
        if (c == a || c == b) continue;
        if (a.refines(c) && c.refines(b)) {
          covered = false;
          break;
        }
      }
      if (covered) out.push_back(CoverPair{a, b});
    }
  }
  return out;
}

std::vector<int> generate_subuniverse(const FiniteAlgebra& alg,
                                      const std::vector<int>& seed) {
  const int n = alg.size();
  std::vector<char> in(n, 0);
  std::vector<int> members;
  for (int x : seed) {
    if (x < 0 || x >= n) throw Error(ErrorCode::invalid_input, "seed element out of range");
    if (!in[x]) {
      in[x] = 1;
      members.push_back(x);
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    const std::size_t m = members.size();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        int v = alg.meet(members[i], members[j]);
        if (!in[v]) {
          in[v] = 1;
          members.push_back(v);
          changed = true;
        }
        for (std::size_t k = 0; k < m; ++k) {
          int w = alg.d(members[i], members[j], members[k]);
          if (!in[w]) {
            in[w] = 1;
            members.push_back(w);
            changed = true;
          }
        }
      }
    }
  }
  std::sort(members.begin(), members.end());
  return members;
}

bool is_subuniverse(const FiniteAlgebra& alg, const std::vector<int>& elements) {
  std::vector<char> in(alg.size(), 0);
  for (int x : elements) {
    if (x < 0 || x >= alg.size()) return false;
    in[x] = 1;
  }
  for (int a : elements) {
    for (int b : elements) {
      if (!in[alg.meet(a, b)]) return false;
      for (int c : elements) {
        if (!in[alg.d(a, b, c)]) return false;
      }
    }
  }
  return true;
}

std::vector<std::vector<int>> close_tuples(
    const std::vector<const FiniteAlgebra*>& coords,
    std::vector<std::vector<int>> seed) {
  const std::size_t k = coords.size();
  std::set<std::vector<int>> have;
  std::vector<std::vector<int>> members;
  for (auto& t : seed) {
    if (t.size() != k) throw Error(ErrorCode::invalid_input, "tuple arity mismatch");
    if (have.insert(t).second) members.push_back(t);
  }
  const std::int64_t cap = caps().closure;
  bool changed = true;
  std::vector<int> tmp(k);
  while (changed) {
    changed = false;
    const std::size_t m = members.size();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t c = 0; c < k; ++c) tmp[c] = coords[c]->meet(members[i][c], members[j][c]);
        if (have.insert(tmp).second) {
          members.push_back(tmp);
          changed = true;
        }
        for (std::size_t l = 0; l < m; ++l) {
          for (std::size_t c = 0; c < k; ++c) {
            tmp[c] = coords[c]->d(members[i][c], members[j][c], members[l][c]);
          }
          if (have.insert(tmp).second) {
            members.push_back(tmp);
            changed = true;
          }
        }
      }
      if (static_cast<std::int64_t>(members.size()) > cap) {
        throw Error(ErrorCode::cap_exceeded, "tuple closure exceeded cap");
      }
    }
  }
  return std::vector<std::vector<int>>(have.begin(), have.end());
}

ImageAlgebra image_algebra(const FiniteAlgebra& ambient, std::string name,
                           const std::vector<int>& carrier,
                           const std::vector<int>& retr) {
  const int n = ambient.size();
  if (static_cast<int>(retr.size()) != n) {
    throw Error(ErrorCode::invalid_input, "retraction map has wrong size");
  }
  ImageAlgebra out;
  out.to_old = carrier;
  std::sort(out.to_old.begin(), out.to_old.end());
  out.to_old.erase(std::unique(out.to_old.begin(), out.to_old.end()), out.to_old.end());
  const int k = static_cast<int>(out.to_old.size());
  out.to_new.assign(n, -1);
  for (int i = 0; i < k; ++i) out.to_new[out.to_old[i]] = i;
  for (int x : out.to_old) {
    if (retr[x] != x) {
      throw Error(ErrorCode::invalid_input, "retraction does not fix its image");
    }
  }
  std::vector<int> meet_table(k * k), d_table(k * k * k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      int v = retr[ambient.meet(out.to_old[a], out.to_old[b])];
      if (v < 0 || v >= n || out.to_new[v] == -1) {
        throw Error(ErrorCode::invalid_input, "carrier not closed under retracted meet");
      }
      meet_table[a * k + b] = out.to_new[v];
      for (int c = 0; c < k; ++c) {
        int w = retr[ambient.d(out.to_old[a], out.to_old[b], out.to_old[c])];
        if (w < 0 || w >= n || out.to_new[w] == -1) {
          throw Error(ErrorCode::invalid_input, "carrier not closed under retracted maltsev");
        }
        d_table[(a * k + b) * k + c] = out.to_new[w];
      }
    }
  }
  out.algebra = std::make_shared<FiniteAlgebra>(std::move(name), k, std::move(meet_table),
                                                std::move(d_table));
  return out;
}

ImageAlgebra induced_algebra(const FiniteAlgebra& ambient, std::string name,
                             const std::vector<int>& carrier) {
  std::vector<int> identity(ambient.size());
  std::iota(identity.begin(), identity.end(), 0);
  return image_algebra(ambient, std::move(name), carrier, identity);
}

std::vector<int> idempotent_power(const std::vector<int>& f) {
  const int n = static_cast<int>(f.size());
  for (int v : f) {
    if (v < 0 || v >= n) throw Error(ErrorCode::invalid_input, "map value out of range");
  }
  // Walk the powers f, f^2, ... until the first repetition, which yields the
  // tail length t and period p of the power semigroup; the idempotent power
  // is f^k for the least multiple k of p with k >= t.
  std::map<std::vector<int>, int> seen;
  std::vector<int> g = f;
  int k = 1;
  seen.emplace(g, 1);
  std::vector<int> h(n);
  while (true) {
    for (int x = 0; x < n; ++x) h[x] = f[g[x]];
    ++k;
    auto it = seen.find(h);
    if (it != seen.end()) {
      const int t = it->second;
      const int p = k - t;
      int target = ((t + p - 1) / p) * p;
      // Recompute f^target.
      std::vector<int> r = f;
      for (int step = 1; step < target; ++step) {
        for (int x = 0; x < n; ++x) h[x] = f[r[x]];
        r = h;
      }
      return r;
    }
    seen.emplace(h, k);
    g = h;
  }
}

}  // namespace smbcsp
