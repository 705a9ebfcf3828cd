#include "smbcsp/malcev.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "smbcsp/caps.hpp"
#include "smbcsp/error.hpp"

namespace smbcsp {

namespace {

using std::int64_t;

constexpr int64_t kMaxModulus = int64_t{1} << 31;

int64_t floor_mod(int64_t a, int64_t n) { return ((a % n) + n) % n; }

int64_t egcd(int64_t a, int64_t b, int64_t& x, int64_t& y) {
  if (b == 0) {
    x = 1;
    y = 0;
    return a;
  }
  int64_t x1 = 0, y1 = 0;
  const int64_t g = egcd(b, a % b, x1, y1);
  x = y1;
  y = x1 - (a / b) * y1;
  return g;
}

int64_t modinv(int64_t a, int64_t n) {
  int64_t x = 0, y = 0;
  const int64_t g = egcd(floor_mod(a, n), n, x, y);
  if (g != 1) throw Error(ErrorCode::internal, "modinv of a non-unit");
  return floor_mod(x, n);
}

int valuation(int64_t x, int64_t p) {
  int v = 0;
  while (x % p == 0) {
    x /= p;
    ++v;
  }
  return v;
}

// Diagonalises a mod q = p^e by row and column operations, always pivoting
// on an entry of least p-valuation; such a pivot divides every remaining
// entry, so elimination is exact and the transformed unknowns decouple.
std::optional<ModularSolution> solve_prime_power(
    std::vector<std::vector<int64_t>> a, std::vector<int64_t> b, int64_t p,
    int64_t q) {
  const int rows = static_cast<int>(a.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(a[0].size());
  for (auto& row : a)
    for (auto& e : row) e = floor_mod(e, q);
  for (auto& e : b) e = floor_mod(e, q);

  // u[j]: original-unknown combination forming transformed unknown j.
  std::vector<std::vector<int64_t>> u(cols, std::vector<int64_t>(cols, 0));
  for (int j = 0; j < cols; ++j) u[j][j] = 1;

  int rank = 0;
  std::vector<int> pivot_val;
  while (rank < rows && rank < cols) {
    int br = -1, bc = -1, bv = 0;
    for (int r = rank; r < rows; ++r) {
      for (int c = rank; c < cols; ++c) {
        if (a[r][c] == 0) continue;
        const int v = valuation(a[r][c], p);
        if (br == -1 || v < bv) {
          br = r;
          bc = c;
          bv = v;
        }
      }
    }
    if (br == -1) break;
    std::swap(a[rank], a[br]);
    std::swap(b[rank], b[br]);
    if (bc != rank) {
      for (int r = 0; r < rows; ++r) std::swap(a[r][rank], a[r][bc]);
      std::swap(u[rank], u[bc]);
    }
    const int64_t pv = [&] {
      int64_t m = 1;
      for (int i = 0; i < bv; ++i) m *= p;
      return m;
    }();
    const int64_t inv_unit = modinv(a[rank][rank] / pv, q);
    for (int r = rank + 1; r < rows; ++r) {
      if (a[r][rank] == 0) continue;
      const int64_t f = floor_mod((a[r][rank] / pv) * inv_unit, q);
      for (int c = rank; c < cols; ++c)
        a[r][c] = floor_mod(a[r][c] - f * a[rank][c], q);
      b[r] = floor_mod(b[r] - f * b[rank], q);
    }
    for (int c = rank + 1; c < cols; ++c) {
      if (a[rank][c] == 0) continue;
      const int64_t f = floor_mod((a[rank][c] / pv) * inv_unit, q);
      for (int r = rank; r < rows; ++r)
        a[r][c] = floor_mod(a[r][c] - f * a[r][rank], q);
      for (int j = 0; j < cols; ++j)
        u[c][j] = floor_mod(u[c][j] - f * u[rank][j], q);
    }
    pivot_val.push_back(bv);
    ++rank;
  }

  for (int r = rank; r < rows; ++r)
    if (b[r] != 0) return std::nullopt;

  std::vector<int64_t> y(cols, 0);
  std::vector<std::vector<int64_t>> kernel_y;
  for (int k = 0; k < rank; ++k) {
    int64_t pv = 1;
    for (int i = 0; i < pivot_val[k]; ++i) pv *= p;
    if (b[k] % pv != 0) return std::nullopt;
    const int64_t reduced = q / pv;  // y_k is determined mod reduced
    y[k] = floor_mod((b[k] / pv) * modinv(a[k][k] / pv, reduced), reduced);
    if (pv > 1) {
      std::vector<int64_t> g(cols, 0);
      g[k] = reduced;
      kernel_y.push_back(std::move(g));
    }
  }
  for (int k = rank; k < cols; ++k) {
    std::vector<int64_t> g(cols, 0);
    g[k] = 1;
    kernel_y.push_back(std::move(g));
  }

  ModularSolution out;
  out.particular.assign(cols, 0);
  for (int k = 0; k < cols; ++k) {
    if (y[k] == 0) continue;
    for (int j = 0; j < cols; ++j)
      out.particular[j] = floor_mod(out.particular[j] + y[k] * u[k][j], q);
  }
  for (const auto& g : kernel_y) {
    std::vector<int64_t> z(cols, 0);
    for (int k = 0; k < cols; ++k) {
      if (g[k] == 0) continue;
      for (int j = 0; j < cols; ++j)
        z[j] = floor_mod(z[j] + g[k] * u[k][j], q);
    }
    if (std::any_of(z.begin(), z.end(), [](int64_t e) { return e != 0; }))
      out.kernel.push_back(std::move(z));
  }
  return out;
}

std::vector<std::pair<int64_t, int64_t>> prime_power_factors(int64_t n) {
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int64_t p = 2; p * p <= n; ++p) {
    if (n % p != 0) continue;
    int64_t q = 1;
    while (n % p == 0) {
      q *= p;
      n /= p;
    }
    out.emplace_back(p, q);
  }
  if (n > 1) out.emplace_back(n, n);
  return out;
}

}  // namespace

std::optional<ModularSolution> solve_modular_system(
    const std::vector<std::vector<int64_t>>& a, const std::vector<int64_t>& b,
    int64_t n) {
  if (n < 1) throw Error(ErrorCode::invalid_input, "modulus must be positive");
  const int rows = static_cast<int>(a.size());
  if (static_cast<int>(b.size()) != rows)
    throw Error(ErrorCode::invalid_input, "right-hand side size mismatch");
  const int cols = rows == 0 ? 0 : static_cast<int>(a[0].size());
  for (const auto& row : a)
    if (static_cast<int>(row.size()) != cols)
      throw Error(ErrorCode::invalid_input, "ragged coefficient matrix");
  if (n == 1) return ModularSolution{std::vector<int64_t>(cols, 0), {}};

  const auto factors = prime_power_factors(n);
  std::vector<ModularSolution> parts;
  for (const auto& [p, q] : factors) {
    auto part = solve_prime_power(a, b, p, q);
    if (!part) return std::nullopt;
    parts.push_back(*std::move(part));
  }

  ModularSolution out;
  out.particular.assign(cols, 0);
  std::vector<int64_t> lift(factors.size());  // m_i * inv(m_i mod q_i) mod n
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const int64_t q = factors[i].second;
    const int64_t m = n / q;
    lift[i] = floor_mod(m * modinv(m % q, q), n);
  }
  for (int j = 0; j < cols; ++j) {
    int64_t x = 0;
    for (std::size_t i = 0; i < factors.size(); ++i)
      x = floor_mod(x + parts[i].particular[j] % factors[i].second * lift[i],
                    n);
    out.particular[j] = x;
  }
  for (std::size_t i = 0; i < factors.size(); ++i) {
    for (const auto& g : parts[i].kernel) {
      std::vector<int64_t> z(cols, 0);
      bool nonzero = false;
      for (int j = 0; j < cols; ++j) {
        z[j] = floor_mod(g[j] * lift[i], n);
        nonzero = nonzero || z[j] != 0;
      }
      if (nonzero) out.kernel.push_back(std::move(z));
    }
  }
  return out;
}

bool is_malcev_on(const FiniteAlgebra& alg, const std::vector<int>& members) {
  for (int x : members)
    for (int y : members)
      if (alg.d(x, y, y) != x || alg.d(y, y, x) != x) return false;
  return true;
}

namespace {

// Cyclic-factor basis of a finite abelian group given by its addition table
// with zero at index 0: split off a maximal-order element, decompose the
// quotient by its cosets and lift the quotient basis (a maximal-order element
// spans a direct summand, so each lift can be corrected to the right order).
void decompose_group(const std::vector<std::vector<int>>& add,
                     std::vector<int>& gens, std::vector<int>& orders) {
  const int m = static_cast<int>(add.size());
  if (m == 1) return;

  const auto order_of = [&](int x) {
    int k = 1;
    for (int acc = x; acc != 0; acc = add[acc][x]) ++k;
    return k;
  };
  int g = 1, q = order_of(1);
  for (int x = 2; x < m; ++x) {
    const int o = order_of(x);
    if (o > q) {
      q = o;
      g = x;
    }
  }

  std::vector<int> power(q);  // power[k] = k*g
  std::map<int, int> log;
  power[0] = 0;
  log[0] = 0;
  for (int k = 1; k < q; ++k) {
    power[k] = add[power[k - 1]][g];
    log[power[k]] = k;
  }

  std::vector<int> rep(m);
  for (int x = 0; x < m; ++x) {
    int best = x;
    for (int k = 1; k < q; ++k) best = std::min(best, add[x][power[k]]);
    rep[x] = best;
  }
  std::vector<int> reps;
  for (int x = 0; x < m; ++x)
    if (rep[x] == x) reps.push_back(x);
  std::vector<int> rep_index(m, -1);
  for (std::size_t i = 0; i < reps.size(); ++i) rep_index[reps[i]] = static_cast<int>(i);

  std::vector<std::vector<int>> qadd(reps.size(), std::vector<int>(reps.size()));
  for (std::size_t i = 0; i < reps.size(); ++i)
    for (std::size_t j = 0; j < reps.size(); ++j)
      qadd[i][j] = rep_index[rep[add[reps[i]][reps[j]]]];

  std::vector<int> qgens, qorders;
  decompose_group(qadd, qgens, qorders);

  gens.push_back(g);
  orders.push_back(q);
  const auto multiple = [&](int k, int x) {
    int acc = 0;
    for (int i = 0; i < k; ++i) acc = add[acc][x];
    return acc;
  };
  for (std::size_t j = 0; j < qgens.size(); ++j) {
    const int h = reps[qgens[j]];
    const int mo = qorders[j];
    const auto it = log.find(multiple(mo, h));
    if (it == log.end() || it->second % mo != 0)
      throw Error(ErrorCode::internal, "group basis lift failed");
    const int lifted = add[h][power[(q - it->second / mo) % q]];
    if (multiple(mo, lifted) != 0)
      throw Error(ErrorCode::internal, "group basis lift has wrong order");
    gens.push_back(lifted);
    orders.push_back(mo);
  }
}

}  // namespace

int AffineGroup::member_from_coords(const std::vector<int>& c) const {
  int idx = 0;
  for (std::size_t j = 0; j < orders.size(); ++j) idx = idx * orders[j] + c[j];
  return member_by_radix[idx];
}

std::optional<AffineGroup> affine_structure(const FiniteAlgebra& alg,
                                            const std::vector<int>& members) {
  if (members.empty()) return std::nullopt;
  std::vector<int> elems = members;
  std::sort(elems.begin(), elems.end());
  elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
  const int m = static_cast<int>(elems.size());
  std::map<int, int> pos;
  for (int i = 0; i < m; ++i) pos[elems[i]] = i;
  const int zero = elems[0];

  std::vector<std::vector<int>> add(m, std::vector<int>(m));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const auto it = pos.find(alg.d(elems[i], zero, elems[j]));
      if (it == pos.end()) return std::nullopt;
      add[i][j] = it->second;
    }
  }
  for (int i = 0; i < m; ++i)
    if (add[i][0] != i || add[0][i] != i) return std::nullopt;
  std::vector<int> neg(m, -1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (add[i][j] != add[j][i]) return std::nullopt;
      if (add[i][j] == 0) neg[i] = j;
      for (int k = 0; k < m; ++k)
        if (add[add[i][j]][k] != add[i][add[j][k]]) return std::nullopt;
    }
    if (neg[i] == -1) return std::nullopt;
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        if (alg.d(elems[i], elems[j], elems[k]) != elems[add[add[i][neg[j]]][k]])
          return std::nullopt;

  AffineGroup out;
  out.members = elems;
  out.zero = zero;
  std::vector<int> gens;
  decompose_group(add, gens, out.orders);

  int span = 1;
  for (int q : out.orders) span *= q;
  if (span != m)
    throw Error(ErrorCode::internal, "group basis does not span");
  out.coords.assign(m, {});
  out.member_by_radix.assign(m, -1);
  std::vector<int> c(out.orders.size(), 0);
  for (int idx = 0; idx < span; ++idx) {
    int elem = 0;
    for (std::size_t j = 0; j < gens.size(); ++j)
      for (int rep = 0; rep < c[j]; ++rep) elem = add[elem][gens[j]];
    if (out.member_by_radix[idx] != -1 || !out.coords[elem].empty())
      throw Error(ErrorCode::internal, "group coordinates are not a bijection");
    out.member_by_radix[idx] = elem;
    out.coords[elem] = c;
    for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j) {
      if (++c[j] < out.orders[j]) break;
      c[j] = 0;
    }
  }
  if (m == 1) {
    out.member_by_radix = {0};
    out.coords = {{}};
  }
  for (int i = 0; i < m; ++i)
    if (out.member_by_radix[i] == -1)
      throw Error(ErrorCode::internal, "group coordinates are not onto");
  return out;
}

namespace {

std::vector<int64_t> scaled_coords(const AffineGroup& g, int member_index,
                                   int64_t n) {
  std::vector<int64_t> out(g.orders.size());
  for (std::size_t j = 0; j < g.orders.size(); ++j)
    out[j] = static_cast<int64_t>(g.coords[member_index][j]) * (n / g.orders[j]);
  return out;
}

}  // namespace

MalcevResult malcev_solve(const Instance& p) {
  std::string why;
  if (!is_compatible(p, &why)) {
    throw Error(ErrorCode::precondition,
                "malcev_solve requires a compatible instance: " + why);
  }
  const int n = p.num_variables();
  for (int v = 0; v < n; ++v) {
    if (!is_malcev_on(*p.domain(v).algebra, p.domain(v).elements)) {
      throw Error(ErrorCode::precondition,
                  "malcev_solve: d is not Mal'cev on the domain of variable '" +
                      p.names()[v] + "'");
    }
  }

  MalcevResult res;
  if (p.any_domain_empty() || p.any_constraint_empty()) return res;

  std::map<std::pair<const FiniteAlgebra*, std::vector<int>>,
           std::optional<AffineGroup>>
      cache;
  std::vector<const AffineGroup*> groups(n, nullptr);
  bool all_affine = true;
  for (int v = 0; v < n; ++v) {
    const auto key =
        std::make_pair(p.domain(v).algebra.get(), p.domain(v).elements);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache
               .emplace(key,
                        affine_structure(*p.domain(v).algebra, p.domain(v).elements))
               .first;
    }
    if (!it->second) {
      all_affine = false;
      break;
    }
    groups[v] = &*it->second;
  }
  if (!all_affine) {
    const BruteForceResult bf = brute_force(p);
    res.sat = bf.sat;
    res.witness = bf.witness;
    res.exhaustive_fallback = true;
    return res;
  }

  std::vector<int> offset(n, 0);
  int total = 0;
  int64_t modulus = 1;
  for (int v = 0; v < n; ++v) {
    offset[v] = total;
    total += groups[v]->coord_count();
    for (int q : groups[v]->orders) {
      const int64_t g = std::gcd(modulus, static_cast<int64_t>(q));
      if (modulus / g > kMaxModulus / q)
        throw Error(ErrorCode::cap_exceeded, "affine modulus exceeds 2^31");
      modulus = modulus / g * q;
    }
  }

  if (total == 0) {
    res.sat = true;
    res.witness.resize(n);
    for (int v = 0; v < n; ++v) res.witness[v] = p.domain(v).elements[0];
    if (!p.satisfies(res.witness))
      throw Error(ErrorCode::internal, "point instance rejects its only point");
    return res;
  }

  const auto member_index = [&](int v, int value) {
    const auto& ms = groups[v]->members;
    return static_cast<int>(
        std::lower_bound(ms.begin(), ms.end(), value) - ms.begin());
  };

  int unknowns = total;
  std::vector<int> lambda_offset;
  for (const Constraint& c : p.constraints()) {
    lambda_offset.push_back(unknowns);
    unknowns += static_cast<int>(c.tuples.size()) - 1;
  }

  std::vector<std::vector<int64_t>> rows;
  std::vector<int64_t> rhs;
  for (int v = 0; v < n; ++v) {
    for (int j = 0; j < groups[v]->coord_count(); ++j) {
      std::vector<int64_t> row(unknowns, 0);
      row[offset[v] + j] = groups[v]->orders[j];
      rows.push_back(std::move(row));
      rhs.push_back(0);
    }
  }
  for (std::size_t ci = 0; ci < p.constraints().size(); ++ci) {
    const Constraint& c = p.constraints()[ci];
    const auto embed_tuple = [&](const std::vector<int>& t) {
      std::vector<int64_t> e;
      for (std::size_t i = 0; i < c.scope.size(); ++i) {
        const int v = c.scope[i];
        const auto part = scaled_coords(*groups[v], member_index(v, t[i]), modulus);
        e.insert(e.end(), part.begin(), part.end());
      }
      return e;
    };
    const std::vector<int64_t> base = embed_tuple(c.tuples[0]);
    std::vector<std::vector<int64_t>> gens;
    for (std::size_t k = 1; k < c.tuples.size(); ++k) {
      std::vector<int64_t> g = embed_tuple(c.tuples[k]);
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = floor_mod(g[i] - base[i], modulus);
      gens.push_back(std::move(g));
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < c.scope.size(); ++i) {
      const int v = c.scope[i];
      for (int j = 0; j < groups[v]->coord_count(); ++j, ++pos) {
        std::vector<int64_t> row(unknowns, 0);
        row[offset[v] + j] = 1;
        for (std::size_t k = 0; k < gens.size(); ++k)
          row[lambda_offset[ci] + static_cast<int>(k)] =
              floor_mod(-gens[k][pos], modulus);
        rows.push_back(std::move(row));
        rhs.push_back(base[pos]);
      }
    }
  }

  const auto solved = solve_modular_system(rows, rhs, modulus);
  if (!solved) return res;  // unsat

  std::vector<int64_t> point(solved->particular.begin(),
                             solved->particular.begin() + total);
  std::vector<std::vector<int64_t>> span;
  for (const auto& g : solved->kernel) {
    std::vector<int64_t> z(g.begin(), g.begin() + total);
    if (std::any_of(z.begin(), z.end(), [](int64_t e) { return e != 0; }))
      span.push_back(std::move(z));
  }

  res.witness.assign(n, -1);
  for (int v = 0; v < n; ++v) {
    const int r = groups[v]->coord_count();
    if (r == 0) {
      res.witness[v] = p.domain(v).elements[0];
      continue;
    }
    bool pinned = false;
    for (int value : p.domain(v).elements) {
      const auto target = scaled_coords(*groups[v], member_index(v, value), modulus);
      std::vector<std::vector<int64_t>> small(
          r, std::vector<int64_t>(span.size(), 0));
      std::vector<int64_t> diff(r);
      for (int j = 0; j < r; ++j) {
        for (std::size_t k = 0; k < span.size(); ++k)
          small[j][k] = span[k][offset[v] + j];
        diff[j] = floor_mod(target[j] - point[offset[v] + j], modulus);
      }
      const auto fit = solve_modular_system(small, diff, modulus);
      if (!fit) continue;
      for (std::size_t k = 0; k < span.size(); ++k) {
        if (fit->particular[k] == 0) continue;
        for (int j = 0; j < total; ++j)
          point[j] = floor_mod(point[j] + fit->particular[k] * span[k][j], modulus);
      }
      std::vector<std::vector<int64_t>> next;
      for (const auto& mu : fit->kernel) {
        std::vector<int64_t> z(total, 0);
        bool nonzero = false;
        for (std::size_t k = 0; k < span.size(); ++k) {
          if (mu[k] == 0) continue;
          for (int j = 0; j < total; ++j) {
            z[j] = floor_mod(z[j] + mu[k] * span[k][j], modulus);
            nonzero = nonzero || z[j] != 0;
          }
        }
        if (nonzero) next.push_back(std::move(z));
      }
      span = std::move(next);
      res.witness[v] = value;
      pinned = true;
      break;
    }
    if (!pinned)
      throw Error(ErrorCode::internal, "nonempty affine coset failed to pin");
  }
  if (!p.satisfies(res.witness))
    throw Error(ErrorCode::internal, "affine witness fails verification");
  res.sat = true;
  return res;
}

std::vector<std::vector<int>> compact_representation(
    const std::vector<std::vector<int>>& closed_tuples) {
  std::vector<std::vector<int>> s = closed_tuples;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  if (s.empty()) return {};
  const std::size_t arity = s[0].size();
  for (const auto& t : s)
    if (t.size() != arity)
      throw Error(ErrorCode::invalid_input, "tuple arity mismatch");

  std::set<std::vector<int>> witnesses;
  for (std::size_t i = 0; i < arity; ++i) {
    std::set<std::pair<int, int>> covered;
    std::size_t lo = 0;
    while (lo < s.size()) {
      std::size_t hi = lo;
      while (hi < s.size() &&
             std::equal(s[hi].begin(), s[hi].begin() + i, s[lo].begin()))
        ++hi;
      std::map<int, const std::vector<int>*> first;
      for (std::size_t k = lo; k < hi; ++k) first.try_emplace(s[k][i], &s[k]);
      for (const auto& [a, ta] : first) {
        for (const auto& [b, tb] : first) {
          if (a > b) continue;
          if (!covered.emplace(a, b).second) continue;
          witnesses.insert(*ta);
          witnesses.insert(*tb);
        }
      }
      lo = hi;
    }
  }
  return {witnesses.begin(), witnesses.end()};
}

}  // namespace smbcsp
