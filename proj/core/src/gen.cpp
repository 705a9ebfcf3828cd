#include "smbcsp/gen.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "smbcsp/error.hpp"

namespace smbcsp {

namespace {

int pick(std::mt19937_64& eng, int n) {
  return static_cast<int>(eng() % static_cast<std::uint64_t>(n));
}

// k x k block meet table; block 0 is the least block, ids follow a linear
// extension of the block order.
std::vector<int> block_order(std::mt19937_64& eng, OrderShape shape, int k) {
  std::vector<int> bm(static_cast<std::size_t>(k) * k);
  auto at = [&](int i, int j) -> int& { return bm[i * k + j]; };
  switch (shape) {
    case OrderShape::malcev:
      break;  // k == 1
    case OrderShape::linear:
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) at(i, j) = std::min(i, j);
      break;
    case OrderShape::flat:
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) at(i, j) = i == j ? i : 0;
      break;
    case OrderShape::tree: {
      std::vector<int> parent(k, -1);
      for (int i = 1; i < k; ++i) parent[i] = pick(eng, i);
      auto ancestors = [&](int i) {
        std::vector<int> up;
        for (int v = i; v != -1; v = parent[v]) up.push_back(v);
        return up;
      };
      for (int i = 0; i < k; ++i) {
        std::vector<int> ai = ancestors(i);
        for (int j = 0; j < k; ++j) {
          // deepest common ancestor = first ancestor of i on j's chain
          std::vector<int> aj = ancestors(j);
          for (int v : ai) {
            if (std::find(aj.begin(), aj.end(), v) != aj.end()) {
              at(i, j) = v;
              break;
            }
          }
        }
      }
      break;
    }
    case OrderShape::general: {
      // Intersection-closed family of k bitmasks; falls back to a chain of
      // prefixes when random draws keep overshooting.
      const int universe = std::max(2, k);
      const std::uint64_t full = (universe >= 64)
                                     ? ~std::uint64_t{0}
                                     : ((std::uint64_t{1} << universe) - 1);
      std::set<std::uint64_t> family;
      for (int tries = 0;
           static_cast<int>(family.size()) < k && tries < 64 * k; ++tries) {
        std::uint64_t m = eng() & full;
        std::set<std::uint64_t> grown = family;
        grown.insert(m);
        for (std::uint64_t f : family) grown.insert(m & f);
        if (static_cast<int>(grown.size()) <= k) family = std::move(grown);
      }
      if (static_cast<int>(family.size()) != k) {
        family.clear();
        for (int i = 0; i < k; ++i)
          family.insert((std::uint64_t{1} << i) - 1);
      }
      std::vector<std::uint64_t> masks(family.begin(), family.end());
      std::sort(masks.begin(), masks.end(), [](std::uint64_t a, std::uint64_t b) {
        int pa = std::popcount(a), pb = std::popcount(b);
        return pa != pb ? pa < pb : a < b;
      });
      auto id_of = [&](std::uint64_t m) {
        return static_cast<int>(std::find(masks.begin(), masks.end(), m) -
                                masks.begin());
      };
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) at(i, j) = id_of(masks[i] & masks[j]);
      break;
    }
  }
  if (k == 1) bm = {0};
  return bm;
}

struct BlockPlan {
  int k = 0;
  std::vector<int> bmeet;          // k x k
  std::vector<int> size;           // per block
  std::vector<int> base;           // first element id per block
  std::vector<std::vector<int>> fmap;  // multiplier of the map i -> j, j <= i
};

int plan_meet(const BlockPlan& bp, int i, int j) { return bp.bmeet[i * bp.k + j]; }
bool plan_leq(const BlockPlan& bp, int i, int j) { return plan_meet(bp, i, j) == i; }

// Composes the cover maps along the canonical (smallest intermediate id)
// path from b down to c. Multipliers compose by modular multiplication
// because every map is linear into its target group.
int descend_multiplier(const BlockPlan& bp,
                       const std::vector<std::vector<int>>& cover_mult, int b,
                       int c) {
  if (b == c) return 1 % std::max(1, bp.size[b]);
  for (int m = 0; m < bp.k; ++m) {
    if (m == b || cover_mult[b][m] < 0 || !plan_leq(bp, c, m)) continue;
    long long rest = descend_multiplier(bp, cover_mult, m, c);
    return static_cast<int>(rest * cover_mult[b][m] % std::max(1, bp.size[c]));
  }
  throw Error(ErrorCode::internal, "no cover path in generated block order");
}

bool functorial(const BlockPlan& bp) {
  for (int b = 0; b < bp.k; ++b)
    for (int c = 0; c < bp.k; ++c) {
      if (!plan_leq(bp, c, b)) continue;
      for (int e = 0; e < bp.k; ++e) {
        if (!plan_leq(bp, e, c)) continue;
        int mod = std::max(1, bp.size[e]);
        long long via = static_cast<long long>(bp.fmap[c][e]) * bp.fmap[b][c];
        if (static_cast<int>(via % mod) != bp.fmap[b][e] % mod) return false;
      }
    }
  return true;
}

AlgebraPtr assemble(const BlockPlan& bp, const std::string& name) {
  int n = bp.base[bp.k - 1] + bp.size[bp.k - 1];
  std::vector<int> block_of(n);
  for (int b = 0; b < bp.k; ++b)
    for (int x = 0; x < bp.size[b]; ++x) block_of[bp.base[b] + x] = b;
  auto meet = [&](int a, int b) {
    int t = plan_meet(bp, block_of[a], block_of[b]);
    int lab = a - bp.base[block_of[a]];
    return bp.base[t] +
           static_cast<int>(static_cast<long long>(bp.fmap[block_of[a]][t]) *
                            lab % bp.size[t]);
  };
  auto d = [&](int a, int b, int c) {
    int m1 = meet(a, meet(c, b));
    int m2 = meet(b, meet(c, a));
    int m3 = meet(c, meet(b, a));
    int t = block_of[m1];
    int s = bp.size[t];
    int lab = ((m1 - m2 + m3 - bp.base[t]) % s + s) % s;
    return bp.base[t] + lab;
  };
  std::vector<int> mt(static_cast<std::size_t>(n) * n);
  std::vector<int> dt(static_cast<std::size_t>(n) * n * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      mt[a * n + b] = meet(a, b);
      for (int c = 0; c < n; ++c) dt[(a * n + b) * n + c] = d(a, b, c);
    }
  return std::make_shared<FiniteAlgebra>(name, n, std::move(mt), std::move(dt));
}

}  // namespace

AlgebraPtr random_smb_algebra(const AlgebraGenParams& params,
                              std::uint64_t seed) {
  if (params.blocks < 1 || params.min_block_size < 1 ||
      params.max_block_size < params.min_block_size || params.retries < 1)
    throw Error(ErrorCode::invalid_input, "inconsistent generator parameters");
  if ((params.shape == OrderShape::malcev) != (params.blocks == 1))
    throw Error(ErrorCode::invalid_input,
                "a single block and the malcev shape imply each other");
  std::mt19937_64 eng(seed);
  std::string name = params.name.empty()
                         ? "gen-" + order_shape_name(params.shape) + "-" +
                               std::to_string(seed)
                         : params.name;
  const int k = params.blocks;
  for (int attempt = 0; attempt <= params.retries; ++attempt) {
    const bool last = attempt == params.retries;
    BlockPlan bp;
    bp.k = k;
    bp.bmeet = block_order(eng, params.shape, k);
    int span = params.max_block_size - params.min_block_size + 1;
    for (int b = 0; b < k; ++b)
      bp.size.push_back(params.min_block_size + pick(eng, span));
    bp.base.resize(k, 0);
    for (int b = 1; b < k; ++b) bp.base[b] = bp.base[b - 1] + bp.size[b - 1];
    // Covers of the block order carry the drawn homomorphisms; everything
    // else is composed. The final attempt uses constant-zero maps, which
    // compose no matter what the order looks like.
    std::vector<std::vector<int>> cover_mult(k, std::vector<int>(k, -1));
    for (int b = 0; b < k; ++b)
      for (int c = 0; c < k; ++c) {
        if (b == c || !plan_leq(bp, c, b)) continue;
        bool cover = true;
        for (int m = 0; m < k && cover; ++m)
          if (m != b && m != c && plan_leq(bp, c, m) && plan_leq(bp, m, b))
            cover = false;
        if (!cover) continue;
        int g = std::gcd(bp.size[b], bp.size[c]);
        cover_mult[b][c] = last ? 0 : (bp.size[c] / g) * pick(eng, g);
      }
    bp.fmap.assign(k, std::vector<int>(k, 0));
    for (int b = 0; b < k; ++b)
      for (int c = 0; c < k; ++c)
        if (plan_leq(bp, c, b))
          bp.fmap[b][c] = descend_multiplier(bp, cover_mult, b, c);
    if (!functorial(bp)) continue;
    AlgebraPtr alg = assemble(bp, name);
    std::string why;
    std::optional<SmbStructure> s = try_detect_smb(*alg, &why);
    if (!s || !s->regular || s->block_count() != k) continue;
    return alg;
  }
  throw Error(ErrorCode::cap_exceeded,
              "algebra generation retry budget exhausted");
}

Instance random_instance(const InstanceGenParams& params,
                         const std::vector<AlgebraPtr>& templates,
                         std::uint64_t seed) {
  if (params.variables < 1 || params.constraints < 0 || params.min_arity < 1 ||
      params.max_arity < params.min_arity ||
      params.max_arity > params.variables || params.seed_tuples < 0 ||
      (params.seed_tuples == 0 && !params.plant_solution) || templates.empty())
    throw Error(ErrorCode::invalid_input, "inconsistent generator parameters");
  std::mt19937_64 eng(seed);
  std::vector<std::string> names;
  std::vector<VarDomain> domains;
  for (int v = 0; v < params.variables; ++v) {
    names.push_back("x" + std::to_string(v));
    const AlgebraPtr& alg = templates[pick(eng, static_cast<int>(templates.size()))];
    std::set<int> gens;
    int want = 1 + pick(eng, alg->size());
    while (static_cast<int>(gens.size()) < want)
      gens.insert(pick(eng, alg->size()));
    domains.push_back(VarDomain{
        alg->name(), alg,
        generate_subuniverse(*alg, {gens.begin(), gens.end()})});
  }
  std::vector<int> planted;
  for (const VarDomain& dom : domains)
    planted.push_back(dom.elements[pick(eng, static_cast<int>(dom.elements.size()))]);
  std::vector<Constraint> constraints;
  for (int c = 0; c < params.constraints; ++c) {
    int span = params.max_arity - params.min_arity + 1;
    int arity = params.min_arity + pick(eng, span);
    std::set<int> sset;
    while (static_cast<int>(sset.size()) < arity)
      sset.insert(pick(eng, params.variables));
    std::vector<int> scope(sset.begin(), sset.end());
    std::vector<const FiniteAlgebra*> coords;
    for (int v : scope) coords.push_back(domains[v].algebra.get());
    std::vector<std::vector<int>> seeds;
    for (int s = 0; s < params.seed_tuples; ++s) {
      std::vector<int> t;
      for (int v : scope)
        t.push_back(domains[v].elements[pick(eng, static_cast<int>(domains[v].elements.size()))]);
      seeds.push_back(std::move(t));
    }
    if (params.plant_solution) {
      std::vector<int> t;
      for (int v : scope) t.push_back(planted[v]);
      seeds.push_back(std::move(t));
    }
    constraints.push_back(Constraint{scope, close_tuples(coords, seeds)});
  }
  return Instance(std::move(names), std::move(domains), std::move(constraints));
}

}  // namespace smbcsp
