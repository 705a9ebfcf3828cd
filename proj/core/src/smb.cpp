#include "smbcsp/smb.hpp"

#include <algorithm>
#include <sstream>

#include "smbcsp/error.hpp"

namespace smbcsp {

namespace {

std::string triple(int a, int b, int c) {
  std::ostringstream os;
  os << "(" << a << "," << b << "," << c << ")";
  return os.str();
}

// Checks the three block conditions for a candidate congruence. On failure
// returns a description; the quotient semilattice check covers commutativity
// and associativity (idempotence is inherited).
std::optional<std::string> qualifies(const FiniteAlgebra& alg, const Partition& p) {
  const int n = alg.size();
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (!p.same_block(x, y)) continue;
      if (alg.meet(x, y) != x) {
        std::ostringstream os;
        os << "meet is not first projection on the block of " << x << ": " << x
           << "&" << y << " = " << alg.meet(x, y);
        return os.str();
      }
      if (alg.d(x, y, y) != x || alg.d(y, y, x) != x) {
        std::ostringstream os;
        os << "d is not Mal'cev on the block of " << x << ": d" << triple(x, y, y)
           << " = " << alg.d(x, y, y) << ", d" << triple(y, y, x) << " = "
           << alg.d(y, y, x);
        return os.str();
      }
    }
  }
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (!p.same_block(alg.meet(x, y), alg.meet(y, x))) {
        std::ostringstream os;
        os << "quotient meet is not commutative at (" << x << "," << y << ")";
        return os.str();
      }
      for (int z = 0; z < n; ++z) {
        if (!p.same_block(alg.meet(alg.meet(x, y), z), alg.meet(x, alg.meet(y, z)))) {
          std::ostringstream os;
          os << "quotient meet is not associative at " << triple(x, y, z);
          return os.str();
        }
      }
    }
  }
  return std::nullopt;
}

OrderShape classify_shape(const SmbStructure& s) {
  const int b = s.block_count();
  if (b == 1) return OrderShape::malcev;
  bool linear = true;
  for (int i = 0; i < b && linear; ++i) {
    for (int j = 0; j < b && linear; ++j) {
      if (!s.block_leq(i, j) && !s.block_leq(j, i)) linear = false;
    }
  }
  if (linear) return OrderShape::linear;
  bool flat = true;
  for (int i = 0; i < b && flat; ++i) {
    for (int j = 0; j < b && flat; ++j) {
      if (i == j || i == s.least_block || j == s.least_block) continue;
      if (s.block_meet(i, j) != s.least_block) flat = false;
    }
  }
  if (flat) return OrderShape::flat;
  // Tree: comparable blocks only below any fixed block, i.e. incomparable
  // blocks have no common upper bound.
  bool tree = true;
  for (int y = 0; y < b && tree; ++y) {
    for (int z = 0; z < b && tree; ++z) {
      if (s.block_leq(y, z) || s.block_leq(z, y)) continue;
      for (int x = 0; x < b; ++x) {
        if (s.block_leq(y, x) && s.block_leq(z, x)) {
          tree = false;
          break;
        }
      }
    }
  }
  return tree ? OrderShape::tree : OrderShape::general;
}

SmbStructure build_structure(const FiniteAlgebra& alg, Partition sim) {
  SmbStructure s;
  s.sim = std::move(sim);
  s.blocks = s.sim.blocks();
  const int b = s.sim.block_count();
  s.block_meet_table.assign(static_cast<std::size_t>(b) * b, 0);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      s.block_meet_table[i * b + j] =
          s.sim.block_of(alg.meet(s.blocks[i][0], s.blocks[j][0]));
    }
  }
  int least = 0;
  for (int i = 1; i < b; ++i) least = s.block_meet(least, i);
  s.least_block = least;
  s.shape = classify_shape(s);
  s.unit = find_unit(alg);
  s.regular = is_regular(alg, s);
  return s;
}

}  // namespace

std::string order_shape_name(OrderShape s) {
  switch (s) {
    case OrderShape::malcev: return "malcev";
    case OrderShape::linear: return "linear";
    case OrderShape::flat: return "flat";
    case OrderShape::tree: return "tree";
    case OrderShape::general: return "general";
  }
  return "unknown";
}

std::optional<int> SmbStructure::greatest_block() const {
  for (int g = 0; g < block_count(); ++g) {
    bool top = true;
    for (int i = 0; i < block_count(); ++i) {
      if (!block_leq(i, g)) {
        top = false;
        break;
      }
    }
    if (top) return g;
  }
  return std::nullopt;
}

int SmbStructure::min_block(const std::vector<int>& elements) const {
  if (elements.empty()) {
    throw Error(ErrorCode::invalid_input, "min_block of an empty element list");
  }
  int m = block_of(elements[0]);
  for (std::size_t i = 1; i < elements.size(); ++i) {
    m = block_meet(m, block_of(elements[i]));
  }
  return m;
}

std::vector<int> SmbStructure::min_members(const std::vector<int>& elements) const {
  const int m = min_block(elements);
  std::vector<int> out;
  for (int x : elements) {
    if (block_of(x) == m) out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<SmbStructure> try_detect_smb(const FiniteAlgebra& alg,
                                           std::string* failure) {
  for (const Partition& p : all_congruences(alg)) {
    if (!qualifies(alg, p)) return build_structure(alg, p);
  }
  if (failure != nullptr) {
    auto why = qualifies(alg, Partition::full(alg.size()));
    *failure = "no congruence gives semilattice-of-Mal'cev-blocks structure; "
               "under the coarsest congruence: " +
               (why ? *why : std::string("unexplained"));
  }
  return std::nullopt;
}

SmbStructure detect_smb(const FiniteAlgebra& alg) {
  std::string failure;
  auto s = try_detect_smb(alg, &failure);
  if (!s) throw Error(ErrorCode::not_smb, alg.name() + ": " + failure);
  return *std::move(s);
}

std::vector<IdentityFailure> regular_identity_failures(const FiniteAlgebra& alg,
                                                       const SmbStructure& s) {
  std::vector<IdentityFailure> out;
  const int n = alg.size();
  auto add = [&out](int id, std::vector<int> args, std::string detail) {
    out.push_back(IdentityFailure{id, std::move(args), std::move(detail)});
  };
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (s.block_leq(s.block_of(a), s.block_of(b)) && alg.meet(a, b) != a) {
        std::ostringstream os;
        os << a << "&" << b << " = " << alg.meet(a, b) << " but the block of "
           << a << " lies below the block of " << b;
        add(2, {a, b}, os.str());
      }
      if (alg.meet(a, alg.meet(a, b)) != alg.meet(a, b)) {
        std::ostringstream os;
        os << a << "&(" << a << "&" << b << ") = " << alg.meet(a, alg.meet(a, b))
           << " != " << alg.meet(a, b);
        add(4, {a, b}, os.str());
      }
      const int m = alg.meet(a, b);
      if (alg.d(b, b, a) != m || alg.d(a, b, b) != m) {
        std::ostringstream os;
        os << a << "&" << b << " = " << m << " but d" << triple(b, b, a) << " = "
           << alg.d(b, b, a) << ", d" << triple(a, b, b) << " = " << alg.d(a, b, b);
        add(5, {a, b}, os.str());
      }
      for (int c = 0; c < n; ++c) {
        const int target =
            s.block_meet(s.block_meet(s.block_of(a), s.block_of(b)), s.block_of(c));
        if (s.block_of(alg.d(a, b, c)) != target) {
          std::ostringstream os;
          os << "d" << triple(a, b, c) << " = " << alg.d(a, b, c)
             << " lies outside the block of (" << a << "&" << b << ")&" << c;
          add(1, {a, b, c}, os.str());
        }
        const int u = alg.meet(a, alg.meet(c, b));
        const int v = alg.meet(b, alg.meet(c, a));
        const int w = alg.meet(c, alg.meet(b, a));
        if (alg.d(a, b, c) != alg.d(u, v, w)) {
          std::ostringstream os;
          os << "d" << triple(a, b, c) << " = " << alg.d(a, b, c) << " != d"
             << triple(u, v, w) << " = " << alg.d(u, v, w);
          add(3, {a, b, c}, os.str());
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const IdentityFailure& x, const IdentityFailure& y) {
    if (x.identity != y.identity) return x.identity < y.identity;
    return x.args < y.args;
  });
  return out;
}

bool is_regular(const FiniteAlgebra& alg, const SmbStructure& s) {
  return regular_identity_failures(alg, s).empty();
}

RegularizationResult regularize(const FiniteAlgebra& alg) {
  return regularize(alg, detect_smb(alg));
}

RegularizationResult regularize(const FiniteAlgebra& alg, const SmbStructure& s) {
  const int n = alg.size();
  std::vector<int> meet2(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x) {
    std::vector<int> ex(n);
    for (int y = 0; y < n; ++y) ex[y] = alg.meet(x, y);
    std::vector<int> hx = idempotent_power(ex);
    for (int y = 0; y < n; ++y) meet2[x * n + y] = hx[y];
  }
  auto m2 = [&meet2, n](int x, int y) { return meet2[x * n + y]; };

  std::vector<int> dcur = alg.d_table();
  auto dc = [&dcur, n](int x, int y, int z) { return dcur[(x * n + y) * n + z]; };
  constexpr int kMaxRounds = 8;
  bool fixed = false;
  for (int round = 0; round < kMaxRounds && !fixed; ++round) {
    std::vector<int> dnext(dcur.size());
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        for (int z = 0; z < n; ++z) {
          dnext[(x * n + y) * n + z] =
              dc(m2(x, m2(z, y)), m2(y, m2(z, x)), m2(z, m2(y, x)));
        }
      }
    }
    fixed = dnext == dcur;
    dcur = std::move(dnext);
  }
  if (!fixed) {
    throw Error(ErrorCode::regularization_failed,
                alg.name() + ": argument substitution did not reach a fixpoint");
  }

  RegularizationResult res;
  auto out = std::make_shared<FiniteAlgebra>(alg.name(), n, std::move(meet2),
                                             std::move(dcur));
  res.changed = !out->same_tables(alg);
  res.structure = detect_smb(*out);
  if (res.structure.sim != s.sim) {
    throw Error(ErrorCode::internal,
                alg.name() + ": block congruence changed under regularization");
  }
  if (!res.structure.regular) {
    const auto failures = regular_identity_failures(*out, res.structure);
    std::ostringstream os;
    os << alg.name() << ": result violates identity";
    if (!failures.empty()) os << " " << failures[0].identity << ": " << failures[0].detail;
    throw Error(ErrorCode::regularization_failed, os.str());
  }
  res.algebra = std::move(out);
  return res;
}

Partition least_block_collapse(const FiniteAlgebra& alg, const SmbStructure& s) {
  std::vector<std::vector<int>> blocks;
  blocks.push_back(s.blocks[s.least_block]);
  for (int x = 0; x < alg.size(); ++x) {
    if (s.block_of(x) != s.least_block) blocks.push_back({x});
  }
  Partition p = Partition::from_blocks(alg.size(), blocks);
  if (!is_congruence(alg, p)) {
    throw Error(ErrorCode::precondition,
                alg.name() + ": collapsing the least block is not compatible "
                             "with the operations");
  }
  return p;
}

std::optional<int> find_unit(const FiniteAlgebra& alg) {
  for (int u = 0; u < alg.size(); ++u) {
    bool ok = true;
    for (int x = 0; x < alg.size(); ++x) {
      if (alg.meet(u, x) != x) {
        ok = false;
        break;
      }
    }
    if (ok) return u;
  }
  return std::nullopt;
}

}  // namespace smbcsp
