#include "phif/factor.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace phif {

namespace {

Vector gather(const Vector& x, const IndexSet& s) {
  Vector out(static_cast<Eigen::Index>(s.size()));
  for (std::size_t k = 0; k < s.size(); ++k)
    out[static_cast<Eigen::Index>(k)] = x[s[k]];
  return out;
}

void scatter(Vector& x, const IndexSet& s, const Vector& v) {
  for (std::size_t k = 0; k < s.size(); ++k)
    x[s[k]] = v[static_cast<Eigen::Index>(k)];
}

const auto lower(const LowerTriangular<double>& L) { return L.L.triangularView<Eigen::Lower>(); }

std::int64_t tri(const LowerTriangular<double>& L) { return L.stored_entries(); }

DenseBlock symmetric_from_lower(const DenseBlock& S) { return S.selfadjointView<Eigen::Lower>(); }

} // namespace

// ---------------------------------------------------------------------------
// Elimination: M = [[L^{-T}, -W], [0, I]] on (I, B).

void EliminationFactor::apply(Vector& x) const {
  Vector xi = gather(x, target);
  lower(L).transpose().solveInPlace(xi);
  if (!boundary.empty())
    xi.noalias() -= coupling * gather(x, boundary);
  scatter(x, target, xi);
}

void EliminationFactor::apply_transpose(Vector& x) const {
  Vector xi = gather(x, target);
  if (!boundary.empty()) {
    Vector xb = gather(x, boundary);
    xb.noalias() -= coupling.transpose() * xi;
    scatter(x, boundary, xb);
  }
  lower(L).solveInPlace(xi);
  scatter(x, target, xi);
}

void EliminationFactor::apply_inverse(Vector& x) const {
  Vector xi = gather(x, target);
  if (!boundary.empty())
    xi.noalias() += coupling * gather(x, boundary);
  xi = lower(L).transpose() * xi;
  scatter(x, target, xi);
}

void EliminationFactor::apply_inverse_transpose(Vector& x) const {
  Vector xi = gather(x, target);
  xi = lower(L) * xi;
  scatter(x, target, xi);
  if (!boundary.empty()) {
    Vector xb = gather(x, boundary);
    xb.noalias() += coupling.transpose() * xi;
    scatter(x, boundary, xb);
  }
}

std::int64_t EliminationFactor::float_entries() const { return tri(L) + coupling.size(); }
std::int64_t EliminationFactor::index_entries() const {
  return static_cast<std::int64_t>(target.size() + boundary.size());
}

// ---------------------------------------------------------------------------

void JacobiFactor::apply(Vector& x) const {
  Vector v = gather(x, target);
  lower(L).transpose().solveInPlace(v);
  scatter(x, target, v);
}

void JacobiFactor::apply_transpose(Vector& x) const {
  Vector v = gather(x, target);
  lower(L).solveInPlace(v);
  scatter(x, target, v);
}

void JacobiFactor::apply_inverse(Vector& x) const {
  Vector v = gather(x, target);
  v = lower(L).transpose() * v;
  scatter(x, target, v);
}

void JacobiFactor::apply_inverse_transpose(Vector& x) const {
  Vector v = gather(x, target);
  v = lower(L) * v;
  scatter(x, target, v);
}

std::int64_t JacobiFactor::float_entries() const { return tri(L); }
std::int64_t JacobiFactor::index_entries() const { return static_cast<std::int64_t>(target.size()); }

// ---------------------------------------------------------------------------
// Skeletonization: K = Z M, Z has -T in the (skeleton, redundant) block,
// M = [[L^{-T}, W], [0, I]] on (redundant, skeleton).

void SkelFactor::apply(Vector& x) const {
  Vector xr = gather(x, redundant);
  Vector xs = gather(x, skeleton);
  lower(L).transpose().solveInPlace(xr);
  if (!skeleton.empty()) {
    xr.noalias() += coupling * xs;
    xs.noalias() -= T * xr;
    scatter(x, skeleton, xs);
  }
  scatter(x, redundant, xr);
}

void SkelFactor::apply_transpose(Vector& x) const {
  Vector xr = gather(x, redundant);
  Vector xs = gather(x, skeleton);
  if (!skeleton.empty()) {
    xr.noalias() -= T.transpose() * xs;
    xs.noalias() += coupling.transpose() * xr;
    scatter(x, skeleton, xs);
  }
  lower(L).solveInPlace(xr);
  scatter(x, redundant, xr);
}

void SkelFactor::apply_inverse(Vector& x) const {
  Vector xr = gather(x, redundant);
  Vector xs = gather(x, skeleton);
  if (!skeleton.empty()) {
    xs.noalias() += T * xr;
    xr.noalias() -= coupling * xs;
    scatter(x, skeleton, xs);
  }
  xr = lower(L).transpose() * xr;
  scatter(x, redundant, xr);
}

void SkelFactor::apply_inverse_transpose(Vector& x) const {
  Vector xr = gather(x, redundant);
  Vector xs = gather(x, skeleton);
  xr = lower(L) * xr;
  if (!skeleton.empty()) {
    xs.noalias() -= coupling.transpose() * xr;
    xr.noalias() += T.transpose() * xs;
    scatter(x, skeleton, xs);
  }
  scatter(x, redundant, xr);
}

std::int64_t SkelFactor::float_entries() const { return T.size() + tri(L) + coupling.size(); }
std::int64_t SkelFactor::index_entries() const {
  return static_cast<std::int64_t>(skeleton.size() + redundant.size());
}

// ---------------------------------------------------------------------------

Vector PhifFactor::apply_inverse(const Vector& b) const {
  if (b.size() != dim_)
    throw InvalidArgument("PhifFactor::apply_inverse: dimension mismatch");
  Vector x = b;
  for (const auto& lev : levels_) {
    for (const auto& f : lev.eliminations)
      f.apply_transpose(x);
    for (const auto& f : lev.jacobis)
      f.apply_transpose(x);
    for (const auto& f : lev.skels)
      f.apply_transpose(x);
  }
  if (!root_dofs_.empty()) {
    Vector r = gather(x, root_dofs_);
    lower(root_).solveInPlace(r);
    lower(root_).transpose().solveInPlace(r);
    scatter(x, root_dofs_, r);
  }
  for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
    for (const auto& f : it->skels)
      f.apply(x);
    for (const auto& f : it->jacobis)
      f.apply(x);
    for (const auto& f : it->eliminations)
      f.apply(x);
  }
  return x;
}

Vector PhifFactor::apply(const Vector& v) const {
  if (v.size() != dim_)
    throw InvalidArgument("PhifFactor::apply: dimension mismatch");
  Vector x = v;
  for (const auto& lev : levels_) {
    for (const auto& f : lev.eliminations)
      f.apply_inverse(x);
    for (const auto& f : lev.jacobis)
      f.apply_inverse(x);
    for (const auto& f : lev.skels)
      f.apply_inverse(x);
  }
  if (!root_dofs_.empty()) {
    Vector r = gather(x, root_dofs_);
    r = lower(root_).transpose() * r;
    r = lower(root_) * r;
    scatter(x, root_dofs_, r);
  }
  for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
    for (const auto& f : it->skels)
      f.apply_inverse_transpose(x);
    for (const auto& f : it->jacobis)
      f.apply_inverse_transpose(x);
    for (const auto& f : it->eliminations)
      f.apply_inverse_transpose(x);
  }
  return x;
}

std::vector<LevelMemory> PhifFactor::memory_breakdown() const {
  std::vector<LevelMemory> out;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    LevelMemory m;
    m.level = static_cast<int>(l);
    for (const auto& f : levels_[l].eliminations) {
      m.float_entries += f.float_entries();
      m.index_entries += f.index_entries();
    }
    for (const auto& f : levels_[l].jacobis) {
      m.float_entries += f.float_entries();
      m.index_entries += f.index_entries();
    }
    for (const auto& f : levels_[l].skels) {
      m.float_entries += f.float_entries();
      m.index_entries += f.index_entries();
    }
    out.push_back(m);
  }
  LevelMemory root;
  root.level = depth();
  root.float_entries = tri(root_);
  root.index_entries = static_cast<std::int64_t>(root_dofs_.size());
  out.push_back(root);
  return out;
}

std::int64_t PhifFactor::stored_float_entries() const {
  std::int64_t total = 0;
  for (const auto& m : memory_breakdown())
    total += m.float_entries;
  return total;
}

std::int64_t PhifFactor::memory_bytes() const {
  std::int64_t total = 0;
  for (const auto& m : memory_breakdown())
    total += m.bytes();
  return total;
}

Index PhifFactor::decoupled_count() const {
  std::int64_t n = static_cast<std::int64_t>(root_dofs_.size());
  for (const auto& lev : levels_) {
    for (const auto& f : lev.eliminations)
      n += static_cast<std::int64_t>(f.target.size());
    for (const auto& f : lev.skels)
      n += static_cast<std::int64_t>(f.redundant.size());
  }
  return static_cast<Index>(n);
}

// ---------------------------------------------------------------------------
// Binary format, little-endian throughout:
//   "PHIFFACT" | u32 version | i64 dim | f64 eps | u32 depth
//   per level: u64 counts, then each factor's index sets and dense blocks
//   root index set | root factor
// Index sets are u64 length + i32 entries; dense blocks are i64 rows, i64 cols + f64 column-major.

namespace {

constexpr char kMagic[8] = {'P', 'H', 'I', 'F', 'F', 'A', 'C', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T byteswap_if_needed(T v) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  v = byteswap_if_needed(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is)
    throw InvalidArgument("PhifFactor::load: truncated stream");
  return byteswap_if_needed(v);
}

void put_set(std::ostream& os, const IndexSet& s) {
  put<std::uint64_t>(os, s.size());
  for (Index i : s)
    put<std::int32_t>(os, i);
}

IndexSet get_set(std::istream& is) {
  auto n = get<std::uint64_t>(is);
  std::vector<Index> ids(n);
  for (auto& i : ids)
    i = get<std::int32_t>(is);
  return IndexSet::from_sorted(std::move(ids));
}

void put_block(std::ostream& os, const DenseBlock& B) {
  put<std::int64_t>(os, B.rows());
  put<std::int64_t>(os, B.cols());
  for (Eigen::Index k = 0; k < B.size(); ++k)
    put<double>(os, B.data()[k]);
}

DenseBlock get_block(std::istream& is) {
  auto r = get<std::int64_t>(is);
  auto c = get<std::int64_t>(is);
  if (r < 0 || c < 0)
    throw InvalidArgument("PhifFactor::load: bad block shape");
  DenseBlock B(r, c);
  for (Eigen::Index k = 0; k < B.size(); ++k)
    B.data()[k] = get<double>(is);
  return B;
}

} // namespace

void PhifFactor::save(std::ostream& os) const {
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::int64_t>(os, dim_);
  put<double>(os, eps_);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(levels_.size()));
  for (const auto& lev : levels_) {
    put<std::uint64_t>(os, lev.eliminations.size());
    for (const auto& f : lev.eliminations) {
      put_set(os, f.target);
      put_set(os, f.boundary);
      put_block(os, f.L.L);
      put_block(os, f.coupling);
    }
    put<std::uint64_t>(os, lev.jacobis.size());
    for (const auto& f : lev.jacobis) {
      put_set(os, f.target);
      put_block(os, f.L.L);
    }
    put<std::uint64_t>(os, lev.skels.size());
    for (const auto& f : lev.skels) {
      put_set(os, f.skeleton);
      put_set(os, f.redundant);
      put_block(os, f.T);
      put_block(os, f.L.L);
      put_block(os, f.coupling);
    }
  }
  put_set(os, root_dofs_);
  put_block(os, root_.L);
  if (!os)
    throw InvalidArgument("PhifFactor::save: write failed");
}

PhifFactor PhifFactor::load(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw InvalidArgument("PhifFactor::load: not a factor file");
  if (get<std::uint32_t>(is) != kVersion)
    throw InvalidArgument("PhifFactor::load: unsupported version");
  PhifFactor F;
  F.dim_ = static_cast<Index>(get<std::int64_t>(is));
  F.eps_ = get<double>(is);
  auto depth = get<std::uint32_t>(is);
  for (std::uint32_t l = 0; l < depth; ++l) {
    LevelFactors lev;
    auto ne = get<std::uint64_t>(is);
    for (std::uint64_t k = 0; k < ne; ++k) {
      EliminationFactor f;
      f.target = get_set(is);
      f.boundary = get_set(is);
      f.L.L = get_block(is);
      f.coupling = get_block(is);
      lev.eliminations.push_back(std::move(f));
    }
    auto nj = get<std::uint64_t>(is);
    for (std::uint64_t k = 0; k < nj; ++k) {
      JacobiFactor f;
      f.target = get_set(is);
      f.L.L = get_block(is);
      lev.jacobis.push_back(std::move(f));
    }
    auto ns = get<std::uint64_t>(is);
    for (std::uint64_t k = 0; k < ns; ++k) {
      SkelFactor f;
      f.skeleton = get_set(is);
      f.redundant = get_set(is);
      f.T = get_block(is);
      f.L.L = get_block(is);
      f.coupling = get_block(is);
      lev.skels.push_back(std::move(f));
    }
    F.levels_.push_back(std::move(lev));
  }
  F.root_dofs_ = get_set(is);
  F.root_.L = get_block(is);
  return F;
}

// ---------------------------------------------------------------------------

EliminationResult eliminate_cells(const SymSparse& A, const std::vector<IndexSet>& interiors) {
  std::vector<char> interior(static_cast<std::size_t>(A.dim()), 0);
  for (const auto& I : interiors)
    for (Index i : I) {
      if (i >= A.dim())
        throw InvalidArgument("eliminate_cells: index out of range");
      if (interior[static_cast<std::size_t>(i)])
        throw InvalidArgument("eliminate_cells: cell interiors overlap");
      interior[static_cast<std::size_t>(i)] = 1;
    }

  EliminationResult out;
  SymSparseBuilder builder(A);
  for (std::size_t g = 0; g < interiors.size(); ++g) {
    const IndexSet& I = interiors[g];
    if (I.empty())
      continue;
    IndexSet B = interacting_dofs(A, I);
    for (Index b : B)
      if (interior[static_cast<std::size_t>(b)])
        throw InvalidArgument("eliminate_cells: interiors " + std::to_string(g) + " and another cell interact");

    EliminationFactor f;
    try {
      f.L = cholesky(extract_block(A, I, I));
    } catch (const SpdError& e) {
      throw SpdError(std::string("eliminate_cells: cell ") + std::to_string(g) + ": " + e.what(), e.pivot(), -1,
                     static_cast<long>(g));
    }
    DenseBlock V = extract_block(A, B, I).transpose();
    lower(f.L).solveInPlace(V);
    DenseBlock W = V;
    lower(f.L).transpose().solveInPlace(W);

    DenseBlock S = DenseBlock::Zero(V.cols(), V.cols());
    S.selfadjointView<Eigen::Lower>().rankUpdate(V.transpose(), -1.0);
    builder.add({B, B, symmetric_from_lower(S)});
    builder.drop(I);

    f.target = I;
    f.boundary = std::move(B);
    f.coupling = std::move(W);
    out.factors.push_back(std::move(f));
  }
  out.reduced = builder.build();
  return out;
}

JacobiResult jacobi_rescale(const SymSparse& A, const std::vector<IndexSet>& groups) {
  std::vector<Index> group_of(static_cast<std::size_t>(A.dim()), -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (Index i : groups[g]) {
      if (i >= A.dim())
        throw InvalidArgument("jacobi_rescale: index out of range");
      if (group_of[static_cast<std::size_t>(i)] >= 0)
        throw InvalidArgument("jacobi_rescale: groups overlap");
      group_of[static_cast<std::size_t>(i)] = static_cast<Index>(g);
    }

  JacobiResult out;
  out.factors.resize(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.factors[g].target = groups[g];
    try {
      out.factors[g].L = cholesky(extract_block(A, groups[g], groups[g]));
    } catch (const SpdError& e) {
      throw SpdError(std::string("jacobi_rescale: group ") + std::to_string(g) + ": " + e.what(), e.pivot(), -1,
                     static_cast<long>(g));
    }
  }

  SymSparseBuilder builder(A);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const IndexSet& G = groups[g];
    if (G.empty())
      continue;
    const auto& LG = out.factors[g].L;
    builder.set({G, G, DenseBlock::Identity(static_cast<Eigen::Index>(G.size()), static_cast<Eigen::Index>(G.size()))});

    std::vector<Index> ungrouped;
    std::vector<Index> neighbours;
    for (Index j : interacting_dofs(A, G)) {
      Index h = group_of[static_cast<std::size_t>(j)];
      if (h < 0)
        ungrouped.push_back(j);
      else if (h > static_cast<Index>(g))
        neighbours.push_back(h);
    }
    std::sort(neighbours.begin(), neighbours.end());
    neighbours.erase(std::unique(neighbours.begin(), neighbours.end()), neighbours.end());

    if (!ungrouped.empty()) {
      IndexSet U = IndexSet::from_sorted(std::move(ungrouped));
      DenseBlock X = tri_solve(LG, extract_block(A, G, U));
      DenseBlock Xt = X.transpose();
      builder.set({G, U, std::move(X)});
      builder.set({U, G, std::move(Xt)});
    }
    for (Index h : neighbours) {
      const IndexSet& H = groups[static_cast<std::size_t>(h)];
      DenseBlock X = tri_solve(LG, extract_block(A, G, H));
      X = tri_solve(out.factors[static_cast<std::size_t>(h)].L, X, true, Side::Right);
      DenseBlock Xt = X.transpose();
      builder.set({G, H, std::move(X)});
      builder.set({H, G, std::move(Xt)});
    }
  }
  out.rescaled = builder.build();

  // Empty groups carry no factor.
  std::erase_if(out.factors, [](const JacobiFactor& f) { return f.target.empty(); });
  return out;
}

SkeletonResult skeletonize_edges(const SymSparse& A, const std::vector<IndexSet>& edges, double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw InvalidArgument("skeletonize_edges: eps must lie in (0, 1)");
  SkeletonResult out;
  SymSparseBuilder builder(A);
  for (std::size_t g = 0; g < edges.size(); ++g) {
    const IndexSet& E = edges[g];
    if (E.empty())
      continue;
    const DenseBlock D = extract_block(A, E, E);
    if ((D - DenseBlock::Identity(D.rows(), D.cols())).cwiseAbs().maxCoeff() > 1e-10)
      throw InvalidArgument("skeletonize_edges: group " + std::to_string(g) + " does not have an identity diagonal block");

    const IndexSet R = interacting_dofs(A, E);
    const auto id = interpolative_decomposition(extract_block(A, R, E), eps);
    if (id.redundant.empty())
      continue;

    SkelFactor f;
    std::vector<Index> skel, red;
    for (Index k : id.skeleton)
      skel.push_back(E[static_cast<std::size_t>(k)]);
    for (Index k : id.redundant)
      red.push_back(E[static_cast<std::size_t>(k)]);
    f.skeleton = IndexSet::from_sorted(std::move(skel));
    f.redundant = IndexSet::from_sorted(std::move(red));
    f.T = id.T;

    const auto nr = static_cast<Eigen::Index>(f.redundant.size());
    const auto ns = static_cast<Eigen::Index>(f.skeleton.size());
    DenseBlock G = DenseBlock::Identity(nr, nr);
    G.noalias() += f.T.transpose() * f.T;
    // Exact symmetry for the Cholesky input.
    G = symmetric_from_lower(G);
    f.L = cholesky(G);
    DenseBlock V = f.T.transpose();
    lower(f.L).solveInPlace(V);
    f.coupling = V;
    lower(f.L).transpose().solveInPlace(f.coupling);

    if (ns > 0) {
      DenseBlock X = DenseBlock::Identity(ns, ns);
      X.selfadjointView<Eigen::Lower>().rankUpdate(V.transpose(), -1.0);
      builder.set({f.skeleton, f.skeleton, symmetric_from_lower(X)});
    }
    builder.drop(f.redundant);
    out.factors.push_back(std::move(f));
  }
  out.reduced = builder.build();
  return out;
}

PhifFactor factorize(const SymSparse& A, const DofHierarchy& h, double eps, std::vector<LevelTrace>* trace) {
  if (A.dim() != h.grid().num_dofs())
    throw InvalidArgument("factorize: matrix does not match the hierarchy");
  if (!(eps > 0.0 && eps < 1.0))
    throw InvalidArgument("factorize: eps must lie in (0, 1)");
  PhifFactor F(A.dim(), eps);
  ActiveSet active(A.dim());
  SymSparse current = A;
  const int dim = h.grid().dim;

  for (int l = 0; l < h.depth(); ++l) {
    try {
      const ActiveGroups groups = active_groups(h, l, active);
      LevelFactors lev;

      EliminationResult el = eliminate_cells(current, groups.interiors);
      for (const auto& f : el.factors)
        active.decouple(f.target);
      lev.eliminations = std::move(el.factors);

      JacobiResult jr = jacobi_rescale(el.reduced, groups.rescale_groups());
      lev.jacobis = std::move(jr.factors);
      if (trace)
        trace->push_back({std::move(current), std::move(el.reduced), SymSparse{}});
      else
        el.reduced = SymSparse{};

      SkeletonResult sk = skeletonize_edges(jr.rescaled, groups.skeleton_groups(dim), eps);
      for (const auto& f : sk.factors)
        active.decouple(f.redundant);
      lev.skels = std::move(sk.factors);
      if (trace)
        trace->back().rescaled = std::move(jr.rescaled);

      current = std::move(sk.reduced);
      F.push_level(std::move(lev));
    } catch (const SpdError& e) {
      throw SpdError(std::string("factorize: level ") + std::to_string(l) + ": " + e.what(), e.pivot(), l, e.group());
    }
  }

  IndexSet root = active.to_index_set();
  LowerTriangular<double> L;
  try {
    L = cholesky(extract_block(current, root, root));
  } catch (const SpdError& e) {
    throw SpdError(std::string("factorize: root: ") + e.what(), e.pivot(), h.depth(), -1);
  }
  F.set_root(std::move(root), std::move(L));
  return F;
}

} // namespace phif
