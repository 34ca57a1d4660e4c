#include "phif/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace phif {

IndexSet::IndexSet(std::initializer_list<Index> ids) : IndexSet(from_sorted(std::vector<Index>(ids))) {}

IndexSet IndexSet::from_sorted(std::vector<Index> ids) {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0)
      throw InvalidArgument("IndexSet: negative index");
    if (k > 0 && ids[k] <= ids[k - 1])
      throw InvalidArgument("IndexSet: indices must be strictly increasing");
  }
  IndexSet s;
  s.ids_ = std::move(ids);
  return s;
}

IndexSet IndexSet::from_unsorted(std::vector<Index> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return from_sorted(std::move(ids));
}

IndexSet IndexSet::range(Index n) {
  IndexSet s;
  s.ids_.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    s.ids_[static_cast<std::size_t>(i)] = i;
  return s;
}

bool IndexSet::contains(Index i) const { return std::binary_search(ids_.begin(), ids_.end(), i); }

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  std::vector<Index> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_sorted(std::move(out));
}

IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
  std::vector<Index> out;
  out.reserve(a.size());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_sorted(std::move(out));
}

IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  std::vector<Index> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_sorted(std::move(out));
}

// ---------------------------------------------------------------------------

SymSparse::SymSparse(Index dim) : dim_(dim), row_ptr_(static_cast<std::size_t>(dim) + 1, 0) {
  if (dim < 0)
    throw InvalidArgument("SymSparse: negative dimension");
}

SymSparse SymSparse::identity(Index dim) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(dim));
  for (Index i = 0; i < dim; ++i)
    t.push_back({i, i, 1.0});
  return assemble(dim, t);
}

double SymSparse::coeff(Index i, Index j) const {
  if (i < 0 || i >= dim_ || j < 0 || j >= dim_)
    throw InvalidArgument("SymSparse::coeff: index out of range");
  auto cols = row_cols(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j)
    return 0.0;
  return row_vals(i)[static_cast<std::size_t>(it - cols.begin())];
}

DenseBlock SymSparse::to_dense() const {
  DenseBlock D = DenseBlock::Zero(dim_, dim_);
  for (Index i = 0; i < dim_; ++i) {
    auto c = row_cols(i);
    auto v = row_vals(i);
    for (std::size_t k = 0; k < c.size(); ++k)
      D(i, c[k]) = v[k];
  }
  return D;
}

IndexSet SymSparse::nonempty_rows() const {
  std::vector<Index> ids;
  for (Index i = 0; i < dim_; ++i)
    if (row_nnz(i) > 0)
      ids.push_back(i);
  return IndexSet::from_sorted(std::move(ids));
}

double SymSparse::max_asymmetry() const {
  double worst = 0.0;
  for (Index i = 0; i < dim_; ++i) {
    auto c = row_cols(i);
    auto v = row_vals(i);
    for (std::size_t k = 0; k < c.size(); ++k)
      worst = std::max(worst, std::abs(v[k] - coeff(c[k], i)));
  }
  return worst;
}

SymSparse assemble(Index dim, std::span<const Triplet> triplets) {
  if (dim < 0)
    throw InvalidArgument("assemble: negative dimension");
  std::vector<Triplet> t(triplets.begin(), triplets.end());
  for (const auto& e : t)
    if (e.row < 0 || e.row >= dim || e.col < 0 || e.col >= dim)
      throw InvalidArgument("assemble: index (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                            ") out of range for dim " + std::to_string(dim));

  auto by_pos = [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  };
  std::stable_sort(t.begin(), t.end(), by_pos);

  // Sum duplicates in input order.
  std::vector<Triplet> summed;
  summed.reserve(t.size());
  for (const auto& e : t) {
    if (!summed.empty() && summed.back().row == e.row && summed.back().col == e.col)
      summed.back().value += e.value;
    else
      summed.push_back(e);
  }

  auto find = [&](Index r, Index c) -> const Triplet* {
    Triplet key{r, c, 0.0};
    auto it = std::lower_bound(summed.begin(), summed.end(), key, by_pos);
    if (it != summed.end() && it->row == r && it->col == c)
      return &*it;
    return nullptr;
  };

  std::vector<Triplet> full;
  full.reserve(2 * summed.size());
  for (const auto& e : summed) {
    if (e.row == e.col) {
      full.push_back(e);
      continue;
    }
    const Triplet* mirror = find(e.col, e.row);
    if (mirror == nullptr) {
      full.push_back(e);
      full.push_back({e.col, e.row, e.value});
    } else {
      if (mirror->value != e.value)
        throw InvalidArgument("assemble: entries (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                              ") and its transpose differ");
      full.push_back(e);
    }
  }
  std::sort(full.begin(), full.end(), by_pos);

  SymSparse A(dim);
  A.cols_.reserve(full.size());
  A.vals_.reserve(full.size());
  std::vector<std::int64_t> counts(static_cast<std::size_t>(dim) + 1, 0);
  for (const auto& e : full) {
    if (e.value == 0.0)
      continue;
    A.cols_.push_back(e.col);
    A.vals_.push_back(e.value);
    ++counts[static_cast<std::size_t>(e.row) + 1];
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(dim); ++i)
    counts[i + 1] += counts[i];
  A.row_ptr_ = std::move(counts);
  return A;
}

void spmv_into(const SymSparse& A, const Vector& x, Vector& y) {
  if (x.size() != A.dim() || y.size() != A.dim())
    throw InvalidArgument("spmv: dimension mismatch");
  for (Index i = 0; i < A.dim(); ++i) {
    auto c = A.row_cols(i);
    auto v = A.row_vals(i);
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k)
      s += v[k] * x[c[k]];
    y[i] = s;
  }
}

Vector spmv(const SymSparse& A, const Vector& x) {
  if (x.size() != A.dim())
    throw InvalidArgument("spmv: dimension mismatch");
  Vector y(A.dim());
  spmv_into(A, x, y);
  return y;
}

DenseBlock extract_block(const SymSparse& A, const IndexSet& rows, const IndexSet& cols) {
  if ((!rows.empty() && rows.back() >= A.dim()) || (!cols.empty() && cols.back() >= A.dim()))
    throw InvalidArgument("extract_block: index out of range");
  DenseBlock B = DenseBlock::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t p = 0; p < rows.size(); ++p) {
    auto rc = A.row_cols(rows[p]);
    auto rv = A.row_vals(rows[p]);
    // Merge-walk the sorted row against the sorted column set.
    std::size_t q = 0;
    for (std::size_t k = 0; k < rc.size() && q < cols.size(); ++k) {
      while (q < cols.size() && cols[q] < rc[k])
        ++q;
      if (q < cols.size() && cols[q] == rc[k])
        B(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = rv[k];
    }
  }
  return B;
}

IndexSet interacting_dofs(const SymSparse& A, const IndexSet& I, const IndexSet& within) {
  if (!I.empty() && I.back() >= A.dim())
    throw InvalidArgument("interacting_dofs: index out of range");
  std::vector<Index> out;
  for (Index i : I)
    for (Index j : A.row_cols(i))
      out.push_back(j);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  std::vector<Index> kept;
  kept.reserve(out.size());
  for (Index j : out)
    if (!I.contains(j) && within.contains(j))
      kept.push_back(j);
  return IndexSet::from_sorted(std::move(kept));
}

IndexSet interacting_dofs(const SymSparse& A, const IndexSet& I) {
  if (!I.empty() && I.back() >= A.dim())
    throw InvalidArgument("interacting_dofs: index out of range");
  std::vector<Index> out;
  for (Index i : I)
    for (Index j : A.row_cols(i))
      if (!I.contains(j))
        out.push_back(j);
  return IndexSet::from_unsorted(std::move(out));
}

// ---------------------------------------------------------------------------

SymSparseBuilder::SymSparseBuilder(const SymSparse& base)
    : base_(base), dropped_(static_cast<std::size_t>(base.dim()), 0) {}

void SymSparseBuilder::drop(const IndexSet& dofs) {
  for (Index i : dofs)
    dropped_[static_cast<std::size_t>(i)] = 1;
}

namespace {

// Row-bucketed list of (block, local row) pairs.
struct RowIndex {
  std::vector<std::int64_t> ptr;
  std::vector<std::pair<std::int32_t, std::int32_t>> entries;

  RowIndex(Index dim, const std::vector<BlockUpdate>& blocks) : ptr(static_cast<std::size_t>(dim) + 1, 0) {
    for (const auto& b : blocks) {
      if (b.values.rows() != static_cast<Eigen::Index>(b.rows.size()) ||
          b.values.cols() != static_cast<Eigen::Index>(b.cols.size()))
        throw InvalidArgument("SymSparseBuilder: block shape does not match its index sets");
      if ((!b.rows.empty() && b.rows.back() >= dim) || (!b.cols.empty() && b.cols.back() >= dim))
        throw InvalidArgument("SymSparseBuilder: block index out of range");
      for (Index r : b.rows)
        ++ptr[static_cast<std::size_t>(r) + 1];
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(dim); ++i)
      ptr[i + 1] += ptr[i];
    entries.resize(static_cast<std::size_t>(ptr.back()));
    std::vector<std::int64_t> fill(ptr.begin(), ptr.end() - 1);
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (std::size_t r = 0; r < blocks[b].rows.size(); ++r) {
        auto row = static_cast<std::size_t>(blocks[b].rows[r]);
        entries[static_cast<std::size_t>(fill[row]++)] = {static_cast<std::int32_t>(b), static_cast<std::int32_t>(r)};
      }
  }
};

} // namespace

SymSparse SymSparseBuilder::build() const {
  const Index n = base_.dim();
  RowIndex add_rows(n, adds_);
  RowIndex set_rows(n, sets_);

  SymSparse out(n);
  out.cols_.reserve(static_cast<std::size_t>(base_.nnz()));
  out.vals_.reserve(static_cast<std::size_t>(base_.nnz()));

  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  std::vector<Index> stamp(static_cast<std::size_t>(n), -1);
  std::vector<Index> pattern;

  auto touch = [&](Index j, Index row) {
    if (stamp[static_cast<std::size_t>(j)] != row) {
      stamp[static_cast<std::size_t>(j)] = row;
      acc[static_cast<std::size_t>(j)] = 0.0;
      pattern.push_back(j);
    }
  };

  for (Index i = 0; i < n; ++i) {
    pattern.clear();
    if (!dropped_[static_cast<std::size_t>(i)]) {
      if (keep_base_) {
        auto c = base_.row_cols(i);
        auto v = base_.row_vals(i);
        for (std::size_t k = 0; k < c.size(); ++k) {
          if (dropped_[static_cast<std::size_t>(c[k])])
            continue;
          touch(c[k], i);
          acc[static_cast<std::size_t>(c[k])] = v[k];
        }
      }
      for (auto p = add_rows.ptr[i]; p < add_rows.ptr[i + 1]; ++p) {
        auto [b, r] = add_rows.entries[static_cast<std::size_t>(p)];
        const auto& blk = adds_[static_cast<std::size_t>(b)];
        for (std::size_t c = 0; c < blk.cols.size(); ++c) {
          Index j = blk.cols[c];
          if (dropped_[static_cast<std::size_t>(j)])
            continue;
          touch(j, i);
          acc[static_cast<std::size_t>(j)] += blk.values(r, static_cast<Eigen::Index>(c));
        }
      }
      for (auto p = set_rows.ptr[i]; p < set_rows.ptr[i + 1]; ++p) {
        auto [b, r] = set_rows.entries[static_cast<std::size_t>(p)];
        const auto& blk = sets_[static_cast<std::size_t>(b)];
        for (std::size_t c = 0; c < blk.cols.size(); ++c) {
          Index j = blk.cols[c];
          if (dropped_[static_cast<std::size_t>(j)])
            continue;
          touch(j, i);
          acc[static_cast<std::size_t>(j)] = blk.values(r, static_cast<Eigen::Index>(c));
        }
      }
      std::sort(pattern.begin(), pattern.end());
      for (Index j : pattern) {
        double v = acc[static_cast<std::size_t>(j)];
        if (v != 0.0) {
          out.cols_.push_back(j);
          out.vals_.push_back(v);
        }
      }
    }
    out.row_ptr_[static_cast<std::size_t>(i) + 1] = static_cast<std::int64_t>(out.cols_.size());
  }
  out.cols_.shrink_to_fit();
  out.vals_.shrink_to_fit();
  return out;
}

} // namespace phif
