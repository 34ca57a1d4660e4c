#include "phif/hierarchy.hpp"

#include <array>
#include <map>
#include <ostream>

namespace phif {

const char* to_string(GroupKind kind) noexcept {
  switch (kind) {
  case GroupKind::Interior:
    return "interior";
  case GroupKind::Face:
    return "face";
  case GroupKind::Edge:
    return "edge";
  case GroupKind::Corner:
    return "corner";
  }
  return "?";
}

namespace {

GroupKind kind_for(int dim, int codim) {
  if (codim == 0)
    return GroupKind::Interior;
  if (codim == dim)
    return GroupKind::Corner;
  if (dim == 3 && codim == 1)
    return GroupKind::Face;
  return GroupKind::Edge;
}

} // namespace

GroupKind DofHierarchy::kind_at(Index dof, int level) const {
  const auto c = grid_.coords(dof);
  const Index s = levels_.at(static_cast<std::size_t>(level)).cell_size;
  int codim = 0;
  for (int a = 0; a < grid_.dim; ++a)
    codim += (c[static_cast<std::size_t>(a)] % s == 0) ? 1 : 0;
  return kind_for(grid_.dim, codim);
}

DofHierarchy build_hierarchy(const GridSpec& grid) {
  grid.validate();
  DofHierarchy h;
  h.grid_ = grid;
  const Index N = grid.num_dofs();
  const int dim = grid.dim;
  h.interior_level_.assign(static_cast<std::size_t>(N), -1);

  for (int l = 0; l <= grid.levels; ++l) {
    HierarchyLevel lev;
    lev.level = l;
    lev.cell_size = grid.leaf * (Index{1} << l);
    const Index s = lev.cell_size;
    const Index cells_per_side = grid.n / s;
    Index ncells = 1;
    for (int a = 0; a < dim; ++a)
      ncells *= cells_per_side;
    std::vector<std::vector<Index>> cells(static_cast<std::size_t>(ncells));
    // key: {axis mask, per-axis line or segment index}
    std::map<std::array<Index, 4>, std::vector<Index>> boundary;

    for (Index j = 0; j < N; ++j) {
      const auto c = grid.coords(j);
      std::array<Index, 4> key{0, 0, 0, 0};
      int codim = 0;
      Index cell = 0, stride = 1;
      for (int a = 0; a < dim; ++a) {
        const Index ca = c[static_cast<std::size_t>(a)];
        const bool on = ca % s == 0;
        codim += on ? 1 : 0;
        key[0] |= on ? (1 << a) : 0;
        key[static_cast<std::size_t>(a) + 1] = ca / s;
        cell += (ca / s) * stride;
        stride *= cells_per_side;
      }
      if (codim == 0) {
        cells[static_cast<std::size_t>(cell)].push_back(j);
        if (h.interior_level_[static_cast<std::size_t>(j)] < 0)
          h.interior_level_[static_cast<std::size_t>(j)] = l;
      } else {
        boundary[key].push_back(j);
      }
    }
    for (auto& c : cells)
      lev.interiors.push_back(IndexSet::from_sorted(std::move(c)));
    for (auto& [key, dofs] : boundary) {
      int codim = 0;
      for (int a = 0; a < dim; ++a)
        codim += (key[0] >> a) & 1;
      auto set = IndexSet::from_sorted(std::move(dofs));
      switch (kind_for(dim, codim)) {
      case GroupKind::Face:
        lev.faces.push_back(std::move(set));
        break;
      case GroupKind::Edge:
        lev.edges.push_back(std::move(set));
        break;
      case GroupKind::Corner:
        lev.corners.push_back(std::move(set));
        break;
      case GroupKind::Interior:
        break;
      }
    }
    h.levels_.push_back(std::move(lev));
  }
  return h;
}

void DofHierarchy::dump(std::ostream& os) const {
  os << "# level dof";
  for (int a = 0; a < grid_.dim; ++a)
    os << ' ' << "xyz"[a];
  os << " group\n";
  for (const auto& lev : levels_) {
    for (Index j = 0; j < grid_.num_dofs(); ++j) {
      const auto c = grid_.coords(j);
      os << lev.level << ' ' << j;
      for (int a = 0; a < grid_.dim; ++a)
        os << ' ' << c[static_cast<std::size_t>(a)];
      os << ' ' << to_string(kind_at(j, lev.level)) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

void ActiveSet::decouple(const IndexSet& dofs) {
  for (Index i : dofs) {
    auto& m = mask_.at(static_cast<std::size_t>(i));
    if (!m)
      throw InvalidArgument("ActiveSet: DOF " + std::to_string(i) + " decoupled twice");
    m = 0;
    --count_;
  }
}

IndexSet ActiveSet::to_index_set() const {
  std::vector<Index> ids;
  ids.reserve(static_cast<std::size_t>(count_));
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i])
      ids.push_back(static_cast<Index>(i));
  return IndexSet::from_sorted(std::move(ids));
}

IndexSet ActiveSet::filter(const IndexSet& s) const {
  std::vector<Index> ids;
  ids.reserve(s.size());
  for (Index i : s)
    if (contains(i))
      ids.push_back(i);
  return IndexSet::from_sorted(std::move(ids));
}

std::vector<IndexSet> ActiveGroups::rescale_groups() const {
  std::vector<IndexSet> out;
  out.reserve(faces.size() + edges.size() + corners.size());
  out.insert(out.end(), faces.begin(), faces.end());
  out.insert(out.end(), edges.begin(), edges.end());
  out.insert(out.end(), corners.begin(), corners.end());
  return out;
}

std::vector<IndexSet> ActiveGroups::skeleton_groups(int dim) const { return dim == 3 ? faces : edges; }

ActiveGroups active_groups(const DofHierarchy& h, int level, const ActiveSet& active) {
  if (active.dim() != h.grid().num_dofs())
    throw InvalidArgument("active_groups: active set does not match the hierarchy");
  for (Index j = 0; j < active.dim(); ++j)
    if (active.contains(j) && h.interior_level(j) >= 0 && h.interior_level(j) < level)
      throw InvalidArgument("active_groups: DOF " + std::to_string(j) + " is active but was interior at level " +
                            std::to_string(h.interior_level(j)));
  const auto& lev = h.level(level);
  ActiveGroups out;
  auto take = [&](const std::vector<IndexSet>& src, std::vector<IndexSet>& dst) {
    for (const auto& g : src) {
      auto f = active.filter(g);
      if (!f.empty())
        dst.push_back(std::move(f));
    }
  };
  take(lev.interiors, out.interiors);
  take(lev.faces, out.faces);
  take(lev.edges, out.edges);
  take(lev.corners, out.corners);
  return out;
}

} // namespace phif
