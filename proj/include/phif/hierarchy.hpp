#pragma once

#include <iosfwd>
#include <vector>

#include "phif/discretization.hpp"
#include "phif/sparse.hpp"

namespace phif {

/// Geometric role of a DOF at one tree level: inside a cell, or on a shared cell
/// boundary of codimension 1 (edge in 2D, face in 3D), 2 (corner in 2D, edge in 3D) or 3.
enum class GroupKind { Interior, Face, Edge, Corner };

const char* to_string(GroupKind kind) noexcept;

struct HierarchyLevel {
  int level = 0;
  /// Cell side length in grid steps.
  Index cell_size = 0;
  /// One entry per cell, p_l = (n / cell_size)^d of them.
  std::vector<IndexSet> interiors;
  std::vector<IndexSet> faces;   // 3D only
  std::vector<IndexSet> edges;
  std::vector<IndexSet> corners;
};

/// Quadtree/octree classification of the interior grid nodes, levels 0 (leaves) .. L (root).
class DofHierarchy {
public:
  DofHierarchy() = default;

  const GridSpec& grid() const noexcept { return grid_; }
  int depth() const noexcept { return grid_.levels; }
  const HierarchyLevel& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }
  /// First level at which the DOF is a cell interior.
  int interior_level(Index dof) const { return interior_level_.at(static_cast<std::size_t>(dof)); }
  GroupKind kind_at(Index dof, int level) const;

  /// Plain-text dump: one line per DOF and level with coordinates and group.
  void dump(std::ostream& os) const;

private:
  friend DofHierarchy build_hierarchy(const GridSpec& grid);
  GridSpec grid_;
  std::vector<HierarchyLevel> levels_;
  std::vector<int> interior_level_;
};

DofHierarchy build_hierarchy(const GridSpec& grid);

/// DOFs not yet decoupled.
class ActiveSet {
public:
  ActiveSet() = default;
  explicit ActiveSet(Index dim) : mask_(static_cast<std::size_t>(dim), 1), count_(dim) {}

  bool contains(Index i) const { return mask_.at(static_cast<std::size_t>(i)) != 0; }
  Index size() const noexcept { return count_; }
  Index dim() const noexcept { return static_cast<Index>(mask_.size()); }

  /// Throws InvalidArgument if any DOF was already decoupled.
  void decouple(const IndexSet& dofs);
  IndexSet to_index_set() const;
  IndexSet filter(const IndexSet& s) const;

private:
  std::vector<char> mask_;
  Index count_ = 0;
};

struct ActiveGroups {
  std::vector<IndexSet> interiors;
  std::vector<IndexSet> faces;
  std::vector<IndexSet> edges;
  std::vector<IndexSet> corners;

  /// Every boundary group (faces, edges, corners); these receive the block Jacobi rescaling.
  std::vector<IndexSet> rescale_groups() const;
  /// Groups that are skeletonized: edges in 2D, faces in 3D.
  std::vector<IndexSet> skeleton_groups(int dim) const;
};

/// Level groups intersected with the active set; empty groups are omitted.
/// Throws InvalidArgument if an active DOF should already have been eliminated.
ActiveGroups active_groups(const DofHierarchy& h, int level, const ActiveSet& active);

} // namespace phif
