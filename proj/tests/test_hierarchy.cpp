#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "phif/factor.hpp"
#include "phif/hierarchy.hpp"

using namespace phif;

namespace {


std::vector<Index> concat(const HierarchyLevel& lev) {
  std::vector<Index> all;
  for (const auto* groups : {&lev.interiors, &lev.faces, &lev.edges, &lev.corners})
    for (const auto& g : *groups)
      all.insert(all.end(), g.begin(), g.end());
  std::sort(all.begin(), all.end());
  return all;
}

} // namespace

TEST_SUITE("hierarchy") {

TEST_CASE("2D n = 4, one level: four singleton interiors, four edges and one corner") {
  const auto h = build_hierarchy(GridSpec::make(2, 1, 2));
  const auto& lev = h.level(0);
  REQUIRE(lev.interiors.size() == 4);
  for (const auto& c : lev.interiors)
    CHECK(c.size() == 1);
  const auto g = h.grid();
  std::array<Index, 2> c00{1, 1};
  CHECK(lev.interiors[0] == IndexSet{g.dof(c00)});
  CHECK(lev.edges.size() == 4);
  for (const auto& e : lev.edges)
    CHECK(e.size() == 1);
  REQUIRE(lev.corners.size() == 1);
  std::array<Index, 2> mid{2, 2};
  CHECK(lev.corners[0] == IndexSet{g.dof(mid)});
  CHECK(lev.faces.empty());
  // The root level holds every DOF as one interior.
  CHECK(h.level(1).interiors.size() == 1);
  CHECK(h.level(1).interiors[0].size() == 9);
}

TEST_CASE("depth zero puts every DOF in the root interior") {
  const auto h = build_hierarchy(GridSpec::make(2, 0, 6));
  CHECK(h.depth() == 0);
  CHECK(h.level(0).interiors.size() == 1);
  CHECK(h.level(0).interiors[0] == IndexSet::range(25));
}

TEST_CASE("3D n = 4 matches a coordinate scan") {
  const auto grid = GridSpec::make(3, 1, 2);
  const auto h = build_hierarchy(grid);
  std::size_t codim[4] = {0, 0, 0, 0};
  for (Index j = 0; j < grid.num_dofs(); ++j) {
    const auto c = grid.coords(j);
    codim[(c[0] == 2) + (c[1] == 2) + (c[2] == 2)]++;
  }
  // Every group is a single DOF on a 3x3x3 grid.
  const auto& lev = h.level(0);
  CHECK(lev.interiors.size() == 8);
  CHECK(lev.faces.size() == codim[1]);
  CHECK(lev.edges.size() == codim[2]);
  CHECK(lev.corners.size() == codim[3]);
  CHECK(codim[1] == 12);
  CHECK(codim[2] == 6);
  CHECK(codim[3] == 1);
}

TEST_CASE("groups partition the DOFs and follow the coordinate rule at every level") {
  for (auto grid : {GridSpec::make(2, 3, 4), GridSpec::make(3, 2, 2)}) {
    const auto h = build_hierarchy(grid);
    for (int l = 0; l <= h.depth(); ++l) {
      const auto& lev = h.level(l);
      CHECK(lev.interiors.size() == static_cast<std::size_t>(std::pow(grid.n / lev.cell_size, grid.dim)));
      const auto all = concat(lev);
      CHECK(all == IndexSet::range(grid.num_dofs()).ids());
      for (const auto& e : lev.edges)
        for (Index j : e)
          CHECK(h.kind_at(j, l) == GroupKind::Edge);
      for (const auto& f : lev.faces)
        for (Index j : f)
          CHECK(h.kind_at(j, l) == GroupKind::Face);
    }
  }
}

TEST_CASE("cell interiors never touch in the stiffness pattern") {
  const auto grid = GridSpec::make(2, 2, 4);
  const auto M = build_stiffness(grid, CoeffField::constant(1.0));
  const auto h = build_hierarchy(grid);
  const auto& lev = h.level(0);
  std::vector<int> owner(static_cast<std::size_t>(grid.num_dofs()), -1);
  for (std::size_t c = 0; c < lev.interiors.size(); ++c)
    for (Index j : lev.interiors[c])
      owner[static_cast<std::size_t>(j)] = static_cast<int>(c);
  for (std::size_t c = 0; c < lev.interiors.size(); ++c)
    for (Index j : interacting_dofs(M, lev.interiors[c]))
      CHECK(owner[static_cast<std::size_t>(j)] == -1);
}

TEST_CASE("active set bookkeeping") {
  ActiveSet a(5);
  CHECK(a.size() == 5);
  a.decouple(IndexSet{1, 3});
  CHECK(a.size() == 3);
  CHECK(a.to_index_set() == IndexSet{0, 2, 4});
  CHECK(a.filter(IndexSet{0, 1, 2}) == IndexSet{0, 2});
  CHECK_THROWS_AS(a.decouple(IndexSet{3}), InvalidArgument);
}

TEST_CASE("active groups on a fresh problem and after elimination") {
  const auto grid = GridSpec::make(2, 2, 4);
  const auto h = build_hierarchy(grid);
  ActiveSet active(grid.num_dofs());
  auto g0 = active_groups(h, 0, active);
  CHECK(g0.interiors == h.level(0).interiors);
  for (const auto& c : g0.interiors)
    active.decouple(c);
  g0 = active_groups(h, 0, active);
  CHECK(g0.interiors.empty());
  CHECK(g0.rescale_groups().size() == h.level(0).edges.size() + h.level(0).corners.size());
  CHECK(g0.skeleton_groups(2).size() == h.level(0).edges.size());

  // A DOF that should have been eliminated at level 0 cannot be active at level 1.
  ActiveSet fresh(grid.num_dofs());
  CHECK_THROWS_AS(active_groups(h, 1, fresh), InvalidArgument);
}

TEST_CASE("after level-0 skeletonization the level-1 groups hold exactly the survivors") {
  const auto grid = GridSpec::make(2, 2, 4);
  const auto h = build_hierarchy(grid);
  const auto A = build_cn_pair(build_stiffness(grid, CoeffField::constant(1.0)), grid.h()).A;
  const auto F = factorize(A, h, 1e-3);
  // Reference tracking: decoupled flags from the level-0 factors.
  std::vector<char> gone(static_cast<std::size_t>(grid.num_dofs()), 0);
  for (const auto& e : F.levels()[0].eliminations)
    for (Index j : e.target)
      gone[static_cast<std::size_t>(j)] = 1;
  for (const auto& s : F.levels()[0].skels)
    for (Index j : s.redundant)
      gone[static_cast<std::size_t>(j)] = 1;
  ActiveSet active(grid.num_dofs());
  std::vector<Index> dead;
  for (Index j = 0; j < grid.num_dofs(); ++j)
    if (gone[static_cast<std::size_t>(j)])
      dead.push_back(j);
  active.decouple(IndexSet::from_sorted(dead));
  const auto g1 = active_groups(h, 1, active);
  for (std::size_t c = 0; c < g1.interiors.size(); ++c)
    for (Index j : g1.interiors[c])
      CHECK_FALSE(gone[static_cast<std::size_t>(j)]);
  std::vector<Index> all;
  for (const auto* gs : {&g1.interiors, &g1.faces, &g1.edges, &g1.corners})
    for (const auto& g : *gs)
      all.insert(all.end(), g.begin(), g.end());
  std::sort(all.begin(), all.end());
  CHECK(all == active.to_index_set().ids());
  CHECK(active.size() < grid.num_dofs() - static_cast<Index>(h.level(0).interiors.size()));
}

TEST_CASE("hierarchy dump lists every DOF at every level") {
  const auto h = build_hierarchy(GridSpec::make(2, 1, 2));
  std::ostringstream os;
  h.dump(os);
  const auto text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 9);
  CHECK(text.find("0 4 2 2 corner") != std::string::npos);
  CHECK(text.find("1 4 2 2 interior") != std::string::npos);
}

} // TEST_SUITE
