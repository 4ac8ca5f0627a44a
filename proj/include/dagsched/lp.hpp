#pragma once

#include <string>
#include <vector>

#include "dagsched/cost_model.hpp"
#include "dagsched/transforms.hpp"

namespace dagsched {

// Relaxed favorite-child program over a meta DAG, in the inequality form
// G z <= h with variables z = [s_0..s_{V-1}, x_0..x_{E-1}, w]:
//   minimize w
//   s_i + k_i <= w                         for every node (completion)
//   s_i + k_i + c_e * x_e <= s_j           for every edge e = i -> j
//   sum_{e out of i} x_e >= outdeg(i) - 1  for every node with outdeg >= 1
//   sum_{e into j}  x_e >= indeg(j) - 1    for every node with indeg >= 1
//   s >= 0, w >= 0, 0 <= x <= 1            (bound rows)
// x_e = 0 marks e as the favorite edge once rounded.
struct SctLp {
  int num_nodes = 0;
  int num_edges = 0;
  std::vector<std::pair<int, int>> edge_ends;  // meta (src, dst) per x var
  std::vector<double> k;                       // scaled compute times
  std::vector<double> c;                       // scaled comm times
  double scale = 1.0;  // time units were multiplied by this before solving

  // Sparse rows of G z <= h.
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> rhs;

  // Row-class counts, in the order the rows were emitted.
  int completion_rows = 0;
  int precedence_rows = 0;
  int child_rows = 0;   // one per node with outdeg >= 1
  int parent_rows = 0;  // one per node with indeg >= 1
  int bound_rows = 0;

  int num_vars() const { return num_nodes + num_edges + 1; }
  int s_var(int node) const { return node; }
  int x_var(int edge) const { return num_nodes + edge; }
  int w_var() const { return num_nodes + num_edges; }
};

SctLp build_lp(const GroupedGraph& gg, const CommModel& cm);

struct LpSolution {
  std::vector<double> s;  // unscaled start times
  std::vector<double> x;  // fractional favorite indicators in [0, 1]
  double w = 0.0;         // unscaled objective
  int iterations = 0;
  double rel_gap = 0.0;
};

// Primal-dual interior-point solve with Mehrotra-style steps. The returned
// point is primal feasible; x is clipped to [0, 1] and the start times are
// re-tightened by a longest-path pass under the final x. Deterministic for
// fixed inputs. Throws SolverError after 200 iterations without converging.
LpSolution solve_relaxed(const SctLp& lp, double tolerance = 1e-6);

// Favorite relation extracted from the rounded solution. Edges with
// x below the threshold are favorites; both maps then hold at most one
// entry per node.
struct FavoriteMap {
  std::vector<int> fav_child;   // meta index -> meta index or -1
  std::vector<int> fav_parent;  // inverse relation

  static FavoriteMap none(int num_nodes) {
    return FavoriteMap{std::vector<int>(num_nodes, -1),
                       std::vector<int>(num_nodes, -1)};
  }
  bool empty() const {
    for (int c : fav_child) {
      if (c >= 0) return false;
    }
    return true;
  }
};

struct RoundStats {
  int favorite_edges = 0;
  int repaired_nodes = 0;  // nodes where a duplicate favorite was dropped
};

// Rounds x at the threshold and repairs duplicate favorites: when a node
// gains two favorite children (or parents), only the edge with the smallest
// fractional x survives, ties to the smaller peer index.
FavoriteMap round_and_extract(const SctLp& lp, const LpSolution& solution,
                              double threshold = 0.1,
                              RoundStats* stats = nullptr);

// Debug dump, one constraint per line, in LP text format.
std::string lp_to_text(const SctLp& lp);

}  // namespace dagsched
