#include "dagsched/lp.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dagsched/errors.hpp"

namespace dagsched {

SctLp build_lp(const GroupedGraph& gg, const CommModel& cm) {
  SctLp lp;
  lp.num_nodes = gg.node_count();
  lp.num_edges = gg.edge_count();
  lp.k.resize(lp.num_nodes);
  for (int i = 0; i < lp.num_nodes; ++i) {
    lp.k[i] = static_cast<double>(gg.nodes[i].compute_time_us);
  }
  lp.c.resize(lp.num_edges);
  lp.edge_ends.resize(lp.num_edges);
  for (int e = 0; e < lp.num_edges; ++e) {
    lp.c[e] = static_cast<double>(comm_time(cm, gg.edges[e].tensor_bytes));
    lp.edge_ends[e] = {gg.edges[e].src, gg.edges[e].dst};
  }

  auto add_row = [&](std::vector<std::pair<int, double>> row, double rhs) {
    lp.rows.push_back(std::move(row));
    lp.rhs.push_back(rhs);
  };

  // s_i - w <= -k_i
  for (int i = 0; i < lp.num_nodes; ++i) {
    add_row({{lp.s_var(i), 1.0}, {lp.w_var(), -1.0}}, -lp.k[i]);
    lp.completion_rows++;
  }
  // s_i - s_j + c_e x_e <= -k_i
  for (int e = 0; e < lp.num_edges; ++e) {
    auto [i, j] = lp.edge_ends[e];
    add_row({{lp.s_var(i), 1.0}, {lp.s_var(j), -1.0}, {lp.x_var(e), lp.c[e]}},
            -lp.k[i]);
    lp.precedence_rows++;
  }
  // -sum x_e <= 1 - outdeg(i), one per node with outgoing edges
  for (int i = 0; i < lp.num_nodes; ++i) {
    if (gg.out_edges[i].empty()) continue;
    std::vector<std::pair<int, double>> row;
    for (int e : gg.out_edges[i]) row.emplace_back(lp.x_var(e), -1.0);
    add_row(std::move(row),
            1.0 - static_cast<double>(gg.out_edges[i].size()));
    lp.child_rows++;
  }
  // -sum x_e <= 1 - indeg(j), one per node with incoming edges
  for (int j = 0; j < lp.num_nodes; ++j) {
    if (gg.in_edges[j].empty()) continue;
    std::vector<std::pair<int, double>> row;
    for (int e : gg.in_edges[j]) row.emplace_back(lp.x_var(e), -1.0);
    add_row(std::move(row), 1.0 - static_cast<double>(gg.in_edges[j].size()));
    lp.parent_rows++;
  }
  // Bounds: -s <= 0, -w <= 0, -x <= 0, x <= 1.
  for (int i = 0; i < lp.num_nodes; ++i) {
    add_row({{lp.s_var(i), -1.0}}, 0.0);
    lp.bound_rows++;
  }
  add_row({{lp.w_var(), -1.0}}, 0.0);
  lp.bound_rows++;
  for (int e = 0; e < lp.num_edges; ++e) {
    add_row({{lp.x_var(e), -1.0}}, 0.0);
    lp.bound_rows++;
  }
  for (int e = 0; e < lp.num_edges; ++e) {
    add_row({{lp.x_var(e), 1.0}}, 1.0);
    lp.bound_rows++;
  }
  return lp;
}

namespace {

constexpr int kMaxIterations = 200;

// Longest-path start times for a fixed x, the tightest s for that x.
// slack_pad > 0 pushes the point strictly inside every time row.
void tighten_starts(const SctLp& lp, const std::vector<double>& x,
                    const std::vector<double>& k, const std::vector<double>& c,
                    double slack_pad, std::vector<double>& s) {
  int n = lp.num_nodes;
  std::vector<std::vector<int>> in_edges(n), out_edges(n);
  std::vector<int> indeg(n, 0);
  for (int e = 0; e < lp.num_edges; ++e) {
    in_edges[lp.edge_ends[e].second].push_back(e);
    out_edges[lp.edge_ends[e].first].push_back(e);
    indeg[lp.edge_ends[e].second]++;
  }
  std::vector<int> order, stack;
  order.reserve(n);
  for (int i = n - 1; i >= 0; --i) {
    if (indeg[i] == 0) stack.push_back(i);
  }
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    order.push_back(u);
    for (int e : out_edges[u]) {
      if (--indeg[lp.edge_ends[e].second] == 0) {
        stack.push_back(lp.edge_ends[e].second);
      }
    }
  }
  s.assign(n, slack_pad);
  for (int u : order) {
    for (int e : in_edges[u]) {
      int src = lp.edge_ends[e].first;
      s[u] = std::max(s[u], s[src] + k[src] + c[e] * x[e] + slack_pad);
    }
  }
}

}  // namespace

LpSolution solve_relaxed(const SctLp& lp, double tolerance) {
  const int n_vars = lp.num_vars();
  const int n_rows = static_cast<int>(lp.rows.size());

  // Rescale time units so the largest coefficient is moderate; x is
  // dimensionless and unaffected.
  double max_coef = 1.0;
  for (double v : lp.k) max_coef = std::max(max_coef, v);
  for (double v : lp.c) max_coef = std::max(max_coef, v);
  const double f = 100.0 / max_coef;
  std::vector<double> ks(lp.k), cs(lp.c);
  for (double& v : ks) v *= f;
  for (double& v : cs) v *= f;

  // Assemble G z <= h with the time rows rescaled: x coefficients and the
  // right-hand sides of completion/precedence rows carry the factor.
  const int time_rows = lp.completion_rows + lp.precedence_rows;
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd h(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    double row_scale = r < time_rows ? f : 1.0;
    for (const auto& [var, coef] : lp.rows[r]) {
      bool is_x = var >= lp.num_nodes && var < lp.num_nodes + lp.num_edges;
      triplets.emplace_back(r, var, is_x ? coef * row_scale : coef);
    }
    h[r] = lp.rhs[r] * row_scale;
  }
  Eigen::SparseMatrix<double> G(n_rows, n_vars);
  G.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> Gt = G.transpose();

  Eigen::VectorXd c_obj = Eigen::VectorXd::Zero(n_vars);
  c_obj[lp.w_var()] = 1.0;

  // Strictly feasible start: x midway between its degree-row requirement
  // and 1, s from a padded longest path, w above every completion time.
  std::vector<int> outdeg(lp.num_nodes, 0), indeg(lp.num_nodes, 0);
  for (int e = 0; e < lp.num_edges; ++e) {
    outdeg[lp.edge_ends[e].first]++;
    indeg[lp.edge_ends[e].second]++;
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n_vars);
  std::vector<double> x0(lp.num_edges, 0.5);
  for (int e = 0; e < lp.num_edges; ++e) {
    int ds = outdeg[lp.edge_ends[e].first];
    int dd = indeg[lp.edge_ends[e].second];
    double need = std::max((ds - 1.0) / ds, (dd - 1.0) / dd);
    x0[e] = need + (1.0 - need) / 2.0;
    z[lp.x_var(e)] = x0[e];
  }
  {
    std::vector<double> ones(lp.num_edges, 1.0);
    std::vector<double> s0;
    tighten_starts(lp, ones, ks, cs, 1.0, s0);
    double wmax = 1.0;
    for (int i = 0; i < lp.num_nodes; ++i) {
      z[lp.s_var(i)] = s0[i];
      wmax = std::max(wmax, s0[i] + ks[i]);
    }
    z[lp.w_var()] = wmax + 1.0;
  }

  Eigen::VectorXd slack = h - G * z;
  Eigen::VectorXd lambda = Eigen::VectorXd::Ones(n_rows);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;

  LpSolution sol;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    slack = h - G * z;
    double min_slack = slack.minCoeff();
    if (min_slack <= 0) {
      throw SolverError("interior point lost strict feasibility");
    }
    Eigen::VectorXd rd = c_obj + Gt * lambda;
    double mu = slack.dot(lambda) / n_rows;
    double obj = z[lp.w_var()];
    double rel_gap = slack.dot(lambda) / (1.0 + std::abs(obj));
    double rel_rd = rd.lpNorm<Eigen::Infinity>();
    if (rel_gap <= tolerance && rel_rd <= std::sqrt(tolerance)) {
      sol.iterations = iter;
      sol.rel_gap = rel_gap;
      break;
    }
    if (iter == kMaxIterations - 1) {
      throw SolverError(
          "LP did not converge within " + std::to_string(kMaxIterations) +
          " iterations; consider rescaling profile times");
    }

    Eigen::VectorXd w_diag = (lambda.array() / slack.array()).matrix();
    Eigen::SparseMatrix<double> M = Gt * w_diag.asDiagonal() * G;
    double reg = 1e-12 * std::max(1.0, w_diag.maxCoeff());
    for (int i = 0; i < n_vars; ++i) M.coeffRef(i, i) += reg;
    if (!analyzed) {
      ldlt.analyzePattern(M);
      analyzed = true;
    }
    ldlt.factorize(M);
    if (ldlt.info() != Eigen::Success) {
      throw SolverError("normal-equation factorization failed");
    }

    // Affine predictor.
    Eigen::VectorXd rc = (lambda.array() * slack.array()).matrix();
    Eigen::VectorXd rhs = -rd + Gt * (rc.array() / slack.array()).matrix();
    Eigen::VectorXd dz_aff = ldlt.solve(rhs);
    Eigen::VectorXd ds_aff = -(G * dz_aff);
    Eigen::VectorXd dl_aff =
        ((-rc.array() - lambda.array() * ds_aff.array()) / slack.array())
            .matrix();

    auto max_step = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i) {
        if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
      }
      return a;
    };
    double ap = max_step(slack, ds_aff);
    double ad = max_step(lambda, dl_aff);
    double mu_aff = (slack + ap * ds_aff).dot(lambda + ad * dl_aff) / n_rows;
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

    // Corrector.
    rc = (lambda.array() * slack.array() + ds_aff.array() * dl_aff.array() -
          sigma * mu)
             .matrix();
    rhs = -rd + Gt * (rc.array() / slack.array()).matrix();
    Eigen::VectorXd dz = ldlt.solve(rhs);
    Eigen::VectorXd ds = -(G * dz);
    Eigen::VectorXd dl =
        ((-rc.array() - lambda.array() * ds.array()) / slack.array()).matrix();

    double eta = mu > 1e-4 ? 0.95 : 0.999;
    double alpha_p = std::min(1.0, eta * max_step(slack, ds));
    double alpha_d = std::min(1.0, eta * max_step(lambda, dl));
    z += alpha_p * dz;
    lambda += alpha_d * dl;
  }

  // Unscale, clip x to its box, and re-tighten the start times under the
  // final x; that keeps the reported point exactly primal feasible.
  sol.x.resize(lp.num_edges);
  for (int e = 0; e < lp.num_edges; ++e) {
    sol.x[e] = std::clamp(z[lp.x_var(e)], 0.0, 1.0);
  }
  tighten_starts(lp, sol.x, lp.k, lp.c, 0.0, sol.s);
  sol.w = 0.0;
  for (int i = 0; i < lp.num_nodes; ++i) {
    sol.w = std::max(sol.w, sol.s[i] + lp.k[i]);
  }
  return sol;
}

FavoriteMap round_and_extract(const SctLp& lp, const LpSolution& solution,
                              double threshold, RoundStats* stats) {
  if (threshold <= 0 || threshold >= 0.5) {
    throw ValidationError("rounding threshold must lie in (0, 0.5)");
  }
  struct Cand {
    int edge;
    double x;
  };
  std::vector<std::vector<Cand>> by_src(lp.num_nodes);
  for (int e = 0; e < lp.num_edges; ++e) {
    if (solution.x[e] < threshold) {
      by_src[lp.edge_ends[e].first].push_back({e, solution.x[e]});
    }
  }
  RoundStats local;
  std::vector<int> kept;
  for (int i = 0; i < lp.num_nodes; ++i) {
    if (by_src[i].empty()) continue;
    auto best = std::min_element(
        by_src[i].begin(), by_src[i].end(), [&](const Cand& a, const Cand& b) {
          return std::pair(a.x, lp.edge_ends[a.edge].second) <
                 std::pair(b.x, lp.edge_ends[b.edge].second);
        });
    if (by_src[i].size() > 1) local.repaired_nodes++;
    kept.push_back(best->edge);
  }
  // The same repair on the parent side: at most one favorite parent.
  std::map<int, std::vector<int>> by_dst;
  for (int e : kept) by_dst[lp.edge_ends[e].second].push_back(e);
  FavoriteMap fav = FavoriteMap::none(lp.num_nodes);
  for (auto& [dst, edges] : by_dst) {
    int best = edges.front();
    for (int e : edges) {
      if (std::pair(solution.x[e], lp.edge_ends[e].first) <
          std::pair(solution.x[best], lp.edge_ends[best].first)) {
        best = e;
      }
    }
    if (edges.size() > 1) local.repaired_nodes++;
    fav.fav_child[lp.edge_ends[best].first] = dst;
    fav.fav_parent[dst] = lp.edge_ends[best].first;
    local.favorite_edges++;
  }
  if (stats) *stats = local;
  return fav;
}

std::string lp_to_text(const SctLp& lp) {
  auto var_name = [&](int var) -> std::string {
    if (var < lp.num_nodes) return "s" + std::to_string(var);
    if (var == lp.w_var()) return "w";
    int e = var - lp.num_nodes;
    return "x" + std::to_string(lp.edge_ends[e].first) + "_" +
           std::to_string(lp.edge_ends[e].second);
  };
  std::ostringstream out;
  out << "Minimize\n obj: w\nSubject To\n";
  for (std::size_t r = 0; r < lp.rows.size(); ++r) {
    out << " r" << r << ":";
    for (const auto& [var, coef] : lp.rows[r]) {
      out << (coef >= 0 ? " + " : " - ") << std::abs(coef) << " "
          << var_name(var);
    }
    out << " <= " << lp.rhs[r] << "\n";
  }
  out << "End\n";
  return out.str();
}

}  // namespace dagsched
