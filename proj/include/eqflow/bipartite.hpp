#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eqflow/bipartite_problem.hpp"
#include "eqflow/connection.hpp"
#include "eqflow/errors.hpp"
#include "eqflow/feasibility.hpp"
#include "eqflow/maxflow.hpp"

namespace eqflow {

struct BipartiteEquilibrium {
  std::vector<double> px, py;
  std::vector<double> flow;  // aligned with the arcs of the problem it answers
  int ground_x = 0;
  double ground_value = 0.0;
  // residuals of system (2)
  double margin_residual = 0.0;
  double rent_residual = 0.0;
  double cs_residual = 0.0;
  // solver trace
  double penalty_n = 0.0;
  int doublings = 0;
  int blocks = 1;
  long iterations = 0;
};

inline void compute_bipartite_residuals(const BipartiteProblem& bp, BipartiteEquilibrium& eq) {
  std::vector<double> row(static_cast<std::size_t>(bp.x_count()), 0.0);
  std::vector<double> col(static_cast<std::size_t>(bp.y_count()), 0.0);
  eq.rent_residual = 0.0;
  eq.cs_residual = 0.0;
  for (std::size_t i = 0; i < bp.arcs.size(); ++i) {
    const BpArc& a = bp.arcs[i];
    double f = eq.flow[i];
    row[static_cast<std::size_t>(a.x)] += f;
    col[static_cast<std::size_t>(a.y)] += f;
    double thr = a.g(eq.py[static_cast<std::size_t>(a.y)]);
    eq.rent_residual = std::max(eq.rent_residual, thr - eq.px[static_cast<std::size_t>(a.x)]);
    eq.cs_residual += f * std::abs(eq.px[static_cast<std::size_t>(a.x)] - thr);
  }
  eq.margin_residual = 0.0;
  for (int x = 0; x < bp.x_count(); ++x)
    eq.margin_residual = std::max(
        eq.margin_residual, std::abs(row[static_cast<std::size_t>(x)] - bp.n[static_cast<std::size_t>(x)]));
  for (int y = 0; y < bp.y_count(); ++y)
    eq.margin_residual = std::max(
        eq.margin_residual, std::abs(col[static_cast<std::size_t>(y)] - bp.m[static_cast<std::size_t>(y)]));
  eq.rent_residual = std::max(eq.rent_residual, 0.0);
}

// Extend the arc set to all of X x Y; missing pairs get G(p) = p - n and stay
// marked. Completeness is what the bipartite existence result needs.
inline BipartiteProblem build_penalty_completion(const BipartiteProblem& bp, double n) {
  if (!(n > 0.0)) throw ValidationError("penalty completion: n must be > 0");
  BipartiteProblem out = bp;
  std::vector<std::vector<bool>> have(static_cast<std::size_t>(bp.x_count()),
                                      std::vector<bool>(static_cast<std::size_t>(bp.y_count()), false));
  for (const BpArc& a : bp.arcs) have[static_cast<std::size_t>(a.x)][static_cast<std::size_t>(a.y)] = true;
  for (int x = 0; x < bp.x_count(); ++x)
    for (int y = 0; y < bp.y_count(); ++y)
      if (!have[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)])
        out.arcs.push_back(BpArc{x, y, Connection::penalty(n), true});
  return out;
}

namespace detail {

inline bool transferable_utility(const BipartiteProblem& bp) {
  for (const BpArc& a : bp.arcs)
    if (!a.g.is_affine_like() || a.g.as_affine().slope != 1.0) return false;
  return true;
}

// Magnitude of the data; penalty seeds and auction steps scale from it.
inline double price_spread_estimate(const BipartiteProblem& bp) {
  double s = 1.0;
  for (const BpArc& a : bp.arcs) {
    s = std::max(s, std::abs(a.g(0.0)));
    if (a.g.is_pwl()) {
      const Pwl& f = a.g.as_pwl();
      for (double v : f.x) s = std::max(s, std::abs(v));
      for (double v : f.y) s = std::max(s, std::abs(v));
    }
  }
  return s;
}

}  // namespace detail

// Transportation LP by successive shortest paths with node potentials.
// Exact complementary slackness at optimality makes the duals equilibrium
// prices: p = -potential, shifted so the ground node sits at ground_value.
inline BipartiteEquilibrium solve_bipartite_tu(const BipartiteProblem& bp, int ground_x,
                                               double ground_value = 0.0) {
  bp.validate();
  if (!detail::transferable_utility(bp))
    throw ValidationError("solve_bipartite_tu: all connections must be affine with slope 1");
  if (ground_x < 0 || ground_x >= bp.x_count())
    throw ValidationError("solve_bipartite_tu: ground node out of range");

  const int nx = bp.x_count(), ny = bp.y_count();
  const int kNodes = nx + ny;
  std::vector<double> cost(bp.arcs.size());
  for (std::size_t i = 0; i < bp.arcs.size(); ++i) cost[i] = -bp.arcs[i].g.as_affine().intercept;

  // Residual arcs: even id forward (x -> y, cap inf), odd id backward.
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(kNodes));
  std::vector<double> flow(bp.arcs.size(), 0.0);
  for (std::size_t i = 0; i < bp.arcs.size(); ++i) {
    adj[static_cast<std::size_t>(bp.arcs[i].x)].push_back({static_cast<int>(i), +1});
    adj[static_cast<std::size_t>(nx + bp.arcs[i].y)].push_back({static_cast<int>(i), -1});
  }

  std::vector<double> pot(static_cast<std::size_t>(kNodes), 0.0);
  for (int y = 0; y < ny; ++y) pot[static_cast<std::size_t>(nx + y)] = kPosInf;
  for (std::size_t i = 0; i < bp.arcs.size(); ++i) {
    auto& p = pot[static_cast<std::size_t>(nx + bp.arcs[i].y)];
    p = std::min(p, cost[i]);
  }
  for (int y = 0; y < ny; ++y)
    if (pot[static_cast<std::size_t>(nx + y)] == kPosInf)
      throw SolveDiagnostic(DiagnosticKind::kHallViolation,
                            "target '" + bp.y_names[static_cast<std::size_t>(y)] +
                                "' has no incoming arc",
                            {bp.y_names[static_cast<std::size_t>(y)]});

  std::vector<double> supply = bp.n, demand = bp.m;
  const double eps = 1e-12 * std::max(1.0, bp.total_mass());
  long guard = 16L * (nx + ny + 2) * (static_cast<long>(bp.arcs.size()) + 1) + 64;

  while (true) {
    int src = -1;
    for (int x = 0; x < nx; ++x)
      if (supply[static_cast<std::size_t>(x)] > eps) {
        src = x;
        break;
      }
    if (src < 0) break;
    if (--guard < 0)
      throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                            "transportation solver exceeded its augmentation budget");

    // Dijkstra on reduced costs from every positive-supply source.
    std::vector<double> dist(static_cast<std::size_t>(kNodes), kPosInf);
    std::vector<std::pair<int, int>> via(static_cast<std::size_t>(kNodes), {-1, 0});
    std::vector<bool> done(static_cast<std::size_t>(kNodes), false);
    for (int x = 0; x < nx; ++x)
      if (supply[static_cast<std::size_t>(x)] > eps) dist[static_cast<std::size_t>(x)] = 0.0;
    while (true) {
      int u = -1;
      double best = kPosInf;
      for (int z = 0; z < kNodes; ++z)
        if (!done[static_cast<std::size_t>(z)] && dist[static_cast<std::size_t>(z)] < best) {
          best = dist[static_cast<std::size_t>(z)];
          u = z;
        }
      if (u < 0) break;
      done[static_cast<std::size_t>(u)] = true;
      for (auto [i, dir] : adj[static_cast<std::size_t>(u)]) {
        const BpArc& a = bp.arcs[static_cast<std::size_t>(i)];
        int v = dir > 0 ? nx + a.y : a.x;
        if (dir < 0 && flow[static_cast<std::size_t>(i)] <= eps) continue;
        double rc = (dir > 0 ? cost[static_cast<std::size_t>(i)] : -cost[static_cast<std::size_t>(i)]) +
                    pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(v)];
        double cand = dist[static_cast<std::size_t>(u)] + std::max(rc, 0.0);
        if (cand < dist[static_cast<std::size_t>(v)]) {
          dist[static_cast<std::size_t>(v)] = cand;
          via[static_cast<std::size_t>(v)] = {i, dir};
        }
      }
    }
    int sink = -1;
    double best = kPosInf;
    for (int y = 0; y < ny; ++y)
      if (demand[static_cast<std::size_t>(y)] > eps &&
          dist[static_cast<std::size_t>(nx + y)] < best) {
        best = dist[static_cast<std::size_t>(nx + y)];
        sink = y;
      }
    if (sink < 0)
      throw SolveDiagnostic(DiagnosticKind::kHallViolation,
                            "margins are not transportable on the given arc set");

    for (int z = 0; z < kNodes; ++z)
      if (dist[static_cast<std::size_t>(z)] < kPosInf)
        pot[static_cast<std::size_t>(z)] += dist[static_cast<std::size_t>(z)];

    // Trace back, find bottleneck, augment.
    double bn = demand[static_cast<std::size_t>(sink)];
    int z = nx + sink;
    while (true) {
      auto [i, dir] = via[static_cast<std::size_t>(z)];
      if (i < 0) break;
      if (dir < 0) bn = std::min(bn, flow[static_cast<std::size_t>(i)]);
      z = dir > 0 ? bp.arcs[static_cast<std::size_t>(i)].x : nx + bp.arcs[static_cast<std::size_t>(i)].y;
    }
    bn = std::min(bn, supply[static_cast<std::size_t>(z)]);
    int zz = nx + sink;
    while (true) {
      auto [i, dir] = via[static_cast<std::size_t>(zz)];
      if (i < 0) break;
      flow[static_cast<std::size_t>(i)] += dir > 0 ? bn : -bn;
      zz = dir > 0 ? bp.arcs[static_cast<std::size_t>(i)].x : nx + bp.arcs[static_cast<std::size_t>(i)].y;
    }
    supply[static_cast<std::size_t>(zz)] -= bn;
    demand[static_cast<std::size_t>(sink)] -= bn;
  }

  BipartiteEquilibrium eq;
  eq.flow = flow;
  eq.ground_x = ground_x;
  eq.ground_value = ground_value;
  eq.px.resize(static_cast<std::size_t>(nx));
  eq.py.resize(static_cast<std::size_t>(ny));
  // Dual feasibility pi_y - pi_x <= c with equality on support is exactly
  // the no-positive-rent plus slackness pair for p = pi, up to one shift.
  double shift = ground_value - pot[static_cast<std::size_t>(ground_x)];
  for (int x = 0; x < nx; ++x) eq.px[static_cast<std::size_t>(x)] = pot[static_cast<std::size_t>(x)] + shift;
  for (int y = 0; y < ny; ++y) eq.py[static_cast<std::size_t>(y)] = pot[static_cast<std::size_t>(nx + y)] + shift;
  eq.px[static_cast<std::size_t>(ground_x)] = ground_value;  // pin exactly
  compute_bipartite_residuals(bp, eq);
  return eq;
}

namespace detail {

struct AuctionOutcome {
  std::vector<double> py;
  std::vector<double> px;
  std::vector<double> flow;
  long iterations = 0;
};

// Walrasian ascending auction: every source prices itself at its best arc
// threshold, mass routes along delta-binding arcs by max-flow, and targets
// left short raise their price. Prices only rise, so with an equilibrium
// above the start the run terminates; epsilon-scaling drives the binding
// slack down to eta_final.
inline AuctionOutcome ascending_auction(const BipartiteProblem& bp,
                                        const std::vector<double>& start_py, double eta_final,
                                        long budget) {
  const int nx = bp.x_count(), ny = bp.y_count();
  const double total = bp.total_mass();
  const double flow_tol = 1e-9 * std::max(1.0, total);

  std::vector<std::vector<int>> arcs_of_x(static_cast<std::size_t>(nx));
  for (std::size_t i = 0; i < bp.arcs.size(); ++i)
    arcs_of_x[static_cast<std::size_t>(bp.arcs[i].x)].push_back(static_cast<int>(i));
  for (int x = 0; x < nx; ++x)
    if (arcs_of_x[static_cast<std::size_t>(x)].empty())
      throw SolveDiagnostic(DiagnosticKind::kHallViolation,
                            "source '" + bp.x_names[static_cast<std::size_t>(x)] + "' has no arcs");

  AuctionOutcome out;
  out.py = start_py;
  out.px.assign(static_cast<std::size_t>(nx), 0.0);
  out.flow.assign(bp.arcs.size(), 0.0);

  double eta = std::max(1.0, price_spread_estimate(bp));
  eta_final = std::max(eta_final, 1e-13);

  while (true) {
    double delta = 4.0 * eta;
    while (true) {
      if (out.iterations++ > budget)
        throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                              "price adjustment exceeded its iteration budget");
      for (int x = 0; x < nx; ++x) {
        double best = kNegInf;
        for (int i : arcs_of_x[static_cast<std::size_t>(x)])
          best = std::max(best, bp.arcs[static_cast<std::size_t>(i)].g(
                                    out.py[static_cast<std::size_t>(bp.arcs[static_cast<std::size_t>(i)].y)]));
        out.px[static_cast<std::size_t>(x)] = best;
      }
      MaxFlow mf(nx + ny + 2);
      const int s = nx + ny, t = s + 1;
      for (int x = 0; x < nx; ++x) mf.add_edge(s, x, bp.n[static_cast<std::size_t>(x)]);
      std::vector<int> sink_edge(static_cast<std::size_t>(ny));
      for (int y = 0; y < ny; ++y)
        sink_edge[static_cast<std::size_t>(y)] = mf.add_edge(nx + y, t, bp.m[static_cast<std::size_t>(y)]);
      std::vector<int> arc_edge(bp.arcs.size(), -1);
      for (std::size_t i = 0; i < bp.arcs.size(); ++i) {
        const BpArc& a = bp.arcs[i];
        if (a.g(out.py[static_cast<std::size_t>(a.y)]) >=
            out.px[static_cast<std::size_t>(a.x)] - delta)
          arc_edge[i] = mf.add_edge(a.x, nx + a.y, MaxFlow::kInf);
      }
      double value = mf.run(s, t);
      if (value >= total - flow_tol) {
        for (std::size_t i = 0; i < bp.arcs.size(); ++i)
          out.flow[i] = arc_edge[i] >= 0 ? mf.flow_on(arc_edge[i]) : 0.0;
        break;
      }
      bool raised = false;
      for (int y = 0; y < ny; ++y) {
        double got = mf.flow_on(sink_edge[static_cast<std::size_t>(y)]);
        if (bp.m[static_cast<std::size_t>(y)] - got >
            flow_tol / (2.0 * static_cast<double>(ny))) {
          out.py[static_cast<std::size_t>(y)] += eta;
          raised = true;
        }
      }
      if (!raised)
        throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                              "stalled without an undersupplied target");
    }
    if (eta <= eta_final) break;
    eta *= 0.5;
  }
  return out;
}

}  // namespace detail

// Equilibrium of a complete bipartite problem with the ground source pinned:
// transferable-utility instances go through the exact transportation LP; the
// general case runs the ascending auction inside a bisection on the uniform
// start level until the ground source's implied price lands on target.
inline BipartiteEquilibrium solve_complete_bipartite(const BipartiteProblem& bp, int ground_x,
                                                     double tol,
                                                     double ground_value = 0.0) {
  bp.validate();
  if (ground_x < 0 || ground_x >= bp.x_count())
    throw ValidationError("solve_complete_bipartite: ground node out of range");
  if (!(tol > 0.0)) throw ValidationError("solve_complete_bipartite: tol must be > 0");

  if (detail::transferable_utility(bp)) return solve_bipartite_tu(bp, ground_x, ground_value);

  const double spread = detail::price_spread_estimate(bp);
  // Residual budgets are per unit of mass, so the stopping scales shrink with
  // the total mass being moved.
  const double unit_tol = tol / (8.0 * std::max(1.0, bp.total_mass()));
  const long budget = 400000;
  long iterations = 0;

  auto ground_price_at = [&](double level, double eta) {
    std::vector<double> start(static_cast<std::size_t>(bp.y_count()), level);
    detail::AuctionOutcome run = detail::ascending_auction(bp, start, eta, budget);
    iterations += run.iterations;
    return run;
  };

  // Bracket the start level so the ground price straddles its target.
  double coarse = std::max(4.0 * unit_tol, spread * 1e-3);
  double lo = -2.0 * spread + ground_value, hi = 2.0 * spread + ground_value;
  double step = spread;
  detail::AuctionOutcome at_lo = ground_price_at(lo, coarse);
  for (int i = 0; i < 80 && at_lo.px[static_cast<std::size_t>(ground_x)] > ground_value; ++i) {
    lo -= step;
    step *= 2.0;
    at_lo = ground_price_at(lo, coarse);
  }
  step = spread;
  detail::AuctionOutcome at_hi = ground_price_at(hi, coarse);
  for (int i = 0; i < 80 && at_hi.px[static_cast<std::size_t>(ground_x)] < ground_value; ++i) {
    hi += step;
    step *= 2.0;
    at_hi = ground_price_at(hi, coarse);
  }
  if (at_lo.px[static_cast<std::size_t>(ground_x)] > ground_value ||
      at_hi.px[static_cast<std::size_t>(ground_x)] < ground_value)
    throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                          "could not bracket the ground price");

  detail::AuctionOutcome best = at_lo;
  for (int i = 0; i < 240; ++i) {
    double mid = 0.5 * (lo + hi);
    double eta = std::max(unit_tol, std::min(coarse, (hi - lo) / 64.0));
    detail::AuctionOutcome run = ground_price_at(mid, eta);
    double v = run.px[static_cast<std::size_t>(ground_x)];
    best = run;
    if (std::abs(v - ground_value) <= 4.0 * unit_tol && eta <= unit_tol * 1.0001) break;
    if (v < ground_value)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(hi))) break;
  }

  BipartiteEquilibrium eq;
  eq.px = best.px;
  eq.py = best.py;
  eq.flow = best.flow;
  eq.ground_x = ground_x;
  eq.ground_value = ground_value;
  eq.iterations = iterations;
  eq.px[static_cast<std::size_t>(ground_x)] = ground_value;  // pin exactly
  compute_bipartite_residuals(bp, eq);
  return eq;
}

// Solve with escalating penalty completion: double n until no completion arc
// carries mass, then restrict to the original arcs. Terminates for
// Hall-satisfying problems once n clears the equilibrium price spread.
inline BipartiteEquilibrium escalate_penalty(const BipartiteProblem& bp, int ground_x,
                                             double tol, double ground_value = 0.0) {
  bp.validate();
  double n = 1.0 + detail::price_spread_estimate(bp);
  BipartiteEquilibrium last;
  for (int doubling = 0; doubling <= 60; ++doubling) {
    BipartiteProblem completed = build_penalty_completion(bp, n);
    BipartiteEquilibrium eq = solve_complete_bipartite(completed, ground_x, tol, ground_value);
    double stray = 0.0;
    for (std::size_t i = 0; i < completed.arcs.size(); ++i)
      if (completed.arcs[i].penalty_added) stray = std::max(stray, eq.flow[i]);
    if (stray <= kMassTol) {
      BipartiteEquilibrium out = eq;
      out.flow.assign(bp.arcs.size(), 0.0);
      for (std::size_t i = 0; i < bp.arcs.size(); ++i) out.flow[i] = eq.flow[i];
      out.penalty_n = n;
      out.doublings = doubling;
      compute_bipartite_residuals(bp, out);
      return out;
    }
    last = eq;
    n *= 2.0;
  }
  throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                        "penalty escalation did not clear; check Hall/connectivity or tolerances");
}

// Ordered partition per the appendix construction: take any feasible flow,
// add a reversed arc for every positive entry, and condense the strongly
// connected components of that exchange graph. Flow never crosses
// components, so margins balance per block and Hall holds blockwise; blocks
// are emitted sinks-first, which leaves only later-X to earlier-Y arcs.
struct BipartiteBlock {
  std::vector<int> xs, ys;
};

inline std::vector<BipartiteBlock> block_decompose(const BipartiteProblem& bp) {
  bp.validate();
  const int nx = bp.x_count(), ny = bp.y_count();

  MaxFlow mf(nx + ny + 2);
  const int s = nx + ny, t = s + 1;
  for (int x = 0; x < nx; ++x) mf.add_edge(s, x, bp.n[static_cast<std::size_t>(x)]);
  for (int y = 0; y < ny; ++y) mf.add_edge(nx + y, t, bp.m[static_cast<std::size_t>(y)]);
  std::vector<int> arc_edge(bp.arcs.size());
  for (std::size_t i = 0; i < bp.arcs.size(); ++i)
    arc_edge[i] = mf.add_edge(bp.arcs[i].x, nx + bp.arcs[i].y, MaxFlow::kInf);
  double value = mf.run(s, t);
  if (value < bp.total_mass() - kMassTol) {
    HallReport hall = hall_check(bp);
    std::vector<std::string> names;
    for (int x : hall.violating_K) names.push_back(bp.x_names[static_cast<std::size_t>(x)]);
    throw SolveDiagnostic(DiagnosticKind::kHallViolation,
                          "margins are not transportable: Hall's condition fails", names,
                          hall.supply - hall.demand);
  }

  // Exchange graph on nx+ny vertices.
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(nx + ny));
  for (std::size_t i = 0; i < bp.arcs.size(); ++i) {
    adj[static_cast<std::size_t>(bp.arcs[i].x)].push_back(nx + bp.arcs[i].y);
    if (mf.flow_on(arc_edge[i]) > kMassTol)
      adj[static_cast<std::size_t>(nx + bp.arcs[i].y)].push_back(bp.arcs[i].x);
  }

  // Tarjan over the local adjacency.
  const int n = nx + ny;
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0),
      comp_of(static_cast<std::size_t>(n), -1);
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  std::vector<int> stack;
  int next = 0, comp_count = 0;
  struct Frame {
    int node;
    std::size_t pos;
  };
  for (int start = 0; start < n; ++start) {
    if (index[static_cast<std::size_t>(start)] >= 0) continue;
    std::vector<Frame> frames{{start, 0}};
    index[static_cast<std::size_t>(start)] = low[static_cast<std::size_t>(start)] = next++;
    stack.push_back(start);
    on_stack[static_cast<std::size_t>(start)] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.pos < adj[static_cast<std::size_t>(f.node)].size()) {
        int w = adj[static_cast<std::size_t>(f.node)][f.pos++];
        if (index[static_cast<std::size_t>(w)] < 0) {
          index[static_cast<std::size_t>(w)] = low[static_cast<std::size_t>(w)] = next++;
          stack.push_back(w);
          on_stack[static_cast<std::size_t>(w)] = true;
          frames.push_back({w, 0});
        } else if (on_stack[static_cast<std::size_t>(w)]) {
          low[static_cast<std::size_t>(f.node)] =
              std::min(low[static_cast<std::size_t>(f.node)], index[static_cast<std::size_t>(w)]);
        }
      } else {
        int v = f.node;
        frames.pop_back();
        if (!frames.empty())
          low[static_cast<std::size_t>(frames.back().node)] = std::min(
              low[static_cast<std::size_t>(frames.back().node)], low[static_cast<std::size_t>(v)]);
        if (low[static_cast<std::size_t>(v)] == index[static_cast<std::size_t>(v)]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[static_cast<std::size_t>(w)] = false;
            comp_of[static_cast<std::size_t>(w)] = comp_count;
            if (w == v) break;
          }
          ++comp_count;
        }
      }
    }
  }

  // Cross arcs point from later blocks to earlier ones; emit sinks first.
  std::vector<std::vector<bool>> edge(static_cast<std::size_t>(comp_count),
                                      std::vector<bool>(static_cast<std::size_t>(comp_count), false));
  std::vector<int> out_deg(static_cast<std::size_t>(comp_count), 0);
  for (const BpArc& a : bp.arcs) {
    int cu = comp_of[static_cast<std::size_t>(a.x)], cv = comp_of[static_cast<std::size_t>(nx + a.y)];
    if (cu != cv && !edge[static_cast<std::size_t>(cu)][static_cast<std::size_t>(cv)]) {
      edge[static_cast<std::size_t>(cu)][static_cast<std::size_t>(cv)] = true;
      ++out_deg[static_cast<std::size_t>(cu)];
    }
  }
  std::vector<int> min_node(static_cast<std::size_t>(comp_count), n);
  for (int z = 0; z < n; ++z) {
    int c = comp_of[static_cast<std::size_t>(z)];
    min_node[static_cast<std::size_t>(c)] = std::min(min_node[static_cast<std::size_t>(c)], z);
  }

  std::vector<bool> emitted(static_cast<std::size_t>(comp_count), false);
  std::vector<BipartiteBlock> blocks;
  for (int round = 0; round < comp_count; ++round) {
    int pick = -1;
    for (int c = 0; c < comp_count; ++c) {
      if (emitted[static_cast<std::size_t>(c)] || out_deg[static_cast<std::size_t>(c)] != 0)
        continue;
      if (pick < 0 || min_node[static_cast<std::size_t>(c)] < min_node[static_cast<std::size_t>(pick)])
        pick = c;
    }
    if (pick < 0) throw SolveDiagnostic(DiagnosticKind::kInternal, "block condensation is cyclic");
    emitted[static_cast<std::size_t>(pick)] = true;
    BipartiteBlock blk;
    for (int x = 0; x < nx; ++x)
      if (comp_of[static_cast<std::size_t>(x)] == pick) blk.xs.push_back(x);
    for (int y = 0; y < ny; ++y)
      if (comp_of[static_cast<std::size_t>(nx + y)] == pick) blk.ys.push_back(y);
    blocks.push_back(std::move(blk));
    for (int c = 0; c < comp_count; ++c)
      if (!emitted[static_cast<std::size_t>(c)] &&
          edge[static_cast<std::size_t>(c)][static_cast<std::size_t>(pick)])
        --out_deg[static_cast<std::size_t>(c)];
  }
  return blocks;
}

// Full bipartite solve: decompose into blocks, solve each through the penalty
// escalation with its own ground, and raise later grounds until every
// cross-block arc (later X to earlier Y) has nonpositive rent. The monotone
// price response that step relies on is verified, not assumed.
inline BipartiteEquilibrium solve_bipartite(const BipartiteProblem& bp, double tol) {
  bp.validate();
  HallReport hall = hall_check(bp);
  if (!hall.ok) {
    std::vector<std::string> names;
    for (int x : hall.violating_K) names.push_back(bp.x_names[static_cast<std::size_t>(x)]);
    throw SolveDiagnostic(DiagnosticKind::kHallViolation,
                          "Hall's condition fails: a source set undersupplies its captive targets",
                          names, hall.supply - hall.demand);
  }

  std::vector<BipartiteBlock> blocks = block_decompose(bp);
  BipartiteEquilibrium out;
  out.px.assign(static_cast<std::size_t>(bp.x_count()), 0.0);
  out.py.assign(static_cast<std::size_t>(bp.y_count()), 0.0);
  out.flow.assign(bp.arcs.size(), 0.0);
  out.blocks = static_cast<int>(blocks.size());
  std::vector<bool> y_solved(static_cast<std::size_t>(bp.y_count()), false);

  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const BipartiteBlock& blk = blocks[k];
    BipartiteProblem sub;
    std::vector<int> x_of(static_cast<std::size_t>(bp.x_count()), -1),
        y_of(static_cast<std::size_t>(bp.y_count()), -1);
    for (int x : blk.xs) {
      x_of[static_cast<std::size_t>(x)] = static_cast<int>(sub.n.size());
      sub.x_names.push_back(bp.x_names[static_cast<std::size_t>(x)]);
      sub.n.push_back(bp.n[static_cast<std::size_t>(x)]);
    }
    for (int y : blk.ys) {
      y_of[static_cast<std::size_t>(y)] = static_cast<int>(sub.m.size());
      sub.y_names.push_back(bp.y_names[static_cast<std::size_t>(y)]);
      sub.m.push_back(bp.m[static_cast<std::size_t>(y)]);
    }
    std::vector<int> sub_arc_of;  // sub arc -> original arc index
    for (std::size_t i = 0; i < bp.arcs.size(); ++i) {
      const BpArc& a = bp.arcs[i];
      if (x_of[static_cast<std::size_t>(a.x)] >= 0 && y_of[static_cast<std::size_t>(a.y)] >= 0) {
        sub.arcs.push_back(BpArc{x_of[static_cast<std::size_t>(a.x)],
                                 y_of[static_cast<std::size_t>(a.y)], a.g, a.penalty_added});
        sub_arc_of.push_back(static_cast<int>(i));
      }
    }

    // Rent floor per block source imposed by already-priced earlier targets.
    // Arcs into later blocks' targets cannot exist by construction.
    std::vector<double> floor_px(sub.n.size(), kNegInf);
    for (std::size_t i = 0; i < bp.arcs.size(); ++i) {
      const BpArc& a = bp.arcs[i];
      if (x_of[static_cast<std::size_t>(a.x)] < 0 || y_of[static_cast<std::size_t>(a.y)] >= 0)
        continue;
      if (!y_solved[static_cast<std::size_t>(a.y)])
        throw SolveDiagnostic(DiagnosticKind::kInternal,
                              "block ordering admits an arc into an unsolved block");
      double thr = a.g(out.py[static_cast<std::size_t>(a.y)]);
      auto& fl = floor_px[static_cast<std::size_t>(x_of[static_cast<std::size_t>(a.x)])];
      fl = std::max(fl, thr);
    }

    int ground = 0;  // lowest original index comes first in blk.xs
    double gv = 0.0;
    BipartiteEquilibrium sol = escalate_penalty(sub, ground, tol, gv);
    BipartiteEquilibrium prev = sol;
    double bump = 1.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
      double worst = 0.0;
      for (std::size_t x = 0; x < sub.n.size(); ++x)
        if (floor_px[x] > kNegInf) worst = std::max(worst, floor_px[x] - sol.px[x]);
      if (worst <= tol) break;
      gv += worst + bump;
      bump *= 2.0;
      prev = sol;
      sol = escalate_penalty(sub, ground, tol, gv);
      for (std::size_t x = 0; x < sub.n.size(); ++x)
        if (sol.px[x] < prev.px[x] - 10.0 * tol)
          throw SolveDiagnostic(
              DiagnosticKind::kNoConvergence,
              "block ground raise lowered an equilibrium price; monotone response failed for "
              "source '" + sub.x_names[x] + "'");
      for (std::size_t y = 0; y < sub.m.size(); ++y)
        if (sol.py[y] < prev.py[y] - 10.0 * tol)
          throw SolveDiagnostic(
              DiagnosticKind::kNoConvergence,
              "block ground raise lowered an equilibrium price; monotone response failed for "
              "target '" + sub.y_names[y] + "'");
    }
    double worst = 0.0;
    for (std::size_t x = 0; x < sub.n.size(); ++x)
      if (floor_px[x] > kNegInf) worst = std::max(worst, floor_px[x] - sol.px[x]);
    if (worst > tol)
      throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                            "could not clear cross-block rents by raising the block ground");

    for (std::size_t x = 0; x < sub.n.size(); ++x)
      out.px[static_cast<std::size_t>(blk.xs[x])] = sol.px[x];
    for (std::size_t y = 0; y < sub.m.size(); ++y) {
      out.py[static_cast<std::size_t>(blk.ys[y])] = sol.py[y];
      y_solved[static_cast<std::size_t>(blk.ys[y])] = true;
    }
    for (std::size_t i = 0; i < sub_arc_of.size(); ++i)
      out.flow[static_cast<std::size_t>(sub_arc_of[i])] = sol.flow[i];
    out.iterations += sol.iterations;
    out.penalty_n = std::max(out.penalty_n, sol.penalty_n);
    out.doublings += sol.doublings;
    if (k == 0) {
      out.ground_x = blk.xs.front();
      out.ground_value = 0.0;
    }
  }
  compute_bipartite_residuals(bp, out);
  return out;
}

}  // namespace eqflow
