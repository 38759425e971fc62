#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "eqflow/analysis.hpp"
#include "eqflow/bipartite.hpp"
#include "eqflow/connection.hpp"
#include "eqflow/errors.hpp"
#include "eqflow/feasibility.hpp"
#include "eqflow/network.hpp"

namespace eqflow {

// One solver input instance: network, per-arc connection, exit flow.
struct FlowProblem {
  Network net;
  std::vector<Connection> g;
  ExitFlow q;

  void validate() const {
    if (static_cast<int>(g.size()) != net.arc_count())
      throw ValidationError("flow problem: every arc needs a connection function");
    validate_exit_flow(net, q);
  }
};

struct Certificate {
  double balance_residual = 0.0;
  double max_positive_rent = 0.0;
  double cs_residual = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct SolverMeta {
  std::string ground;
  double penalty_n = 0.0;
  int blocks = 0;
  int doublings = 0;
  long bipartite_iterations = 0;
  int extension_sweeps = 0;
  bool y_price_changed = false;
  int pruned_nodes = 0;
};

struct EquilibriumOutcome {
  ExitFlow q;
  InternalFlow mu;
  std::vector<double> p;
  Certificate certificate;
  SolverMeta meta;
};

// Solver-independent certificate check of Definition 1:
//   (i) balance residual, (ii) worst positive rent, (iii) slackness sum.
inline Certificate verify_equilibrium(const FlowProblem& fp, const EquilibriumOutcome& out,
                                      double tol) {
  fp.validate();
  if (static_cast<int>(out.p.size()) != fp.net.node_count() ||
      static_cast<int>(out.mu.mu.size()) != fp.net.arc_count() ||
      static_cast<int>(out.q.q.size()) != fp.net.node_count())
    throw ValidationError("verify_equilibrium: outcome dimensions do not match the problem");
  validate_internal_flow(fp.net, out.mu);
  Certificate cert;
  cert.tol = tol;
  std::vector<double> lhs = incidence_apply(fp.net, out.mu);
  for (int z = 0; z < fp.net.node_count(); ++z)
    cert.balance_residual = std::max(
        cert.balance_residual,
        std::abs(lhs[static_cast<std::size_t>(z)] - out.q.q[static_cast<std::size_t>(z)]));
  for (int a = 0; a < fp.net.arc_count(); ++a) {
    const Arc& arc = fp.net.arc(a);
    double thr = fp.g[static_cast<std::size_t>(a)](out.p[static_cast<std::size_t>(arc.to)]);
    double rent = thr - out.p[static_cast<std::size_t>(arc.from)];
    cert.max_positive_rent = std::max(cert.max_positive_rent, rent);
    cert.cs_residual += out.mu.mu[static_cast<std::size_t>(a)] *
                        std::abs(out.p[static_cast<std::size_t>(arc.from)] - thr);
  }
  cert.max_positive_rent = std::max(cert.max_positive_rent, 0.0);
  cert.pass = cert.balance_residual <= tol && cert.max_positive_rent <= tol &&
              cert.cs_residual <= tol;
  return cert;
}

// (q, mu, p) -> (lambda q, lambda mu, p). Conditions (i) and (iii) are linear
// in the masses, condition (ii) does not involve them.
inline EquilibriumOutcome scale_outcome(const EquilibriumOutcome& out, double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("scale_outcome: lambda must be >= 0");
  EquilibriumOutcome scaled = out;
  for (double& v : scaled.q.q) v *= lambda;
  for (double& v : scaled.mu.mu) v *= lambda;
  scaled.certificate.balance_residual *= lambda;
  scaled.certificate.cs_residual *= lambda;
  double tol = scaled.certificate.tol;
  scaled.certificate.pass = scaled.certificate.balance_residual <= tol * std::max(1.0, lambda) &&
                            scaled.certificate.max_positive_rent <= tol &&
                            scaled.certificate.cs_residual <= tol * std::max(1.0, lambda);
  return scaled;
}

// The associated bipartite problem: X = {q < 0}, Y = {q > 0}, margins from q,
// one arc per source-target pair with a directed path, carrying the exact
// reduced connection.
inline BipartiteProblem reduce_to_bipartite(const FlowProblem& fp) {
  fp.validate();
  BipartiteProblem bp;
  std::vector<int> x_nodes, y_nodes;
  for (int z = 0; z < fp.net.node_count(); ++z) {
    double qv = fp.q.q[static_cast<std::size_t>(z)];
    if (qv < 0.0) {
      x_nodes.push_back(z);
      bp.x_names.push_back(fp.net.name(z));
      bp.n.push_back(-qv);
    } else if (qv > 0.0) {
      y_nodes.push_back(z);
      bp.y_names.push_back(fp.net.name(z));
      bp.m.push_back(qv);
    }
  }
  for (std::size_t yi = 0; yi < y_nodes.size(); ++yi) {
    ReducedProfile profile = reduced_connection_profile(fp.net, fp.g, y_nodes[yi]);
    if (profile.diverged) {
      std::vector<std::string> names;
      for (int z : profile.diverging_nodes) names.push_back(fp.net.name(z));
      throw SolveDiagnostic(DiagnosticKind::kProfitableLoop,
                            "reduced connection diverges: a profitable loop feeds the supremum",
                            names);
    }
    for (std::size_t xi = 0; xi < x_nodes.size(); ++xi) {
      const auto& fn = profile.toward[static_cast<std::size_t>(x_nodes[xi])];
      if (fn) bp.arcs.push_back(BpArc{static_cast<int>(xi), static_cast<int>(yi), *fn, false});
    }
  }
  return bp;
}

struct PriceExtension {
  std::vector<double> p;
  int sweeps = 0;
  bool y_price_changed = false;
};

// The max-update iteration of the reverse construction: prices start on
// X u Y from the bipartite solution, everything else at -inf, and every node
// repeatedly takes the best threshold over its out-arcs. Stationary in at
// most |Z| sweeps on loop-free instances; the |Z||A|+|Z| cap only trips if a
// profitable loop slipped through the earlier checks.
inline PriceExtension extend_prices(const FlowProblem& fp, const BipartiteProblem& bp,
                                    const BipartiteEquilibrium& be) {
  fp.validate();
  const int n = fp.net.node_count();
  PriceExtension ext;
  ext.p.assign(static_cast<std::size_t>(n), kNegInf);
  std::vector<bool> is_y(static_cast<std::size_t>(n), false);
  for (std::size_t i = 0; i < bp.x_names.size(); ++i)
    ext.p[static_cast<std::size_t>(fp.net.node_index(bp.x_names[i]))] = be.px[i];
  for (std::size_t i = 0; i < bp.y_names.size(); ++i) {
    int z = fp.net.node_index(bp.y_names[i]);
    ext.p[static_cast<std::size_t>(z)] = be.py[i];
    is_y[static_cast<std::size_t>(z)] = true;
  }

  const long cap = static_cast<long>(n) * std::max(1, fp.net.arc_count()) + n + 2;
  while (true) {
    bool changed = false;
    for (int z = 0; z < n; ++z) {
      double best = kNegInf;
      for (int a : fp.net.out_arcs(z)) {
        double pw = ext.p[static_cast<std::size_t>(fp.net.arc(a).to)];
        if (pw == kNegInf) continue;
        best = std::max(best, fp.g[static_cast<std::size_t>(a)](pw));
      }
      if (best == kNegInf) continue;
      double cur = ext.p[static_cast<std::size_t>(z)];
      double eps = 1e-12 * std::max(1.0, std::abs(best));
      if (best > cur + eps) {
        ext.p[static_cast<std::size_t>(z)] = best;
        changed = true;
        if (is_y[static_cast<std::size_t>(z)]) ext.y_price_changed = true;
      }
    }
    if (!changed) break;
    if (++ext.sweeps > cap)
      throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                            "price extension failed to reach a fixed point; a profitable loop "
                            "may have slipped through tolerances");
  }
  for (int z = 0; z < n; ++z)
    if (ext.p[static_cast<std::size_t>(z)] == kNegInf)
      throw SolveDiagnostic(DiagnosticKind::kDeadNode,
                            "node '" + fp.net.name(z) + "' has no path to a priced node",
                            {fp.net.name(z)});
  return ext;
}

// Route q on the arcs whose rent vanishes at the extended prices. The theory
// says a consistent flow exists; numerically the slack ladder widens a few
// times before giving up.
inline InternalFlow reconstruct_flow(const FlowProblem& fp, const std::vector<double>& p,
                                     double tol) {
  fp.validate();
  double scale = 1.0;
  for (double v : p) scale = std::max(scale, std::abs(v));
  double mass = 0.0;
  for (double v : fp.q.q)
    if (v > 0.0) mass += v;
  mass = std::max(1.0, mass);

  const double rungs[4] = {1e-11 * scale, tol / (5.0 * mass), tol / 2.0, 10.0 * tol};
  for (double eps_rent : rungs) {
    std::vector<std::pair<int, int>> sub_arcs;
    std::vector<int> arc_of;
    for (int a = 0; a < fp.net.arc_count(); ++a) {
      const Arc& arc = fp.net.arc(a);
      double thr = fp.g[static_cast<std::size_t>(a)](p[static_cast<std::size_t>(arc.to)]);
      if (std::abs(p[static_cast<std::size_t>(arc.from)] - thr) <= eps_rent) {
        sub_arcs.emplace_back(arc.from, arc.to);
        arc_of.push_back(a);
      }
    }
    Network sub(fp.net.names(), sub_arcs);
    FeasibilityReport rep = check_feasibility(sub, fp.q);
    if (!rep.feasible) continue;
    InternalFlow mu;
    mu.mu.assign(static_cast<std::size_t>(fp.net.arc_count()), 0.0);
    for (std::size_t i = 0; i < arc_of.size(); ++i)
      mu.mu[static_cast<std::size_t>(arc_of[i])] = rep.witness_flow.mu[i];
    return mu;
  }
  throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                        "no feasible flow on the zero-rent subnetwork: tolerance too tight or "
                        "bipartite solution inconsistent");
}

namespace detail {

// Prices for nodes removed by pruning. Such nodes never have arcs into live
// nodes, so only upper bounds (from live tails) and internal lower bounds
// constrain them; starting the max-update iteration low enough satisfies
// both. Returns the filled price vector.
inline std::vector<double> attach_dead_prices(const FlowProblem& fp,
                                              const std::vector<bool>& dead,
                                              std::vector<double> p) {
  const int n = fp.net.node_count();
  bool any_dead = false;
  for (int z = 0; z < n; ++z) any_dead = any_dead || dead[static_cast<std::size_t>(z)];
  if (!any_dead) return p;

  double scale = 1.0;
  for (int z = 0; z < n; ++z)
    if (!dead[static_cast<std::size_t>(z)]) scale = std::max(scale, std::abs(p[static_cast<std::size_t>(z)]));
  for (const Connection& c : fp.g) scale = std::max(scale, std::abs(c(0.0)));

  double m = 4.0 * scale;
  for (int attempt = 0; attempt < 60; ++attempt, m *= 4.0) {
    std::vector<double> trial = p;
    for (int z = 0; z < n; ++z)
      if (dead[static_cast<std::size_t>(z)]) trial[static_cast<std::size_t>(z)] = -m;
    // Max-update restricted to dead nodes; their successors are all dead.
    for (int sweep = 0; sweep <= n + 1; ++sweep) {
      bool changed = false;
      for (int z = 0; z < n; ++z) {
        if (!dead[static_cast<std::size_t>(z)]) continue;
        for (int a : fp.net.out_arcs(z)) {
          double cand = fp.g[static_cast<std::size_t>(a)](
              trial[static_cast<std::size_t>(fp.net.arc(a).to)]);
          if (cand > trial[static_cast<std::size_t>(z)] + 1e-12 * std::max(1.0, std::abs(cand))) {
            trial[static_cast<std::size_t>(z)] = cand;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    // Live tails must keep nonpositive rent on arcs into dead heads.
    bool ok = true;
    for (int a = 0; a < fp.net.arc_count() && ok; ++a) {
      const Arc& arc = fp.net.arc(a);
      if (dead[static_cast<std::size_t>(arc.to)] && !dead[static_cast<std::size_t>(arc.from)]) {
        double thr = fp.g[static_cast<std::size_t>(a)](trial[static_cast<std::size_t>(arc.to)]);
        if (thr > p[static_cast<std::size_t>(arc.from)]) ok = false;
      }
    }
    if (ok) return trial;
  }
  throw SolveDiagnostic(DiagnosticKind::kNoConvergence,
                        "could not attach prices to pruned nodes");
}

}  // namespace detail

struct SolveOptions {
  double tol = 1e-8;
  bool ring_check = true;       // cross-validate feasibility vs Hall (the closing lemma)
  double price_box = 1e6;       // loop certification box
  std::optional<std::string> ground;  // override the default lowest-index source
};

// The constructive existence pipeline: prune irrelevant nodes, certify the
// assumptions, reduce to the bipartite problem, solve it, extend prices back
// over the whole network, rebuild the flow on zero-rent arcs, and certify the
// result against the original problem.
inline EquilibriumOutcome solve(const FlowProblem& fp, const SolveOptions& opts = {}) {
  fp.validate();
  if (!(opts.tol > 0.0)) throw ValidationError("solve: tol must be > 0");
  const double tol_inner = opts.tol / 10.0;

  PrunedProblem pruned = prune_dead_nodes(fp.net, fp.q);
  FlowProblem live;
  live.net = pruned.net;
  live.q = pruned.q;
  std::vector<int> orig_arc_of;  // live arc index -> original arc index
  for (int a = 0; a < fp.net.arc_count(); ++a) {
    const Arc& arc = fp.net.arc(a);
    int u = pruned.new_of_old[static_cast<std::size_t>(arc.from)];
    int v = pruned.new_of_old[static_cast<std::size_t>(arc.to)];
    if (u >= 0 && v >= 0) {
      live.g.push_back(fp.g[static_cast<std::size_t>(a)]);
      orig_arc_of.push_back(a);
    }
  }

  // Assumption 3 concerns the whole network, pruned parts included: their
  // prices still have to exist.
  LoopReport loops = check_no_profitable_loops(fp.net, fp.g, opts.price_box);
  if (!loops.ok) {
    std::vector<std::string> names;
    for (int z : loops.violating_loop) names.push_back(fp.net.name(z));
    throw SolveDiagnostic(DiagnosticKind::kProfitableLoop,
                          "profitable loop: moving mass around it earns " +
                              std::to_string(loops.profit) + " at price " +
                              std::to_string(loops.sample_price),
                          names, loops.profit);
  }

  FeasibilityReport feas = check_feasibility(live.net, live.q);
  if (!feas.feasible) {
    std::vector<std::string> names;
    for (int z : feas.violating_set) names.push_back(live.net.name(z));
    throw SolveDiagnostic(DiagnosticKind::kInfeasible,
                          "retaining set with deficit " + std::to_string(feas.deficit) +
                              ": exit flow is not transportable",
                          names, feas.deficit);
  }

  EquilibriumOutcome out;
  out.q = fp.q;
  out.mu.mu.assign(static_cast<std::size_t>(fp.net.arc_count()), 0.0);
  out.meta.pruned_nodes = fp.net.node_count() - live.net.node_count();

  BipartiteProblem bp = reduce_to_bipartite(live);
  std::vector<double> live_p(static_cast<std::size_t>(live.net.node_count()), 0.0);

  if (bp.x_count() == 0) {
    // q vanishes on the live part: (0, 0, p) is an equilibrium for any p
    // with no positive rents; the attachment step below builds one.
    out.meta.ground = "";
    out.meta.blocks = 0;
  } else {
    if (opts.ring_check) {
      HallReport hall = hall_check(bp);
      if (!hall.ok)
        throw SolveDiagnostic(DiagnosticKind::kInternal,
                              "feasibility holds but Hall fails on the reduction; "
                              "this contradicts the closing lemma");
    }
    BipartiteEquilibrium be = solve_bipartite(bp, tol_inner);
    if (opts.ground) {
      // Re-anchor: solve again with the requested ground if it differs.
      int gx = -1;
      for (std::size_t i = 0; i < bp.x_names.size(); ++i)
        if (bp.x_names[i] == *opts.ground) gx = static_cast<int>(i);
      if (gx < 0)
        throw ValidationError("solve: ground '" + *opts.ground + "' is not a source node");
      // The block containing it keeps its own ground; shifting the whole
      // solution is only exact for TU, so instead translate prices when
      // possible and otherwise keep the computed normalization.
      if (detail::transferable_utility(bp)) {
        double shift = -be.px[static_cast<std::size_t>(gx)];
        for (double& v : be.px) v += shift;
        for (double& v : be.py) v += shift;
        be.ground_x = gx;
        be.px[static_cast<std::size_t>(gx)] = 0.0;
      }
    }
    out.meta.ground = bp.x_names[static_cast<std::size_t>(be.ground_x)];
    out.meta.penalty_n = be.penalty_n;
    out.meta.blocks = be.blocks;
    out.meta.doublings = be.doublings;
    out.meta.bipartite_iterations = be.iterations;

    PriceExtension ext = extend_prices(live, bp, be);
    out.meta.extension_sweeps = ext.sweeps;
    out.meta.y_price_changed = ext.y_price_changed;
    live_p = ext.p;

    InternalFlow live_mu = reconstruct_flow(live, live_p, opts.tol);
    for (int a = 0; a < live.net.arc_count(); ++a)
      out.mu.mu[static_cast<std::size_t>(orig_arc_of[static_cast<std::size_t>(a)])] =
          live_mu.mu[static_cast<std::size_t>(a)];
  }

  // Prices over the original node set; pruned nodes get attached afterwards.
  std::vector<bool> dead(static_cast<std::size_t>(fp.net.node_count()), true);
  out.p.assign(static_cast<std::size_t>(fp.net.node_count()), kNegInf);
  for (int z = 0; z < live.net.node_count(); ++z) {
    int orig = pruned.old_of_new[static_cast<std::size_t>(z)];
    dead[static_cast<std::size_t>(orig)] = false;
    out.p[static_cast<std::size_t>(orig)] = live_p[static_cast<std::size_t>(z)];
  }
  out.p = detail::attach_dead_prices(fp, dead, std::move(out.p));

  out.certificate = verify_equilibrium(fp, out, opts.tol);
  return out;
}

}  // namespace eqflow
