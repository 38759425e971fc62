#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "eqflow/bipartite_problem.hpp"
#include "eqflow/errors.hpp"
#include "eqflow/maxflow.hpp"
#include "eqflow/network.hpp"

namespace eqflow {

// Outcome of the transportability test. Exactly one of witness_flow /
// violating_set is meaningful: a feasible report carries mu >= 0 with
// nabla^T mu = q; an infeasible one carries a retaining set B with
// q(B) = deficit < 0.
struct FeasibilityReport {
  bool feasible = false;
  InternalFlow witness_flow;
  std::vector<int> violating_set;
  double deficit = 0.0;
};

namespace detail {

inline double positive_mass(const std::vector<double>& q) {
  double p = 0.0;
  for (double v : q)
    if (v > 0.0) p += v;
  return p;
}

}  // namespace detail

// Decides existence of mu >= 0 with nabla^T mu = q by max-flow: super-source
// feeds every deficit node, every surplus node drains to the super-sink,
// original arcs are uncapacitated. Feasible iff the flow saturates all
// surplus. On failure the source side of the canonical min cut, restricted
// to original nodes, is retaining with q(B) < 0.
inline FeasibilityReport check_feasibility(const Network& net, const ExitFlow& q) {
  validate_exit_flow(net, q);
  const int n = net.node_count();
  MaxFlow mf(n + 2);
  const int s = n, t = n + 1;
  std::vector<int> arc_edge(static_cast<std::size_t>(net.arc_count()));
  for (int a = 0; a < net.arc_count(); ++a)
    arc_edge[static_cast<std::size_t>(a)] = mf.add_edge(net.arc(a).from, net.arc(a).to, MaxFlow::kInf);
  for (int z = 0; z < n; ++z) {
    double qv = q.q[static_cast<std::size_t>(z)];
    if (qv < 0.0) mf.add_edge(s, z, -qv);
    if (qv > 0.0) mf.add_edge(z, t, qv);
  }
  double want = detail::positive_mass(q.q);
  double value = mf.run(s, t);
  double tol = all_integral(q.q) ? 0.0 : kMassTol;

  FeasibilityReport report;
  if (value >= want - tol) {
    report.feasible = true;
    report.witness_flow.mu.resize(static_cast<std::size_t>(net.arc_count()));
    for (int a = 0; a < net.arc_count(); ++a)
      report.witness_flow.mu[static_cast<std::size_t>(a)] =
          mf.flow_on(arc_edge[static_cast<std::size_t>(a)]);
    return report;
  }
  std::vector<bool> side = mf.source_side(s);
  for (int z = 0; z < n; ++z)
    if (side[static_cast<std::size_t>(z)]) {
      report.violating_set.push_back(z);
      report.deficit += q.q[static_cast<std::size_t>(z)];
    }
  report.feasible = false;
  return report;
}

// Hoffman verdict for lower <= mu <= upper (upper entries may be +inf).
// The violating set B fails the cut inequality
//   q(B) <= sum_{a in I(B)} upper_a - sum_{a in O(B)} lower_a.
struct HoffmanReport {
  bool feasible = false;
  InternalFlow witness_flow;
  std::vector<int> violating_set;
  double lhs = 0.0;  // q(B)
  double rhs = 0.0;  // the violated bound
};

inline HoffmanReport hoffman_feasible(const Network& net, const ExitFlow& q,
                                      const std::vector<double>& lower,
                                      const std::vector<double>& upper) {
  validate_exit_flow(net, q);
  if (static_cast<int>(lower.size()) != net.arc_count() ||
      static_cast<int>(upper.size()) != net.arc_count())
    throw ValidationError("hoffman_feasible: bound dimension mismatch");
  for (int a = 0; a < net.arc_count(); ++a) {
    double lo = lower[static_cast<std::size_t>(a)], hi = upper[static_cast<std::size_t>(a)];
    if (!(lo >= 0.0) || !std::isfinite(lo))
      throw ValidationError("hoffman_feasible: lower bounds must be finite and >= 0");
    if (!(hi >= lo)) throw ValidationError("hoffman_feasible: need lower <= upper per arc");
  }

  // Substitute mu' = mu - lower: exit flow shifts by nabla^T lower, caps
  // become upper - lower.
  const int n = net.node_count();
  std::vector<double> qp = q.q;
  for (int a = 0; a < net.arc_count(); ++a) {
    qp[static_cast<std::size_t>(net.arc(a).to)] -= lower[static_cast<std::size_t>(a)];
    qp[static_cast<std::size_t>(net.arc(a).from)] += lower[static_cast<std::size_t>(a)];
  }
  MaxFlow mf(n + 2);
  const int s = n, t = n + 1;
  std::vector<int> arc_edge(static_cast<std::size_t>(net.arc_count()), -1);
  for (int a = 0; a < net.arc_count(); ++a) {
    double cap = upper[static_cast<std::size_t>(a)] - lower[static_cast<std::size_t>(a)];
    arc_edge[static_cast<std::size_t>(a)] = mf.add_edge(net.arc(a).from, net.arc(a).to, cap);
  }
  for (int z = 0; z < n; ++z) {
    if (qp[static_cast<std::size_t>(z)] < 0.0) mf.add_edge(s, z, -qp[static_cast<std::size_t>(z)]);
    if (qp[static_cast<std::size_t>(z)] > 0.0) mf.add_edge(z, t, qp[static_cast<std::size_t>(z)]);
  }
  double want = detail::positive_mass(qp);
  double value = mf.run(s, t);
  bool integral = all_integral(q.q) && all_integral(lower);
  if (integral)
    for (double u : upper)
      if (std::isfinite(u) && u != std::floor(u)) integral = false;
  double tol = integral ? 0.0 : kMassTol;

  HoffmanReport report;
  if (value >= want - tol) {
    report.feasible = true;
    report.witness_flow.mu.resize(static_cast<std::size_t>(net.arc_count()));
    for (int a = 0; a < net.arc_count(); ++a)
      report.witness_flow.mu[static_cast<std::size_t>(a)] =
          mf.flow_on(arc_edge[static_cast<std::size_t>(a)]) + lower[static_cast<std::size_t>(a)];
    return report;
  }
  // Sink side violates the inequality in the stated orientation.
  std::vector<bool> side = mf.source_side(s);
  report.feasible = false;
  std::vector<bool> in_b(static_cast<std::size_t>(n), false);
  for (int z = 0; z < n; ++z)
    if (!side[static_cast<std::size_t>(z)]) {
      in_b[static_cast<std::size_t>(z)] = true;
      report.violating_set.push_back(z);
      report.lhs += q.q[static_cast<std::size_t>(z)];
    }
  CutArcs cut = cut_arcs(net, in_b);
  for (int a : cut.inward) report.rhs += upper[static_cast<std::size_t>(a)];
  for (int a : cut.outward) report.rhs -= lower[static_cast<std::size_t>(a)];
  return report;
}

// Brute-force side of the Lemma 1 dual route: enumerate every subset, keep
// the worst retaining one. Test oracle; guarded to 20 nodes.
struct RetainingScan {
  double min_value = 0.0;          // min over retaining B of q(B)
  std::vector<int> argmin_set;     // first minimizer in mask order
  bool feasible = true;            // min_value >= 0 (up to integrality tol)
};

inline RetainingScan retaining_oracle(const Network& net, const ExitFlow& q) {
  validate_exit_flow(net, q);
  const int n = net.node_count();
  if (n > 20) throw ValidationError("retaining_oracle: refusing more than 20 nodes");
  RetainingScan scan;  // B = empty set is retaining with q(B) = 0
  for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
    bool retaining = true;
    for (const Arc& a : net.arcs()) {
      bool fu = (mask >> a.from) & 1ul, fv = (mask >> a.to) & 1ul;
      if (fu && !fv) {
        retaining = false;
        break;
      }
    }
    if (!retaining) continue;
    double val = 0.0;
    for (int z = 0; z < n; ++z)
      if ((mask >> z) & 1ul) val += q.q[static_cast<std::size_t>(z)];
    if (val < scan.min_value) {
      scan.min_value = val;
      scan.argmin_set.clear();
      for (int z = 0; z < n; ++z)
        if ((mask >> z) & 1ul) scan.argmin_set.push_back(z);
    }
  }
  double tol = all_integral(q.q) ? 0.0 : kMassTol;
  scan.feasible = scan.min_value >= -tol;
  return scan;
}

// Assumption: every node either is a target or can reach one. Dead nodes are
// found by reverse BFS from the target set.
struct Assumption2Report {
  bool ok = true;
  std::vector<int> dead_nodes;
};

inline Assumption2Report check_assumption2(const Network& net, const ExitFlow& q) {
  validate_exit_flow(net, q);
  const int n = net.node_count();
  std::vector<bool> reached(static_cast<std::size_t>(n), false);
  std::deque<int> queue;
  for (int z = 0; z < n; ++z)
    if (q.q[static_cast<std::size_t>(z)] > 0.0) {
      reached[static_cast<std::size_t>(z)] = true;
      queue.push_back(z);
    }
  while (!queue.empty()) {
    int z = queue.front();
    queue.pop_front();
    for (int a : net.in_arcs(z)) {
      int w = net.arc(a).from;
      if (!reached[static_cast<std::size_t>(w)]) {
        reached[static_cast<std::size_t>(w)] = true;
        queue.push_back(w);
      }
    }
  }
  Assumption2Report report;
  for (int z = 0; z < n; ++z)
    if (!reached[static_cast<std::size_t>(z)]) report.dead_nodes.push_back(z);
  report.ok = report.dead_nodes.empty();
  return report;
}

struct PrunedProblem {
  Network net;
  ExitFlow q;
  std::vector<int> old_of_new;  // new index -> original index
  std::vector<int> new_of_old;  // original index -> new index, -1 if pruned
};

// Restrict to nodes that can still matter. A dead node with q < 0 cannot ship
// its mass anywhere: the set of nodes reachable from it is retaining with
// negative total, so that is reported as infeasibility instead.
inline PrunedProblem prune_dead_nodes(const Network& net, const ExitFlow& q) {
  Assumption2Report a2 = check_assumption2(net, q);
  for (int z : a2.dead_nodes) {
    if (q.q[static_cast<std::size_t>(z)] < 0.0) {
      // Forward closure from z: retaining, and all of it has q <= 0.
      std::vector<bool> closure(static_cast<std::size_t>(net.node_count()), false);
      std::deque<int> queue{z};
      closure[static_cast<std::size_t>(z)] = true;
      double deficit = 0.0;
      while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        deficit += q.q[static_cast<std::size_t>(u)];
        for (int a : net.out_arcs(u)) {
          int w = net.arc(a).to;
          if (!closure[static_cast<std::size_t>(w)]) {
            closure[static_cast<std::size_t>(w)] = true;
            queue.push_back(w);
          }
        }
      }
      std::vector<std::string> names;
      for (int u = 0; u < net.node_count(); ++u)
        if (closure[static_cast<std::size_t>(u)]) names.push_back(net.name(u));
      throw SolveDiagnostic(DiagnosticKind::kInfeasible,
                            "source node '" + net.name(z) +
                                "' cannot reach any target; its forward closure retains " +
                                std::to_string(deficit) + " units of deficit",
                            names, deficit);
    }
  }
  PrunedProblem out;
  out.new_of_old.assign(static_cast<std::size_t>(net.node_count()), -1);
  std::vector<bool> dead(static_cast<std::size_t>(net.node_count()), false);
  for (int z : a2.dead_nodes) dead[static_cast<std::size_t>(z)] = true;
  std::vector<std::string> names;
  for (int z = 0; z < net.node_count(); ++z) {
    if (dead[static_cast<std::size_t>(z)]) continue;
    out.new_of_old[static_cast<std::size_t>(z)] = static_cast<int>(names.size());
    out.old_of_new.push_back(z);
    names.push_back(net.name(z));
    out.q.q.push_back(q.q[static_cast<std::size_t>(z)]);
  }
  std::vector<std::pair<int, int>> arcs;
  for (const Arc& a : net.arcs()) {
    int u = out.new_of_old[static_cast<std::size_t>(a.from)];
    int v = out.new_of_old[static_cast<std::size_t>(a.to)];
    if (u >= 0 && v >= 0) arcs.emplace_back(u, v);
  }
  out.net = Network(std::move(names), arcs);
  return out;
}

// Hall's condition: every source subset K must cover the demand of targets
// reachable only from K. Brute force up to 20 sources, max-flow beyond.
struct HallReport {
  bool ok = true;
  std::vector<int> violating_K;  // indices into X
  double supply = 0.0;           // n(K)
  double demand = 0.0;           // m(targets whose every in-arc starts in K)
};

inline HallReport hall_check(const BipartiteProblem& bp) {
  bp.validate();
  HallReport report;
  const int nx = bp.x_count(), ny = bp.y_count();
  if (nx <= 20) {
    std::vector<unsigned long> in_mask(static_cast<std::size_t>(ny), 0ul);
    for (const BpArc& a : bp.arcs) in_mask[static_cast<std::size_t>(a.y)] |= 1ul << a.x;
    double worst = 0.0;
    for (unsigned long mask = 0; mask < (1ul << nx); ++mask) {
      double supply = 0.0, demand = 0.0;
      for (int x = 0; x < nx; ++x)
        if ((mask >> x) & 1ul) supply += bp.n[static_cast<std::size_t>(x)];
      for (int y = 0; y < ny; ++y)
        if ((in_mask[static_cast<std::size_t>(y)] & ~mask) == 0ul)
          demand += bp.m[static_cast<std::size_t>(y)];
      double slack = supply - demand;
      if (slack < worst) {
        worst = slack;
        report.violating_K.clear();
        for (int x = 0; x < nx; ++x)
          if ((mask >> x) & 1ul) report.violating_K.push_back(x);
        report.supply = supply;
        report.demand = demand;
      }
    }
    double tol = (all_integral(bp.n) && all_integral(bp.m)) ? 0.0 : kMassTol;
    report.ok = worst >= -tol;
    if (report.ok) report.violating_K.clear();
    return report;
  }

  MaxFlow mf(nx + ny + 2);
  const int s = nx + ny, t = s + 1;
  for (int x = 0; x < nx; ++x) mf.add_edge(s, x, bp.n[static_cast<std::size_t>(x)]);
  for (int y = 0; y < ny; ++y) mf.add_edge(nx + y, t, bp.m[static_cast<std::size_t>(y)]);
  for (const BpArc& a : bp.arcs) mf.add_edge(a.x, nx + a.y, MaxFlow::kInf);
  double value = mf.run(s, t);
  double tol = (all_integral(bp.n) && all_integral(bp.m)) ? 0.0 : kMassTol;
  report.ok = value >= bp.total_mass() - tol;
  if (!report.ok) {
    std::vector<bool> side = mf.source_side(s);
    for (int x = 0; x < nx; ++x)
      if (!side[static_cast<std::size_t>(x)]) {
        report.violating_K.push_back(x);
        report.supply += bp.n[static_cast<std::size_t>(x)];
      }
    std::vector<bool> in_k(static_cast<std::size_t>(nx), false);
    for (int x : report.violating_K) in_k[static_cast<std::size_t>(x)] = true;
    std::vector<bool> only(static_cast<std::size_t>(ny), true);
    for (const BpArc& a : bp.arcs)
      if (!in_k[static_cast<std::size_t>(a.x)]) only[static_cast<std::size_t>(a.y)] = false;
    for (int y = 0; y < ny; ++y)
      if (only[static_cast<std::size_t>(y)]) report.demand += bp.m[static_cast<std::size_t>(y)];
  }
  return report;
}

}  // namespace eqflow
