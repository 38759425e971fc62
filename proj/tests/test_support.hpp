#pragma once

// Shared generators and independent oracles for the test suites. The oracles
// deliberately avoid the library's algorithm paths: loop checking by explicit
// cycle enumeration with hand-folded affine composition, and min-cost flow by
// plain Bellman-Ford successive shortest paths on the original network.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "eqflow/connection.hpp"
#include "eqflow/network.hpp"

namespace eqtest {

inline eqflow::Network random_network(std::mt19937& rng, int n, double density) {
  std::vector<std::string> names;
  for (int z = 0; z < n; ++z) names.push_back("v" + std::to_string(z));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<int, int>> arcs;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (u != v && coin(rng) < density) arcs.push_back({u, v});
  return eqflow::Network(names, arcs);
}

// Integer exit flows in [lo, hi] summing to zero exactly.
inline eqflow::ExitFlow random_balanced_q(std::mt19937& rng, int n, int lo = -5, int hi = 5) {
  eqflow::ExitFlow q;
  q.q.assign(static_cast<std::size_t>(n), 0.0);
  if (n < 2) return q;
  std::uniform_int_distribution<int> node(0, n - 1), step(1, 3);
  for (int moves = 0; moves < 2 * n; ++moves) {
    int i = node(rng), j = node(rng);
    if (i == j) continue;
    int v = step(rng);
    if (q.q[static_cast<std::size_t>(i)] + v <= hi && q.q[static_cast<std::size_t>(j)] - v >= lo) {
      q.q[static_cast<std::size_t>(i)] += v;
      q.q[static_cast<std::size_t>(j)] -= v;
    }
  }
  return q;
}

inline std::vector<eqflow::Connection> random_tu_connections(std::mt19937& rng, int arc_count,
                                                             int cmin = 1, int cmax = 9) {
  std::uniform_int_distribution<int> cost(cmin, cmax);
  std::vector<eqflow::Connection> g;
  for (int a = 0; a < arc_count; ++a)
    g.push_back(eqflow::Connection::affine(1.0, -double(cost(rng))));
  return g;
}

// Slopes from an exactly-representable set, integer intercepts.
inline std::vector<eqflow::Connection> random_affine_connections(std::mt19937& rng,
                                                                 int arc_count) {
  const double slopes[5] = {0.5, 1.0, 1.0, 1.0, 2.0};
  std::uniform_int_distribution<int> si(0, 4), ic(-3, 3);
  std::vector<eqflow::Connection> g;
  for (int a = 0; a < arc_count; ++a)
    g.push_back(eqflow::Connection::affine(slopes[si(rng)], double(ic(rng))));
  return g;
}

// ---------------------------------------------------------------------------
// Loop oracle: every simple cycle, tested on its hand-folded affine collapse.
// ---------------------------------------------------------------------------

inline bool affine_cycle_violates(const eqflow::Network& net,
                                  const std::vector<eqflow::Connection>& g,
                                  const std::vector<int>& cycle) {
  double slope = 1.0, intercept = 0.0;  // identity
  for (std::size_t i = cycle.size(); i-- > 0;) {
    int u = cycle[i], w = cycle[(i + 1) % cycle.size()];
    eqflow::Affine arc = g[static_cast<std::size_t>(*net.find_arc(u, w))].as_affine();
    slope = arc.slope * slope;
    intercept = arc.slope * intercept + arc.intercept;
  }
  return !(slope == 1.0 && intercept < 0.0);
}

inline bool oracle_has_profitable_loop(const eqflow::Network& net,
                                       const std::vector<eqflow::Connection>& g) {
  const int n = net.node_count();
  bool found = false;
  std::vector<bool> on_path(static_cast<std::size_t>(n), false);
  std::vector<int> path;
  std::function<void(int, int)> dfs = [&](int root, int u) {
    if (found) return;
    for (int a : net.out_arcs(u)) {
      int w = net.arc(a).to;
      if (w < root) continue;
      if (w == root) {
        if (affine_cycle_violates(net, g, path)) {
          found = true;
          return;
        }
        continue;
      }
      if (on_path[static_cast<std::size_t>(w)]) continue;
      on_path[static_cast<std::size_t>(w)] = true;
      path.push_back(w);
      dfs(root, w);
      path.pop_back();
      on_path[static_cast<std::size_t>(w)] = false;
    }
  };
  for (int root = 0; root < n && !found; ++root) {
    path.assign(1, root);
    std::fill(on_path.begin(), on_path.end(), false);
    on_path[static_cast<std::size_t>(root)] = true;
    dfs(root, root);
  }
  return found;
}

// ---------------------------------------------------------------------------
// Reduced-connection oracle: max over simple paths of the composed value.
// ---------------------------------------------------------------------------

inline double oracle_reduced_value(const eqflow::Network& net,
                                   const std::vector<eqflow::Connection>& g, int x, int y,
                                   double p_y) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<bool> used(static_cast<std::size_t>(net.node_count()), false);
  std::vector<int> arcs_taken;
  std::function<void(int)> dfs = [&](int u) {
    if (u == y && !arcs_taken.empty()) {
      double v = p_y;
      for (auto it = arcs_taken.rbegin(); it != arcs_taken.rend(); ++it)
        v = g[static_cast<std::size_t>(*it)](v);
      best = std::max(best, v);
      return;  // simple paths only: stop at first arrival
    }
    for (int a : net.out_arcs(u)) {
      int w = net.arc(a).to;
      if (used[static_cast<std::size_t>(w)]) continue;
      used[static_cast<std::size_t>(w)] = true;
      arcs_taken.push_back(a);
      dfs(w);
      arcs_taken.pop_back();
      used[static_cast<std::size_t>(w)] = false;
    }
  };
  used[static_cast<std::size_t>(x)] = true;
  dfs(x);
  return best;
}

// ---------------------------------------------------------------------------
// Min-cost flow oracle on the original network (Bellman-Ford SSP).
// ---------------------------------------------------------------------------

struct MinCostResult {
  bool feasible = false;
  double cost = 0.0;
  std::vector<double> flow;  // per arc
};

inline MinCostResult oracle_min_cost_flow(const eqflow::Network& net, const eqflow::ExitFlow& q,
                                          const std::vector<double>& cost) {
  const int n = net.node_count();
  const int s = n, t = n + 1;
  struct E {
    int to;
    double cap, cost;
    int rev;
  };
  std::vector<std::vector<E>> adj(static_cast<std::size_t>(n + 2));
  auto add = [&](int u, int v, double cap, double c) {
    adj[static_cast<std::size_t>(u)].push_back({v, cap, c, int(adj[static_cast<std::size_t>(v)].size())});
    adj[static_cast<std::size_t>(v)].push_back({u, 0.0, -c, int(adj[static_cast<std::size_t>(u)].size()) - 1});
  };
  std::vector<std::pair<int, int>> arc_pos;
  for (int a = 0; a < net.arc_count(); ++a) {
    arc_pos.push_back({net.arc(a).from, int(adj[static_cast<std::size_t>(net.arc(a).from)].size())});
    add(net.arc(a).from, net.arc(a).to, std::numeric_limits<double>::infinity(),
        cost[static_cast<std::size_t>(a)]);
  }
  double want = 0.0;
  for (int z = 0; z < n; ++z) {
    if (q.q[static_cast<std::size_t>(z)] < 0.0) add(s, z, -q.q[static_cast<std::size_t>(z)], 0.0);
    if (q.q[static_cast<std::size_t>(z)] > 0.0) {
      add(z, t, q.q[static_cast<std::size_t>(z)], 0.0);
      want += q.q[static_cast<std::size_t>(z)];
    }
  }
  double sent = 0.0, total_cost = 0.0;
  const double eps = 1e-9;
  while (sent < want - eps) {
    std::vector<double> dist(static_cast<std::size_t>(n + 2),
                             std::numeric_limits<double>::infinity());
    std::vector<std::pair<int, int>> via(static_cast<std::size_t>(n + 2), {-1, -1});
    dist[static_cast<std::size_t>(s)] = 0.0;
    for (int round = 0; round < n + 2; ++round) {
      bool relaxed = false;
      for (int u = 0; u < n + 2; ++u) {
        if (dist[static_cast<std::size_t>(u)] == std::numeric_limits<double>::infinity()) continue;
        for (std::size_t ei = 0; ei < adj[static_cast<std::size_t>(u)].size(); ++ei) {
          const E& e = adj[static_cast<std::size_t>(u)][ei];
          if (e.cap <= eps) continue;
          double nd = dist[static_cast<std::size_t>(u)] + e.cost;
          if (nd < dist[static_cast<std::size_t>(e.to)] - 1e-12) {
            dist[static_cast<std::size_t>(e.to)] = nd;
            via[static_cast<std::size_t>(e.to)] = {u, int(ei)};
            relaxed = true;
          }
        }
      }
      if (!relaxed) break;
    }
    if (dist[static_cast<std::size_t>(t)] == std::numeric_limits<double>::infinity())
      return {};  // infeasible
    double bn = want - sent;
    for (int v = t; v != s;) {
      auto [u, ei] = via[static_cast<std::size_t>(v)];
      bn = std::min(bn, adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(ei)].cap);
      v = u;
    }
    for (int v = t; v != s;) {
      auto [u, ei] = via[static_cast<std::size_t>(v)];
      E& e = adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(ei)];
      e.cap -= bn;
      adj[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap += bn;
      total_cost += bn * e.cost;
      v = u;
    }
    sent += bn;
  }
  MinCostResult res;
  res.feasible = true;
  res.cost = total_cost;
  res.flow.assign(static_cast<std::size_t>(net.arc_count()), 0.0);
  for (int a = 0; a < net.arc_count(); ++a) {
    auto [u, pos] = arc_pos[static_cast<std::size_t>(a)];
    const E& e = adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(pos)];
    res.flow[static_cast<std::size_t>(a)] =
        adj[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap;
  }
  return res;
}

}  // namespace eqtest
