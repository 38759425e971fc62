#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eqflow/connection.hpp"
#include "eqflow/errors.hpp"
#include "eqflow/network.hpp"

namespace eqflow {

// ---------------------------------------------------------------------------
// Loop profitability (Assumption 3)
// ---------------------------------------------------------------------------

struct LoopReport {
  bool ok = true;
  std::vector<int> violating_loop;  // simple cycle v0,...,vk (closing back to v0)
  double sample_price = 0.0;        // price with H(p) - p >= 0
  double profit = 0.0;              // H(sample) - sample
};

namespace detail {

struct CycleVerdict {
  bool violates = false;
  double sample_price = 0.0;
  double profit = 0.0;
};

// Exact test of "H(p) < p for all p" on a collapsed composition.
// Affine H = sp+b: holds iff s == 1 and b < 0 (any s != 1 has a fixed point).
// Pwl: H - id is piecewise linear; check every kink value and both ray slopes.
inline CycleVerdict test_collapsed(const Connection& h) {
  CycleVerdict v;
  if (h.is_affine_like()) {
    Affine a = h.as_affine();
    if (a.slope == 1.0) {
      if (a.intercept < 0.0) return v;
      v.violates = true;
      v.sample_price = 0.0;
      v.profit = a.intercept;
      return v;
    }
    v.violates = true;
    double fixed = a.intercept / (1.0 - a.slope);
    v.sample_price = a.slope > 1.0 ? fixed + 1.0 : fixed - 1.0;
    v.profit = h(v.sample_price) - v.sample_price;
    return v;
  }
  const Pwl& f = h.as_pwl();
  for (std::size_t i = 0; i < f.x.size(); ++i) {
    double d = f.y[i] - f.x[i];
    if (d >= 0.0) {
      v.violates = true;
      v.sample_price = f.x[i];
      v.profit = d;
      return v;
    }
  }
  if (f.left_slope < 1.0) {
    // H - id grows toward -inf on the left ray.
    double d0 = f.y.front() - f.x.front();
    double p = f.x.front() + d0 / (f.left_slope - 1.0) - 1.0;
    v.violates = true;
    v.sample_price = p;
    v.profit = h(p) - p;
    return v;
  }
  if (f.right_slope > 1.0) {
    double dk = f.y.back() - f.x.back();
    double p = f.x.back() + dk / (1.0 - f.right_slope) + 1.0;
    v.violates = true;
    v.sample_price = p;
    v.profit = h(p) - p;
    return v;
  }
  return v;
}

// Belt-and-braces numeric scan over [-box, box]; the exact kink test above is
// authoritative, this only ever strengthens a violation verdict.
inline CycleVerdict grid_scan(const Connection& h, double box) {
  CycleVerdict v;
  const int kSamples = 1025;
  for (int i = 0; i < kSamples; ++i) {
    double p = -box + (2.0 * box) * static_cast<double>(i) / (kSamples - 1);
    double d = h(p) - p;
    if (d >= 0.0) {
      v.violates = true;
      v.sample_price = p;
      v.profit = d;
      return v;
    }
  }
  return v;
}

// chain[0] is the arc leaving cycle[0].
inline Connection collapse_cycle(const Network& net, const std::vector<Connection>& g,
                                 const std::vector<int>& cycle) {
  ComposedConnection comp;
  for (std::size_t i = cycle.size(); i-- > 0;) {
    int u = cycle[i];
    int w = cycle[(i + 1) % cycle.size()];
    auto a = net.find_arc(u, w);
    if (!a) throw ValidationError("collapse_cycle: missing arc in cycle");
    comp = compose(g[static_cast<std::size_t>(*a)], comp);
  }
  return comp.collapse();
}

// Rotate so the smallest node leads; keeps golden outputs stable.
inline std::vector<int> canonical_rotation(std::vector<int> cycle) {
  auto it = std::min_element(cycle.begin(), cycle.end());
  std::rotate(cycle.begin(), it, cycle.end());
  return cycle;
}

inline std::vector<std::vector<int>> strongly_connected_components(const Network& net) {
  const int n = net.node_count();
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int next = 0;

  struct Frame {
    int node;
    std::size_t arc_pos;
  };
  for (int start = 0; start < n; ++start) {
    if (index[static_cast<std::size_t>(start)] >= 0) continue;
    std::vector<Frame> frames{{start, 0}};
    index[static_cast<std::size_t>(start)] = low[static_cast<std::size_t>(start)] = next++;
    stack.push_back(start);
    on_stack[static_cast<std::size_t>(start)] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      const auto& out = net.out_arcs(f.node);
      if (f.arc_pos < out.size()) {
        int w = net.arc(out[f.arc_pos++]).to;
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
          low[static_cast<std::size_t>(frames.back().node)] =
              std::min(low[static_cast<std::size_t>(frames.back().node)],
                       low[static_cast<std::size_t>(v)]);
        if (low[static_cast<std::size_t>(v)] == index[static_cast<std::size_t>(v)]) {
          std::vector<int> comp;
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[static_cast<std::size_t>(w)] = false;
            comp.push_back(w);
            if (w == v) break;
          }
          std::sort(comp.begin(), comp.end());
          comps.push_back(std::move(comp));
        }
      }
    }
  }
  std::sort(comps.begin(), comps.end());
  return comps;
}

// All simple cycles whose nodes lie in `allowed`, via rooted backtracking
// (root = smallest node on the cycle). Calls sink(cycle) until it returns
// false or `cap` cycles were produced; returns false if the cap tripped.
template <typename Sink>
inline bool enumerate_simple_cycles(const Network& net, const std::vector<bool>& allowed,
                                    long cap, Sink&& sink) {
  const int n = net.node_count();
  long produced = 0;
  std::vector<bool> on_path(static_cast<std::size_t>(n), false);
  std::vector<int> path;
  struct Frame {
    int node;
    std::size_t arc_pos;
  };
  for (int root = 0; root < n; ++root) {
    if (!allowed[static_cast<std::size_t>(root)]) continue;
    std::vector<Frame> frames{{root, 0}};
    path.assign(1, root);
    on_path.assign(static_cast<std::size_t>(n), false);
    on_path[static_cast<std::size_t>(root)] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      const auto& out = net.out_arcs(f.node);
      if (f.arc_pos >= out.size()) {
        on_path[static_cast<std::size_t>(f.node)] = false;
        path.pop_back();
        frames.pop_back();
        continue;
      }
      int w = net.arc(out[f.arc_pos++]).to;
      if (!allowed[static_cast<std::size_t>(w)] || w < root) continue;
      if (w == root) {
        if (++produced > cap) return false;
        if (!sink(path)) return true;
        continue;
      }
      if (on_path[static_cast<std::size_t>(w)]) continue;
      on_path[static_cast<std::size_t>(w)] = true;
      path.push_back(w);
      frames.push_back({w, 0});
    }
  }
  return true;
}

}  // namespace detail

// Assumption 3 check. Slope-1 components reduce to negative/zero-cycle
// detection on arc costs (Bellman-Ford plus tight-arc cycle search); mixed
// or piecewise components go through exact per-cycle composition tests, by
// direct enumeration on small components and through a multiplicative gauge
// transform (slopes rescaled to 1 by node weights, then the Bellman-Ford
// machinery) on large ones. Every reported witness is re-verified
// symbolically before it is returned.
class LoopChecker {
 public:
  LoopChecker(const Network& net, const std::vector<Connection>& g, double price_box)
      : net_(net), g_(g), box_(price_box) {
    if (!(price_box > 0.0)) throw ValidationError("check_no_profitable_loops: price box must be > 0");
    if (static_cast<int>(g.size()) != net.arc_count())
      throw ValidationError("check_no_profitable_loops: one connection per arc required");
  }

  LoopReport run() {
    for (const auto& comp : detail::strongly_connected_components(net_)) {
      if (comp.size() < 2) continue;
      LoopReport r = check_component(comp);
      if (!r.ok) return r;
    }
    return {};
  }

 private:
  LoopReport check_component(const std::vector<int>& comp) {
    std::vector<bool> allowed(static_cast<std::size_t>(net_.node_count()), false);
    for (int z : comp) allowed[static_cast<std::size_t>(z)] = true;

    bool all_unit_slope = true, all_affine = true;
    for (int a = 0; a < net_.arc_count(); ++a) {
      const Arc& arc = net_.arc(a);
      if (!allowed[static_cast<std::size_t>(arc.from)] || !allowed[static_cast<std::size_t>(arc.to)])
        continue;
      if (!g_[static_cast<std::size_t>(a)].is_affine_like()) {
        all_affine = all_unit_slope = false;
        break;
      }
      if (g_[static_cast<std::size_t>(a)].as_affine().slope != 1.0) all_unit_slope = false;
    }

    if (all_unit_slope) {
      std::vector<double> cost(static_cast<std::size_t>(net_.arc_count()), 0.0);
      for (int a = 0; a < net_.arc_count(); ++a)
        if (intra(a, allowed)) cost[static_cast<std::size_t>(a)] = -g_[static_cast<std::size_t>(a)].as_affine().intercept;
      return additive_check(comp, allowed, cost);
    }
    if (static_cast<int>(comp.size()) <= kEnumGuard) return enumeration_check(allowed);
    if (all_affine) return gauge_check(comp, allowed);
    throw ValidationError(
        "check_no_profitable_loops: piecewise-linear cycles need component size <= " +
        std::to_string(kEnumGuard));
  }

  bool intra(int a, const std::vector<bool>& allowed) const {
    const Arc& arc = net_.arc(a);
    return allowed[static_cast<std::size_t>(arc.from)] && allowed[static_cast<std::size_t>(arc.to)];
  }

  LoopReport verdict_for(std::vector<int> cycle) const {
    cycle = detail::canonical_rotation(std::move(cycle));
    Connection h = detail::collapse_cycle(net_, g_, cycle);
    detail::CycleVerdict v = detail::test_collapsed(h);
    if (!v.violates) v = detail::grid_scan(h, box_);
    LoopReport r;
    if (v.violates) {
      r.ok = false;
      r.violating_loop = cycle;
      r.sample_price = v.sample_price;
      r.profit = v.profit;
    }
    return r;
  }

  LoopReport enumeration_check(const std::vector<bool>& allowed) {
    LoopReport found;
    bool complete = detail::enumerate_simple_cycles(
        net_, allowed, kCycleCap, [&](const std::vector<int>& cycle) {
          LoopReport r = verdict_for(cycle);
          if (!r.ok) {
            found = r;
            return false;
          }
          return true;
        });
    if (!complete && found.ok)
      throw ValidationError("check_no_profitable_loops: cycle census exceeded cap");
    return found;
  }

  // Negative-or-zero cost cycle detection; costs already additive (slope 1).
  LoopReport additive_check(const std::vector<int>& comp, const std::vector<bool>& allowed,
                            const std::vector<double>& cost) {
    double scale = 1.0;
    for (int a = 0; a < net_.arc_count(); ++a)
      if (intra(a, allowed)) scale = std::max(scale, std::abs(cost[static_cast<std::size_t>(a)]));
    const double eps = 1e-12 * scale;

    const int n = net_.node_count();
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    std::vector<int> pred_arc(static_cast<std::size_t>(n), -1);
    int witness = -1;
    for (std::size_t round = 0; round <= comp.size(); ++round) {
      bool relaxed = false;
      for (int a = 0; a < net_.arc_count(); ++a) {
        if (!intra(a, allowed)) continue;
        const Arc& arc = net_.arc(a);
        double cand = dist[static_cast<std::size_t>(arc.from)] + cost[static_cast<std::size_t>(a)];
        if (cand < dist[static_cast<std::size_t>(arc.to)] - eps) {
          dist[static_cast<std::size_t>(arc.to)] = cand;
          pred_arc[static_cast<std::size_t>(arc.to)] = a;
          relaxed = true;
          witness = arc.to;
        }
      }
      if (!relaxed) {
        witness = -1;
        break;
      }
    }
    if (witness >= 0) {
      // Walk predecessors onto the negative cycle.
      int v = witness;
      for (std::size_t i = 0; i < comp.size(); ++i)
        v = net_.arc(pred_arc[static_cast<std::size_t>(v)]).from;
      std::vector<int> cycle;
      int u = v;
      do {
        cycle.push_back(u);
        u = net_.arc(pred_arc[static_cast<std::size_t>(u)]).from;
      } while (u != v);
      std::reverse(cycle.begin(), cycle.end());
      LoopReport r = verdict_for(cycle);
      if (!r.ok) return r;
      // fp disagreement: arbitrate exhaustively on small components.
      if (static_cast<int>(comp.size()) <= kEnumGuard) return enumeration_check(allowed);
      return r;
    }

    // No negative cycle: a zero-cost cycle violates too (intercept sum 0).
    // Tight arcs under the Bellman-Ford potentials carry every such cycle.
    std::vector<bool> tight_allowed(static_cast<std::size_t>(n), false);
    std::vector<std::vector<int>> tight_out(static_cast<std::size_t>(n));
    for (int a = 0; a < net_.arc_count(); ++a) {
      if (!intra(a, allowed)) continue;
      const Arc& arc = net_.arc(a);
      double reduced = cost[static_cast<std::size_t>(a)] + dist[static_cast<std::size_t>(arc.from)] -
                       dist[static_cast<std::size_t>(arc.to)];
      if (reduced <= eps) {
        tight_out[static_cast<std::size_t>(arc.from)].push_back(a);
        tight_allowed[static_cast<std::size_t>(arc.from)] = true;
        tight_allowed[static_cast<std::size_t>(arc.to)] = true;
      }
    }
    // DFS for a cycle within tight arcs.
    std::vector<int> color(static_cast<std::size_t>(n), 0);  // 0 new, 1 active, 2 done
    std::vector<int> via(static_cast<std::size_t>(n), -1);
    for (int start = 0; start < n; ++start) {
      if (!tight_allowed[static_cast<std::size_t>(start)] ||
          color[static_cast<std::size_t>(start)] != 0)
        continue;
      std::vector<std::pair<int, std::size_t>> frames{{start, 0}};
      color[static_cast<std::size_t>(start)] = 1;
      while (!frames.empty()) {
        auto& [u, pos] = frames.back();
        if (pos >= tight_out[static_cast<std::size_t>(u)].size()) {
          color[static_cast<std::size_t>(u)] = 2;
          frames.pop_back();
          continue;
        }
        int a = tight_out[static_cast<std::size_t>(u)][pos++];
        int w = net_.arc(a).to;
        if (color[static_cast<std::size_t>(w)] == 1) {
          std::vector<int> cycle{w};
          for (auto it = frames.rbegin(); it != frames.rend() && it->first != w; ++it)
            cycle.push_back(it->first);
          std::reverse(cycle.begin() + 1, cycle.end());
          LoopReport r = verdict_for(cycle);
          if (!r.ok) return r;
          if (static_cast<int>(comp.size()) <= kEnumGuard) return enumeration_check(allowed);
          color[static_cast<std::size_t>(w)] = 1;  // keep scanning other arcs
          continue;
        }
        if (color[static_cast<std::size_t>(w)] == 0) {
          color[static_cast<std::size_t>(w)] = 1;
          via[static_cast<std::size_t>(w)] = a;
          frames.push_back({w, 0});
        }
      }
    }
    return {};
  }

  // Affine component with mixed slopes, too large to enumerate: rescale
  // prices by node weights so every consistent arc has slope 1, then reuse
  // the additive machinery. A weight inconsistency certifies a cycle whose
  // slope product differs from 1; such a closed walk decomposes into simple
  // cycles of which at least one violates Assumption 3.
  LoopReport gauge_check(const std::vector<int>& comp, const std::vector<bool>& allowed) {
    const int n = net_.node_count();
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    int root = comp.front();
    w[static_cast<std::size_t>(root)] = 1.0;
    std::deque<int> queue{root};
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int a : net_.out_arcs(u)) {
        if (!intra(a, allowed)) continue;
        int v = net_.arc(a).to;
        if (w[static_cast<std::size_t>(v)] != 0.0) continue;
        w[static_cast<std::size_t>(v)] =
            w[static_cast<std::size_t>(u)] / g_[static_cast<std::size_t>(a)].as_affine().slope;
        queue.push_back(v);
      }
    }
    for (int a = 0; a < net_.arc_count(); ++a) {
      if (!intra(a, allowed)) continue;
      const Arc& arc = net_.arc(a);
      double ratio = g_[static_cast<std::size_t>(a)].as_affine().slope *
                     w[static_cast<std::size_t>(arc.to)] / w[static_cast<std::size_t>(arc.from)];
      if (ratio != 1.0) {
        LoopReport r = slope_walk_witness(arc, allowed, comp);
        if (!r.ok) return r;
        throw ValidationError(
            "check_no_profitable_loops: cannot certify slope balance exactly on a component "
            "too large to enumerate");
      }
    }
    std::vector<double> cost(static_cast<std::size_t>(net_.arc_count()), 0.0);
    for (int a = 0; a < net_.arc_count(); ++a)
      if (intra(a, allowed))
        cost[static_cast<std::size_t>(a)] = -g_[static_cast<std::size_t>(a)].as_affine().intercept /
                                            w[static_cast<std::size_t>(net_.arc(a).from)];
    return additive_check(comp, allowed, cost);
  }

  // Closed walk through the inconsistent arc, decomposed into simple cycles.
  LoopReport slope_walk_witness(const Arc& bad, const std::vector<bool>& allowed,
                                const std::vector<int>& comp) {
    std::vector<int> back = directed_path(bad.to, bad.from, allowed);
    if (back.empty()) return {};  // should not happen inside an SCC
    std::vector<int> walk{bad.from};
    walk.insert(walk.end(), back.begin(), back.end());  // bad.to ... bad.from? see below
    // walk = bad.from, bad.to, ..., bad.from; peel simple cycles via a stack.
    std::vector<int> stack;
    std::vector<int> pos(static_cast<std::size_t>(net_.node_count()), -1);
    for (int z : walk) {
      if (pos[static_cast<std::size_t>(z)] >= 0) {
        std::vector<int> cycle(stack.begin() + pos[static_cast<std::size_t>(z)], stack.end());
        for (int c : cycle) pos[static_cast<std::size_t>(c)] = -1;
        stack.resize(static_cast<std::size_t>(pos[static_cast<std::size_t>(z)] >= 0
                                                  ? pos[static_cast<std::size_t>(z)]
                                                  : static_cast<int>(stack.size()) -
                                                        static_cast<int>(cycle.size())));
        LoopReport r = verdict_for(cycle);
        if (!r.ok) return r;
      }
      pos[static_cast<std::size_t>(z)] = static_cast<int>(stack.size());
      stack.push_back(z);
    }
    (void)comp;
    return {};
  }

  std::vector<int> directed_path(int from, int to, const std::vector<bool>& allowed) const {
    const int n = net_.node_count();
    std::vector<int> via(static_cast<std::size_t>(n), -1);
    std::deque<int> queue{from};
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    seen[static_cast<std::size_t>(from)] = true;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      if (u == to) break;
      for (int a : net_.out_arcs(u)) {
        if (!intra(a, allowed)) continue;
        int v = net_.arc(a).to;
        if (seen[static_cast<std::size_t>(v)]) continue;
        seen[static_cast<std::size_t>(v)] = true;
        via[static_cast<std::size_t>(v)] = u;
        queue.push_back(v);
      }
    }
    if (!seen[static_cast<std::size_t>(to)]) return {};
    std::vector<int> path{to};
    int u = to;
    while (u != from) {
      u = via[static_cast<std::size_t>(u)];
      path.push_back(u);
    }
    std::reverse(path.begin(), path.end());
    return path;  // from ... to
  }

  static constexpr int kEnumGuard = 15;
  static constexpr long kCycleCap = 2'000'000;

  const Network& net_;
  const std::vector<Connection>& g_;
  double box_;
};

inline LoopReport check_no_profitable_loops(const Network& net,
                                            const std::vector<Connection>& g,
                                            double price_box = 1e6) {
  return LoopChecker(net, g, price_box).run();
}

// ---------------------------------------------------------------------------
// Reduced connections (the sup over directed paths of composed connections)
// ---------------------------------------------------------------------------

// Scalar backward value iteration toward target y at resale price p_y.
// -inf marks "no directed path"; +inf marks divergence through a profitable
// cycle (only reachable when Assumption 3 fails). By default the empty path
// does not price y itself: the diagonal value is the sup over actual cycles.
inline std::vector<double> reduced_connection_map(const Network& net,
                                                  const std::vector<Connection>& g, int y,
                                                  double p_y, bool allow_empty_path = false) {
  if (static_cast<int>(g.size()) != net.arc_count())
    throw ValidationError("reduced_connection_map: one connection per arc required");
  const int n = net.node_count();
  std::vector<double> val(static_cast<std::size_t>(n), kNegInf);
  auto inner = [&](int z) {
    double v = val[static_cast<std::size_t>(z)];
    if (z == y) v = std::max(v, p_y);
    return v;
  };
  int sweeps_with_change = 0;
  while (true) {
    bool changed = false;
    for (int a = 0; a < net.arc_count(); ++a) {
      const Arc& arc = net.arc(a);
      double iv = inner(arc.to);
      if (iv == kNegInf) continue;
      double cand = iv == kPosInf ? kPosInf : g[static_cast<std::size_t>(a)](iv);
      if (cand > val[static_cast<std::size_t>(arc.from)]) {
        val[static_cast<std::size_t>(arc.from)] = cand;
        changed = true;
      }
    }
    if (!changed) break;
    if (++sweeps_with_change > n + 1) {
      // Still improving after every simple path length is exhausted: a
      // profitable cycle feeds the sup. Mark improving nodes and their
      // ancestors unbounded.
      std::vector<bool> unbounded(static_cast<std::size_t>(n), false);
      for (int a = 0; a < net.arc_count(); ++a) {
        const Arc& arc = net.arc(a);
        double iv = inner(arc.to);
        if (iv == kNegInf) continue;
        double cand = iv == kPosInf ? kPosInf : g[static_cast<std::size_t>(a)](iv);
        if (cand > val[static_cast<std::size_t>(arc.from)])
          unbounded[static_cast<std::size_t>(arc.from)] = true;
      }
      for (int pass = 0; pass < n; ++pass)
        for (int a = 0; a < net.arc_count(); ++a) {
          const Arc& arc = net.arc(a);
          if (unbounded[static_cast<std::size_t>(arc.to)] &&
              val[static_cast<std::size_t>(arc.from)] != kNegInf)
            unbounded[static_cast<std::size_t>(arc.from)] = true;
        }
      for (int z = 0; z < n; ++z)
        if (unbounded[static_cast<std::size_t>(z)]) val[static_cast<std::size_t>(z)] = kPosInf;
      break;
    }
  }
  if (allow_empty_path) val[static_cast<std::size_t>(y)] =
      std::max(val[static_cast<std::size_t>(y)], p_y);
  return val;
}

inline double reduced_connection(const Network& net, const std::vector<Connection>& g, int x,
                                 int y, double p_y, bool allow_empty_path = false) {
  return reduced_connection_map(net, g, y, p_y, allow_empty_path)[static_cast<std::size_t>(x)];
}

// Same value iteration carried out on function descriptors: produces the
// reduced connection toward y as a closed-form Connection per source node
// (nullopt where no directed path exists). Exact for the supported families.
struct ReducedProfile {
  std::vector<std::optional<Connection>> toward;  // per node x: G~_{xy}
  bool diverged = false;
  std::vector<int> diverging_nodes;
};

inline ReducedProfile reduced_connection_profile(const Network& net,
                                                 const std::vector<Connection>& g, int y,
                                                 double fn_tol = 1e-12) {
  if (static_cast<int>(g.size()) != net.arc_count())
    throw ValidationError("reduced_connection_profile: one connection per arc required");
  const int n = net.node_count();
  ReducedProfile out;
  out.toward.assign(static_cast<std::size_t>(n), std::nullopt);
  auto inner = [&](int z) -> std::optional<Connection> {
    if (z == y) {
      if (!out.toward[static_cast<std::size_t>(z)]) return Connection::identity();
      return pointwise_max(Connection::identity(), *out.toward[static_cast<std::size_t>(z)]);
    }
    return out.toward[static_cast<std::size_t>(z)];
  };
  int sweeps = 0;
  while (true) {
    bool changed = false;
    for (int a = 0; a < net.arc_count(); ++a) {
      const Arc& arc = net.arc(a);
      std::optional<Connection> iv = inner(arc.to);
      if (!iv) continue;
      Connection cand = compose(g[static_cast<std::size_t>(a)], *iv);
      auto& cur = out.toward[static_cast<std::size_t>(arc.from)];
      if (!cur) {
        cur = cand;
        changed = true;
      } else {
        Connection merged = pointwise_max(*cur, cand);
        if (!approx_equal(merged, *cur, fn_tol)) {
          cur = merged;
          changed = true;
        }
      }
    }
    if (!changed) break;
    if (++sweeps > n + 1) {
      out.diverged = true;
      for (int a = 0; a < net.arc_count(); ++a) {
        const Arc& arc = net.arc(a);
        std::optional<Connection> iv = inner(arc.to);
        if (!iv) continue;
        Connection cand = compose(g[static_cast<std::size_t>(a)], *iv);
        auto& cur = out.toward[static_cast<std::size_t>(arc.from)];
        if (cur && !approx_equal(pointwise_max(*cur, cand), *cur, fn_tol))
          out.diverging_nodes.push_back(arc.from);
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flow decomposition
// ---------------------------------------------------------------------------

struct PathFlow {
  std::vector<int> nodes;  // for loops, nodes of the cycle (closing arc implied)
  double mass = 0.0;
};

struct FlowDecomposition {
  std::vector<PathFlow> path_flows;
  std::vector<PathFlow> loop_flows;
};

// Greedy peeling: source-to-target paths first (bottleneck subtraction,
// lowest arc index on ties), then remaining support peels into cycles.
inline FlowDecomposition flow_decompose(const Network& net, const InternalFlow& mu,
                                        const ExitFlow& q) {
  validate_internal_flow(net, mu);
  validate_exit_flow(net, q);
  std::vector<double> lhs = incidence_apply(net, mu);
  for (int z = 0; z < net.node_count(); ++z)
    if (std::abs(lhs[static_cast<std::size_t>(z)] - q.q[static_cast<std::size_t>(z)]) > kMassTol)
      throw ValidationError("flow_decompose: flow does not balance the exit requirement");

  const double eps = 1e-11;
  std::vector<double> r = mu.mu;
  std::vector<double> need = q.q;  // >0: still to receive, <0: still to ship
  FlowDecomposition out;

  auto next_arc = [&](int u) -> int {
    for (int a : net.out_arcs(u))
      if (r[static_cast<std::size_t>(a)] > eps) return a;
    return -1;
  };

  // Trace from `z`, peeling any cycles met on the way; returns when a path
  // z ~> (node with need > eps) has been peeled, or no progress is possible.
  auto peel_from_source = [&](int z) -> bool {
    std::vector<int> path_nodes{z};
    std::vector<int> path_arcs;
    std::vector<int> pos(static_cast<std::size_t>(net.node_count()), -1);
    pos[static_cast<std::size_t>(z)] = 0;
    int u = z;
    while (true) {
      if (need[static_cast<std::size_t>(u)] > eps && u != z) {
        double bn = std::min(-need[static_cast<std::size_t>(z)], need[static_cast<std::size_t>(u)]);
        for (int a : path_arcs) bn = std::min(bn, r[static_cast<std::size_t>(a)]);
        for (int a : path_arcs) r[static_cast<std::size_t>(a)] -= bn;
        need[static_cast<std::size_t>(z)] += bn;
        need[static_cast<std::size_t>(u)] -= bn;
        out.path_flows.push_back({path_nodes, bn});
        return true;
      }
      int a = next_arc(u);
      if (a < 0) return false;
      int w = net.arc(a).to;
      if (pos[static_cast<std::size_t>(w)] >= 0) {
        // Cycle in the support: peel it and resume from w.
        int at = pos[static_cast<std::size_t>(w)];
        std::vector<int> cyc_nodes(path_nodes.begin() + at, path_nodes.end());
        std::vector<int> cyc_arcs(path_arcs.begin() + at, path_arcs.end());
        cyc_arcs.push_back(a);
        double bn = r[static_cast<std::size_t>(a)];
        for (int ca : cyc_arcs) bn = std::min(bn, r[static_cast<std::size_t>(ca)]);
        for (int ca : cyc_arcs) r[static_cast<std::size_t>(ca)] -= bn;
        out.loop_flows.push_back({detail::canonical_rotation(cyc_nodes), bn});
        for (std::size_t i = static_cast<std::size_t>(at) + 1; i < path_nodes.size(); ++i)
          pos[static_cast<std::size_t>(path_nodes[i])] = -1;
        path_nodes.resize(static_cast<std::size_t>(at) + 1);
        path_arcs.resize(static_cast<std::size_t>(at));
        u = w;
        continue;
      }
      pos[static_cast<std::size_t>(w)] = static_cast<int>(path_nodes.size());
      path_nodes.push_back(w);
      path_arcs.push_back(a);
      u = w;
    }
  };

  for (int z = 0; z < net.node_count(); ++z)
    while (need[static_cast<std::size_t>(z)] < -eps)
      if (!peel_from_source(z)) break;

  // Residual support is a circulation: peel into cycles.
  for (int a0 = 0; a0 < net.arc_count(); ++a0) {
    while (r[static_cast<std::size_t>(a0)] > eps) {
      std::vector<int> path_nodes{net.arc(a0).from};
      std::vector<int> path_arcs;
      std::vector<int> pos(static_cast<std::size_t>(net.node_count()), -1);
      pos[static_cast<std::size_t>(net.arc(a0).from)] = 0;
      int u = net.arc(a0).from;
      bool progressed = false;
      while (true) {
        int a = (path_arcs.empty() ? a0 : next_arc(u));
        if (a < 0) break;
        int w = net.arc(a).to;
        if (pos[static_cast<std::size_t>(w)] >= 0) {
          int at = pos[static_cast<std::size_t>(w)];
          std::vector<int> cyc_nodes(path_nodes.begin() + at, path_nodes.end());
          std::vector<int> cyc_arcs(path_arcs.begin() + at, path_arcs.end());
          cyc_arcs.push_back(a);
          double bn = r[static_cast<std::size_t>(a)];
          for (int ca : cyc_arcs) bn = std::min(bn, r[static_cast<std::size_t>(ca)]);
          for (int ca : cyc_arcs) r[static_cast<std::size_t>(ca)] -= bn;
          out.loop_flows.push_back({detail::canonical_rotation(cyc_nodes), bn});
          progressed = true;
          break;
        }
        pos[static_cast<std::size_t>(w)] = static_cast<int>(path_nodes.size());
        path_nodes.push_back(w);
        path_arcs.push_back(a);
        u = w;
      }
      if (!progressed) break;  // dust below eps
    }
  }
  return out;
}

}  // namespace eqflow
