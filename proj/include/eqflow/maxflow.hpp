#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace eqflow {

// Dinic max-flow on doubles. Infinite capacity is the IEEE +inf sentinel,
// never a large finite float, so infinite arcs can never sit on a min cut.
// Phase count is bounded by the node count regardless of capacities, so the
// algorithm terminates on real-valued inputs; on integer capacities every
// bottleneck is an integer and the result is exact. Adjacency is scanned in
// insertion order, which makes the run and the residual cut deterministic.
class MaxFlow {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  explicit MaxFlow(int nodes) : head_(static_cast<std::size_t>(nodes)) {}

  int node_count() const { return static_cast<int>(head_.size()); }

  int add_node() {
    head_.emplace_back();
    return static_cast<int>(head_.size()) - 1;
  }

  // Returns an edge id; flow_on(id) reads the flow pushed through it.
  int add_edge(int u, int v, double cap) {
    int id = static_cast<int>(cap_.size());
    head_[static_cast<std::size_t>(u)].push_back(id);
    to_.push_back(v);
    cap_.push_back(cap);
    head_[static_cast<std::size_t>(v)].push_back(id + 1);
    to_.push_back(u);
    cap_.push_back(0.0);
    return id;
  }

  double flow_on(int id) const { return cap_[static_cast<std::size_t>(id) + 1]; }

  double run(int s, int t, double eps = 1e-12) {
    double total = 0.0;
    while (build_levels(s, t, eps)) {
      iter_.assign(head_.size(), 0);
      while (true) {
        double pushed = augment(s, t, kInf, eps);
        if (pushed <= 0.0) break;
        total += pushed;
      }
    }
    return total;
  }

  // After run(): the canonical min cut closest to the source (nodes reachable
  // from s in the residual graph).
  std::vector<bool> source_side(int s, double eps = 1e-12) const {
    std::vector<bool> seen(head_.size(), false);
    std::vector<int> stack{s};
    seen[static_cast<std::size_t>(s)] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int id : head_[static_cast<std::size_t>(u)]) {
        int v = to_[static_cast<std::size_t>(id)];
        if (!seen[static_cast<std::size_t>(v)] && cap_[static_cast<std::size_t>(id)] > eps) {
          seen[static_cast<std::size_t>(v)] = true;
          stack.push_back(v);
        }
      }
    }
    return seen;
  }

 private:
  bool build_levels(int s, int t, double eps) {
    level_.assign(head_.size(), -1);
    level_[static_cast<std::size_t>(s)] = 0;
    bfs_.clear();
    bfs_.push_back(s);
    for (std::size_t qi = 0; qi < bfs_.size(); ++qi) {
      int u = bfs_[qi];
      for (int id : head_[static_cast<std::size_t>(u)]) {
        int v = to_[static_cast<std::size_t>(id)];
        if (level_[static_cast<std::size_t>(v)] < 0 && cap_[static_cast<std::size_t>(id)] > eps) {
          level_[static_cast<std::size_t>(v)] = level_[static_cast<std::size_t>(u)] + 1;
          bfs_.push_back(v);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  double augment(int u, int t, double limit, double eps) {
    if (u == t) return limit;
    for (std::size_t& i = iter_[static_cast<std::size_t>(u)];
         i < head_[static_cast<std::size_t>(u)].size(); ++i) {
      int id = head_[static_cast<std::size_t>(u)][i];
      int v = to_[static_cast<std::size_t>(id)];
      double res = cap_[static_cast<std::size_t>(id)];
      if (res <= eps || level_[static_cast<std::size_t>(v)] != level_[static_cast<std::size_t>(u)] + 1)
        continue;
      double pushed = augment(v, t, std::min(limit, res), eps);
      if (pushed > 0.0) {
        cap_[static_cast<std::size_t>(id)] -= pushed;
        cap_[static_cast<std::size_t>(id ^ 1)] += pushed;
        return pushed;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<int>> head_;
  std::vector<int> to_;
  std::vector<double> cap_;  // residual capacity; edge id^1 is the reverse
  std::vector<int> level_;
  std::vector<std::size_t> iter_;
  std::vector<int> bfs_;
};

}  // namespace eqflow
