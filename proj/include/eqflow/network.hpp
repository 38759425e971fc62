#pragma once

#include <cmath>
#include <limits>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "eqflow/errors.hpp"

namespace eqflow {

inline constexpr double kMassTol = 1e-9;  // absolute tolerance on mass balance
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

struct Arc {
  int from = -1;
  int to = -1;
};

// Directed network (Z, A). Nodes carry external string names mapped to dense
// indices at construction; all computation is index-based. Immutable after
// construction. The incidence matrix is never materialized: incidence_apply
// and the retaining test iterate the arc list.
class Network {
 public:
  Network() = default;

  Network(std::vector<std::string> names, const std::vector<std::pair<int, int>>& arc_pairs) {
    names_ = std::move(names);
    for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
      if (names_[i].empty()) throw ValidationError("nodes: empty node name");
      auto [it, fresh] = index_of_.emplace(names_[i], i);
      (void)it;
      if (!fresh) throw ValidationError("nodes: duplicate node name '" + names_[i] + "'");
    }
    out_.resize(names_.size());
    in_.resize(names_.size());
    std::unordered_map<long long, int> seen;
    for (auto [u, v] : arc_pairs) {
      if (u < 0 || v < 0 || u >= node_count() || v >= node_count())
        throw ValidationError("arcs: node index out of range");
      if (u == v)
        throw ValidationError("arcs: self-loop at node '" + names_[u] + "' is not allowed");
      long long key = static_cast<long long>(u) * static_cast<long long>(names_.size()) + v;
      if (!seen.emplace(key, 1).second)
        throw ValidationError("arcs: duplicate arc " + names_[u] + " -> " + names_[v]);
      int id = static_cast<int>(arcs_.size());
      arcs_.push_back(Arc{u, v});
      out_[u].push_back(id);
      in_[v].push_back(id);
    }
  }

  int node_count() const { return static_cast<int>(names_.size()); }
  int arc_count() const { return static_cast<int>(arcs_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int z) const { return names_[static_cast<std::size_t>(z)]; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const Arc& arc(int a) const { return arcs_[static_cast<std::size_t>(a)]; }
  const std::vector<int>& out_arcs(int z) const { return out_[static_cast<std::size_t>(z)]; }
  const std::vector<int>& in_arcs(int z) const { return in_[static_cast<std::size_t>(z)]; }

  std::optional<int> find_node(const std::string& name) const {
    auto it = index_of_.find(name);
    if (it == index_of_.end()) return std::nullopt;
    return it->second;
  }

  int node_index(const std::string& name) const {
    auto it = index_of_.find(name);
    if (it == index_of_.end()) throw ValidationError("unknown node '" + name + "'");
    return it->second;
  }

  std::optional<int> find_arc(int from, int to) const {
    for (int a : out_[static_cast<std::size_t>(from)])
      if (arcs_[static_cast<std::size_t>(a)].to == to) return a;
    return std::nullopt;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> out_, in_;
  std::unordered_map<std::string, int> index_of_;
};

// Net exit requirement per node: q_z > 0 marks a target (net inflow),
// q_z < 0 a source.
struct ExitFlow {
  std::vector<double> q;
};

// Nonnegative flow per arc.
struct InternalFlow {
  std::vector<double> mu;
};

inline bool all_integral(const std::vector<double>& v) {
  for (double x : v)
    if (x != std::floor(x)) return false;
  return true;
}

// Sum-to-zero check: exact when all entries are integers, kMassTol otherwise.
inline void validate_exit_flow(const Network& net, const ExitFlow& q) {
  if (static_cast<int>(q.q.size()) != net.node_count())
    throw ValidationError("exit flow: expected one value per node");
  double sum = 0.0;
  for (double v : q.q) {
    if (!std::isfinite(v)) throw ValidationError("exit flow: non-finite value");
    sum += v;
  }
  double tol = all_integral(q.q) ? 0.0 : kMassTol;
  if (std::abs(sum) > tol)
    throw ValidationError("exit flow: values must sum to 0 (got " + std::to_string(sum) + ")");
}

inline void validate_internal_flow(const Network& net, const InternalFlow& mu) {
  if (static_cast<int>(mu.mu.size()) != net.arc_count())
    throw ValidationError("internal flow: expected one value per arc");
  for (double v : mu.mu) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError("internal flow: entries must be finite and >= 0");
  }
}

// (nabla^T mu)_z: total flow into z minus total flow out of z.
inline std::vector<double> incidence_apply(const Network& net, const InternalFlow& mu) {
  if (static_cast<int>(mu.mu.size()) != net.arc_count())
    throw ValidationError("incidence_apply: flow dimension mismatch");
  std::vector<double> v(static_cast<std::size_t>(net.node_count()), 0.0);
  for (int a = 0; a < net.arc_count(); ++a) {
    v[static_cast<std::size_t>(net.arc(a).to)] += mu.mu[static_cast<std::size_t>(a)];
    v[static_cast<std::size_t>(net.arc(a).from)] -= mu.mu[static_cast<std::size_t>(a)];
  }
  return v;
}

struct CutArcs {
  std::vector<int> outward;  // tail in B, head outside
  std::vector<int> inward;   // tail outside, head in B
};

inline CutArcs cut_arcs(const Network& net, const std::vector<bool>& in_b) {
  CutArcs cut;
  for (int a = 0; a < net.arc_count(); ++a) {
    bool fu = in_b[static_cast<std::size_t>(net.arc(a).from)];
    bool fv = in_b[static_cast<std::size_t>(net.arc(a).to)];
    if (fu && !fv) cut.outward.push_back(a);
    if (!fu && fv) cut.inward.push_back(a);
  }
  return cut;
}

inline std::vector<bool> node_mask(const Network& net, const std::vector<int>& members) {
  std::vector<bool> mask(static_cast<std::size_t>(net.node_count()), false);
  for (int z : members) mask[static_cast<std::size_t>(z)] = true;
  return mask;
}

// B is retaining iff no arc leaves it; equivalently nabla 1_B >= 0.
inline bool is_retaining(const Network& net, const std::vector<bool>& in_b) {
  for (const Arc& a : net.arcs())
    if (in_b[static_cast<std::size_t>(a.from)] && !in_b[static_cast<std::size_t>(a.to)])
      return false;
  return true;
}

// BFS hops along directed arcs from `from` to the nearest target node.
// nullopt when no directed path exists.
inline std::optional<int> hop_distance(const Network& net, int from,
                                       const std::vector<bool>& targets) {
  if (targets[static_cast<std::size_t>(from)]) return 0;
  std::vector<int> dist(static_cast<std::size_t>(net.node_count()), -1);
  dist[static_cast<std::size_t>(from)] = 0;
  std::deque<int> queue{from};
  while (!queue.empty()) {
    int z = queue.front();
    queue.pop_front();
    for (int a : net.out_arcs(z)) {
      int w = net.arc(a).to;
      if (dist[static_cast<std::size_t>(w)] >= 0) continue;
      dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(z)] + 1;
      if (targets[static_cast<std::size_t>(w)]) return dist[static_cast<std::size_t>(w)];
      queue.push_back(w);
    }
  }
  return std::nullopt;
}

}  // namespace eqflow
