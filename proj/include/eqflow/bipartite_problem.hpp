#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "eqflow/connection.hpp"
#include "eqflow/errors.hpp"
#include "eqflow/network.hpp"

namespace eqflow {

struct BpArc {
  int x = -1;  // index into X
  int y = -1;  // index into Y
  Connection g;
  bool penalty_added = false;  // completion arc, not part of the original set
};

// The associated bipartite matching problem (X, Y, G~): sources X with mass
// n to ship, targets Y with mass m to receive, reduced connections per arc.
struct BipartiteProblem {
  std::vector<std::string> x_names, y_names;
  std::vector<double> n, m;
  std::vector<BpArc> arcs;

  int x_count() const { return static_cast<int>(n.size()); }
  int y_count() const { return static_cast<int>(m.size()); }

  double total_mass() const {
    double s = 0.0;
    for (double v : n) s += v;
    return s;
  }

  void validate() const {
    if (x_names.size() != n.size() || y_names.size() != m.size())
      throw ValidationError("bipartite problem: name/margin size mismatch");
    for (double v : n)
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError("bipartite problem: source margins must be > 0");
    for (double v : m)
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError("bipartite problem: target margins must be > 0");
    double sn = 0.0, sm = 0.0;
    for (double v : n) sn += v;
    for (double v : m) sm += v;
    double tol = (all_integral(n) && all_integral(m)) ? 0.0 : kMassTol;
    if (std::abs(sn - sm) > tol)
      throw ValidationError("bipartite problem: margins must sum to the same amount");
    std::vector<std::vector<bool>> seen(n.size(), std::vector<bool>(m.size(), false));
    for (const BpArc& a : arcs) {
      if (a.x < 0 || a.x >= x_count() || a.y < 0 || a.y >= y_count())
        throw ValidationError("bipartite problem: arc index out of range");
      if (seen[static_cast<std::size_t>(a.x)][static_cast<std::size_t>(a.y)])
        throw ValidationError("bipartite problem: duplicate arc");
      seen[static_cast<std::size_t>(a.x)][static_cast<std::size_t>(a.y)] = true;
    }
  }
};

}  // namespace eqflow
