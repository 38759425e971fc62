#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "eqflow/errors.hpp"

namespace eqflow {

// G(p) = slope * p + intercept, slope > 0.
struct Affine {
  double slope = 1.0;
  double intercept = 0.0;
};

// Penalty completion arc: G(p) = p - n. Kept as its own descriptor so added
// arcs stay recognizable after a solve.
struct Penalty {
  double n = 0.0;
};

// Continuous increasing piecewise-linear map. Breakpoints (x[i], y[i]) with
// both coordinates strictly increasing; the end rays extend with the given
// slopes, so the image is all of R.
struct Pwl {
  std::vector<double> x;
  std::vector<double> y;
  double left_slope = 1.0;
  double right_slope = 1.0;
};

// A connection function: the break-even purchase price at an arc's tail as a
// function of the resale price at its head. Strictly increasing, continuous,
// surjective onto R. Closed under inverse, composition and pointwise max
// within the {Affine, Penalty, Pwl} family, which keeps every downstream
// check exact.
class Connection {
 public:
  Connection() : repr_(Affine{}) {}

  static Connection affine(double slope, double intercept) {
    if (!(slope > 0.0) || !std::isfinite(slope) || !std::isfinite(intercept))
      throw ValidationError("affine connection: slope must be finite and > 0, intercept finite");
    return Connection(Affine{slope, intercept});
  }

  static Connection identity() { return Connection(Affine{1.0, 0.0}); }

  static Connection penalty(double n) {
    if (!std::isfinite(n)) throw ValidationError("penalty connection: n must be finite");
    return Connection(Penalty{n});
  }

  static Connection pwl(std::vector<double> x, std::vector<double> y,
                        double left_slope, double right_slope) {
    if (x.empty() || x.size() != y.size())
      throw ValidationError("pwl connection: needs matching non-empty breakpoint lists");
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      if (!(x[i] < x[i + 1]))
        throw ValidationError("pwl connection: breakpoint abscissae must be strictly increasing");
      if (!(y[i] < y[i + 1]))
        throw ValidationError("pwl connection: breakpoint values must be strictly increasing");
    }
    for (double v : x)
      if (!std::isfinite(v)) throw ValidationError("pwl connection: non-finite breakpoint");
    for (double v : y)
      if (!std::isfinite(v)) throw ValidationError("pwl connection: non-finite breakpoint value");
    if (!(left_slope > 0.0) || !(right_slope > 0.0) || !std::isfinite(left_slope) ||
        !std::isfinite(right_slope))
      throw ValidationError("pwl connection: end slopes must be finite and > 0");
    return Connection(Pwl{std::move(x), std::move(y), left_slope, right_slope});
  }

  double operator()(double p) const {
    if (const auto* a = std::get_if<Affine>(&repr_)) return a->slope * p + a->intercept;
    if (const auto* pe = std::get_if<Penalty>(&repr_)) return p - pe->n;
    const Pwl& f = std::get<Pwl>(repr_);
    return eval_pwl(f, p);
  }

  Connection inverse() const {
    if (const auto* a = std::get_if<Affine>(&repr_))
      return Connection(Affine{1.0 / a->slope, -a->intercept / a->slope});
    if (const auto* pe = std::get_if<Penalty>(&repr_))
      return Connection(Affine{1.0, pe->n});
    const Pwl& f = std::get<Pwl>(repr_);
    return Connection(Pwl{f.y, f.x, 1.0 / f.left_slope, 1.0 / f.right_slope});
  }

  // Penalty counts: it is Affine{1, -n}.
  bool is_affine_like() const { return !std::holds_alternative<Pwl>(repr_); }
  bool is_penalty() const { return std::holds_alternative<Penalty>(repr_); }
  bool is_pwl() const { return std::holds_alternative<Pwl>(repr_); }

  Affine as_affine() const {
    if (const auto* a = std::get_if<Affine>(&repr_)) return *a;
    if (const auto* pe = std::get_if<Penalty>(&repr_)) return Affine{1.0, -pe->n};
    throw ValidationError("as_affine: connection is piecewise-linear");
  }

  const Pwl& as_pwl() const { return std::get<Pwl>(repr_); }

  // Breakpoint abscissae (empty for affine-like).
  std::vector<double> breakpoints() const {
    if (const auto* f = std::get_if<Pwl>(&repr_)) return f->x;
    return {};
  }

  double slope_at(double p) const {
    if (const auto* a = std::get_if<Affine>(&repr_)) return a->slope;
    if (std::holds_alternative<Penalty>(repr_)) return 1.0;
    const Pwl& f = std::get<Pwl>(repr_);
    if (p < f.x.front()) return f.left_slope;
    if (p >= f.x.back()) return f.right_slope;
    auto it = std::upper_bound(f.x.begin(), f.x.end(), p);
    std::size_t i = static_cast<std::size_t>(it - f.x.begin());  // x[i-1] <= p < x[i]
    return (f.y[i] - f.y[i - 1]) / (f.x[i] - f.x[i - 1]);
  }

 private:
  explicit Connection(std::variant<Affine, Penalty, Pwl> r) : repr_(std::move(r)) {}

  static double eval_pwl(const Pwl& f, double p) {
    if (p <= f.x.front()) return f.y.front() + f.left_slope * (p - f.x.front());
    if (p >= f.x.back()) return f.y.back() + f.right_slope * (p - f.x.back());
    auto it = std::upper_bound(f.x.begin(), f.x.end(), p);
    std::size_t i = static_cast<std::size_t>(it - f.x.begin());
    double t = (p - f.x[i - 1]) / (f.x[i] - f.x[i - 1]);
    return f.y[i - 1] + t * (f.y[i] - f.y[i - 1]);
  }

  std::variant<Affine, Penalty, Pwl> repr_;

  friend Connection compose(const Connection&, const Connection&);
  friend Connection pointwise_max(const Connection&, const Connection&);
};

namespace detail {

// Sorted unique abscissae -> a valid Pwl through g's graph. Drops points that
// would break strict monotonicity (can only arise from fp ties).
template <typename F>
inline Pwl pwl_through(const std::vector<double>& xs, F&& g, double left_slope,
                       double right_slope) {
  Pwl out;
  out.left_slope = left_slope;
  out.right_slope = right_slope;
  for (double x : xs) {
    double y = g(x);
    if (!out.x.empty() && !(x > out.x.back() && y > out.y.back())) continue;
    out.x.push_back(x);
    out.y.push_back(y);
  }
  return out;
}

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

// Exact composition outer(inner(p)). All-affine input collapses to Affine;
// otherwise the result is the exact composed Pwl: its kinks sit at inner's
// breakpoints and at inner-preimages of outer's breakpoints.
inline Connection compose(const Connection& outer, const Connection& inner) {
  if (outer.is_affine_like() && inner.is_affine_like()) {
    Affine o = outer.as_affine(), i = inner.as_affine();
    return Connection::affine(o.slope * i.slope, o.slope * i.intercept + o.intercept);
  }
  std::vector<double> xs = inner.breakpoints();
  Connection inner_inv = inner.inverse();
  for (double ob : outer.breakpoints()) xs.push_back(inner_inv(ob));
  xs = detail::sorted_unique(xs);

  double ls = outer.slope_at(inner(xs.front()) - 1.0) * inner.slope_at(xs.front() - 1.0);
  double rs = outer.slope_at(inner(xs.back()) + 1.0) * inner.slope_at(xs.back() + 1.0);
  Pwl out = detail::pwl_through(xs, [&](double x) { return outer(inner(x)); }, ls, rs);
  return Connection::pwl(std::move(out.x), std::move(out.y), out.left_slope, out.right_slope);
}

// Exact upper envelope max(f, g). Increasing when both are. Breakpoints: the
// union of both functions' kinks plus per-segment crossings.
inline Connection pointwise_max(const Connection& f, const Connection& g) {
  std::vector<double> xs = f.breakpoints();
  for (double b : g.breakpoints()) xs.push_back(b);
  xs = detail::sorted_unique(xs);

  // Crossing of the two affine pieces covering (lo, hi); rays use +-inf.
  auto add_crossing = [&](double lo, double hi, double probe,
                          std::vector<double>& acc) {
    double sf = f.slope_at(probe), sg = g.slope_at(probe);
    if (sf == sg) return;
    // Solve f(probe) + sf*(t-probe) = g(probe) + sg*(t-probe).
    double t = probe + (g(probe) - f(probe)) / (sf - sg);
    if (t > lo && t < hi) acc.push_back(t);
  };

  std::vector<double> cross;
  if (xs.empty()) {
    add_crossing(-std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity(), 0.0, cross);
    if (cross.empty()) {
      // Parallel affines: one dominates everywhere.
      return f(0.0) >= g(0.0) ? f : g;
    }
  } else {
    add_crossing(-std::numeric_limits<double>::infinity(), xs.front(), xs.front() - 1.0, cross);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
      add_crossing(xs[i], xs[i + 1], 0.5 * (xs[i] + xs[i + 1]), cross);
    add_crossing(xs.back(), std::numeric_limits<double>::infinity(), xs.back() + 1.0, cross);
  }
  for (double c : cross) xs.push_back(c);
  xs = detail::sorted_unique(xs);

  double far_l = xs.front() - 1.0, far_r = xs.back() + 1.0;
  // Toward -inf the smaller slope wins; toward +inf the larger one.
  double ls = f(far_l) >= g(far_l) ? f.slope_at(far_l) : g.slope_at(far_l);
  double rs = f(far_r) >= g(far_r) ? f.slope_at(far_r) : g.slope_at(far_r);

  if (xs.empty()) return f;  // unreachable; silences no-breakpoint path
  Pwl out = detail::pwl_through(xs, [&](double x) { return std::max(f(x), g(x)); }, ls, rs);
  if (out.x.size() == 1 && ls == rs) {
    // Degenerate single-kink envelope with equal slopes is affine.
    return Connection::affine(ls, out.y[0] - ls * out.x[0]);
  }
  return Connection::pwl(std::move(out.x), std::move(out.y), out.left_slope, out.right_slope);
}

// |f - g| <= tol * max(1, |f|) on both functions' kinks and two ray probes.
inline bool approx_equal(const Connection& f, const Connection& g, double tol) {
  std::vector<double> xs = f.breakpoints();
  for (double b : g.breakpoints()) xs.push_back(b);
  if (xs.empty()) xs.push_back(0.0);
  xs = detail::sorted_unique(xs);
  double span = std::max(1.0, xs.back() - xs.front());
  xs.push_back(xs.front() - 10.0 * span);
  xs.push_back(xs.back() + 10.0 * span);
  for (double x : xs) {
    double a = f(x), b = g(x);
    if (std::abs(a - b) > tol * std::max(1.0, std::abs(a))) return false;
  }
  return true;
}

// An ordered chain of connections applied right-to-left, as along a path
// x -> x1 -> ... -> y: chain[0] is the arc at x (outermost). All-affine
// chains are kept collapsed to a single Affine descriptor.
class ComposedConnection {
 public:
  ComposedConnection() = default;  // identity

  explicit ComposedConnection(Connection g) { chain_.push_back(std::move(g)); normalize(); }

  const std::vector<Connection>& chain() const { return chain_; }
  bool is_identity() const { return chain_.empty(); }

  double operator()(double p) const {
    for (auto it = chain_.rbegin(); it != chain_.rend(); ++it) p = (*it)(p);
    return p;
  }

  bool all_affine() const {
    return std::all_of(chain_.begin(), chain_.end(),
                       [](const Connection& c) { return c.is_affine_like(); });
  }

  std::optional<Affine> collapsed_affine() const {
    if (!all_affine()) return std::nullopt;
    if (chain_.empty()) return Affine{1.0, 0.0};
    return chain_.front().as_affine();  // normalized: a single collapsed entry
  }

  // Exact single-function form via the closed pwl algebra.
  Connection collapse() const {
    Connection acc = Connection::identity();
    for (auto it = chain_.rbegin(); it != chain_.rend(); ++it) acc = compose(*it, acc);
    return acc;
  }

 private:
  void normalize() {
    if (!all_affine() || chain_.size() <= 1) return;
    Affine acc = chain_.back().as_affine();
    for (auto it = std::next(chain_.rbegin()); it != chain_.rend(); ++it) {
      Affine o = it->as_affine();
      acc = Affine{o.slope * acc.slope, o.slope * acc.intercept + o.intercept};
    }
    chain_.clear();
    chain_.push_back(Connection::affine(acc.slope, acc.intercept));
  }

  std::vector<Connection> chain_;

  friend ComposedConnection compose(const Connection&, const ComposedConnection&);
};

// Prepend `outer`, keeping the all-affine collapse invariant.
inline ComposedConnection compose(const Connection& outer, const ComposedConnection& inner) {
  ComposedConnection out;
  out.chain_.reserve(inner.chain_.size() + 1);
  out.chain_.push_back(outer);
  out.chain_.insert(out.chain_.end(), inner.chain_.begin(), inner.chain_.end());
  out.normalize();
  return out;
}

}  // namespace eqflow
