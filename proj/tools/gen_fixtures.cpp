// Generates the committed ITU fixture corpus: small piecewise-linear
// instances whose equilibria are derived in closed form (binding-arc
// inversion through the exact connection algebra), then double-checked by a
// brute-force grid search over target prices refined to 1e-4 resolution and
// by the solver-independent certificate checker. The solver itself is never
// consulted. Run from the repo root:
//
//   gen_fixtures tests/fixtures/itu

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "eqflow/eqflow.hpp"

using namespace eqflow;

namespace {

struct Fixture {
  std::string name;
  FlowProblem fp;
  std::vector<double> expected_p;
  std::vector<double> expected_mu;
  std::string ground;
};

double invert_at(const Connection& g, double value) { return g.inverse()(value); }

// ---------------------------------------------------------------------------
// grid-search verification
// ---------------------------------------------------------------------------

// Residual of the candidate target-price vector: how far the ground sits
// from zero plus how much demand cannot be routed along delta-binding arcs.
double grid_score(const FlowProblem& fp, const std::vector<int>& xs, const std::vector<int>& ys,
                  int ground_node, const std::vector<double>& py, double delta) {
  // reduced thresholds: use exact per-path compositions via the library's
  // profile (tested independently); here arcs are direct in every template,
  // plus explicitly dominated extras, so the direct arc threshold suffices.
  std::vector<double> px(xs.size(), kNegInf);
  std::vector<std::vector<double>> thr(xs.size(), std::vector<double>(ys.size(), kNegInf));
  for (std::size_t yi = 0; yi < ys.size(); ++yi) {
    ReducedProfile prof = reduced_connection_profile(fp.net, fp.g, ys[yi]);
    for (std::size_t xi = 0; xi < xs.size(); ++xi)
      if (prof.toward[xs[xi]]) thr[xi][yi] = (*prof.toward[xs[xi]])(py[yi]);
  }
  double ground_px = kNegInf;
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    for (std::size_t yi = 0; yi < ys.size(); ++yi) px[xi] = std::max(px[xi], thr[xi][yi]);
    if (xs[xi] == ground_node) ground_px = px[xi];
  }
  MaxFlow mf(int(xs.size() + ys.size()) + 2);
  int s = int(xs.size() + ys.size()), t = s + 1;
  double total = 0.0;
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    mf.add_edge(s, int(xi), -fp.q.q[xs[xi]]);
    total += -fp.q.q[xs[xi]];
  }
  for (std::size_t yi = 0; yi < ys.size(); ++yi)
    mf.add_edge(int(xs.size() + yi), t, fp.q.q[ys[yi]]);
  for (std::size_t xi = 0; xi < xs.size(); ++xi)
    for (std::size_t yi = 0; yi < ys.size(); ++yi)
      if (thr[xi][yi] >= px[xi] - delta)
        mf.add_edge(int(xi), int(xs.size() + yi), MaxFlow::kInf);
  double routed = mf.run(s, t);
  // every target must have some supplier binding exactly, or its price is
  // off; this term kills the flat plateaus the routing slack would allow
  double slack = 0.0;
  for (std::size_t yi = 0; yi < ys.size(); ++yi) {
    double best = kPosInf;
    for (std::size_t xi = 0; xi < xs.size(); ++xi)
      if (thr[xi][yi] > kNegInf) best = std::min(best, px[xi] - thr[xi][yi]);
    if (best < kPosInf) slack += std::max(best, 0.0);
  }
  return std::abs(ground_px) + (total - routed) + slack;
}

// Coordinate-box refinement down to 1e-4 resolution; returns the best p_Y.
std::vector<double> grid_search(const FlowProblem& fp, const std::vector<int>& xs,
                                const std::vector<int>& ys, int ground_node) {
  const int kPoints = 201;
  std::vector<double> lo(ys.size(), -24.0), hi(ys.size(), 24.0);
  std::vector<double> best(ys.size(), 0.0);
  double resolution = (hi[0] - lo[0]) / (kPoints - 1);
  while (true) {
    double best_score = kPosInf;
    std::vector<int> idx(ys.size(), 0);
    std::vector<double> cand(ys.size(), 0.0);
    while (true) {
      for (std::size_t d = 0; d < ys.size(); ++d)
        cand[d] = lo[d] + (hi[d] - lo[d]) * idx[d] / double(kPoints - 1);
      double sc = grid_score(fp, xs, ys, ground_node, cand, std::max(2e-4, 4.0 * resolution));
      if (sc < best_score) {
        best_score = sc;
        best = cand;
      }
      std::size_t d = 0;
      while (d < ys.size() && ++idx[d] == kPoints) idx[d++] = 0;
      if (d == ys.size()) break;
    }
    if (resolution <= 1e-4) break;
    for (std::size_t d = 0; d < ys.size(); ++d) {
      double span = std::max(8.0 * resolution, (hi[d] - lo[d]) * 0.05);
      lo[d] = best[d] - span;
      hi[d] = best[d] + span;
    }
    resolution = (hi[0] - lo[0]) / (kPoints - 1);
  }
  return best;
}

void verify_fixture(const Fixture& fx) {
  // 1. the analytic outcome is a certified equilibrium
  EquilibriumOutcome out;
  out.q = fx.fp.q;
  out.mu.mu = fx.expected_mu;
  out.p = fx.expected_p;
  Certificate cert = verify_equilibrium(fx.fp, out, 1e-9);
  if (!cert.pass) {
    std::cerr << fx.name << ": analytic outcome fails the certificate (balance "
              << cert.balance_residual << ", rent " << cert.max_positive_rent << ", cs "
              << cert.cs_residual << ")\n";
    std::exit(1);
  }
  // 2. the brute-force grid lands on the same target prices
  std::vector<int> xs, ys;
  for (int z = 0; z < fx.fp.net.node_count(); ++z) {
    if (fx.fp.q.q[z] < 0.0) xs.push_back(z);
    if (fx.fp.q.q[z] > 0.0) ys.push_back(z);
  }
  int ground_node = fx.fp.net.node_index(fx.ground);
  std::vector<double> found = grid_search(fx.fp, xs, ys, ground_node);
  for (std::size_t yi = 0; yi < ys.size(); ++yi) {
    double want = fx.expected_p[ys[yi]];
    if (std::abs(found[yi] - want) > 1e-3) {
      std::cerr << fx.name << ": grid search found p[" << fx.fp.net.name(ys[yi]) << "] = "
                << found[yi] << " but the derivation says " << want << "\n";
      std::exit(1);
    }
  }
}

json fixture_to_json(const Fixture& fx) {
  json j = problem_to_json(fx.fp, fx.name);
  json p;
  for (int z = 0; z < fx.fp.net.node_count(); ++z) p[fx.fp.net.name(z)] = fx.expected_p[z];
  json mu = json::array();
  for (int a = 0; a < fx.fp.net.arc_count(); ++a)
    mu.push_back({{"from", fx.fp.net.name(fx.fp.net.arc(a).from)},
                  {"to", fx.fp.net.name(fx.fp.net.arc(a).to)},
                  {"flow", fx.expected_mu[a]}});
  j["expected"] = {{"p", p}, {"mu", mu}, {"ground", fx.ground}};
  return j;
}

// ---------------------------------------------------------------------------
// connection pools
// ---------------------------------------------------------------------------

std::vector<Connection> pool_primary() {
  return {
      Connection::affine(1.0, -2.0),
      Connection::affine(1.25, -2.5),
      Connection::affine(0.75, 1.5),
      Connection::pwl({0.0}, {-2.0}, 1.0, 2.0),
      Connection::pwl({-1.0, 1.0}, {-3.0, -1.0}, 0.5, 1.0),
      Connection::pwl({2.0}, {1.0}, 2.0, 0.5),
      Connection::pwl({0.5}, {-0.5}, 0.75, 1.5),
  };
}

std::vector<Connection> pool_secondary() {
  return {
      Connection::affine(1.0, -4.0),
      Connection::affine(2.0, -3.0),
      Connection::affine(0.5, -1.0),
      Connection::pwl({1.0}, {-1.0}, 1.5, 0.5),
      Connection::pwl({-2.0, 0.0}, {-5.0, -2.0}, 1.0, 1.25),
  };
}

// shift a connection down by delta (still increasing, same kinks)
Connection lowered(const Connection& g, double delta) {
  if (g.is_affine_like()) {
    Affine a = g.as_affine();
    return Connection::affine(a.slope, a.intercept - delta);
  }
  const Pwl& f = g.as_pwl();
  std::vector<double> y = f.y;
  for (double& v : y) v -= delta;
  return Connection::pwl(f.x, y, f.left_slope, f.right_slope);
}

// ---------------------------------------------------------------------------
// templates
// ---------------------------------------------------------------------------

Fixture two_sources_one_target(int variant, const Connection& g1, const Connection& g2,
                               double n1, double n2) {
  Fixture fx;
  fx.name = "itu_fork_" + std::to_string(variant);
  fx.fp.net = Network({"x1", "x2", "y"}, {{0, 2}, {1, 2}});
  fx.fp.g = {g1, g2};
  fx.fp.q = {{-n1, -n2, n1 + n2}};
  fx.ground = "x1";
  double py = invert_at(g1, 0.0);
  fx.expected_p = {0.0, g2(py), py};
  fx.expected_mu = {n1, n2};
  return fx;
}

Fixture chain3(int variant, const Connection& a, const Connection& b, double n) {
  Fixture fx;
  fx.name = "itu_chain_" + std::to_string(variant);
  fx.fp.net = Network({"x", "m", "y"}, {{0, 1}, {1, 2}});
  fx.fp.g = {a, b};
  fx.fp.q = {{-n, 0.0, n}};
  fx.ground = "x";
  double py = invert_at(compose(a, b), 0.0);
  double pm = b(py);
  fx.expected_p = {0.0, pm, py};
  fx.expected_mu = {n, n};
  return fx;
}

Fixture diamond(int variant, const Connection& ac, const Connection& cd, double delta,
                double n) {
  Fixture fx;
  fx.name = "itu_diamond_" + std::to_string(variant);
  // route via b is the via-c route lowered by delta, so it never binds
  Connection ab = lowered(ac, delta);
  Connection bd = cd;
  fx.fp.net = Network({"a", "b", "c", "d"}, {{0, 1}, {1, 3}, {0, 2}, {2, 3}});
  fx.fp.g = {ab, bd, ac, cd};
  fx.fp.q = {{-n, 0.0, 0.0, n}};
  fx.ground = "a";
  double pd = invert_at(compose(ac, cd), 0.0);
  double pc = cd(pd);
  double pb = bd(pd);  // max-update extension price for the idle node
  fx.expected_p = {0.0, pb, pc, pd};
  fx.expected_mu = {0.0, 0.0, n, n};
  return fx;
}

Fixture split_2x2(int variant, const Connection& g11, const Connection& g12,
                  const Connection& g22, double n1, double n2, double m1) {
  Fixture fx;
  fx.name = "itu_split_" + std::to_string(variant);
  fx.fp.net = Network({"x1", "x2", "y1", "y2"}, {{0, 2}, {0, 3}, {1, 3}});
  fx.fp.g = {g11, g12, g22};
  fx.fp.q = {{-n1, -n2, m1, n1 + n2 - m1}};
  fx.ground = "x1";
  double py1 = invert_at(g11, 0.0);
  double py2 = invert_at(g12, 0.0);
  fx.expected_p = {0.0, g22(py2), py1, py2};
  fx.expected_mu = {m1, n1 - m1, n2};
  return fx;
}

Fixture double_chain(int variant, const Connection& a1, const Connection& b1,
                     const Connection& a2, const Connection& b2, double ma, double mb) {
  Fixture fx;
  fx.name = "itu_twochain_" + std::to_string(variant);
  fx.fp.net = Network({"x", "m1", "m2", "y1", "y2"}, {{0, 1}, {1, 3}, {0, 2}, {2, 4}});
  fx.fp.g = {a1, b1, a2, b2};
  fx.fp.q = {{-(ma + mb), 0.0, 0.0, ma, mb}};
  fx.ground = "x";
  double py1 = invert_at(compose(a1, b1), 0.0);
  double py2 = invert_at(compose(a2, b2), 0.0);
  fx.expected_p = {0.0, b1(py1), b2(py2), py1, py2};
  fx.expected_mu = {ma, ma, mb, mb};
  return fx;
}

Fixture relay_with_shortcut(int variant, const Connection& a1, const Connection& a2,
                            const Connection& b, double delta, double n1, double n2) {
  Fixture fx;
  fx.name = "itu_relay_" + std::to_string(variant);
  // x1, x2 feed m which feeds y; plus a strictly dominated direct arc x1->y
  Connection direct = lowered(compose(a1, b), delta);
  fx.fp.net = Network({"x1", "x2", "m", "y"}, {{0, 2}, {1, 2}, {2, 3}, {0, 3}});
  fx.fp.g = {a1, a2, b, direct};
  fx.fp.q = {{-n1, -n2, 0.0, n1 + n2}};
  fx.ground = "x1";
  double py = invert_at(compose(a1, b), 0.0);
  double pm = b(py);
  fx.expected_p = {0.0, a2(pm), pm, py};
  fx.expected_mu = {n1, n2, n1 + n2, 0.0};
  return fx;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_fixtures <output-dir>\n";
    return 2;
  }
  std::filesystem::create_directories(argv[1]);

  std::vector<Connection> p1 = pool_primary(), p2 = pool_secondary();
  std::vector<Fixture> fixtures;

  const double margins[4] = {1.0, 2.0, 0.5, 1.5};
  int v = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 2; ++j)
      fixtures.push_back(two_sources_one_target(v++, p1[i], p2[(i + j) % 5],
                                                margins[(i + j) % 4], margins[(i + 2 * j + 1) % 4]));
  v = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j)
      fixtures.push_back(chain3(v++, p1[(2 * i + j) % 7], p2[(i + 3 * j) % 5], margins[(i + j) % 4]));
  v = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j)
      fixtures.push_back(
          diamond(v++, p1[(i + 4 * j) % 7], p2[(2 * i + j) % 5], 0.5 + 0.25 * i, margins[j]));
  v = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j)
      fixtures.push_back(split_2x2(v++, p1[(i + j) % 7], p1[(i + 3 + j) % 7], p2[(i + j) % 5],
                                   2.0, margins[(i + j) % 4], 1.0));
  v = 0;
  for (int i = 0; i < 6; ++i)
    fixtures.push_back(double_chain(v++, p1[i % 7], p2[(i + 1) % 5], p1[(i + 3) % 7],
                                    p2[(i + 2) % 5], margins[i % 4], margins[(i + 1) % 4]));
  v = 0;
  for (int i = 0; i < 4; ++i)
    fixtures.push_back(relay_with_shortcut(v++, p1[(i + 1) % 7], p1[(i + 5) % 7], p2[i % 5],
                                           0.75, margins[i % 4], margins[(i + 2) % 4]));

  if (fixtures.size() != 50) {
    std::cerr << "expected 50 fixtures, built " << fixtures.size() << "\n";
    return 1;
  }

  for (const Fixture& fx : fixtures) {
    verify_fixture(fx);
    std::ofstream out(std::string(argv[1]) + "/" + fx.name + ".json", std::ios::binary);
    out << fixture_to_json(fx).dump(2) << "\n";
    std::cout << fx.name << " ok\n";
  }
  std::cout << "wrote " << fixtures.size() << " fixtures\n";
  return 0;
}
