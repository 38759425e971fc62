#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "eqflow/feasibility.hpp"
#include "test_support.hpp"

using namespace eqflow;

TEST_CASE("check_feasibility on the forced single-arc instances") {
  Network ab({"a", "b"}, {{0, 1}});

  FeasibilityReport ok = check_feasibility(ab, {{-1.0, 1.0}});
  REQUIRE(ok.feasible);
  CHECK(ok.witness_flow.mu == std::vector<double>{1.0});

  FeasibilityReport bad = check_feasibility(ab, {{1.0, -1.0}});
  REQUIRE_FALSE(bad.feasible);
  CHECK(bad.violating_set == std::vector<int>{1});
  CHECK(bad.deficit == -1.0);
  CHECK(is_retaining(ab, node_mask(ab, bad.violating_set)));

  FeasibilityReport zero = check_feasibility(ab, {{0.0, 0.0}});
  REQUIRE(zero.feasible);
  CHECK(zero.witness_flow.mu == std::vector<double>{0.0});

  CHECK_THROWS_AS(check_feasibility(ab, {{1.0, 1.0}}), ValidationError);
}

TEST_CASE("retaining_oracle enumerates subsets") {
  Network ab({"a", "b"}, {{0, 1}});
  CHECK(retaining_oracle(ab, {{0.0, 0.0}}).min_value == 0.0);
  CHECK(retaining_oracle(ab, {{-1.0, 1.0}}).min_value == 0.0);

  RetainingScan scan = retaining_oracle(ab, {{1.0, -1.0}});
  CHECK(scan.min_value == -1.0);
  CHECK(scan.argmin_set == std::vector<int>{1});
  CHECK_FALSE(scan.feasible);

  std::vector<std::string> big;
  for (int i = 0; i < 21; ++i) big.push_back("n" + std::to_string(i));
  Network too_big(big, {});
  ExitFlow q;
  q.q.assign(21, 0.0);
  CHECK_THROWS_AS(retaining_oracle(too_big, q), ValidationError);
}

TEST_CASE("max-flow verdict equals the retaining-set oracle") {
  std::mt19937 rng(101);
  const double densities[3] = {0.2, 0.5, 0.8};
  for (int trial = 0; trial < 500; ++trial) {
    int n = 2 + int(rng() % 9);
    Network net = eqtest::random_network(rng, n, densities[trial % 3]);
    ExitFlow q = eqtest::random_balanced_q(rng, n);
    FeasibilityReport rep = check_feasibility(net, q);
    RetainingScan scan = retaining_oracle(net, q);
    REQUIRE(rep.feasible == scan.feasible);
    if (rep.feasible) {
      auto v = incidence_apply(net, rep.witness_flow);
      for (int z = 0; z < n; ++z) CHECK(v[z] == q.q[z]);  // exact on integers
      for (double f : rep.witness_flow.mu) CHECK(f >= 0.0);
    } else {
      CHECK(is_retaining(net, node_mask(net, rep.violating_set)));
      double sum = 0.0;
      for (int z : rep.violating_set) sum += q.q[z];
      CHECK(sum == rep.deficit);
      CHECK(rep.deficit < 0.0);
    }
  }
}

TEST_CASE("hoffman_feasible generalizes the zero-lower-bound case") {
  Network ab({"a", "b"}, {{0, 1}});
  std::vector<double> zero{0.0};

  std::mt19937 rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + int(rng() % 6);
    Network net = eqtest::random_network(rng, n, 0.5);
    ExitFlow q = eqtest::random_balanced_q(rng, n);
    std::vector<double> lo(net.arc_count(), 0.0), hi(net.arc_count(), MaxFlow::kInf);
    CHECK(hoffman_feasible(net, q, lo, hi).feasible == check_feasibility(net, q).feasible);
  }

  HoffmanReport capped = hoffman_feasible(ab, {{-1.0, 1.0}}, zero, {0.5});
  REQUIRE_FALSE(capped.feasible);
  CHECK(capped.violating_set == std::vector<int>{1});
  CHECK(capped.lhs == 1.0);
  CHECK(capped.rhs == 0.5);

  HoffmanReport forced = hoffman_feasible(ab, {{-1.0, 1.0}}, {1.0}, {1.0});
  REQUIRE(forced.feasible);
  CHECK(forced.witness_flow.mu == std::vector<double>{1.0});

  CHECK_THROWS_AS(hoffman_feasible(ab, {{-1.0, 1.0}}, {2.0}, {1.0}), ValidationError);
  CHECK_THROWS_AS(hoffman_feasible(ab, {{-1.0, 1.0}}, {-1.0}, {1.0}), ValidationError);
}

TEST_CASE("hoffman witnesses satisfy their bounds") {
  std::mt19937 rng(107);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + int(rng() % 6);
    Network net = eqtest::random_network(rng, n, 0.6);
    ExitFlow q = eqtest::random_balanced_q(rng, n);
    std::vector<double> lo, hi;
    for (int a = 0; a < net.arc_count(); ++a) {
      double l = double(rng() % 2);
      lo.push_back(l);
      hi.push_back(l + double(rng() % 5));
    }
    HoffmanReport rep = hoffman_feasible(net, q, lo, hi);
    if (rep.feasible) {
      auto v = incidence_apply(net, rep.witness_flow);
      for (int z = 0; z < n; ++z) CHECK(std::abs(v[z] - q.q[z]) <= 1e-9);
      for (int a = 0; a < net.arc_count(); ++a) {
        CHECK(rep.witness_flow.mu[a] >= lo[a] - 1e-12);
        CHECK(rep.witness_flow.mu[a] <= hi[a] + 1e-12);
      }
    } else {
      CHECK(rep.lhs > rep.rhs);  // the cut inequality is genuinely violated
    }
  }
}

TEST_CASE("assumption 2 reachability and pruning") {
  Network chain({"a", "b"}, {{0, 1}});
  CHECK(check_assumption2(chain, {{-1.0, 1.0}}).ok);

  Network with_c({"a", "b", "c"}, {{0, 1}});
  Assumption2Report rep = check_assumption2(with_c, {{-1.0, 1.0, 0.0}});
  REQUIRE_FALSE(rep.ok);
  CHECK(rep.dead_nodes == std::vector<int>{2});

  Network cycle_in({"a", "b", "c"}, {{0, 1}, {2, 0}});
  CHECK(check_assumption2(cycle_in, {{-1.0, 1.0, 0.0}}).ok);

  PrunedProblem same = prune_dead_nodes(chain, {{-1.0, 1.0}});
  CHECK(same.net.node_count() == 2);
  CHECK(same.old_of_new == std::vector<int>{0, 1});

  PrunedProblem pruned = prune_dead_nodes(with_c, {{-1.0, 1.0, 0.0}});
  CHECK(pruned.net.node_count() == 2);
  CHECK(pruned.net.names() == std::vector<std::string>{"a", "b"});
  CHECK(pruned.q.q == std::vector<double>{-1.0, 1.0});

  // A dead node with q < 0 is an infeasibility, not a pruning case.
  Network dead_src({"a", "b", "c"}, {{0, 1}});
  CHECK_THROWS_AS(prune_dead_nodes(dead_src, {{-1.0, 2.0, -1.0}}), SolveDiagnostic);
  try {
    prune_dead_nodes(dead_src, {{-1.0, 2.0, -1.0}});
  } catch (const SolveDiagnostic& d) {
    CHECK(d.kind() == DiagnosticKind::kInfeasible);
    CHECK(d.witness_nodes() == std::vector<std::string>{"c"});
    CHECK(d.value() == -1.0);
  }
}

TEST_CASE("hall_check brute force") {
  BipartiteProblem complete;
  complete.x_names = {"x1", "x2"};
  complete.y_names = {"y1", "y2"};
  complete.n = {3.0, 2.0};
  complete.m = {4.0, 1.0};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      complete.arcs.push_back({x, y, Connection::affine(1, -1), false});
  CHECK(hall_check(complete).ok);

  BipartiteProblem starved;
  starved.x_names = {"x1", "x2"};
  starved.y_names = {"y1"};
  starved.n = {1.0, 1.0};
  starved.m = {2.0};
  starved.arcs.push_back({0, 0, Connection::affine(1, -1), false});
  HallReport rep = hall_check(starved);
  REQUIRE_FALSE(rep.ok);
  CHECK(rep.violating_K == std::vector<int>{0});
  CHECK(rep.supply == 1.0);
  CHECK(rep.demand == 2.0);

  // a target with no in-arcs fails already at K = {}
  BipartiteProblem orphan;
  orphan.x_names = {"x1"};
  orphan.y_names = {"y1", "y2"};
  orphan.n = {3.0};
  orphan.m = {1.0, 2.0};
  orphan.arcs.push_back({0, 0, Connection::affine(1, -1), false});
  HallReport orep = hall_check(orphan);
  REQUIRE_FALSE(orep.ok);
  CHECK(orep.violating_K.empty());
  CHECK(orep.demand == 2.0);

  BipartiteProblem mismatched = starved;
  mismatched.m = {3.0};
  CHECK_THROWS_AS(hall_check(mismatched), ValidationError);
}

TEST_CASE("hall_check max-flow path agrees with enumeration") {
  std::mt19937 rng(109);
  for (int trial = 0; trial < 10; ++trial) {
    const int nx = 22, ny = 3;  // above the brute-force guard
    BipartiteProblem bp;
    for (int x = 0; x < nx; ++x) {
      bp.x_names.push_back("x" + std::to_string(x));
      bp.n.push_back(1.0);
    }
    std::vector<double> m = {8.0, 7.0, 7.0};
    std::vector<unsigned long> in_mask(ny, 0ul);
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y)
        if (rng() % 3) {
          bp.arcs.push_back({x, y, Connection::affine(1, -1), false});
          in_mask[y] |= 1ul << x;
        }
    for (int y = 0; y < ny; ++y) {
      bp.y_names.push_back("y" + std::to_string(y));
      bp.m.push_back(m[y]);
    }
    bool brute_ok = true;
    for (unsigned long mask = 0; mask < (1ul << nx) && brute_ok; ++mask) {
      double supply = 0.0, demand = 0.0;
      for (int x = 0; x < nx; ++x)
        if ((mask >> x) & 1ul) supply += 1.0;
      for (int y = 0; y < ny; ++y)
        if ((in_mask[y] & ~mask) == 0ul) demand += m[y];
      if (supply < demand) brute_ok = false;
    }
    CHECK(hall_check(bp).ok == brute_ok);
  }
}

TEST_CASE("Hall remark: bipartite feasibility equals hall_check") {
  std::mt19937 rng(113);
  int done = 0;
  while (done < 100) {
    int nx = 1 + int(rng() % 4), ny = 1 + int(rng() % 4);
    std::vector<double> n(nx, 0.0), m(ny, 0.0);
    int total = 0;
    for (int x = 0; x < nx; ++x) {
      n[x] = 1.0 + double(rng() % 4);
      total += int(n[x]);
    }
    bool bad = false;
    for (int y = 0; y + 1 < ny; ++y) {
      int give = std::max(1, std::min(total - (ny - 1 - y), 1 + int(rng() % 4)));
      if (give <= 0) bad = true;
      m[y] = give;
      total -= give;
    }
    m[ny - 1] = total;
    if (bad || m[ny - 1] <= 0.0) continue;
    ++done;

    std::vector<std::string> names;
    for (int x = 0; x < nx; ++x) names.push_back("x" + std::to_string(x));
    for (int y = 0; y < ny; ++y) names.push_back("y" + std::to_string(y));
    std::vector<std::pair<int, int>> arcs;
    BipartiteProblem bp;
    bp.n = n;
    bp.m = m;
    for (int x = 0; x < nx; ++x) bp.x_names.push_back(names[x]);
    for (int y = 0; y < ny; ++y) bp.y_names.push_back(names[nx + y]);
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y)
        if (rng() % 2) {
          arcs.push_back({x, nx + y});
          bp.arcs.push_back({x, y, Connection::affine(1, -1), false});
        }
    Network net(names, arcs);
    ExitFlow q;
    q.q.assign(nx + ny, 0.0);
    for (int x = 0; x < nx; ++x) q.q[x] = -n[x];
    for (int y = 0; y < ny; ++y) q.q[nx + y] = m[y];
    CHECK(check_feasibility(net, q).feasible == hall_check(bp).ok);
  }
}
