#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "eqflow/connection.hpp"

using namespace eqflow;

TEST_CASE("eval on the parametric families") {
  CHECK(Connection::affine(1, -3)(10.0) == 7.0);
  CHECK(Connection::penalty(5)(2.0) == -3.0);

  Connection pw = Connection::pwl({0.0, 1.0}, {1.0, 3.0}, 0.5, 2.0);
  CHECK(pw(0.0) == 1.0);
  CHECK(pw(1.0) == 3.0);
  CHECK(pw(0.5) == 2.0);          // interior interpolation
  CHECK(pw(-2.0) == 0.0);         // left ray, slope 0.5
  CHECK(pw(2.0) == 5.0);          // right ray, slope 2
}

TEST_CASE("construction guards") {
  CHECK_THROWS_AS(Connection::affine(0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(Connection::affine(-1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(Connection::pwl({0.0, 0.0}, {1.0, 2.0}, 1, 1), ValidationError);
  CHECK_THROWS_AS(Connection::pwl({0.0, 1.0}, {2.0, 1.0}, 1, 1), ValidationError);
  CHECK_THROWS_AS(Connection::pwl({0.0, 1.0}, {1.0, 2.0}, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(Connection::pwl({}, {}, 1, 1), ValidationError);
}

TEST_CASE("inverse closed forms") {
  Connection inv = Connection::affine(2, 4).inverse();
  Affine a = inv.as_affine();
  CHECK(a.slope == 0.5);
  CHECK(a.intercept == -2.0);

  Affine pinv = Connection::penalty(7).inverse().as_affine();
  CHECK(pinv.slope == 1.0);
  CHECK(pinv.intercept == 7.0);

  Connection pw = Connection::pwl({0.0, 1.0}, {1.0, 3.0}, 1.0, 1.0).inverse();
  const Pwl& f = pw.as_pwl();
  CHECK(f.x == std::vector<double>{1.0, 3.0});
  CHECK(f.y == std::vector<double>{0.0, 1.0});
}

TEST_CASE("round trip inverse(g)(g(p)) == p") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> price(-1e3, 1e3);
  std::vector<Connection> gs = {
      Connection::affine(1, -3), Connection::affine(2.5, 1.75), Connection::penalty(11),
      Connection::pwl({-2.0, 0.0, 3.0}, {-4.0, 1.0, 2.0}, 0.25, 4.0)};
  for (const Connection& g : gs) {
    Connection h = g.inverse();
    for (int i = 0; i < 100; ++i) {
      double p = price(rng);
      double back = h(g(p));
      CHECK(std::abs(back - p) <= 1e-9 * std::max(1.0, std::abs(p)));
    }
  }
}

TEST_CASE("monotonicity on random pairs") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> price(-100.0, 100.0);
  Connection g = Connection::pwl({-1.0, 0.5, 2.0}, {0.0, 0.25, 5.0}, 0.125, 8.0);
  for (int i = 0; i < 200; ++i) {
    double p1 = price(rng), p2 = price(rng);
    if (p1 == p2) continue;
    if (p1 > p2) std::swap(p1, p2);
    CHECK(g(p1) < g(p2));
  }
}

TEST_CASE("composition of chains") {
  ComposedConnection ident;
  CHECK(ident(42.0) == 42.0);

  // identity outer keeps the inner function
  ComposedConnection inner(Connection::affine(3, 1));
  ComposedConnection same = compose(Connection::affine(1, 0), inner);
  CHECK(same.collapsed_affine()->slope == 3.0);
  CHECK(same.collapsed_affine()->intercept == 1.0);

  // costs add
  ComposedConnection cost2 = compose(Connection::affine(1, -1), ComposedConnection(Connection::affine(1, -2)));
  CHECK(cost2.collapsed_affine()->slope == 1.0);
  CHECK(cost2.collapsed_affine()->intercept == -3.0);
  CHECK(cost2(10.0) == 7.0);

  // 2(3p + 1) = 6p + 2
  ComposedConnection prod = compose(Connection::affine(2, 0), ComposedConnection(Connection::affine(3, 1)));
  CHECK(prod.collapsed_affine()->slope == 6.0);
  CHECK(prod.collapsed_affine()->intercept == 2.0);

  // all-affine chains stay collapsed to one descriptor
  CHECK(prod.chain().size() == 1);
}

TEST_CASE("affine collapse equals pointwise composition on a grid") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> sl(0.5, 3.0), ic(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    ComposedConnection chain;
    std::vector<Connection> parts;
    for (int k = 0; k < 4; ++k) parts.push_back(Connection::affine(sl(rng), ic(rng)));
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) chain = compose(*it, chain);
    for (int i = 0; i <= 100; ++i) {
      double p = -50.0 + i;
      double direct = p;
      for (auto it = parts.rbegin(); it != parts.rend(); ++it) direct = (*it)(direct);
      CHECK(std::abs(chain(p) - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("exact composition handles piecewise kinks") {
  Connection outer = Connection::pwl({0.0}, {0.0}, 1.0, 2.0);   // kink at 0
  Connection inner = Connection::affine(1.0, -1.0);
  Connection comp = compose(outer, inner);  // kink moves to p = 1
  CHECK(comp(1.0) == 0.0);
  CHECK(comp(0.0) == -1.0);
  CHECK(comp(3.0) == 4.0);
  const Pwl& f = comp.as_pwl();
  REQUIRE(f.x.size() == 1);
  CHECK(f.x[0] == 1.0);

  // compose is exact: agree with pointwise evaluation everywhere sampled
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> price(-20.0, 20.0);
  Connection in2 = Connection::pwl({-1.0, 2.0}, {-2.0, 4.0}, 0.5, 3.0);
  Connection both = compose(outer, in2);
  for (int i = 0; i < 200; ++i) {
    double p = price(rng);
    CHECK(std::abs(both(p) - outer(in2(p))) <= 1e-12 * std::max(1.0, std::abs(both(p))));
  }
}

TEST_CASE("pointwise_max is the exact upper envelope") {
  // parallel lines: one dominates
  Connection hi = pointwise_max(Connection::affine(1, 2), Connection::affine(1, -1));
  CHECK(hi.is_affine_like());
  CHECK(hi.as_affine().intercept == 2.0);

  // crossing lines get a kink at the crossing
  Connection env = pointwise_max(Connection::affine(1, 0), Connection::affine(2, -1));
  CHECK(env(1.0) == 1.0);   // crossing point
  CHECK(env(0.0) == 0.0);   // left: slope-1 line wins
  CHECK(env(2.0) == 3.0);   // right: slope-2 line wins

  std::mt19937 rng(21);
  std::uniform_real_distribution<double> price(-30.0, 30.0);
  Connection f = Connection::pwl({-2.0, 1.0}, {-1.0, 2.0}, 0.5, 2.0);
  Connection g = Connection::affine(1.5, 0.25);
  Connection m = pointwise_max(f, g);
  for (int i = 0; i < 300; ++i) {
    double p = price(rng);
    CHECK(std::abs(m(p) - std::max(f(p), g(p))) <= 1e-12 * std::max(1.0, std::abs(m(p))));
  }
}

TEST_CASE("compose is associative on sampled grids") {
  Connection a = Connection::affine(2, 1);
  Connection b = Connection::pwl({0.0}, {1.0}, 1.0, 3.0);
  Connection c = Connection::penalty(2);
  Connection left = compose(compose(a, b), c);
  Connection right = compose(a, compose(b, c));
  CHECK(approx_equal(left, right, 1e-9));
}
