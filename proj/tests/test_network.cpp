#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "eqflow/network.hpp"

using namespace eqflow;

namespace {

Network triangle() { return Network({"a", "b", "c"}, {{0, 1}, {1, 2}, {0, 2}}); }

}  // namespace

TEST_CASE("construction rejects malformed graphs") {
  CHECK_THROWS_AS(Network({"a", "b"}, {{0, 0}}), ValidationError);
  CHECK_THROWS_AS(Network({"a", "b"}, {{0, 1}, {0, 1}}), ValidationError);
  CHECK_THROWS_AS(Network({"a", "b"}, {{0, 2}}), ValidationError);
  CHECK_THROWS_AS(Network({"a", "a"}, {}), ValidationError);
  CHECK_THROWS_AS(Network({"a", ""}, {}), ValidationError);
  CHECK_NOTHROW(Network({"a", "b"}, {{0, 1}, {1, 0}}));  // antiparallel pair is fine
}

TEST_CASE("incidence_apply matches the arc-node incidence definition") {
  Network ab({"a", "b"}, {{0, 1}});
  CHECK(incidence_apply(ab, {{1.0}}) == std::vector<double>{-1.0, 1.0});
  CHECK(incidence_apply(ab, {{0.0}}) == std::vector<double>{0.0, 0.0});

  auto v = incidence_apply(triangle(), {{2.0, 2.0, 1.0}});
  CHECK(v == std::vector<double>{-3.0, 0.0, 3.0});
}

TEST_CASE("incidence_apply is linear on integer flows") {
  std::mt19937 rng(7);
  Network net = triangle();
  std::uniform_int_distribution<int> mass(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    InternalFlow m1{{double(mass(rng)), double(mass(rng)), double(mass(rng))}};
    InternalFlow m2{{double(mass(rng)), double(mass(rng)), double(mass(rng))}};
    InternalFlow sum{{m1.mu[0] + m2.mu[0], m1.mu[1] + m2.mu[1], m1.mu[2] + m2.mu[2]}};
    auto v1 = incidence_apply(net, m1);
    auto v2 = incidence_apply(net, m2);
    auto vs = incidence_apply(net, sum);
    for (int z = 0; z < 3; ++z) CHECK(vs[z] == v1[z] + v2[z]);
  }
}

TEST_CASE("cut_arcs splits crossing arcs by direction") {
  Network net = triangle();
  auto all = cut_arcs(net, {true, true, true});
  CHECK(all.outward.empty());
  CHECK(all.inward.empty());
  auto none = cut_arcs(net, {false, false, false});
  CHECK(none.outward.empty());
  CHECK(none.inward.empty());

  auto ab = cut_arcs(net, {true, true, false});
  CHECK(ab.outward == std::vector<int>{1, 2});  // b->c, a->c
  CHECK(ab.inward.empty());
}

TEST_CASE("cut_arcs partitions crossing arcs") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + int(rng() % 6);
    std::vector<std::string> names;
    for (int z = 0; z < n; ++z) names.push_back("v" + std::to_string(z));
    std::vector<std::pair<int, int>> arcs;
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (u != v && rng() % 2) arcs.push_back({u, v});
    Network net(names, arcs);
    std::vector<bool> mask(n);
    for (int z = 0; z < n; ++z) mask[z] = rng() % 2;
    auto cut = cut_arcs(net, mask);
    int crossing = 0;
    for (const Arc& a : net.arcs())
      if (mask[a.from] != mask[a.to]) ++crossing;
    CHECK(int(cut.outward.size() + cut.inward.size()) == crossing);
  }
}

TEST_CASE("is_retaining agrees with the outward-arc definition and duality") {
  Network ab({"a", "b"}, {{0, 1}});
  CHECK(is_retaining(ab, {true, true}));
  CHECK_FALSE(is_retaining(ab, {true, false}));
  CHECK(is_retaining(ab, {false, true}));

  // B retaining iff complement has no inward arcs.
  std::mt19937 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + int(rng() % 5);
    std::vector<std::string> names;
    for (int z = 0; z < n; ++z) names.push_back("v" + std::to_string(z));
    std::vector<std::pair<int, int>> arcs;
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (u != v && rng() % 3 == 0) arcs.push_back({u, v});
    Network net(names, arcs);
    std::vector<bool> mask(n), comp(n);
    for (int z = 0; z < n; ++z) {
      mask[z] = rng() % 2;
      comp[z] = !mask[z];
    }
    auto complement_cut = cut_arcs(net, comp);
    CHECK(is_retaining(net, mask) == complement_cut.inward.empty());
  }
}

TEST_CASE("hop_distance walks directed arcs only") {
  Network chain({"a", "b", "c"}, {{0, 1}, {1, 2}});
  CHECK(hop_distance(chain, 0, {true, false, false}) == 0);
  CHECK(hop_distance(chain, 0, {false, false, true}) == 2);
  Network ab({"a", "b"}, {{0, 1}});
  CHECK_FALSE(hop_distance(ab, 1, {true, false}).has_value());
}

TEST_CASE("exit flow validation") {
  Network ab({"a", "b"}, {{0, 1}});
  CHECK_NOTHROW(validate_exit_flow(ab, {{-1.0, 1.0}}));
  CHECK_THROWS_AS(validate_exit_flow(ab, {{-1.0, 2.0}}), ValidationError);
  CHECK_THROWS_AS(validate_exit_flow(ab, {{1.0}}), ValidationError);
  // non-integer values get the absolute mass tolerance
  CHECK_NOTHROW(validate_exit_flow(ab, {{-0.5, 0.5 + 1e-12}}));
}
