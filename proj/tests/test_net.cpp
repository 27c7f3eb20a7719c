#include <doctest.h>

#include <algorithm>
#include <set>

#include "phaseopt/net.hpp"

using namespace phaseopt;

TEST_SUITE_BEGIN("net");

TEST_CASE("ring fixture has the expected shape") {
  const auto net = net::build_fixture();
  CHECK(net.centroids.size() == 8);
  CHECK(net.nodes.size() == 12);
  CHECK(net.links.size() == 24);
  REQUIRE(net.controllers.size() == 4);
  for (const auto& c : net.controllers) {
    CHECK(c.num_phases() == 4);
    CHECK(c.cycle_length == 90);
  }
  CHECK(net.total_demand() == doctest::Approx(7500.0));
  CHECK(net.od_demand("c7", "c3") == doctest::Approx(750.0));
  CHECK(net.od_demand("c6", "c5") == doctest::Approx(0.0));

  // every inbound link at a signalised node is granted by exactly one phase
  for (const auto& c : net.controllers) {
    std::set<std::string> granted;
    for (const auto& phase : c.phase_movements) {
      for (const auto& id : phase) granted.insert(id);
    }
    int inbound = 0;
    for (const auto& link : net.links) {
      if (link.to_node == c.id && !net.is_centroid(link.from_node)) ++inbound;
      if (link.to_node == c.id) CHECK(granted.count(link.id) == 1);
    }
    CHECK(inbound == 2);  // two ring neighbours plus two centroid taps
  }
}

TEST_CASE("every positive-demand pair of the fixture has routes") {
  const auto net = net::build_fixture();
  for (const auto& [od, d] : net.demand) {
    if (d <= 0.0) continue;
    const auto it = net.routes.find(od);
    REQUIRE(it != net.routes.end());
    CHECK(!it->second.empty());
    for (const auto& route : it->second) {
      REQUIRE(!route.links.empty());
      const auto* first = net.find_link(route.links.front());
      const auto* last = net.find_link(route.links.back());
      REQUIRE(first != nullptr);
      REQUIRE(last != nullptr);
      CHECK(first->from_node == od.first);
      CHECK(last->to_node == od.second);
      // loopless and no pass-through centroids
      std::set<std::string> visited;
      for (const auto& id : route.links) {
        const auto* link = net.find_link(id);
        REQUIRE(link != nullptr);
        CHECK(visited.insert(link->from_node).second);
        if (link->to_node != od.second) CHECK(!net.is_centroid(link->to_node));
      }
    }
  }
}

TEST_CASE("green split comes from the granted phase durations") {
  const auto net = net::build_fixture();
  const auto plan = net::uniform_plan(net);
  const auto* c1_i1 = net.find_link("c1_i1");
  REQUIRE(c1_i1 != nullptr);
  CHECK(net::link_green_split(plan, *c1_i1) == doctest::Approx(23.0 / 90.0));
  const auto* outbound = net.find_link("i1_c1");
  REQUIRE(outbound != nullptr);
  CHECK(net::link_green_split(plan, *outbound) == 1.0);

  // a link granted by two phases sums them
  net::Link multi = *c1_i1;
  multi.controlled_by->phases = {0, 2};
  CHECK(net::link_green_split(plan, multi) == doctest::Approx((23.0 + 22.0) / 90.0));
}

TEST_CASE("per-controller green splits add to exactly one") {
  const auto net = net::build_fixture();
  net::SignalPlan plan;
  for (const auto& c : net.controllers) {
    plan.timings.push_back({c.id, c.cycle_length, {10, 20, 25, 35}});
  }
  for (const auto& c : net.controllers) {
    double total = 0.0;
    for (const auto& link : net.links) {
      if (link.controlled_by && link.controlled_by->controller == c.id) {
        total += net::link_green_split(plan, link);
      }
    }
    CHECK(total == 1.0);  // integer sum divided by the cycle, no rounding
  }
}

TEST_CASE("uniform plan spreads the cycle and stays valid") {
  const auto net = net::build_fixture();
  const auto plan = net::uniform_plan(net);
  REQUIRE(plan.timings.size() == 4);
  for (const auto& t : plan.timings) {
    CHECK(t.durations == std::vector<int>{23, 23, 22, 22});
  }
  CHECK(net::validate_plan(plan, net).empty());
}

TEST_CASE("plan validation catches structural mistakes") {
  const auto net = net::build_fixture();
  auto plan = net::uniform_plan(net);

  SUBCASE("wrong sum") {
    plan.timings[0].durations = {30, 30, 30, 30};
    const auto problems = net::validate_plan(plan, net);
    REQUIRE(!problems.empty());
    CHECK(problems.front().find("i1") != std::string::npos);
  }
  SUBCASE("negative duration") {
    plan.timings[1].durations = {-5, 45, 25, 25};
    CHECK(!net::validate_plan(plan, net).empty());
  }
  SUBCASE("missing controller") {
    plan.timings.pop_back();
    CHECK(!net::validate_plan(plan, net).empty());
  }
  SUBCASE("wrong phase count") {
    plan.timings[2].durations = {45, 45};
    CHECK(!net::validate_plan(plan, net).empty());
  }
}

TEST_CASE("incident scales only the struck link") {
  const auto net = net::build_fixture();
  const auto dropped = net::apply_incident(net, {"c7_i4", 2, 0.0, 3600.0});
  for (std::size_t i = 0; i < net.links.size(); ++i) {
    if (net.links[i].id == "c7_i4") {
      CHECK(dropped.links[i].capacity == doctest::Approx(3600.0 / 3.0));
    } else {
      CHECK(dropped.links[i].capacity == net.links[i].capacity);
    }
  }
  CHECK_THROWS(net::apply_incident(net, {"no_such_link", 1, 0.0, 3600.0}));
  CHECK_THROWS(net::apply_incident(net, {"c7_i4", 4, 0.0, 3600.0}));
}

TEST_CASE("route enumeration finds the distinct ring detours") {
  const auto net = net::build_fixture();
  const auto routes = net::enumerate_routes(net, "c7", "c3", 4);
  REQUIRE(routes.size() >= 2);
  // both two-hop ring paths must be present
  const std::vector<std::string> clockwise{"c7_i4", "i4_i3", "i3_i2", "i2_c3"};
  const std::vector<std::string> counter{"c7_i4", "i4_i1", "i1_i2", "i2_c3"};
  auto has = [&](const std::vector<std::string>& want) {
    return std::any_of(routes.begin(), routes.end(),
                       [&](const net::Route& r) { return r.links == want; });
  };
  CHECK(has(clockwise));
  CHECK(has(counter));
  // deterministic: same call twice gives the same ordering
  const auto again = net::enumerate_routes(net, "c7", "c3", 4);
  REQUIRE(again.size() == routes.size());
  for (std::size_t i = 0; i < routes.size(); ++i) CHECK(again[i].links == routes[i].links);
}

TEST_CASE("fingerprint is the semicolon-joined duration list") {
  const auto net = net::build_single_junction_fixture();
  net::SignalPlan plan;
  plan.timings.push_back({"j1", 90, {10, 20, 25, 35}});
  CHECK(net::plan_fingerprint(plan) == "10;20;25;35");
}

TEST_CASE("single junction fixture is a four-leg star") {
  const auto net = net::build_single_junction_fixture();
  CHECK(net.links.size() == 8);
  REQUIRE(net.controllers.size() == 1);
  CHECK(net.controllers[0].num_phases() == 4);
  CHECK(net.total_demand() == doctest::Approx(1500.0));
  CHECK(net.od_demand("c1", "c3") == doctest::Approx(400.0));
}

TEST_SUITE_END();
