#include <doctest.h>

#include <nlohmann/json.hpp>

#include "loghier/topology.hpp"

using namespace loghier;
using nlohmann::json;

namespace {

Topology load(const char* text) { return Topology::load(topology_config_from_json(json::parse(text))); }

std::string load_error(const char* text) {
  try {
    load(text);
  } catch (const TopologyError& e) {
    return e.what();
  }
  return "";
}

AnomalousPoint point(const std::string& dev, TemplateId tid) { return AnomalousPoint{{}, 5.0, SignalKey{"dc", dev, tid}}; }

}  // namespace

TEST_SUITE("topology") {
  TEST_CASE("depth index of a declared chain") {
    auto t = load(R"({"nodes":[
      {"id":"root","kind":"root"},
      {"id":"group-1","parent":"root","kind":"group"},
      {"id":"dev-a","parent":"group-1","kind":"device"},
      {"id":"tmpl-1","parent":"dev-a","kind":"template-leaf","match":"1"}]})");
    REQUIRE(t.size() == 4);
    for (const char* id : {"root", "group-1", "dev-a", "tmpl-1"}) REQUIRE(t.find(id));
    CHECK(t.node(*t.find("root")).depth == 0);
    CHECK(t.node(*t.find("group-1")).depth == 1);
    CHECK(t.node(*t.find("dev-a")).depth == 2);
    CHECK(t.node(*t.find("tmpl-1")).depth == 3);
    CHECK(t.max_depth() == 3);
    std::size_t total = 0;
    for (std::size_t d = 0; d < t.depth_index().size(); ++d)
      for (auto i : t.depth_index()[d]) {
        CHECK(t.node(i).depth == d);
        ++total;
      }
    CHECK(total == t.size());
    // The declared leaf is used for its (device, template).
    CHECK(t.resolve_leaf(SignalKey{"dc", "dev-a", 1}) == *t.find("tmpl-1"));
  }

  TEST_CASE("validation errors name the node") {
    CHECK(load_error(R"({"nodes":[{"id":"a","kind":"root"},{"id":"b","kind":"root"}]})").find("multiple roots") !=
          std::string::npos);
    auto w = load_error(R"({"nodes":[{"id":"root","kind":"root"},{"id":"g","parent":"root","kind":"group","weight":150}]})");
    CHECK(w.find("'g'") != std::string::npos);
    auto orphan = load_error(R"({"nodes":[{"id":"root","kind":"root"},{"id":"g","parent":"nope","kind":"group"}]})");
    CHECK(orphan.find("'g'") != std::string::npos);
    auto cycle = load_error(R"({"nodes":[{"id":"root","kind":"root"},
      {"id":"x","parent":"y","kind":"group"},{"id":"y","parent":"x","kind":"group"}]})");
    CHECK(cycle.find("cycle") != std::string::npos);
    CHECK(load_error(R"({"nodes":[{"id":"root","kind":"root"},{"id":"root","parent":"root","kind":"group"}]})")
              .find("duplicate") != std::string::npos);
    CHECK(load_error(R"({"nodes":[]})").find("no root") != std::string::npos);
  }

  TEST_CASE("strict unknown-key rejection") {
    CHECK_THROWS_AS(topology_config_from_json(json::parse(R"({"nodes":[],"extra":1})")), TopologyError);
    CHECK_THROWS_AS(topology_config_from_json(json::parse(R"({"nodes":[{"id":"r","kind":"root","colour":"red"}]})")),
                    TopologyError);
    CHECK_THROWS_AS(topology_config_from_json(json::parse(R"({"nodes":[{"id":"r","kind":"leaf"}]})")), TopologyError);
  }

  TEST_CASE("longest prefix wins") {
    auto t = load(R"({"nodes":[
      {"id":"root","kind":"root"},
      {"id":"fabric","parent":"root","kind":"group","match":"f*"},
      {"id":"fcr-role","parent":"root","kind":"group","match":"fcr*"}]})");
    auto leaf = t.resolve_leaf(SignalKey{"dc", "fcr01a", 3});
    auto dev = *t.node(leaf).parent;
    CHECK(*t.node(dev).parent == *t.find("fcr-role"));
    auto other = t.resolve_leaf(SignalKey{"dc", "fx9", 3});
    CHECK(*t.node(*t.node(other).parent).parent == *t.find("fabric"));
  }

  TEST_CASE("equal-length prefixes break ties lexicographically") {
    auto t = load(R"({"nodes":[
      {"id":"root","kind":"root"},
      {"id":"zz","parent":"root","kind":"group","match":"ab*"},
      {"id":"aa","parent":"root","kind":"group","match":"ab*"}]})");
    auto leaf = t.resolve_leaf(SignalKey{"dc", "abc", 1});
    auto group = *t.node(*t.node(leaf).parent).parent;
    CHECK(group == *t.find("aa"));
    auto again = load(R"({"nodes":[
      {"id":"root","kind":"root"},
      {"id":"aa","parent":"root","kind":"group","match":"ab*"},
      {"id":"zz","parent":"root","kind":"group","match":"ab*"}]})");
    auto leaf2 = again.resolve_leaf(SignalKey{"dc", "abc", 1});
    CHECK(again.node(*again.node(*again.node(leaf2).parent).parent).id == t.node(group).id);
  }

  TEST_CASE("literal match beats prefix") {
    auto t = load(R"({"nodes":[
      {"id":"root","kind":"root"},
      {"id":"g","parent":"root","kind":"group","match":"sw*"},
      {"id":"sw-7","parent":"g","kind":"device"}]})");
    auto leaf = t.resolve_leaf(SignalKey{"dc", "sw-7", 2});
    CHECK(*t.node(leaf).parent == *t.find("sw-7"));
  }

  TEST_CASE("unknown devices fall back to the unassigned group") {
    auto t = Topology::root_only();
    auto leaf = t.resolve_leaf(SignalKey{"dc", "mystery", 9});
    auto dev = *t.node(leaf).parent;
    auto group = *t.node(dev).parent;
    CHECK(t.node(group).id == "unassigned");
    CHECK(*t.node(group).parent == Topology::kRoot);
    CHECK(t.node(leaf).weight == 50.0);
    CHECK(t.node(leaf).kind == NodeKind::TemplateLeaf);
  }

  TEST_CASE("resolve_leaf is idempotent and auto leaves keep declared depths") {
    auto t = load(R"({"nodes":[{"id":"root","kind":"root"},{"id":"g","parent":"root","kind":"group","match":"a*"}]})");
    auto before = t.node(*t.find("g")).depth;
    auto a = t.resolve_leaf(SignalKey{"dc", "a1", 1});
    auto b = t.resolve_leaf(SignalKey{"dc", "a1", 1});
    CHECK(a == b);
    CHECK(t.node(a).id == t.node(b).id);
    t.resolve_leaf(SignalKey{"dc", "a2", 1});
    t.resolve_leaf(SignalKey{"dc", "zz", 5});
    CHECK(t.node(*t.find("g")).depth == before);
    CHECK(t.node(*t.find("root")).depth == 0);
  }

  TEST_CASE("filters") {
    auto t = load(R"({"nodes":[{"id":"root","kind":"root"}],
      "filters":[{"device":"lab-*"},{"template_id":42}]})");
    CHECK_FALSE(t.keep(point("lab-7", 1)));
    CHECK_FALSE(t.keep(point("core", 42)));
    CHECK(t.keep(point("core", 41)));
    CHECK(Topology::root_only().keep(point("lab-7", 42)));
    auto both = load(R"({"nodes":[{"id":"root","kind":"root"}],"filters":[{"device":"lab-*","template_id":3}]})");
    CHECK(both.keep(point("lab-1", 4)));
    CHECK_FALSE(both.keep(point("lab-1", 3)));
  }

  TEST_CASE("effective weight") {
    CHECK(effective_weight({100, 100, 100}) == doctest::Approx(1.0));
    CHECK(effective_weight({50}) == doctest::Approx(0.25));
    CHECK(effective_weight({50, 100}) == doctest::Approx(0.5));
    CHECK(effective_weight({0, 100}) == 0.0);
    CHECK_THROWS(effective_weight({120}));
    CHECK_THROWS(effective_weight({}));
  }

  TEST_CASE("aggregation weights: implicit 1/n, explicit w/100, mixed uses the default") {
    auto t = load(R"({"nodes":[
      {"id":"root","kind":"root"},
      {"id":"a","parent":"root","kind":"group"},
      {"id":"b","parent":"root","kind":"group"},
      {"id":"c","parent":"a","kind":"group","weight":80},
      {"id":"d","parent":"a","kind":"group"}]})");
    CHECK(t.aggregation_weight(*t.find("a")) == doctest::Approx(0.5));
    CHECK(t.aggregation_weight(*t.find("c")) == doctest::Approx(0.8));
    CHECK(t.aggregation_weight(*t.find("d")) == doctest::Approx(0.5));
    CHECK(t.warnings().size() == 1);
  }
}
