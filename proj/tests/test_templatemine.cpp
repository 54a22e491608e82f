#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "loghier/templatemine.hpp"

using namespace loghier;

namespace {

using Tokens = std::vector<std::string>;

std::size_t literal_count(const LogTemplate& t) {
  std::size_t n = 0;
  for (const auto& tok : t.tokens) n += tok != kWildcard;
  return n;
}

std::vector<std::string> random_messages(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> heads = {"Interface", "Power", "BGP", "User", "Fan"};
  const std::vector<std::string> words = {"up", "down", "failed", "changed", "state", "neighbor", "login", "ok"};
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    std::string m = heads[rng() % heads.size()];
    int len = 2 + static_cast<int>(rng() % 4);
    for (int j = 0; j < len; ++j) {
      m += ' ';
      if (rng() % 3 == 0) m += "eth" + std::to_string(rng() % 16);
      else m += words[rng() % words.size()];
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace

TEST_SUITE("templatemine") {
  TEST_CASE("tokenize") {
    CHECK(tokenize("Interface eth0 down") == Tokens{"Interface", "eth0", "down"});
    CHECK(tokenize("latency 153 ms", {MaskRule{"\\b\\d+\\b", "<NUM>"}}) == Tokens{"latency", "<NUM>", "ms"});
    CHECK(tokenize("a  b") == Tokens{"a", "b"});
    CHECK(tokenize(" \t a\tb \n") == Tokens{"a", "b"});
    CHECK(tokenize("   ").empty());
  }

  TEST_CASE("masks apply in order") {
    std::vector<MaskRule> masks = {{"\\d+\\.\\d+\\.\\d+\\.\\d+", "<IP>"}, {"\\d+", "<NUM>"}};
    CHECK(tokenize("peer 10.0.0.1 port 179", masks) == Tokens{"peer", "<IP>", "port", "<NUM>"});
  }

  TEST_CASE("trace: generalization and a new path") {
    TemplateMiner m;
    auto a = m.match({"Interface", "eth0", "down"});
    CHECK(a.id == 1);
    CHECK(a.is_new);
    CHECK(m.get(1).tokens == Tokens{"Interface", "eth0", "down"});
    auto b = m.match({"Interface", "eth1", "down"});
    CHECK(b.id == 1);
    CHECK_FALSE(b.is_new);
    CHECK(m.get(1).tokens == Tokens{"Interface", "<*>", "down"});
    CHECK(m.get(1).match_count == 2);
    auto c = m.match({"Power", "supply", "failed"});
    CHECK(c.id == 2);
    CHECK(c.is_new);
  }

  TEST_CASE("similarity") {
    CHECK(TemplateMiner::similarity({"a", "<*>", "c"}, {"a", "x", "d"}) == doctest::Approx(2.0 / 3.0));
    CHECK(TemplateMiner::similarity({"a", "b"}, {"a", "b", "c"}) == 0.0);
  }

  TEST_CASE("different lengths never share a template") {
    TemplateMiner m;
    auto a = m.match({"link", "down"});
    auto b = m.match({"link", "down", "now"});
    CHECK(a.id != b.id);
  }

  TEST_CASE("similarity below threshold creates a new template") {
    TemplateMiner m(MinerConfig{4, 0.9, 100, {}});
    m.match({"Interface", "eth0", "went", "down"});
    auto r = m.match({"Interface", "eth1", "came", "up"});
    CHECK(r.is_new);
    CHECK(r.id == 2);
  }

  TEST_CASE("numeric tokens key the tree as wildcard") {
    TemplateMiner m;
    auto a = m.match({"port42", "is", "down"});
    auto b = m.match({"port43", "is", "down"});
    CHECK(a.id == b.id);
    CHECK(m.get(a.id).tokens == Tokens{"<*>", "is", "down"});
  }

  TEST_CASE("max_children overflow routes to the wildcard child") {
    TemplateMiner m(MinerConfig{4, 0.5, 2, {}});
    m.match({"alpha", "x", "y"});
    m.match({"beta", "x", "y"});
    auto r1 = m.match({"gamma", "x", "y"});
    auto r2 = m.match({"delta", "x", "y"});
    CHECK(r1.id == r2.id);
    CHECK(m.size() == 3);
  }

  TEST_CASE("export and import") {
    TemplateMiner empty;
    CHECK(empty.export_templates().empty());

    auto msgs = random_messages(7, 400);
    TemplateMiner m;
    std::vector<TemplateId> first;
    for (const auto& s : msgs) first.push_back(m.add_message(s).id);
    auto doc = templates_to_json(m.export_templates());
    auto restored = TemplateMiner::import_templates(templates_from_json(doc));
    CHECK(restored.export_templates() == m.export_templates());
    for (std::size_t i = 0; i < msgs.size(); ++i) CHECK(restored.add_message(msgs[i]).id == m.add_message(msgs[i]).id);

    // Every message still maps to a template it was assigned or one that absorbed it.
    for (std::size_t i = 0; i < msgs.size(); ++i) CHECK(m.get(first[i]).id == first[i]);
  }

  TEST_CASE("import rejects duplicate ids") {
    std::vector<LogTemplate> dup = {{1, {"a"}, 1}, {1, {"b"}, 1}};
    CHECK_THROWS_AS(TemplateMiner::import_templates(dup), TemplateMinerError);
    CHECK_THROWS_AS(TemplateMiner::import_templates({{0, {"a"}, 1}}), TemplateMinerError);
    CHECK_THROWS_AS(TemplateMiner::import_templates({{3, {}, 1}}), TemplateMinerError);
    auto j = nlohmann::json::parse(R"([{"id":1,"tokens":["a"],"match_count":1},{"id":1,"tokens":["b"],"match_count":2}])");
    CHECK_THROWS(TemplateMiner::import_templates(templates_from_json(j)));
  }

  TEST_CASE("property: idempotence, monotone generalization, bounded ids, determinism") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto msgs = random_messages(seed, 300);
      TemplateMiner m;
      std::map<TemplateId, std::size_t> literals;
      std::vector<TemplateId> ids;
      std::set<std::string> shapes;
      TemplateId last_max = 0;
      for (const auto& s : msgs) {
        auto r1 = m.add_message(s);
        auto r2 = m.add_message(s);
        CHECK(r1.id == r2.id);
        CHECK_FALSE(r2.is_new);
        if (r1.is_new) {
          CHECK(r1.id == last_max + 1);
          last_max = r1.id;
        }
        ids.push_back(r1.id);
        shapes.insert(s);
        for (const auto& t : m.export_templates()) {
          auto n = literal_count(t);
          auto it = literals.find(t.id);
          if (it != literals.end()) CHECK(n <= it->second);
          literals[t.id] = n;
        }
      }
      CHECK(m.size() <= shapes.size());
      TemplateMiner replay;
      for (std::size_t i = 0; i < msgs.size(); ++i) {
        CHECK(replay.add_message(msgs[i]).id == ids[i]);
        replay.add_message(msgs[i]);
      }
    }
  }

  TEST_CASE("config validation") {
    CHECK_THROWS(MinerConfig{1, 0.5, 100, {}}.validate());
    CHECK_THROWS(MinerConfig{4, 0.0, 100, {}}.validate());
    CHECK_THROWS(MinerConfig{4, 1.5, 100, {}}.validate());
    CHECK_NOTHROW(MinerConfig{4, 1.0, 100, {}}.validate());
  }
}
