#include <doctest.h>

#include <cmath>
#include <random>

#include "loghier/uvad.hpp"

using namespace loghier;
using namespace std::chrono;

namespace {

const Timestamp kT0 = *parse_iso8601("2021-01-04T00:00:00Z");

ResolvedSignalConfig resolved(SignalConfig c = {}) { return {c, c.background_alpha(seconds(60)), seconds(60)}; }

SignalKey key(const std::string& dev, TemplateId tid = 1) { return SignalKey{"dc", dev, tid}; }

}  // namespace

TEST_SUITE("uvad") {
  TEST_CASE("update_ewma examples") {
    CHECK(update_ewma(0, 4, 0.5) == 2.0);
    CHECK(update_ewma(123.0, 7, 1.0) == 7.0);
    double m = 1, v = 0;
    for (double x : {1.0, 1.0, 1.0}) {
      v = update_ewm_variance(v, m, x, 0.3);
      m = update_ewma(m, x, 0.3);
      CHECK(m == 1.0);
      CHECK(v == 0.0);
    }
  }

  TEST_CASE("oracle: EWMA equals the direct weighted sum") {
    std::mt19937_64 rng(11);
    for (double alpha : {0.05, 0.3, 0.5, 0.9, 1.0}) {
      std::vector<double> xs;
      double seed = 3.5;
      double m = seed;
      for (int t = 1; t <= 100; ++t) {
        xs.push_back(static_cast<double>(rng() % 40));
        m = update_ewma(m, xs.back(), alpha);
        double direct = std::pow(1 - alpha, t) * seed;
        for (int i = 0; i < t; ++i) direct += alpha * std::pow(1 - alpha, i) * xs[static_cast<std::size_t>(t - 1 - i)];
        CHECK(std::abs(m - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
      }
    }
  }

  TEST_CASE("raw_zscore examples and clamping") {
    CHECK(raw_zscore(10, 10, 4, 1, Direction::Positive) == 0.0);
    CHECK(raw_zscore(16, 10, 4, 1, Direction::Positive) == doctest::Approx(3.0));
    CHECK(raw_zscore(2, 10, 4, 1, Direction::Positive) == 0.0);
    CHECK(raw_zscore(2, 10, 4, 1, Direction::Negative) == doctest::Approx(4.0));
    CHECK(raw_zscore(2, 10, 4, 1, Direction::Both) == doctest::Approx(4.0));
    CHECK(raw_zscore(16, 10, 0.01, 1, Direction::Positive) == doctest::Approx(6.0));  // sigma floor
    CHECK(raw_zscore(16, 10, 4, 1, Direction::Positive, ValueBounds{0, 20}) == 0.0);
    CHECK(raw_zscore(25, 10, 4, 1, Direction::Positive, ValueBounds{0, 20}) == doctest::Approx(7.5));
  }

  TEST_CASE("tail_context") {
    CHECK(tail_context(0.7, 0.7, 2.0, 1.0) == doctest::Approx(0.5));
    CHECK(tail_context(1e6, 0.0, 1.0, 1.0) == doctest::Approx(1.0));
    // Phi(1) oracle from erf.
    double phi1 = 0.5 * (1 + std::erf(1 / std::sqrt(2.0)));
    CHECK(tail_context(1.0, 0.0, 1.0, 1.0) == doctest::Approx(phi1).epsilon(1e-12));
    CHECK(phi1 == doctest::Approx(0.8413).epsilon(1e-4));
  }

  TEST_CASE("continuity_boost") {
    CHECK(continuity_boost(4, 0, 0.1, 10) == 4.0);
    CHECK(continuity_boost(4, 3, 0.1, 10) == doctest::Approx(5.2));
    CHECK(continuity_boost(4, 50, 0.1, 10) == doctest::Approx(8.0));
    double prev = 0;
    for (int c = 0; c < 20; ++c) {
      double s = continuity_boost(3.3, c, 0.1, 10);
      CHECK(s >= prev);
      prev = s;
    }
  }

  TEST_CASE("new signal first nonzero count") {
    auto s = SignalState::fresh(key("r1"), kT0);
    auto out = score_point(s, resolved(), kT0, 5);
    REQUIRE(out);
    CHECK(out->score == doctest::Approx(5.5));
    CHECK(out->timestamp == kT0);
    CHECK(out->dimensions == key("r1"));
    CHECK(s.consecutive == 1);
  }

  TEST_CASE("constant series never emits") {
    auto s = SignalState::fresh(key("r1"), kT0);
    s.mean = 4;
    s.background_samples = 1000;
    for (int i = 0; i < 200; ++i) {
      CHECK_FALSE(score_point(s, resolved(), kT0 + minutes(i), 4));
      CHECK(s.consecutive == 0);
    }
  }

  TEST_CASE("neutral tail context leaves the boosted z unchanged") {
    auto s = SignalState::fresh(key("r1"), kT0);
    SignalConfig c;
    c.alpha_recent = 1.0;  // recent level equals this bucket's z
    s.mean = 0;
    s.var = 0;
    s.background_samples = 100;
    s.background_mean = 6.0;  // matches the z below
    s.background_var = 1.0;
    auto out = score_point(s, resolved(c), kT0, 6);
    REQUIRE(out);
    CHECK(out->score == doctest::Approx(6.0 * 1.1));
  }

  TEST_CASE("out-of-order bucket is rejected") {
    auto s = SignalState::fresh(key("r1"), kT0);
    score_point(s, resolved(), kT0, 1);
    CHECK_THROWS_AS(score_point(s, resolved(), kT0 + minutes(2), 1), OrderError);
    CHECK_THROWS_AS(score_point(s, resolved(), kT0, 1), OrderError);
    CHECK_NOTHROW(score_point(s, resolved(), kT0 + minutes(1), 1));
  }

  TEST_CASE("background alpha defaults to a 24 h memory") {
    SignalConfig c;
    CHECK(c.background_alpha(seconds(60)) == doctest::Approx(2.0 / 1441.0));
    c.alpha_background = 0.25;
    CHECK(c.background_alpha(seconds(60)) == 0.25);
  }

  TEST_CASE("detector synthesizes zeros for silent signals") {
    UnivariateDetector det(SignalConfig{}, seconds(60));
    std::vector<CountPoint> pts = {{key("a"), kT0, 3}, {key("a"), kT0 + minutes(5), 2}};
    det.advance(pts, kT0 + minutes(10));
    REQUIRE(det.signal_count() == 1);
    CHECK(det.states()[0].processed == 10);
    CHECK(det.states()[0].last_bucket == kT0 + minutes(9));
    CHECK(det.processed_until() == kT0 + minutes(10));
    CHECK_THROWS_AS(det.advance({{key("a"), kT0 + minutes(3), 1}}, kT0 + minutes(11)), OrderError);
  }

  TEST_CASE("a long silence then a count emits") {
    UnivariateDetector det(SignalConfig{}, seconds(60));
    std::vector<CountPoint> pts = {{key("a"), kT0, 1}};
    for (int i = 1; i < 120; ++i) pts.push_back({key("b"), kT0 + minutes(i), 1});
    pts.push_back({key("a"), kT0 + minutes(120), 10});
    std::sort(pts.begin(), pts.end(),
              [](auto& x, auto& y) { return std::tie(x.bucket_start, x.key) < std::tie(y.bucket_start, y.key); });
    auto out = det.advance(pts, kT0 + minutes(121));
    bool late_a = false;
    for (const auto& p : out) late_a |= p.dimensions.device == "a" && p.timestamp == kT0 + minutes(120);
    CHECK(late_a);
  }

  TEST_CASE("emissions ordered by (timestamp, key) and above threshold") {
    std::mt19937_64 rng(3);
    UnivariateDetector det(SignalConfig{}, seconds(60));
    std::vector<AnomalousPoint> all;
    std::poisson_distribution<int> pois(2.0);
    for (int b = 0; b < 300; ++b) {
      std::vector<CountPoint> pts;
      for (int d = 0; d < 6; ++d) {
        int n = pois(rng) * (b % 97 == 50 ? 10 : 1);
        if (n > 0) pts.push_back({key("d" + std::to_string(d)), kT0 + minutes(b), static_cast<std::uint64_t>(n)});
      }
      auto out = det.advance(pts, kT0 + minutes(b + 1));
      all.insert(all.end(), out.begin(), out.end());
    }
    CHECK_FALSE(all.empty());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i].score >= 3.0);
      if (i) CHECK(std::tie(all[i - 1].timestamp, all[i - 1].dimensions) < std::tie(all[i].timestamp, all[i].dimensions));
    }
  }

  TEST_CASE("property: positive direction never emits below the mean") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
      auto s = SignalState::fresh(key("x"), kT0);
      SignalConfig c;
      c.continuity_gain = 0.5;
      auto rc = resolved(c);
      for (int i = 0; i < 500; ++i) {
        double x = static_cast<double>(rng() % 30);
        double mean_before = s.mean;
        auto out = score_point(s, rc, kT0 + minutes(i), x);
        if (x < mean_before) CHECK_FALSE(out);
      }
    }
  }

  TEST_CASE("suppression: tail multiplier averages at most 1 on stationary noise") {
    std::mt19937_64 rng(17);
    std::poisson_distribution<int> pois(5.0);
    auto s = SignalState::fresh(key("x"), kT0);
    SignalConfig c;
    c.alpha_background = 0.01;
    auto rc = resolved(c);
    double sum = 0;
    int n = 0;
    for (int i = 0; i < 20000; ++i) {
      if (s.background_samples >= 500) {
        double z = raw_zscore(pois(rng), s.mean, s.var, c.sigma_min, c.direction);
        double r = update_ewma(s.recent, z, c.alpha_recent);
        sum += 2 * tail_context(r, s.background_mean, s.background_var, c.sigma_min);
        ++n;
      }
      score_point(s, rc, kT0 + minutes(i), pois(rng));
    }
    CHECK(sum / n <= 1.05);
  }

  TEST_CASE("overrides select per-signal config") {
    SignalOverride neg;
    neg.device = "core-*";
    neg.direction = Direction::Negative;
    CHECK(neg.matches(key("core-1")));
    CHECK_FALSE(neg.matches(key("edge-1")));
    SignalOverride exact;
    exact.device = "edge-1";
    exact.template_id = 4;
    CHECK(exact.matches(key("edge-1", 4)));
    CHECK_FALSE(exact.matches(key("edge-1", 5)));

    UnivariateDetector det(SignalConfig{}, seconds(60), {neg});
    std::vector<CountPoint> pts;
    for (int i = 0; i < 60; ++i) {
      pts.push_back({key("core-1"), kT0 + minutes(i), 20});
      pts.push_back({key("edge-1"), kT0 + minutes(i), 20});
    }
    det.advance(pts, kT0 + minutes(60));
    // A drop to zero on core-1 is anomalous only under the negative override.
    auto out = det.advance({{key("edge-1"), kT0 + minutes(60), 20}}, kT0 + minutes(61));
    REQUIRE(out.size() == 1);
    CHECK(out[0].dimensions.device == "core-1");
  }

  TEST_CASE("config validation") {
    SignalConfig c;
    CHECK_NOTHROW(c.validate());
    c.alpha_short = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.z_emit = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.continuity_cap = 0;
    CHECK_THROWS(c.validate());
    CHECK(direction_from_string("both") == Direction::Both);
    CHECK_THROWS(direction_from_string("up"));
  }

  TEST_CASE("memory per signal is constant") {
    auto run = [](int n_signals) {
      UnivariateDetector det(SignalConfig{}, seconds(60));
      std::vector<CountPoint> pts;
      for (int d = 0; d < n_signals; ++d) pts.push_back({key("dev-" + std::to_string(d)), kT0, 1});
      std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.key < b.key; });
      det.advance(pts, kT0 + minutes(1));
      return det.memory_bytes();
    };
    double per_a = static_cast<double>(run(1000)) / 1000, per_b = static_cast<double>(run(4000)) / 4000;
    CHECK(per_b <= per_a * 1.1);
  }
}
