#include <doctest.h>

#include "loghier/time.hpp"

using namespace loghier;
using namespace std::chrono;

TEST_SUITE("time") {
  TEST_CASE("iso8601 round trip") {
    auto t = parse_iso8601("2021-01-05T10:31:02.000Z");
    REQUIRE(t);
    CHECK(format_iso8601(*t) == "2021-01-05T10:31:02.000Z");
    CHECK(to_epoch_ms(*t) == 1609842662000);
    CHECK(parse_iso8601("2021-01-05 10:31:02.250+00:00") == *t + milliseconds{250});
    CHECK(parse_iso8601("2021-01-05T10:31:02Z") == *t);
    CHECK_FALSE(parse_iso8601("yesterday"));
    CHECK_FALSE(parse_iso8601("2021-13-05T10:31:02Z"));
    CHECK_FALSE(parse_iso8601("2021-02-30T10:31:02Z"));
  }

  TEST_CASE("syslog timestamps take the supplied year") {
    auto t = parse_syslog_time("Jan  5 10:31:02", 2021);
    REQUIRE(t);
    CHECK(format_iso8601(*t) == "2021-01-05T10:31:02.000Z");
    CHECK(parse_syslog_time("Dec 31 23:59:59", 2020) == parse_iso8601("2020-12-31T23:59:59Z"));
    CHECK_FALSE(parse_syslog_time("Foo  5 10:31:02", 2021));
  }

  TEST_CASE("align_down floors on the epoch grid") {
    CHECK(align_down(from_epoch_ms(125000), seconds(60)) == from_epoch_ms(120000));
    CHECK(align_down(from_epoch_ms(120000), seconds(60)) == from_epoch_ms(120000));
    CHECK(align_down(from_epoch_ms(-1), seconds(60)) == from_epoch_ms(-60000));
  }

  TEST_CASE("durations") {
    CHECK(parse_duration("60s") == seconds(60));
    CHECK(parse_duration("15min") == minutes(15));
    CHECK(parse_duration("250ms") == milliseconds(250));
    CHECK(parse_duration("24h") == hours(24));
    CHECK(parse_duration("1.5") == milliseconds(1500));
    CHECK_FALSE(parse_duration("fast"));
    CHECK_FALSE(parse_duration("10 parsecs"));
    for (Duration d : {Duration{hours(2)}, Duration{minutes(5)}, Duration{seconds(61)}, Duration{milliseconds(7)}})
      CHECK(parse_duration(format_duration(d)) == d);
    CHECK(format_duration(minutes(15)) == "15min");
  }
}
