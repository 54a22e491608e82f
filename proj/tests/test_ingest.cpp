#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <sys/socket.h>
#include <netinet/in.h>
#include <arpa/inet.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "loghier/ingest.hpp"

using namespace loghier;
using namespace std::chrono;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  auto p = fs::temp_directory_path() / ("loghier_test_" + name);
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

std::string structured(const std::string& ts, const std::string& host, const std::string& msg) {
  return "{\"ts\":\"" + ts + "\",\"host\":\"" + host + "\",\"msg\":\"" + msg + "\"}";
}

std::string at(int secs) { return format_iso8601(from_epoch_ms(secs * 1000LL)); }

RecordStream stream_over(std::istream& in, SourceConfig cfg = {}) {
  if (cfg.path.empty()) cfg.path = "-";
  return RecordStream(std::make_unique<StreamLineSource>(in), cfg, 2021);
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("classic syslog line with priority") {
    ParseContext ctx{2021, "dc-a"};
    auto r = parse_line("<190>Jan  5 10:31:02 router-a1 LINK-3-UPDOWN: Interface eth0, changed state to down",
                        InputFormat::ClassicSyslog, ctx);
    CHECK(r.event_time == *parse_iso8601("2021-01-05T10:31:02Z"));
    CHECK(r.device == "router-a1");
    CHECK(r.message == "LINK-3-UPDOWN: Interface eth0, changed state to down");
    CHECK(r.datacenter == "dc-a");
  }

  TEST_CASE("classic syslog without priority") {
    auto r = parse_line("Dec 31 23:59:59 sw1 x", InputFormat::ClassicSyslog, ParseContext{2020, "d"});
    CHECK(r.event_time == *parse_iso8601("2020-12-31T23:59:59Z"));
    CHECK(r.device == "sw1");
    CHECK(r.message == "x");
  }

  TEST_CASE("structured line maps fields directly") {
    auto r = parse_line(structured("2021-01-05T10:31:02.000Z", "router-a1", "x"), InputFormat::StructuredLines,
                        ParseContext{1970, "dc"});
    CHECK(r == LogRecord{*parse_iso8601("2021-01-05T10:31:02Z"), "router-a1", "x", "dc"});
  }

  TEST_CASE("malformed lines") {
    ParseContext ctx{2021, "dc"};
    CHECK_THROWS_AS(parse_line("no timestamp here at all", InputFormat::ClassicSyslog, ctx), MalformedError);
    CHECK_THROWS_AS(parse_line("Jan  5 10:31:02", InputFormat::ClassicSyslog, ctx), MalformedError);
    CHECK_THROWS_AS(parse_line("Jan  5 10:31:02 host", InputFormat::ClassicSyslog, ctx), MalformedError);
    CHECK_THROWS_AS(parse_line("   ", InputFormat::ClassicSyslog, ctx), MalformedError);
    CHECK_THROWS_AS(parse_line("{\"ts\":\"bad\",\"host\":\"h\",\"msg\":\"m\"}", InputFormat::StructuredLines, ctx),
                    MalformedError);
    CHECK_THROWS_AS(parse_line("{\"ts\":\"2021-01-05T10:31:02Z\",\"msg\":\"m\"}", InputFormat::StructuredLines, ctx),
                    MalformedError);
    CHECK_THROWS_AS(parse_line("{\"ts\":\"2021-01-05T10:31:02Z\",\"host\":\"\",\"msg\":\"m\"}",
                               InputFormat::StructuredLines, ctx),
                    MalformedError);
    CHECK_THROWS_AS(parse_line("{not json", InputFormat::StructuredLines, ctx), MalformedError);
  }

  TEST_CASE("late record relative to the watermark") {
    std::istringstream in(structured(at(100), "a", "m") + "\n" + structured(at(10), "a", "m") + "\n");
    SourceConfig cfg;
    cfg.emit_late = true;
    auto s = stream_over(in, cfg);
    auto first = s.next();
    REQUIRE(first);
    CHECK_FALSE(first->late);
    CHECK(first->watermark == from_epoch_ms(40000));
    auto second = s.next();
    REQUIRE(second);
    CHECK(second->late);
    CHECK_FALSE(s.next());
    CHECK(s.counters().late == 1);
  }

  TEST_CASE("late records are dropped by default and counted") {
    std::istringstream in(structured(at(100), "a", "m") + "\n" + structured(at(10), "a", "m") + "\n" +
                          structured(at(101), "a", "m") + "\n");
    auto s = stream_over(in);
    int n = 0;
    while (s.next()) ++n;
    CHECK(n == 2);
    CHECK(s.counters() == StreamCounters{3, 2, 0, 1});
  }

  TEST_CASE("single record watermark") {
    std::istringstream in(structured(at(500), "a", "m") + "\n");
    auto s = stream_over(in);
    auto item = s.next();
    REQUIRE(item);
    CHECK(item->watermark == from_epoch_ms(440000));
    CHECK(s.watermark() == from_epoch_ms(440000));
  }

  TEST_CASE("empty file gives an empty stream and zero counters") {
    auto p = temp_file("empty.log", "");
    SourceConfig cfg;
    cfg.path = p.string();
    RecordStream s(open_source(cfg), cfg, 2021);
    CHECK_FALSE(s.next());
    CHECK(s.counters() == StreamCounters{});
    CHECK_FALSE(s.watermark());
  }

  TEST_CASE("property: watermark never decreases and counters are conserved") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
      std::string text;
      std::uniform_int_distribution<int> jitter(-120, 60), kind(0, 9);
      int base = 1000;
      int lines = 0;
      for (int i = 0; i < 300; ++i) {
        base += 5;
        int k = kind(rng);
        if (k == 0) text += "garbage line\n";
        else if (k == 1) text += "\n";
        else text += structured(at(base + jitter(rng)), "h" + std::to_string(k), "msg") + "\n";
        ++lines;
      }
      std::istringstream in(text);
      SourceConfig cfg;
      cfg.allowed_lateness = seconds(trial * 7);
      auto s = stream_over(in, cfg);
      std::optional<Timestamp> last;
      while (auto item = s.next()) {
        if (last) CHECK(item->watermark >= *last);
        CHECK(item->record.event_time >= item->watermark);
        last = item->watermark;
      }
      const auto& c = s.counters();
      CHECK(c.total_lines == static_cast<std::uint64_t>(lines));
      CHECK(c.parsed + c.malformed + c.late == c.total_lines);
    }
  }

  TEST_CASE("replay determinism") {
    std::string text;
    for (int i = 0; i < 50; ++i) text += structured(at(1000 + i * 3 - (i % 7) * 20), "h", "m " + std::to_string(i)) + "\n";
    auto p = temp_file("replay.log", text);
    SourceConfig cfg;
    cfg.path = p.string();
    auto drain = [&] {
      std::vector<StreamItem> out;
      RecordStream s(open_source(cfg), cfg, 2021);
      while (auto item = s.next()) out.push_back(*item);
      return out;
    };
    auto a = drain(), b = drain();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].record == b[i].record);
      CHECK(a[i].watermark == b[i].watermark);
    }
  }

  TEST_CASE("checkpoint after record 5 resumes at record 6") {
    std::string text;
    for (int i = 1; i <= 10; ++i) text += structured(at(1000 + i), "h", "m" + std::to_string(i)) + "\n";
    auto p = temp_file("ckpt.log", text);
    auto cp_path = fs::temp_directory_path() / "loghier_test_ckpt.json";
    SourceConfig cfg;
    cfg.path = p.string();
    {
      RecordStream s(open_source(cfg), cfg, 2021);
      for (int i = 0; i < 5; ++i) REQUIRE(s.next());
      save_checkpoint(s.checkpoint(), cp_path);
    }
    auto cp = load_checkpoint(cp_path);
    CHECK(cp.counters.parsed == 5);
    RecordStream s(open_source(cfg), cfg, 2021);
    s.resume_from(cp);
    auto item = s.next();
    REQUIRE(item);
    CHECK(item->record.message == "m6");
    CHECK(item->watermark >= *cp.watermark);
    int rest = 1;
    while (s.next()) ++rest;
    CHECK(rest == 5);
    CHECK(s.counters().parsed == 10);
  }

  TEST_CASE("fresh checkpoint resumes from the start") {
    std::istringstream in(structured(at(1), "h", "first") + "\n");
    auto s = stream_over(in);
    s.resume_from(Checkpoint{});
    auto item = s.next();
    REQUIRE(item);
    CHECK(item->record.message == "first");
  }

  TEST_CASE("corrupt checkpoints are refused") {
    auto cp_path = fs::temp_directory_path() / "loghier_test_ckpt_bad.json";
    save_checkpoint(Checkpoint{123, from_epoch_ms(5000), StreamCounters{4, 3, 1, 0}}, cp_path);
    std::string full;
    {
      std::ifstream in(cp_path);
      full.assign(std::istreambuf_iterator<char>(in), {});
    }
    CHECK(load_checkpoint(cp_path) == Checkpoint{123, from_epoch_ms(5000), StreamCounters{4, 3, 1, 0}});
    auto truncated = temp_file("ckpt_trunc.json", full.substr(0, full.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(truncated), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(temp_file("ckpt_keys.json", "{\"position\":1}")), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(temp_file("ckpt_sum.json",
                                              "{\"position\":1,\"watermark\":null,\"counters\":{\"total_lines\":5,"
                                              "\"parsed\":1,\"malformed\":1,\"late\":1}}")),
                    CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "loghier_no_such_checkpoint.json"), CheckpointError);
  }

  TEST_CASE("line socket source") {
    SocketLineSource src("127.0.0.1:0");
    int port = src.bound_port();
    REQUIRE(port > 0);
    std::thread client([port] {
      int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_port = htons(static_cast<uint16_t>(port));
      ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
        std::string payload = "Jan  5 10:31:02 sw1 hello\npartial";
        ::send(fd, payload.data(), payload.size(), 0);
        std::this_thread::sleep_for(milliseconds(20));
        std::string tail = " line\r\n";
        ::send(fd, tail.data(), tail.size(), 0);
      }
      ::close(fd);
    });
    std::string line;
    REQUIRE(src.next(line));
    CHECK(line == "Jan  5 10:31:02 sw1 hello");
    REQUIRE(src.next(line));
    CHECK(line == "partial line");
    CHECK_FALSE(src.next(line));
    CHECK(src.position() == 2);
    client.join();
  }

  TEST_CASE("source config validation") {
    SourceConfig cfg;
    CHECK_THROWS(cfg.validate());
    cfg.path = "x";
    CHECK_NOTHROW(cfg.validate());
    cfg.allowed_lateness = seconds(-1);
    CHECK_THROWS(cfg.validate());
    CHECK(input_format_from_string("classic-syslog") == InputFormat::ClassicSyslog);
    CHECK(to_string(SourceKind::LineSocket) == "line-socket");
    CHECK_THROWS(replay_speed_from_string("warp"));
  }
}
