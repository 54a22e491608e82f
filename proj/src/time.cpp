#include "loghier/time.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace loghier {
namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

std::optional<Timestamp> compose(int y, int mo, int d, int h, int mi, int s, int ms) {
  using namespace std::chrono;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  auto days = sys_days{ymd};
  return Timestamp{duration_cast<Duration>(days.time_since_epoch()) + hours{h} + minutes{mi} +
                   std::chrono::seconds{s} + Duration{ms}};
}

constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view t) {
  int y, mo, d, h, mi, s;
  if (t.size() < 19) return std::nullopt;
  if (!read_int(t, 0, 4, y) || t[4] != '-' || !read_int(t, 5, 2, mo) || t[7] != '-' ||
      !read_int(t, 8, 2, d) || (t[10] != 'T' && t[10] != 't' && t[10] != ' ') ||
      !read_int(t, 11, 2, h) || t[13] != ':' || !read_int(t, 14, 2, mi) || t[16] != ':' ||
      !read_int(t, 17, 2, s))
    return std::nullopt;
  std::size_t pos = 19;
  int ms = 0;
  if (pos < t.size() && t[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < t.size() && t[pos] >= '0' && t[pos] <= '9') {
      if (digits < 3) ms = ms * 10 + (t[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int i = digits; i < 3; ++i) ms *= 10;
  }
  std::string_view zone = t.substr(pos);
  if (!(zone.empty() || zone == "Z" || zone == "z" || zone == "+00:00" || zone == "-00:00" ||
        zone == "+0000"))
    return std::nullopt;
  return compose(y, mo, d, h, mi, s, ms);
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  auto day_point = floor<days>(t);
  year_month_day ymd{day_point};
  auto rem = t - day_point;
  auto ms = rem.count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long long>(ms / 3600000),
                static_cast<long long>(ms / 60000 % 60), static_cast<long long>(ms / 1000 % 60),
                static_cast<long long>(ms % 1000));
  return buf;
}

std::optional<Timestamp> parse_syslog_time(std::string_view t, int year) {
  // "Jan  5 10:31:02" or "Jan 05 10:31:02"
  if (t.size() < 15 || t[3] != ' ' || t[6] != ' ') return std::nullopt;
  int mo = 0;
  for (std::size_t i = 0; i < kMonths.size(); ++i)
    if (t.substr(0, 3) == kMonths[i]) mo = static_cast<int>(i) + 1;
  if (mo == 0) return std::nullopt;
  int d;
  if (t[4] == ' ') {
    if (!read_int(t, 5, 1, d)) return std::nullopt;
  } else if (!read_int(t, 4, 2, d)) {
    return std::nullopt;
  }
  int h, mi, s;
  if (!read_int(t, 7, 2, h) || t[9] != ':' || !read_int(t, 10, 2, mi) || t[12] != ':' ||
      !read_int(t, 13, 2, s))
    return std::nullopt;
  return compose(year, mo, d, h, mi, s, 0);
}

std::optional<Duration> parse_duration(std::string_view text) {
  std::size_t n = 0;
  while (n < text.size() && (std::isdigit(static_cast<unsigned char>(text[n])) || text[n] == '.')) ++n;
  if (n == 0) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + n, v);
  if (ec != std::errc{} || ptr != text.data() + n || !std::isfinite(v)) return std::nullopt;
  std::string_view unit = text.substr(n);
  double ms = 0.0;
  if (unit == "ms") ms = v;
  else if (unit.empty() || unit == "s") ms = v * 1e3;
  else if (unit == "min" || unit == "m") ms = v * 6e4;
  else if (unit == "h") ms = v * 3.6e6;
  else return std::nullopt;
  return Duration{static_cast<std::int64_t>(std::llround(ms))};
}

std::string format_duration(Duration d) {
  auto ms = d.count();
  if (ms != 0 && ms % 3600000 == 0) return std::to_string(ms / 3600000) + "h";
  if (ms != 0 && ms % 60000 == 0) return std::to_string(ms / 60000) + "min";
  if (ms % 1000 == 0) return std::to_string(ms / 1000) + "s";
  return std::to_string(ms) + "ms";
}

}  // namespace loghier
