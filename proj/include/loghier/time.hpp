#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace loghier {

using Duration = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Duration>;

inline constexpr Timestamp kMinTimestamp = Timestamp{Duration{INT64_MIN / 2}};

inline Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{Duration{ms}}; }
inline std::int64_t to_epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }

inline Duration from_seconds(double s) {
  return Duration{static_cast<std::int64_t>(s * 1000.0)};
}

/// Floor `t` onto a grid of spacing `width` anchored at the epoch.
inline Timestamp align_down(Timestamp t, Duration width) {
  auto ms = to_epoch_ms(t);
  auto w = width.count();
  auto q = ms / w;
  if (ms % w != 0 && ms < 0) --q;
  return from_epoch_ms(q * w);
}

/// Parses ISO-8601 UTC timestamps: `YYYY-MM-DDTHH:MM:SS[.fff][Z|+00:00]`.
/// A space is accepted in place of `T`.
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
std::string format_iso8601(Timestamp t);

/// Durations as `250ms`, `60s`, `15min`, `24h`, or a bare number of seconds.
std::optional<Duration> parse_duration(std::string_view text);
/// Shortest exact unit among h, min, s, ms.
std::string format_duration(Duration d);

/// Parses the RFC 3164 `MMM dd HH:mm:ss` form against an explicit year.
std::optional<Timestamp> parse_syslog_time(std::string_view text, int year);

}  // namespace loghier
