#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "loghier/time.hpp"

namespace loghier {

enum class InputFormat { ClassicSyslog, StructuredLines };
enum class SourceKind { FileReplay, LineSocket };
enum class ReplaySpeed { AsFastAsPossible, RealTime };

struct LogRecord {
  Timestamp event_time{};
  std::string device;
  std::string message;
  std::string datacenter;

  bool operator==(const LogRecord&) const = default;
};

struct SourceConfig {
  SourceKind kind = SourceKind::FileReplay;
  // File path for replay, `host:port` to listen on for the line socket.
  std::string path;
  InputFormat format = InputFormat::StructuredLines;
  std::string datacenter = "dc";
  Duration allowed_lateness = std::chrono::seconds{60};
  ReplaySpeed replay_speed = ReplaySpeed::AsFastAsPossible;
  // Year applied to classic syslog timestamps; 0 means "year of the file's mtime".
  int year = 0;
  // Late records are dropped unless this is set, in which case they are emitted flagged.
  bool emit_late = false;

  void validate() const;
};

class MalformedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParseContext {
  int year = 1970;
  std::string datacenter;
};

/// Parse one complete input line. Throws MalformedError when the timestamp
/// cannot be read, the device is missing or the message is blank.
LogRecord parse_line(std::string_view line, InputFormat format, const ParseContext& ctx);

std::string_view to_string(InputFormat f);
InputFormat input_format_from_string(std::string_view s);
std::string_view to_string(SourceKind k);
SourceKind source_kind_from_string(std::string_view s);
std::string_view to_string(ReplaySpeed r);
ReplaySpeed replay_speed_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Line sources

class LineSource {
 public:
  virtual ~LineSource() = default;
  /// Reads the next line without its terminator. Returns false at end of input.
  virtual bool next(std::string& line) = 0;
  /// Position just past the last line returned (byte offset or sequence number).
  virtual std::uint64_t position() const = 0;
  /// Reposition so that the next line returned is the one starting at `pos`.
  virtual void seek(std::uint64_t pos) = 0;
};

/// Replays a file; positions are byte offsets.
class FileLineSource final : public LineSource {
 public:
  explicit FileLineSource(const std::filesystem::path& path);
  bool next(std::string& line) override;
  std::uint64_t position() const override { return offset_; }
  void seek(std::uint64_t pos) override;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

/// Reads from a caller-owned stream; positions are line sequence numbers.
class StreamLineSource final : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(in) {}
  bool next(std::string& line) override;
  std::uint64_t position() const override { return seq_; }
  void seek(std::uint64_t pos) override;

 private:
  std::istream& in_;
  std::uint64_t seq_ = 0;
};

/// Listens on `host:port`, accepts one client and reads newline-delimited
/// lines until the peer closes. Positions are line sequence numbers.
class SocketLineSource final : public LineSource {
 public:
  explicit SocketLineSource(const std::string& address);
  ~SocketLineSource() override;
  SocketLineSource(const SocketLineSource&) = delete;
  SocketLineSource& operator=(const SocketLineSource&) = delete;

  /// Port actually bound (useful when `:0` was requested).
  int bound_port() const { return port_; }
  bool next(std::string& line) override;
  std::uint64_t position() const override { return seq_; }
  void seek(std::uint64_t pos) override;

 private:
  bool fill();

  int listen_fd_ = -1;
  int conn_fd_ = -1;
  int port_ = 0;
  std::string buffer_;
  std::size_t buffer_pos_ = 0;
  bool eof_ = false;
  std::uint64_t seq_ = 0;
};

std::unique_ptr<LineSource> open_source(const SourceConfig& cfg);

// ---------------------------------------------------------------------------
// Record stream

struct StreamCounters {
  std::uint64_t total_lines = 0;
  std::uint64_t parsed = 0;
  std::uint64_t malformed = 0;
  std::uint64_t late = 0;

  bool operator==(const StreamCounters&) const = default;
};

struct Checkpoint {
  std::uint64_t position = 0;
  std::optional<Timestamp> watermark;
  StreamCounters counters;

  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
/// Throws CheckpointError on missing keys, bad types or truncated documents.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct StreamItem {
  LogRecord record;
  bool late = false;
  Timestamp watermark{};
};

/// Ordered, watermarked record stream over a line source.
///
/// watermark = max(event_time seen) - allowed_lateness. A record whose event
/// time is below the watermark current at its arrival is late.
class RecordStream {
 public:
  RecordStream(std::unique_ptr<LineSource> source, SourceConfig cfg, int year);

  std::optional<StreamItem> next();

  std::optional<Timestamp> watermark() const;
  std::optional<Timestamp> max_event_time() const { return max_event_; }
  const StreamCounters& counters() const { return counters_; }
  const SourceConfig& config() const { return cfg_; }

  Checkpoint checkpoint() const;
  void resume_from(const Checkpoint& cp);

 private:
  std::unique_ptr<LineSource> source_;
  SourceConfig cfg_;
  ParseContext ctx_;
  std::optional<Timestamp> max_event_;
  StreamCounters counters_;
  std::string line_;
  std::optional<std::chrono::steady_clock::time_point> replay_origin_wall_;
  Timestamp replay_origin_event_{};
};

/// Year used for classic syslog timestamps when the config leaves it at 0.
int resolve_year(const SourceConfig& cfg);

}  // namespace loghier
