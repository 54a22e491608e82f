#include "loghier/ingest.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <thread>

#include <nlohmann/json.hpp>

namespace loghier {
namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

LogRecord parse_classic(std::string_view line, const ParseContext& ctx) {
  std::string_view rest = line;
  if (!rest.empty() && rest.front() == '<') {
    auto close = rest.find('>');
    if (close == std::string_view::npos || close > 4) throw MalformedError("bad PRI prefix");
    for (std::size_t i = 1; i < close; ++i)
      if (rest[i] < '0' || rest[i] > '9') throw MalformedError("bad PRI prefix");
    rest.remove_prefix(close + 1);
  }
  if (rest.size() < 15) throw MalformedError("missing timestamp");
  auto ts = parse_syslog_time(rest.substr(0, 15), ctx.year);
  if (!ts) throw MalformedError("unparseable timestamp");
  rest.remove_prefix(15);
  if (rest.empty() || rest.front() != ' ') throw MalformedError("missing hostname");
  rest.remove_prefix(1);
  auto sp = rest.find(' ');
  std::string_view host = rest.substr(0, sp);
  if (host.empty()) throw MalformedError("missing hostname");
  std::string_view msg = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
  msg = trim(msg);
  if (msg.empty()) throw MalformedError("empty message");
  return LogRecord{*ts, std::string(host), std::string(msg), ctx.datacenter};
}

LogRecord parse_structured(std::string_view line, const ParseContext& ctx) {
  json doc = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (!doc.is_object()) throw MalformedError("not a structured object");
  auto ts_it = doc.find("ts");
  auto host_it = doc.find("host");
  auto msg_it = doc.find("msg");
  if (ts_it == doc.end() || !ts_it->is_string()) throw MalformedError("missing ts");
  auto ts = parse_iso8601(ts_it->get_ref<const std::string&>());
  if (!ts) throw MalformedError("unparseable timestamp");
  if (host_it == doc.end() || !host_it->is_string() || host_it->get_ref<const std::string&>().empty())
    throw MalformedError("missing host");
  if (msg_it == doc.end() || !msg_it->is_string()) throw MalformedError("missing msg");
  const auto& msg = msg_it->get_ref<const std::string&>();
  if (trim(msg).empty()) throw MalformedError("empty message");
  return LogRecord{*ts, host_it->get<std::string>(), msg, ctx.datacenter};
}

}  // namespace

void SourceConfig::validate() const {
  if (allowed_lateness.count() < 0) throw std::invalid_argument("allowed_lateness must be >= 0");
  if (path.empty()) throw std::invalid_argument("source.path must be set");
  if (datacenter.empty()) throw std::invalid_argument("source.datacenter must be non-empty");
}

LogRecord parse_line(std::string_view line, InputFormat format, const ParseContext& ctx) {
  line = trim(line);
  if (line.empty()) throw MalformedError("empty line");
  return format == InputFormat::ClassicSyslog ? parse_classic(line, ctx) : parse_structured(line, ctx);
}

std::string_view to_string(InputFormat f) {
  return f == InputFormat::ClassicSyslog ? "classic-syslog" : "structured-lines";
}
InputFormat input_format_from_string(std::string_view s) {
  if (s == "classic-syslog") return InputFormat::ClassicSyslog;
  if (s == "structured-lines") return InputFormat::StructuredLines;
  throw std::invalid_argument("unknown input_format: " + std::string(s));
}
std::string_view to_string(SourceKind k) {
  return k == SourceKind::FileReplay ? "file-replay" : "line-socket";
}
SourceKind source_kind_from_string(std::string_view s) {
  if (s == "file-replay") return SourceKind::FileReplay;
  if (s == "line-socket") return SourceKind::LineSocket;
  throw std::invalid_argument("unknown source kind: " + std::string(s));
}
std::string_view to_string(ReplaySpeed r) {
  return r == ReplaySpeed::AsFastAsPossible ? "as-fast-as-possible" : "real-time";
}
ReplaySpeed replay_speed_from_string(std::string_view s) {
  if (s == "as-fast-as-possible") return ReplaySpeed::AsFastAsPossible;
  if (s == "real-time") return ReplaySpeed::RealTime;
  throw std::invalid_argument("unknown replay_speed: " + std::string(s));
}

// ---------------------------------------------------------------------------

FileLineSource::FileLineSource(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw SourceError("cannot open input file: " + path.string());
}

bool FileLineSource::next(std::string& line) {
  if (!std::getline(in_, line)) {
    if (in_.bad()) throw SourceError("read error on " + path_.string());
    return false;
  }
  offset_ += line.size() + (in_.eof() ? 0 : 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void FileLineSource::seek(std::uint64_t pos) {
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(pos));
  if (!in_) throw SourceError("cannot seek " + path_.string() + " to " + std::to_string(pos));
  offset_ = pos;
}

bool StreamLineSource::next(std::string& line) {
  if (!std::getline(in_, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++seq_;
  return true;
}

void StreamLineSource::seek(std::uint64_t pos) {
  std::string skip;
  while (seq_ < pos && next(skip)) {
  }
  if (seq_ < pos) throw SourceError("stream ended before checkpoint position");
}

SocketLineSource::SocketLineSource(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos) throw SourceError("line-socket address must be host:port: " + address);
  std::string host = address.substr(0, colon);
  int port = std::stoi(address.substr(colon + 1));
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw SourceError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (host.empty() || host == "*" || host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
  } else if (host == "localhost") {
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw SourceError("bad listen address: " + address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 1) < 0) {
    std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw SourceError("cannot listen on " + address + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

SocketLineSource::~SocketLineSource() {
  if (conn_fd_ >= 0) ::close(conn_fd_);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

bool SocketLineSource::fill() {
  if (eof_) return false;
  if (conn_fd_ < 0) {
    conn_fd_ = ::accept(listen_fd_, nullptr, nullptr);
    if (conn_fd_ < 0) throw SourceError(std::string("accept: ") + std::strerror(errno));
  }
  char buf[65536];
  ssize_t n;
  do {
    n = ::recv(conn_fd_, buf, sizeof buf, 0);
  } while (n < 0 && errno == EINTR);
  if (n < 0) throw SourceError(std::string("recv: ") + std::strerror(errno));
  if (n == 0) {
    eof_ = true;
    return false;
  }
  buffer_.erase(0, buffer_pos_);
  buffer_pos_ = 0;
  buffer_.append(buf, static_cast<std::size_t>(n));
  return true;
}

bool SocketLineSource::next(std::string& line) {
  for (;;) {
    auto nl = buffer_.find('\n', buffer_pos_);
    if (nl != std::string::npos) {
      line.assign(buffer_, buffer_pos_, nl - buffer_pos_);
      buffer_pos_ = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      ++seq_;
      return true;
    }
    if (!fill()) {
      if (buffer_pos_ < buffer_.size()) {
        line.assign(buffer_, buffer_pos_, std::string::npos);
        buffer_pos_ = buffer_.size();
        ++seq_;
        return true;
      }
      return false;
    }
  }
}

void SocketLineSource::seek(std::uint64_t pos) {
  std::string skip;
  while (seq_ < pos && next(skip)) {
  }
}

std::unique_ptr<LineSource> open_source(const SourceConfig& cfg) {
  if (cfg.kind == SourceKind::FileReplay) return std::make_unique<FileLineSource>(cfg.path);
  return std::make_unique<SocketLineSource>(cfg.path);
}

// ---------------------------------------------------------------------------

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  json doc;
  doc["position"] = cp.position;
  doc["watermark"] = cp.watermark ? json(format_iso8601(*cp.watermark)) : json(nullptr);
  doc["counters"] = {{"total_lines", cp.counters.total_lines},
                     {"parsed", cp.counters.parsed},
                     {"malformed", cp.counters.malformed},
                     {"late", cp.counters.late}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint: " + tmp.string());
    out << doc.dump(2) << '\n';
    if (!out) throw CheckpointError("cannot write checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read checkpoint: " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw CheckpointError("corrupt checkpoint: " + path.string());
  try {
    Checkpoint cp;
    cp.position = doc.at("position").get<std::uint64_t>();
    const auto& wm = doc.at("watermark");
    if (!wm.is_null()) {
      auto ts = parse_iso8601(wm.get<std::string>());
      if (!ts) throw CheckpointError("corrupt checkpoint watermark");
      cp.watermark = *ts;
    }
    const auto& c = doc.at("counters");
    cp.counters.total_lines = c.at("total_lines").get<std::uint64_t>();
    cp.counters.parsed = c.at("parsed").get<std::uint64_t>();
    cp.counters.malformed = c.at("malformed").get<std::uint64_t>();
    cp.counters.late = c.at("late").get<std::uint64_t>();
    if (cp.counters.parsed + cp.counters.malformed + cp.counters.late != cp.counters.total_lines)
      throw CheckpointError("checkpoint counters do not add up");
    return cp;
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

int resolve_year(const SourceConfig& cfg) {
  using namespace std::chrono;
  if (cfg.year != 0) return cfg.year;
  sys_seconds when = floor<std::chrono::seconds>(system_clock::now());
  if (cfg.kind == SourceKind::FileReplay) {
    std::error_code ec;
    auto ft = std::filesystem::last_write_time(cfg.path, ec);
    if (!ec)
      when = floor<std::chrono::seconds>(system_clock::now() +
                                         duration_cast<system_clock::duration>(ft - file_clock::now()));
  }
  return static_cast<int>(year_month_day{floor<days>(when)}.year());
}

RecordStream::RecordStream(std::unique_ptr<LineSource> source, SourceConfig cfg, int year)
    : source_(std::move(source)), cfg_(std::move(cfg)), ctx_{year, cfg_.datacenter} {}

std::optional<Timestamp> RecordStream::watermark() const {
  if (!max_event_) return std::nullopt;
  return *max_event_ - cfg_.allowed_lateness;
}

std::optional<StreamItem> RecordStream::next() {
  while (source_->next(line_)) {
    ++counters_.total_lines;
    LogRecord rec;
    try {
      rec = parse_line(line_, cfg_.format, ctx_);
    } catch (const MalformedError&) {
      ++counters_.malformed;
      continue;
    }
    auto wm = watermark();
    bool late = wm && rec.event_time < *wm;
    if (late) {
      ++counters_.late;
      if (!cfg_.emit_late) continue;
      return StreamItem{std::move(rec), true, *wm};
    }
    ++counters_.parsed;
    if (!max_event_ || rec.event_time > *max_event_) max_event_ = rec.event_time;
    if (cfg_.replay_speed == ReplaySpeed::RealTime) {
      auto now = std::chrono::steady_clock::now();
      if (!replay_origin_wall_) {
        replay_origin_wall_ = now;
        replay_origin_event_ = rec.event_time;
      } else {
        auto due = *replay_origin_wall_ + (rec.event_time - replay_origin_event_);
        if (due > now) std::this_thread::sleep_until(due);
      }
    }
    return StreamItem{std::move(rec), false, *watermark()};
  }
  return std::nullopt;
}

Checkpoint RecordStream::checkpoint() const {
  return Checkpoint{source_->position(), watermark(), counters_};
}

void RecordStream::resume_from(const Checkpoint& cp) {
  source_->seek(cp.position);
  counters_ = cp.counters;
  if (cp.watermark)
    max_event_ = *cp.watermark + cfg_.allowed_lateness;
  else
    max_event_.reset();
}

}  // namespace loghier
