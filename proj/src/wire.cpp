#include "corrsounder/wire.hpp"

#include "corrsounder/framestore.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>

namespace corrsounder::wire {

std::string to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::oversized: return "oversized";
    case ErrorCode::unknown_type: return "unknown_type";
    case ErrorCode::bad_length: return "bad_length";
    case ErrorCode::bad_field: return "bad_field";
    case ErrorCode::out_of_order: return "out_of_order";
    case ErrorCode::hello_mismatch: return "hello_mismatch";
    case ErrorCode::disconnected: return "disconnected";
  }
  return "unknown";
}

// ---- codec -------------------------------------------------------------

namespace {

constexpr std::size_t kHelloFixed = 4 + 8 + 8 + 2;
constexpr std::size_t kChunkFixed = 8 + 4;
constexpr std::size_t kTriggerFixed = 8 + 1 + 2;
constexpr std::size_t kEndFixed = 8;

struct Encoder {
  std::string body;

  void operator()(const Hello& m) {
    if (m.sequence.size() > 0xffff) throw InvalidArgument("sequence descriptor too long for HELLO");
    le::put_u8(body, static_cast<std::uint8_t>(MessageType::hello));
    le::put_u32(body, m.version);
    le::put_f64(body, m.sample_rate);
    le::put_f64(body, m.center_frequency);
    le::put_u16(body, static_cast<std::uint16_t>(m.sequence.size()));
    body += m.sequence;
  }
  void operator()(const IqChunk& m) {
    if (m.start_index < 0) throw InvalidArgument("IQ_CHUNK start index must be >= 0");
    if (1 + kChunkFixed + 8 * static_cast<std::size_t>(m.samples.size()) > kMaxMessageBytes) {
      throw InvalidArgument("IQ_CHUNK exceeds the message size limit");
    }
    le::put_u8(body, static_cast<std::uint8_t>(MessageType::iq_chunk));
    le::put_u64(body, static_cast<std::uint64_t>(m.start_index));
    le::put_u32(body, static_cast<std::uint32_t>(m.samples.size()));
    body.reserve(body.size() + 8 * static_cast<std::size_t>(m.samples.size()));
    for (Eigen::Index i = 0; i < m.samples.size(); ++i) {
      le::put_f32(body, m.samples(i).real());
      le::put_f32(body, m.samples(i).imag());
    }
  }
  void operator()(const Trigger& m) {
    if (m.event.note.size() > 0xffff) throw InvalidArgument("trigger note too long");
    if (m.event.sample_index < 0) throw InvalidArgument("trigger sample index must be >= 0");
    le::put_u8(body, static_cast<std::uint8_t>(MessageType::trigger));
    le::put_u64(body, static_cast<std::uint64_t>(m.event.sample_index));
    le::put_u8(body, static_cast<std::uint8_t>(m.event.kind));
    le::put_u16(body, static_cast<std::uint16_t>(m.event.note.size()));
    body += m.event.note;
  }
  void operator()(const End& m) {
    le::put_u8(body, static_cast<std::uint8_t>(MessageType::end));
    le::put_u64(body, m.total_samples);
  }
};

void expect_length(std::size_t have, std::size_t want, const char* what) {
  if (have != want) {
    throw ProtocolError(ErrorCode::bad_length, std::string(what) + " body is " + std::to_string(have) +
                                                   " bytes, expected " + std::to_string(want),
                        4);
  }
}

void expect_at_least(std::size_t have, std::size_t want, const char* what) {
  if (have < want) throw ProtocolError(ErrorCode::bad_length, std::string(what) + " body too short", 4);
}

}  // namespace

std::string encode(const Message& message) {
  Encoder enc;
  std::visit(enc, message);
  std::string out;
  out.reserve(enc.body.size() + 4);
  le::put_u32(out, static_cast<std::uint32_t>(enc.body.size()));
  out += enc.body;
  return out;
}

Message decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ProtocolError(ErrorCode::truncated, "missing length prefix");
  const std::uint32_t len = le::get_u32(bytes.data());
  if (len > kMaxMessageBytes) throw ProtocolError(ErrorCode::oversized, "message length " + std::to_string(len));
  if (len == 0) throw ProtocolError(ErrorCode::bad_length, "empty message", 0);
  if (bytes.size() < 4 + static_cast<std::size_t>(len)) {
    throw ProtocolError(ErrorCode::truncated, "message needs " + std::to_string(len) + " bytes, have " +
                                                  std::to_string(bytes.size() - 4));
  }
  if (bytes.size() > 4 + static_cast<std::size_t>(len)) {
    throw ProtocolError(ErrorCode::bad_length, "trailing bytes after message", 4 + len);
  }
  const std::uint8_t* p = bytes.data() + 5;
  const std::size_t body = len - 1;

  switch (bytes[4]) {
    case static_cast<std::uint8_t>(MessageType::hello): {
      expect_at_least(body, kHelloFixed, "HELLO");
      Hello m;
      m.version = le::get_u32(p);
      m.sample_rate = le::get_f64(p + 4);
      m.center_frequency = le::get_f64(p + 12);
      const std::uint16_t n = le::get_u16(p + 20);
      expect_length(body, kHelloFixed + n, "HELLO");
      m.sequence.assign(reinterpret_cast<const char*>(p + kHelloFixed), n);
      if (m.version != kProtocolVersion) {
        throw ProtocolError(ErrorCode::bad_field, "unsupported protocol version " + std::to_string(m.version), 5);
      }
      if (!(m.sample_rate > 0.0) || !std::isfinite(m.sample_rate) || !std::isfinite(m.center_frequency)) {
        throw ProtocolError(ErrorCode::bad_field, "HELLO rates must be finite and fs positive", 9);
      }
      return m;
    }
    case static_cast<std::uint8_t>(MessageType::iq_chunk): {
      expect_at_least(body, kChunkFixed, "IQ_CHUNK");
      IqChunk m;
      const std::uint64_t start = le::get_u64(p);
      const std::uint32_t count = le::get_u32(p + 8);
      expect_length(body, kChunkFixed + 8 * static_cast<std::size_t>(count), "IQ_CHUNK");
      if (start > static_cast<std::uint64_t>(INT64_MAX) - count) {
        throw ProtocolError(ErrorCode::bad_field, "IQ_CHUNK start index out of range", 5);
      }
      m.start_index = static_cast<std::int64_t>(start);
      m.samples.resize(count);
      const std::uint8_t* q = p + kChunkFixed;
      for (std::uint32_t i = 0; i < count; ++i) m.samples(i) = {le::get_f32(q + 8 * i), le::get_f32(q + 8 * i + 4)};
      return m;
    }
    case static_cast<std::uint8_t>(MessageType::trigger): {
      expect_at_least(body, kTriggerFixed, "TRIGGER");
      Trigger m;
      const std::uint64_t idx = le::get_u64(p);
      const std::uint8_t kind = p[8];
      const std::uint16_t n = le::get_u16(p + 9);
      expect_length(body, kTriggerFixed + n, "TRIGGER");
      if (idx > static_cast<std::uint64_t>(INT64_MAX)) {
        throw ProtocolError(ErrorCode::bad_field, "TRIGGER sample index out of range", 5);
      }
      if (kind > 1) throw ProtocolError(ErrorCode::bad_field, "unknown trigger kind " + std::to_string(kind), 13);
      m.event.sample_index = static_cast<std::int64_t>(idx);
      m.event.kind = static_cast<TriggerKind>(kind);
      m.event.note.assign(reinterpret_cast<const char*>(p + kTriggerFixed), n);
      return m;
    }
    case static_cast<std::uint8_t>(MessageType::end): {
      expect_length(body, kEndFixed, "END");
      return End{le::get_u64(p)};
    }
    default:
      throw ProtocolError(ErrorCode::unknown_type, "message type " + std::to_string(bytes[4]), 4);
  }
}

void MessageParser::feed(std::span<const std::uint8_t> bytes) {
  if (head_ > 0 && head_ == buffer_.size()) {
    buffer_.clear();
    head_ = 0;
  } else if (head_ > (1u << 20)) {
    buffer_.erase(0, head_);
    head_ = 0;
  }
  buffer_.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::optional<Message> MessageParser::next() {
  const std::size_t avail = buffer_.size() - head_;
  if (avail < 4) return std::nullopt;
  const auto* p = reinterpret_cast<const std::uint8_t*>(buffer_.data() + head_);
  const std::uint32_t len = le::get_u32(p);
  if (len > kMaxMessageBytes) {
    throw ProtocolError(ErrorCode::oversized, "message length " + std::to_string(len), consumed_);
  }
  if (avail < 4 + static_cast<std::size_t>(len)) return std::nullopt;
  Message m = decode(std::span<const std::uint8_t>(p, 4 + static_cast<std::size_t>(len)));
  head_ += 4 + len;
  consumed_ += 4 + len;
  return m;
}

void SessionValidator::accept(const Message& message) {
  if (ended_) throw ProtocolError(ErrorCode::out_of_order, "message after END");
  if (std::holds_alternative<Hello>(message)) {
    if (hello_) throw ProtocolError(ErrorCode::out_of_order, "duplicate HELLO");
    hello_ = true;
    return;
  }
  if (!hello_) throw ProtocolError(ErrorCode::out_of_order, "first message must be HELLO");
  if (const auto* chunk = std::get_if<IqChunk>(&message)) {
    if (next_index_ && chunk->start_index != *next_index_) {
      throw ProtocolError(ErrorCode::out_of_order, "IQ_CHUNK at " + std::to_string(chunk->start_index) +
                                                       ", expected " + std::to_string(*next_index_));
    }
    next_index_ = chunk->start_index + chunk->samples.size();
    delivered_ += static_cast<std::uint64_t>(chunk->samples.size());
  } else if (const auto* end = std::get_if<End>(&message)) {
    if (end->total_samples != delivered_) {
      throw ProtocolError(ErrorCode::bad_field, "END declares " + std::to_string(end->total_samples) +
                                                    " samples, received " + std::to_string(delivered_));
    }
    ended_ = true;
  }
}

// ---- transport ---------------------------------------------------------

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw InvalidArgument("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint e;
  e.host = colon == 0 ? "127.0.0.1" : text.substr(0, colon);
  try {
    std::size_t pos = 0;
    const int port = std::stoi(text.substr(colon + 1), &pos);
    if (pos != text.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad port in endpoint '" + text + "'");
  }
  return e;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

namespace {

sockaddr_in resolve(const Endpoint& e) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(e.port);
  if (inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw IoError("cannot resolve host '" + e.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

bool Socket::send_all(std::string_view bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

std::size_t Socket::receive(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  for (;;) {
    const int r = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw IoError("poll failed: " + errno_text());
    if (r == 0) throw TimeoutError("receive timed out");
    break;
  }
  for (;;) {
    const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      if (errno == ECONNRESET) return 0;
      throw IoError("recv failed: " + errno_text());
    }
    return static_cast<std::size_t>(n);
  }
}

TcpListener TcpListener::bind(const Endpoint& endpoint) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError("socket failed: " + errno_text());
  TcpListener l;
  l.socket_ = Socket(fd);
  const int yes = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr = resolve(endpoint);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw IoError("bind " + endpoint.str() + " failed: " + errno_text());
  }
  if (::listen(fd, 4) != 0) throw IoError("listen failed: " + errno_text());
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  l.port_ = ntohs(addr.sin_port);
  return l;
}

Socket TcpListener::accept(std::chrono::milliseconds timeout) {
  const int fd = socket_.fd();
  pollfd pfd{fd, POLLIN, 0};
  for (;;) {
    const int r = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw IoError("poll failed: " + errno_text());
    if (r == 0) throw TimeoutError("no receiver connected within " + std::to_string(timeout.count()) + " ms");
    break;
  }
  const int client = ::accept(fd, nullptr, nullptr);
  if (client < 0) throw IoError("accept failed: " + errno_text());
  const int yes = 1;
  ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
  return Socket(client);
}

Socket connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(endpoint);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw IoError("socket failed: " + errno_text());
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) return Socket(fd);
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      throw TimeoutError("could not connect to " + endpoint.str());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

// ---- sessions ----------------------------------------------------------

SessionSummary serve_stimulation(StimulationSource& source, const Hello& hello, TcpListener& listener,
                                 const ServeOptions& options) {
  SessionSummary summary;
  summary.total_samples = static_cast<std::uint64_t>(source.total_samples());
  Socket peer = listener.accept(options.accept_timeout);
  summary.connected = true;

  auto send = [&](const Message& m) {
    if (!peer.send_all(encode(m))) {
      summary.error = "peer disconnected after " + std::to_string(summary.samples_sent) + " samples";
      return false;
    }
    return true;
  };

  if (!send(hello)) return summary;
  const auto& events = source.events();
  std::size_t next_event = 0;
  while (auto chunk = source.next()) {
    while (next_event < events.size() && events[next_event].sample_index < chunk->end_index()) {
      if (!send(Trigger{events[next_event]})) return summary;
      ++summary.triggers_sent;
      ++next_event;
    }
    IqChunk msg{chunk->start_index, std::move(chunk->samples)};
    const auto count = static_cast<std::uint64_t>(msg.samples.size());
    if (!send(msg)) return summary;
    summary.samples_sent += count;
    ++summary.chunks_sent;
  }
  if (!send(End{summary.samples_sent})) return summary;
  summary.completed = true;
  return summary;
}

ConsumeResult consume_correlation(const Endpoint& endpoint, const CorrelatorConfig& config,
                                  const ConsumeOptions& options) {
  Socket sock = connect(endpoint, options.connect_timeout);
  MessageParser parser;
  SessionValidator session;
  std::optional<Correlator> correlator;
  ConsumeResult result;
  std::vector<std::uint8_t> buf(1 << 16);

  while (!session.finished()) {
    const std::size_t n = sock.receive(buf, options.io_timeout);
    if (n == 0) {
      throw ProtocolError(ErrorCode::disconnected,
                          "stream closed before END after " + std::to_string(session.delivered()) + " samples");
    }
    parser.feed(std::span<const std::uint8_t>(buf.data(), n));
    while (auto msg = parser.next()) {
      session.accept(*msg);
      if (const auto* hello = std::get_if<Hello>(&*msg)) {
        const Sequence& seq = config.sequence;
        if (hello->sample_rate != *seq.sample_rate) {
          throw ProtocolError(ErrorCode::hello_mismatch, "peer fs " + format_double(hello->sample_rate) +
                                                             " differs from local " + format_double(*seq.sample_rate));
        }
        if (hello->sequence != seq.descriptor()) {
          throw ProtocolError(ErrorCode::hello_mismatch,
                              "peer sequence " + hello->sequence + " differs from local " + seq.descriptor());
        }
        result.hello = *hello;
        correlator.emplace(config);
        result.series = correlator->empty_series(hello->center_frequency);
      } else if (const auto* trig = std::get_if<Trigger>(&*msg)) {
        correlator->add_event(trig->event);
      } else if (auto* chunk = std::get_if<IqChunk>(&*msg)) {
        IqFrame f;
        f.samples = std::move(chunk->samples);
        f.sample_rate = result.hello.sample_rate;
        f.center_frequency = result.hello.center_frequency;
        f.start_index = chunk->start_index;
        auto frames = correlator->push(f);
        std::move(frames.begin(), frames.end(), std::back_inserter(result.series.frames));
        result.samples_received += static_cast<std::uint64_t>(f.size());
      }
    }
  }
  result.series.gate = correlator->gate_record();
  return result;
}

}  // namespace corrsounder::wire
