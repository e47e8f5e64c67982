#pragma once

#include "corrsounder/error.hpp"
#include "corrsounder/sounder.hpp"
#include "corrsounder/types.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>

namespace corrsounder::wire {

// Every message is
//   u32 length (bytes that follow) | u8 type | body
// with all fields little-endian:
//   HELLO    (1): u32 version | f64 fs | f64 fc | u16 n | n bytes sequence descriptor
//   IQ_CHUNK (2): u64 start_index | u32 count | count x (f32 I, f32 Q)
//   TRIGGER  (3): u64 sample_index | u8 kind | u16 n | n bytes note
//   END      (4): u64 total samples

inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxMessageBytes = 64u << 20;

enum class MessageType : std::uint8_t { hello = 1, iq_chunk = 2, trigger = 3, end = 4 };

struct Hello {
  std::uint32_t version = kProtocolVersion;
  double sample_rate = 0.0;
  double center_frequency = 0.0;
  std::string sequence;
};

struct IqChunk {
  std::int64_t start_index = 0;
  CVecF samples;
};

struct Trigger {
  TriggerEvent event;
};

struct End {
  std::uint64_t total_samples = 0;
};

using Message = std::variant<Hello, IqChunk, Trigger, End>;

enum class ErrorCode {
  truncated,
  oversized,
  unknown_type,
  bad_length,
  bad_field,
  out_of_order,
  hello_mismatch,
  disconnected,
};

std::string to_string(ErrorCode code);

class ProtocolError : public Error {
 public:
  ProtocolError(ErrorCode code, const std::string& what, std::size_t offset = 0)
      : Error("wire " + to_string(code) + ": " + what), code_(code), offset_(offset) {}

  [[nodiscard]] ErrorCode code() const { return code_; }
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  ErrorCode code_;
  std::size_t offset_;
};

/// Serialized message including its length prefix.
std::string encode(const Message& message);

/// Decode exactly one message occupying all of `bytes` (length prefix
/// included). Throws ProtocolError on any malformation.
Message decode(std::span<const std::uint8_t> bytes);

/// Incremental decoder for a byte stream.
class MessageParser {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message, or nullopt if more bytes are needed.
  std::optional<Message> next();
  [[nodiscard]] std::size_t buffered() const { return buffer_.size() - head_; }

 private:
  std::string buffer_;
  std::size_t head_ = 0;
  std::size_t consumed_ = 0;  // absolute stream offset of head_
};

/// Session-level rules: HELLO first and once, contiguous IQ chunks, END
/// count equal to delivered samples, nothing after END.
class SessionValidator {
 public:
  void accept(const Message& message);
  [[nodiscard]] bool finished() const { return ended_; }
  [[nodiscard]] std::uint64_t delivered() const { return delivered_; }

 private:
  bool hello_ = false;
  bool ended_ = false;
  std::optional<std::int64_t> next_index_;
  std::uint64_t delivered_ = 0;
};

// ---- transport ---------------------------------------------------------

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port"
  static Endpoint parse(const std::string& text);
  [[nodiscard]] std::string str() const;
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  [[nodiscard]] bool valid() const { return fd_ >= 0; }
  [[nodiscard]] int fd() const { return fd_; }
  /// False if the peer went away.
  bool send_all(std::string_view bytes);
  /// Bytes received (0 on orderly shutdown). Throws TimeoutError.
  std::size_t receive(std::span<std::uint8_t> out, std::chrono::milliseconds timeout);
  void close();

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  static TcpListener bind(const Endpoint& endpoint);
  [[nodiscard]] std::uint16_t port() const { return port_; }
  /// Throws TimeoutError if nobody connects in time.
  Socket accept(std::chrono::milliseconds timeout);

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

/// Retries until `timeout` elapses; throws TimeoutError or IoError.
Socket connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

// ---- sessions ----------------------------------------------------------

struct ServeOptions {
  std::chrono::milliseconds accept_timeout{10000};
};

struct SessionSummary {
  bool connected = false;
  bool completed = false;
  std::uint64_t samples_sent = 0;
  std::uint64_t chunks_sent = 0;
  std::uint64_t triggers_sent = 0;
  std::uint64_t total_samples = 0;
  std::string error;
};

/// Accept one receiver and stream HELLO, IQ chunks (each preceded by the
/// TRIGGER messages whose sample index falls into it) and END.
SessionSummary serve_stimulation(StimulationSource& source, const Hello& hello, TcpListener& listener,
                                 const ServeOptions& options = {});

struct ConsumeOptions {
  std::chrono::milliseconds connect_timeout{10000};
  std::chrono::milliseconds io_timeout{30000};
};

struct ConsumeResult {
  FrameSeries series;
  Hello hello;
  std::uint64_t samples_received = 0;
};

/// Connect to a stimulation peer and run the receive pipeline on its
/// stream. Throws ProtocolError on HELLO mismatch or malformed traffic.
ConsumeResult consume_correlation(const Endpoint& endpoint, const CorrelatorConfig& config,
                                  const ConsumeOptions& options = {});

}  // namespace corrsounder::wire
