#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <queue>
#include <string>
#include <vector>

#include "splitshield/linalg.hpp"

namespace splitshield {

enum class MsgTag : std::uint8_t {
  round_1a = 1,  // I_a^{s1}, active -> passive
  round_1b,      // I_a^{s1 t1}, passive -> active
  round_1c,      // I_p^{t1}, passive -> active
  round_1d,      // I_p^{s1 t1}, active -> passive
  round_2a,      // union^{s1 s2 s3 t1}, active -> passive
  round_2b,      // union^{s1 s2 s3 t1 t2 t3}, passive -> active
  private_req_a,
  private_resp_a,
  private_req_p,
  private_resp_p,
  matrix,
  done,
};

struct Message {
  MsgTag tag;
  std::vector<std::uint8_t> payload;
};

// Wire framing shared by the in-process and TCP transports:
// 4-byte big-endian payload length, 1-byte tag, payload bytes.
std::vector<std::uint8_t> frame_message(const Message& msg);

// Element-list payload: 2-byte big-endian count, then `width`-byte fixed
// width big-endian element encodings.
std::vector<std::uint8_t> encode_elements(const std::vector<std::vector<std::uint8_t>>& elems);
std::vector<std::vector<std::uint8_t>> decode_elements(const std::vector<std::uint8_t>& payload,
                                                       std::size_t width);

// Matrix payload: 4-byte big-endian row and column counts, then row-major
// IEEE-754 doubles in little-endian byte order. Bit-exact round trip.
std::vector<std::uint8_t> encode_matrix(const Mat& m);
Mat decode_matrix(const std::vector<std::uint8_t>& payload);

// Blocking FIFO message channel to exactly one peer.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Message& msg) = 0;
  virtual Message recv() = 0;
};

// Paired in-memory endpoints; each side is single-owner, the shared queues
// are mutex-protected so the two parties may live on different threads.
std::pair<std::shared_ptr<Transport>, std::shared_ptr<Transport>> make_in_process_pair();

class TcpTransport : public Transport {
 public:
  // Binds host:port (port 0 picks an ephemeral port, see bound_port) and
  // blocks until one peer connects.
  static std::unique_ptr<TcpTransport> listen_accept(const std::string& host,
                                                     std::uint16_t port,
                                                     std::uint16_t* bound_port = nullptr);
  static std::unique_ptr<TcpTransport> connect(const std::string& host, std::uint16_t port);

  ~TcpTransport() override;
  void send(const Message& msg) override;
  Message recv() override;

 private:
  explicit TcpTransport(int fd) : fd_(fd) {}
  int fd_ = -1;
};

}  // namespace splitshield
