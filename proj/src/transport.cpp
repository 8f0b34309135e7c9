#include "splitshield/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "splitshield/errors.hpp"

namespace splitshield {

namespace {

void put_u16_be(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

}  // namespace

std::vector<std::uint8_t> frame_message(const Message& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(5 + msg.payload.size());
  put_u32_be(out, static_cast<std::uint32_t>(msg.payload.size()));
  out.push_back(static_cast<std::uint8_t>(msg.tag));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

std::vector<std::uint8_t> encode_elements(const std::vector<std::vector<std::uint8_t>>& elems) {
  if (elems.size() > 0xffff) throw ArgumentError("encode_elements: too many elements");
  std::vector<std::uint8_t> out;
  put_u16_be(out, static_cast<std::uint16_t>(elems.size()));
  for (const auto& e : elems) out.insert(out.end(), e.begin(), e.end());
  return out;
}

std::vector<std::vector<std::uint8_t>> decode_elements(const std::vector<std::uint8_t>& payload,
                                                       std::size_t width) {
  if (payload.size() < 2) throw ProtocolError("decode_elements: truncated payload");
  std::size_t n = (static_cast<std::size_t>(payload[0]) << 8) | payload[1];
  if (payload.size() != 2 + n * width)
    throw ProtocolError("decode_elements: payload size mismatch");
  std::vector<std::vector<std::uint8_t>> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i].assign(payload.begin() + static_cast<std::ptrdiff_t>(2 + i * width),
                  payload.begin() + static_cast<std::ptrdiff_t>(2 + (i + 1) * width));
  return out;
}

std::vector<std::uint8_t> encode_matrix(const Mat& m) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + m.a.size() * 8);
  put_u32_be(out, static_cast<std::uint32_t>(m.rows));
  put_u32_be(out, static_cast<std::uint32_t>(m.cols));
  for (double v : m.a) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>((bits >> (8 * k)) & 0xff));
  }
  return out;
}

Mat decode_matrix(const std::vector<std::uint8_t>& payload) {
  if (payload.size() < 8) throw ProtocolError("decode_matrix: truncated payload");
  std::size_t rows = get_u32_be(payload.data());
  std::size_t cols = get_u32_be(payload.data() + 4);
  if (payload.size() != 8 + rows * cols * 8)
    throw ProtocolError("decode_matrix: payload size mismatch");
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(payload[8 + i * 8 + k]) << (8 * k);
    std::memcpy(&m.a[i], &bits, 8);
  }
  return m;
}

namespace {

struct SharedQueues {
  std::mutex mu;
  std::condition_variable cv;
  std::queue<Message> a_to_b;
  std::queue<Message> b_to_a;
};

class InProcessTransport : public Transport {
 public:
  InProcessTransport(std::shared_ptr<SharedQueues> shared, bool is_a)
      : shared_(std::move(shared)), is_a_(is_a) {}

  void send(const Message& msg) override {
    {
      std::lock_guard<std::mutex> lk(shared_->mu);
      (is_a_ ? shared_->a_to_b : shared_->b_to_a).push(msg);
    }
    shared_->cv.notify_all();
  }

  Message recv() override {
    std::unique_lock<std::mutex> lk(shared_->mu);
    auto& q = is_a_ ? shared_->b_to_a : shared_->a_to_b;
    shared_->cv.wait(lk, [&] { return !q.empty(); });
    Message msg = std::move(q.front());
    q.pop();
    return msg;
  }

 private:
  std::shared_ptr<SharedQueues> shared_;
  bool is_a_;
};

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    ssize_t w = ::write(fd, data + off, n - off);
    if (w <= 0) throw ProtocolError("tcp transport: write failed");
    off += static_cast<std::size_t>(w);
  }
}

void read_all(int fd, std::uint8_t* data, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    ssize_t r = ::read(fd, data + off, n - off);
    if (r <= 0) throw ProtocolError("tcp transport: connection closed");
    off += static_cast<std::size_t>(r);
  }
}

}  // namespace

std::pair<std::shared_ptr<Transport>, std::shared_ptr<Transport>> make_in_process_pair() {
  auto shared = std::make_shared<SharedQueues>();
  return {std::make_shared<InProcessTransport>(shared, true),
          std::make_shared<InProcessTransport>(shared, false)};
}

std::unique_ptr<TcpTransport> TcpTransport::listen_accept(const std::string& host,
                                                          std::uint16_t port,
                                                          std::uint16_t* bound_port) {
  int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) throw ProtocolError("tcp transport: socket failed");
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(lfd);
    throw ArgumentError("tcp transport: bad listen address " + host);
  }
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(lfd, 1) != 0) {
    ::close(lfd);
    throw ProtocolError("tcp transport: bind/listen failed on " + host);
  }
  if (bound_port) {
    sockaddr_in got{};
    socklen_t len = sizeof(got);
    ::getsockname(lfd, reinterpret_cast<sockaddr*>(&got), &len);
    *bound_port = ntohs(got.sin_port);
  }
  int fd = ::accept(lfd, nullptr, nullptr);
  ::close(lfd);
  if (fd < 0) throw ProtocolError("tcp transport: accept failed");
  int nd = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));
  return std::unique_ptr<TcpTransport>(new TcpTransport(fd));
}

std::unique_ptr<TcpTransport> TcpTransport::connect(const std::string& host,
                                                    std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw ArgumentError("tcp transport: bad connect address " + host);
  // The peer may still be binding; retry briefly.
  for (int attempt = 0; attempt < 100; ++attempt) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError("tcp transport: socket failed");
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      int nd = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));
      return std::unique_ptr<TcpTransport>(new TcpTransport(fd));
    }
    ::close(fd);
    ::usleep(50 * 1000);
  }
  throw ProtocolError("tcp transport: connect failed");
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::send(const Message& msg) {
  auto bytes = frame_message(msg);
  write_all(fd_, bytes.data(), bytes.size());
}

Message TcpTransport::recv() {
  std::uint8_t head[5];
  read_all(fd_, head, 5);
  std::uint32_t len = get_u32_be(head);
  Message msg;
  msg.tag = static_cast<MsgTag>(head[4]);
  msg.payload.resize(len);
  if (len > 0) read_all(fd_, msg.payload.data(), len);
  return msg;
}

}  // namespace splitshield
