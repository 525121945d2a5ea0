#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "limsim/agent/protocol.hpp"
#include "limsim/common/error.hpp"

namespace limsim {

namespace {

struct Channel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> lines;
  bool closed = false;
};

class MemoryConnection : public Connection {
 public:
  MemoryConnection(std::shared_ptr<Channel> in, std::shared_ptr<Channel> out) : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryConnection() override { close(); }

  void send(const std::string& line) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw ConnectionClosed("peer closed");
    out_->lines.push_back(line);
    out_->cv.notify_all();
  }

  std::optional<std::string> receive(std::chrono::duration<double> timeout) override {
    std::unique_lock lock(in_->mu);
    const bool ready = in_->cv.wait_for(lock, timeout, [&] { return !in_->lines.empty() || in_->closed; });
    if (!ready) return std::nullopt;
    if (in_->lines.empty()) throw ConnectionClosed("peer closed");
    std::string line = std::move(in_->lines.front());
    in_->lines.pop_front();
    return line;
  }

  void close() override {
    for (auto* ch : {in_.get(), out_.get()}) {
      std::lock_guard lock(ch->mu);
      ch->closed = true;
      ch->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Channel> in_, out_;
};

class SocketConnection : public Connection {
 public:
  explicit SocketConnection(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~SocketConnection() override { close(); }

  void send(const std::string& line) override {
    if (fd_ < 0) throw ConnectionClosed("socket closed");
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ConnectionClosed(std::string("send failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> receive(std::chrono::duration<double> timeout) override {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::duration_cast<clock::duration>(timeout);
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (fd_ < 0) throw ConnectionClosed("socket closed");
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      if (left <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw ConnectionClosed(std::string("poll failed: ") + std::strerror(errno));
      if (r == 0) return std::nullopt;
      char buf[4096];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ConnectionClosed("peer closed the socket");
      buffer_.append(buf, static_cast<std::size_t>(n));
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

sockaddr_in address(const std::string& host, int port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw ConnectionClosed("bad address " + host);
  return a;
}

}  // namespace

std::pair<std::shared_ptr<Connection>, std::shared_ptr<Connection>> make_memory_pipe() {
  auto a = std::make_shared<Channel>(), b = std::make_shared<Channel>();
  return {std::make_shared<MemoryConnection>(a, b), std::make_shared<MemoryConnection>(b, a)};
}

std::shared_ptr<Connection> listen_tcp(const std::string& host, int port, std::chrono::duration<double> timeout) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ConnectionClosed(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const sockaddr_in a = address(host, port);
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&a), sizeof a) < 0 || ::listen(fd, 1) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw ConnectionClosed("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  pollfd p{fd, POLLIN, 0};
  const int r = ::poll(&p, 1, static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count()));
  if (r <= 0) {
    ::close(fd);
    throw ConnectionClosed("no agent connected");
  }
  const int client = ::accept(fd, nullptr, nullptr);
  ::close(fd);
  if (client < 0) throw ConnectionClosed(std::string("accept: ") + std::strerror(errno));
  return std::make_shared<SocketConnection>(client);
}

std::shared_ptr<Connection> connect_tcp(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ConnectionClosed(std::string("socket: ") + std::strerror(errno));
  const sockaddr_in a = address(host, port);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&a), sizeof a) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw ConnectionClosed("cannot connect to " + host + ":" + std::to_string(port) + ": " + err);
  }
  return std::make_shared<SocketConnection>(fd);
}

}  // namespace limsim
