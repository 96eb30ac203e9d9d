#include "braidforge/oracle_client.hpp"

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fcntl.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "braidforge/error.hpp"

namespace braidforge {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string volume_status_name(VolumeStatus s) {
  switch (s) {
    case VolumeStatus::Hyperbolic: return "hyperbolic";
    case VolumeStatus::NotHyperbolic: return "not-hyperbolic";
    case VolumeStatus::Error: return "error";
  }
  return "error";
}

VolumeStatus volume_status_from_name(const std::string& name) {
  for (auto s : {VolumeStatus::Hyperbolic, VolumeStatus::NotHyperbolic, VolumeStatus::Error})
    if (volume_status_name(s) == name) return s;
  throw Error(Errc::ProtocolError, "unknown volume status: " + name);
}

json volume_request(long id, const BraidWord& w) {
  return {{"id", id}, {"letters", w.letters()}, {"strands", w.strands()}};
}

VolumeResult parse_volume_response(const std::string& line, long expected_id) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw Error(Errc::ProtocolError, "malformed response: " + line);
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_integer() || !j.contains("status") ||
      !j["status"].is_string())
    throw Error(Errc::ProtocolError, "response lacks id or status: " + line);
  if (j["id"].get<long>() != expected_id)
    throw Error(Errc::ProtocolError, "response id " + std::to_string(j["id"].get<long>()) + ", expected " +
                                         std::to_string(expected_id));
  VolumeResult r;
  r.status = volume_status_from_name(j["status"].get<std::string>());
  if (j.contains("message") && j["message"].is_string()) r.message = j["message"].get<std::string>();
  const bool has_volume = j.contains("volume") && !j["volume"].is_null();
  if (has_volume) {
    if (!j["volume"].is_number()) throw Error(Errc::ProtocolError, "volume is not a number");
    r.volume = j["volume"].get<double>();
  }
  if (has_volume != (r.status == VolumeStatus::Hyperbolic))
    throw Error(Errc::ProtocolError, "volume present iff status is hyperbolic: " + line);
  if (r.volume && !(*r.volume >= 0.0)) throw Error(Errc::ProtocolError, "negative volume");
  return r;
}

bool volumes_equal(const VolumeResult& a, const VolumeResult& b, double tol) {
  if (a.status != VolumeStatus::Hyperbolic || b.status != VolumeStatus::Hyperbolic)
    throw Error(Errc::StatusMismatch, "volumes_equal needs two hyperbolic results");
  return std::abs(*a.volume - *b.volume) <= tol;
}

struct OracleClient::Impl {
  int in_fd = -1;   // we read responses here
  int out_fd = -1;  // we write requests here
  pid_t child = -1;
  std::chrono::milliseconds timeout;
  std::string buffer;
  long next_id = 1;

  ~Impl() {
    if (out_fd >= 0 && out_fd != in_fd) ::close(out_fd);
    if (in_fd >= 0) ::close(in_fd);
    if (child > 0) {
      int status = 0;
      // closing stdin normally ends the sidecar; do not wait forever
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(child, &status, WNOHANG) != 0) return;
        ::usleep(10000);
      }
      ::kill(child, SIGKILL);
      ::waitpid(child, &status, 0);
    }
  }

  int remaining_ms(Clock::time_point deadline) const {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left > 0 ? static_cast<int>(left) : 0;
  }

  void write_all(const std::string& data, Clock::time_point deadline) {
    std::size_t done = 0;
    while (done < data.size()) {
      pollfd p{out_fd, POLLOUT, 0};
      const int rc = ::poll(&p, 1, remaining_ms(deadline));
      if (rc == 0) throw Error(Errc::Timeout, "timed out sending request");
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::BridgeUnavailable, std::string("poll: ") + std::strerror(errno));
      }
      const ssize_t n = ::write(out_fd, data.data() + done, data.size() - done);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw Error(Errc::BridgeUnavailable, std::string("sidecar closed the connection: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    for (;;) {
      const auto nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      pollfd p{in_fd, POLLIN, 0};
      const int rc = ::poll(&p, 1, remaining_ms(deadline));
      if (rc == 0) throw Error(Errc::Timeout, "timed out waiting for the sidecar");
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::BridgeUnavailable, std::string("poll: ") + std::strerror(errno));
      }
      char chunk[4096];
      const ssize_t n = ::read(in_fd, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw Error(Errc::BridgeUnavailable, std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) throw Error(Errc::BridgeUnavailable, "sidecar closed the connection");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }
};

namespace {

int connect_unix(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) throw Error(Errc::BridgeUnavailable, "socket path too long");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(Errc::BridgeUnavailable, std::string("socket: ") + std::strerror(errno));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    ::close(fd);
    throw Error(Errc::BridgeUnavailable, "cannot connect to " + path + ": " + std::strerror(err));
  }
  return fd;
}

int connect_tcp(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::BridgeUnavailable, "tcp endpoint needs host:port");
  const std::string host = hostport.substr(0, colon), port = hostport.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw Error(Errc::BridgeUnavailable, "cannot resolve " + hostport + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* a = res; a != nullptr && fd < 0; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) != 0) {
      ::close(fd);
      fd = -1;
    }
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(Errc::BridgeUnavailable, "cannot connect to " + hostport);
  return fd;
}

}  // namespace

OracleClient::OracleClient(const std::string& endpoint, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>()) {
  impl_->timeout = timeout;
  // a sidecar that dies mid-request must not kill us through SIGPIPE
  ::signal(SIGPIPE, SIG_IGN);
  if (endpoint.rfind("exec:", 0) == 0) {
    const std::string exec_line = "exec " + endpoint.substr(5);
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(Errc::BridgeUnavailable, "pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error(Errc::BridgeUnavailable, "pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw Error(Errc::BridgeUnavailable, "fork failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", exec_line.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    impl_->child = pid;
    impl_->out_fd = to_child[1];
    impl_->in_fd = from_child[0];
  } else if (endpoint.rfind("unix:", 0) == 0) {
    impl_->in_fd = impl_->out_fd = connect_unix(endpoint.substr(5));
  } else if (endpoint.rfind("tcp:", 0) == 0) {
    impl_->in_fd = impl_->out_fd = connect_tcp(endpoint.substr(4));
  } else {
    throw Error(Errc::BridgeUnavailable, "unsupported oracle endpoint: '" + endpoint + "'");
  }
}

OracleClient::~OracleClient() = default;

VolumeResult OracleClient::query(const BraidWord& w) {
  const long id = impl_->next_id++;
  const auto deadline = Clock::now() + impl_->timeout;
  impl_->write_all(volume_request(id, w).dump() + "\n", deadline);
  return parse_volume_response(impl_->read_line(deadline), id);
}

VolumeResult query_volume(const BraidWord& w, const std::string& endpoint, std::chrono::milliseconds timeout) {
  OracleClient client(endpoint, timeout);
  return client.query(w);
}

std::string resolve_oracle_endpoint(const std::string& fallback) {
  const char* env = std::getenv("BRAIDFORGE_ORACLE");
  return env != nullptr && *env != '\0' ? std::string(env) : fallback;
}

}  // namespace braidforge
