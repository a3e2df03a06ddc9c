#pragma once

// POSIX subprocess predictor speaking the framed protocol over stdin/stdout.

#include <cerrno>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <utility>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "ribkit/error.hpp"
#include "ribkit/infer.hpp"
#include "ribkit/protocol.hpp"

namespace ribkit {

namespace detail {

inline bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n) {
    const ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

// Returns bytes read; less than n only at end of stream.
inline std::size_t read_all(int fd, std::uint8_t* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, data + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (r == 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

// Reads one length-prefixed frame body. Returns false on clean end of stream
// before the length field.
inline bool read_frame(int fd, protocol::Bytes& body, const char* what) {
  std::uint8_t len[4];
  const std::size_t got = read_all(fd, len, 4);
  if (got == 0) return false;
  if (got != 4) throw ProtocolError(std::string(what) + ": truncated length prefix");
  const std::uint32_t n = protocol::get_u32(len);
  body.resize(n);
  const std::size_t payload = read_all(fd, body.data(), n);
  if (payload != n)
    throw ProtocolError(std::string(what) + ": got " + std::to_string(payload) +
                        " of " + std::to_string(n) + " bytes");
  return true;
}

}  // namespace detail

class SubprocessPredictor final : public Predictor {
 public:
  explicit SubprocessPredictor(const std::string& command) : command_(command) {
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
      throw IoError("cannot create pipes for predictor: " + std::string(std::strerror(errno)));
    pid_ = ::fork();
    if (pid_ < 0) throw IoError("cannot fork predictor process");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
  }

  SubprocessPredictor(const SubprocessPredictor&) = delete;
  SubprocessPredictor& operator=(const SubprocessPredictor&) = delete;

  ~SubprocessPredictor() override {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0) ::close(out_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  HeadOutput predict(const Volume& patch, const PatchInfo& info) override {
    const std::string where = "predictor '" + command_ + "' patch " + std::to_string(info.index);
    const protocol::Bytes request = protocol::encode_request(patch);
    if (!detail::write_all(in_, request.data(), request.size()))
      throw ProtocolError(where + ": cannot write request (process exited?)");
    protocol::Bytes body;
    HeadOutput out;
    if (!detail::read_frame(out_, body, where.c_str()))
      throw ProtocolError(where + ": no response");
    out.binary = std::move(protocol::decode_frame_body(body, 1, patch.spacing()).front());
    if (!detail::read_frame(out_, body, where.c_str()))
      throw ProtocolError(where + ": missing classification frame");
    out.classes = protocol::decode_frame_body(body, kRibTypes, patch.spacing());
    return out;
  }

 private:
  std::string command_;
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
};

// Server side: answers requests on in_fd with fn(patch) until end of stream.
inline void serve_predictions(int in_fd, int out_fd,
                              const std::function<HeadOutput(const Volume&)>& fn) {
  protocol::Bytes body;
  while (detail::read_frame(in_fd, body, "request")) {
    const Volume patch = protocol::decode_request_body(body);
    const protocol::Bytes reply = protocol::encode_response(fn(patch));
    if (!detail::write_all(out_fd, reply.data(), reply.size()))
      throw IoError("cannot write response");
  }
}

}  // namespace ribkit
