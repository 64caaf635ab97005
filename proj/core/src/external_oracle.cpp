#include "gabornoise/external_oracle.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>

#include "fd_io.hpp"
#include "gabornoise/error.hpp"
#include "gabornoise/wire.hpp"

extern char** environ;

namespace gabornoise {

class ExternalOracle::Channel {
 public:
  ~Channel() { close_all(); }

  static std::unique_ptr<Channel> spawn(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(Errc::spawn_failure, "pipe: " + std::string(std::strerror(errno)));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error(Errc::spawn_failure, "pipe: " + std::string(std::strerror(errno)));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw Error(Errc::spawn_failure, "cannot start '" + command + "': " + std::strerror(rc));
    }

    auto ch = std::unique_ptr<Channel>(new Channel(from_child[0], to_child[1]));
    ch->pid_ = pid;
    return ch;
  }

  static std::unique_ptr<Channel> connect(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw Error(Errc::spawn_failure, "cannot resolve " + host + ": " + ::gai_strerror(rc));
    int fd = -1;
    int last_errno = 0;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
      if (fd < 0) {
        last_errno = errno;
        continue;
      }
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      last_errno = errno;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
      throw Error(Errc::spawn_failure, "cannot connect to " + host + ":" + port + ": " + std::strerror(last_errno));
    }
    return std::unique_ptr<Channel>(new Channel(fd, fd));
  }

  void send_line(std::string line) {
    line.push_back('\n');
    try {
      detail::write_all(out_fd_, line);
    } catch (const Error&) {
      throw Error(Errc::oracle_failure, "external oracle is not accepting input" + exit_note());
    }
  }

  detail::LineReader::Status read_line(std::string& out, int timeout_ms) { return reader_.read_line(out, timeout_ms); }

  std::string exit_note() {
    if (pid_ <= 0) return "";
    int status = 0;
    for (int i = 0; i < 20; ++i) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        pid_ = -1;
        if (WIFEXITED(status)) return " (process exited with status " + std::to_string(WEXITSTATUS(status)) + ")";
        if (WIFSIGNALED(status)) return " (process killed by signal " + std::to_string(WTERMSIG(status)) + ")";
        return "";
      }
      if (r < 0) return "";
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return "";
  }

 private:
  Channel(int in_fd, int out_fd) : in_fd_(in_fd), out_fd_(out_fd), reader_(in_fd) {}

  void close_all() {
    if (out_fd_ >= 0 && out_fd_ != in_fd_) ::close(out_fd_);
    if (in_fd_ >= 0) ::close(in_fd_);
    in_fd_ = out_fd_ = -1;
    if (pid_ > 0) {
      // Closing stdin asks the server to exit; give it a moment before forcing.
      int status = 0;
      for (int i = 0; i < 100; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) {
          pid_ = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  int in_fd_;
  int out_fd_;
  pid_t pid_ = -1;
  detail::LineReader reader_;
};

namespace {

void check_descriptor(const ModelDescriptor& got, const ModelDescriptor& want) {
  std::string diff;
  auto cmp = [&](const char* name, int a, int b) {
    if (a != b) diff += std::string(diff.empty() ? "" : ", ") + name + " " + std::to_string(a) + " != " + std::to_string(b);
  };
  cmp("width", got.input_width, want.input_width);
  cmp("height", got.input_height, want.input_height);
  cmp("channels", got.input_channels, want.input_channels);
  cmp("classes", got.num_classes, want.num_classes);
  if (!want.name.empty() && got.name != want.name) {
    diff += std::string(diff.empty() ? "" : ", ") + "name '" + got.name + "' != '" + want.name + "'";
  }
  if (!diff.empty()) throw Error(Errc::descriptor_mismatch, "external oracle descriptor differs: " + diff);
}

}  // namespace

ExternalOracle::ExternalOracle(const std::string& command, ExternalOracleOptions options)
    : command_(command), options_(std::move(options)) {
  if (command.empty()) throw Error(Errc::spawn_failure, "empty oracle command");
  constexpr std::string_view tcp = "tcp://";
  if (command.starts_with(tcp)) {
    const std::string rest = command.substr(tcp.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw Error(Errc::spawn_failure, "expected tcp://host:port, got '" + command + "'");
    }
    channel_ = Channel::connect(rest.substr(0, colon), rest.substr(colon + 1));
  } else {
    channel_ = Channel::spawn(command);
  }

  channel_->send_line(encode_meta_request());
  std::string line;
  const auto status = channel_->read_line(line, static_cast<int>(options_.handshake_timeout.count()));
  if (status == detail::LineReader::Status::timeout) {
    throw Error(Errc::handshake_timeout, "no meta reply from '" + command + "' within " +
                                             std::to_string(options_.handshake_timeout.count()) + " ms");
  }
  if (status == detail::LineReader::Status::eof) {
    throw Error(Errc::spawn_failure, "'" + command + "' closed its output before the handshake" + channel_->exit_note());
  }
  WireMessage msg;
  try {
    msg = decode_message(line);
  } catch (const Error& e) {
    throw Error(Errc::oracle_failure, std::string("bad handshake reply: ") + e.what());
  }
  const auto* meta = std::get_if<MetaReply>(&msg);
  if (meta == nullptr) {
    if (const auto* err = std::get_if<ErrorReply>(&msg)) {
      throw Error(Errc::oracle_failure, "external oracle refused the handshake: " + err->message);
    }
    throw Error(Errc::oracle_failure, "handshake reply is not a meta message");
  }
  try {
    meta->descriptor.validate();
  } catch (const Error& e) {
    throw Error(Errc::oracle_failure, std::string("external oracle sent an invalid descriptor: ") + e.what());
  }
  if (options_.expected) check_descriptor(meta->descriptor, *options_.expected);
  descriptor_ = meta->descriptor;
}

ExternalOracle::~ExternalOracle() = default;

std::vector<Prediction> ExternalOracle::predict_batch(std::span<const ImageTensor> images) {
  check_shapes(images);
  if (images.empty()) return {};

  std::lock_guard lock(mutex_);
  const std::uint64_t id = next_id_++;
  channel_->send_line(encode_predict_request(id, images));

  const int timeout = options_.request_timeout.count() > 0 ? static_cast<int>(options_.request_timeout.count()) : -1;
  std::string line;
  const auto status = channel_->read_line(line, timeout);
  if (status == detail::LineReader::Status::timeout) {
    throw Error(Errc::oracle_failure, "external oracle did not answer request " + std::to_string(id) + " in time");
  }
  if (status == detail::LineReader::Status::eof) {
    throw Error(Errc::oracle_failure, "external oracle closed the connection" + channel_->exit_note());
  }

  WireMessage msg;
  try {
    msg = decode_message(line);
  } catch (const Error& e) {
    throw Error(Errc::oracle_failure, std::string("protocol violation: ") + e.what());
  }
  if (const auto* err = std::get_if<ErrorReply>(&msg)) {
    throw Error(Errc::oracle_failure, "external oracle error: " + err->message);
  }
  auto* reply = std::get_if<PredictReply>(&msg);
  if (reply == nullptr) throw Error(Errc::oracle_failure, "protocol violation: expected a predict reply");
  if (reply->id != id) {
    throw Error(Errc::oracle_failure, "protocol violation: reply id " + std::to_string(reply->id) + " for request " +
                                          std::to_string(id));
  }
  if (reply->probs.size() != images.size()) {
    throw Error(Errc::oracle_failure, "protocol violation: " + std::to_string(reply->probs.size()) + " rows for " +
                                          std::to_string(images.size()) + " images");
  }
  const auto classes = static_cast<std::size_t>(descriptor_.num_classes);
  for (auto& p : reply->probs) {
    if (p.probs.size() != classes) throw Error(Errc::oracle_failure, "protocol violation: wrong number of classes");
    double sum = 0.0;
    for (double v : p.probs) {
      if (!std::isfinite(v) || v < 0.0) throw Error(Errc::oracle_failure, "external oracle returned an invalid probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-3) {
      throw Error(Errc::oracle_failure, "external oracle returned probabilities summing to " + std::to_string(sum));
    }
    // Rows already normalized to rounding stay bit-exact.
    if (std::abs(sum - 1.0) > 1e-12) {
      for (double& v : p.probs) v /= sum;
    }
  }
  return std::move(reply->probs);
}

}  // namespace gabornoise
