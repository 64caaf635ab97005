// Serves the built-in reference classifier over the wire protocol, on
// stdin/stdout or a TCP port (one connection at a time).

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cerrno>
#include <cstdio>
#include <cstring>

#include "gabornoise/error.hpp"
#include "gabornoise/reference_model.hpp"
#include "gabornoise/wire.hpp"

using namespace gabornoise;

namespace {

int serve_tcp(Oracle& oracle, int port, bool once) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) {
    std::perror("socket");
    return 1;
  }
  const int yes = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 8) != 0) {
    std::perror("bind");
    ::close(fd);
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  std::fprintf(stderr, "listening on 127.0.0.1:%d\n", ntohs(addr.sin_port));

  for (;;) {
    const int conn = ::accept4(fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (conn < 0) {
      if (errno == EINTR) continue;
      std::perror("accept");
      break;
    }
    try {
      serve_oracle(oracle, conn, conn);
    } catch (const Error& e) {
      std::fprintf(stderr, "connection dropped: %s\n", e.what());
    }
    ::close(conn);
    if (once) break;
  }
  ::close(fd);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference classifier behind the oracle wire protocol"};
  std::uint64_t seed = 0;
  int port = -1;
  bool once = false;
  app.add_option("--model-seed", seed, "Weight seed of the built-in classifier")->capture_default_str();
  auto* port_opt = app.add_option("--port", port, "Listen on 127.0.0.1:PORT (0 picks a free port)")
                       ->check(CLI::Range(0, 65535));
  app.add_flag("--stdio", "Serve on stdin/stdout (the default)")->excludes(port_opt);
  app.add_flag("--once", once, "Exit after the first TCP connection closes")->needs(port_opt);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  GaborBankClassifier model(seed);
  if (port >= 0) return serve_tcp(model, port, once);
  try {
    serve_oracle(model, STDIN_FILENO, STDOUT_FILENO);
  } catch (const Error& e) {
    std::fprintf(stderr, "oracle server: %s\n", e.what());
    return 1;
  }
  return 0;
}
