#pragma once

#include <string>
#include <string_view>

namespace gabornoise::detail {

/// Writes everything or throws Errc::oracle_failure. A closed peer surfaces
/// as an error, never as SIGPIPE.
void write_all(int fd, std::string_view data);

class LineReader {
 public:
  enum class Status { line, eof, timeout };

  explicit LineReader(int fd) : fd_(fd) {}

  /// Next '\n'-terminated line without the terminator. timeout_ms < 0 waits
  /// forever. A trailing unterminated fragment at EOF is returned as a line.
  Status read_line(std::string& out, int timeout_ms = -1);

 private:
  int fd_;
  std::string buffer_;
  bool eof_ = false;
};

}  // namespace gabornoise::detail
