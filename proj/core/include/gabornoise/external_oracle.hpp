#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gabornoise/oracle.hpp"

namespace gabornoise {

struct ExternalOracleOptions {
  std::optional<ModelDescriptor> expected;  // name compared only when non-empty
  std::chrono::milliseconds handshake_timeout{30000};
  std::chrono::milliseconds request_timeout{0};  // 0 waits forever
};

/// Client side of the wire protocol. The command is either "tcp://host:port"
/// or a shell command whose stdin/stdout speak the protocol (stderr is
/// inherited). One request is in flight at a time; use one instance per
/// worker for parallelism.
class ExternalOracle final : public Oracle {
 public:
  /// Throws Errc::spawn_failure, Errc::handshake_timeout,
  /// Errc::descriptor_mismatch or Errc::oracle_failure.
  explicit ExternalOracle(const std::string& command, ExternalOracleOptions options = {});
  ~ExternalOracle() override;

  ExternalOracle(const ExternalOracle&) = delete;
  ExternalOracle& operator=(const ExternalOracle&) = delete;

  const ModelDescriptor& descriptor() const override { return descriptor_; }

  /// Returned rows are checked (finite, nonnegative, summing to 1 within
  /// 1e-3); rows off by more than 1e-12 are renormalized to sum to 1.
  std::vector<Prediction> predict_batch(std::span<const ImageTensor> images) override;

  const std::string& command() const noexcept { return command_; }

 private:
  class Channel;

  std::string command_;
  ExternalOracleOptions options_;
  std::unique_ptr<Channel> channel_;
  ModelDescriptor descriptor_;
  std::uint64_t next_id_ = 1;
  std::mutex mutex_;
};

}  // namespace gabornoise
