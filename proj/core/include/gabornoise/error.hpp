#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gabornoise {

enum class Errc {
  invalid_argument,
  invalid_config,
  zero_points,
  degenerate_field,
  not_normalized,
  shape_mismatch,
  dimension_mismatch,
  empty_dataset,
  empty_perturbation_set,
  empty_list,
  length_mismatch,
  out_of_range,
  invalid_layer,
  unreadable_file,
  format_error,
  oracle_failure,
  spawn_failure,
  handshake_timeout,
  descriptor_mismatch,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

  bool is_oracle_error() const noexcept {
    return code_ == Errc::oracle_failure || code_ == Errc::spawn_failure ||
           code_ == Errc::handshake_timeout || code_ == Errc::descriptor_mismatch;
  }

 private:
  Errc code_;
};

}  // namespace gabornoise
