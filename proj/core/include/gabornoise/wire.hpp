#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gabornoise/oracle.hpp"

namespace gabornoise {

// Newline-delimited JSON oracle protocol. Image data travels as base64 of
// little-endian float32, batch-major, channel fastest, raw [0, 255] pixels.
//
//   -> {"op":"meta"}
//   <- {"op":"meta","name":..,"width":..,"height":..,"channels":..,"classes":..}
//   -> {"op":"predict","id":..,"batch":B,"width":..,"height":..,"channels":..,"data":".."}
//   <- {"op":"predict","id":..,"probs":[[..],..]}
//   <- {"op":"error","id":..,"message":..}

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Errc::format_error on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct MetaRequest {};

struct MetaReply {
  ModelDescriptor descriptor;
};

struct PredictRequest {
  std::uint64_t id = 0;
  std::vector<ImageTensor> images;
  ImageShape shape;
};

struct PredictReply {
  std::uint64_t id = 0;
  std::vector<Prediction> probs;
};

struct ErrorReply {
  std::uint64_t id = 0;
  std::string message;
};

using WireMessage = std::variant<MetaRequest, MetaReply, PredictRequest, PredictReply, ErrorReply>;

// Each encoder returns one line without the trailing newline.
std::string encode_meta_request();
std::string encode_meta_reply(const ModelDescriptor& d);
/// All images must share one shape.
std::string encode_predict_request(std::uint64_t id, std::span<const ImageTensor> images);
std::string encode_predict_reply(std::uint64_t id, std::span<const Prediction> probs);
std::string encode_error(std::uint64_t id, std::string_view message);

/// Parses one line. Throws Errc::format_error naming the offending field.
WireMessage decode_message(std::string_view line);

/// Answers requests read from in_fd on out_fd until end of input. Malformed
/// requests get an error frame; the loop keeps going.
void serve_oracle(Oracle& oracle, int in_fd, int out_fd);

}  // namespace gabornoise
