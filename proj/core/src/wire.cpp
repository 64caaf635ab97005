#include "gabornoise/wire.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <nlohmann/json.hpp>

#include "fd_io.hpp"
#include "gabornoise/error.hpp"

namespace gabornoise {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::format_error, "base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::format_error, "invalid base64 data");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string encode_meta_request() { return R"({"op":"meta"})"; }

std::string encode_meta_reply(const ModelDescriptor& d) {
  json j = {{"op", "meta"},          {"name", d.name},           {"width", d.input_width},
            {"height", d.input_height}, {"channels", d.input_channels}, {"classes", d.num_classes}};
  return j.dump();
}

std::string encode_predict_request(std::uint64_t id, std::span<const ImageTensor> images) {
  const ImageShape shape = images.empty() ? ImageShape{} : images.front().shape;
  std::vector<std::uint8_t> raw;
  raw.reserve(images.size() * shape.size() * 4);
  for (const auto& img : images) {
    if (!(img.shape == shape)) throw Error(Errc::shape_mismatch, "predict batch mixes image shapes");
    for (float v : img.values) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) raw.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  json j = {{"op", "predict"},           {"id", id},
            {"batch", images.size()},    {"width", shape.width},
            {"height", shape.height},    {"channels", shape.channels},
            {"data", base64_encode(raw)}};
  return j.dump();
}

std::string encode_predict_reply(std::uint64_t id, std::span<const Prediction> probs) {
  json rows = json::array();
  for (const auto& p : probs) rows.push_back(p.probs);
  json j = {{"op", "predict"}, {"id", id}, {"probs", std::move(rows)}};
  return j.dump();
}

std::string encode_error(std::uint64_t id, std::string_view message) {
  json j = {{"op", "error"}, {"id", id}, {"message", std::string(message)}};
  return j.dump();
}

namespace {

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw Error(Errc::format_error, std::string("message is missing field '") + name + "'");
  return *it;
}

template <typename T>
T integer_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_integer()) throw Error(Errc::format_error, std::string("field '") + name + "' must be an integer");
  if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
  const auto s = v.get<std::int64_t>();
  if (s < 0) throw Error(Errc::format_error, std::string("field '") + name + "' must be nonnegative");
  return static_cast<T>(s);
}

std::string string_field(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) throw Error(Errc::format_error, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

PredictRequest decode_predict_request(const json& j) {
  PredictRequest r;
  r.id = integer_field<std::uint64_t>(j, "id");
  const auto batch = integer_field<std::size_t>(j, "batch");
  r.shape = {integer_field<int>(j, "width"), integer_field<int>(j, "height"), integer_field<int>(j, "channels")};
  const auto raw = base64_decode(string_field(j, "data"));
  const std::size_t per = r.shape.size();
  if (raw.size() != batch * per * 4) {
    throw Error(Errc::format_error, "field 'data' holds " + std::to_string(raw.size()) + " bytes, expected " +
                                        std::to_string(batch * per * 4));
  }
  r.images.reserve(batch);
  std::size_t off = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<float> values(per);
    for (auto& v : values) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(raw[off + k]) << (8 * k);
      off += 4;
      v = std::bit_cast<float>(bits);
    }
    r.images.emplace_back(r.shape, std::move(values));
  }
  return r;
}

PredictReply decode_predict_reply(const json& j) {
  PredictReply r;
  r.id = integer_field<std::uint64_t>(j, "id");
  const json& rows = field(j, "probs");
  if (!rows.is_array()) throw Error(Errc::format_error, "field 'probs' must be an array");
  for (const auto& row : rows) {
    if (!row.is_array()) throw Error(Errc::format_error, "field 'probs' must hold arrays of numbers");
    Prediction p;
    p.probs.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number()) throw Error(Errc::format_error, "field 'probs' must hold arrays of numbers");
      p.probs.push_back(v.get<double>());
    }
    r.probs.push_back(std::move(p));
  }
  return r;
}

}  // namespace

WireMessage decode_message(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::format_error, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::format_error, "message must be a JSON object");
  const std::string op = string_field(j, "op");
  if (op == "meta") {
    if (!j.contains("width")) return MetaRequest{};
    MetaReply m;
    m.descriptor.name = string_field(j, "name");
    m.descriptor.input_width = integer_field<int>(j, "width");
    m.descriptor.input_height = integer_field<int>(j, "height");
    m.descriptor.input_channels = integer_field<int>(j, "channels");
    m.descriptor.num_classes = integer_field<int>(j, "classes");
    return m;
  }
  if (op == "predict") {
    if (j.contains("probs")) return decode_predict_reply(j);
    return decode_predict_request(j);
  }
  if (op == "error") {
    ErrorReply e;
    e.id = j.contains("id") && j["id"].is_number_unsigned() ? j["id"].get<std::uint64_t>() : 0;
    e.message = string_field(j, "message");
    return e;
  }
  throw Error(Errc::format_error, "unknown op '" + op + "'");
}

void serve_oracle(Oracle& oracle, int in_fd, int out_fd) {
  detail::LineReader reader(in_fd);
  std::string line;
  while (reader.read_line(line) == detail::LineReader::Status::line) {
    if (line.empty()) continue;
    std::string reply;
    std::uint64_t id = 0;
    try {
      const WireMessage msg = decode_message(line);
      if (std::holds_alternative<MetaRequest>(msg)) {
        reply = encode_meta_reply(oracle.descriptor());
      } else if (const auto* req = std::get_if<PredictRequest>(&msg)) {
        id = req->id;
        const auto preds = oracle.predict_batch(req->images);
        reply = encode_predict_reply(req->id, preds);
      } else {
        reply = encode_error(0, "unexpected message from client");
      }
    } catch (const Error& e) {
      reply = encode_error(id, e.what());
    }
    reply.push_back('\n');
    detail::write_all(out_fd, reply);
  }
}

}  // namespace gabornoise
