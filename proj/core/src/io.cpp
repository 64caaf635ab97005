#include "gabornoise/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "gabornoise/error.hpp"

namespace gabornoise {

using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

void append_floats(std::string& out, std::span<const float> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[start + i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
}

std::vector<float> read_floats(std::string_view payload, std::size_t count) {
  if (payload.size() != count * 4) {
    throw Error(Errc::format_error, "payload holds " + std::to_string(payload.size()) + " bytes, expected " +
                                        std::to_string(count * 4));
  }
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[i * 4 + b])) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::pair<json, std::string_view> split_header(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw Error(Errc::format_error, "missing header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, std::string("bad header JSON: ") + e.what());
  }
  return {std::move(header), bytes.substr(nl + 1)};
}

ImageShape header_shape(const json& h) {
  try {
    ImageShape s{h.at("width").get<int>(), h.at("height").get<int>(), h.at("channels").get<int>()};
    if (s.width < 1 || s.height < 1 || s.channels < 1) throw Error(Errc::format_error, "non-positive dimensions");
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, std::string("bad header fields: ") + e.what());
  }
}

json provenance_json(const Provenance& p) {
  json j;
  j["kind"] = std::string(provenance_kind(p));
  if (const auto* g = std::get_if<GaborProvenance>(&p)) {
    j["sigma"] = g->theta.sigma;
    j["omega"] = g->theta.omega;
    j["lambda"] = g->theta.lambda_freq;
    j["kernel_size"] = g->kernel_size;
    j["density"] = g->density;
    j["mode"] = std::string(to_string(g->mode));
  } else if (const auto* v = std::get_if<SingularVectorProvenance>(&p)) {
    j["layer"] = v->layer;
    j["p"] = v->p;
    j["q"] = v->q;
    j["batch"] = v->batch;
    j["iterations"] = v->iterations;
    j["converged"] = v->converged;
    j["model_seed"] = v->model_seed;
  }
  return j;
}

Provenance provenance_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "none") return NoProvenance{};
  if (kind == "uniform_random") return UniformRandomProvenance{};
  if (kind == "gabor") {
    GaborProvenance g;
    g.theta = {j.at("sigma").get<double>(), j.at("omega").get<double>(), j.at("lambda").get<double>()};
    g.kernel_size = j.at("kernel_size").get<int>();
    g.density = j.at("density").get<double>();
    g.mode = parse_mode(j.at("mode").get<std::string>());
    return g;
  }
  if (kind == "singular_vector") {
    SingularVectorProvenance v;
    v.layer = j.at("layer").get<std::string>();
    v.p = j.at("p").get<double>();
    v.q = j.at("q").get<double>();
    v.batch = j.at("batch").get<int>();
    v.iterations = j.at("iterations").get<int>();
    v.converged = j.at("converged").get<bool>();
    v.model_seed = j.at("model_seed").get<std::uint64_t>();
    return v;
  }
  throw Error(Errc::format_error, "unknown provenance kind '" + kind + "'");
}

std::uint8_t quantize(double v) {
  const double r = std::round(v);
  return static_cast<std::uint8_t>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
}

}  // namespace

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::unreadable_file, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::unreadable_file, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::unreadable_file, "short write to " + path.string());
}

std::string encode_gnp(const PerturbationField& s) {
  json h;
  h["magic"] = "GNP1";
  h["width"] = s.shape.width;
  h["height"] = s.shape.height;
  h["channels"] = s.shape.channels;
  h["epsilon"] = s.epsilon;
  h["provenance"] = provenance_json(s.provenance);
  h["seed"] = s.seed;
  std::string out = h.dump();
  out.push_back('\n');
  append_floats(out, s.values);
  return out;
}

PerturbationField decode_gnp(std::string_view bytes) {
  auto [h, payload] = split_header(bytes);
  if (h.value("magic", "") != "GNP1") throw Error(Errc::format_error, "not a GNP1 file");
  PerturbationField s;
  s.shape = header_shape(h);
  try {
    s.epsilon = h.at("epsilon").get<double>();
    s.seed = h.at("seed").get<std::uint64_t>();
    s.provenance = provenance_from_json(h.at("provenance"));
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, std::string("bad GNP1 header: ") + e.what());
  }
  s.values = read_floats(payload, s.shape.size());
  return s;
}

void write_gnp(const std::filesystem::path& path, const PerturbationField& s) { write_file_bytes(path, encode_gnp(s)); }

PerturbationField read_gnp(const std::filesystem::path& path) { return decode_gnp(read_file_bytes(path)); }

std::string encode_tensor_file(std::span<const ImageTensor> images) {
  if (images.empty()) throw Error(Errc::empty_dataset, "no images to encode");
  const ImageShape shape = images.front().shape;
  json h;
  h["magic"] = "GNT1";
  h["count"] = images.size();
  h["width"] = shape.width;
  h["height"] = shape.height;
  h["channels"] = shape.channels;
  std::string out = h.dump();
  out.push_back('\n');
  for (const auto& img : images) {
    if (!(img.shape == shape)) throw Error(Errc::shape_mismatch, "tensor file images must share one shape");
    append_floats(out, img.values);
  }
  return out;
}

std::vector<ImageTensor> decode_tensor_file(std::string_view bytes) {
  auto [h, payload] = split_header(bytes);
  if (h.value("magic", "") != "GNT1") throw Error(Errc::format_error, "not a GNT1 file");
  const ImageShape shape = header_shape(h);
  std::size_t count = 0;
  try {
    count = h.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, std::string("bad GNT1 header: ") + e.what());
  }
  const std::vector<float> all = read_floats(payload, count * shape.size());
  std::vector<ImageTensor> images;
  images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto first = all.begin() + static_cast<std::ptrdiff_t>(i * shape.size());
    images.emplace_back(shape, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(shape.size())));
  }
  return images;
}

void write_tensor_file(const std::filesystem::path& path, std::span<const ImageTensor> images) {
  write_file_bytes(path, encode_tensor_file(images));
}

std::vector<ImageTensor> read_tensor_file(const std::filesystem::path& path) {
  return decode_tensor_file(read_file_bytes(path));
}

std::vector<std::uint8_t> perturbation_preview_bytes(const PerturbationField& s) {
  std::vector<std::uint8_t> out(s.values.size());
  if (s.epsilon <= 0.0) {
    std::fill(out.begin(), out.end(), std::uint8_t{128});
    return out;
  }
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    out[i] = quantize(255.0 * (static_cast<double>(s.values[i]) + s.epsilon) / (2.0 * s.epsilon));
  }
  return out;
}

namespace {

void write_png_bytes(const std::filesystem::path& path, int width, int height, int channels,
                     const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  switch (channels) {
    case 1: image.format = PNG_FORMAT_GRAY; break;
    case 3: image.format = PNG_FORMAT_RGB; break;
    case 4: image.format = PNG_FORMAT_RGBA; break;
    default: throw Error(Errc::invalid_argument, "PNG export needs 1, 3 or 4 channels");
  }
  if (png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::unreadable_file, "cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

void write_perturbation_png(const std::filesystem::path& path, const PerturbationField& s) {
  write_png_bytes(path, s.shape.width, s.shape.height, s.shape.channels, perturbation_preview_bytes(s));
}

void write_png_rgb(const std::filesystem::path& path, const ImageTensor& img) {
  std::vector<std::uint8_t> bytes(img.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(img.values[i]);
  write_png_bytes(path, img.shape.width, img.shape.height, img.shape.channels, bytes);
}

ImageTensor read_png_rgb(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    std::string msg = image.message;
    throw Error(Errc::unreadable_file, "cannot read PNG " + path.string() + ": " + msg);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr) == 0) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::unreadable_file, "cannot decode PNG " + path.string() + ": " + msg);
  }
  ImageShape shape{static_cast<int>(image.width), static_cast<int>(image.height), 3};
  std::vector<float> values(bytes.begin(), bytes.end());
  return ImageTensor(shape, std::move(values));
}

}  // namespace gabornoise
