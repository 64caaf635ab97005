#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gabornoise/perturbation.hpp"

namespace gabornoise {

// GNP1 perturbation file: one line of compact JSON
//   {"channels","epsilon","height","magic":"GNP1","provenance":{...},"seed","width"}
// then '\n' and width*height*channels little-endian float32, channel fastest.
std::string encode_gnp(const PerturbationField& s);
PerturbationField decode_gnp(std::string_view bytes);
void write_gnp(const std::filesystem::path& path, const PerturbationField& s);
PerturbationField read_gnp(const std::filesystem::path& path);

// GNT1 image tensor file: same layout as GNP1 with header
//   {"channels","count","height","magic":"GNT1","width"}
// and count images back to back.
std::string encode_tensor_file(std::span<const ImageTensor> images);
std::vector<ImageTensor> decode_tensor_file(std::string_view bytes);
void write_tensor_file(const std::filesystem::path& path, std::span<const ImageTensor> images);
std::vector<ImageTensor> read_tensor_file(const std::filesystem::path& path);

/// v -> round(255 (v + eps) / (2 eps)), clamped to [0, 255].
std::vector<std::uint8_t> perturbation_preview_bytes(const PerturbationField& s);
void write_perturbation_png(const std::filesystem::path& path, const PerturbationField& s);

/// 8-bit RGB PNG read into [0, 255] floats. Grey and alpha inputs are
/// converted to RGB by libpng.
ImageTensor read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const ImageTensor& image);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace gabornoise
