#pragma once

#include "stcert/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stcert
{

// PNG via libpng. Grey, palette and alpha inputs are converted to RGB.
std::vector<std::uint8_t> encode_png(const ImageBuf& image);
ImageBuf decode_png(std::span<const std::uint8_t> bytes);
ImageBuf read_png(const std::filesystem::path& path);
void write_png(const ImageBuf& image, const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

} // namespace stcert
