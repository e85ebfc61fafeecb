#include "stcert/codec.hpp"

#include "stcert/error.hpp"

#include <png.h>

#include <array>
#include <fstream>
#include <iterator>

namespace stcert
{

std::vector<std::uint8_t> encode_png(const ImageBuf& image)
{
    png_image info{};
    info.version = PNG_IMAGE_VERSION;
    info.width = static_cast<png_uint_32>(image.width());
    info.height = static_cast<png_uint_32>(image.height());
    info.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    const auto* pixels = image.data().data();
    if (!png_image_write_to_memory(&info, nullptr, &size, 0, pixels, 0, nullptr))
        throw ImageError(std::string("PNG encode failed: ") + info.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&info, out.data(), &size, 0, pixels, 0, nullptr))
        throw ImageError(std::string("PNG encode failed: ") + info.message);
    out.resize(size);
    return out;
}

ImageBuf decode_png(std::span<const std::uint8_t> bytes)
{
    png_image info{};
    info.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&info, bytes.data(), bytes.size()))
        throw ImageError(std::string("PNG decode failed: ") + info.message);
    info.format = PNG_FORMAT_RGB;
    if (info.width == 0 || info.height == 0)
    {
        png_image_free(&info);
        throw ImageError("PNG has zero size");
    }
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(info));
    // Black background for images with alpha.
    png_color background{0, 0, 0};
    if (!png_image_finish_read(&info, &background, pixels.data(), 0, nullptr))
    {
        png_image_free(&info);
        throw ImageError(std::string("PNG decode failed: ") + info.message);
    }
    return ImageBuf(static_cast<int>(info.width), static_cast<int>(info.height), std::move(pixels));
}

ImageBuf read_png(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ImageError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try
    {
        return decode_png(bytes);
    }
    catch (const ImageError& e)
    {
        throw ImageError(path.string() + ": " + e.what());
    }
}

void write_png(const ImageBuf& image, const std::filesystem::path& path)
{
    auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ImageError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace
{
constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<int, 256> make_reverse()
{
    std::array<int, 256> r{};
    for (auto& v : r)
        v = -1;
    for (int i = 0; i < 64; ++i)
        r[static_cast<unsigned char>(kAlphabet[i])] = i;
    return r;
}
constexpr auto kReverse = make_reverse();
} // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3)
    {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (const auto rest = bytes.size() - i; rest > 0)
    {
        std::uint32_t v = bytes[i] << 16;
        if (rest == 2)
            v |= bytes[i + 1] << 8;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    std::size_t padding = 0;
    for (char ch : text)
    {
        if (ch == '=')
        {
            ++padding;
            continue;
        }
        const int v = kReverse[static_cast<unsigned char>(ch)];
        if (v < 0 || padding > 0)
            throw Error("invalid base64 input");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8)
        {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    if (padding > 2)
        throw Error("invalid base64 padding");
    return out;
}

} // namespace stcert
