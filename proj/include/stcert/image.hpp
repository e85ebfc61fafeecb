#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace stcert
{

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major, channels interleaved.
class ImageBuf
{
public:
    ImageBuf() = default;
    ImageBuf(int width, int height, Rgb fill = {0, 0, 0});
    ImageBuf(int width, int height, std::vector<std::uint8_t> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return pixels_.empty(); }

    Rgb at(int x, int y) const
    {
        const auto* p = &pixels_[offset(x, y)];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb v)
    {
        auto* p = &pixels_[offset(x, y)];
        p[0] = v[0];
        p[1] = v[1];
        p[2] = v[2];
    }

    std::span<const std::uint8_t> data() const { return pixels_; }
    std::span<std::uint8_t> data() { return pixels_; }

    friend bool operator==(const ImageBuf&, const ImageBuf&) = default;

private:
    std::size_t offset(int x, int y) const
    {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Binary mask, one byte per pixel (0 or 1), row-major.
class BitMask
{
public:
    BitMask() = default;
    BitMask(int width, int height, bool value = false);

    int width() const { return width_; }
    int height() const { return height_; }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
    std::size_t count() const;

    std::span<const std::uint8_t> data() const { return bits_; }

    friend bool operator==(const BitMask&, const BitMask&) = default;

private:
    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Constant-colour replacement for pixels outside the mask.
struct BlankFill
{
    Rgb rgb{0, 0, 0};

    static constexpr Rgb black() { return {0, 0, 0}; }
    static constexpr Rgb mean_gray() { return {124, 116, 104}; }

    friend bool operator==(const BlankFill&, const BlankFill&) = default;
};

/// Half-open pixel box [x0, x1) x [y0, y1).
struct BBox
{
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool valid() const { return 0 <= x0 && x0 < x1 && 0 <= y0 && y0 < y1; }
    bool contains(const BBox& o) const { return x0 <= o.x0 && y0 <= o.y0 && o.x1 <= x1 && o.y1 <= y1; }
    bool within(int w, int h) const { return valid() && x1 <= w && y1 <= h; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

constexpr int kMaxContextLevel = 5;
constexpr double kDefaultContextStep = 0.25;
constexpr int kDefaultTargetSize = 224;

/// out = image * mask + (1 - mask) * blank, element-wise.
ImageBuf apply_mask(const ImageBuf& image, const BitMask& mask, const BlankFill& blank = {});

/// Smallest box containing every set bit. Throws ImageError on an empty mask.
BBox tight_bbox(const BitMask& mask);

/// Scales the box by 1 + step * level about its centre, rounding outward,
/// then clamps to the image. Level 0 returns the box unchanged.
BBox expand_box(const BBox& box, int level, int image_width, int image_height,
                double step = kDefaultContextStep);

/// Crops `box` and bilinearly resamples it to target x target (no antialiasing,
/// pixel-centre aligned, edge-clamped).
ImageBuf crop_resize(const ImageBuf& image, const BBox& box, int target = kDefaultTargetSize);

/// Row-major run lengths, starting with the (possibly zero) count of zeros.
std::vector<std::uint32_t> rle_encode(const BitMask& mask);
BitMask rle_decode(std::span<const std::uint32_t> runs, int width, int height);

/// Mask covering exactly the box.
BitMask box_mask(const BBox& box, int width, int height);

} // namespace stcert
