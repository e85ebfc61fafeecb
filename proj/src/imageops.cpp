#include "stcert/image.hpp"

#include "stcert/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stcert
{

namespace
{

void check_dims(int width, int height)
{
    if (width < 1 || height < 1)
        throw ImageError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
}

std::string box_str(const BBox& b)
{
    return "(" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
           std::to_string(b.y1) + ")";
}

} // namespace

ImageBuf::ImageBuf(int width, int height, Rgb fill) : width_(width), height_(height)
{
    check_dims(width, height);
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3)
    {
        pixels_[i] = fill[0];
        pixels_[i + 1] = fill[1];
        pixels_[i + 2] = fill[2];
    }
}

ImageBuf::ImageBuf(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels))
{
    check_dims(width, height);
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3)
        throw ImageError("pixel buffer size does not match " + std::to_string(width) + "x" +
                         std::to_string(height) + "x3");
}

BitMask::BitMask(int width, int height, bool value)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, value ? 1 : 0)
{
    check_dims(width, height);
}

std::size_t BitMask::count() const
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

ImageBuf apply_mask(const ImageBuf& image, const BitMask& mask, const BlankFill& blank)
{
    if (image.width() != mask.width() || image.height() != mask.height())
        throw ImageError("mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                         " but image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()));
    ImageBuf out = image;
    for (int y = 0; y < image.height(); ++y)
    {
        for (int x = 0; x < image.width(); ++x)
        {
            if (!mask.at(x, y))
                out.set(x, y, blank.rgb);
        }
    }
    return out;
}

BBox tight_bbox(const BitMask& mask)
{
    BBox box{mask.width(), mask.height(), -1, -1};
    for (int y = 0; y < mask.height(); ++y)
    {
        for (int x = 0; x < mask.width(); ++x)
        {
            if (!mask.at(x, y))
                continue;
            box.x0 = std::min(box.x0, x);
            box.y0 = std::min(box.y0, y);
            box.x1 = std::max(box.x1, x + 1);
            box.y1 = std::max(box.y1, y + 1);
        }
    }
    if (box.x1 < 0)
        throw ImageError("tight_bbox of an empty mask");
    return box;
}

BBox expand_box(const BBox& box, int level, int image_width, int image_height, double step)
{
    if (level < 0 || level > kMaxContextLevel)
        throw ImageError("context level must be in 0.." + std::to_string(kMaxContextLevel) + ", got " +
                         std::to_string(level));
    if (!box.within(image_width, image_height))
        throw ImageError("box " + box_str(box) + " is not inside the " + std::to_string(image_width) + "x" +
                         std::to_string(image_height) + " image");
    if (step < 0.0)
        throw ImageError("context step must be non-negative");
    if (level == 0)
        return box;

    const double scale = 1.0 + step * level;
    const double cx = 0.5 * (box.x0 + box.x1);
    const double cy = 0.5 * (box.y0 + box.y1);
    const double hw = 0.5 * box.width() * scale;
    const double hh = 0.5 * box.height() * scale;
    BBox out{static_cast<int>(std::floor(cx - hw)), static_cast<int>(std::floor(cy - hh)),
             static_cast<int>(std::ceil(cx + hw)), static_cast<int>(std::ceil(cy + hh))};
    out.x0 = std::clamp(out.x0, 0, image_width);
    out.y0 = std::clamp(out.y0, 0, image_height);
    out.x1 = std::clamp(out.x1, 0, image_width);
    out.y1 = std::clamp(out.y1, 0, image_height);
    return out;
}

ImageBuf crop_resize(const ImageBuf& image, const BBox& box, int target)
{
    if (target < 1)
        throw ImageError("target size must be positive");
    if (!box.within(image.width(), image.height()))
        throw ImageError("crop box " + box_str(box) + " outside the " + std::to_string(image.width()) + "x" +
                         std::to_string(image.height()) + " image");

    const int sw = box.width();
    const int sh = box.height();
    const double sx = static_cast<double>(sw) / target;
    const double sy = static_cast<double>(sh) / target;

    // Per-axis source indices and weights, shared across rows/columns.
    struct Tap
    {
        int i0, i1;
        double w1;
    };
    auto taps = [](int n_out, int n_in, double scale) {
        std::vector<Tap> t(n_out);
        for (int o = 0; o < n_out; ++o)
        {
            double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
            int i0 = static_cast<int>(std::floor(src));
            int i1 = std::min(i0 + 1, n_in - 1);
            t[o] = {i0, i1, src - i0};
        }
        return t;
    };
    const auto tx = taps(target, sw, sx);
    const auto ty = taps(target, sh, sy);

    ImageBuf out(target, target);
    for (int oy = 0; oy < target; ++oy)
    {
        const auto& vy = ty[oy];
        for (int ox = 0; ox < target; ++ox)
        {
            const auto& vx = tx[ox];
            const Rgb p00 = image.at(box.x0 + vx.i0, box.y0 + vy.i0);
            const Rgb p10 = image.at(box.x0 + vx.i1, box.y0 + vy.i0);
            const Rgb p01 = image.at(box.x0 + vx.i0, box.y0 + vy.i1);
            const Rgb p11 = image.at(box.x0 + vx.i1, box.y0 + vy.i1);
            Rgb v{};
            for (int c = 0; c < 3; ++c)
            {
                double top = p00[c] + (p10[c] - p00[c]) * vx.w1;
                double bottom = p01[c] + (p11[c] - p01[c]) * vx.w1;
                double value = top + (bottom - top) * vy.w1;
                v[c] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
            }
            out.set(ox, oy, v);
        }
    }
    return out;
}

std::vector<std::uint32_t> rle_encode(const BitMask& mask)
{
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t length = 0;
    for (std::uint8_t bit : mask.data())
    {
        if (bit != current)
        {
            runs.push_back(length);
            current = bit;
            length = 0;
        }
        ++length;
    }
    runs.push_back(length);
    return runs;
}

BitMask rle_decode(std::span<const std::uint32_t> runs, int width, int height)
{
    BitMask mask(width, height);
    const std::uint64_t total = static_cast<std::uint64_t>(width) * height;
    std::uint64_t sum = 0;
    for (auto r : runs)
        sum += r;
    if (sum != total)
        throw ImageError("RLE runs sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
    std::uint64_t pos = 0;
    bool value = false;
    for (auto r : runs)
    {
        for (std::uint32_t k = 0; k < r; ++k, ++pos)
        {
            if (value)
                mask.set(static_cast<int>(pos % width), static_cast<int>(pos / width), true);
        }
        value = !value;
    }
    return mask;
}

BitMask box_mask(const BBox& box, int width, int height)
{
    if (!box.within(width, height))
        throw ImageError("box " + box_str(box) + " outside the image");
    BitMask mask(width, height);
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            mask.set(x, y, true);
    return mask;
}

} // namespace stcert
