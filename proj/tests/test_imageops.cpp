#include "stcert/codec.hpp"
#include "stcert/error.hpp"
#include "stcert/image.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace stcert;

namespace
{

ImageBuf random_image(std::mt19937& rng, int w, int h)
{
    ImageBuf img(w, h);
    std::uniform_int_distribution<int> v(0, 255);
    for (auto& b : img.data())
        b = static_cast<std::uint8_t>(v(rng));
    return img;
}

BitMask random_mask(std::mt19937& rng, int w, int h, double p)
{
    BitMask m(w, h);
    std::bernoulli_distribution bit(p);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.set(x, y, bit(rng));
    return m;
}

// Straightforward bilinear resampler used as the reference.
double bilinear_value(const ImageBuf& src, double sx, double sy, int c)
{
    auto clampd = [](double v, double hi) { return v < 0 ? 0.0 : (v > hi ? hi : v); };
    sx = clampd(sx, src.width() - 1);
    sy = clampd(sy, src.height() - 1);
    const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
    const int x1 = std::min(x0 + 1, src.width() - 1), y1 = std::min(y0 + 1, src.height() - 1);
    const double fx = sx - x0, fy = sy - y0;
    const double top = src.at(x0, y0)[c] * (1 - fx) + src.at(x1, y0)[c] * fx;
    const double bot = src.at(x0, y1)[c] * (1 - fx) + src.at(x1, y1)[c] * fx;
    return top * (1 - fy) + bot * fy;
}

std::uint8_t bilinear_ref(const ImageBuf& src, double sx, double sy, int c)
{
    return static_cast<std::uint8_t>(std::lround(bilinear_value(src, sx, sy, c)));
}

} // namespace

TEST_CASE("apply_mask worked example")
{
    ImageBuf img(2, 2);
    img.set(0, 0, {10, 10, 10});
    img.set(1, 0, {20, 20, 20});
    img.set(0, 1, {30, 30, 30});
    img.set(1, 1, {40, 40, 40});
    BitMask m(2, 2);
    m.set(0, 0, true);
    m.set(1, 1, true);
    auto out = apply_mask(img, m, BlankFill{{5, 5, 5}});
    CHECK(out.at(0, 0) == Rgb{10, 10, 10});
    CHECK(out.at(1, 0) == Rgb{5, 5, 5});
    CHECK(out.at(0, 1) == Rgb{5, 5, 5});
    CHECK(out.at(1, 1) == Rgb{40, 40, 40});
}

TEST_CASE("apply_mask extremes")
{
    std::mt19937 rng(1);
    auto img = random_image(rng, 7, 5);
    CHECK(apply_mask(img, BitMask(7, 5, true), BlankFill{{1, 2, 3}}) == img);
    CHECK(apply_mask(img, BitMask(7, 5, false), BlankFill{BlankFill::black()}) == ImageBuf(7, 5));
    CHECK_THROWS_AS(apply_mask(img, BitMask(5, 7, true)), ImageError);
}

TEST_CASE("tight_bbox")
{
    BitMask m(10, 10);
    m.set(3, 7, true);
    CHECK(tight_bbox(m) == BBox{3, 7, 4, 8});
    CHECK(tight_bbox(BitMask(10, 10, true)) == BBox{0, 0, 10, 10});
    CHECK_THROWS_AS(tight_bbox(BitMask(4, 4)), ImageError);
}

TEST_CASE("expand_box")
{
    const BBox b{10, 10, 30, 50};
    CHECK(expand_box(b, 0, 100, 100) == b);
    CHECK(expand_box(b, 4, 100, 100) == BBox{0, 0, 40, 70});
    CHECK(expand_box(b, 2, 100, 100) == BBox{5, 0, 35, 60});
    CHECK(expand_box({1, 1, 3, 3}, 5, 4, 4) == BBox{0, 0, 4, 4});
    CHECK_THROWS_AS(expand_box(b, 6, 100, 100), ImageError);
    CHECK_THROWS_AS(expand_box(b, -1, 100, 100), ImageError);
    CHECK_THROWS_AS(expand_box(b, 1, 20, 20), ImageError);
}

TEST_CASE("crop_resize")
{
    std::mt19937 rng(3);
    auto img = random_image(rng, 9, 6);
    CHECK(crop_resize(img, {0, 0, 9, 6}, 9).width() == 9);

    SUBCASE("identity when the box is the frame and sizes match")
    {
        auto sq = random_image(rng, 8, 8);
        CHECK(crop_resize(sq, {0, 0, 8, 8}, 8) == sq);
    }
    SUBCASE("checkerboard upsample matches the reference")
    {
        ImageBuf cb(2, 2);
        cb.set(0, 0, {255, 0, 0});
        cb.set(1, 0, {0, 255, 0});
        cb.set(0, 1, {0, 0, 255});
        cb.set(1, 1, {255, 255, 255});
        auto out = crop_resize(cb, {0, 0, 2, 2}, 4);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                for (int c = 0; c < 3; ++c)
                    CHECK(out.at(x, y)[static_cast<std::size_t>(c)] ==
                          bilinear_ref(cb, (x + 0.5) * 0.5 - 0.5, (y + 0.5) * 0.5 - 0.5, c));
        // Corners replicate the source corners; an inner sample blends all four.
        CHECK(out.at(0, 0) == Rgb{255, 0, 0});
        CHECK(out.at(3, 3) == Rgb{255, 255, 255});
        CHECK(out.at(1, 1) == Rgb{159, 64, 64});
    }
    SUBCASE("output shape is fixed")
    {
        auto big = random_image(rng, 300, 200);
        auto out = crop_resize(big, {10, 20, 290, 40}, 224);
        CHECK(out.width() == 224);
        CHECK(out.height() == 224);
    }
    SUBCASE("random crops agree with the reference")
    {
        for (int i = 0; i < 50; ++i)
        {
            auto src = random_image(rng, 20, 15);
            std::uniform_int_distribution<int> xs(0, 19), ys(0, 14);
            int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
            if (x0 > x1)
                std::swap(x0, x1);
            if (y0 > y1)
                std::swap(y0, y1);
            const BBox box{x0, y0, x1 + 1, y1 + 1};
            const int target = std::uniform_int_distribution<int>(1, 12)(rng);
            auto out = crop_resize(src, box, target);
            const double scx = double(box.width()) / target, scy = double(box.height()) / target;
            for (int y = 0; y < target; ++y)
                for (int x = 0; x < target; ++x)
                {
                    const double sx = std::clamp((x + 0.5) * scx - 0.5, 0.0, box.width() - 1.0) + box.x0;
                    const double sy = std::clamp((y + 0.5) * scy - 0.5, 0.0, box.height() - 1.0) + box.y0;
                    for (int c = 0; c < 3; ++c)
                        REQUIRE(std::abs(out.at(x, y)[static_cast<std::size_t>(c)] -
                                         bilinear_value(src, sx, sy, c)) <= 0.5 + 1e-9);
                }
        }
    }
    CHECK_THROWS_AS(crop_resize(img, {0, 0, 10, 6}, 4), ImageError);
    CHECK_THROWS_AS(crop_resize(img, {0, 0, 9, 6}, 0), ImageError);
}

TEST_CASE("rle")
{
    CHECK(rle_encode(BitMask(2, 2)) == std::vector<std::uint32_t>{4});
    CHECK(rle_encode(BitMask(2, 2, true)) == std::vector<std::uint32_t>{0, 4});
    BitMask m(3, 1);
    m.set(1, 0, true);
    CHECK(rle_encode(m) == std::vector<std::uint32_t>{1, 1, 1});

    std::mt19937 rng(5);
    for (int i = 0; i < 100; ++i)
    {
        auto mask = random_mask(rng, 16, 16, 0.3);
        const auto runs = rle_encode(mask);
        REQUIRE(rle_decode(runs, 16, 16) == mask);
    }
    const std::vector<std::uint32_t> short_runs{3};
    CHECK_THROWS_AS(rle_decode(short_runs, 2, 2), ImageError);
}

TEST_CASE("png and base64 round trip")
{
    std::mt19937 rng(11);
    auto img = random_image(rng, 13, 7);
    CHECK(decode_png(encode_png(img)) == img);
    const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 251, 252, 253};
    for (std::size_t n = 0; n <= bytes.size(); ++n)
    {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        CHECK(base64_decode(base64_encode(part)) == part);
    }
    CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a', 'n'}) == "TWFu");
    CHECK_THROWS_AS(base64_decode("T$Fu"), Error);
    const std::vector<std::uint8_t> junk{1, 2, 3};
    CHECK_THROWS_AS(decode_png(junk), ImageError);
}
