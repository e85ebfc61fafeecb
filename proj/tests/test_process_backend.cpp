#include "support/fixtures.hpp"

#include "stcert/backend_spec.hpp"
#include "stcert/error.hpp"
#include "stcert/evaluation.hpp"
#include "stcert/process_backend.hpp"

#include <doctest.h>

#include <cstdlib>
#include <future>

using namespace stcert;
using namespace std::chrono_literals;

namespace
{

std::string stub(const std::string& mode)
{
    return std::string(STCERT_STUB_PATH) + " " + mode;
}

ImageBuf tinted(std::uint8_t r)
{
    return ImageBuf(6, 4, Rgb{r, 9, 9});
}

} // namespace

TEST_CASE("info handshake chooses the adapter")
{
    auto clf = process_backend(stub("classifier"), 5s);
    REQUIRE(clf.classifier);
    CHECK_FALSE(clf.segmenter);
    CHECK(clf.classifier->info().name == "stub-classifier");
    CHECK(clf.classifier->info().class_count == 256);

    auto seg = process_backend(stub("segmenter"), 5s);
    REQUIRE(seg.segmenter);
    CHECK_FALSE(seg.classifier);
}

TEST_CASE("classify round trip")
{
    auto b = process_backend(stub("classifier"), 5s);
    CHECK(b.classifier->classify(tinted(42)) == Prediction{42, 0.75});
    CHECK(b.classifier->classify(tinted(7)) == Prediction{7, 0.75});
}

TEST_CASE("ground round trip applies the score threshold")
{
    auto b = process_backend(stub("segmenter"), 5s);
    auto dets = b.segmenter->ground(tinted(1), "anything", 0.3, 0.25);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].box == BBox{0, 0, 6, 4});
    CHECK(dets[0].mask == BitMask(6, 4, true));
    CHECK(dets[0].score == doctest::Approx(0.9));
    CHECK(b.segmenter->ground(tinted(1), "anything", 0.05, 0.25).size() == 2);
    CHECK(b.segmenter->ground(tinted(1), "nothing").empty());
}

TEST_CASE("responses are matched by id when the child reorders them")
{
    auto b = process_backend(stub("reorder"), 5s);
    for (int round = 0; round < 5; ++round)
    {
        const auto a = static_cast<std::uint8_t>(10 + round);
        const auto c = static_cast<std::uint8_t>(100 + round);
        auto fa = std::async(std::launch::async, [&] { return b.classifier->classify(tinted(a)); });
        auto fc = std::async(std::launch::async, [&] { return b.classifier->classify(tinted(c)); });
        CHECK(fa.get().class_id == a);
        CHECK(fc.get().class_id == c);
    }
}

TEST_CASE("error responses become BackendError")
{
    auto b = process_backend(stub("error"), 5s);
    try
    {
        b.classifier->classify(tinted(1));
        FAIL("expected BackendError");
    }
    catch (const ProtocolError&)
    {
        FAIL("error response is not a protocol violation");
    }
    catch (const BackendError& e)
    {
        CHECK(std::string(e.what()).find("model exploded") != std::string::npos);
    }
    // The channel stays usable.
    CHECK_THROWS_AS(b.classifier->classify(tinted(2)), BackendError);
}

TEST_CASE("malformed line poisons the channel")
{
    auto b = process_backend(stub("malformed"), 5s);
    CHECK_THROWS_AS(b.classifier->classify(tinted(1)), ProtocolError);
    CHECK_THROWS_AS(b.classifier->classify(tinted(1)), ProtocolError);
}

TEST_CASE("invalid detection payload")
{
    auto b = process_backend(stub("badbox"), 5s);
    CHECK_THROWS_AS(b.segmenter->ground(tinted(1), "x"), ProtocolError);
}

TEST_CASE("timeouts")
{
    auto b = process_backend(stub("hang"), 300ms);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(b.classifier->classify(tinted(1)), TimeoutError);
    CHECK(std::chrono::steady_clock::now() - t0 < 5s);

    auto tax = fixtures::mini_taxonomy();
    auto seg = process_backend(stub("segmenter"), 5s);
    auto rec = run_trial(tinted(1), "img", fixtures::kShepherd, *b.classifier, *b.classifier, *seg.segmenter, tax,
                         fixtures::masked_config());
    CHECK_FALSE(rec.ok());
    CHECK(rec.error->find("timed out") != std::string::npos);
}

TEST_CASE("child exit is a backend error")
{
    auto b = process_backend(stub("exit"), 5s);
    CHECK_THROWS_AS(b.classifier->classify(tinted(1)), BackendError);
    CHECK_THROWS_AS(process_backend("exit 1", 5s), BackendError);
}

TEST_CASE("timeout environment override")
{
    ::setenv("STCERT_BACKEND_TIMEOUT_S", "2.5", 1);
    CHECK(default_backend_timeout() == 2500ms);
    ::setenv("STCERT_BACKEND_TIMEOUT_S", "junk", 1);
    CHECK(default_backend_timeout() == 120s);
    ::unsetenv("STCERT_BACKEND_TIMEOUT_S");
    CHECK(default_backend_timeout() == 120s);
}

TEST_CASE("backend spec strings")
{
    CHECK(make_classifier("proc:" + stub("classifier"))->classify(tinted(5)).class_id == 5);
    CHECK(make_segmenter("proc:" + stub("segmenter"))->ground(tinted(5), "x").size() == 1);
    CHECK_THROWS_AS(make_classifier("proc:" + stub("segmenter")), ConfigError);
    CHECK_THROWS_AS(make_classifier("onnx:model.bin"), ConfigError);
    CHECK_THROWS_AS(make_classifier("fake:/does/not/exist.json"), Error);
}
