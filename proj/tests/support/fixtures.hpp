#pragma once

#include "stcert/certifier.hpp"
#include "stcert/evaluation.hpp"
#include "stcert/fake_world.hpp"
#include "stcert/taxonomy.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixtures
{

namespace fs = std::filesystem;

// Class ids in tests/fixtures/mini_taxonomy.json.
constexpr stcert::ClassId kShepherd = 0;
constexpr stcert::ClassId kBeagle = 1;
constexpr stcert::ClassId kLion = 2;
constexpr stcert::ClassId kCanoe = 3;
constexpr stcert::ClassId kPaddle = 4;
constexpr stcert::ClassId kTabby = 5;
constexpr stcert::ClassId kBolete = 6;
constexpr stcert::ClassId kCollie = 7;

inline fs::path fixture_dir()
{
    return STCERT_FIXTURES_DIR;
}

inline stcert::Taxonomy mini_taxonomy()
{
    return stcert::Taxonomy::load(fixture_dir() / "mini_taxonomy.json");
}

inline stcert::CertConfig cropped_config(int level = 0)
{
    stcert::CertConfig c;
    c.mode = stcert::CertMode::Cropped;
    c.context_level = level;
    c.dataset = "mini_3";
    c.target_size = 64;
    return c;
}

inline stcert::CertConfig masked_config()
{
    stcert::CertConfig c;
    c.dataset = "mini_3";
    c.target_size = 64;
    return c;
}

/// Colour palette of the scripted world.
///   red    shepherd, prompt "german shepherd"
///   brown  beagle, prompt "beagle"
///   darkred beagle, no prompt (context for crop-flip scenes)
///   orange lion, prompt "lion"
///   tawny  lion, only reachable through the "feline" super-class prompt
///   blue   canoe, prompt "canoe"
///   navy   canoe, no prompt (core of crop-flip scenes)
///   green  tabby, no prompt at all
inline stcert::FakeWorldSpec base_world()
{
    stcert::FakeWorldSpec w;
    w.name = "scripted";
    w.class_count = 8;
    w.background_class = stcert::ClassId{kBolete};
    w.colors = {
        {"red", {{220, 20, 20}, kShepherd, {"german shepherd"}}},
        {"brown", {{150, 90, 40}, kBeagle, {"beagle"}}},
        {"darkred", {{120, 0, 0}, kBeagle, {}}},
        {"orange", {{250, 150, 0}, kLion, {"lion"}}},
        {"tawny", {{200, 170, 100}, kLion, {"feline"}}},
        {"blue", {{20, 40, 220}, kCanoe, {"canoe"}}},
        {"navy", {{0, 0, 90}, kCanoe, {}}},
        {"green", {{30, 180, 60}, kTabby, {}}},
    };
    return w;
}

inline stcert::Scene single(const std::string& id, stcert::ClassId truth, const std::string& color,
                            stcert::BBox rect = {16, 16, 40, 48})
{
    stcert::Scene s;
    s.id = id;
    s.width = 64;
    s.height = 64;
    s.truth = truth;
    s.objects.push_back({rect, color});
    return s;
}

/// Large prompt-less beagle region plus a small brown ring around a navy core.
/// Full frame: beagle. Tight crop of the ring: canoe dominates. Context levels
/// >= 3 pull enough darkred back in to restore beagle.
inline stcert::Scene crop_flip(const std::string& id, stcert::ClassId truth)
{
    stcert::Scene s;
    s.id = id;
    s.width = 64;
    s.height = 64;
    s.truth = truth;
    s.objects.push_back({{0, 0, 40, 64}, "darkred"});
    s.objects.push_back({{44, 20, 60, 36}, "brown"});
    s.objects.push_back({{46, 22, 58, 34}, "navy"});
    return s;
}

struct ScriptedScene
{
    stcert::Scene scene;
    stcert::Outcome outcome;
    stcert::EvalCategory category;
    bool fallback = false;
};

/// Fifty scenes with pre-derived outcomes under cropped mode, level 0.
inline std::vector<ScriptedScene> scripted_scenes()
{
    using stcert::EvalCategory;
    using stcert::Outcome;
    std::vector<ScriptedScene> out;
    std::mt19937 rng(7);
    auto rect = [&] {
        std::uniform_int_distribution<int> pos(0, 30), ext(8, 30);
        const int x0 = pos(rng), y0 = pos(rng);
        return stcert::BBox{x0, y0, x0 + ext(rng), y0 + ext(rng)};
    };
    auto name = [&](const char* kind, int i) { return std::string(kind) + "_" + std::to_string(100 + i); };

    const std::pair<stcert::ClassId, const char*> consistent[] = {
        {kShepherd, "red"}, {kBeagle, "brown"}, {kLion, "orange"}, {kCanoe, "blue"}};
    for (int i = 0; i < 12; ++i)
    {
        const auto& [cls, color] = consistent[i % 4];
        out.push_back({single(name("consistent", i), cls, color, rect()), Outcome::Certified, EvalCategory::CertCorr});
    }
    for (int i = 0; i < 7; ++i)
        out.push_back({single(name("intra", i), kShepherd, "brown", rect()), Outcome::Certified,
                       EvalCategory::IntraError});
    for (int i = 0; i < 7; ++i)
        out.push_back({single(name("inter", i), kCanoe, i % 2 ? "orange" : "red", rect()), Outcome::Certified,
                       EvalCategory::InterError});
    for (int i = 0; i < 8; ++i)
        out.push_back({crop_flip(name("flipmiss", i), kBeagle), Outcome::Rejected, EvalCategory::Miss});
    for (int i = 0; i < 6; ++i)
        out.push_back({crop_flip(name("fliptrue", i), kLion), Outcome::Rejected, EvalCategory::TrueReject});
    for (int i = 0; i < 6; ++i)
        out.push_back({single(name("nobox", i), kTabby, "green", rect()), Outcome::NoBox, EvalCategory::NoBox,
                       true});
    for (int i = 0; i < 4; ++i)
        out.push_back({single(name("fallback", i), kLion, "tawny", rect()), Outcome::Certified,
                       EvalCategory::CertCorr, true});
    return out;
}

inline stcert::FakeWorldSpec scripted_world()
{
    auto w = base_world();
    for (auto& s : scripted_scenes())
        w.scenes.push_back(s.scene);
    return w;
}

/// Ten single-object scenes whose crops keep the dominant colour.
inline stcert::FakeWorldSpec consistent_world(int n = 10)
{
    auto w = base_world();
    const std::pair<stcert::ClassId, const char*> kinds[] = {
        {kShepherd, "red"}, {kBeagle, "brown"}, {kLion, "orange"}, {kCanoe, "blue"}};
    for (int i = 0; i < n; ++i)
    {
        const auto& [cls, color] = kinds[i % 4];
        w.scenes.push_back(single("scene_" + std::to_string(i), cls, color, {4 + i, 6 + i, 30 + i, 40}));
    }
    return w;
}

/// Two classifiers that disagree about what red is; the segmenter answers to
/// both of their prompts. Every scene is a lone red object.
struct RepeatErrorFixture
{
    stcert::FakeWorldSpec world;   // rendering + segmenter
    stcert::FakeWorldSpec clf_a;   // red -> shepherd
    stcert::FakeWorldSpec clf_b;   // red -> collie
};

inline RepeatErrorFixture repeat_error_fixture(int n = 6)
{
    RepeatErrorFixture f;
    f.world.name = "repeat";
    f.world.class_count = 8;
    f.world.background_class = kBolete;
    f.world.colors = {{"red", {{220, 20, 20}, kShepherd, {"german shepherd", "collie"}}}};
    for (int i = 0; i < n; ++i)
        f.world.scenes.push_back(single("adv_" + std::to_string(i), kBeagle, "red", {8 + i, 8, 40 + i, 44}));
    f.clf_a = f.world;
    f.clf_a.name = "clf_a";
    f.clf_b = f.world;
    f.clf_b.name = "clf_b";
    f.clf_b.colors.at("red").class_id = kCollie;
    return f;
}

/// Minimal ground-truth record for counting tests.
inline stcert::TrialRecord synthetic_record(int i, stcert::EvalCategory c, const std::string& dataset = "mini_3")
{
    using stcert::EvalCategory;
    using stcert::Outcome;
    stcert::TrialRecord r;
    r.image_id = "syn_" + std::to_string(i);
    r.dataset = dataset;
    r.truth = kShepherd;
    r.category = c;
    switch (c)
    {
    case EvalCategory::CertCorr:
    case EvalCategory::IntraError:
    case EvalCategory::InterError:
        r.outcome = Outcome::Certified;
        break;
    case EvalCategory::Miss:
    case EvalCategory::TrueReject:
        r.outcome = Outcome::Rejected;
        break;
    case EvalCategory::NoBox:
        r.outcome = Outcome::NoBox;
        break;
    }
    r.config = {{"mode", "masked"}};
    return r;
}

inline stcert::TrialRecord adversarial_record(int i, stcert::Outcome o)
{
    stcert::TrialRecord r;
    r.image_id = "adv_" + std::to_string(i);
    r.dataset = "mini_3";
    r.adversarial = true;
    r.outcome = o;
    r.config = {{"mode", "masked"}};
    return r;
}

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& tag)
{
    auto p = fs::temp_directory_path() / ("stcert_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace fixtures
