#pragma once

#include "stcert/backends.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>

#include <json.hpp>

namespace stcert
{

/// A planted colour: which class it stands for and which prompts find it.
struct WorldColor
{
    Rgb rgb{};
    ClassId class_id = 0;
    std::vector<std::string> vocabulary; // lowercase prompts
};

struct PlantedObject
{
    BBox rect;
    std::string color; // key into FakeWorldSpec::colors
};

struct Scene
{
    std::string id;
    int width = 0;
    int height = 0;
    Rgb background{255, 255, 255};
    std::optional<ClassId> truth;
    std::vector<PlantedObject> objects; // painted in order, later on top
};

/// Deterministic toy world backing the fake classifier and segmenter.
///
/// JSON schema (see docs/fake_world.md):
///   {"name": str, "class_count": int, "background_class": int,
///    "colors": {"<name>": {"rgb": [r,g,b], "class_id": int, "vocabulary": [str,...]}},
///    "scenes": [{"id": str, "width": int, "height": int, "background": [r,g,b],
///                "truth": int (optional), "objects": [{"rect": [x0,y0,x1,y1], "color": str}]}]}
struct FakeWorldSpec
{
    std::string name = "fake";
    int class_count = 0;
    ClassId background_class = 0;
    std::map<std::string, WorldColor> colors;
    std::vector<Scene> scenes;

    void validate() const;
    static FakeWorldSpec from_json(const nlohmann::json& doc);
    static FakeWorldSpec load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void save(const std::filesystem::path& path) const;
};

ImageBuf render_scene(const FakeWorldSpec& spec, const Scene& scene);

/// Renders every scene to <root>/<truth synset>/<scene id>.png. Scenes
/// without a truth go under "unlabeled".
void render_world(const FakeWorldSpec& spec, const Taxonomy& taxonomy, const std::filesystem::path& root);

/// Area-weighted dominant planted colour wins; ties go to the lowest class id.
/// Images with no planted colour are assigned the background class.
class FakeClassifier final : public ClassifierBackend
{
public:
    explicit FakeClassifier(FakeWorldSpec spec);
    Prediction classify(const ImageBuf& image) override;
    BackendInfo info() const override;

private:
    FakeWorldSpec spec_;
};

/// Returns one detection per 4-connected component of a colour whose
/// vocabulary contains the prompt (exact lowercase match), score 1.0.
class FakeSegmenter final : public SegmenterBackend
{
public:
    explicit FakeSegmenter(FakeWorldSpec spec);
    std::vector<Detection> ground(const ImageBuf& image,
                                  std::string_view prompt,
                                  double box_threshold = kDefaultBoxThreshold,
                                  double text_threshold = kDefaultTextThreshold) override;
    BackendInfo info() const override;

private:
    FakeWorldSpec spec_;
};

} // namespace stcert
