#include "stcert/fake_world.hpp"

#include "stcert/codec.hpp"
#include "stcert/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace stcert
{

namespace
{

using nlohmann::json;

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Rgb rgb_from_json(const json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(where + ": expected [r, g, b]");
    Rgb out{};
    for (int c = 0; c < 3; ++c)
    {
        if (!j[c].is_number_integer() || j[c].get<int>() < 0 || j[c].get<int>() > 255)
            throw ConfigError(where + ": channel out of [0,255]");
        out[c] = static_cast<std::uint8_t>(j[c].get<int>());
    }
    return out;
}

json rgb_to_json(const Rgb& rgb)
{
    return json::array({rgb[0], rgb[1], rgb[2]});
}

std::uint32_t pack(const Rgb& rgb)
{
    return (static_cast<std::uint32_t>(rgb[0]) << 16) | (static_cast<std::uint32_t>(rgb[1]) << 8) | rgb[2];
}

} // namespace

void FakeWorldSpec::validate() const
{
    if (class_count < 1)
        throw ConfigError("fake world \"" + name + "\": class_count must be positive");
    if (background_class < 0 || background_class >= class_count)
        throw ConfigError("fake world \"" + name + "\": background_class out of range");
    std::set<std::uint32_t> seen;
    for (const auto& [key, color] : colors)
    {
        if (color.class_id < 0 || color.class_id >= class_count)
            throw ConfigError("colour \"" + key + "\": class_id out of range");
        if (!seen.insert(pack(color.rgb)).second)
            throw ConfigError("colour \"" + key + "\": rgb value used by another colour");
    }
    for (const auto& scene : scenes)
    {
        const auto where = "scene \"" + scene.id + "\"";
        if (scene.id.empty())
            throw ConfigError("scene with empty id");
        if (scene.width < 1 || scene.height < 1)
            throw ConfigError(where + ": non-positive size");
        if (seen.count(pack(scene.background)))
            throw ConfigError(where + ": background colour collides with a planted colour");
        if (scene.truth && (*scene.truth < 0))
            throw ConfigError(where + ": negative truth");
        for (const auto& obj : scene.objects)
        {
            if (!colors.count(obj.color))
                throw ConfigError(where + ": unknown colour \"" + obj.color + "\"");
            if (!obj.rect.within(scene.width, scene.height))
                throw ConfigError(where + ": object rect outside the scene");
        }
    }
}

FakeWorldSpec FakeWorldSpec::from_json(const json& doc)
{
    FakeWorldSpec spec;
    try
    {
        spec.name = doc.value("name", std::string("fake"));
        spec.class_count = doc.at("class_count").get<int>();
        spec.background_class = doc.at("background_class").get<int>();
        for (const auto& [key, jc] : doc.at("colors").items())
        {
            WorldColor c;
            c.rgb = rgb_from_json(jc.at("rgb"), "colors." + key + ".rgb");
            c.class_id = jc.at("class_id").get<int>();
            for (const auto& v : jc.value("vocabulary", json::array()))
                c.vocabulary.push_back(lower(v.get<std::string>()));
            spec.colors.emplace(key, std::move(c));
        }
        for (const auto& js : doc.value("scenes", json::array()))
        {
            Scene s;
            s.id = js.at("id").get<std::string>();
            s.width = js.at("width").get<int>();
            s.height = js.at("height").get<int>();
            if (js.contains("background"))
                s.background = rgb_from_json(js["background"], "scene " + s.id + ".background");
            if (js.contains("truth") && !js["truth"].is_null())
                s.truth = js["truth"].get<int>();
            for (const auto& jo : js.value("objects", json::array()))
            {
                const auto r = jo.at("rect").get<std::vector<int>>();
                if (r.size() != 4)
                    throw ConfigError("scene " + s.id + ": rect must have 4 coordinates");
                s.objects.push_back({BBox{r[0], r[1], r[2], r[3]}, jo.at("color").get<std::string>()});
            }
            spec.scenes.push_back(std::move(s));
        }
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("fake world spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

FakeWorldSpec FakeWorldSpec::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open fake world spec " + path.string());
    try
    {
        return from_json(json::parse(in));
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json FakeWorldSpec::to_json() const
{
    json jcolors = json::object();
    for (const auto& [key, c] : colors)
        jcolors[key] = {{"rgb", rgb_to_json(c.rgb)}, {"class_id", c.class_id}, {"vocabulary", c.vocabulary}};
    json jscenes = json::array();
    for (const auto& s : scenes)
    {
        json jobjects = json::array();
        for (const auto& o : s.objects)
            jobjects.push_back({{"rect", {o.rect.x0, o.rect.y0, o.rect.x1, o.rect.y1}}, {"color", o.color}});
        json js = {{"id", s.id},
                   {"width", s.width},
                   {"height", s.height},
                   {"background", rgb_to_json(s.background)},
                   {"objects", std::move(jobjects)}};
        if (s.truth)
            js["truth"] = *s.truth;
        jscenes.push_back(std::move(js));
    }
    return {{"name", name},
            {"class_count", class_count},
            {"background_class", background_class},
            {"colors", std::move(jcolors)},
            {"scenes", std::move(jscenes)}};
}

void FakeWorldSpec::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << to_json().dump(1) << '\n';
}

ImageBuf render_scene(const FakeWorldSpec& spec, const Scene& scene)
{
    ImageBuf img(scene.width, scene.height, scene.background);
    for (const auto& obj : scene.objects)
    {
        const auto& rgb = spec.colors.at(obj.color).rgb;
        for (int y = obj.rect.y0; y < obj.rect.y1; ++y)
            for (int x = obj.rect.x0; x < obj.rect.x1; ++x)
                img.set(x, y, rgb);
    }
    return img;
}

void render_world(const FakeWorldSpec& spec, const Taxonomy& taxonomy, const std::filesystem::path& root)
{
    for (const auto& scene : spec.scenes)
    {
        const std::string folder = scene.truth ? taxonomy.entry(*scene.truth).synset : std::string("unlabeled");
        const auto dir = root / folder;
        std::filesystem::create_directories(dir);
        write_png(render_scene(spec, scene), dir / (scene.id + ".png"));
    }
}

FakeClassifier::FakeClassifier(FakeWorldSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
}

Prediction FakeClassifier::classify(const ImageBuf& image)
{
    std::map<std::uint32_t, ClassId> lookup;
    for (const auto& [_, c] : spec_.colors)
        lookup.emplace(pack(c.rgb), c.class_id);

    std::map<ClassId, std::size_t> area;
    for (int y = 0; y < image.height(); ++y)
    {
        for (int x = 0; x < image.width(); ++x)
        {
            if (auto it = lookup.find(pack(image.at(x, y))); it != lookup.end())
                ++area[it->second];
        }
    }
    const double total = static_cast<double>(image.width()) * image.height();
    if (area.empty())
        return {spec_.background_class, 1.0};
    // std::map iterates ascending class ids, so strict > keeps the lowest on ties.
    auto best = area.begin();
    for (auto it = area.begin(); it != area.end(); ++it)
    {
        if (it->second > best->second)
            best = it;
    }
    return {best->first, static_cast<double>(best->second) / total};
}

BackendInfo FakeClassifier::info() const
{
    return {spec_.name, "classifier", spec_.class_count, true};
}

FakeSegmenter::FakeSegmenter(FakeWorldSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
}

std::vector<Detection> FakeSegmenter::ground(const ImageBuf& image, std::string_view prompt, double box_threshold,
                                             double /*text_threshold*/)
{
    constexpr double kScore = 1.0;
    if (kScore < box_threshold)
        return {};
    const auto query = lower(prompt);
    std::set<std::uint32_t> targets;
    for (const auto& [_, c] : spec_.colors)
    {
        if (std::find(c.vocabulary.begin(), c.vocabulary.end(), query) != c.vocabulary.end())
            targets.insert(pack(c.rgb));
    }
    std::vector<Detection> out;
    if (targets.empty())
        return out;

    const int w = image.width();
    const int h = image.height();
    std::vector<char> visited(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
    {
        for (int x = 0; x < w; ++x)
        {
            const auto colour = pack(image.at(x, y));
            if (visited[y * w + x] || !targets.count(colour))
                continue;
            BitMask mask(w, h);
            std::vector<std::pair<int, int>> stack{{x, y}};
            visited[y * w + x] = 1;
            while (!stack.empty())
            {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                mask.set(cx, cy, true);
                const std::pair<int, int> nbrs[] = {{cx - 1, cy}, {cx + 1, cy}, {cx, cy - 1}, {cx, cy + 1}};
                for (auto [nx, ny] : nbrs)
                {
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h || visited[ny * w + nx])
                        continue;
                    if (pack(image.at(nx, ny)) != colour)
                        continue;
                    visited[ny * w + nx] = 1;
                    stack.emplace_back(nx, ny);
                }
            }
            const auto box = tight_bbox(mask);
            out.push_back({box, std::move(mask), kScore});
        }
    }
    return out;
}

BackendInfo FakeSegmenter::info() const
{
    return {spec_.name, "segmenter", spec_.class_count, true};
}

} // namespace stcert
