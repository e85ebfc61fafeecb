#include "support/fixtures.hpp"

#include "stcert/codec.hpp"
#include "stcert/evaluation.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

using namespace stcert;
using namespace fixtures;

namespace
{

struct Run
{
    int code;
    std::string out;
};

Run cli(const std::string& args, const fs::path& dir)
{
    const auto out = dir / "stdout.txt";
    const auto cmd = std::string(STCERT_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                     (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::ostringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int lines(const fs::path& p)
{
    const auto s = slurp(p);
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

struct Workspace
{
    fs::path dir = scratch_dir("cli");
    fs::path world = dir / "world.json";
    std::string common;

    std::string with(const std::string& classifier, const std::string& dataset) const
    {
        return "--taxonomy " + (fixture_dir() / "mini_taxonomy.json").string() + " --dataset " + dataset +
               " --target-size 64 --classifier " + classifier + " --segmenter fake:" + world.string();
    }

    Workspace()
    {
        auto spec = base_world();
        spec.scenes.push_back(single("consistent", kShepherd, "red"));
        spec.scenes.push_back(single("vocabless", kTabby, "green"));
        spec.scenes.push_back(crop_flip("flip", kBeagle));
        spec.save(world);
        common = with("fake:" + world.string(), "mini_3");
    }
    ~Workspace() { fs::remove_all(dir); }
};

} // namespace

TEST_CASE("certify exit codes")
{
    Workspace ws;
    auto spec = FakeWorldSpec::load(ws.world);
    for (const auto& s : spec.scenes)
        write_png(render_scene(spec, s), ws.dir / (s.id + ".png"));

    auto ok = cli("certify --image " + (ws.dir / "consistent.png").string() + " " + ws.common, ws.dir);
    CHECK(ok.code == 0);
    CHECK(nlohmann::json::parse(ok.out)["outcome"] == "Certified");

    CHECK(cli("certify --image " + (ws.dir / "vocabless.png").string() + " " + ws.common, ws.dir).code == 4);
    CHECK(cli("certify --mode cropped --image " + (ws.dir / "flip.png").string() + " " + ws.common, ws.dir).code ==
          3);
    CHECK(cli("certify " + ws.common, ws.dir).code == 2);
    CHECK(cli("certify --image " + (ws.dir / "missing.png").string() + " " + ws.common, ws.dir).code == 1);
    CHECK(cli("certify --image " + (ws.dir / "consistent.png").string() + " " + ws.with("junk", "mini_3"),
              ws.dir)
              .code == 1);
    CHECK(cli("certify --cw 9 --image x.png " + ws.common, ws.dir).code == 2);
    CHECK(cli("", ws.dir).code == 2);
}

TEST_CASE("render, eval and report")
{
    Workspace ws;
    const auto tax = (fixture_dir() / "mini_taxonomy.json").string();
    REQUIRE(cli("render --world " + ws.world.string() + " --taxonomy " + tax + " --out " + (ws.dir / "img").string(),
                ws.dir)
                .code == 0);

    const auto out = ws.dir / "eval";
    REQUIRE(cli("eval --mode cropped --images " + (ws.dir / "img").string() + " --out " + out.string() + " " +
                    ws.common,
                ws.dir)
                .code == 0);
    for (const auto* f : {"trials.jsonl", "report.csv", "summary.json", "manifest.json", "categories.svg"})
        CHECK(fs::exists(out / f));

    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    const auto log = read_trial_log(out / "trials.jsonl");
    REQUIRE(log.size() == 3);
    std::map<std::string, int> oracle;
    for (const auto& r : log)
        ++oracle[std::string(to_string(*r.category))];
    for (auto c : kAllCategories)
    {
        const std::string name(to_string(c));
        CHECK(summary["counts"][name] == oracle[name]);
        CHECK(summary["rates"][name].get<double>() == doctest::Approx(oracle[name] / 3.0));
    }
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["command"] == "eval");
    CHECK(manifest["seed"] == 0);
    CHECK(manifest.contains("timestamp"));

    REQUIRE(cli("report --summary " + (out / "summary.json").string() + " --out " + (ws.dir / "r1").string(), ws.dir)
                .code == 0);
    REQUIRE(cli("report --trials " + (out / "trials.jsonl").string() + " --out " + (ws.dir / "r2").string(), ws.dir)
                .code == 0);
    CHECK(slurp(ws.dir / "r1" / "categories.svg") == slurp(out / "categories.svg"));
    CHECK(fs::exists(ws.dir / "r2" / "categories.svg"));
    CHECK(cli("report --out " + (ws.dir / "r3").string(), ws.dir).code == 2);
    CHECK(cli("report --summary " + (out / "report.csv").string() + " --out " + (ws.dir / "r4").string(), ws.dir)
              .code == 1);

    CHECK(cli("eval --images " + (ws.dir / "img").string() + " --out " + (ws.dir / "e2").string() + " " +
                  ws.with("fake:" + ws.world.string(), "mixed_10"),
              ws.dir)
              .code == 1);
}

TEST_CASE("sweep, cross and adv shapes")
{
    Workspace ws;
    const auto tax = (fixture_dir() / "mini_taxonomy.json").string();
    REQUIRE(cli("render --world " + ws.world.string() + " --taxonomy " + tax + " --out " + (ws.dir / "img").string(),
                ws.dir)
                .code == 0);
    const auto img = (ws.dir / "img").string();

    REQUIRE(cli("sweep --levels 0,1,2,3,4,5 --images " + img + " --out " + (ws.dir / "sw").string() + " " +
                    ws.common,
                ws.dir)
                .code == 0);
    CHECK(lines(ws.dir / "sw" / "report.csv") == 1 + 7);
    for (auto c : kAllCategories)
        CHECK(fs::exists(ws.dir / "sw" / ("sweep_" + std::string(to_string(c)) + ".svg")));
    CHECK(fs::exists(ws.dir / "sw" / "per_class.csv"));

    const auto other = ws.dir / "world_b.json";
    auto spec_b = FakeWorldSpec::load(ws.world);
    spec_b.name = "other";
    spec_b.colors.at("red").class_id = kCollie;
    spec_b.save(other);
    REQUIRE(cli("cross --images " + img + " --out " + (ws.dir / "cx").string() + " --taxonomy " + tax +
                    " --dataset mini_3 --target-size 64 --segmenter fake:" + ws.world.string() +
                    " --classifiers fake:" + ws.world.string() + ",fake:" + other.string(),
                ws.dir)
                .code == 0);
    const auto matrix = slurp(ws.dir / "cx" / "matrix.csv");
    CHECK(lines(ws.dir / "cx" / "matrix.csv") == 3);
    CHECK(std::count(matrix.begin(), matrix.begin() + static_cast<std::ptrdiff_t>(matrix.find('\n')), ',') == 2);

    REQUIRE(cli("adv --images " + img + " --out " + (ws.dir / "adv").string() + " " + ws.common, ws.dir).code == 0);
    const auto adv = nlohmann::json::parse(slurp(ws.dir / "adv" / "summary.json"));
    CHECK(adv["kind"] == "adv");
    CHECK(adv["total"] == 3);
    CHECK(fs::exists(ws.dir / "adv" / "adversarial.svg"));
}
