// stcert: command-line front end for second-thought certification runs.

#include "stcert/backend_spec.hpp"
#include "stcert/codec.hpp"
#include "stcert/error.hpp"
#include "stcert/evaluation.hpp"
#include "stcert/fake_world.hpp"
#include "stcert/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef STCERT_VERSION
#define STCERT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

constexpr int kExitCertified = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRejected = 3;
constexpr int kExitNoBox = 4;

struct SharedFlags
{
    std::string taxonomy;
    std::string dataset;
    std::string classifier;
    std::string classifier2;
    std::string segmenter;
    std::string mode = "masked";
    int cw = 0;
    std::string blank = "0,0,0";
    double box_threshold = stcert::kDefaultBoxThreshold;
    double text_threshold = stcert::kDefaultTextThreshold;
    int target_size = stcert::kDefaultTargetSize;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out;
    bool no_fallback = false;
};

void add_config_flags(CLI::App& app, SharedFlags& f)
{
    app.add_option("--taxonomy", f.taxonomy, "Taxonomy JSON file")->required();
    app.add_option("--dataset", f.dataset, "Super-class dataset name (e.g. mixed_10)")->required();
    app.add_option("--mode", f.mode, "masked | cropped")->check(CLI::IsMember({"masked", "cropped"}));
    app.add_option("--cw", f.cw, "Context width level 0..5 (cropped mode)")->check(CLI::Range(0, 5));
    app.add_option("--blank", f.blank, "Blank fill r,g,b for masked mode");
    app.add_option("--box-threshold", f.box_threshold)->check(CLI::Range(0.0, 1.0));
    app.add_option("--text-threshold", f.text_threshold)->check(CLI::Range(0.0, 1.0));
    app.add_option("--target-size", f.target_size)->check(CLI::PositiveNumber);
    app.add_option("--seed", f.seed);
    app.add_flag("--no-fallback", f.no_fallback, "Disable the super-class fallback prompt");
}

void add_backend_flags(CLI::App& app, SharedFlags& f, bool need_classifier)
{
    auto* c = app.add_option("--classifier", f.classifier, "fake:<world.json> | proc:<command>");
    if (need_classifier)
        c->required();
    app.add_option("--classifier2", f.classifier2, "Second-thought classifier (defaults to --classifier)");
    app.add_option("--segmenter", f.segmenter, "fake:<world.json> | proc:<command>")->required();
}

stcert::CertConfig make_config(const SharedFlags& f)
{
    stcert::CertConfig c;
    c.mode = stcert::parse_mode(f.mode);
    c.context_level = f.cw;
    c.target_size = f.target_size;
    c.box_threshold = f.box_threshold;
    c.text_threshold = f.text_threshold;
    c.superclass_fallback = !f.no_fallback;
    c.dataset = f.dataset;
    std::stringstream ss(f.blank);
    std::string part;
    int i = 0;
    while (std::getline(ss, part, ','))
    {
        if (i >= 3)
            throw stcert::ConfigError("--blank expects r,g,b");
        int v = std::stoi(part);
        if (v < 0 || v > 255)
            throw stcert::ConfigError("--blank channel out of [0,255]");
        c.blank.rgb[i++] = static_cast<std::uint8_t>(v);
    }
    if (i != 3)
        throw stcert::ConfigError("--blank expects r,g,b");
    c.validate();
    return c;
}

std::string iso_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const fs::path& path, const json& j)
{
    stcert::write_text(path, j.dump(2) + "\n");
}

void write_manifest(const fs::path& out, const std::string& command, const std::vector<std::string>& argv,
                    const SharedFlags& f, const stcert::CertConfig& config, const json& extra)
{
    json m = {{"command", command},
              {"argv", argv},
              {"config", config.to_json()},
              {"backends",
               {{"classifier", f.classifier},
                {"classifier2", f.classifier2.empty() ? f.classifier : f.classifier2},
                {"segmenter", f.segmenter}}},
              {"taxonomy", f.taxonomy},
              {"dataset", f.dataset},
              {"seed", f.seed},
              {"workers", f.workers},
              {"tool_version", STCERT_VERSION},
              {"timestamp", iso_timestamp()}};
    m.update(extra);
    write_json(out / "manifest.json", m);
}

std::vector<int> parse_levels(const std::string& text)
{
    std::vector<int> levels;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ','))
    {
        if (part.empty())
            continue;
        levels.push_back(std::stoi(part));
    }
    return levels;
}

struct Backends
{
    std::shared_ptr<stcert::ClassifierBackend> first;
    std::shared_ptr<stcert::ClassifierBackend> second;
    std::shared_ptr<stcert::SegmenterBackend> segmenter;
};

Backends open_backends(const SharedFlags& f)
{
    Backends b;
    b.first = stcert::make_classifier(f.classifier);
    b.second = f.classifier2.empty() || f.classifier2 == f.classifier ? b.first : stcert::make_classifier(f.classifier2);
    b.segmenter = stcert::make_segmenter(f.segmenter);
    return b;
}

int cmd_certify(const SharedFlags& f, const std::string& image_path)
{
    const auto taxonomy = stcert::Taxonomy::load(f.taxonomy);
    taxonomy.dataset(f.dataset);
    const auto config = make_config(f);
    const auto image = stcert::read_png(image_path);
    auto b = open_backends(f);
    const auto cp = stcert::certify(image, *b.first, *b.second, *b.segmenter, taxonomy, config);
    std::cout << stcert::to_json(cp, &taxonomy).dump(2) << std::endl;
    switch (cp.outcome)
    {
    case stcert::Outcome::Certified:
        return kExitCertified;
    case stcert::Outcome::Rejected:
        return kExitRejected;
    case stcert::Outcome::NoBox:
        return kExitNoBox;
    }
    return kExitError;
}

void emit_charts(const json& summary, const fs::path& out)
{
    stcert::render_report(summary, out);
}

int cmd_eval(const SharedFlags& f, const std::string& images, bool adversarial, const std::string& name,
             const std::vector<std::string>& argv)
{
    const auto taxonomy = stcert::Taxonomy::load(f.taxonomy);
    if (!adversarial)
        taxonomy.dataset(f.dataset);
    const auto config = make_config(f);
    auto b = open_backends(f);
    stcert::RunOptions opts{f.seed, f.workers, adversarial};
    const auto log = stcert::run_dataset(images, *b.first, *b.second, *b.segmenter, taxonomy, config, opts);

    const fs::path out = f.out;
    fs::create_directories(out);
    stcert::write_trial_log(out / "trials.jsonl", log);
    json summary;
    if (adversarial)
    {
        const auto adv = stcert::adversarial_summary(log);
        summary = stcert::adv_summary(adv);
        stcert::write_text(out / "report.csv", stcert::adv_csv(adv));
    }
    else
    {
        const auto report = stcert::summarize(log, f.dataset);
        summary = stcert::eval_summary(report);
        json pairs = json::array();
        for (const auto& p : stcert::similar_pairs(log, taxonomy, 10))
            pairs.push_back({{"truth", p.truth_lemma}, {"certified", p.certified_lemma}, {"similarity", p.similarity}});
        summary["similar_pairs"] = std::move(pairs);
        stcert::write_text(out / "report.csv", stcert::eval_csv(report));
    }
    write_json(out / "summary.json", summary);
    emit_charts(summary, out);
    write_manifest(out, name, argv, f, config, {{"images", images}, {"adversarial", adversarial}});
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_sweep(const SharedFlags& f, const std::string& images, const std::string& levels_text,
              const std::vector<std::string>& argv)
{
    const auto taxonomy = stcert::Taxonomy::load(f.taxonomy);
    taxonomy.dataset(f.dataset);
    auto config = make_config(f);
    config.mode = stcert::CertMode::Cropped;
    auto b = open_backends(f);
    const auto levels = parse_levels(levels_text);
    stcert::RunOptions opts{f.seed, f.workers, false};
    const auto sweep = stcert::cw_sweep(images, *b.first, *b.second, *b.segmenter, taxonomy, config, levels, opts);

    const fs::path out = f.out;
    fs::create_directories(out);
    std::vector<stcert::TrialRecord> all;
    for (const auto& p : sweep.points)
        all.insert(all.end(), p.log.begin(), p.log.end());
    stcert::write_trial_log(out / "trials.jsonl", all);
    stcert::write_text(out / "report.csv", stcert::sweep_csv(sweep));
    stcert::write_text(out / "per_class.csv", stcert::per_class_csv(sweep, taxonomy));
    const auto summary = stcert::sweep_summary(sweep);
    write_json(out / "summary.json", summary);
    emit_charts(summary, out);
    write_manifest(out, "sweep", argv, f, config, {{"images", images}, {"levels", levels}});
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_cross(const SharedFlags& f, const std::string& images, const std::vector<std::string>& specs,
              bool adversarial, const std::vector<std::string>& argv)
{
    const auto taxonomy = stcert::Taxonomy::load(f.taxonomy);
    if (!adversarial)
        taxonomy.dataset(f.dataset);
    const auto config = make_config(f);
    std::vector<std::shared_ptr<stcert::ClassifierBackend>> owned;
    std::vector<stcert::ClassifierBackend*> classifiers;
    for (const auto& s : specs)
    {
        owned.push_back(stcert::make_classifier(s));
        classifiers.push_back(owned.back().get());
    }
    auto segmenter = stcert::make_segmenter(f.segmenter);
    stcert::RunOptions opts{f.seed, f.workers, adversarial};
    const auto m = stcert::cross_matrix(images, classifiers, *segmenter, taxonomy, config, opts);

    const fs::path out = f.out;
    fs::create_directories(out);
    std::vector<stcert::TrialRecord> all;
    std::ostringstream pairs;
    bool header = true;
    for (const auto& row : m.cells)
    {
        for (const auto& cell : row)
        {
            all.insert(all.end(), cell.log.begin(), cell.log.end());
            auto csv = cell.adversarial ? stcert::adv_csv(*cell.adversarial) : stcert::eval_csv(*cell.metrics);
            if (!header)
                csv = csv.substr(csv.find('\n') + 1);
            header = false;
            pairs << csv;
        }
    }
    stcert::write_trial_log(out / "trials.jsonl", all);
    stcert::write_text(out / "report.csv", pairs.str());
    stcert::write_text(out / "matrix.csv", stcert::cross_csv(m));
    const auto summary = stcert::cross_summary(m);
    write_json(out / "summary.json", summary);
    emit_charts(summary, out);
    write_manifest(out, "cross", argv, f, config,
                   {{"images", images}, {"classifiers", specs}, {"adversarial", adversarial}});
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_report(const std::string& summary_path, const std::string& trials_path, const std::string& out)
{
    json summary;
    if (!summary_path.empty())
    {
        std::ifstream in(summary_path, std::ios::binary);
        if (!in)
            throw stcert::ConfigError("cannot open " + summary_path);
        summary = json::parse(in, nullptr, false);
        if (summary.is_discarded())
            throw stcert::ConfigError(summary_path + ": malformed JSON");
    }
    else
    {
        summary = stcert::summary_from_log(stcert::read_trial_log(trials_path));
    }
    for (const auto& file : stcert::render_report(summary, out))
        std::cout << (fs::path(out) / file).string() << '\n';
    return 0;
}

int cmd_render(const std::string& world, const std::string& taxonomy_path, const std::string& out)
{
    const auto spec = stcert::FakeWorldSpec::load(world);
    const auto taxonomy = stcert::Taxonomy::load(taxonomy_path);
    stcert::render_world(spec, taxonomy, out);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Second-thought certification of image classifier predictions"};
    app.set_version_flag("--version", STCERT_VERSION);
    app.require_subcommand(1);

    SharedFlags f;
    std::string image, images, levels = "0,1,2,3,4,5", summary_path, trials_path;
    std::vector<std::string> classifiers;
    bool adversarial = false;

    auto* certify = app.add_subcommand("certify", "Certify a single PNG image; exit 0/3/4 = Certified/Rejected/NoBox");
    certify->add_option("--image", image, "PNG image")->required();
    add_config_flags(*certify, f);
    add_backend_flags(*certify, f, true);

    auto add_run = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--images", images, "Image root (<root>/<synset>/<file>)")->required();
        sub->add_option("--out", f.out, "Output directory")->required();
        sub->add_option("--workers", f.workers)->check(CLI::PositiveNumber);
        add_config_flags(*sub, f);
        return sub;
    };
    auto* eval = add_run("eval", "Evaluate a class-folder image directory");
    add_backend_flags(*eval, f, true);
    eval->add_flag("--adversarial", adversarial, "Score outcomes only (Rejected/Certified/NoBox)");

    auto* adv = add_run("adv", "Evaluate adversarial inputs (overall success rate)");
    add_backend_flags(*adv, f, true);
    adv->add_flag("--adversarial", adversarial, "Accepted for symmetry; adv always scores adversarially");

    auto* sweep = add_run("sweep", "Context-width sweep in cropped mode plus the masked reference");
    add_backend_flags(*sweep, f, true);
    sweep->add_option("--levels", levels, "Comma-separated context levels");

    auto* cross = add_run("cross", "All first/second classifier pairs");
    cross->add_option("--classifiers", classifiers, "Classifier specs (comma-separated or repeated)")
        ->required()
        ->delimiter(',');
    cross->add_option("--segmenter", f.segmenter, "fake:<world.json> | proc:<command>")->required();
    cross->add_flag("--adversarial", adversarial, "Report overall success instead of consistency");

    auto* report = app.add_subcommand("report", "Render SVG charts from summary.json or trials.jsonl");
    auto* sopt = report->add_option("--summary", summary_path, "summary.json");
    report->add_option("--trials", trials_path, "trials.jsonl")->excludes(sopt);
    report->add_option("--out", f.out, "Output directory")->required();

    auto* render = app.add_subcommand("render", "Render a fake world's scenes into a class-folder directory");
    std::string world;
    render->add_option("--world", world, "Fake world JSON")->required();
    render->add_option("--taxonomy", f.taxonomy, "Taxonomy JSON file")->required();
    render->add_option("--out", f.out, "Output directory")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kExitUsage;
    }

    try
    {
        if (*certify)
            return cmd_certify(f, image);
        if (*eval)
            return cmd_eval(f, images, adversarial, "eval", args);
        if (*adv)
            return cmd_eval(f, images, true, "adv", args);
        if (*sweep)
            return cmd_sweep(f, images, levels, args);
        if (*cross)
            return cmd_cross(f, images, classifiers, adversarial, args);
        if (*report)
        {
            if (summary_path.empty() && trials_path.empty())
            {
                std::cerr << "report: one of --summary or --trials is required\n";
                return kExitUsage;
            }
            return cmd_report(summary_path, trials_path, f.out);
        }
        if (*render)
            return cmd_render(world, f.taxonomy, f.out);
    }
    catch (const stcert::ConfigError& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitUsage;
}
