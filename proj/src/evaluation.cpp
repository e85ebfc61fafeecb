#include "stcert/evaluation.hpp"

#include "stcert/codec.hpp"
#include "stcert/error.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>
#include <tuple>

namespace stcert
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

constexpr const char* kAdversarialTag = "Adversarial";

json prediction_json(const Prediction& p)
{
    return {{"class_id", p.class_id}, {"confidence", p.confidence}};
}

Prediction prediction_from(const json& j)
{
    return {j.at("class_id").get<int>(), j.at("confidence").get<double>()};
}

std::string common_or_mixed(const std::vector<std::string>& names)
{
    if (names.empty())
        return {};
    for (const auto& n : names)
        if (n != names.front())
            return "mixed";
    return names.front();
}

} // namespace

json TrialRecord::to_json() const
{
    json j;
    j["image_id"] = image_id;
    j["truth"] = truth ? json(*truth) : json(nullptr);
    j["dataset"] = dataset;
    j["adversarial"] = adversarial;
    j["error"] = error ? json(*error) : json(nullptr);
    j["config"] = config;
    j["first_backend"] = first_backend;
    j["second_backend"] = second_backend;
    if (error)
    {
        j["original"] = nullptr;
        j["outcome"] = nullptr;
        j["category"] = nullptr;
        return j;
    }
    j["original"] = prediction_json(original);
    j["outcome"] = to_string(outcome);
    if (adversarial)
        j["category"] = kAdversarialTag;
    else
        j["category"] = category ? json(to_string(*category)) : json(nullptr);
    j["out_of_dataset"] = out_of_dataset;
    j["prompt_used"] = prompt_used;
    j["fallback_used"] = fallback_used;
    json jboxes = json::array();
    for (const auto& b : boxes)
        jboxes.push_back({b.x0, b.y0, b.x1, b.y1});
    j["boxes"] = std::move(jboxes);
    json seconds = json::array();
    for (const auto& p : second_predictions)
        seconds.push_back(prediction_json(p));
    j["second_predictions"] = std::move(seconds);
    return j;
}

TrialRecord TrialRecord::from_json(const json& j)
{
    TrialRecord r;
    try
    {
        r.image_id = j.at("image_id").get<std::string>();
        if (!j.at("truth").is_null())
            r.truth = j["truth"].get<int>();
        r.dataset = j.value("dataset", std::string());
        r.adversarial = j.value("adversarial", false);
        if (j.contains("error") && !j["error"].is_null())
            r.error = j["error"].get<std::string>();
        r.config = j.value("config", json::object());
        r.first_backend = j.value("first_backend", std::string());
        r.second_backend = j.value("second_backend", std::string());
        if (r.error)
            return r;
        r.original = prediction_from(j.at("original"));
        r.outcome = parse_outcome(j.at("outcome").get<std::string>());
        if (const auto& c = j.at("category"); c.is_string() && c.get<std::string>() != kAdversarialTag)
            r.category = parse_category(c.get<std::string>());
        r.out_of_dataset = j.value("out_of_dataset", false);
        r.prompt_used = j.value("prompt_used", std::string());
        r.fallback_used = j.value("fallback_used", false);
        for (const auto& b : j.value("boxes", json::array()))
            r.boxes.push_back({b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()});
        for (const auto& p : j.value("second_predictions", json::array()))
            r.second_predictions.push_back(prediction_from(p));
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("malformed trial record: ") + e.what());
    }
    return r;
}

void write_trial_log(const fs::path& path, const std::vector<TrialRecord>& log)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    for (const auto& r : log)
        out << r.to_json().dump() << '\n';
}

std::vector<TrialRecord> read_trial_log(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    std::vector<TrialRecord> log;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno)
    {
        if (line.empty())
            continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON");
        try
        {
            log.push_back(TrialRecord::from_json(j));
        }
        catch (const ConfigError& e)
        {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return log;
}

TrialRecord run_trial(const ImageBuf& image, const std::string& image_id, std::optional<ClassId> truth,
                      ClassifierBackend& first, ClassifierBackend& second, SegmenterBackend& segmenter,
                      const Taxonomy& taxonomy, const CertConfig& config, const RunOptions& options)
{
    TrialRecord r;
    r.image_id = image_id;
    r.truth = truth;
    r.dataset = config.dataset;
    r.adversarial = options.adversarial;
    r.config = config.to_json();
    r.config["seed"] = options.seed;
    r.first_backend = first.info().name;
    r.second_backend = second.info().name;

    if (!options.adversarial)
    {
        if (!truth)
        {
            r.error = "no ground truth for " + image_id;
            return r;
        }
        if (!taxonomy.contains(*truth) || !taxonomy.superclass_of(*truth, config.dataset))
        {
            r.error = "ground truth " + std::to_string(*truth) + " not in dataset \"" + config.dataset + "\"";
            return r;
        }
    }

    try
    {
        const auto cp = certify(image, first, second, segmenter, taxonomy, config);
        r.original = cp.original;
        r.outcome = cp.outcome;
        r.prompt_used = cp.prompt_used;
        r.fallback_used = cp.fallback_used;
        for (const auto& d : cp.detections)
            r.boxes.push_back(d.box);
        r.second_predictions = cp.second_predictions;
        if (!config.dataset.empty() && taxonomy.has_dataset(config.dataset))
            r.out_of_dataset = !taxonomy.superclass_of(cp.original.class_id, config.dataset).has_value();
        if (!options.adversarial)
            r.category = evaluate_trial(cp, *truth, taxonomy, config.dataset, options.out_of_dataset);
    }
    catch (const std::exception& e)
    {
        r.error = e.what();
    }
    return r;
}

std::vector<fs::path> list_images(const fs::path& root)
{
    if (!fs::is_directory(root))
        throw ConfigError("image root " + root.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& cls : fs::directory_iterator(root))
    {
        if (!cls.is_directory() || cls.path().filename().string().starts_with("."))
            continue;
        for (const auto& f : fs::directory_iterator(cls.path()))
        {
            if (f.is_regular_file() && !f.path().filename().string().starts_with("."))
                out.push_back(f.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<TrialRecord> run_dataset(const fs::path& root, ClassifierBackend& first, ClassifierBackend& second,
                                     SegmenterBackend& segmenter, const Taxonomy& taxonomy,
                                     const CertConfig& config, const RunOptions& options)
{
    config.validate();
    if (!options.adversarial)
        taxonomy.dataset(config.dataset);

    const auto files = list_images(root);
    std::vector<TrialRecord> log(files.size());

    auto run_one = [&](std::size_t i) {
        const auto& path = files[i];
        const auto image_id = fs::relative(path, root).generic_string();
        const auto folder = path.parent_path().filename().string();
        const auto truth = taxonomy.find_synset(folder);
        CertConfig cfg = config;
        ImageBuf image;
        try
        {
            image = read_png(path);
        }
        catch (const std::exception& e)
        {
            // Build the error record through run_trial's bookkeeping.
            TrialRecord r;
            r.image_id = image_id;
            r.truth = truth;
            r.dataset = cfg.dataset;
            r.adversarial = options.adversarial;
            r.config = cfg.to_json();
            r.config["seed"] = options.seed;
            r.first_backend = first.info().name;
            r.second_backend = second.info().name;
            r.error = e.what();
            log[i] = std::move(r);
            return;
        }
        log[i] = run_trial(image, image_id, truth, first, second, segmenter, taxonomy, cfg, options);
    };

    const bool parallel = first.info().thread_safe && second.info().thread_safe && segmenter.info().thread_safe;
    const auto workers = parallel ? static_cast<std::size_t>(std::max(1, options.workers)) : std::size_t{1};
    if (workers <= 1 || files.size() <= 1)
    {
        for (std::size_t i = 0; i < files.size(); ++i)
            run_one(i);
    }
    else
    {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, files.size()); ++w)
        {
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < files.size();)
                    run_one(i);
            });
        }
        for (auto& t : pool)
            t.join();
    }

    std::stable_sort(log.begin(), log.end(),
                     [](const TrialRecord& a, const TrialRecord& b) { return a.image_id < b.image_id; });
    return log;
}

json MetricsReport::to_json() const
{
    json jcounts = json::object();
    json jrates = json::object();
    for (auto c : kAllCategories)
    {
        jcounts[std::string(to_string(c))] = count(c);
        jrates[std::string(to_string(c))] = rate(c).value();
    }
    return {{"dataset", dataset},
            {"first_backend", first_backend},
            {"second_backend", second_backend},
            {"mode", mode},
            {"context_level", context_level ? json(*context_level) : json(nullptr)},
            {"counts", std::move(jcounts)},
            {"rates", std::move(jrates)},
            {"total", total},
            {"errors", errors},
            {"consistency_rate", consistency().value()},
            {"assumptions", {{"denominator", "all evaluated images including NoBox; backend errors excluded"}}}};
}

MetricsReport summarize(const std::vector<TrialRecord>& log, const std::optional<std::string>& dataset)
{
    MetricsReport m;
    if (dataset)
        m.dataset = *dataset;
    else if (!log.empty())
        m.dataset = log.front().dataset;

    std::vector<std::string> firsts, seconds, modes;
    std::set<int> levels;
    for (const auto& r : log)
    {
        if (r.dataset != m.dataset)
            throw ConfigError("log mixes datasets \"" + m.dataset + "\" and \"" + r.dataset + "\"");
        if (r.adversarial)
            throw ConfigError("summarize() expects ground-truth records; " + r.image_id + " is adversarial");
        firsts.push_back(r.first_backend);
        seconds.push_back(r.second_backend);
        const auto mode = r.config.value("mode", std::string());
        modes.push_back(mode);
        if (mode == "cropped")
            levels.insert(r.config.value("context_level", 0));
        if (!r.ok())
        {
            ++m.errors;
            continue;
        }
        if (!r.category)
            throw ConfigError("record " + r.image_id + " has no category");
        ++m.counts[static_cast<std::size_t>(*r.category)];
        ++m.total;
    }
    m.first_backend = common_or_mixed(firsts);
    m.second_backend = common_or_mixed(seconds);
    m.mode = common_or_mixed(modes);
    if (levels.size() == 1)
        m.context_level = *levels.begin();
    return m;
}

MetricsReport summarize_class(const std::vector<TrialRecord>& log, ClassId truth)
{
    std::vector<TrialRecord> subset;
    std::copy_if(log.begin(), log.end(), std::back_inserter(subset),
                 [&](const TrialRecord& r) { return r.truth == truth; });
    auto m = summarize(subset, log.empty() ? std::nullopt : std::optional<std::string>(log.front().dataset));
    return m;
}

json AdvReport::to_json() const
{
    return {{"first_backend", first_backend},
            {"second_backend", second_backend},
            {"counts", {{"Rejected", rejected}, {"Certified", certified}, {"NoBox", nobox}}},
            {"detect_rate", detect_rate().value()},
            {"certify_rate", certify_rate().value()},
            {"nobox_rate", nobox_rate().value()},
            {"overall_success", overall_success().value()},
            {"total", total},
            {"errors", errors}};
}

AdvReport adversarial_summary(const std::vector<TrialRecord>& log)
{
    AdvReport a;
    std::vector<std::string> firsts, seconds;
    for (const auto& r : log)
    {
        if (!r.adversarial || r.category)
            throw ConfigError("adversarial_summary() expects adversarial records; " + r.image_id +
                              " was scored against ground truth");
        firsts.push_back(r.first_backend);
        seconds.push_back(r.second_backend);
        if (!r.ok())
        {
            ++a.errors;
            continue;
        }
        ++a.total;
        switch (r.outcome)
        {
        case Outcome::Rejected:
            ++a.rejected;
            break;
        case Outcome::Certified:
            ++a.certified;
            break;
        case Outcome::NoBox:
            ++a.nobox;
            break;
        }
    }
    a.first_backend = common_or_mixed(firsts);
    a.second_backend = common_or_mixed(seconds);
    return a;
}

SweepResult cw_sweep(const fs::path& root, ClassifierBackend& first, ClassifierBackend& second,
                     SegmenterBackend& segmenter, const Taxonomy& taxonomy, const CertConfig& base_config,
                     const std::vector<int>& levels, const RunOptions& options)
{
    for (int k : levels)
        if (k < 0 || k > kMaxContextLevel)
            throw ConfigError("sweep level " + std::to_string(k) + " outside 0.." + std::to_string(kMaxContextLevel));

    SweepResult result;
    auto add_point = [&](std::string label, std::optional<int> level, CertConfig cfg) {
        SweepPoint p{std::move(label), level, cfg, run_dataset(root, first, second, segmenter, taxonomy, cfg, options), {}};
        p.report = summarize(p.log, cfg.dataset);
        result.points.push_back(std::move(p));
    };

    CertConfig masked = base_config;
    masked.mode = CertMode::Masked;
    masked.context_level = 0;
    add_point("mask", std::nullopt, masked);
    for (int k : levels)
    {
        CertConfig cropped = base_config;
        cropped.mode = CertMode::Cropped;
        cropped.context_level = k;
        add_point("cw" + std::to_string(k), k, cropped);
    }

    std::set<ClassId> truths;
    for (const auto& p : result.points)
        for (const auto& r : p.log)
            if (r.ok() && r.truth)
                truths.insert(*r.truth);
    for (ClassId t : truths)
    {
        ClassDelta row;
        row.truth = t;
        row.mask_rate = summarize_class(result.points.front().log, t).rate(EvalCategory::CertCorr);
        for (std::size_t k = 1; k < result.points.size(); ++k)
        {
            auto rate = summarize_class(result.points[k].log, t).rate(EvalCategory::CertCorr);
            row.rates.push_back(rate);
            row.deltas.push_back(rate.value() - row.mask_rate.value());
        }
        result.per_class.push_back(std::move(row));
    }
    return result;
}

CrossMatrix cross_matrix(const fs::path& root, const std::vector<ClassifierBackend*>& classifiers,
                         SegmenterBackend& segmenter, const Taxonomy& taxonomy, const CertConfig& config,
                         const RunOptions& options)
{
    if (classifiers.empty())
        throw ConfigError("cross_matrix needs at least one classifier");
    CrossMatrix m;
    for (auto* c : classifiers)
        m.names.push_back(c->info().name);
    m.cells.resize(classifiers.size());
    for (std::size_t i = 0; i < classifiers.size(); ++i)
    {
        for (std::size_t j = 0; j < classifiers.size(); ++j)
        {
            CrossCell cell;
            cell.log = run_dataset(root, *classifiers[i], *classifiers[j], segmenter, taxonomy, config, options);
            if (options.adversarial)
                cell.adversarial = adversarial_summary(cell.log);
            else
                cell.metrics = summarize(cell.log, config.dataset);
            m.cells[i].push_back(std::move(cell));
        }
    }
    return m;
}

std::vector<SimilarPair> similar_pairs(const std::vector<TrialRecord>& log, const Taxonomy& taxonomy, int top_n)
{
    if (top_n <= 0)
        return {};
    std::set<std::pair<ClassId, ClassId>> seen;
    std::vector<SimilarPair> pairs;
    for (const auto& r : log)
    {
        if (!r.ok() || !r.truth || !r.category)
            continue;
        if (*r.category != EvalCategory::IntraError && *r.category != EvalCategory::InterError)
            continue;
        if (!seen.emplace(*r.truth, r.original.class_id).second)
            continue;
        pairs.push_back({*r.truth, r.original.class_id, taxonomy.entry(*r.truth).lemma,
                         taxonomy.entry(r.original.class_id).lemma,
                         taxonomy.path_similarity(*r.truth, r.original.class_id)});
    }
    std::sort(pairs.begin(), pairs.end(), [](const SimilarPair& a, const SimilarPair& b) {
        if (a.similarity != b.similarity)
            return a.similarity > b.similarity;
        return std::tie(a.truth_lemma, a.certified_lemma, a.truth, a.certified) <
               std::tie(b.truth_lemma, b.certified_lemma, b.truth, b.certified);
    });
    if (pairs.size() > static_cast<std::size_t>(top_n))
        pairs.resize(static_cast<std::size_t>(top_n));
    return pairs;
}

} // namespace stcert
