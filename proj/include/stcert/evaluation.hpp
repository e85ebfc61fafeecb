#pragma once

#include "stcert/backends.hpp"
#include "stcert/certifier.hpp"
#include "stcert/rational.hpp"
#include "stcert/taxonomy.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace stcert
{

/// One evaluated image. `error` is set for trials that produced no verdict
/// (unreadable image, backend failure, unresolvable truth); those trials
/// carry no outcome and are excluded from every rate.
struct TrialRecord
{
    std::string image_id;
    std::optional<ClassId> truth;
    std::string dataset;
    bool adversarial = false;
    std::optional<std::string> error;

    Prediction original;
    Outcome outcome = Outcome::NoBox;
    std::optional<EvalCategory> category;
    bool out_of_dataset = false;
    std::string prompt_used;
    bool fallback_used = false;
    std::vector<BBox> boxes;
    std::vector<Prediction> second_predictions;

    nlohmann::json config;
    std::string first_backend;
    std::string second_backend;

    bool ok() const { return !error.has_value(); }

    nlohmann::json to_json() const;
    static TrialRecord from_json(const nlohmann::json& j);
};

void write_trial_log(const std::filesystem::path& path, const std::vector<TrialRecord>& log);
std::vector<TrialRecord> read_trial_log(const std::filesystem::path& path);

struct RunOptions
{
    std::uint64_t seed = 0;
    int workers = 1;
    bool adversarial = false;
    OutOfDatasetPolicy out_of_dataset = OutOfDatasetPolicy::TreatAsInter;
};

/// Certifies one image and scores it. Backend and taxonomy failures become
/// an error record rather than an exception.
TrialRecord run_trial(const ImageBuf& image,
                      const std::string& image_id,
                      std::optional<ClassId> truth,
                      ClassifierBackend& first,
                      ClassifierBackend& second,
                      SegmenterBackend& segmenter,
                      const Taxonomy& taxonomy,
                      const CertConfig& config,
                      const RunOptions& options = {});

/// Image files under <root>/<synset>/…, sorted; hidden files skipped.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& root);

/// One record per image under `root`, sorted by image id. The dataset is
/// taken from config.dataset. Trials run on options.workers threads only if
/// every backend declares itself thread-safe.
std::vector<TrialRecord> run_dataset(const std::filesystem::path& root,
                                     ClassifierBackend& first,
                                     ClassifierBackend& second,
                                     SegmenterBackend& segmenter,
                                     const Taxonomy& taxonomy,
                                     const CertConfig& config,
                                     const RunOptions& options = {});

struct MetricsReport
{
    std::string dataset;
    std::string first_backend;
    std::string second_backend;
    std::string mode;
    std::optional<int> context_level;
    std::array<std::int64_t, 6> counts{};
    std::int64_t total = 0;  // non-error trials
    std::int64_t errors = 0; // excluded from total

    std::int64_t count(EvalCategory c) const { return counts[static_cast<std::size_t>(c)]; }
    Rational rate(EvalCategory c) const { return Rational(count(c), total); }
    /// Share of trials whose original and second-thought predictions agree.
    Rational consistency() const
    {
        return Rational(count(EvalCategory::CertCorr) + count(EvalCategory::IntraError) +
                            count(EvalCategory::InterError),
                        total);
    }

    nlohmann::json to_json() const;
};

MetricsReport summarize(const std::vector<TrialRecord>& log, const std::optional<std::string>& dataset = {});

/// Same counting restricted to trials whose truth is `truth`.
MetricsReport summarize_class(const std::vector<TrialRecord>& log, ClassId truth);

struct AdvReport
{
    std::string first_backend;
    std::string second_backend;
    std::int64_t rejected = 0;
    std::int64_t certified = 0;
    std::int64_t nobox = 0;
    std::int64_t total = 0;
    std::int64_t errors = 0;

    Rational detect_rate() const { return Rational(rejected, total); }
    Rational certify_rate() const { return Rational(certified, total); }
    Rational nobox_rate() const { return Rational(nobox, total); }
    Rational overall_success() const { return Rational(rejected + nobox, total); }

    nlohmann::json to_json() const;
};

AdvReport adversarial_summary(const std::vector<TrialRecord>& log);

struct SweepPoint
{
    std::string label; // "mask" or "cw<k>"
    std::optional<int> level;
    CertConfig config;
    std::vector<TrialRecord> log;
    MetricsReport report;
};

struct ClassDelta
{
    ClassId truth = 0;
    Rational mask_rate;              // CertCorr rate at the masked reference
    std::vector<Rational> rates;     // per sweep level
    std::vector<double> deltas;      // rates[k] - mask_rate, signed
};

struct SweepResult
{
    std::vector<SweepPoint> points; // masked reference first
    std::vector<ClassDelta> per_class;
};

/// Masked reference plus one cropped run per context level.
SweepResult cw_sweep(const std::filesystem::path& root,
                     ClassifierBackend& first,
                     ClassifierBackend& second,
                     SegmenterBackend& segmenter,
                     const Taxonomy& taxonomy,
                     const CertConfig& base_config,
                     const std::vector<int>& levels,
                     const RunOptions& options = {});

struct CrossCell
{
    std::vector<TrialRecord> log;
    std::optional<MetricsReport> metrics;
    std::optional<AdvReport> adversarial;
};

struct CrossMatrix
{
    std::vector<std::string> names;
    std::vector<std::vector<CrossCell>> cells; // [first][second]
};

/// Entry (i, j) certifies with first = classifiers[i], second = classifiers[j].
CrossMatrix cross_matrix(const std::filesystem::path& root,
                         const std::vector<ClassifierBackend*>& classifiers,
                         SegmenterBackend& segmenter,
                         const Taxonomy& taxonomy,
                         const CertConfig& config,
                         const RunOptions& options = {});

struct SimilarPair
{
    ClassId truth = 0;
    ClassId certified = 0;
    std::string truth_lemma;
    std::string certified_lemma;
    double similarity = 0.0;
};

/// Distinct (truth, certified) pairs among Intra/InterError trials, most
/// similar first; ties broken by the lemma pair.
std::vector<SimilarPair> similar_pairs(const std::vector<TrialRecord>& log, const Taxonomy& taxonomy, int top_n);

} // namespace stcert
