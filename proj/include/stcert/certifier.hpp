#pragma once

#include "stcert/backends.hpp"
#include "stcert/image.hpp"
#include "stcert/taxonomy.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace stcert
{

enum class CertMode
{
    Masked,  ///< background blanked, full frame resized
    Cropped, ///< ROI box (optionally widened) cropped and resized
};

enum class Outcome
{
    Certified,
    Rejected,
    NoBox
};

enum class EvalCategory
{
    CertCorr,
    IntraError,
    InterError,
    Miss,
    TrueReject,
    NoBox
};

inline constexpr EvalCategory kAllCategories[] = {EvalCategory::CertCorr, EvalCategory::IntraError,
                                                  EvalCategory::InterError, EvalCategory::Miss,
                                                  EvalCategory::TrueReject, EvalCategory::NoBox};

std::string_view to_string(CertMode mode);
std::string_view to_string(Outcome outcome);
std::string_view to_string(EvalCategory category);
CertMode parse_mode(std::string_view text);
Outcome parse_outcome(std::string_view text);
EvalCategory parse_category(std::string_view text);

struct CertConfig
{
    CertMode mode = CertMode::Masked;
    int context_level = 0; // cropped mode only
    double context_step = kDefaultContextStep;
    int target_size = kDefaultTargetSize;
    BlankFill blank;
    double box_threshold = kDefaultBoxThreshold;
    double text_threshold = kDefaultTextThreshold;
    bool superclass_fallback = true;
    std::string dataset; // super-class fallback prompts and scoring

    void validate() const;
    nlohmann::json to_json() const;
    static CertConfig from_json(const nlohmann::json& j);
};

struct CertifiedPrediction
{
    Prediction original;
    Outcome outcome = Outcome::NoBox;
    std::string prompt_used;
    bool fallback_used = false;
    std::vector<Detection> detections;
    std::vector<Prediction> second_predictions; // one per detection
};

/// Secondary classifier input for one detection.
ImageBuf secondary_input(const ImageBuf& image, const Detection& detection, const CertConfig& config);

/// Runs the two-stage certification. `first` and `second` may be the same
/// object. Backend exceptions propagate; no verdict is fabricated.
CertifiedPrediction certify(const ImageBuf& image,
                            ClassifierBackend& first,
                            ClassifierBackend& second,
                            SegmenterBackend& segmenter,
                            const Taxonomy& taxonomy,
                            const CertConfig& config);

/// Same as certify() but starting from an already known original prediction.
CertifiedPrediction certify_prediction(const ImageBuf& image,
                                       const Prediction& original,
                                       ClassifierBackend& second,
                                       SegmenterBackend& segmenter,
                                       const Taxonomy& taxonomy,
                                       const CertConfig& config,
                                       ClassifierBackend* first = nullptr);

/// Certified iff the original class is among the second predictions; NoBox
/// when there are none.
Outcome verdict(const Prediction& original, const std::vector<Prediction>& second_predictions);

/// Maps a verdict and the ground truth onto the six-way breakdown.
EvalCategory evaluate_trial(const CertifiedPrediction& cp,
                            ClassId truth,
                            const Taxonomy& taxonomy,
                            std::string_view dataset,
                            OutOfDatasetPolicy policy = OutOfDatasetPolicy::TreatAsInter);

nlohmann::json to_json(const CertifiedPrediction& cp, const Taxonomy* taxonomy = nullptr);

} // namespace stcert
