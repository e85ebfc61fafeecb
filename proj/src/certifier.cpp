#include "stcert/certifier.hpp"

#include "stcert/error.hpp"

#include <algorithm>

namespace stcert
{

using nlohmann::json;

std::string_view to_string(CertMode mode)
{
    return mode == CertMode::Masked ? "masked" : "cropped";
}

std::string_view to_string(Outcome outcome)
{
    switch (outcome)
    {
    case Outcome::Certified:
        return "Certified";
    case Outcome::Rejected:
        return "Rejected";
    case Outcome::NoBox:
        return "NoBox";
    }
    return "?";
}

std::string_view to_string(EvalCategory category)
{
    switch (category)
    {
    case EvalCategory::CertCorr:
        return "CertCorr";
    case EvalCategory::IntraError:
        return "IntraError";
    case EvalCategory::InterError:
        return "InterError";
    case EvalCategory::Miss:
        return "Miss";
    case EvalCategory::TrueReject:
        return "TrueReject";
    case EvalCategory::NoBox:
        return "NoBox";
    }
    return "?";
}

CertMode parse_mode(std::string_view text)
{
    if (text == "masked")
        return CertMode::Masked;
    if (text == "cropped")
        return CertMode::Cropped;
    throw ConfigError("unknown mode \"" + std::string(text) + "\" (expected masked or cropped)");
}

Outcome parse_outcome(std::string_view text)
{
    for (auto o : {Outcome::Certified, Outcome::Rejected, Outcome::NoBox})
        if (to_string(o) == text)
            return o;
    throw ConfigError("unknown outcome \"" + std::string(text) + "\"");
}

EvalCategory parse_category(std::string_view text)
{
    for (auto c : kAllCategories)
        if (to_string(c) == text)
            return c;
    throw ConfigError("unknown category \"" + std::string(text) + "\"");
}

void CertConfig::validate() const
{
    if (context_level < 0 || context_level > kMaxContextLevel)
        throw ConfigError("context level must be in 0.." + std::to_string(kMaxContextLevel));
    if (context_step < 0.0)
        throw ConfigError("context step must be non-negative");
    if (target_size < 1)
        throw ConfigError("target size must be positive");
    if (!(box_threshold >= 0.0 && box_threshold <= 1.0))
        throw ConfigError("box threshold must be in [0,1]");
    if (!(text_threshold >= 0.0 && text_threshold <= 1.0))
        throw ConfigError("text threshold must be in [0,1]");
}

json CertConfig::to_json() const
{
    return {{"mode", to_string(mode)},
            {"context_level", context_level},
            {"context_step", context_step},
            {"target_size", target_size},
            {"blank", {blank.rgb[0], blank.rgb[1], blank.rgb[2]}},
            {"box_threshold", box_threshold},
            {"text_threshold", text_threshold},
            {"superclass_fallback", superclass_fallback},
            {"dataset", dataset}};
}

CertConfig CertConfig::from_json(const json& j)
{
    CertConfig c;
    try
    {
        c.mode = parse_mode(j.value("mode", std::string("masked")));
        c.context_level = j.value("context_level", 0);
        c.context_step = j.value("context_step", kDefaultContextStep);
        c.target_size = j.value("target_size", kDefaultTargetSize);
        if (j.contains("blank"))
        {
            auto b = j["blank"].get<std::vector<int>>();
            if (b.size() != 3)
                throw ConfigError("blank must be [r,g,b]");
            for (int i = 0; i < 3; ++i)
                c.blank.rgb[i] = static_cast<std::uint8_t>(std::clamp(b[i], 0, 255));
        }
        c.box_threshold = j.value("box_threshold", kDefaultBoxThreshold);
        c.text_threshold = j.value("text_threshold", kDefaultTextThreshold);
        c.superclass_fallback = j.value("superclass_fallback", true);
        c.dataset = j.value("dataset", std::string());
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("certification config: ") + e.what());
    }
    c.validate();
    return c;
}

ImageBuf secondary_input(const ImageBuf& image, const Detection& detection, const CertConfig& config)
{
    if (config.mode == CertMode::Masked)
    {
        const auto masked = apply_mask(image, detection.mask, config.blank);
        return crop_resize(masked, BBox{0, 0, image.width(), image.height()}, config.target_size);
    }
    // Clip the detector's box to the frame before widening it.
    BBox box{std::max(detection.box.x0, 0), std::max(detection.box.y0, 0),
             std::min(detection.box.x1, image.width()), std::min(detection.box.y1, image.height())};
    const auto roi = expand_box(box, config.context_level, image.width(), image.height(), config.context_step);
    return crop_resize(image, roi, config.target_size);
}

Outcome verdict(const Prediction& original, const std::vector<Prediction>& second_predictions)
{
    if (second_predictions.empty())
        return Outcome::NoBox;
    const bool agree = std::any_of(second_predictions.begin(), second_predictions.end(),
                                   [&](const Prediction& p) { return p.class_id == original.class_id; });
    return agree ? Outcome::Certified : Outcome::Rejected;
}

CertifiedPrediction certify_prediction(const ImageBuf& image, const Prediction& original, ClassifierBackend& second,
                                       SegmenterBackend& segmenter, const Taxonomy& taxonomy,
                                       const CertConfig& config, ClassifierBackend* first)
{
    config.validate();
    CertifiedPrediction cp;
    cp.original = original;
    cp.prompt_used = taxonomy.prompt_for(original.class_id);
    cp.detections = segmenter.ground(image, cp.prompt_used, config.box_threshold, config.text_threshold);

    if (cp.detections.empty() && config.superclass_fallback && !config.dataset.empty())
    {
        if (auto super = taxonomy.superclass_of(original.class_id, config.dataset))
        {
            cp.prompt_used = *super;
            cp.fallback_used = true;
            cp.detections = segmenter.ground(image, cp.prompt_used, config.box_threshold, config.text_threshold);
        }
    }
    if (cp.detections.empty())
    {
        cp.outcome = Outcome::NoBox;
        return cp;
    }

    for (const auto& det : cp.detections)
    {
        auto input = secondary_input(image, det, config);
        // Same classifier on an unchanged frame: reuse the first answer.
        if (first == &second && input == image)
            cp.second_predictions.push_back(original);
        else
            cp.second_predictions.push_back(second.classify(input));
    }
    cp.outcome = verdict(cp.original, cp.second_predictions);
    return cp;
}

CertifiedPrediction certify(const ImageBuf& image, ClassifierBackend& first, ClassifierBackend& second,
                            SegmenterBackend& segmenter, const Taxonomy& taxonomy, const CertConfig& config)
{
    config.validate();
    const auto original = first.classify(image);
    return certify_prediction(image, original, second, segmenter, taxonomy, config, &first);
}

EvalCategory evaluate_trial(const CertifiedPrediction& cp, ClassId truth, const Taxonomy& taxonomy,
                            std::string_view dataset, OutOfDatasetPolicy policy)
{
    // error_kind validates that the truth resolves, for every outcome.
    const auto kind = taxonomy.error_kind(cp.original.class_id, truth, dataset, policy);
    switch (cp.outcome)
    {
    case Outcome::NoBox:
        return EvalCategory::NoBox;
    case Outcome::Rejected:
        return kind == ErrorKind::Correct ? EvalCategory::Miss : EvalCategory::TrueReject;
    case Outcome::Certified:
        break;
    }
    switch (kind)
    {
    case ErrorKind::Correct:
        return EvalCategory::CertCorr;
    case ErrorKind::Intra:
        return EvalCategory::IntraError;
    case ErrorKind::Inter:
        return EvalCategory::InterError;
    }
    return EvalCategory::InterError;
}

json to_json(const CertifiedPrediction& cp, const Taxonomy* taxonomy)
{
    auto pred = [&](const Prediction& p) {
        json j = {{"class_id", p.class_id}, {"confidence", p.confidence}};
        if (taxonomy && taxonomy->contains(p.class_id))
            j["lemma"] = taxonomy->entry(p.class_id).lemma;
        return j;
    };
    json dets = json::array();
    for (const auto& d : cp.detections)
        dets.push_back({{"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}}, {"score", d.score}});
    json seconds = json::array();
    for (const auto& p : cp.second_predictions)
        seconds.push_back(pred(p));
    return {{"original", pred(cp.original)},
            {"outcome", to_string(cp.outcome)},
            {"prompt_used", cp.prompt_used},
            {"fallback_used", cp.fallback_used},
            {"detections", std::move(dets)},
            {"second_predictions", std::move(seconds)}};
}

} // namespace stcert
