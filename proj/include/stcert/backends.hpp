#pragma once

#include "stcert/image.hpp"
#include "stcert/taxonomy.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace stcert
{

struct Prediction
{
    ClassId class_id = 0;
    double confidence = 0.0;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct Detection
{
    BBox box;
    BitMask mask;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct BackendInfo
{
    std::string name;
    std::string kind; // "classifier" or "segmenter"
    int class_count = 0;
    bool thread_safe = false;
};

constexpr double kDefaultBoxThreshold = 0.30;
constexpr double kDefaultTextThreshold = 0.25;

/// Image classifier. classify() may be called concurrently only when
/// info().thread_safe is true.
class ClassifierBackend
{
public:
    virtual ~ClassifierBackend() = default;
    virtual Prediction classify(const ImageBuf& image) = 0;
    virtual BackendInfo info() const = 0;
};

/// Text-prompted detector + segmenter. Every returned detection has
/// score >= box_threshold.
class SegmenterBackend
{
public:
    virtual ~SegmenterBackend() = default;
    virtual std::vector<Detection> ground(const ImageBuf& image,
                                          std::string_view prompt,
                                          double box_threshold = kDefaultBoxThreshold,
                                          double text_threshold = kDefaultTextThreshold) = 0;
    virtual BackendInfo info() const = 0;
};

} // namespace stcert
